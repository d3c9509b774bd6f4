//! Q24.8 fixed point and 16-bit input quantization.

use std::fmt;

use crate::event::Timestamp;
use crate::flow::LocalFlowEvent;

const FRAC_BITS: u32 = 8;
const ONE: i64 = 1 << FRAC_BITS;

/// Signed 32-bit fixed point with 8 fractional bits (resolution 1/256).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FixedQ24_8 {
    pub raw: i32,
}

impl FixedQ24_8 {
    pub const RESOLUTION: f64 = 1.0 / ONE as f64;
    pub const MAX: Self = Self { raw: i32::MAX };
    pub const MIN: Self = Self { raw: i32::MIN };

    pub const fn from_raw(raw: i32) -> Self {
        Self { raw }
    }

    /// Nearest representable value (ties to even), saturating.
    pub fn from_real(v: f64) -> Self {
        let scaled = (v * ONE as f64).round_ties_even();
        Self {
            raw: scaled.clamp(f64::from(i32::MIN), f64::from(i32::MAX)) as i32,
        }
    }

    /// `num / den` rounded to the nearest Q24.8 value (ties to even),
    /// saturating. `den` must be non-zero.
    pub fn from_ratio(num: i64, den: u64) -> Self {
        debug_assert!(den > 0);
        let num = i128::from(num) * i128::from(ONE);
        let den = i128::from(den);
        let q = num.div_euclid(den);
        let r = num.rem_euclid(den);
        let q = match (2 * r).cmp(&den) {
            std::cmp::Ordering::Greater => q + 1,
            std::cmp::Ordering::Equal => q + (q & 1),
            std::cmp::Ordering::Less => q,
        };
        Self {
            raw: q.clamp(i128::from(i32::MIN), i128::from(i32::MAX)) as i32,
        }
    }

    pub fn to_real(self) -> f64 {
        f64::from(self.raw) / ONE as f64
    }
}

impl fmt::Display for FixedQ24_8 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_real())
    }
}

/// A local-flow event as the accelerator receives it: flow channels rounded
/// to 16-bit integers in pixels per second.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantizedFlowEvent {
    pub x: u16,
    pub y: u16,
    pub t: Timestamp,
    pub vx_q: i16,
    pub vy_q: i16,
    pub mag_q: i16,
}

/// Rounds to nearest (ties to even) and clamps into `i16`. The flag reports
/// whether clamping happened.
fn quantize_channel(v: f64) -> (i16, bool) {
    let r = v.round_ties_even();
    if r > f64::from(i16::MAX) {
        (i16::MAX, true)
    } else if r < f64::from(i16::MIN) {
        (i16::MIN, true)
    } else {
        (r as i16, false)
    }
}

/// Quantizes one event; returns the number of channels that saturated.
pub fn quantize_flow_event(e: &LocalFlowEvent) -> (QuantizedFlowEvent, u32) {
    let (vx_q, sx) = quantize_channel(e.vx);
    let (vy_q, sy) = quantize_channel(e.vy);
    let (mag_q, sm) = quantize_channel(e.mag);
    let q = QuantizedFlowEvent {
        x: e.x,
        y: e.y,
        t: e.t,
        vx_q,
        vy_q,
        mag_q,
    };
    (q, u32::from(sx) + u32::from(sy) + u32::from(sm))
}

/// Quantizer that keeps a running count of saturated channels.
#[derive(Debug, Clone, Default)]
pub struct Quantizer {
    saturations: u64,
}

impl Quantizer {
    pub fn quantize(&mut self, e: &LocalFlowEvent) -> QuantizedFlowEvent {
        let (q, sat) = quantize_flow_event(e);
        self.saturations += u64::from(sat);
        q
    }

    pub fn saturations(&self) -> u64 {
        self.saturations
    }
}
