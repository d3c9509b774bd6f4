use crate::error::{Error, Result};
use crate::event::Timestamp;

/// An event annotated with its local (normal) flow, in pixels per second.
///
/// This is the unit of input for every true-flow engine. Zero-magnitude flow
/// is never represented.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFlowEvent {
    pub x: u16,
    pub y: u16,
    pub t: Timestamp,
    pub vx: f64,
    pub vy: f64,
    pub mag: f64,
}

impl LocalFlowEvent {
    /// Builds an event from flow components, deriving the magnitude.
    pub fn new(x: u16, y: u16, t: Timestamp, vx: f64, vy: f64) -> Result<Self> {
        let mag = vx.hypot(vy);
        if !(mag > 0.0 && mag.is_finite()) {
            return Err(Error::argument(format!(
                "local flow ({vx}, {vy}) at ({x}, {y}, {t}) has no usable magnitude"
            )));
        }
        Ok(Self {
            x,
            y,
            t,
            vx,
            vy,
            mag,
        })
    }

    /// Builds an event with an explicitly supplied magnitude, which must agree
    /// with the components to 1e-6 relative tolerance.
    pub fn with_magnitude(
        x: u16,
        y: u16,
        t: Timestamp,
        vx: f64,
        vy: f64,
        mag: f64,
    ) -> Result<Self> {
        let ev = Self::new(x, y, t, vx, vy)?;
        if (ev.mag - mag).abs() > 1e-6 * ev.mag {
            return Err(Error::argument(format!(
                "magnitude {mag} inconsistent with components ({vx}, {vy})"
            )));
        }
        Ok(Self { mag, ..ev })
    }

    /// Direction of the flow vector in degrees, in (-180, 180].
    pub fn angle_deg(&self) -> f64 {
        self.vy.atan2(self.vx).to_degrees()
    }
}

/// Corrected flow for one event and the index of the window it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueFlowResult {
    pub x: u16,
    pub y: u16,
    pub t: Timestamp,
    pub vx: f64,
    pub vy: f64,
    pub window: usize,
}

impl TrueFlowResult {
    pub fn angle_deg(&self) -> f64 {
        self.vy.atan2(self.vx).to_degrees()
    }
}

/// Instrumented work counters for a single true-flow computation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IterationStats {
    /// Innermost pooling iterations.
    pub loop_iterations: u64,
    /// Entries that passed the temporal filter.
    pub events_considered: u64,
}

impl std::ops::AddAssign for IterationStats {
    fn add_assign(&mut self, rhs: Self) {
        self.loop_iterations += rhs.loop_iterations;
        self.events_considered += rhs.events_considered;
    }
}
