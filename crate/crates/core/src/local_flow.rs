//! Per-event normal flow from plane fitting on the surface of active events.

use crate::error::{Error, Result};
use crate::event::{RawEvent, SensorGeometry, Timestamp};
use crate::flow::LocalFlowEvent;

const EMPTY: Timestamp = i64::MIN / 4;
const MICROS_PER_SECOND: f64 = 1e6;

/// Plane-fitting front-end settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFlowConfig {
    /// Neighborhood half-width in pixels; the fit uses a `(2r+1)^2` patch.
    pub radius: u16,
    /// Only SAE entries at most this old (microseconds) join the fit.
    pub fit_window: Timestamp,
    /// Minimum number of supporting pixels.
    pub min_support: usize,
    /// Largest acceptable mean absolute residual, in microseconds.
    pub max_residual: f64,
}

impl Default for LocalFlowConfig {
    fn default() -> Self {
        Self {
            radius: 3,
            fit_window: 20_000,
            min_support: 8,
            max_residual: 2_000.0,
        }
    }
}

impl LocalFlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fit_window <= 0 {
            return Err(Error::config("localflow fit_window must be positive"));
        }
        if self.min_support < 3 {
            return Err(Error::config("localflow min_support must be at least 3"));
        }
        if self.max_residual.is_nan() || self.max_residual < 0.0 {
            return Err(Error::config("localflow max_residual must be non-negative"));
        }
        Ok(())
    }
}

/// Most recent timestamp per pixel, one plane per polarity.
#[derive(Debug, Clone)]
pub struct SurfaceOfActiveEvents {
    geometry: SensorGeometry,
    planes: [Vec<Timestamp>; 2],
}

impl SurfaceOfActiveEvents {
    pub fn new(geometry: SensorGeometry) -> Self {
        let n = geometry.pixel_count();
        Self {
            geometry,
            planes: [vec![EMPTY; n], vec![EMPTY; n]],
        }
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn update(&mut self, e: &RawEvent) -> Result<()> {
        if !self.geometry.contains(i64::from(e.x), i64::from(e.y)) {
            return Err(Error::Bounds {
                line: 0,
                x: i64::from(e.x),
                y: i64::from(e.y),
                width: self.geometry.width,
                height: self.geometry.height,
            });
        }
        let i = self.geometry.index(e.x, e.y);
        let cell = &mut self.planes[e.polarity_index()][i];
        *cell = (*cell).max(e.t);
        Ok(())
    }

    /// Last timestamp at `(x, y)` for the given polarity, if any.
    pub fn get(&self, polarity: bool, x: u16, y: u16) -> Option<Timestamp> {
        if !self.geometry.contains(i64::from(x), i64::from(y)) {
            return None;
        }
        let t = self.planes[usize::from(polarity)][self.geometry.index(x, y)];
        (t != EMPTY).then_some(t)
    }
}

/// Fits `t = a x + b y + c` to the recent same-polarity neighborhood of `e`
/// and converts the time gradient into normal flow.
///
/// Returns `None` for insufficient support, a singular or poor fit, or a flat
/// surface. `e` must already be in the SAE.
pub fn compute_local_flow(
    sae: &SurfaceOfActiveEvents,
    e: &RawEvent,
    cfg: &LocalFlowConfig,
) -> Option<LocalFlowEvent> {
    let geometry = sae.geometry;
    let plane = &sae.planes[e.polarity_index()];
    let r = i64::from(cfg.radius);
    let (cx, cy) = (i64::from(e.x), i64::from(e.y));

    // Coordinates and times are taken relative to the event so the sums stay
    // small and a perfectly flat patch gives exact zeros.
    let mut pts: Vec<(f64, f64, f64)> = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    for y in (cy - r).max(0)..=(cy + r).min(i64::from(geometry.height) - 1) {
        for x in (cx - r).max(0)..=(cx + r).min(i64::from(geometry.width) - 1) {
            let t = plane[(y * i64::from(geometry.width) + x) as usize];
            if t <= e.t && t >= e.t - cfg.fit_window {
                pts.push(((x - cx) as f64, (y - cy) as f64, (t - e.t) as f64));
            }
        }
    }
    if pts.len() < cfg.min_support {
        return None;
    }

    let (mut sxx, mut sxy, mut syy, mut sx, mut sy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut sxt, mut syt, mut st) = (0.0, 0.0, 0.0);
    for &(x, y, t) in &pts {
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        sx += x;
        sy += y;
        sxt += x * t;
        syt += y * t;
        st += t;
    }
    let n = pts.len() as f64;
    let m = [[sxx, sxy, sx], [sxy, syy, sy], [sx, sy, n]];
    let rhs = [sxt, syt, st];
    let det = det3(&m);
    if det.abs() < 1e-12 {
        return None;
    }
    let solve_col = |col: usize| {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = rhs[row];
        }
        det3(&mc) / det
    };
    let (a, b, c) = (solve_col(0), solve_col(1), solve_col(2));

    let residual = pts
        .iter()
        .map(|&(x, y, t)| (t - (a * x + b * y + c)).abs())
        .sum::<f64>()
        / n;
    if residual > cfg.max_residual {
        return None;
    }
    let g2 = a * a + b * b;
    if g2 == 0.0 {
        return None;
    }
    // (a, b) is in microseconds per pixel; its inverse scaled by 1/|g|^2 is
    // the normal velocity in pixels per microsecond.
    let vx = a / g2 * MICROS_PER_SECOND;
    let vy = b / g2 * MICROS_PER_SECOND;
    LocalFlowEvent::new(e.x, e.y, e.t, vx, vy).ok()
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// SAE plus fitting settings: raw events in, local-flow events out.
#[derive(Debug, Clone)]
pub struct LocalFlowEstimator {
    sae: SurfaceOfActiveEvents,
    cfg: LocalFlowConfig,
}

impl LocalFlowEstimator {
    pub fn new(geometry: SensorGeometry, cfg: LocalFlowConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            sae: SurfaceOfActiveEvents::new(geometry),
            cfg,
        })
    }

    pub fn process(&mut self, e: &RawEvent) -> Result<Option<LocalFlowEvent>> {
        self.sae.update(e)?;
        Ok(compute_local_flow(&self.sae, e, &self.cfg))
    }

    pub fn sae(&self) -> &SurfaceOfActiveEvents {
        &self.sae
    }
}

/// Runs the estimator over a whole stream, keeping only events with valid flow.
pub fn local_flow_stream(
    events: &[RawEvent],
    geometry: SensorGeometry,
    cfg: LocalFlowConfig,
) -> Result<Vec<LocalFlowEvent>> {
    let mut est = LocalFlowEstimator::new(geometry, cfg)?;
    let mut out = Vec::new();
    for e in events {
        if let Some(f) = est.process(e)? {
            out.push(f);
        }
    }
    Ok(out)
}
