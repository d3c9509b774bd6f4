//! Original ARMS pooling over a per-pixel event frame.
//!
//! This path is the correctness oracle and the complexity baseline; it visits
//! every pixel of every window for every event.

use crate::error::Result;
use crate::event::{SensorGeometry, Timestamp};
use crate::farms::WindowSums;
use crate::flow::{IterationStats, LocalFlowEvent, TrueFlowResult};
use crate::params::{ArmsParams, WindowEdges};

/// Marker for a never-written cell. Far enough from any real timestamp that
/// the temporal filter rejects it without overflow.
const EMPTY: Timestamp = i64::MIN / 4;

/// Most recent valid flow event at each pixel.
#[derive(Debug, Clone)]
pub struct FlowFrame {
    geometry: SensorGeometry,
    t: Vec<Timestamp>,
    vx: Vec<f64>,
    vy: Vec<f64>,
    mag: Vec<f64>,
}

/// Contents of one frame cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameCell {
    pub t: Timestamp,
    pub vx: f64,
    pub vy: f64,
    pub mag: f64,
}

impl FlowFrame {
    pub fn new(geometry: SensorGeometry) -> Self {
        let n = geometry.pixel_count();
        Self {
            geometry,
            t: vec![EMPTY; n],
            vx: vec![0.0; n],
            vy: vec![0.0; n],
            mag: vec![0.0; n],
        }
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    /// Stores `e` at its pixel. Returns `false` (and leaves the cell alone)
    /// when the event is outside the frame or older than the cell contents.
    pub fn write(&mut self, e: &LocalFlowEvent) -> bool {
        if !self.geometry.contains(i64::from(e.x), i64::from(e.y)) {
            return false;
        }
        let i = self.geometry.index(e.x, e.y);
        if e.t < self.t[i] {
            return false;
        }
        self.t[i] = e.t;
        self.vx[i] = e.vx;
        self.vy[i] = e.vy;
        self.mag[i] = e.mag;
        true
    }

    pub fn cell(&self, x: u16, y: u16) -> Option<FrameCell> {
        if !self.geometry.contains(i64::from(x), i64::from(y)) {
            return None;
        }
        let i = self.geometry.index(x, y);
        (self.t[i] != EMPTY).then(|| FrameCell {
            t: self.t[i],
            vx: self.vx[i],
            vy: self.vy[i],
            mag: self.mag[i],
        })
    }
}

/// Pools the frame around `e` over every window and picks the window with the
/// largest mean magnitude.
///
/// Window `i` (1-based) has half-size `w = i * w_max / num_windows` and is
/// traversed as a `2w x 2w` square of offsets `-w..w` on each axis. Offsets
/// with `max(|dx|, |dy|) >= w` lie outside the window and pixels outside the
/// sensor do not exist; both are skipped but still counted, so the iteration
/// count is `sum (2w)^2` wherever the event sits.
pub fn arms_true_flow(
    frame: &FlowFrame,
    e: &LocalFlowEvent,
    params: &ArmsParams,
) -> Result<(TrueFlowResult, IterationStats)> {
    let edges = WindowEdges::new(params)?;
    let mut sums = WindowSums::new(edges.num_windows());
    Ok(pool(frame, e, params.tau, &edges, &mut sums))
}

fn pool(
    frame: &FlowFrame,
    e: &LocalFlowEvent,
    tau: Timestamp,
    edges: &WindowEdges,
    sums: &mut WindowSums,
) -> (TrueFlowResult, IterationStats) {
    sums.reset();
    let mut stats = IterationStats::default();
    let width = i64::from(frame.geometry.width);
    let height = i64::from(frame.geometry.height);
    let (cx, cy) = (i64::from(e.x), i64::from(e.y));

    for k in 0..edges.num_windows() {
        let w = i64::from(edges.half_size(k));
        let side = 2 * w as u64;
        // Member columns: |dx| < w, clipped to the sensor.
        let x0 = (cx - w + 1).max(0);
        let x1 = (cx + w - 1).min(width - 1);
        let (mut svx, mut svy, mut smag, mut count) = (0.0, 0.0, 0.0, 0u64);
        for dy in -w..w {
            stats.loop_iterations += side;
            let y = cy + dy;
            if dy.abs() >= w || y < 0 || y >= height || x0 > x1 {
                continue;
            }
            let row = (y * width) as usize;
            for i in row + x0 as usize..=row + x1 as usize {
                if (frame.t[i] - e.t).abs() <= tau {
                    svx += frame.vx[i];
                    svy += frame.vy[i];
                    smag += frame.mag[i];
                    count += 1;
                }
            }
        }
        sums.vx[k] = svx;
        sums.vy[k] = svy;
        sums.mag[k] = smag;
        sums.count[k] = count;
        stats.events_considered += count;
    }

    let (window, vx, vy) = sums.select();
    let result = TrueFlowResult {
        x: e.x,
        y: e.y,
        t: e.t,
        vx,
        vy,
        window,
    };
    (result, stats)
}

/// Closed-form iteration count: `(2 w_max / eta)^2 * eta (eta + 1)(2 eta + 1) / 6`.
pub fn arms_iteration_count(params: &ArmsParams) -> Result<u64> {
    params.validate()?;
    let eta = params.num_windows as u64;
    let side = 2 * u64::from(params.window_step());
    Ok(side * side * eta * (eta + 1) * (2 * eta + 1) / 6)
}

/// Streaming ARMS engine: writes each event into the frame, then pools.
#[derive(Debug, Clone)]
pub struct ArmsEngine {
    params: ArmsParams,
    edges: WindowEdges,
    frame: FlowFrame,
    sums: WindowSums,
    stats: IterationStats,
}

impl ArmsEngine {
    pub fn new(params: ArmsParams, geometry: SensorGeometry) -> Result<Self> {
        let edges = WindowEdges::new(&params)?;
        Ok(Self {
            sums: WindowSums::new(params.num_windows),
            frame: FlowFrame::new(geometry),
            params,
            edges,
            stats: IterationStats::default(),
        })
    }

    pub fn process(&mut self, e: &LocalFlowEvent) -> TrueFlowResult {
        self.process_with_stats(e).0
    }

    pub fn process_with_stats(&mut self, e: &LocalFlowEvent) -> (TrueFlowResult, IterationStats) {
        self.frame.write(e);
        let out = pool(&self.frame, e, self.params.tau, &self.edges, &mut self.sums);
        self.stats += out.1;
        out
    }

    pub fn frame(&self) -> &FlowFrame {
        &self.frame
    }

    pub fn stats(&self) -> IterationStats {
        self.stats
    }
}
