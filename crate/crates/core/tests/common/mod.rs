//! Stream generators and brute-force pooling oracles shared by the
//! integration tests.

#![allow(dead_code)]

use std::collections::HashMap;

use arms_core::{ArmsParams, LocalFlowEvent, SensorGeometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random stream in which every pixel fires at most once per `tau` and all
/// events keep `margin` pixels away from the sensor border.
pub fn sparse_stream(
    rng: &mut ChaCha8Rng,
    geometry: SensorGeometry,
    margin: u16,
    tau: i64,
    len: usize,
    vmax: f64,
) -> Vec<LocalFlowEvent> {
    let mut last: HashMap<(u16, u16), i64> = HashMap::new();
    let mut out = Vec::with_capacity(len);
    let mut t = 0i64;
    while out.len() < len {
        t += rng.random_range(0..150);
        let x = rng.random_range(margin..geometry.width - margin);
        let y = rng.random_range(margin..geometry.height - margin);
        if last.get(&(x, y)).is_some_and(|&p| t - p <= tau) {
            continue;
        }
        last.insert((x, y), t);
        out.push(random_flow(rng, x, y, t, vmax));
    }
    out
}

/// Random stream clustered in a small region, so pixels repeat often.
pub fn dense_stream(rng: &mut ChaCha8Rng, side: u16, len: usize, vmax: f64) -> Vec<LocalFlowEvent> {
    let mut t = 0i64;
    (0..len)
        .map(|_| {
            t += rng.random_range(0..80);
            let x = rng.random_range(0..side);
            let y = rng.random_range(0..side);
            random_flow(rng, x, y, t, vmax)
        })
        .collect()
}

pub fn random_flow(rng: &mut ChaCha8Rng, x: u16, y: u16, t: i64, vmax: f64) -> LocalFlowEvent {
    loop {
        let vx = rng.random_range(-vmax..vmax);
        let vy = rng.random_range(-vmax..vmax);
        if let Ok(e) = LocalFlowEvent::new(x, y, t, vx, vy) {
            return e;
        }
    }
}

/// Per-window pooled means for `center` over `pool`, by explicit membership
/// tests against each window square.
#[derive(Debug, Clone)]
pub struct WindowMeans {
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub mag: Vec<f64>,
    pub count: Vec<usize>,
}

impl WindowMeans {
    /// Window with the largest mean magnitude, smallest index on ties.
    pub fn best(&self) -> usize {
        let mut best = 0;
        for k in 1..self.mag.len() {
            if self.count[k] > 0 && self.mag[k] > self.mag[best] {
                best = k;
            }
        }
        best
    }
}

pub fn pool(center: &LocalFlowEvent, pool: &[LocalFlowEvent], params: &ArmsParams) -> WindowMeans {
    let eta = params.num_windows;
    let step = (params.w_max as usize / eta) as i64;
    let mut m = WindowMeans {
        vx: vec![0.0; eta],
        vy: vec![0.0; eta],
        mag: vec![0.0; eta],
        count: vec![0; eta],
    };
    for i in 0..eta {
        let half = step * (i as i64 + 1);
        for o in pool {
            let dx = (i64::from(o.x) - i64::from(center.x)).abs();
            let dy = (i64::from(o.y) - i64::from(center.y)).abs();
            if dx < half && dy < half && (o.t - center.t).abs() <= params.tau {
                m.vx[i] += o.vx;
                m.vy[i] += o.vy;
                m.mag[i] += o.mag;
                m.count[i] += 1;
            }
        }
        if m.count[i] > 0 {
            let c = m.count[i] as f64;
            m.vx[i] /= c;
            m.vy[i] /= c;
            m.mag[i] /= c;
        }
    }
    m
}

/// Reference result of frame-based pooling: each pixel keeps its latest event.
pub fn frame_oracle(events: &[LocalFlowEvent], params: &ArmsParams) -> Vec<(f64, f64, usize)> {
    let mut frame: HashMap<(u16, u16), LocalFlowEvent> = HashMap::new();
    events
        .iter()
        .map(|e| {
            frame.insert((e.x, e.y), *e);
            let contents: Vec<LocalFlowEvent> = frame.values().copied().collect();
            let m = pool(e, &contents, params);
            let w = m.best();
            (m.vx[w], m.vy[w], w)
        })
        .collect()
}

/// Reference result of buffer-based pooling over the last `buffer_len` events.
pub fn buffer_oracle(events: &[LocalFlowEvent], params: &ArmsParams) -> Vec<WindowMeans> {
    (0..events.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(params.buffer_len);
            pool(&events[i], &events[lo..=i], params)
        })
        .collect()
}
