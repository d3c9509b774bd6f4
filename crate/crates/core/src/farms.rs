//! The fARMS engine: a ring buffer of recent flow events scanned once per
//! event, with window arbitration replacing the per-pixel event frame.

use crate::error::{Error, Result};
use crate::flow::{IterationStats, LocalFlowEvent, TrueFlowResult};
use crate::params::{ArmsParams, WindowEdges};

/// Fixed-capacity ring of the most recent valid flow events.
///
/// Slots carry an explicit validity flag (`None` until first written), so an
/// empty slot can never pass the temporal filter.
#[derive(Debug, Clone)]
pub struct RecentFlowBuffer<T> {
    slots: Vec<Option<T>>,
    next_idx: usize,
    inserted: u64,
}

impl<T: Copy> RecentFlowBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config(
                "recent-flow buffer capacity must be at least 1",
            ));
        }
        Ok(Self {
            slots: vec![None; capacity],
            next_idx: 0,
            inserted: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    /// Index of the slot the next insertion overwrites (the oldest entry once
    /// the buffer is full).
    pub fn next_idx(&self) -> usize {
        self.next_idx
    }

    /// Number of valid slots.
    pub fn len(&self) -> usize {
        self.inserted.min(self.slots.len() as u64) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.inserted == 0
    }

    pub fn total_inserted(&self) -> u64 {
        self.inserted
    }

    pub fn insert(&mut self, e: T) {
        self.slots[self.next_idx] = Some(e);
        self.next_idx = (self.next_idx + 1) % self.slots.len();
        self.inserted += 1;
    }

    pub fn slots(&self) -> &[Option<T>] {
        &self.slots
    }

    /// Valid entries in slot order.
    pub fn iter(&self) -> impl Iterator<Item = &T> + '_ {
        self.slots.iter().flatten()
    }
}

/// Per-window running sums of the three pooled channels.
#[derive(Debug, Clone, Default)]
pub(crate) struct WindowSums {
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub mag: Vec<f64>,
    pub count: Vec<u64>,
}

impl WindowSums {
    pub fn new(num_windows: usize) -> Self {
        Self {
            vx: vec![0.0; num_windows],
            vy: vec![0.0; num_windows],
            mag: vec![0.0; num_windows],
            count: vec![0; num_windows],
        }
    }

    pub fn reset(&mut self) {
        self.vx.fill(0.0);
        self.vy.fill(0.0);
        self.mag.fill(0.0);
        self.count.fill(0);
    }

    /// Window with the largest mean magnitude (first one on ties) and its
    /// mean flow components.
    pub fn select(&self) -> (usize, f64, f64) {
        let mut best = 0;
        let mut best_mean = f64::NEG_INFINITY;
        for (k, (&m, &c)) in self.mag.iter().zip(&self.count).enumerate() {
            if c == 0 {
                continue;
            }
            let mean = m / c as f64;
            if mean > best_mean {
                best_mean = mean;
                best = k;
            }
        }
        let c = self.count[best] as f64;
        (best, self.vx[best] / c, self.vy[best] / c)
    }
}

/// Accumulates every valid buffer entry into the sums of each window that
/// contains it.
///
/// Arbitration and accumulation run over all `num_windows` windows for every
/// valid slot; an entry outside the temporal window is given the "no window"
/// tag, so the work done per slot does not depend on the data.
fn scan(
    rfb: &RecentFlowBuffer<LocalFlowEvent>,
    center: &LocalFlowEvent,
    tau: i64,
    edges: &WindowEdges,
    sums: &mut WindowSums,
) -> IterationStats {
    let eta = edges.num_windows();
    let mut stats = IterationStats::default();
    for slot in rfb.iter() {
        let in_tau = (slot.t - center.t).abs() <= tau;
        let tag = edges.tag(center.x, center.y, slot.x, slot.y);
        // out-of-τ slots get tag eta, selected arithmetically
        let tag = tag + (eta - tag) * usize::from(!in_tau);
        for k in 0..eta {
            // black_box hides that member is 0 or 1, so the mask stays an
            // AND instead of being lowered to a data-dependent jump
            let member = std::hint::black_box(u64::from(tag <= k));
            let mask = member.wrapping_neg();
            sums.vx[k] += f64::from_bits(slot.vx.to_bits() & mask);
            sums.vy[k] += f64::from_bits(slot.vy.to_bits() & mask);
            sums.mag[k] += f64::from_bits(slot.mag.to_bits() & mask);
            sums.count[k] += member;
        }
        stats.loop_iterations += 2 * eta as u64;
        stats.events_considered += u64::from(in_tau);
    }
    stats
}

/// Inserts `e` into the buffer, then pools the buffer around `e`.
pub fn farms_process_event(
    rfb: &mut RecentFlowBuffer<LocalFlowEvent>,
    e: &LocalFlowEvent,
    params: &ArmsParams,
    edges: &WindowEdges,
) -> (TrueFlowResult, IterationStats) {
    let mut sums = WindowSums::new(edges.num_windows());
    process_with(rfb, e, params.tau, edges, &mut sums)
}

fn process_with(
    rfb: &mut RecentFlowBuffer<LocalFlowEvent>,
    e: &LocalFlowEvent,
    tau: i64,
    edges: &WindowEdges,
    sums: &mut WindowSums,
) -> (TrueFlowResult, IterationStats) {
    rfb.insert(*e);
    sums.reset();
    let stats = scan(rfb, e, tau, edges, sums);
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

/// Closed-form iteration count per event on a full buffer: `2 N eta`.
pub fn farms_iteration_count(params: &ArmsParams) -> u64 {
    2 * params.buffer_len as u64 * params.num_windows as u64
}

/// Streaming fARMS engine with reusable scratch space.
#[derive(Debug, Clone)]
pub struct FarmsEngine {
    params: ArmsParams,
    edges: WindowEdges,
    rfb: RecentFlowBuffer<LocalFlowEvent>,
    sums: WindowSums,
    stats: IterationStats,
}

impl FarmsEngine {
    pub fn new(params: ArmsParams) -> Result<Self> {
        let edges = WindowEdges::new(&params)?;
        Ok(Self {
            rfb: RecentFlowBuffer::new(params.buffer_len)?,
            sums: WindowSums::new(params.num_windows),
            params,
            edges,
            stats: IterationStats::default(),
        })
    }

    pub fn process(&mut self, e: &LocalFlowEvent) -> TrueFlowResult {
        self.process_with_stats(e).0
    }

    pub fn process_with_stats(&mut self, e: &LocalFlowEvent) -> (TrueFlowResult, IterationStats) {
        let out = process_with(
            &mut self.rfb,
            e,
            self.params.tau,
            &self.edges,
            &mut self.sums,
        );
        self.stats += out.1;
        out
    }

    pub fn params(&self) -> &ArmsParams {
        &self.params
    }

    pub fn buffer(&self) -> &RecentFlowBuffer<LocalFlowEvent> {
        &self.rfb
    }

    /// Iteration totals over everything processed so far.
    pub fn stats(&self) -> IterationStats {
        self.stats
    }
}
