//! Functional model of the hARMS accelerator.
//!
//! Events are quantized to 16-bit channels and collected in an event
//! accumulation buffer (EAB) of depth `P`. A full EAB is written into the
//! recent-flow buffer first; every EAB event is then pooled independently
//! against that same snapshot, so an event may see up to `P - 1` batch peers
//! that arrived after it. Pooling follows the streaming dataflow: a tag
//! lookup per buffer entry, three integer stream averagers (vx, vy, mag)
//! and a Q24.8 division per window.

mod cycles;
mod fixed;

pub use cycles::{estimate_cycles, estimate_throughput, CycleModel};
pub use fixed::{quantize_flow_event, FixedQ24_8, QuantizedFlowEvent, Quantizer};

use crate::error::{Error, Result};
use crate::farms::RecentFlowBuffer;
use crate::flow::{IterationStats, LocalFlowEvent, TrueFlowResult};
use crate::params::{ArmsParams, WindowEdges};

/// Batch of events awaiting one accelerator call.
#[derive(Debug, Clone)]
pub struct EventAccumulationBuffer {
    capacity: usize,
    entries: Vec<QuantizedFlowEvent>,
}

impl EventAccumulationBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("EAB depth must be at least 1"));
        }
        Ok(Self {
            capacity,
            entries: Vec::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    /// Appends an event; returns `true` once the buffer is full.
    pub fn push(&mut self, e: QuantizedFlowEvent) -> bool {
        assert!(!self.is_full(), "EAB overfilled; flush before pushing");
        self.entries.push(e);
        self.is_full()
    }

    pub fn entries(&self) -> &[QuantizedFlowEvent] {
        &self.entries
    }

    fn drain(&mut self) -> Vec<QuantizedFlowEvent> {
        std::mem::take(&mut self.entries)
    }
}

/// True flow in accelerator output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HarmsResult {
    pub x: u16,
    pub y: u16,
    pub t: i64,
    pub vx: FixedQ24_8,
    pub vy: FixedQ24_8,
    pub window: usize,
}

impl HarmsResult {
    pub fn to_true_flow(self) -> TrueFlowResult {
        TrueFlowResult {
            x: self.x,
            y: self.y,
            t: self.t,
            vx: self.vx.to_real(),
            vy: self.vy.to_real(),
            window: self.window,
        }
    }
}

/// Integer per-window sums for one channel.
struct StreamAverager {
    channel: &'static str,
    sums: Vec<i32>,
    counts: Vec<u32>,
}

impl StreamAverager {
    fn new(channel: &'static str, num_windows: usize) -> Self {
        Self {
            channel,
            sums: vec![0; num_windows],
            counts: vec![0; num_windows],
        }
    }

    fn push(&mut self, tag: usize, value: i16, valid: bool) -> Result<()> {
        if !valid {
            return Ok(());
        }
        for idx in tag..self.sums.len() {
            self.sums[idx] =
                self.sums[idx]
                    .checked_add(i32::from(value))
                    .ok_or(Error::Overflow {
                        window: idx,
                        channel: self.channel,
                    })?;
            self.counts[idx] += 1;
        }
        Ok(())
    }

    fn averages(&self) -> Vec<FixedQ24_8> {
        self.sums
            .iter()
            .zip(&self.counts)
            .map(|(&s, &c)| {
                if c == 0 {
                    FixedQ24_8::MIN
                } else {
                    FixedQ24_8::from_ratio(i64::from(s), u64::from(c))
                }
            })
            .collect()
    }
}

/// Pools one EAB event against a buffer snapshot.
fn compute_core(
    rfb: &RecentFlowBuffer<QuantizedFlowEvent>,
    event: &QuantizedFlowEvent,
    tau: i64,
    edges: &WindowEdges,
) -> Result<(HarmsResult, IterationStats)> {
    let eta = edges.num_windows();
    let mut vx = StreamAverager::new("vx", eta);
    let mut vy = StreamAverager::new("vy", eta);
    let mut mag = StreamAverager::new("mag", eta);
    let mut stats = IterationStats::default();
    for s in rfb.iter() {
        let valid = (s.t - event.t).abs() <= tau;
        let tag = edges.tag(event.x, event.y, s.x, s.y);
        vx.push(tag, s.vx_q, valid)?;
        vy.push(tag, s.vy_q, valid)?;
        mag.push(tag, s.mag_q, valid)?;
        stats.loop_iterations += 2 * eta as u64;
        stats.events_considered += u64::from(valid);
    }
    let vx = vx.averages();
    let vy = vy.averages();
    let mag = mag.averages();
    let mut best = 0;
    for k in 1..eta {
        if mag[k] > mag[best] {
            best = k;
        }
    }
    let result = HarmsResult {
        x: event.x,
        y: event.y,
        t: event.t,
        vx: vx[best],
        vy: vy[best],
        window: best,
    };
    Ok((result, stats))
}

/// Runs one accelerator call: inserts every EAB event into the buffer, then
/// pools each against the post-insertion snapshot. Results are in EAB order.
pub fn harms_process_batch(
    rfb: &mut RecentFlowBuffer<QuantizedFlowEvent>,
    eab: &mut EventAccumulationBuffer,
    params: &ArmsParams,
    edges: &WindowEdges,
) -> Result<Vec<HarmsResult>> {
    Ok(process_batch(rfb, eab, params.tau, edges, 1)?.0)
}

fn process_batch(
    rfb: &mut RecentFlowBuffer<QuantizedFlowEvent>,
    eab: &mut EventAccumulationBuffer,
    tau: i64,
    edges: &WindowEdges,
    workers: usize,
) -> Result<(Vec<HarmsResult>, IterationStats)> {
    let batch = eab.drain();
    for e in &batch {
        rfb.insert(*e);
    }
    let snapshot: &RecentFlowBuffer<QuantizedFlowEvent> = rfb;

    let outputs: Vec<Result<(HarmsResult, IterationStats)>> = if workers <= 1 || batch.len() <= 1 {
        batch
            .iter()
            .map(|e| compute_core(snapshot, e, tau, edges))
            .collect()
    } else {
        let chunk = batch.len().div_ceil(workers);
        std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .chunks(chunk)
                .map(|part| {
                    scope.spawn(move || {
                        part.iter()
                            .map(|e| compute_core(snapshot, e, tau, edges))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("hARMS worker panicked"))
                .collect()
        })
    };

    let mut results = Vec::with_capacity(outputs.len());
    let mut stats = IterationStats::default();
    for out in outputs {
        let (r, s) = out?;
        results.push(r);
        stats += s;
    }
    Ok((results, stats))
}

/// Streaming hARMS model: quantizes, batches and pools.
#[derive(Debug, Clone)]
pub struct HarmsEngine {
    params: ArmsParams,
    edges: WindowEdges,
    rfb: RecentFlowBuffer<QuantizedFlowEvent>,
    eab: EventAccumulationBuffer,
    quantizer: Quantizer,
    workers: usize,
    stats: IterationStats,
}

impl HarmsEngine {
    pub fn new(params: ArmsParams) -> Result<Self> {
        let edges = WindowEdges::new(&params)?;
        Ok(Self {
            rfb: RecentFlowBuffer::new(params.buffer_len)?,
            eab: EventAccumulationBuffer::new(params.batch)?,
            params,
            edges,
            quantizer: Quantizer::default(),
            workers: 1,
            stats: IterationStats::default(),
        })
    }

    /// Number of threads pooling batch members; results do not depend on it.
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    /// Queues an event. Returns the batch results when the EAB fills,
    /// otherwise an empty vector.
    pub fn push(&mut self, e: &LocalFlowEvent) -> Result<Vec<HarmsResult>> {
        let q = self.quantizer.quantize(e);
        if self.eab.push(q) {
            self.run_batch()
        } else {
            Ok(Vec::new())
        }
    }

    /// Processes whatever is left in a partially filled EAB.
    pub fn flush(&mut self) -> Result<Vec<HarmsResult>> {
        if self.eab.is_empty() {
            return Ok(Vec::new());
        }
        self.run_batch()
    }

    fn run_batch(&mut self) -> Result<Vec<HarmsResult>> {
        let (results, stats) = process_batch(
            &mut self.rfb,
            &mut self.eab,
            self.params.tau,
            &self.edges,
            self.workers,
        )?;
        self.stats += stats;
        Ok(results)
    }

    /// Runs a whole stream, flushing the final partial batch.
    pub fn run(&mut self, events: &[LocalFlowEvent]) -> Result<Vec<HarmsResult>> {
        let mut out = Vec::with_capacity(events.len());
        for e in events {
            out.extend(self.push(e)?);
        }
        out.extend(self.flush()?);
        Ok(out)
    }

    pub fn params(&self) -> &ArmsParams {
        &self.params
    }

    pub fn saturations(&self) -> u64 {
        self.quantizer.saturations()
    }

    pub fn stats(&self) -> IterationStats {
        self.stats
    }
}
