//! Analytic latency and throughput estimate for the accelerator.
//!
//! One batch costs a fixed transfer and pipeline-fill overhead, one cycle per
//! buffer entry streamed (initiation interval 1), the window divisions
//! executed in rounds of `dividers_per_averager`, and one cycle per window
//! for the final argmax. All `batch` accelerators share the transfer and run
//! in parallel.

use crate::error::{Error, Result};
use crate::params::ArmsParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleModel {
    /// Cycles per batch spent moving events and results between the
    /// processor and the fabric.
    pub transfer_overhead: u64,
    pub pipeline_fill: u64,
    pub divider_latency: u64,
    pub dividers_per_averager: u64,
    pub clock_hz: f64,
}

impl Default for CycleModel {
    /// Calibrated so that `P = 24, eta = 4, N = 1000` at 200 MHz sustains
    /// about 1.21 Mevt/s.
    fn default() -> Self {
        Self {
            transfer_overhead: 2_907,
            pipeline_fill: 20,
            divider_latency: 36,
            dividers_per_averager: 4,
            clock_hz: 200e6,
        }
    }
}

impl CycleModel {
    pub fn validate(&self) -> Result<()> {
        if self.transfer_overhead == 0
            || self.pipeline_fill == 0
            || self.divider_latency == 0
            || self.dividers_per_averager == 0
        {
            return Err(Error::config("cycle model constants must be positive"));
        }
        if !(self.clock_hz > 0.0 && self.clock_hz.is_finite()) {
            return Err(Error::config("clock_hz must be positive"));
        }
        Ok(())
    }
}

/// Cycles for one accelerator call processing a full batch.
pub fn estimate_cycles(params: &ArmsParams, model: &CycleModel) -> Result<u64> {
    params.validate()?;
    model.validate()?;
    let eta = params.num_windows as u64;
    let division_rounds = eta.div_ceil(model.dividers_per_averager);
    Ok(model.transfer_overhead
        + model.pipeline_fill
        + params.buffer_len as u64
        + division_rounds * model.divider_latency
        + eta)
}

/// Sustained true-flow events per second.
pub fn estimate_throughput(params: &ArmsParams, model: &CycleModel) -> Result<f64> {
    let cycles = estimate_cycles(params, model)?;
    Ok(params.batch as f64 * model.clock_hz / cycles as f64)
}
