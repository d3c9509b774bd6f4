//! Pooling configuration and window binning shared by all engines.

use crate::error::{Error, Result};
use crate::event::Timestamp;

/// Configuration of the multi-scale pooling engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArmsParams {
    /// Largest window half-size in pixels.
    pub w_max: u32,
    /// Number of concentric windows.
    pub num_windows: usize,
    /// Temporal inclusion window in microseconds.
    pub tau: Timestamp,
    /// Capacity of the recent-flow ring buffer.
    pub buffer_len: usize,
    /// Events batched per accelerator call (hardware model only).
    pub batch: usize,
}

impl Default for ArmsParams {
    fn default() -> Self {
        Self {
            w_max: 320,
            num_windows: 4,
            tau: 5_000,
            buffer_len: 1000,
            batch: 1,
        }
    }
}

impl ArmsParams {
    pub fn validate(&self) -> Result<()> {
        if self.w_max == 0 {
            return Err(Error::config("w_max must be at least 1"));
        }
        if self.num_windows == 0 {
            return Err(Error::config("num_windows must be at least 1"));
        }
        if !(self.w_max as usize).is_multiple_of(self.num_windows) {
            return Err(Error::config(format!(
                "w_max {} is not divisible by num_windows {}",
                self.w_max, self.num_windows
            )));
        }
        if self.tau <= 0 {
            return Err(Error::config("tau must be positive"));
        }
        if self.buffer_len == 0 {
            return Err(Error::config("buffer_len must be at least 1"));
        }
        if self.batch == 0 {
            return Err(Error::config("batch must be at least 1"));
        }
        Ok(())
    }

    /// Spacing between consecutive window edges.
    pub fn window_step(&self) -> u32 {
        self.w_max / self.num_windows as u32
    }
}

/// Bin edges for window arbitration: `edges[w] = w * (w_max / num_windows)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowEdges {
    edges: Vec<u32>,
}

impl WindowEdges {
    pub fn new(params: &ArmsParams) -> Result<Self> {
        params.validate()?;
        let step = params.window_step();
        let edges = (0..=params.num_windows as u32).map(|w| w * step).collect();
        Ok(Self { edges })
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.edges
    }

    /// Number of windows (one less than the number of edges).
    pub fn num_windows(&self) -> usize {
        self.edges.len() - 1
    }

    /// Half-size of window `w` (0-based); the window holds every offset whose
    /// maximum component distance is strictly below this value.
    pub fn half_size(&self, w: usize) -> u32 {
        self.edges[w + 1]
    }

    /// Tag for a maximum component distance. Tag `j` means membership in
    /// windows `j..num_windows`; tag `num_windows` means no window.
    #[inline]
    pub fn tag_for_distance(&self, d_max: u32) -> usize {
        // Edges are increasing, so the bin index is the number of upper
        // edges that do not exceed d_max.
        self.edges[1..]
            .iter()
            .map(|&e| usize::from(d_max >= e))
            .sum()
    }

    #[inline]
    pub fn tag(&self, cx: u16, cy: u16, ox: u16, oy: u16) -> usize {
        let dx = cx.abs_diff(ox);
        let dy = cy.abs_diff(oy);
        self.tag_for_distance(u32::from(dx.max(dy)))
    }
}
