//! Address-event primitives shared by every stage of the pipeline.

use crate::error::{Error, Result};

/// Event time in microseconds.
pub type Timestamp = i64;

/// Sensor resolution in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SensorGeometry {
    pub width: u16,
    pub height: u16,
}

impl SensorGeometry {
    pub fn new(width: u16, height: u16) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::config(format!(
                "sensor geometry {width}x{height} has zero area"
            )));
        }
        Ok(Self { width, height })
    }

    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < i64::from(self.width) && y < i64::from(self.height)
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        usize::from(self.width) * usize::from(self.height)
    }

    #[inline]
    pub(crate) fn index(&self, x: u16, y: u16) -> usize {
        usize::from(y) * usize::from(self.width) + usize::from(x)
    }
}

/// One sensor event in address-event representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawEvent {
    pub x: u16,
    pub y: u16,
    pub t: Timestamp,
    /// `true` for an ON (brightness increase) event.
    pub p: bool,
}

impl RawEvent {
    pub fn new(x: u16, y: u16, t: Timestamp, p: bool) -> Self {
        Self { x, y, t, p }
    }

    #[inline]
    pub fn polarity_index(&self) -> usize {
        usize::from(self.p)
    }
}
