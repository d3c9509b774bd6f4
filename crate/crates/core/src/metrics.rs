//! Accuracy and rate metrics: circular direction statistics, buffer sizing,
//! correlation against ground truth and the real-time criterion.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::event::Timestamp;
use crate::flow::LocalFlowEvent;

/// Reported dispersion when the mean resultant length vanishes.
pub const MAX_CIRCULAR_STD_DEG: f64 = 360.0;
pub const DEFAULT_BIN_WIDTH_DEG: f64 = 5.0;
pub const DEFAULT_RESAMPLE_US: Timestamp = 10_000;
/// Minimum share of all angles a histogram peak needs to count as a mode.
pub const MODE_MASS_FRACTION: f64 = 0.05;

fn wrap_deg(a: f64) -> f64 {
    let w = (a + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 {
        180.0
    } else {
        w
    }
}

fn resultant(angles: &[f64]) -> (f64, f64) {
    let (mut s, mut c) = (0.0, 0.0);
    for a in angles {
        let (sa, ca) = a.to_radians().sin_cos();
        s += sa;
        c += ca;
    }
    let n = angles.len() as f64;
    (s / n, c / n)
}

/// Circular mean direction in degrees, in (-180, 180].
pub fn circular_mean(angles: &[f64]) -> Result<f64> {
    if angles.is_empty() {
        return Err(Error::argument("circular mean of an empty set"));
    }
    let (s, c) = resultant(angles);
    Ok(wrap_deg(s.atan2(c).to_degrees()))
}

/// Circular standard deviation `sqrt(-2 ln R)` in degrees, where `R` is the
/// mean resultant length. Identical angles give 0; a vanishing resultant
/// gives [`MAX_CIRCULAR_STD_DEG`].
pub fn circular_std(angles: &[f64]) -> Result<f64> {
    let first = *angles
        .first()
        .ok_or_else(|| Error::argument("circular std of an empty set"))?;
    if angles.iter().all(|&a| wrap_deg(a) == wrap_deg(first)) {
        return Ok(0.0);
    }
    let (s, c) = resultant(angles);
    let r = s.hypot(c);
    if r >= 1.0 {
        return Ok(0.0);
    }
    if r < 1e-12 {
        return Ok(MAX_CIRCULAR_STD_DEG);
    }
    Ok((-2.0 * r.ln())
        .sqrt()
        .to_degrees()
        .min(MAX_CIRCULAR_STD_DEG))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionMode {
    /// Circular mean of the angles assigned to this mode.
    pub angle_deg: f64,
    pub circular_std: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionStats {
    pub mean_angle: f64,
    pub circular_std: f64,
    pub modes: Vec<DirectionMode>,
    pub histogram: Vec<(f64, usize)>,
}

impl DirectionStats {
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn total(&self) -> usize {
        self.modes.iter().map(|m| m.count).sum()
    }

    /// Count-weighted mean of the per-mode circular standard deviations.
    pub fn per_mode_std(&self) -> f64 {
        let total = self.total() as f64;
        self.modes
            .iter()
            .map(|m| m.circular_std * m.count as f64)
            .sum::<f64>()
            / total
    }

    /// `key=value` report lines.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "events={}", self.total());
        let _ = writeln!(s, "mean_angle_deg={:.4}", self.mean_angle);
        let _ = writeln!(s, "circular_std_deg={:.4}", self.circular_std);
        let _ = writeln!(s, "per_mode_std_deg={:.4}", self.per_mode_std());
        let _ = writeln!(s, "mode_count={}", self.mode_count());
        for (i, m) in self.modes.iter().enumerate() {
            let _ = writeln!(s, "mode{i}.angle_deg={:.4}", m.angle_deg);
            let _ = writeln!(s, "mode{i}.std_deg={:.4}", m.circular_std);
            let _ = writeln!(s, "mode{i}.count={}", m.count);
        }
        s
    }

    /// Histogram as `bin_center_deg,count` CSV with a header row.
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("bin_center_deg,count\n");
        for (c, n) in &self.histogram {
            let _ = writeln!(s, "{c},{n}");
        }
        s
    }
}

fn angular_distance(a: f64, b: f64) -> f64 {
    wrap_deg(a - b).abs()
}

/// Splits a direction distribution into histogram modes and reports the
/// dispersion of each.
///
/// Modes are circular local maxima of the histogram (first bin of a plateau)
/// holding more than 5% of all angles; every angle joins the nearest mode.
pub fn direction_modes(angles: &[f64], bin_width: f64) -> Result<DirectionStats> {
    if angles.is_empty() {
        return Err(Error::argument("direction modes of an empty set"));
    }
    let bins_f = 360.0 / bin_width;
    if bin_width.is_nan() || bin_width <= 0.0 || (bins_f - bins_f.round()).abs() > 1e-9 {
        return Err(Error::argument(format!(
            "bin width {bin_width} does not divide 360"
        )));
    }
    let nb = bins_f.round() as usize;
    let mut hist = vec![0usize; nb];
    for &a in angles {
        let i = (((wrap_deg(a) + 180.0) / bin_width).floor() as usize).min(nb - 1);
        hist[i] += 1;
    }
    let center = |i: usize| -180.0 + (i as f64 + 0.5) * bin_width;
    let threshold = MODE_MASS_FRACTION * angles.len() as f64;

    let mut peaks: Vec<usize> = (0..nb)
        .filter(|&i| {
            let c = hist[i];
            let left = hist[(i + nb - 1) % nb];
            let right = hist[(i + 1) % nb];
            c as f64 > threshold && c > left && c >= right
        })
        .collect();
    if peaks.is_empty() {
        // Flat or plateau-only histogram: fall back to the fullest bin.
        let best = (0..nb)
            .max_by_key(|&i| (hist[i], std::cmp::Reverse(i)))
            .unwrap();
        peaks.push(best);
    }

    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); peaks.len()];
    for &a in angles {
        let nearest = (0..peaks.len())
            .min_by(|&i, &j| {
                angular_distance(a, center(peaks[i]))
                    .total_cmp(&angular_distance(a, center(peaks[j])))
            })
            .unwrap();
        groups[nearest].push(a);
    }
    let modes = groups
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| {
            Ok(DirectionMode {
                angle_deg: circular_mean(g)?,
                circular_std: circular_std(g)?,
                count: g.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DirectionStats {
        mean_angle: circular_mean(angles)?,
        circular_std: circular_std(angles)?,
        modes,
        histogram: (0..nb).map(|i| (center(i), hist[i])).collect(),
    })
}

/// Largest number of flow events falling in any window `[t - tau, t]`
/// ending at an event.
pub fn required_buffer_length(flow_events: &[LocalFlowEvent], tau: Timestamp) -> Result<usize> {
    let times: Vec<Timestamp> = flow_events.iter().map(|e| e.t).collect();
    required_buffer_length_for_times(&times, tau)
}

pub fn required_buffer_length_for_times(times: &[Timestamp], tau: Timestamp) -> Result<usize> {
    let mut best = 0;
    let mut lo = 0;
    for (hi, &t) in times.iter().enumerate() {
        if hi > 0 && t < times[hi - 1] {
            return Err(Error::Ordering {
                line: hi + 1,
                t,
                prev: times[hi - 1],
            });
        }
        while times[lo] < t - tau {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    Ok(best)
}

/// Pearson correlation of two timestamped series after mean-resampling both
/// onto a common grid of `resample` microseconds over their overlap.
/// Grid cells empty in either series are skipped.
pub fn pearson_correlation(
    series_a: &[(Timestamp, f64)],
    series_b: &[(Timestamp, f64)],
    resample: Timestamp,
) -> Result<f64> {
    if series_a.is_empty() || series_b.is_empty() {
        return Err(Error::argument("correlation needs two non-empty series"));
    }
    if resample <= 0 {
        return Err(Error::argument("resample step must be positive"));
    }
    let span = |s: &[(Timestamp, f64)]| {
        let lo = s.iter().map(|p| p.0).min().unwrap();
        let hi = s.iter().map(|p| p.0).max().unwrap();
        (lo, hi)
    };
    let (a0, a1) = span(series_a);
    let (b0, b1) = span(series_b);
    let (start, end) = (a0.max(b0), a1.min(b1));
    if end < start {
        return Err(Error::argument("series do not overlap in time"));
    }
    let cells = ((end - start) / resample + 1) as usize;
    let bin = |s: &[(Timestamp, f64)]| {
        let mut sum = vec![0.0; cells];
        let mut n = vec![0usize; cells];
        for &(t, v) in s {
            if t < start || t > end {
                continue;
            }
            let i = ((t - start) / resample) as usize;
            sum[i] += v;
            n[i] += 1;
        }
        (sum, n)
    };
    let (sa, na) = bin(series_a);
    let (sb, nb) = bin(series_b);
    let pairs: Vec<(f64, f64)> = (0..cells)
        .filter(|&i| na[i] > 0 && nb[i] > 0)
        .map(|i| (sa[i] / na[i] as f64, sb[i] / nb[i] as f64))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::argument("fewer than two overlapping resample cells"));
    }
    let n = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for &(a, b) in &pairs {
        cov += (a - ma) * (b - mb);
        va += (a - ma) * (a - ma);
        vb += (b - mb) * (b - mb);
    }
    if va == 0.0 {
        return Err(Error::UndefinedCorrelation("series_a"));
    }
    if vb == 0.0 {
        return Err(Error::UndefinedCorrelation("series_b"));
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// Dataset demand against engine supply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    /// Valid flow events per second of recording.
    pub true_flow_rate: f64,
    /// Events per second the engine sustains.
    pub compute_rate: f64,
    pub realtime: bool,
}

impl RateReport {
    pub fn from_rates(true_flow_rate: f64, compute_rate: f64) -> Self {
        Self {
            true_flow_rate,
            compute_rate,
            realtime: compute_rate > true_flow_rate,
        }
    }
}

/// Real-time verdict for `flow_events` valid events over a recording of
/// `duration_us`, processed at `engine_rate` events per second.
pub fn realtime_check(
    flow_events: usize,
    duration_us: Timestamp,
    engine_rate: f64,
) -> Result<RateReport> {
    if duration_us <= 0 {
        return Err(Error::argument("recording duration must be positive"));
    }
    let demand = flow_events as f64 / (duration_us as f64 * 1e-6);
    Ok(RateReport::from_rates(demand, engine_rate))
}
