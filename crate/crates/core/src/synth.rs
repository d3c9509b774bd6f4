//! Synthetic Bar-Square scenes: rectangles translating in front of a static
//! sensor, rendered to events by tracking when each pixel center enters and
//! leaves each object.
//!
//! Directions are measured in degrees from +x toward +y in pixel
//! coordinates (y grows with the row index).

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::event::{RawEvent, SensorGeometry, Timestamp};
use crate::io::{DatasetManifest, GroundTruth, TruthSegment, VelocitySample};

pub const DEFAULT_SEED: u64 = 0x5EED_BA25;

/// A rectangle in scene layout coordinates (relative to the layout center).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneObject {
    pub center: (f64, f64),
    pub width: f64,
    pub height: f64,
    pub rotation_deg: f64,
}

impl SceneObject {
    /// Half-planes `n . p <= h` in object-centered coordinates, with unit
    /// outward normals.
    fn half_planes(&self) -> [((f64, f64), f64); 4] {
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        let ax = (c, s);
        let ay = (-s, c);
        let (hw, hh) = (self.width / 2.0, self.height / 2.0);
        [
            (ax, hw),
            ((-ax.0, -ax.1), hw),
            (ay, hh),
            ((-ay.0, -ay.1), hh),
        ]
    }
}

/// Constant-velocity stretch of the scene motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSegment {
    pub duration_us: Timestamp,
    /// Pixels per second.
    pub speed: f64,
    pub direction_deg: f64,
}

impl MotionSegment {
    fn velocity_px_per_us(&self) -> (f64, f64) {
        let (s, c) = self.direction_deg.to_radians().sin_cos();
        (self.speed * c * 1e-6, self.speed * s * 1e-6)
    }
}

/// Full description of a synthetic recording.
#[derive(Debug, Clone, PartialEq)]
pub struct BarSquareScene {
    pub geometry: SensorGeometry,
    pub objects: Vec<SceneObject>,
    pub segments: Vec<MotionSegment>,
    /// Events emitted per pixel crossing; successive events are spaced by
    /// `1/rate` pixel of edge advancement along the edge normal.
    pub edge_event_rate: u32,
    /// Standard deviation of extra Gaussian timestamp noise, microseconds.
    pub timing_noise_us: f64,
    pub seed: u64,
    pub name: String,
}

impl BarSquareScene {
    /// A horizontal bar, a bar tilted `tilt_deg` away from vertical and a
    /// square rotated by `tilt_deg`, laid out side by side.
    pub fn standard_objects(tilt_deg: f64) -> Vec<SceneObject> {
        vec![
            SceneObject {
                center: (-95.0, 0.0),
                width: 70.0,
                height: 10.0,
                rotation_deg: 0.0,
            },
            SceneObject {
                center: (-5.0, 0.0),
                width: 10.0,
                height: 70.0,
                rotation_deg: tilt_deg,
            },
            SceneObject {
                center: (85.0, 0.0),
                width: 40.0,
                height: 40.0,
                rotation_deg: tilt_deg,
            },
        ]
    }

    pub fn new(geometry: SensorGeometry, segments: Vec<MotionSegment>) -> Self {
        Self {
            geometry,
            objects: Self::standard_objects(0.0),
            segments,
            edge_event_rate: 1,
            timing_noise_us: 0.0,
            seed: DEFAULT_SEED,
            name: "bar-square".into(),
        }
    }

    /// The reference scene used by the benchmarks: a 304x240 sensor, objects
    /// tilted 30 degrees, moving at 800 px/s along 90 degrees for 60 ms and
    /// then along -90 degrees for 60 ms, with 1 ms of timestamp noise.
    pub fn benchmark(seed: u64) -> Self {
        let segment = |direction_deg| MotionSegment {
            duration_us: 60_000,
            speed: 800.0,
            direction_deg,
        };
        let geometry = SensorGeometry {
            width: 304,
            height: 240,
        };
        Self {
            objects: Self::standard_objects(30.0),
            timing_noise_us: 1000.0,
            seed,
            name: "bar-square-benchmark".into(),
            ..Self::new(geometry, vec![segment(90.0), segment(-90.0)])
        }
    }

    pub fn duration_us(&self) -> Timestamp {
        self.segments.iter().map(|s| s.duration_us).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.geometry.width == 0 || self.geometry.height == 0 {
            return Err(Error::config("scene geometry has zero area"));
        }
        if self.segments.is_empty() {
            return Err(Error::config("scene needs at least one motion segment"));
        }
        for s in &self.segments {
            if s.duration_us <= 0 {
                return Err(Error::config("motion segment duration must be positive"));
            }
            if !(s.speed > 0.0 && s.speed.is_finite()) {
                return Err(Error::config("motion segment speed must be positive"));
            }
        }
        if self.edge_event_rate == 0 {
            return Err(Error::config("edge_event_rate must be at least 1"));
        }
        if self.timing_noise_us.is_nan() || self.timing_noise_us < 0.0 {
            return Err(Error::config("timing noise must be non-negative"));
        }
        Ok(())
    }

    /// Cumulative displacement (pixels) at the start of each segment, plus
    /// the final one.
    fn displacements(&self) -> Vec<(f64, f64)> {
        let mut d = vec![(0.0, 0.0)];
        for s in &self.segments {
            let (vx, vy) = s.velocity_px_per_us();
            let last = *d.last().unwrap();
            d.push((
                last.0 + vx * s.duration_us as f64,
                last.1 + vy * s.duration_us as f64,
            ));
        }
        d
    }

    /// Layout origin chosen so the trajectory is centered on the sensor.
    fn origin(&self, disp: &[(f64, f64)]) -> (f64, f64) {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(x, y) in disp {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        (
            f64::from(self.geometry.width) / 2.0 - (x0 + x1) / 2.0,
            f64::from(self.geometry.height) / 2.0 - (y0 + y1) / 2.0,
        )
    }

    /// Renders the scene to a time-ordered event stream.
    pub fn events(&self) -> Result<Vec<RawEvent>> {
        self.validate()?;
        let disp = self.displacements();
        let origin = self.origin(&disp);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, self.timing_noise_us.max(f64::MIN_POSITIVE))
            .map_err(|e| Error::config(e.to_string()))?;

        // (time in us as real, x, y, polarity)
        let mut raw: Vec<(f64, u16, u16, bool)> = Vec::new();
        for obj in &self.objects {
            let planes = obj.half_planes();
            let base = (origin.0 + obj.center.0, origin.1 + obj.center.1);
            for py in 0..self.geometry.height {
                for px in 0..self.geometry.width {
                    let mut seg_start = 0.0;
                    for (si, seg) in self.segments.iter().enumerate() {
                        let v = seg.velocity_px_per_us();
                        let dur = seg.duration_us as f64;
                        let q = (
                            f64::from(px) - base.0 - disp[si].0,
                            f64::from(py) - base.1 - disp[si].1,
                        );
                        if let Some(c) = clip(&planes, q, v, dur) {
                            let rate = f64::from(self.edge_event_rate);
                            if c.enter > 0.0 {
                                let vn = speed_along(planes[c.enter_face].0, v);
                                for k in 0..self.edge_event_rate {
                                    let tau = c.enter + f64::from(k) / (rate * vn);
                                    if tau < dur {
                                        raw.push((seg_start + tau, px, py, true));
                                    }
                                }
                            }
                            if c.exit < dur {
                                let vn = speed_along(planes[c.exit_face].0, v);
                                for k in 0..self.edge_event_rate {
                                    let tau = c.exit + f64::from(k) / (rate * vn);
                                    if tau < dur {
                                        raw.push((seg_start + tau, px, py, false));
                                    }
                                }
                            }
                        }
                        seg_start += dur;
                    }
                }
            }
        }

        let mut events: Vec<RawEvent> = raw
            .into_iter()
            .map(|(t, x, y, p)| {
                let jitter = rng.random_range(-1i64..=1);
                let extra = if self.timing_noise_us > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                let t = ((t + extra).round() as i64 + jitter).max(0);
                RawEvent::new(x, y, t, p)
            })
            .collect();
        events.sort_by_key(|e| (e.t, e.y, e.x, e.p));
        Ok(events)
    }

    pub fn ground_truth(&self) -> GroundTruth {
        if let [seg] = self.segments.as_slice() {
            return GroundTruth::Direction(seg.direction_deg);
        }
        let mut start = 0;
        GroundTruth::Segments(
            self.segments
                .iter()
                .map(|s| {
                    let seg = TruthSegment {
                        start,
                        end: start + s.duration_us,
                        angle_deg: s.direction_deg,
                        speed: Some(s.speed),
                    };
                    start += s.duration_us;
                    seg
                })
                .collect(),
        )
    }

    /// Scene velocity in pixels per second sampled every `step_us`.
    pub fn velocity_series(&self, step_us: Timestamp) -> Vec<VelocitySample> {
        let step = step_us.max(1);
        let mut out = Vec::new();
        let mut t = 0;
        while t < self.duration_us() {
            let (vx, vy) = self.velocity_at(t);
            out.push(VelocitySample { t, vx, vy });
            t += step;
        }
        out
    }

    /// Scene velocity in pixels per second at time `t`.
    pub fn velocity_at(&self, t: Timestamp) -> (f64, f64) {
        let mut start = 0;
        for s in &self.segments {
            if t < start + s.duration_us {
                let (vx, vy) = s.velocity_px_per_us();
                return (vx * 1e6, vy * 1e6);
            }
            start += s.duration_us;
        }
        (0.0, 0.0)
    }

    pub fn manifest(&self, event_path: impl Into<PathBuf>) -> DatasetManifest {
        DatasetManifest {
            name: self.name.clone(),
            geometry: self.geometry,
            event_path: event_path.into(),
            ground_truth: self.ground_truth(),
            duration_us: self.duration_us(),
        }
    }
}

fn speed_along(n: (f64, f64), v: (f64, f64)) -> f64 {
    (n.0 * v.0 + n.1 * v.1).abs()
}

struct Crossing {
    enter: f64,
    exit: f64,
    enter_face: usize,
    exit_face: usize,
}

/// Interval of `tau` in `[0, dur]` during which the point `q - v tau` lies in
/// the convex polygon `{p : n . p <= h}` (Cyrus-Beck clipping).
fn clip(planes: &[((f64, f64), f64)], q: (f64, f64), v: (f64, f64), dur: f64) -> Option<Crossing> {
    let mut c = Crossing {
        enter: 0.0,
        exit: dur,
        enter_face: 0,
        exit_face: 0,
    };
    for (i, &(n, h)) in planes.iter().enumerate() {
        // n . (q - v tau) <= h  <=>  -(n . v) tau <= h - n . q
        let slope = -(n.0 * v.0 + n.1 * v.1);
        let gap = h - (n.0 * q.0 + n.1 * q.1);
        if slope.abs() < 1e-15 {
            if gap < 0.0 {
                return None;
            }
        } else if slope > 0.0 {
            let lim = gap / slope;
            if lim < c.exit {
                c.exit = lim;
                c.exit_face = i;
            }
        } else {
            let lim = gap / slope;
            if lim > c.enter {
                c.enter = lim;
                c.enter_face = i;
            }
        }
    }
    (c.enter <= c.exit).then_some(c)
}

/// Single-segment Bar-Square recording with the standard layout and seed.
pub fn generate_bar_square(
    geometry: SensorGeometry,
    speed: f64,
    direction_deg: f64,
    duration_us: Timestamp,
    edge_event_rate: u32,
) -> Result<(Vec<RawEvent>, DatasetManifest)> {
    let mut scene = BarSquareScene::new(
        geometry,
        vec![MotionSegment {
            duration_us,
            speed,
            direction_deg,
        }],
    );
    scene.edge_event_rate = edge_event_rate;
    let events = scene.events()?;
    Ok((events, scene.manifest("bar-square.events.csv")))
}
