//! Text interchange formats.
//!
//! * events: `x,y,t,p` with `t` in microseconds and `p` in `{0,1}`
//! * local flow: `x,y,t,vx,vy[,mag]` in pixels per second
//! * true flow: `x,y,t,vx,vy,window`
//! * manifest: `key=value` lines describing a recording and its ground truth
//!
//! Blank lines and lines starting with `#` are ignored by every reader.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::event::{RawEvent, SensorGeometry, Timestamp};
use crate::flow::{LocalFlowEvent, TrueFlowResult};

/// Iterates `(line_number, fields)` over the data lines of a text source.
fn data_lines<R: BufRead>(source: R) -> impl Iterator<Item = Result<(usize, String)>> {
    source
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Err(e) => Some(Err(Error::from(e))),
            Ok(l) => {
                let trimmed = l.trim();
                if trimmed.is_empty() || trimmed.starts_with('#') {
                    None
                } else {
                    Some(Ok((i + 1, trimmed.to_owned())))
                }
            }
        })
}

fn field<T: FromStr>(line: usize, name: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {name} `{raw}`")))
}

fn split_fields(line: usize, text: &str, allowed: &[usize]) -> Result<Vec<String>> {
    let fields: Vec<String> = text.split(',').map(|f| f.trim().to_owned()).collect();
    if !allowed.contains(&fields.len()) {
        return Err(Error::parse(
            line,
            format!(
                "expected {allowed:?} comma-separated fields, found {}",
                fields.len()
            ),
        ));
    }
    Ok(fields)
}

fn check_order(line: usize, t: Timestamp, prev: &mut Option<Timestamp>) -> Result<()> {
    if let Some(p) = *prev {
        if t < p {
            return Err(Error::Ordering { line, t, prev: p });
        }
    }
    *prev = Some(t);
    Ok(())
}

/// Parses an event file, validating bounds and timestamp order.
pub fn parse_events<R: Read>(source: R, geometry: SensorGeometry) -> Result<Vec<RawEvent>> {
    let mut events = Vec::new();
    let mut prev = None;
    for item in data_lines(BufReader::new(source)) {
        let (line, text) = item?;
        let f = split_fields(line, &text, &[4])?;
        let x: i64 = field(line, "x", &f[0])?;
        let y: i64 = field(line, "y", &f[1])?;
        let t: Timestamp = field(line, "timestamp", &f[2])?;
        let p = match f[3].as_str() {
            "0" => false,
            "1" => true,
            other => return Err(Error::parse(line, format!("invalid polarity `{other}`"))),
        };
        if !geometry.contains(x, y) {
            return Err(Error::Bounds {
                line,
                x,
                y,
                width: geometry.width,
                height: geometry.height,
            });
        }
        if t < 0 {
            return Err(Error::parse(line, format!("negative timestamp {t}")));
        }
        check_order(line, t, &mut prev)?;
        events.push(RawEvent::new(x as u16, y as u16, t, p));
    }
    Ok(events)
}

pub fn write_events<W: Write>(events: &[RawEvent], sink: W) -> Result<()> {
    let mut w = BufWriter::new(sink);
    for e in events {
        writeln!(w, "{},{},{},{}", e.x, e.y, e.t, u8::from(e.p))?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-notation decimal with 6 places, falling back to scientific notation
/// for magnitudes where that would keep fewer than 6 significant digits.
struct Decimal6(f64);

impl fmt::Display for Decimal6 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.0;
        if v == 0.0 || v.abs() >= 0.1 || !v.is_finite() {
            write!(f, "{v:.6}")
        } else {
            write!(f, "{v:.6e}")
        }
    }
}

pub fn write_flow<W: Write>(results: &[TrueFlowResult], sink: W) -> Result<()> {
    let mut w = BufWriter::new(sink);
    for r in results {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.x,
            r.y,
            r.t,
            Decimal6(r.vx),
            Decimal6(r.vy),
            r.window
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_flow<R: Read>(source: R) -> Result<Vec<TrueFlowResult>> {
    let mut out = Vec::new();
    for item in data_lines(BufReader::new(source)) {
        let (line, text) = item?;
        let f = split_fields(line, &text, &[6])?;
        out.push(TrueFlowResult {
            x: field(line, "x", &f[0])?,
            y: field(line, "y", &f[1])?,
            t: field(line, "timestamp", &f[2])?,
            vx: field(line, "vx", &f[3])?,
            vy: field(line, "vy", &f[4])?,
            window: field(line, "window", &f[5])?,
        });
    }
    Ok(out)
}

/// Writes local flow with shortest round-trip formatting so a re-read
/// stream is bit-identical.
pub fn write_local_flow<W: Write>(events: &[LocalFlowEvent], sink: W) -> Result<()> {
    let mut w = BufWriter::new(sink);
    for e in events {
        writeln!(w, "{},{},{},{},{},{}", e.x, e.y, e.t, e.vx, e.vy, e.mag)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a local-flow file. The magnitude column is optional and recomputed
/// from the components when absent.
pub fn parse_local_flow<R: Read>(source: R) -> Result<Vec<LocalFlowEvent>> {
    let mut out = Vec::new();
    let mut prev = None;
    for item in data_lines(BufReader::new(source)) {
        let (line, text) = item?;
        let f = split_fields(line, &text, &[5, 6])?;
        let x = field(line, "x", &f[0])?;
        let y = field(line, "y", &f[1])?;
        let t: Timestamp = field(line, "timestamp", &f[2])?;
        let vx = field(line, "vx", &f[3])?;
        let vy = field(line, "vy", &f[4])?;
        check_order(line, t, &mut prev)?;
        let ev = match f.get(5) {
            Some(m) => LocalFlowEvent::with_magnitude(x, y, t, vx, vy, field(line, "mag", m)?),
            None => LocalFlowEvent::new(x, y, t, vx, vy),
        }
        .map_err(|e| Error::parse(line, e.to_string()))?;
        out.push(ev);
    }
    Ok(out)
}

/// Constant motion direction over a time span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSegment {
    pub start: Timestamp,
    pub end: Timestamp,
    pub angle_deg: f64,
    /// Speed in pixels per second, when known.
    pub speed: Option<f64>,
}

/// One sample of a timestamped ground-truth velocity (or angular velocity)
/// series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySample {
    pub t: Timestamp,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    None,
    /// One direction for the whole recording.
    Direction(f64),
    Segments(Vec<TruthSegment>),
    Velocity(Vec<VelocitySample>),
}

impl GroundTruth {
    fn kind(&self) -> &'static str {
        match self {
            GroundTruth::None => "none",
            GroundTruth::Direction(_) => "direction",
            GroundTruth::Segments(_) => "segments",
            GroundTruth::Velocity(_) => "velocity",
        }
    }

    /// Direction segments, expanding a constant direction over `duration`.
    pub fn segments(&self, duration: Timestamp) -> Vec<TruthSegment> {
        match self {
            GroundTruth::Direction(a) => vec![TruthSegment {
                start: 0,
                end: duration,
                angle_deg: *a,
                speed: None,
            }],
            GroundTruth::Segments(s) => s.clone(),
            _ => Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let GroundTruth::Segments(s) = self {
            for (i, seg) in s.iter().enumerate() {
                if seg.end <= seg.start {
                    return Err(Error::argument(format!("truth segment {i} is empty")));
                }
                if i > 0 && seg.start < s[i - 1].end {
                    return Err(Error::argument(format!(
                        "truth segment {i} overlaps or precedes segment {}",
                        i - 1
                    )));
                }
            }
        }
        if let GroundTruth::Velocity(v) = self {
            if v.windows(2).any(|w| w[1].t < w[0].t) {
                return Err(Error::argument(
                    "velocity truth samples are not time-ordered",
                ));
            }
        }
        Ok(())
    }
}

/// Description of a recording on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub geometry: SensorGeometry,
    pub event_path: PathBuf,
    pub ground_truth: GroundTruth,
    pub duration_us: Timestamp,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.duration_us <= 0 {
            return Err(Error::argument("manifest duration must be positive"));
        }
        self.ground_truth.validate()
    }

    /// Writes the manifest to `path`. Segment and velocity ground truth go to
    /// a sibling `<stem>.truth.csv` referenced by `truth_path`. Paths are
    /// stored relative to the manifest directory when possible.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let dir = path.parent().unwrap_or_else(|| Path::new(""));
        let rel = |p: &Path| -> String {
            p.strip_prefix(dir)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned()
        };
        let mut text = String::new();
        text.push_str(&format!("name={}\n", self.name));
        text.push_str(&format!("width={}\n", self.geometry.width));
        text.push_str(&format!("height={}\n", self.geometry.height));
        text.push_str(&format!("events={}\n", rel(&self.event_path)));
        text.push_str(&format!("truth_kind={}\n", self.ground_truth.kind()));
        match &self.ground_truth {
            GroundTruth::None => {}
            GroundTruth::Direction(a) => text.push_str(&format!("truth_angle_deg={a}\n")),
            GroundTruth::Segments(segs) => {
                let truth = truth_path_for(path);
                let mut w = BufWriter::new(create_file(&truth)?);
                for s in segs {
                    match s.speed {
                        Some(v) => writeln!(w, "{},{},{},{}", s.start, s.end, s.angle_deg, v)?,
                        None => writeln!(w, "{},{},{}", s.start, s.end, s.angle_deg)?,
                    }
                }
                w.flush()?;
                text.push_str(&format!("truth_path={}\n", rel(&truth)));
            }
            GroundTruth::Velocity(samples) => {
                let truth = truth_path_for(path);
                let mut w = BufWriter::new(create_file(&truth)?);
                for s in samples {
                    writeln!(w, "{},{},{}", s.t, s.vx, s.vy)?;
                }
                w.flush()?;
                text.push_str(&format!("truth_path={}\n", rel(&truth)));
            }
        }
        text.push_str(&format!("duration_us={}\n", self.duration_us));
        fs::write(path, text).map_err(|e| with_path(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let dir = path.parent().unwrap_or_else(|| Path::new("")).to_path_buf();
        let text = fs::read_to_string(path).map_err(|e| with_path(path, e))?;
        let kv = parse_key_values(&text)?;
        let get = |key: &str| -> Result<&str> {
            kv.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::config(format!("manifest is missing `{key}`")))
        };
        let num = |key: &str| -> Result<i64> {
            get(key)?
                .parse()
                .map_err(|_| Error::config(format!("manifest `{key}` is not an integer")))
        };
        let width =
            u16::try_from(num("width")?).map_err(|_| Error::config("width out of range"))?;
        let height =
            u16::try_from(num("height")?).map_err(|_| Error::config("height out of range"))?;
        let geometry = SensorGeometry::new(width, height)?;
        let resolve = |p: &str| -> PathBuf {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                dir.join(p)
            }
        };
        let ground_truth = match get("truth_kind")? {
            "none" => GroundTruth::None,
            "direction" => GroundTruth::Direction(
                get("truth_angle_deg")?
                    .parse()
                    .map_err(|_| Error::config("truth_angle_deg is not a number"))?,
            ),
            "segments" => GroundTruth::Segments(read_segments(&resolve(get("truth_path")?))?),
            "velocity" => GroundTruth::Velocity(read_velocity(&resolve(get("truth_path")?))?),
            other => return Err(Error::config(format!("unknown truth_kind `{other}`"))),
        };
        let manifest = Self {
            name: get("name")?.to_owned(),
            geometry,
            event_path: resolve(get("events")?),
            ground_truth,
            duration_us: num("duration_us")?,
        };
        manifest
            .validate()
            .map_err(|e| Error::config(e.to_string()))?;
        Ok(manifest)
    }
}

fn truth_path_for(manifest: &Path) -> PathBuf {
    let stem = manifest
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "manifest".into());
    manifest.with_file_name(format!("{stem}.truth.csv"))
}

fn read_segments(path: &Path) -> Result<Vec<TruthSegment>> {
    let mut out = Vec::new();
    for item in data_lines(BufReader::new(open_file(path)?)) {
        let (line, text) = item?;
        let f = split_fields(line, &text, &[3, 4])?;
        out.push(TruthSegment {
            start: field(line, "start", &f[0])?,
            end: field(line, "end", &f[1])?,
            angle_deg: field(line, "angle", &f[2])?,
            speed: f.get(3).map(|s| field(line, "speed", s)).transpose()?,
        });
    }
    Ok(out)
}

fn read_velocity(path: &Path) -> Result<Vec<VelocitySample>> {
    let mut out = Vec::new();
    for item in data_lines(BufReader::new(open_file(path)?)) {
        let (line, text) = item?;
        let f = split_fields(line, &text, &[3])?;
        out.push(VelocitySample {
            t: field(line, "timestamp", &f[0])?,
            vx: field(line, "vx", &f[1])?,
            vy: field(line, "vy", &f[2])?,
        });
    }
    Ok(out)
}

/// Parses flat `key=value` text; later keys override earlier ones.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected key=value", i + 1)))?;
        let (k, v) = (k.trim().to_owned(), v.trim().to_owned());
        match out.iter_mut().find(|(ek, _)| *ek == k) {
            Some(entry) => entry.1 = v,
            None => out.push((k, v)),
        }
    }
    Ok(out)
}

fn with_path(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

/// Opens `path` for reading; the error names the file.
pub fn open_file(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| with_path(path, e))
}

/// Creates or truncates `path`; the error names the file.
pub fn create_file(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| with_path(path, e))
}

pub fn read_events_file(path: &Path, geometry: SensorGeometry) -> Result<Vec<RawEvent>> {
    parse_events(open_file(path)?, geometry)
}

pub fn read_local_flow_file(path: &Path) -> Result<Vec<LocalFlowEvent>> {
    parse_local_flow(open_file(path)?)
}

pub fn read_flow_file(path: &Path) -> Result<Vec<TrueFlowResult>> {
    parse_flow(open_file(path)?)
}
