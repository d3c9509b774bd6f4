//! End-to-end orchestration: ingest, local flow, pooling engine, output.
//!
//! Runs are described by a [`RunConfig`], read from flat `key=value` text
//! with dotted section prefixes:
//!
//! ```text
//! run.engine=farms            # arms | farms | harms
//! run.input=scene.manifest    # events file, manifest, local-flow file or synthetic:bar-square
//! run.output=flow.csv
//! run.local_flow=compute      # compute | precomputed
//! run.seed=1592637989
//! run.workers=1
//! sensor.width=304
//! sensor.height=240
//! farms.w_max=320             # shared by all engines; arms.* and harms.* also accepted
//! farms.eta=4
//! farms.tau=5000
//! farms.n=1000
//! harms.p=1
//! harms.clock_hz=200e6        # any harms cycle key enables the throughput estimate
//! localflow.radius=3
//! ```

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::arms::{arms_iteration_count, ArmsEngine};
use crate::error::{Error, Result};
use crate::event::{SensorGeometry, Timestamp};
use crate::farms::FarmsEngine;
use crate::flow::{IterationStats, LocalFlowEvent, TrueFlowResult};
use crate::harms::{estimate_throughput, CycleModel, HarmsEngine};
use crate::io::{self, DatasetManifest};
use crate::local_flow::{local_flow_stream, LocalFlowConfig};
use crate::metrics::{direction_modes, DirectionStats, DEFAULT_BIN_WIDTH_DEG};
use crate::params::ArmsParams;
use crate::synth::{BarSquareScene, DEFAULT_SEED};

/// Input name that selects the built-in benchmark scene.
pub const SYNTHETIC_INPUT: &str = "synthetic:bar-square";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EngineKind {
    Arms,
    Farms,
    Harms,
}

impl EngineKind {
    pub const ALL: [EngineKind; 3] = [EngineKind::Arms, EngineKind::Farms, EngineKind::Harms];

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Arms => "arms",
            EngineKind::Farms => "farms",
            EngineKind::Harms => "harms",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "arms" => Ok(EngineKind::Arms),
            "farms" => Ok(EngineKind::Farms),
            "harms" => Ok(EngineKind::Harms),
            other => Err(Error::config(format!("unknown engine `{other}`"))),
        }
    }
}

/// Where local-flow events come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalFlowSource {
    /// Raw events are converted with the plane-fitting front end.
    Compute(LocalFlowConfig),
    /// The input file already holds local-flow events.
    Precomputed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub engine: EngineKind,
    pub params: ArmsParams,
    /// Needed for raw event files; otherwise taken from the manifest or
    /// inferred from the data.
    pub geometry: Option<SensorGeometry>,
    pub local_flow: LocalFlowSource,
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub cycle_model: Option<CycleModel>,
    pub seed: u64,
    /// Batch workers for the hardware model.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            engine: EngineKind::Farms,
            params: ArmsParams::default(),
            geometry: None,
            local_flow: LocalFlowSource::Compute(LocalFlowConfig::default()),
            input: PathBuf::new(),
            output: None,
            cycle_model: None,
            seed: DEFAULT_SEED,
            workers: 1,
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("`{key}` has invalid value `{value}`")))
}

impl RunConfig {
    pub fn from_key_values(pairs: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_key_values(&io::parse_key_values(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let (section, name) = key.split_once('.').unwrap_or(("run", key));
        let gw = |g: Option<SensorGeometry>| {
            g.unwrap_or(SensorGeometry {
                width: 0,
                height: 0,
            })
        };
        match (section, name) {
            ("run", "engine") => self.engine = value.parse()?,
            ("run", "input") => self.input = PathBuf::from(value.trim()),
            ("run", "output") => {
                self.output = (!value.trim().is_empty()).then(|| PathBuf::from(value.trim()))
            }
            ("run", "seed") => self.seed = num(key, value)?,
            ("run", "workers") => self.workers = num(key, value)?,
            ("run", "local_flow") => {
                self.local_flow = match value.trim() {
                    "precomputed" => LocalFlowSource::Precomputed,
                    "compute" => match self.local_flow {
                        LocalFlowSource::Compute(c) => LocalFlowSource::Compute(c),
                        LocalFlowSource::Precomputed => {
                            LocalFlowSource::Compute(LocalFlowConfig::default())
                        }
                    },
                    other => {
                        return Err(Error::config(format!("unknown local_flow mode `{other}`")))
                    }
                }
            }
            ("sensor", "width") => {
                self.geometry = Some(SensorGeometry {
                    width: num(key, value)?,
                    height: gw(self.geometry).height,
                })
            }
            ("sensor", "height") => {
                self.geometry = Some(SensorGeometry {
                    width: gw(self.geometry).width,
                    height: num(key, value)?,
                })
            }
            ("arms" | "farms" | "harms", "w_max") => self.params.w_max = num(key, value)?,
            ("arms" | "farms" | "harms", "eta") => self.params.num_windows = num(key, value)?,
            ("arms" | "farms" | "harms", "tau") => self.params.tau = num(key, value)?,
            ("arms" | "farms" | "harms", "n") => self.params.buffer_len = num(key, value)?,
            ("harms", "p") => self.params.batch = num(key, value)?,
            ("harms", "workers") => self.workers = num(key, value)?,
            ("harms", "cycle_model") => {
                self.cycle_model = match value.trim() {
                    "none" => None,
                    "default" => Some(CycleModel::default()),
                    other => return Err(Error::config(format!("unknown cycle_model `{other}`"))),
                }
            }
            ("harms", cycle_key) => {
                let m = self.cycle_model.get_or_insert_with(CycleModel::default);
                match cycle_key {
                    "transfer_overhead" => m.transfer_overhead = num(key, value)?,
                    "pipeline_fill" => m.pipeline_fill = num(key, value)?,
                    "divider_latency" => m.divider_latency = num(key, value)?,
                    "dividers_per_averager" => m.dividers_per_averager = num(key, value)?,
                    "clock_hz" => m.clock_hz = num(key, value)?,
                    _ => return Err(Error::config(format!("unknown key `{key}`"))),
                }
            }
            ("localflow", field) => {
                let mut c = match self.local_flow {
                    LocalFlowSource::Compute(c) => c,
                    LocalFlowSource::Precomputed => LocalFlowConfig::default(),
                };
                match field {
                    "radius" => c.radius = num(key, value)?,
                    "fit_window" => c.fit_window = num(key, value)?,
                    "min_support" => c.min_support = num(key, value)?,
                    "max_residual" => c.max_residual = num(key, value)?,
                    _ => return Err(Error::config(format!("unknown key `{key}`"))),
                }
                if let LocalFlowSource::Compute(_) = self.local_flow {
                    self.local_flow = LocalFlowSource::Compute(c);
                }
            }
            _ => return Err(Error::config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Full configuration as `key=value` text accepted by [`RunConfig::from_text`].
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "run.engine={}", self.engine);
        let _ = writeln!(s, "run.input={}", self.input.display());
        if let Some(o) = &self.output {
            let _ = writeln!(s, "run.output={}", o.display());
        }
        let _ = writeln!(s, "run.seed={}", self.seed);
        let _ = writeln!(s, "run.workers={}", self.workers);
        if let Some(g) = self.geometry {
            let _ = writeln!(s, "sensor.width={}\nsensor.height={}", g.width, g.height);
        }
        let p = &self.params;
        let _ = writeln!(s, "farms.w_max={}", p.w_max);
        let _ = writeln!(s, "farms.eta={}", p.num_windows);
        let _ = writeln!(s, "farms.tau={}", p.tau);
        let _ = writeln!(s, "farms.n={}", p.buffer_len);
        let _ = writeln!(s, "harms.p={}", p.batch);
        if let Some(m) = &self.cycle_model {
            let _ = writeln!(s, "harms.transfer_overhead={}", m.transfer_overhead);
            let _ = writeln!(s, "harms.pipeline_fill={}", m.pipeline_fill);
            let _ = writeln!(s, "harms.divider_latency={}", m.divider_latency);
            let _ = writeln!(s, "harms.dividers_per_averager={}", m.dividers_per_averager);
            let _ = writeln!(s, "harms.clock_hz={}", m.clock_hz);
        }
        match self.local_flow {
            LocalFlowSource::Precomputed => {
                let _ = writeln!(s, "run.local_flow=precomputed");
            }
            LocalFlowSource::Compute(c) => {
                let _ = writeln!(s, "run.local_flow=compute");
                let _ = writeln!(s, "localflow.radius={}", c.radius);
                let _ = writeln!(s, "localflow.fit_window={}", c.fit_window);
                let _ = writeln!(s, "localflow.min_support={}", c.min_support);
                let _ = writeln!(s, "localflow.max_residual={}", c.max_residual);
            }
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            return Err(Error::config("no input given"));
        }
        self.params.validate()?;
        if let Some(g) = self.geometry {
            SensorGeometry::new(g.width, g.height)?;
        }
        if let LocalFlowSource::Compute(c) = &self.local_flow {
            c.validate()?;
            if self.geometry.is_none()
                && input_kind(&self.input, self.local_flow) == InputKind::Events
            {
                return Err(Error::config(
                    "raw event input needs sensor.width and sensor.height",
                ));
            }
        }
        if let Some(m) = &self.cycle_model {
            m.validate()?;
        }
        if self.workers == 0 {
            return Err(Error::config("workers must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InputKind {
    Synthetic,
    Manifest,
    Events,
    LocalFlow,
}

fn input_kind(path: &Path, source: LocalFlowSource) -> InputKind {
    if path.as_os_str() == SYNTHETIC_INPUT {
        InputKind::Synthetic
    } else if path.extension().is_some_and(|e| e == "manifest") {
        InputKind::Manifest
    } else if source == LocalFlowSource::Precomputed {
        InputKind::LocalFlow
    } else {
        InputKind::Events
    }
}

/// Local-flow stream ready for an engine.
#[derive(Debug, Clone)]
pub struct PreparedInput {
    pub geometry: SensorGeometry,
    /// Raw events read or generated; 0 for precomputed local flow.
    pub raw_events: usize,
    pub flow: Vec<LocalFlowEvent>,
    pub duration_us: Timestamp,
}

fn infer_geometry(flow: &[LocalFlowEvent]) -> Result<SensorGeometry> {
    let w = flow.iter().map(|e| e.x).max().unwrap_or(0);
    let h = flow.iter().map(|e| e.y).max().unwrap_or(0);
    SensorGeometry::new(w.saturating_add(1), h.saturating_add(1))
}

fn span(first: Option<Timestamp>, last: Option<Timestamp>) -> Timestamp {
    match (first, last) {
        (Some(a), Some(b)) => (b - a).max(1),
        _ => 0,
    }
}

/// Reads (or generates) the input and runs the local-flow stage if needed.
pub fn prepare_input(cfg: &RunConfig) -> Result<PreparedInput> {
    let kind = input_kind(&cfg.input, cfg.local_flow);
    let (geometry, raw, duration) = match kind {
        InputKind::LocalFlow => {
            let flow = io::read_local_flow_file(&cfg.input)?;
            let geometry = match cfg.geometry {
                Some(g) => g,
                None => infer_geometry(&flow)?,
            };
            if let Some(e) = flow
                .iter()
                .find(|e| !geometry.contains(e.x.into(), e.y.into()))
            {
                return Err(Error::Bounds {
                    line: 0,
                    x: e.x.into(),
                    y: e.y.into(),
                    width: geometry.width,
                    height: geometry.height,
                });
            }
            let duration = span(flow.first().map(|e| e.t), flow.last().map(|e| e.t));
            return Ok(PreparedInput {
                geometry,
                raw_events: 0,
                flow,
                duration_us: duration,
            });
        }
        InputKind::Synthetic => {
            let scene = BarSquareScene::benchmark(cfg.seed);
            (scene.geometry, scene.events()?, scene.duration_us())
        }
        InputKind::Manifest => {
            let m = DatasetManifest::load(&cfg.input)?;
            let events = io::read_events_file(&m.event_path, m.geometry)?;
            (m.geometry, events, m.duration_us)
        }
        InputKind::Events => {
            let geometry = cfg.geometry.ok_or_else(|| {
                Error::config("raw event input needs sensor.width and sensor.height")
            })?;
            let events = io::read_events_file(&cfg.input, geometry)?;
            let duration = span(events.first().map(|e| e.t), events.last().map(|e| e.t));
            (geometry, events, duration)
        }
    };
    let lf_cfg = match cfg.local_flow {
        LocalFlowSource::Compute(c) => c,
        LocalFlowSource::Precomputed => LocalFlowConfig::default(),
    };
    let flow = local_flow_stream(&raw, geometry, lf_cfg)?;
    Ok(PreparedInput {
        geometry,
        raw_events: raw.len(),
        flow,
        duration_us: duration,
    })
}

/// Any of the three pooling engines behind one interface.
#[derive(Debug, Clone)]
pub enum FlowEngine {
    Arms(ArmsEngine),
    Farms(FarmsEngine),
    Harms(HarmsEngine),
}

impl FlowEngine {
    pub fn new(
        kind: EngineKind,
        params: ArmsParams,
        geometry: SensorGeometry,
        workers: usize,
    ) -> Result<Self> {
        Ok(match kind {
            EngineKind::Arms => FlowEngine::Arms(ArmsEngine::new(params, geometry)?),
            EngineKind::Farms => FlowEngine::Farms(FarmsEngine::new(params)?),
            EngineKind::Harms => FlowEngine::Harms(HarmsEngine::new(params)?.with_workers(workers)),
        })
    }

    pub fn kind(&self) -> EngineKind {
        match self {
            FlowEngine::Arms(_) => EngineKind::Arms,
            FlowEngine::Farms(_) => EngineKind::Farms,
            FlowEngine::Harms(_) => EngineKind::Harms,
        }
    }

    /// Processes a whole stream; the hardware model flushes its last
    /// partial batch.
    pub fn run(&mut self, events: &[LocalFlowEvent]) -> Result<Vec<TrueFlowResult>> {
        match self {
            FlowEngine::Arms(e) => Ok(events.iter().map(|ev| e.process(ev)).collect()),
            FlowEngine::Farms(e) => Ok(events.iter().map(|ev| e.process(ev)).collect()),
            FlowEngine::Harms(e) => Ok(e
                .run(events)?
                .into_iter()
                .map(|r| r.to_true_flow())
                .collect()),
        }
    }

    pub fn stats(&self) -> IterationStats {
        match self {
            FlowEngine::Arms(e) => e.stats(),
            FlowEngine::Farms(e) => e.stats(),
            FlowEngine::Harms(e) => e.stats(),
        }
    }

    /// Input values clamped by the hardware model's 16-bit quantizer.
    pub fn saturations(&self) -> u64 {
        match self {
            FlowEngine::Harms(e) => e.saturations(),
            _ => 0,
        }
    }
}

/// Output of one timed engine pass.
#[derive(Debug, Clone)]
pub struct EngineRun {
    pub results: Vec<TrueFlowResult>,
    pub stats: IterationStats,
    pub wall_time: Duration,
    pub saturations: u64,
}

impl EngineRun {
    /// Processed events per second of wall time.
    pub fn compute_rate(&self) -> f64 {
        self.results.len() as f64 / self.wall_time.as_secs_f64().max(1e-9)
    }
}

/// Builds an engine and times the pooling loop alone.
pub fn run_engine(
    kind: EngineKind,
    params: ArmsParams,
    geometry: SensorGeometry,
    events: &[LocalFlowEvent],
    workers: usize,
) -> Result<EngineRun> {
    let mut engine = FlowEngine::new(kind, params, geometry, workers)?;
    let start = Instant::now();
    let results = engine.run(events)?;
    let wall_time = start.elapsed();
    Ok(EngineRun {
        results,
        stats: engine.stats(),
        wall_time,
        saturations: engine.saturations(),
    })
}

/// Loop iterations an engine must report for a stream of `events` events.
pub fn expected_iterations(kind: EngineKind, params: &ArmsParams, events: usize) -> Result<u64> {
    params.validate()?;
    let eta2 = 2 * params.num_windows as u64;
    let n = params.buffer_len;
    Ok(match kind {
        EngineKind::Arms => events as u64 * arms_iteration_count(params)?,
        EngineKind::Farms => (1..=events).map(|k| eta2 * k.min(n) as u64).sum(),
        EngineKind::Harms => {
            let mut total = 0;
            let mut start = 0;
            while start < events {
                let end = (start + params.batch).min(events);
                total += (end - start) as u64 * eta2 * end.min(n) as u64;
                start = end;
            }
            total
        }
    })
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub engine: EngineKind,
    pub raw_events: usize,
    pub flow_events: usize,
    pub results: usize,
    pub wall_time: Duration,
    pub compute_rate: f64,
    pub saturations: u64,
    pub iterations: IterationStats,
    /// Modelled accelerator throughput when a cycle model is configured.
    pub estimated_throughput: Option<f64>,
    pub output: Option<PathBuf>,
}

impl RunSummary {
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "engine={}", self.engine);
        let _ = writeln!(s, "raw_events={}", self.raw_events);
        let _ = writeln!(s, "flow_events={}", self.flow_events);
        let _ = writeln!(s, "results={}", self.results);
        let _ = writeln!(s, "wall_time_s={:.6}", self.wall_time.as_secs_f64());
        let _ = writeln!(s, "compute_rate_evt_s={:.1}", self.compute_rate);
        let _ = writeln!(s, "loop_iterations={}", self.iterations.loop_iterations);
        let _ = writeln!(s, "events_considered={}", self.iterations.events_considered);
        let _ = writeln!(s, "saturations={}", self.saturations);
        if let Some(t) = self.estimated_throughput {
            let _ = writeln!(s, "estimated_throughput_evt_s={t:.1}");
        }
        if let Some(o) = &self.output {
            let _ = writeln!(s, "output={}", o.display());
        }
        s
    }
}

/// Runs the pipeline and returns both the summary and the results.
pub fn execute(cfg: &RunConfig) -> Result<(RunSummary, Vec<TrueFlowResult>)> {
    cfg.validate()?;
    let input = prepare_input(cfg)?;
    let run = run_engine(
        cfg.engine,
        cfg.params,
        input.geometry,
        &input.flow,
        cfg.workers,
    )?;
    if let Some(path) = &cfg.output {
        io::write_flow(&run.results, io::create_file(path)?)?;
    }
    let estimated_throughput = cfg
        .cycle_model
        .map(|m| estimate_throughput(&cfg.params, &m))
        .transpose()?;
    let summary = RunSummary {
        engine: cfg.engine,
        raw_events: input.raw_events,
        flow_events: input.flow.len(),
        results: run.results.len(),
        wall_time: run.wall_time,
        compute_rate: run.compute_rate(),
        saturations: run.saturations,
        iterations: run.stats,
        estimated_throughput,
        output: cfg.output.clone(),
    };
    Ok((summary, run.results))
}

/// Runs the configured pipeline, writing the flow file when an output is set.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunSummary> {
    execute(cfg).map(|(s, _)| s)
}

/// Direction statistics of true-flow results.
pub fn flow_direction_stats(results: &[TrueFlowResult], bin_width: f64) -> Result<DirectionStats> {
    let angles: Vec<f64> = results.iter().map(|r| r.angle_deg()).collect();
    direction_modes(&angles, bin_width)
}

/// Cartesian parameter grid. Empty axes keep the base configuration's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepGrid {
    pub engines: Vec<EngineKind>,
    pub w_max: Vec<u32>,
    pub num_windows: Vec<usize>,
    pub buffer_len: Vec<usize>,
    pub batch: Vec<usize>,
}

impl SweepGrid {
    /// Adds an axis from `key=v1,v2,...`, using the configuration key names.
    pub fn add_axis(&mut self, spec: &str) -> Result<()> {
        let (key, values) = spec
            .split_once('=')
            .ok_or_else(|| Error::config(format!("sweep `{spec}` is not key=v1,v2,...")))?;
        let items: Vec<&str> = values
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .collect();
        if items.is_empty() {
            return Err(Error::config(format!("sweep `{key}` has no values")));
        }
        fn parse_all<T: FromStr>(key: &str, items: &[&str]) -> Result<Vec<T>> {
            items.iter().map(|v| num(key, v)).collect()
        }
        let name = key.trim().rsplit('.').next().unwrap_or("");
        match name {
            "engine" => self.engines = items.iter().map(|v| v.parse()).collect::<Result<_>>()?,
            "w_max" => self.w_max = parse_all(key, &items)?,
            "eta" => self.num_windows = parse_all(key, &items)?,
            "n" => self.buffer_len = parse_all(key, &items)?,
            "p" => self.batch = parse_all(key, &items)?,
            _ => return Err(Error::config(format!("cannot sweep `{key}`"))),
        }
        Ok(())
    }

    /// Every grid point, engines outermost.
    pub fn points(&self, base: &RunConfig) -> Vec<(EngineKind, ArmsParams)> {
        fn or<T: Copy>(axis: &[T], base: T) -> Vec<T> {
            if axis.is_empty() {
                vec![base]
            } else {
                axis.to_vec()
            }
        }
        let mut out = Vec::new();
        for engine in or(&self.engines, base.engine) {
            for w_max in or(&self.w_max, base.params.w_max) {
                for num_windows in or(&self.num_windows, base.params.num_windows) {
                    for buffer_len in or(&self.buffer_len, base.params.buffer_len) {
                        for batch in or(&self.batch, base.params.batch) {
                            out.push((
                                engine,
                                ArmsParams {
                                    w_max,
                                    num_windows,
                                    buffer_len,
                                    batch,
                                    ..base.params
                                },
                            ));
                        }
                    }
                }
            }
        }
        out
    }
}

/// One benchmark grid point.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub engine: EngineKind,
    pub params: ArmsParams,
    pub events: usize,
    /// Fastest of the repeated runs.
    pub wall_time: Duration,
    pub compute_rate: f64,
    pub loop_iterations: u64,
    pub expected_iterations: u64,
    pub mean_angle: f64,
    pub circular_std: f64,
    pub per_mode_std: f64,
    pub mode_count: usize,
    pub estimated_throughput: Option<f64>,
}

impl BenchRow {
    pub fn iterations_match(&self) -> bool {
        self.loop_iterations == self.expected_iterations
    }
}

pub const BENCH_CSV_HEADER: &str = "engine,w_max,eta,tau,n,p,events,wall_s,compute_rate,loop_iterations,expected_iterations,iterations_ok,mean_angle,circular_std,per_mode_std,mode_count,estimated_throughput";

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(BENCH_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let p = &r.params;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{:.6},{:.1},{},{},{},{:.4},{:.4},{:.4},{},{}",
            r.engine,
            p.w_max,
            p.num_windows,
            p.tau,
            p.buffer_len,
            p.batch,
            r.events,
            r.wall_time.as_secs_f64(),
            r.compute_rate,
            r.loop_iterations,
            r.expected_iterations,
            r.iterations_match(),
            r.mean_angle,
            r.circular_std,
            r.per_mode_std,
            r.mode_count,
            r.estimated_throughput
                .map(|t| format!("{t:.1}"))
                .unwrap_or_default(),
        );
    }
    s
}

/// Runs every grid point on the configured input, `repeats` times each.
pub fn bench(cfg: &RunConfig, grid: &SweepGrid, repeats: usize) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let points = grid.points(cfg);
    for (_, p) in &points {
        p.validate()?;
    }
    let input = prepare_input(cfg)?;
    let mut rows = Vec::with_capacity(points.len());
    for (engine, params) in points {
        let mut best: Option<EngineRun> = None;
        for _ in 0..repeats.max(1) {
            let run = run_engine(engine, params, input.geometry, &input.flow, cfg.workers)?;
            if best.as_ref().is_none_or(|b| run.wall_time < b.wall_time) {
                best = Some(run);
            }
        }
        let run = best.expect("at least one repeat");
        let stats = if run.results.is_empty() {
            None
        } else {
            Some(flow_direction_stats(&run.results, DEFAULT_BIN_WIDTH_DEG)?)
        };
        let model = cfg
            .cycle_model
            .or((engine == EngineKind::Harms).then(CycleModel::default));
        rows.push(BenchRow {
            engine,
            params,
            events: run.results.len(),
            wall_time: run.wall_time,
            compute_rate: run.compute_rate(),
            loop_iterations: run.stats.loop_iterations,
            expected_iterations: expected_iterations(engine, &params, run.results.len())?,
            mean_angle: stats.as_ref().map_or(f64::NAN, |s| s.mean_angle),
            circular_std: stats.as_ref().map_or(f64::NAN, |s| s.circular_std),
            per_mode_std: stats.as_ref().map_or(f64::NAN, |s| s.per_mode_std()),
            mode_count: stats.as_ref().map_or(0, |s| s.mode_count()),
            estimated_throughput: model
                .map(|m| estimate_throughput(&params, &m))
                .transpose()?,
        });
    }
    Ok(rows)
}

/// Per-event agreement between two result streams over the same input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonReport {
    pub events: usize,
    pub window_agreements: usize,
    /// Largest |dvx| or |dvy| among events whose windows agree.
    pub max_component_diff: f64,
    pub mean_component_diff: f64,
}

impl ComparisonReport {
    pub fn report(&self) -> String {
        format!(
            "events={}\nwindow_agreements={}\nwindow_disagreements={}\nmax_component_diff={:.6}\nmean_component_diff={:.6}\n",
            self.events,
            self.window_agreements,
            self.events - self.window_agreements,
            self.max_component_diff,
            self.mean_component_diff,
        )
    }
}

pub fn compare_results(a: &[TrueFlowResult], b: &[TrueFlowResult]) -> Result<ComparisonReport> {
    if a.len() != b.len() {
        return Err(Error::argument(format!(
            "result streams differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let mut agree = 0;
    let mut max_diff: f64 = 0.0;
    let mut sum = 0.0;
    for (i, (ra, rb)) in a.iter().zip(b).enumerate() {
        if (ra.x, ra.y, ra.t) != (rb.x, rb.y, rb.t) {
            return Err(Error::argument(format!(
                "result {i} refers to different events"
            )));
        }
        if ra.window == rb.window {
            agree += 1;
            let d = (ra.vx - rb.vx).abs().max((ra.vy - rb.vy).abs());
            max_diff = max_diff.max(d);
            sum += d;
        }
    }
    Ok(ComparisonReport {
        events: a.len(),
        window_agreements: agree,
        max_component_diff: max_diff,
        mean_component_diff: if agree == 0 { 0.0 } else { sum / agree as f64 },
    })
}

/// Runs two engines on the configured input and compares their outputs.
pub fn compare_engines(cfg: &RunConfig, a: EngineKind, b: EngineKind) -> Result<ComparisonReport> {
    cfg.validate()?;
    let input = prepare_input(cfg)?;
    let ra = run_engine(a, cfg.params, input.geometry, &input.flow, cfg.workers)?;
    let rb = run_engine(b, cfg.params, input.geometry, &input.flow, cfg.workers)?;
    compare_results(&ra.results, &rb.results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flow_file(dir: &Path) -> PathBuf {
        let events: Vec<LocalFlowEvent> = (0..300)
            .map(|i| {
                LocalFlowEvent::new(
                    20 + (i * 7 % 40) as u16,
                    10 + (i * 3 % 30) as u16,
                    i as i64 * 50,
                    ((i % 11) as f64 - 5.0) * 4.0,
                    ((i % 7) as f64 + 1.0) * 3.0,
                )
                .unwrap()
            })
            .collect();
        let path = dir.join("lf.csv");
        io::write_local_flow(&events, fs::File::create(&path).unwrap()).unwrap();
        path
    }

    #[test]
    fn config_keys_and_overrides() {
        let text = "run.engine=harms\nfarms.n=500\nharms.p=8\nfarms.w_max=40\nfarms.eta=4\nlocalflow.radius=2\nharms.clock_hz=100e6\nfarms.n=250\n";
        let cfg = RunConfig::from_text(text).unwrap();
        assert_eq!(cfg.engine, EngineKind::Harms);
        assert_eq!(cfg.params.buffer_len, 250);
        assert_eq!(cfg.params.batch, 8);
        assert_eq!(cfg.cycle_model.unwrap().clock_hz, 100e6);
        match cfg.local_flow {
            LocalFlowSource::Compute(c) => assert_eq!(c.radius, 2),
            LocalFlowSource::Precomputed => panic!("expected compute"),
        }
        let back = RunConfig::from_text(&cfg.to_key_values()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_is_config_error() {
        let err = RunConfig::from_text("farms.bogus=1").unwrap_err();
        assert!(err.is_config());
        assert!(RunConfig::from_text("run.engine=sarms")
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn indivisible_window_rejected_before_processing() {
        let cfg = RunConfig {
            engine: EngineKind::Arms,
            params: ArmsParams {
                w_max: 30,
                num_windows: 4,
                ..ArmsParams::default()
            },
            // nonexistent file: a config error must win over the I/O error
            input: PathBuf::from("/nonexistent/events.csv"),
            geometry: Some(SensorGeometry::new(10, 10).unwrap()),
            ..RunConfig::default()
        };
        assert!(run_pipeline(&cfg).unwrap_err().is_config());
    }

    #[test]
    fn raw_events_need_geometry() {
        let cfg = RunConfig {
            input: PathBuf::from("events.csv"),
            ..RunConfig::default()
        };
        assert!(cfg.validate().unwrap_err().is_config());
    }

    #[test]
    fn precomputed_run_writes_one_line_per_event() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("flow.csv");
        let cfg = RunConfig {
            local_flow: LocalFlowSource::Precomputed,
            input: flow_file(dir.path()),
            output: Some(out.clone()),
            params: ArmsParams {
                w_max: 40,
                buffer_len: 100,
                ..ArmsParams::default()
            },
            ..RunConfig::default()
        };
        let summary = run_pipeline(&cfg).unwrap();
        assert_eq!(summary.flow_events, 300);
        assert_eq!(io::read_flow_file(&out).unwrap().len(), 300);
        assert_eq!(
            summary.iterations.loop_iterations,
            expected_iterations(EngineKind::Farms, &cfg.params, 300).unwrap()
        );
    }

    #[test]
    fn instrumented_counts_match_expectation_for_every_engine() {
        let dir = tempfile::tempdir().unwrap();
        let input = flow_file(dir.path());
        for engine in EngineKind::ALL {
            for batch in [1, 7] {
                let cfg = RunConfig {
                    engine,
                    local_flow: LocalFlowSource::Precomputed,
                    input: input.clone(),
                    params: ArmsParams {
                        w_max: 20,
                        num_windows: 4,
                        tau: 2000,
                        buffer_len: 64,
                        batch,
                    },
                    ..RunConfig::default()
                };
                let (summary, _) = execute(&cfg).unwrap();
                assert_eq!(
                    summary.iterations.loop_iterations,
                    expected_iterations(engine, &cfg.params, summary.results).unwrap(),
                    "{engine} P={batch}"
                );
            }
        }
    }

    #[test]
    fn repeated_runs_are_identical() {
        let dir = tempfile::tempdir().unwrap();
        let input = flow_file(dir.path());
        let mut outputs = Vec::new();
        for i in 0..2 {
            let out = dir.path().join(format!("out{i}.csv"));
            let cfg = RunConfig {
                engine: EngineKind::Harms,
                local_flow: LocalFlowSource::Precomputed,
                input: input.clone(),
                output: Some(out.clone()),
                params: ArmsParams {
                    w_max: 40,
                    batch: 4,
                    ..ArmsParams::default()
                },
                ..RunConfig::default()
            };
            run_pipeline(&cfg).unwrap();
            outputs.push(fs::read(out).unwrap());
        }
        assert_eq!(outputs[0], outputs[1]);
    }

    #[test]
    fn sweep_grid_expands_axes() {
        let mut grid = SweepGrid::default();
        grid.add_axis("farms.w_max=40,80").unwrap();
        grid.add_axis("engine=farms,harms").unwrap();
        let base = RunConfig::default();
        let pts = grid.points(&base);
        assert_eq!(pts.len(), 4);
        assert_eq!(
            pts[0],
            (
                EngineKind::Farms,
                ArmsParams {
                    w_max: 40,
                    ..base.params
                }
            )
        );
        assert_eq!(pts[3].0, EngineKind::Harms);
        assert!(grid.add_axis("farms.tau=1").is_err());
        assert!(grid.add_axis("w_max").is_err());
    }

    #[test]
    fn bench_rows_cross_check_iterations() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            local_flow: LocalFlowSource::Precomputed,
            input: flow_file(dir.path()),
            params: ArmsParams {
                w_max: 40,
                buffer_len: 50,
                ..ArmsParams::default()
            },
            ..RunConfig::default()
        };
        let mut grid = SweepGrid::default();
        grid.add_axis("engine=arms,farms,harms").unwrap();
        grid.add_axis("farms.n=25,50").unwrap();
        let rows = bench(&cfg, &grid, 1).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(BenchRow::iterations_match));
        assert!(rows[5].estimated_throughput.is_some());
        let csv = bench_csv(&rows);
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("engine,w_max"));
    }

    #[test]
    fn compare_rejects_mismatched_streams() {
        let r = TrueFlowResult {
            x: 1,
            y: 2,
            t: 3,
            vx: 1.0,
            vy: 2.0,
            window: 0,
        };
        let shifted = TrueFlowResult { t: 4, ..r };
        assert!(compare_results(&[r], &[shifted]).is_err());
        assert!(compare_results(&[r], &[]).is_err());
        let other = TrueFlowResult { vx: 1.5, ..r };
        let rep = compare_results(&[r], &[other]).unwrap();
        assert_eq!(rep.window_agreements, 1);
        assert_eq!(rep.max_component_diff, 0.5);
    }
}
