use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use arms_core::io::{self, create_file, read_flow_file, write_events, write_local_flow};
use arms_core::metrics::{circular_mean, circular_std, pearson_correlation, realtime_check};
use arms_core::pipeline::{self, bench_csv, EngineKind, LocalFlowSource, RunConfig, SweepGrid};
use arms_core::synth::{BarSquareScene, MotionSegment};
use arms_core::{Error, GroundTruth, Result, SensorGeometry, Timestamp, TrueFlowResult};

use crate::{Command, ConfigArgs, GenerateArgs, MetricsArgs};

pub fn dispatch(command: Command) -> Result<String> {
    match command {
        Command::Generate(args) => generate(args),
        Command::Localflow { config, output } => localflow(&config, &output),
        Command::Run { config, output } => run(&config, output.as_deref()),
        Command::Bench {
            config,
            sweeps,
            repeats,
            output,
        } => bench(&config, &sweeps, repeats, output.as_deref()),
        Command::Compare {
            config,
            engines,
            files,
        } => compare(&config, engines, files),
        Command::Metrics(args) => metrics(&args),
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn build_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(input) = &args.input {
        cfg.set("run.input", input)?;
    }
    if let Some(engine) = &args.engine {
        cfg.set("run.engine", engine)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    for item in &args.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| config_error(format!("`--set {item}` is not key=value")))?;
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

fn generate(args: GenerateArgs) -> Result<String> {
    let geometry = SensorGeometry::new(args.width, args.height)?;
    let single = args.speed.is_some() || args.direction.is_some() || args.duration_us.is_some();
    let mut scene = if single {
        BarSquareScene::new(
            geometry,
            vec![MotionSegment {
                duration_us: args.duration_us.unwrap_or(1_000_000),
                speed: args.speed.unwrap_or(100.0),
                direction_deg: args.direction.unwrap_or(90.0),
            }],
        )
    } else {
        BarSquareScene {
            geometry,
            ..BarSquareScene::benchmark(args.seed)
        }
    };
    scene.seed = args.seed;
    if let Some(rate) = args.rate {
        scene.edge_event_rate = rate;
    }
    if let Some(noise) = args.noise_us {
        scene.timing_noise_us = noise;
    }
    let events = scene.events()?;
    write_events(&events, create_file(&args.output)?)?;
    let manifest_path = args
        .manifest
        .unwrap_or_else(|| args.output.with_extension("manifest"));
    scene.manifest(args.output.clone()).save(&manifest_path)?;

    let mut s = String::new();
    let _ = writeln!(s, "events={}", events.len());
    let _ = writeln!(s, "duration_us={}", scene.duration_us());
    let _ = writeln!(s, "output={}", args.output.display());
    let _ = writeln!(s, "manifest={}", manifest_path.display());
    Ok(s)
}

fn localflow(args: &ConfigArgs, output: &Path) -> Result<String> {
    let cfg = build_config(args)?;
    if cfg.local_flow == LocalFlowSource::Precomputed {
        return Err(config_error("localflow needs run.local_flow=compute"));
    }
    cfg.validate()?;
    let input = pipeline::prepare_input(&cfg)?;
    write_local_flow(&input.flow, create_file(output)?)?;
    let mut s = String::new();
    let _ = writeln!(s, "raw_events={}", input.raw_events);
    let _ = writeln!(s, "flow_events={}", input.flow.len());
    let _ = writeln!(
        s,
        "sensor={}x{}",
        input.geometry.width, input.geometry.height
    );
    let _ = writeln!(s, "output={}", output.display());
    Ok(s)
}

fn run(args: &ConfigArgs, output: Option<&Path>) -> Result<String> {
    let mut cfg = build_config(args)?;
    if let Some(o) = output {
        cfg.output = Some(o.to_path_buf());
    }
    Ok(pipeline::run_pipeline(&cfg)?.report())
}

fn bench(
    args: &ConfigArgs,
    sweeps: &[String],
    repeats: usize,
    output: Option<&Path>,
) -> Result<String> {
    let cfg = build_config(args)?;
    if repeats == 0 {
        return Err(config_error("--repeats must be at least 1"));
    }
    let mut grid = SweepGrid::default();
    for axis in sweeps {
        grid.add_axis(axis)?;
    }
    let rows = pipeline::bench(&cfg, &grid, repeats)?;
    let csv = bench_csv(&rows);
    match output {
        Some(path) => {
            create_file(path)?.write_all(csv.as_bytes())?;
            Ok(format!("rows={}\noutput={}\n", rows.len(), path.display()))
        }
        None => Ok(csv),
    }
}

fn compare(
    args: &ConfigArgs,
    engines: Option<Vec<String>>,
    files: Option<Vec<std::path::PathBuf>>,
) -> Result<String> {
    if let Some(files) = files {
        let a = read_flow_file(&files[0])?;
        let b = read_flow_file(&files[1])?;
        return Ok(pipeline::compare_results(&a, &b)?.report());
    }
    let cfg = build_config(args)?;
    let (a, b) = match engines {
        Some(e) => (e[0].parse()?, e[1].parse()?),
        None => (EngineKind::Farms, EngineKind::Harms),
    };
    let report = pipeline::compare_engines(&cfg, a, b)?;
    Ok(format!("engines={a},{b}\n{}", report.report()))
}

fn wrapped_diff(a: f64, b: f64) -> f64 {
    ((a - b + 180.0).rem_euclid(360.0) - 180.0).abs()
}

fn flow_span(results: &[TrueFlowResult]) -> Timestamp {
    match (results.first(), results.last()) {
        (Some(a), Some(b)) => (b.t - a.t).max(1),
        _ => 0,
    }
}

fn metrics(args: &MetricsArgs) -> Result<String> {
    let results = read_flow_file(&args.flow)?;
    if results.is_empty() {
        return Err(Error::Argument(format!(
            "{} holds no results",
            args.flow.display()
        )));
    }
    let stats = pipeline::flow_direction_stats(&results, args.bin_width)?;
    let mut s = stats.report();
    if let Some(path) = &args.histogram {
        create_file(path)?.write_all(stats.histogram_csv().as_bytes())?;
        let _ = writeln!(s, "histogram={}", path.display());
    }

    let manifest = args
        .manifest
        .as_deref()
        .map(io::DatasetManifest::load)
        .transpose()?;
    if let Some(m) = &manifest {
        match &m.ground_truth {
            GroundTruth::Velocity(samples) => {
                let truth_x: Vec<_> = samples.iter().map(|v| (v.t, v.vx)).collect();
                let truth_y: Vec<_> = samples.iter().map(|v| (v.t, v.vy)).collect();
                let flow_x: Vec<_> = results.iter().map(|r| (r.t, r.vx)).collect();
                let flow_y: Vec<_> = results.iter().map(|r| (r.t, r.vy)).collect();
                for (name, a, b) in [("vx", &flow_x, &truth_x), ("vy", &flow_y, &truth_y)] {
                    match pearson_correlation(a, b, args.resample_us) {
                        Ok(r) => {
                            let _ = writeln!(s, "correlation_{name}={r:.6}");
                        }
                        Err(Error::UndefinedCorrelation(_)) => {
                            let _ = writeln!(s, "correlation_{name}=undefined");
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
            truth => {
                for (i, seg) in truth.segments(m.duration_us).iter().enumerate() {
                    let angles: Vec<f64> = results
                        .iter()
                        .filter(|r| seg.start <= r.t && r.t < seg.end)
                        .map(|r| r.angle_deg())
                        .collect();
                    let _ = writeln!(s, "truth{i}.angle_deg={:.4}", seg.angle_deg);
                    let _ = writeln!(s, "truth{i}.count={}", angles.len());
                    if !angles.is_empty() {
                        let mean = circular_mean(&angles)?;
                        let _ = writeln!(s, "truth{i}.mean_deg={mean:.4}");
                        let _ = writeln!(
                            s,
                            "truth{i}.error_deg={:.4}",
                            wrapped_diff(mean, seg.angle_deg)
                        );
                        let _ = writeln!(s, "truth{i}.std_deg={:.4}", circular_std(&angles)?);
                    }
                }
            }
        }
    }

    if let Some(rate) = args.engine_rate {
        let duration = manifest
            .as_ref()
            .map_or_else(|| flow_span(&results), |m| m.duration_us);
        let r = realtime_check(results.len(), duration, rate)?;
        let _ = writeln!(s, "true_flow_rate_evt_s={:.2}", r.true_flow_rate);
        let _ = writeln!(s, "compute_rate_evt_s={:.2}", r.compute_rate);
        let _ = writeln!(s, "realtime={}", r.realtime);
    }
    Ok(s)
}
