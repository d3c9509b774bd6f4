use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn arms(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arms"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}\nstderr: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value<'a>(report: &'a str, key: &str) -> &'a str {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("`{key}` missing from\n{report}"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Short single-direction recording plus its local flow.
struct Fixture {
    dir: TempDir,
    manifest: PathBuf,
    flow: PathBuf,
    flow_events: usize,
}

fn fixture() -> Fixture {
    let dir = TempDir::new().unwrap();
    let events = dir.path().join("scene.csv");
    let out = stdout(&arms(&[
        "generate",
        "-o",
        p(&events),
        "--speed",
        "400",
        "--direction",
        "90",
        "--duration-us",
        "15000",
    ]));
    let manifest = PathBuf::from(value(&out, "manifest"));
    assert!(manifest.exists());
    let flow = dir.path().join("local.csv");
    let out = stdout(&arms(&["localflow", "-i", p(&manifest), "-o", p(&flow)]));
    let flow_events: usize = value(&out, "flow_events").parse().unwrap();
    assert!(flow_events > 100, "{out}");
    assert_eq!(
        fs::read_to_string(&flow).unwrap().lines().count(),
        flow_events
    );
    Fixture {
        dir,
        manifest,
        flow,
        flow_events,
    }
}

fn precomputed<'a>(f: &'a Fixture, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![
        "-i",
        p(&f.flow),
        "-s",
        "run.local_flow=precomputed",
        "-s",
        "farms.n=300",
        "-s",
        "farms.w_max=40",
    ];
    v.extend_from_slice(extra);
    v
}

#[test]
fn pipeline_end_to_end() {
    let f = fixture();
    let out_path = f.dir.path().join("true.csv");
    let mut args = vec!["run", "-o", p(&out_path)];
    args.extend(precomputed(&f, &[]));
    let report = stdout(&arms(&args));
    assert_eq!(value(&report, "engine"), "farms");
    assert_eq!(
        value(&report, "results").parse::<usize>().unwrap(),
        f.flow_events
    );
    assert_eq!(
        fs::read_to_string(&out_path).unwrap().lines().count(),
        f.flow_events
    );

    let hist = f.dir.path().join("hist.csv");
    let m = stdout(&arms(&[
        "metrics",
        "-f",
        p(&out_path),
        "--manifest",
        p(&f.manifest),
        "--histogram",
        p(&hist),
        "--engine-rate",
        "1e9",
    ]));
    assert_eq!(value(&m, "truth0.angle_deg"), "90.0000");
    let err: f64 = value(&m, "truth0.error_deg").parse().unwrap();
    assert!(err < 5.0, "{m}");
    assert_eq!(value(&m, "realtime"), "true");
    assert!(fs::read_to_string(&hist)
        .unwrap()
        .starts_with("bin_center_deg,count\n"));

    let slow = stdout(&arms(&[
        "metrics",
        "-f",
        p(&out_path),
        "--engine-rate",
        "1",
    ]));
    assert_eq!(value(&slow, "realtime"), "false");
}

#[test]
fn raw_events_with_explicit_geometry() {
    let f = fixture();
    let events = f.dir.path().join("scene.csv");
    let report = stdout(&arms(&[
        "run",
        "-i",
        p(&events),
        "-s",
        "sensor.width=304",
        "-s",
        "sensor.height=240",
        "-s",
        "farms.n=300",
    ]));
    assert_eq!(
        value(&report, "flow_events").parse::<usize>().unwrap(),
        f.flow_events
    );
}

#[test]
fn config_file_then_overrides() {
    let f = fixture();
    let cfg = f.dir.path().join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "# pipeline\nrun.engine=arms\nrun.input={}\nrun.local_flow=precomputed\nfarms.n=200\nfarms.w_max=40\n",
            p(&f.flow)
        ),
    )
    .unwrap();
    let from_file = stdout(&arms(&["run", "-c", p(&cfg)]));
    assert_eq!(value(&from_file, "engine"), "arms");

    let flag = stdout(&arms(&["run", "-c", p(&cfg), "-e", "harms"]));
    assert_eq!(value(&flag, "engine"), "harms");

    // --set wins over the shorthand flag
    let set = stdout(&arms(&[
        "run",
        "-c",
        p(&cfg),
        "-e",
        "harms",
        "-s",
        "engine=farms",
    ]));
    assert_eq!(value(&set, "engine"), "farms");
    let iters: u64 = value(&set, "loop_iterations").parse().unwrap();
    let n = f.flow_events as u64;
    let expected: u64 = (1..=n).map(|k| 2 * 4 * k.min(200)).sum();
    assert_eq!(iters, expected);
}

#[test]
fn reruns_are_byte_identical() {
    let f = fixture();
    let a = f.dir.path().join("a.csv");
    let b = f.dir.path().join("b.csv");
    for out in [&a, &b] {
        let mut args = vec!["run", "-e", "harms", "-s", "harms.p=4", "-o", p(out)];
        args.extend(precomputed(&f, &[]));
        stdout(&arms(&args));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let same = stdout(&arms(&["compare", "--files", p(&a), p(&b)]));
    assert_eq!(value(&same, "window_disagreements"), "0");
    assert_eq!(value(&same, "max_component_diff"), "0.000000");
}

#[test]
fn compare_engines_on_one_input() {
    let f = fixture();
    let mut args = vec!["compare", "--engines", "farms", "harms"];
    args.extend(precomputed(&f, &[]));
    let out = stdout(&arms(&args));
    assert_eq!(value(&out, "engines"), "farms,harms");
    assert_eq!(
        value(&out, "events").parse::<usize>().unwrap(),
        f.flow_events
    );
    // uniform motion makes the window means near-ties, so only the
    // per-component bound on agreeing windows is meaningful here
    let diff: f64 = value(&out, "max_component_diff").parse().unwrap();
    assert!(diff <= 1.0, "{out}");
}

#[test]
fn bench_grid_to_csv() {
    let f = fixture();
    let csv = f.dir.path().join("bench.csv");
    let mut args = vec![
        "bench",
        "--sweep",
        "engine=farms,harms",
        "--sweep",
        "farms.eta=2,4",
        "--repeats",
        "1",
        "-o",
        p(&csv),
    ];
    args.extend(precomputed(&f, &[]));
    let out = stdout(&arms(&args));
    assert_eq!(value(&out, "rows"), "4");
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let ok = header.iter().position(|h| *h == "iterations_ok").unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[ok] == "true"));
    assert_eq!(
        rows.iter().map(|r| r[0]).collect::<Vec<_>>(),
        ["farms", "farms", "harms", "harms"]
    );
}

#[test]
fn synthetic_input_needs_no_files() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("flow.csv");
    let report = stdout(&arms(&[
        "localflow",
        "-i",
        "synthetic:bar-square",
        "-o",
        p(&out),
    ]));
    assert_eq!(value(&report, "sensor"), "304x240");
    assert!(value(&report, "flow_events").parse::<usize>().unwrap() > 1000);
}

fn code(args: &[&str]) -> Option<i32> {
    arms(args).status.code()
}

#[test]
fn exit_codes() {
    let f = fixture();
    let out = f.dir.path().join("never.csv");
    // W_m not divisible by eta: rejected before anything is written
    let mut args = vec!["run", "-o", p(&out)];
    args.extend(precomputed(&f, &["-s", "farms.w_max=41"]));
    assert_eq!(code(&args), Some(2));
    assert!(!out.exists());

    assert_eq!(
        code(&["run", "-i", p(&f.flow), "-s", "bogus.key=1"]),
        Some(2)
    );
    assert_eq!(code(&["run", "-i", p(&f.flow), "-s", "no-equals"]), Some(2));
    assert_eq!(code(&["run", "-i", p(&f.flow), "-e", "quantum"]), Some(2));
    assert_eq!(code(&["run"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
    let missing_cfg = f.dir.path().join("missing.cfg");
    assert_eq!(code(&["run", "-c", p(&missing_cfg)]), Some(2));
    // raw events without a sensor size
    let events = f.dir.path().join("scene.csv");
    assert_eq!(code(&["run", "-i", p(&events)]), Some(2));

    let missing = f.dir.path().join("missing.csv");
    assert_eq!(
        code(&["run", "-i", p(&missing), "-s", "run.local_flow=precomputed"]),
        Some(3)
    );
    let garbage = f.dir.path().join("garbage.csv");
    fs::write(&garbage, "1,2,oops\n").unwrap();
    assert_eq!(code(&["metrics", "-f", p(&garbage)]), Some(3));
    // raw events outside the declared sensor
    assert_eq!(
        code(&[
            "run",
            "-i",
            p(&events),
            "-s",
            "sensor.width=10",
            "-s",
            "sensor.height=10"
        ]),
        Some(3)
    );
}
