use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use drivesim::formats::RunConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_drivesim"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn small_config(dir: &Path) -> PathBuf {
    let mut cfg = RunConfig::default();
    cfg.evo.pop_size = 8;
    cfg.evo.max_episode_ticks = 300;
    cfg.dqn.batch_size = 16;
    cfg.dqn.max_episode_ticks = 120;
    cfg.eval.max_ticks = 300;
    let path = dir.join("small.toml");
    std::fs::write(&path, cfg.to_toml_string()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(
        run(&["train-evo", "--generations", "many"]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["eval", "--checkpoint", "/nonexistent/checkpoint.bin"])
            .status
            .code(),
        Some(2)
    );

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[evo]\npop_siz = 3\n").unwrap();
    let out = run(&["--config", s(&bad), "--out", s(dir.path()), "train-evo"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pop_siz"));

    let out = run(&["--out", s(dir.path()), "serve", "--rate", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn evo_training_is_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let train = |name: &str, gens: &str| {
        let out = dir.path().join(name);
        ok(&[
            "--config",
            s(&cfg),
            "--seed",
            "11",
            "--out",
            s(&out),
            "train-evo",
            "--generations",
            gens,
        ]);
        out
    };
    let a = train("a", "6");
    let b = train("b", "6");
    assert_eq!(read(a.join("history.csv")), read(b.join("history.csv")));
    assert!(read(a.join("config.toml")).contains("seed = 11"));
    assert!(a.join("scenario.toml").exists() && a.join("timing.json").exists());

    let half = train("half", "3");
    let resumed = dir.path().join("resumed");
    ok(&[
        "--out",
        s(&resumed),
        "train-evo",
        "--resume",
        s(&half.join("checkpoint.bin")),
        "--generations",
        "6",
    ]);
    assert_eq!(
        read(resumed.join("history.csv")),
        read(a.join("history.csv"))
    );
}

#[test]
fn dqn_training_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let train = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "--config",
            s(&cfg),
            "--seed",
            "5",
            "--out",
            s(&out),
            "train-dqn",
            "--episodes",
            "4",
        ]);
        out
    };
    let (a, b) = (train("a"), train("b"));
    assert_eq!(read(a.join("history.csv")), read(b.join("history.csv")));
    assert!(a.join("checkpoint.bin").exists());
}

#[test]
fn eval_logs_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let train = dir.path().join("train");
    ok(&[
        "--config",
        s(&cfg),
        "--out",
        s(&train),
        "train-evo",
        "--generations",
        "1",
    ]);
    let ckpt = train.join("checkpoint.bin");

    let eval = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec![
            "--out",
            s(&out),
            "eval",
            "--checkpoint",
            s(&ckpt),
            "--episodes",
            "5",
        ];
        args.extend_from_slice(extra);
        ok(&args);
        out
    };

    let first = eval("e1", &[]);
    let second = eval("e2", &[]);
    for i in 0..5 {
        let name = format!("episodes/episode_{i:03}.csv");
        assert_eq!(read(first.join(&name)), read(second.join(&name)), "{name}");
    }
    let metrics: serde_json::Value =
        serde_json::from_str(&read(first.join("metrics.json"))).unwrap();
    assert_eq!(metrics["episodes"].as_array().unwrap().len(), 5);
    assert!(metrics.get("e_vf_mean").is_none());

    let own = first.join("agent.csv");
    let against_self = eval("e3", &["--reference", s(&own)]);
    let metrics: serde_json::Value =
        serde_json::from_str(&read(against_self.join("metrics.json"))).unwrap();
    for key in [
        "e_vf_mean",
        "e_vf_max",
        "e_delta_mean",
        "e_delta_max",
        "velocity_error_pct",
    ] {
        assert_eq!(metrics[key].as_f64(), Some(0.0), "{key}");
    }

    let scripted = eval("e4", &["--scripted-reference"]);
    let metrics: serde_json::Value =
        serde_json::from_str(&read(scripted.join("metrics.json"))).unwrap();
    assert!(metrics["e_vf_mean"].as_f64().unwrap() >= 0.0);

    let other = dir.path().join("other");
    ok(&[
        "--out",
        s(&other),
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--scenario",
        "curved_road",
        "--episodes",
        "1",
    ]);
    let out = run(&[
        "--out",
        s(&dir.path().join("bad")),
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--reference",
        s(&other.join("agent.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn record_then_replay_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let controls = dir.path().join("controls.txt");
    let mut text = String::from("# warm up\n");
    for i in 0..80 {
        let steer = ["left", "none", "right"][i % 3];
        let accel = if i < 50 { "accelerate" } else { "brake" };
        text.push_str(&format!("{steer}:{accel}\n"));
    }
    std::fs::write(&controls, text).unwrap();
    ok(&[
        "--out",
        s(dir.path()),
        "record",
        "--scenario",
        "curved_road",
        "--controls",
        s(&controls),
        "--agent",
        "me",
    ]);
    let log = dir.path().join("curved_road_me.csv");
    assert!(log.exists());
    ok(&[
        "--out",
        s(&dir.path().join("replay")),
        "replay",
        "--log",
        s(&log),
    ]);

    let tampered = dir.path().join("tampered.csv");
    let original = read(&log);
    let mut lines: Vec<String> = original.lines().map(String::from).collect();
    let last = lines.len() - 1;
    let mut cols: Vec<String> = lines[last].split(',').map(String::from).collect();
    let x: f64 = cols[2].parse().unwrap();
    cols[2] = format!("{}", x + 1.0);
    lines[last] = cols.join(",");
    std::fs::write(&tampered, lines.join("\n") + "\n").unwrap();
    let out = run(&[
        "--out",
        s(&dir.path().join("replay2")),
        "replay",
        "--log",
        s(&tampered),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_regenerates_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    ok(&[
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "report",
        "--train",
        "--scenarios",
        "straight_highway",
        "curved_road",
    ]);
    let csv = read(out.join("report.csv"));
    let txt = read(out.join("report.txt"));
    assert_eq!(csv.lines().count(), 5, "{csv}");

    ok(&["--out", s(&out), "report"]);
    assert_eq!(read(out.join("report.csv")), csv);
    assert_eq!(read(out.join("report.txt")), txt);

    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    assert_eq!(
        run(&["--out", s(dir.path()), "report", "--runs", s(&empty)])
            .status
            .code(),
        Some(2)
    );
}
