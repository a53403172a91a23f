use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bellvol_cli::commands::{load_verdicts, REPORT_FILES};
use bellvol_cli::RunConfig;

fn bellvol(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bellvol"));
    cmd.args(args);
    match workers {
        Some(w) => cmd.env("BELLVOL_WORKERS", w),
        None => cmd.env_remove("BELLVOL_WORKERS"),
    };
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn sample_is_deterministic_and_shaped() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&bellvol(
            &["sample", "--scenario", "2,2", "-n", "200", "--seed", "7", "--output-dir", p(d)],
            None,
        ));
    }
    let csv_a = fs::read(a.join("samples.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("samples.csv")).unwrap());
    let text = String::from_utf8(csv_a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 201);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 8));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("samples.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert!(manifest["generator"].as_str().unwrap().contains("ChaCha8"));
}

#[test]
fn invalid_scenario_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = bellvol(&["sample", "--scenario", "2,1", "-n", "5", "--output-dir", p(dir.path())], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_target_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    ok(&bellvol(&["sample", "--scenario", "2,2", "-n", "3", "--output-dir", p(dir.path())], None));
    let out = bellvol(
        &[
            "membership",
            "--scenario",
            "2,2",
            "--samples",
            p(&dir.path().join("samples.csv")),
            "--targets",
            "L,X9",
            "--output-dir",
            p(dir.path()),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_verdict_file_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = bellvol(&["rv", "--verdicts", p(&empty), "--output-dir", p(dir.path())], None);
    assert_eq!(out.status.code(), Some(2));
    fs::write(&empty, "sample_id,target,level,v_star,inside,status\n").unwrap();
    let out = bellvol(&["rv", "--verdicts", p(&empty), "--output-dir", p(dir.path())], None);
    assert_eq!(out.status.code(), Some(2));
}

/// Full pipeline on 100 samples; the worker count must not change any byte.
#[test]
fn pipeline_is_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    ok(&bellvol(&["sample", "--scenario", "2,2", "-n", "100", "--seed", "3", "--output-dir", p(root)], None));
    let samples = root.join("samples.csv");
    let mut reports = Vec::new();
    for w in ["1", "3"] {
        let out_dir = root.join(format!("w{w}"));
        ok(&bellvol(
            &[
                "membership",
                "--scenario",
                "2,2",
                "--samples",
                p(&samples),
                "--targets",
                "L,Qt1,Q1",
                "--output-dir",
                p(&out_dir),
            ],
            Some(w),
        ));
        ok(&bellvol(
            &["rv", "--scenario", "2,2", "--verdicts", p(&out_dir.join("verdicts.csv")), "--output-dir", p(&out_dir)],
            None,
        ));
        let verdicts = load_verdicts(&[out_dir.join("verdicts.csv")]).unwrap();
        assert_eq!(verdicts.len(), 300);
        let bundle: Vec<Vec<u8>> = REPORT_FILES.iter().map(|f| fs::read(out_dir.join(f)).unwrap()).collect();
        reports.push((fs::read(out_dir.join("verdicts.csv")).unwrap(), bundle));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn shards_merge_to_the_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    ok(&bellvol(&["sample", "--scenario", "2,2", "-n", "40", "--seed", "5", "--output-dir", p(root)], None));
    let text = fs::read_to_string(root.join("samples.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let shard = |rows: &[&str], name: &str| {
        let path = root.join(name);
        fs::write(&path, format!("{}\n{}\n", lines[0], rows.join("\n"))).unwrap();
        path
    };
    let s1 = shard(&lines[1..21], "s1.csv");
    let s2 = shard(&lines[21..], "s2.csv");
    let run = |samples: &Path, first: &str, out: &str| {
        let out_dir = root.join(out);
        ok(&bellvol(
            &[
                "membership",
                "--scenario",
                "2,2",
                "--samples",
                p(samples),
                "--targets",
                "L,Q1",
                "--first-id",
                first,
                "--output-dir",
                p(&out_dir),
            ],
            Some("1"),
        ));
        out_dir.join("verdicts.csv")
    };
    let whole = run(&root.join("samples.csv"), "0", "whole");
    let a = run(&s1, "0", "a");
    let b = run(&s2, "20", "b");
    ok(&bellvol(&["rv", "--verdicts", p(&whole), "--output-dir", p(&root.join("r1"))], None));
    ok(&bellvol(&["rv", "--verdicts", p(&b), p(&a), "--output-dir", p(&root.join("r2"))], None));
    for f in REPORT_FILES {
        assert_eq!(fs::read(root.join("r1").join(f)).unwrap(), fs::read(root.join("r2").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn verify_passes() {
    let out = bellvol(&["verify"], None);
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() > 80);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn export_sdp_writes_exchange_format() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("q1.txt");
    ok(&bellvol(
        &["export-sdp", "--scenario", "2,2", "--target", "Q1", "--point", "pr-box", "-o", p(&out_file)],
        None,
    ));
    let prog = bellvol_core::solver::read_program(&fs::read_to_string(&out_file).unwrap()).unwrap();
    let r = bellvol_core::solve(&prog).unwrap();
    assert!((r.objective_value - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    let out = bellvol(&["export-sdp", "--scenario", "2,2", "--target", "Qt1", "--moments"], None);
    ok(&out);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("moment-problem 1"));
    let out = bellvol(&["export-sdp", "--scenario", "2,2", "--target", "L"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_round_trips_and_drives_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.sampler.n_samples = 25;
    cfg.sampler.seed = 11;
    cfg.run.output_dir = dir.path().join("out");
    let path = dir.path().join("run.conf");
    fs::write(&path, cfg.to_text()).unwrap();
    assert_eq!(RunConfig::load(&path).unwrap(), cfg);
    ok(&bellvol(&["--config", p(&path), "sample"], None));
    let text = fs::read_to_string(dir.path().join("out").join("samples.csv")).unwrap();
    assert_eq!(text.lines().count(), 26);
    fs::write(&path, "[sampler]\nbogus = 1\n").unwrap();
    assert_eq!(bellvol(&["--config", p(&path), "sample"], None).status.code(), Some(2));
}

#[test]
fn bad_worker_env_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    ok(&bellvol(&["sample", "-n", "2", "--output-dir", p(dir.path())], None));
    let out = bellvol(
        &["membership", "--samples", p(&dir.path().join("samples.csv")), "--output-dir", p(dir.path())],
        Some("many"),
    );
    assert_eq!(out.status.code(), Some(2));
}
