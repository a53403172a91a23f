//! Subcommand implementations. Each writes its outputs under the configured
//! output directory and returns what it wrote.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use bellvol_core::hierarchy::compile;
use bellvol_core::membership::{read_verdicts, write_verdicts, BatteryEntry, MembershipVerdict, TargetKind, Tester};
use bellvol_core::polytope::GENERATOR_NAME;
use bellvol_core::solver::write_program;
use bellvol_core::volume::build_report;
use bellvol_core::{ns_polytope, sample_uniform, BellScenario, Correlation, MEMBERSHIP_EPS, VISIBILITY_CAP};
use rayon::prelude::*;
use serde_json::json;

use crate::{verify, CliError, RunConfig};

pub const SAMPLES_FILE: &str = "samples.csv";
pub const SAMPLES_MANIFEST: &str = "samples.json";
pub const VERDICTS_FILE: &str = "verdicts.csv";
pub const MEMBERSHIP_MANIFEST: &str = "membership.json";
pub const REPORT_FILES: [&str; 5] = [
    "rv_table.csv",
    "nonlocal_fractions.csv",
    "visibility_stats.csv",
    "convergence.csv",
    "manifest.json",
];

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

/// Header of CG labels, then one row of coordinates per sample.
pub fn samples_csv(s: &BellScenario, rows: &[Vec<f64>]) -> String {
    let mut out = s.cg_labels().join(",");
    out.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Parses [`samples_csv`] output for scenario `s`.
pub fn parse_samples(s: &BellScenario, text: &str) -> Result<Vec<Correlation>, CliError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| CliError::Config("empty sample file".into()))?;
    if header.trim() != s.cg_labels().join(",") {
        return Err(CliError::Config(format!("sample header does not match scenario {s}")));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let coords = l
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Config(format!("sample row {}: {e}", i + 1)))?;
            Ok(Correlation::new(*s, coords)?)
        })
        .collect()
}

/// Draws `n_samples` points and writes `samples.csv` and `samples.json`.
pub fn cmd_sample(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let s = cfg.scenario()?;
    if cfg.sampler.n_samples == 0 {
        return Err(CliError::Config("n_samples must be positive".into()));
    }
    if cfg.sampler.thinning == 0 {
        return Err(CliError::Config("thinning must be positive".into()));
    }
    let rows = sample_uniform(&ns_polytope(&s), cfg.sampler.n_samples, &cfg.sampler_config())?;
    let dir = &cfg.run.output_dir;
    let csv = dir.join(SAMPLES_FILE);
    write_file(&csv, &samples_csv(&s, &rows))?;
    let manifest = json!({
        "scenario": s.to_string(),
        "n_samples": rows.len(),
        "columns": s.cg_labels(),
        "generator": GENERATOR_NAME,
        "seed": cfg.sampler.seed,
        "burn_in": cfg.sampler.burn_in,
        "thinning": cfg.sampler.thinning,
    });
    write_file(&dir.join(SAMPLES_MANIFEST), &pretty(&manifest))?;
    Ok(csv)
}

/// Runs the configured battery on every sample in parallel. Verdicts are
/// ordered by sample id, so the worker count never changes the output.
pub fn run_battery(
    cfg: &RunConfig,
    samples: &[Correlation],
    first_id: u64,
) -> Result<Vec<MembershipVerdict>, CliError> {
    let s = cfg.scenario()?;
    let targets = cfg.targets()?;
    let tester = Tester::new(s, &targets)?;
    let battery: Vec<BatteryEntry> = targets
        .iter()
        .map(|&target| BatteryEntry {
            target,
            need_vstar: cfg.membership.need_vstar,
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers()?)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let per_sample: Vec<Vec<MembershipVerdict>> = pool.install(|| {
        samples
            .par_iter()
            .enumerate()
            .map(|(i, c)| tester.test_battery(first_id + i as u64, c, &battery))
            .collect::<Result<_, _>>()
    })?;
    let mut verdicts: Vec<MembershipVerdict> = per_sample.into_iter().flatten().collect();
    verdicts.sort_by_key(|v| v.sample_id);
    Ok(verdicts)
}

fn failure_counts(verdicts: &[MembershipVerdict]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for v in verdicts.iter().filter(|v| v.status.is_failure()) {
        *m.entry(v.target.to_string()).or_insert(0) += 1;
    }
    m
}

pub fn cmd_membership(cfg: &RunConfig, samples: &Path, first_id: u64) -> Result<PathBuf, CliError> {
    let s = cfg.scenario()?;
    let points = parse_samples(&s, &read_file(samples)?)?;
    let verdicts = run_battery(cfg, &points, first_id)?;
    let dir = &cfg.run.output_dir;
    let out = dir.join(VERDICTS_FILE);
    write_file(&out, &write_verdicts(&verdicts))?;
    let failures = failure_counts(&verdicts);
    let n_failed: usize = failures.values().sum();
    let manifest = json!({
        "scenario": s.to_string(),
        "samples": samples.display().to_string(),
        "n_samples": points.len(),
        "first_id": first_id,
        "targets": cfg.membership.targets,
        "need_vstar": cfg.membership.need_vstar,
        "n_verdicts": verdicts.len(),
        "failures": failures,
        "failure_rate": n_failed as f64 / verdicts.len().max(1) as f64,
    });
    write_file(&dir.join(MEMBERSHIP_MANIFEST), &pretty(&manifest))?;
    Ok(out)
}

/// Reads and merges verdict files, ordered by sample id.
pub fn load_verdicts(paths: &[PathBuf]) -> Result<Vec<MembershipVerdict>, CliError> {
    if paths.is_empty() {
        return Err(CliError::Config("no verdict files given".into()));
    }
    let mut all = Vec::new();
    for p in paths {
        all.extend(read_verdicts(&read_file(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?);
    }
    let mut seen = BTreeSet::new();
    for v in &all {
        if !seen.insert((v.sample_id, v.target.to_string())) {
            return Err(CliError::Config(format!(
                "sample {} has two verdicts for {}",
                v.sample_id, v.target
            )));
        }
    }
    all.sort_by_key(|v| v.sample_id);
    Ok(all)
}

/// Writes the report bundle for the merged verdict files.
pub fn cmd_rv(cfg: &RunConfig, verdict_files: &[PathBuf]) -> Result<PathBuf, CliError> {
    let verdicts = load_verdicts(verdict_files)?;
    let report = build_report(&verdicts, cfg.membership.confidence)?;
    let dir = &cfg.run.output_dir;
    let [rv, nl, vis, conv, man] = REPORT_FILES;
    write_file(&dir.join(rv), &report.rv_table_csv())?;
    write_file(&dir.join(nl), &report.nonlocal_csv())?;
    write_file(&dir.join(vis), &report.visibility_csv())?;
    write_file(&dir.join(conv), &report.convergence_csv())?;
    let levels: Vec<String> = report.rv.iter().map(|e| e.target.to_string()).collect();
    let failures: BTreeMap<String, usize> = report.rv.iter().map(|e| (e.target.to_string(), e.n_failed)).collect();
    let manifest = json!({
        "scenario": cfg.scenario()?.to_string(),
        "seed": cfg.sampler.seed,
        "burn_in": cfg.sampler.burn_in,
        "thinning": cfg.sampler.thinning,
        "targets": levels,
        "tightest_quantum": report.tightest_quantum.map(|t| t.to_string()),
        "confidence": cfg.membership.confidence,
        "membership_eps": MEMBERSHIP_EPS,
        "visibility_cap": VISIBILITY_CAP,
        "n_verdicts": verdicts.len(),
        "failures": failures,
        "total_failures": report.total_failures(),
    });
    write_file(&dir.join(man), &pretty(&manifest))?;
    Ok(dir.clone())
}

/// Runs the self-tests; returns the report lines and the failure count.
pub fn cmd_verify() -> Result<(Vec<String>, usize), CliError> {
    let checks = verify::run()?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    Ok((checks.iter().map(|c| c.to_string()).collect(), failed))
}

/// The point a program is exported for.
pub fn resolve_point(s: &BellScenario, spec: &str) -> Result<Correlation, CliError> {
    match spec {
        "white-noise" => Ok(s.white_noise()),
        "pr-box" => Ok(s.pr_box()?),
        other => {
            let (file, row) = other
                .rsplit_once(':')
                .ok_or_else(|| CliError::Config(format!("point {other:?}: expected pr-box, white-noise or FILE:ROW")))?;
            let row: usize = row
                .parse()
                .map_err(|_| CliError::Config(format!("point {other:?}: bad row")))?;
            let pts = parse_samples(s, &read_file(Path::new(file))?)?;
            pts.into_iter()
                .nth(row)
                .ok_or_else(|| CliError::Config(format!("{file} has no row {row}")))
        }
    }
}

/// Exchange-format text of the visibility program, or of the symbolic
/// moment problem when `moments` is set.
pub fn export_text(s: &BellScenario, target: TargetKind, point: &str, moments: bool) -> Result<String, CliError> {
    let (Some(kind), Some(level)) = (target.hierarchy(), target.level()) else {
        return Err(CliError::Config(format!("{target} has no semidefinite program")));
    };
    let mp = compile(s, kind, level)?;
    if moments {
        return Ok(mp.export());
    }
    let c = resolve_point(s, point)?;
    Ok(write_program(&mp.visibility_program(&c)?))
}
