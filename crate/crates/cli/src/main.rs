use std::path::PathBuf;
use std::process::ExitCode;

use bellvol_cli::commands;
use bellvol_cli::config::WORKERS_ENV;
use bellvol_cli::{CliError, RunConfig};
use bellvol_core::membership::TargetKind;
use bellvol_core::BellScenario;
use clap::{Args, Parser, Subcommand};

/// Relative volumes of restricted subsets of the bipartite nonsignaling polytope.
#[derive(Parser, Debug)]
#[command(name = "bellvol", version, after_help = after_help())]
struct Cli {
    /// Run configuration file (sectioned key = value); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

fn after_help() -> String {
    format!(
        "Exit codes: 0 success, 1 failed self-test, 2 configuration or input error, 3 numerical failure.\n\
         Environment: {WORKERS_ENV} overrides the worker count."
    )
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Scenario as `settings,outcomes`, e.g. `2,2`.
    #[arg(long)]
    scenario: Option<String>,
    /// Directory for output files.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw points uniformly from the nonsignaling polytope.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Number of samples.
        #[arg(short = 'n', long)]
        n_samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Sweeps discarded before the first sample.
        #[arg(long)]
        burn_in: Option<usize>,
        /// Sweeps between kept samples.
        #[arg(long)]
        thinning: Option<usize>,
    },
    /// Decide membership of sampled points in a battery of target sets.
    Membership {
        #[command(flatten)]
        common: Common,
        /// Sample CSV written by `sample`.
        #[arg(long)]
        samples: PathBuf,
        /// Comma-separated targets: L, Qk, Qtk, Pk, Mk with integer or
        /// fractional levels, e.g. `L,Qt1,Q1,P1.25`.
        #[arg(long)]
        targets: Option<String>,
        /// Solve every target even when inclusion already decides it.
        #[arg(long)]
        need_vstar: bool,
        /// Sample id of the first row.
        #[arg(long, default_value_t = 0)]
        first_id: u64,
        /// Worker threads; 0 uses all available.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Reduce verdict files to relative volumes and statistics.
    Rv {
        #[command(flatten)]
        common: Common,
        /// Verdict CSV files; shards are merged by sample id.
        #[arg(long, required = true, num_args = 1..)]
        verdicts: Vec<PathBuf>,
        /// Confidence level of the Wilson intervals.
        #[arg(long)]
        confidence: Option<f64>,
    },
    /// Check the size formulas and analytic distances against reference values.
    Verify,
    /// Write the visibility program of a target in exchange format.
    ExportSdp {
        #[command(flatten)]
        common: Common,
        /// Target, e.g. `Q1` or `P1.25`.
        #[arg(long)]
        target: String,
        /// `pr-box`, `white-noise`, or `FILE:ROW` of a sample CSV.
        #[arg(long, default_value = "white-noise")]
        point: String,
        /// Write the symbolic moment problem instead of the program.
        #[arg(long)]
        moments: bool,
        /// Output file; standard output when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn apply_common(cfg: &mut RunConfig, c: &Common) -> Result<(), CliError> {
    if let Some(s) = &c.scenario {
        cfg.set_scenario(s.parse::<BellScenario>()?);
    }
    if let Some(d) = &c.output_dir {
        cfg.run.output_dir = d.clone();
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Sample {
            common,
            n_samples,
            seed,
            burn_in,
            thinning,
        } => {
            apply_common(&mut cfg, &common)?;
            if let Some(n) = n_samples {
                cfg.sampler.n_samples = n;
            }
            if let Some(s) = seed {
                cfg.sampler.seed = s;
            }
            if let Some(b) = burn_in {
                cfg.sampler.burn_in = b;
            }
            if let Some(t) = thinning {
                cfg.sampler.thinning = t;
            }
            let out = commands::cmd_sample(&cfg)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Membership {
            common,
            samples,
            targets,
            need_vstar,
            first_id,
            workers,
        } => {
            apply_common(&mut cfg, &common)?;
            if let Some(t) = targets {
                cfg.membership.targets = t;
            }
            cfg.membership.need_vstar |= need_vstar;
            if let Some(w) = workers {
                cfg.run.workers = w;
            }
            let out = commands::cmd_membership(&cfg, &samples, first_id)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Rv {
            common,
            verdicts,
            confidence,
        } => {
            apply_common(&mut cfg, &common)?;
            if let Some(c) = confidence {
                cfg.membership.confidence = c;
            }
            let out = commands::cmd_rv(&cfg, &verdicts)?;
            eprintln!("wrote report to {}", out.display());
        }
        Command::Verify => {
            let (lines, failed) = commands::cmd_verify()?;
            for l in lines {
                println!("{l}");
            }
            if failed > 0 {
                return Err(CliError::Verify(failed));
            }
        }
        Command::ExportSdp {
            common,
            target,
            point,
            moments,
            output,
        } => {
            apply_common(&mut cfg, &common)?;
            let target: TargetKind = target.parse()?;
            let text = commands::export_text(&cfg.scenario()?, target, &point, moments)?;
            match output {
                Some(p) => std::fs::write(&p, text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
