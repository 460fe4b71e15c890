//! Command-line front end: configuration parsing, the experiment registry,
//! sweep execution, and CSV/JSON emission.

mod config;
mod experiments;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use experiments::{EXIT_VALIDATION, EXPERIMENTS};

/// Simulator for open quantum systems coupled to a continuous structured
/// reservoir and a time-discrete feedback reservoir.
#[derive(Parser, Debug)]
#[command(name = "tempoloop", version, about)]
struct Args {
    /// Configuration file (flat key = value text with section headers).
    #[arg(long)]
    config: PathBuf,

    /// Experiment name; overrides the run.experiment key.
    #[arg(long)]
    experiment: Option<String>,

    /// Output directory; overrides the run.out key.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Compare against the matching closed-form reference and fail (exit 3)
    /// when the deviation exceeds the experiment's threshold.
    #[arg(long)]
    assert_oracle: bool,

    /// Override a configuration key, e.g. --override tempo.n_c=6 or
    /// --override "bath.temperature=77 K". Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Allow combined memory depths n_c + n_d beyond the default budget.
    #[arg(long)]
    budget_override: bool,

    /// Concurrent sweep entries.
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();

    let mut cfg = match config::parse_config(&args.config) {
        Ok(c) => c,
        Err(errors) => {
            eprintln!("configuration invalid ({} violations):", errors.len());
            for e in &errors {
                eprintln!("  - {e}");
            }
            return ExitCode::from(EXIT_VALIDATION as u8);
        }
    };
    if let Some(exp) = args.experiment {
        cfg.experiment = exp;
    }
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    if let Some(jobs) = args.jobs {
        cfg.jobs = jobs.max(1);
    }
    if let Err(errors) = config::apply_overrides(&mut cfg, &args.overrides) {
        eprintln!("overrides invalid ({} violations):", errors.len());
        for e in &errors {
            eprintln!("  - {e}");
        }
        return ExitCode::from(EXIT_VALIDATION as u8);
    }
    if !EXPERIMENTS.contains(&cfg.experiment.as_str()) {
        eprintln!(
            "unknown experiment '{}'; available: {}",
            cfg.experiment,
            EXPERIMENTS.join(", ")
        );
        return ExitCode::from(EXIT_VALIDATION as u8);
    }

    match experiments::run_experiment(&cfg, args.assert_oracle, args.budget_override) {
        Ok(outcome) => {
            for m in &outcome.messages {
                println!("{m}");
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
