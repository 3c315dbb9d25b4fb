//! `knnop`: command-line front end for the k-NN opinion dynamics engine.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
//! 3 I/O error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use knn_opinion::equilibria::classify_any;
use knn_opinion::export::write_run_outputs;
use knn_opinion::figures::{generate_figures, FigureError};
use knn_opinion::harness::{
    batch_sweep, run_scenario, Overrides, RobustnessSpec, ScenarioSpec, SweepGrid,
};
use knn_opinion::{verify_lemmas, AnyConfiguration, NumberLiteral};

#[derive(Debug, Parser)]
#[command(name = "knnop", version, about = "k-nearest-neighbor opinion dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario; writes <out>.csv, <out>.json and <out>.svg.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Classify a configuration (JSON array of numbers or "p/q" strings).
    Classify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        k: usize,
        /// Read bare numbers as exact decimals.
        #[arg(long)]
        exact: bool,
        /// Snapping tolerance for float input.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the randomized verification suite; exit 1 if any check fails.
    VerifyLemmas {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Perturb a clustered equilibrium.
    Robustness {
        #[arg(value_enum)]
        action: RobustnessAction,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a batch of scenarios.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        /// Worker threads; 0 picks the number of cores.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce the three reference figures into a directory.
    Figures {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum RobustnessAction {
    Add,
    Remove,
}

#[derive(Debug, Args)]
struct OverrideArgs {
    /// Initial, schedule and event seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    /// Confidence range of the bounded-confidence model.
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    max_steps: Option<u64>,
}

impl OverrideArgs {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            k: self.k,
            d: self.d.as_deref().map(NumberLiteral::from),
            n: self.n,
            tol: self.tol.as_deref().map(NumberLiteral::from),
            max_steps: self.max_steps,
        }
    }
}

enum Failure {
    Verification(String),
    Usage(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Verification(m) | Failure::Usage(m) | Failure::Io(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

/// Pretty JSON to stdout, and to `out` when given.
fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize") + "\n";
    if let Some(path) = out {
        write(path, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate {
            spec,
            out,
            overrides,
        } => {
            let mut scenario = ScenarioSpec::from_json(&read(&spec)?).map_err(usage)?;
            scenario
                .apply_overrides(&overrides.to_overrides())
                .map_err(usage)?;
            let outcome = run_scenario(&scenario).map_err(usage)?;
            write_run_outputs(&out, &scenario, &outcome)
                .map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
            emit(&outcome.summary, None)
        }
        Command::Classify {
            config,
            k,
            exact,
            tol,
            out,
        } => {
            let x = AnyConfiguration::from_json(&read(&config)?, exact).map_err(usage)?;
            let report = classify_any(&x, k, tol).map_err(usage)?;
            emit(&report, out.as_deref())
        }
        Command::VerifyLemmas { seed, trials, out } => {
            let report = verify_lemmas(seed, trials as usize).map_err(usage)?;
            emit(&report, out.as_deref())?;
            if report.all_passed {
                Ok(())
            } else {
                let failed: Vec<_> = report
                    .checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.name)
                    .collect();
                Err(Failure::Verification(format!(
                    "failed checks: {}",
                    failed.join(", ")
                )))
            }
        }
        Command::Robustness { action, spec, out } => {
            let doc = RobustnessSpec::from_json(&read(&spec)?).map_err(usage)?;
            match action {
                RobustnessAction::Add => emit(&doc.run_addition().map_err(usage)?, out.as_deref()),
                RobustnessAction::Remove => {
                    emit(&doc.run_removal().map_err(usage)?, out.as_deref())
                }
            }
        }
        Command::Sweep { grid, jobs, out } => {
            let specs = SweepGrid::from_json(&read(&grid)?).map_err(usage)?.expand();
            emit(&batch_sweep(&specs, jobs), out.as_deref())
        }
        Command::Figures { out } => {
            let report = generate_figures(&out).map_err(|e| match e {
                FigureError::Io(e) => Failure::Io(format!("{}: {e}", out.display())),
                FigureError::Scenario(e) => usage(e),
            })?;
            emit(&report, None)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("knnop: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
