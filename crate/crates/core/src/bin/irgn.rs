use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use irgn::experiment::{self, check, ExperimentConfig, Report};
use irgn::Error;

#[derive(Parser)]
#[command(
    name = "irgn",
    version,
    about = "Regularized Gauss-Newton solvers for the Darcy inverse problem"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured solver and write traces, summaries and fields.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to `output.dir` from the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `solver.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Mini-batch sweep over both truths; writes table1.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "16,32,64,128")]
        batches: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare all four variants on the configured problem.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Numerical self-checks.
    Check {
        /// Smaller instance counts and grids.
        #[arg(long)]
        fast: bool,
    },
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    let src = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })?;
    let cfg = ExperimentConfig::from_toml_str(&src).map_err(|issue| {
        eprintln!("error: {}: {issue}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })?;
    if let Err((section, key, msg)) = cfg.check() {
        let line = experiment::config::locate(&src, section, key)
            .map(|l| format!("line {l}: "))
            .unwrap_or_default();
        eprintln!("error: {}: {line}{section}.{key}: {msg}", path.display());
        return Err(ExitCode::from(EXIT_CONFIG));
    }
    Ok(cfg)
}

fn finish(result: irgn::Result<Report>) -> ExitCode {
    match result {
        Ok(report) => {
            for l in &report.lines {
                println!("{l}");
            }
            if report.diverged {
                ExitCode::from(EXIT_DIVERGED)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(Error::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, seed } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Some(s) = seed {
                cfg.solver.seed = s;
            }
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let result = experiment::cmd_run(&cfg, &dir);
            if result.is_ok() {
                println!("outputs in {}", dir.display());
            }
            finish(result)
        }
        Command::Sweep { config, batches, out } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            finish(experiment::cmd_sweep(&cfg, &batches, &dir).map(|(r, _)| r))
        }
        Command::Compare { config, out } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            finish(experiment::cmd_compare(&cfg, &dir).map(|(r, _)| r))
        }
        Command::Check { fast } => {
            let outcomes = check::run_all(fast);
            for o in &outcomes {
                println!("{}", o.line());
            }
            if outcomes.iter().all(|o| o.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILURE)
            }
        }
    }
}
