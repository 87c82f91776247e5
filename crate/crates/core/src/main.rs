// SPDX-License-Identifier: MIT OR Apache-2.0

//! `steerbandit` command-line interface.
//!
//! Exit codes: 0 when every applicable check passes, 1 on a failed check or
//! runtime error, 2 on a config or usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use steerbandit::harness::config::{Mode, RunConfig};
use steerbandit::harness::output::{read_trajectory_file, to_sorted_json, write_json_file};
use steerbandit::harness::report::CheckResult;
use steerbandit::harness::svg::{write_convergence_svg, Series};
use steerbandit::harness::{self, verify, Outcome};
use steerbandit::Error;

#[derive(Parser)]
#[command(name = "steerbandit", version, about = "Bandit simulator for steering-vector policy optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the config's mode and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo and exact-identity checks.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Sampled groups per configuration.
        #[arg(long)]
        groups: Option<usize>,
        /// Replace the configured seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for `report.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the a-priori certificate as JSON.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        /// Also write the certificate to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Latent-steering suite.
    Latent {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plot one or more trajectory CSVs into an SVG.
    Plot {
        /// Trajectory file; repeat for several series.
        #[arg(long, required = true)]
        csv: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Optimal reward; adds the log-scale gap panel.
        #[arg(long)]
        r_star: Option<f64>,
        /// Series label, in `--csv` order. Defaults to the parent directory name.
        #[arg(long)]
        label: Vec<String>,
    },
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e)
        } else {
            Failure::Runtime(e)
        }
    }
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    RunConfig::load(path).map_err(Failure::Config)
}

fn print_checks(checks: &[CheckResult]) -> bool {
    for c in checks {
        println!("{}", c.line());
    }
    steerbandit::harness::report::all_pass(checks)
}

fn print_outcome(outcome: &Outcome) -> bool {
    for f in &outcome.files {
        log::info!("wrote {}", f.display());
    }
    print_checks(&outcome.checks)
}

fn default_label(path: &Path) -> String {
    path.parent()
        .and_then(Path::file_name)
        .or_else(|| path.file_stem())
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn execute(command: Command) -> Result<bool, Failure> {
    match command {
        Command::Run { config, out } => {
            let cfg = load(&config)?;
            Ok(print_outcome(&harness::run_to_dir(&cfg, &out)?))
        }
        Command::Latent { config, out } => {
            let mut cfg = load(&config)?;
            cfg.mode = Mode::Latent;
            Ok(print_outcome(&harness::run_to_dir(&cfg, &out)?))
        }
        Command::Verify { config, groups, seed, out } => {
            let mut cfg = load(&config)?;
            cfg.mode = Mode::Verify;
            if let Some(g) = groups {
                cfg.verify.groups = g;
            }
            if let Some(s) = seed {
                cfg.verify.seeds = vec![s];
            }
            cfg.validate().map_err(Failure::Config)?;
            match out {
                Some(dir) => Ok(print_outcome(&harness::run_to_dir(&cfg, &dir)?)),
                None => {
                    let report = verify::verify_lemmas(&cfg.verify)?;
                    Ok(print_checks(&report.checks))
                }
            }
        }
        Command::Bounds { config, out } => {
            let cfg = load(&config)?;
            let cert = harness::certificate(&cfg)?;
            println!("{}", to_sorted_json(&cert)?);
            if let Some(path) = out {
                write_json_file(&path, &cert)?;
            }
            Ok(true)
        }
        Command::Plot { csv, out, r_star, label } => {
            if !label.is_empty() && label.len() != csv.len() {
                return Err(Failure::Config(Error::Config(format!(
                    "got {} --label values for {} --csv files",
                    label.len(),
                    csv.len()
                ))));
            }
            let series = csv
                .iter()
                .enumerate()
                .map(|(i, path)| {
                    let records = read_trajectory_file(path)?;
                    Ok(Series {
                        label: label.get(i).cloned().unwrap_or_else(|| default_label(path)),
                        points: records.iter().map(|r| (r.t as f64, r.j)).collect(),
                    })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            write_convergence_svg(&out, &series, r_star)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
