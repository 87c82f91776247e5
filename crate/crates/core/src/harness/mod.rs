// SPDX-License-Identifier: MIT OR Apache-2.0

//! Experiment harness: configs, runs, checks and artifacts.
//!
//! [`run_to_dir`] executes one [`RunConfig`](config::RunConfig) and writes
//! its artifacts:
//!
//! | mode | files |
//! |---|---|
//! | `population` | `trajectory.csv`, `certificate.json`, `report.json`, `convergence.svg` |
//! | `empirical` | `trajectory.csv` (replication 0), `trajectory_repNNN.csv`, `quantiles.csv`, `report.json`, `convergence.svg` |
//! | `latent` | `latent_trajectory.csv`, `report.json` |
//! | `verify` | `report.json` |
//! | `bounds` | `certificate.json` |
//!
//! `certificate.json` is skipped when `eta = 0`, since the bounds need a
//! positive step size.

pub mod bounds;
pub mod config;
pub mod empirical;
pub mod latent_run;
pub mod output;
pub mod population;
pub mod report;
pub mod seed;
pub mod svg;
pub mod verify;

use std::path::{Path, PathBuf};

use serde::Serialize;

use self::config::{Mode, RunConfig};
use self::output::{ensure_dir, write_json_file, write_table_file, write_trajectory_file};
use self::population::DynamicsSettings;
use self::report::CheckResult;
use self::svg::{write_convergence_svg, Series};
use crate::error::Result;

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub mode: Mode,
    pub checks: Vec<CheckResult>,
    /// Written files, in write order.
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        report::all_pass(&self.checks)
    }
}

#[derive(Serialize)]
struct PopulationReport<'a> {
    config: &'a RunConfig,
    optimal_reward: f64,
    final_j: f64,
    hitting_time: Option<usize>,
    stop: population::StopReason,
    max_recursion_error: f64,
    min_gamma: Option<f64>,
    cond2_before_hit: Option<bool>,
    bound: Option<f64>,
    all_pass: bool,
    checks: &'a [CheckResult],
}

#[derive(Serialize)]
struct EmpiricalReport<'a> {
    config: &'a RunConfig,
    master_seed: u64,
    replication_seeds: Vec<u64>,
    target_arm: usize,
    optimal_reward: f64,
    final_j_median: f64,
    final_target_prob_median: f64,
    all_pass: bool,
    checks: &'a [CheckResult],
}

#[derive(Serialize)]
struct LatentReport<'a> {
    config: &'a RunConfig,
    run: &'a latent_run::LatentRun,
    all_pass: bool,
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    config: &'a RunConfig,
    report: &'a verify::VerifyReport,
    all_pass: bool,
}

fn trajectory_series(label: &str, records: &[output::TrajectoryRecord]) -> Series {
    Series {
        label: label.to_string(),
        points: records.iter().map(|r| (r.t as f64, r.j)).collect(),
    }
}

/// Runs `config` and writes its artifacts into `out`, creating it if needed.
pub fn run_to_dir(config: &RunConfig, out: &Path) -> Result<Outcome> {
    ensure_dir(out)?;
    let mut files = Vec::new();
    let mut emit = |name: &str| {
        let path = out.join(name);
        files.push(path.clone());
        path
    };
    let checks = match config.mode {
        Mode::Population => {
            let instance = config.build_instance()?;
            let initial = config.initial_policy_for(&instance)?;
            let run = population::run_population(&instance, &initial, &DynamicsSettings::from(config))?;
            let k = instance.arm_count();
            write_trajectory_file(&emit("trajectory.csv"), k, &run.records)?;
            if config.eta > 0.0 {
                let cert = bounds::compute_bounds(
                    &instance,
                    &initial,
                    &config.contrast,
                    config.eta,
                    config.group_size,
                    config.eps_target,
                )?;
                write_json_file(&emit("certificate.json"), &cert)?;
            }
            let report = PopulationReport {
                config,
                optimal_reward: run.optimal_reward,
                final_j: run.records.last().map_or(f64::NAN, |r| r.j),
                hitting_time: run.hitting_time,
                stop: run.stop,
                max_recursion_error: run.max_recursion_error,
                min_gamma: run.min_gamma,
                cond2_before_hit: run.cond2_before_hit,
                bound: run.bound,
                all_pass: report::all_pass(&run.checks),
                checks: &run.checks,
            };
            write_json_file(&emit("report.json"), &report)?;
            let series = [trajectory_series(run.method.label(), &run.records)];
            write_convergence_svg(&emit("convergence.svg"), &series, Some(run.optimal_reward))?;
            run.checks
        }
        Mode::Empirical => {
            let instance = config.build_instance()?;
            let initial = config.initial_policy_for(&instance)?;
            let settings = DynamicsSettings::from(config);
            let run =
                empirical::run_empirical(&instance, &initial, &settings, config.seed, config.replications)?;
            let k = instance.arm_count();
            write_trajectory_file(&emit("trajectory.csv"), k, &run.replications[0].records)?;
            for rep in &run.replications {
                write_trajectory_file(&emit(&format!("trajectory_rep{:03}.csv", rep.index)), k, &rep.records)?;
            }
            let header: Vec<String> =
                ["t", "j_q25", "j_median", "j_q75", "target_prob_median"].map(String::from).to_vec();
            let rows: Vec<Vec<String>> = run
                .quantiles
                .iter()
                .map(|q| {
                    vec![
                        q.t.to_string(),
                        q.j_q25.to_string(),
                        q.j_median.to_string(),
                        q.j_q75.to_string(),
                        q.target_prob_median.to_string(),
                    ]
                })
                .collect();
            write_table_file(&emit("quantiles.csv"), &header, &rows)?;
            let r_star = instance.summarize()?.optimal_reward();
            let report = EmpiricalReport {
                config,
                master_seed: run.master_seed,
                replication_seeds: run.replications.iter().map(|r| r.seed).collect(),
                target_arm: run.target_arm,
                optimal_reward: r_star,
                final_j_median: run.quantiles.last().map_or(f64::NAN, |q| q.j_median),
                final_target_prob_median: run.final_target_prob_median(),
                all_pass: true,
                checks: &[],
            };
            write_json_file(&emit("report.json"), &report)?;
            let median = Series {
                label: format!("{} (median)", run.method.label()),
                points: run.quantiles.iter().map(|q| (q.t as f64, q.j_median)).collect(),
            };
            write_convergence_svg(&emit("convergence.svg"), &[median], Some(r_star))?;
            Vec::new()
        }
        Mode::Latent => {
            let run = run_latent(config)?;
            let (header, rows) = latent_run::trajectory_rows(&run);
            write_table_file(&emit("latent_trajectory.csv"), &header, &rows)?;
            let report = LatentReport { config, run: &run, all_pass: report::all_pass(&run.checks) };
            write_json_file(&emit("report.json"), &report)?;
            run.checks
        }
        Mode::Verify => {
            let report = verify::verify_lemmas(&config.verify)?;
            let output = VerifyOutput { config, report: &report, all_pass: report.all_pass() };
            write_json_file(&emit("report.json"), &output)?;
            report.checks
        }
        Mode::Bounds => {
            let cert = certificate(config)?;
            write_json_file(&emit("certificate.json"), &cert)?;
            Vec::new()
        }
    };
    Ok(Outcome { mode: config.mode, checks, files })
}

/// The a-priori certificate for the config's instance, start and contrast.
pub fn certificate(config: &RunConfig) -> Result<bounds::Certificate> {
    let instance = config.build_instance()?;
    let initial = config.initial_policy_for(&instance)?;
    bounds::compute_bounds(
        &instance,
        &initial,
        &config.contrast,
        config.eta,
        config.group_size,
        config.eps_target,
    )
}

/// The latent suite for the config's instance and `latent` section.
pub fn run_latent(config: &RunConfig) -> Result<latent_run::LatentRun> {
    let instance = config.build_instance()?;
    latent_run::run_latent(&instance, &config.latent, config.seed)
}
