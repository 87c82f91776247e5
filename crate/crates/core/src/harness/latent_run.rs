// SPDX-License-Identifier: MIT OR Apache-2.0

//! Latent-steering runs over several seeds.
//!
//! Seed `k` derives `s_k = mix(master, k)`; the parameters are initialized
//! from the stream `mix(s_k, 0)` and training samples from `mix(s_k, 1)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::LatentConfig;
use super::empirical::quantile;
use super::report::CheckResult;
use super::seed::mix;
use crate::bandit::BanditInstance;
use crate::error::Result;
use crate::latent::{
    behavior_sets, build_vector, mixture_deviation, steering_monotonicity, train, IntensitySchedule, LatentParams,
    LatentPolicy, LatentTrajectory, TrainConfig,
};

/// Largest audit intensity for which second-order scaling is asserted.
pub const AUDIT_MAX_B: f64 = 0.1;
/// Required ratio of mixture deviations at `b` and `b / 2`.
pub const AUDIT_MIN_RATIO: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureAudit {
    pub b: f64,
    pub deviation: f64,
    pub half_deviation: f64,
    /// `deviation / half_deviation`; about 4 for a second-order deviation.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatentSeedResult {
    pub index: usize,
    pub seed: u64,
    pub vector_normalized: bool,
    /// Spearman correlation between the intensities and the steered `E[y]`.
    pub spearman: Option<f64>,
    pub mixture_audit: Vec<MixtureAudit>,
    pub initial_mean_x: f64,
    pub initial_mean_y: f64,
    pub final_mean_x: f64,
    pub final_mean_y: f64,
    pub bonus_vs_mean_behavior: Option<f64>,
    #[serde(skip)]
    pub trajectory: LatentTrajectory,
}

impl LatentSeedResult {
    pub fn behavior_gain(&self) -> f64 {
        self.final_mean_y - self.initial_mean_y
    }

    pub fn primary_change(&self) -> f64 {
        self.final_mean_x - self.initial_mean_x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatentRun {
    pub master_seed: u64,
    pub seeds: Vec<LatentSeedResult>,
    pub median_behavior_gain: f64,
    pub median_primary_change: f64,
    pub median_bonus_vs_mean_behavior: Option<f64>,
    pub min_spearman: Option<f64>,
    pub min_mixture_ratio: Option<f64>,
    pub checks: Vec<CheckResult>,
}

fn run_seed(instance: &BanditInstance, cfg: &LatentConfig, index: usize, seed: u64) -> Result<LatentSeedResult> {
    let mut init_rng = ChaCha8Rng::seed_from_u64(mix(seed, 0));
    let params = LatentParams::with_behavior_axis(instance, cfg.hidden_dim, cfg.axis, cfg.start_bias, &mut init_rng)?;
    let (pos, neg) = behavior_sets(instance);
    let v = build_vector(&params, &pos, &neg, cfg.normalize)?;
    let schedule = IntensitySchedule::new(cfg.intensities.clone(), cfg.behavior_weight)?;
    let spearman = steering_monotonicity(&params, &v, &schedule, instance)?;
    let mixture_audit = cfg
        .audit_intensities
        .iter()
        .map(|&b| {
            let deviation = mixture_deviation(&params, &v, b)?;
            let half_deviation = mixture_deviation(&params, &v, b / 2.0)?;
            Ok(MixtureAudit {
                b,
                deviation,
                half_deviation,
                ratio: deviation / half_deviation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let train_cfg = TrainConfig {
        learning_rate: cfg.learning_rate,
        clip_ratio: cfg.clip_ratio,
        kl_weight: cfg.kl_weight,
        iterations: cfg.iterations,
        seed: mix(seed, 1),
        epochs: cfg.epochs,
    };
    let mut policy = LatentPolicy::new(params);
    let trajectory = train(&mut policy, instance, &v, &schedule, &train_cfg)?;
    Ok(LatentSeedResult {
        index,
        seed,
        vector_normalized: v.normalized,
        spearman,
        mixture_audit,
        initial_mean_x: trajectory.first().mean_x,
        initial_mean_y: trajectory.first().mean_y,
        final_mean_x: trajectory.last().mean_x,
        final_mean_y: trajectory.last().mean_y,
        bonus_vs_mean_behavior: trajectory.bonus_vs_mean_behavior,
        trajectory,
    })
}

fn min_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    values.map(|v| v.unwrap_or(f64::NAN)).reduce(f64::min).filter(|v| !v.is_nan())
}

/// Builds a steering vector and trains once per seed, in parallel.
pub fn run_latent(instance: &BanditInstance, cfg: &LatentConfig, master_seed: u64) -> Result<LatentRun> {
    let seeds: Vec<LatentSeedResult> = (0..cfg.seeds)
        .into_par_iter()
        .map(|k| run_seed(instance, cfg, k, mix(master_seed, k as u64)))
        .collect::<Result<_>>()?;

    let gains: Vec<f64> = seeds.iter().map(LatentSeedResult::behavior_gain).collect();
    let changes: Vec<f64> = seeds.iter().map(LatentSeedResult::primary_change).collect();
    let correlations: Vec<f64> = seeds.iter().filter_map(|s| s.bonus_vs_mean_behavior).collect();
    let min_spearman = min_opt(seeds.iter().map(|s| s.spearman));
    let audited = seeds
        .iter()
        .flat_map(|s| s.mixture_audit.iter())
        .filter(|a| a.b <= AUDIT_MAX_B)
        .map(|a| Some(a.ratio));
    let min_mixture_ratio = min_opt(audited);
    let median_behavior_gain = quantile(&gains, 0.5);
    let median_primary_change = quantile(&changes, 0.5);

    let mut checks = vec![CheckResult::flag(
        "steered E[y] rank-increases with intensity on every seed",
        min_spearman.is_some_and(|s| s > 0.0),
    )];
    if let Some(r) = min_mixture_ratio {
        checks.push(CheckResult::at_least("mixture deviation ratio at b vs b/2 (b <= 0.1)", r, AUDIT_MIN_RATIO));
    }
    if let Some(min_gain) = cfg.min_behavior_gain {
        checks.push(CheckResult::at_least("median gain in unsteered E[y]", median_behavior_gain, min_gain));
    }
    if let Some(max_loss) = cfg.max_primary_loss {
        checks.push(CheckResult::at_most("median loss in unsteered E[x]", -median_primary_change, max_loss));
    }

    Ok(LatentRun {
        master_seed,
        median_behavior_gain,
        median_primary_change,
        median_bonus_vs_mean_behavior: (!correlations.is_empty()).then(|| quantile(&correlations, 0.5)),
        min_spearman,
        min_mixture_ratio,
        seeds,
        checks,
    })
}

/// Rows for `latent_trajectory.csv`: `seed_index,t,mean_x,mean_y,entropy,pi_1..pi_K`.
pub fn trajectory_rows(run: &LatentRun) -> (Vec<String>, Vec<Vec<String>>) {
    let k = run
        .seeds
        .first()
        .map_or(0, |s| s.trajectory.first().probs.len());
    let mut header: Vec<String> = ["seed_index", "t", "mean_x", "mean_y", "entropy"].map(String::from).to_vec();
    header.extend((1..=k).map(|i| format!("pi_{i}")));
    let rows = run
        .seeds
        .iter()
        .flat_map(|s| {
            s.trajectory.records.iter().map(move |r| {
                let mut row = vec![
                    s.index.to_string(),
                    r.iteration.to_string(),
                    r.mean_x.to_string(),
                    r.mean_y.to_string(),
                    r.entropy.to_string(),
                ];
                row.extend(r.probs.iter().map(f64::to_string));
                row
            })
        })
        .collect();
    (header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Preset;

    #[test]
    fn short_run_is_deterministic_and_audited() {
        let cfg = LatentConfig { iterations: 30, seeds: 3, ..LatentConfig::default() };
        let a = run_latent(&Preset::Separable.instance(), &cfg, 4).unwrap();
        let b = run_latent(&Preset::Separable.instance(), &cfg, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.seeds.len(), 3);
        assert!(a.seeds.iter().all(|s| s.mixture_audit.len() == 2 && s.vector_normalized));
        let (header, rows) = trajectory_rows(&a);
        assert_eq!(header.len(), 5 + 4);
        assert_eq!(rows.len(), 3 * 31);
    }
}
