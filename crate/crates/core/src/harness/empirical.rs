// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sampled dynamics: each step draws one rollout group and applies the soft
//! update with its empirical score. Replications run in parallel on
//! independent streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::Method;
use super::output::TrajectoryRecord;
use super::population::{record, DynamicsSettings};
use super::seed::mix;
use crate::advantage::{empirical_score_grpo, empirical_score_vspo, sample_group_grpo, sample_group_vspo};
use crate::bandit::BanditInstance;
use crate::error::Result;
use crate::policy::{soft_update, Policy, ScoreVector};
use crate::steering::{diagnostics, make_pair};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub index: usize,
    /// Stream seed, `mix(master, index)`.
    pub seed: u64,
    pub records: Vec<TrajectoryRecord>,
}

impl Replication {
    pub fn final_policy(&self) -> &[f64] {
        &self.records.last().expect("at least the initial record").probs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileRow {
    pub t: usize,
    pub j_q25: f64,
    pub j_median: f64,
    pub j_q75: f64,
    /// Median over replications of `pi_t(i*)`.
    pub target_prob_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalRun {
    pub method: Method,
    pub master_seed: u64,
    pub target_arm: usize,
    pub replications: Vec<Replication>,
    pub quantiles: Vec<QuantileRow>,
}

impl EmpiricalRun {
    pub fn final_target_prob_median(&self) -> f64 {
        self.quantiles.last().map_or(f64::NAN, |q| q.target_prob_median)
    }
}

/// Linear-interpolation quantile (`(n - 1) p` rank) of an unsorted sample.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn replicate(
    instance: &BanditInstance,
    initial: &Policy,
    settings: &DynamicsSettings,
    index: usize,
    seed: u64,
) -> Result<Replication> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = settings.group_size;
    let mut pi = initial.clone();
    let mut records = Vec::with_capacity(settings.max_iterations + 1);
    for t in 0..=settings.max_iterations {
        let j = instance.expected_reward(&pi)?;
        let pair = match settings.method {
            Method::Grpo => None,
            Method::Vspo => Some(make_pair(&pi, &settings.contrast, instance)?),
        };
        let diag = match &pair {
            Some(p) => Some(diagnostics(&pi, p, instance, g)?),
            None => None,
        };
        records.push(record(t, j, &pi, diag.as_ref()));
        if t == settings.max_iterations || settings.eta == 0.0 {
            continue;
        }
        let score = match &pair {
            None => empirical_score_grpo(&sample_group_grpo(&pi, instance, g, &mut rng)?)?,
            Some(p) => empirical_score_vspo(&sample_group_vspo(p, instance, g, &mut rng)?)?,
        };
        pi = soft_update(&pi, &ScoreVector::new(score, settings.eta, g)?)?;
    }
    Ok(Replication { index, seed, records })
}

/// Runs `replications` independent sampled trajectories.
///
/// Replication `k` draws from a ChaCha8 stream seeded with
/// `mix(master_seed, k)`; results are ordered by `k`, so the output does
/// not depend on thread scheduling.
pub fn run_empirical(
    instance: &BanditInstance,
    initial: &Policy,
    settings: &DynamicsSettings,
    master_seed: u64,
    replications: usize,
) -> Result<EmpiricalRun> {
    let reps: Vec<Replication> = (0..replications)
        .into_par_iter()
        .map(|k| replicate(instance, initial, settings, k, mix(master_seed, k as u64)))
        .collect::<Result<_>>()?;

    let star = instance.target_arm();
    let quantiles = (0..=settings.max_iterations)
        .map(|t| {
            let js: Vec<f64> = reps.iter().map(|r| r.records[t].j).collect();
            let stars: Vec<f64> = reps.iter().map(|r| r.records[t].probs[star]).collect();
            QuantileRow {
                t,
                j_q25: quantile(&js, 0.25),
                j_median: quantile(&js, 0.5),
                j_q75: quantile(&js, 0.75),
                target_prob_median: quantile(&stars, 0.5),
            }
        })
        .collect();

    Ok(EmpiricalRun {
        method: settings.method,
        master_seed,
        target_arm: star,
        replications: reps,
        quantiles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Preset;
    use crate::steering::ContrastSpec;

    fn settings(method: Method, eta: f64, g: usize, iters: usize) -> DynamicsSettings {
        DynamicsSettings {
            method,
            contrast: ContrastSpec::TwoSidedSplit,
            eta,
            group_size: g,
            eps: 0.01,
            max_iterations: iters,
        }
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile(&[3.0, 1.0, 2.0, 4.0], 0.25), 1.75);
        assert_eq!(quantile(&[5.0], 0.75), 5.0);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn zero_step_is_constant() {
        let run = run_empirical(&Preset::E1.instance(), &Preset::E1.initial_policy(), &settings(Method::Grpo, 0.0, 4, 10), 7, 2).unwrap();
        for rep in &run.replications {
            assert!(rep.records.iter().all(|r| r.probs == rep.records[0].probs));
        }
    }

    #[test]
    fn same_master_seed_same_run() {
        let s = settings(Method::Vspo, 0.5, 4, 30);
        let a = run_empirical(&Preset::E3.instance(), &Preset::E3.initial_policy(), &s, 11, 3).unwrap();
        let b = run_empirical(&Preset::E3.instance(), &Preset::E3.initial_policy(), &s, 11, 3).unwrap();
        assert_eq!(a, b);
        let c = run_empirical(&Preset::E3.instance(), &Preset::E3.initial_policy(), &s, 12, 3).unwrap();
        assert_ne!(a.replications[0].records, c.replications[0].records);
        assert_eq!(a.replications[1].seed, mix(11, 1));
    }
}
