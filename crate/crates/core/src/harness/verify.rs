// SPDX-License-Identifier: MIT OR Apache-2.0

//! Verification campaign for the population lemmas and exact identities.
//!
//! The Monte Carlo part samples `groups` rollout groups per (preset, G,
//! method, seed) and compares the sample means of the per-arm numerator and
//! of `sigma_hat^2` with their closed forms by z-score. Within one seed the
//! configurations are enumerated preset-major, then by `G`, then GRPO before
//! VSPO; configuration `n` draws from the stream `mix(seed, n)`.
//!
//! The exact part draws random instances, policies and contrasts and
//! records, per identity, the largest violation seen. The within-variance
//! violation is divided by `max(1, v^2)` and empirical score sums by
//! `max(1, max |r| / sigma_hat)`, the magnitudes those identities cancel.

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{Method, Preset, VerifyConfig};
use super::population::recursion_error;
use super::report::CheckResult;
use super::seed::mix;
use crate::advantage::{
    empirical_score_grpo, empirical_score_vspo, estimate_grpo_moments, estimate_vspo_moments, grpo_moments,
    population_numerator_grpo, population_numerator_vspo, population_score_grpo, population_score_vspo,
    sample_group_grpo, sample_group_vspo, vspo_moments, GroupStats, MomentEstimate,
};
use crate::bandit::BanditInstance;
use crate::error::{Error, Result};
use crate::policy::{soft_update_detailed, Policy, ScoreVector};
use crate::steering::{diagnostics, make_pair, ContrastSpec};

/// Below this many groups per configuration the report warns of low power.
pub const MIN_GROUPS: usize = 10_000;
/// Tolerance of every exact identity.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Stream index of the exact-identity generator under the first seed.
const IDENTITY_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub groups: usize,
    pub seeds: Vec<u64>,
    pub identity_configs: usize,
    pub low_power: bool,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        super::report::all_pass(&self.checks)
    }
}

#[derive(Debug, Clone, Copy)]
struct Job {
    preset: Preset,
    group_size: usize,
    method: Method,
    seed: u64,
    stream: u64,
}

fn jobs(cfg: &VerifyConfig) -> Vec<Job> {
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        let mut n = 0;
        for &preset in &cfg.presets {
            for &group_size in &cfg.group_sizes {
                for method in [Method::Grpo, Method::Vspo] {
                    out.push(Job {
                        preset,
                        group_size,
                        method,
                        seed,
                        stream: mix(seed, n),
                    });
                    n += 1;
                }
            }
        }
    }
    out
}

fn compare(label: &str, est: &MomentEstimate, numerators: &[f64], sample_var: f64) -> Vec<CheckResult> {
    let mut checks: Vec<CheckResult> = est
        .numerators
        .iter()
        .zip(numerators)
        .enumerate()
        .map(|(i, (m, target))| {
            CheckResult::z_test(format!("{label} numerator arm {}", i + 1), m.mean(), *target, m.std_error())
        })
        .collect();
    checks.push(CheckResult::z_test(
        format!("{label} E[sigma_hat^2]"),
        est.sample_var.mean(),
        sample_var,
        est.sample_var.std_error(),
    ));
    checks
}

fn run_job(job: Job, groups: usize) -> Result<Vec<CheckResult>> {
    let instance = job.preset.instance();
    let pi = job.preset.initial_policy();
    let g = job.group_size;
    let mut rng = ChaCha8Rng::seed_from_u64(job.stream);
    let label = format!("{} G={} {} seed={}", job.preset.name(), g, job.method.label(), job.seed);
    match job.method {
        Method::Grpo => {
            let est = estimate_grpo_moments(&pi, &instance, g, groups, &mut rng)?;
            let target = population_numerator_grpo(&pi, &instance, g)?;
            Ok(compare(&label, &est, &target, grpo_moments(&pi, &instance)?.variance()))
        }
        Method::Vspo => {
            let pair = make_pair(&pi, &ContrastSpec::TwoSidedSplit, &instance)?;
            let est = estimate_vspo_moments(&pair, &instance, g, groups, &mut rng)?;
            let target = population_numerator_vspo(&pi, &pair, &instance, g)?;
            let var = vspo_moments(&pair, &instance)?.expected_sample_var(g);
            Ok(compare(&label, &est, &target, var))
        }
    }
}

/// A random bandit with a valid weight, a random full-support policy, a
/// random contrast rule and an even group size.
pub fn random_configuration<R: Rng + ?Sized>(rng: &mut R) -> (BanditInstance, Policy, ContrastSpec, usize) {
    let unit = Uniform::new(0.0f64, 1.0).expect("valid range");
    loop {
        let k = rng.random_range(2..=6);
        let x: Vec<f64> = (0..k).map(|_| unit.sample(rng)).collect();
        let y: Vec<f64> = if rng.random_bool(0.5) {
            (0..k).map(|_| unit.sample(rng)).collect()
        } else {
            (0..k).map(|_| f64::from(rng.random_range(0..3u8)) / 2.0).collect()
        };
        let threshold = crate::bandit::alpha_threshold(&x, &y);
        let alpha = threshold + 0.05 + 2.0 * unit.sample(rng);
        let Ok(instance) = BanditInstance::new(x, y, alpha) else {
            continue;
        };
        if instance.summarize().is_err() {
            continue;
        }
        let weights: Vec<f64> = (0..k).map(|_| -(1.0 - unit.sample(rng)).ln() + 1e-3).collect();
        let total: f64 = weights.iter().sum();
        let Ok(policy) = Policy::new(weights.iter().map(|w| w / total).collect()) else {
            continue;
        };
        let strength = unit.sample(rng);
        let contrast = match rng.random_range(0..4) {
            0 => ContrastSpec::YTilt { strength },
            1 => ContrastSpec::RTilt { strength },
            2 => ContrastSpec::TwoSidedSplit,
            _ => {
                let raw: Vec<f64> = (0..k).map(|_| 2.0 * unit.sample(rng) - 1.0).collect();
                let centre: f64 = raw.iter().zip(policy.probs()).map(|(c, p)| c * p).sum();
                let centred: Vec<f64> = raw.iter().map(|c| c - centre).collect();
                let scale = centred.iter().fold(0.0f64, |m, c| m.max(c.abs()));
                let contrast = if scale > 0.0 {
                    centred.iter().map(|c| strength * c / scale).collect()
                } else {
                    vec![0.0; k]
                };
                ContrastSpec::Custom { contrast }
            }
        };
        let group_size = 2 * rng.random_range(1..=4);
        return (instance, policy, contrast, group_size);
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Violations {
    mixture: f64,
    within_variance: f64,
    score_sum: f64,
    rho_range: f64,
    gamma_cap: f64,
    popoviciu: f64,
    ratio_recursion: f64,
}

fn sum_abs(v: &[f64]) -> f64 {
    v.iter().sum::<f64>().abs()
}

fn ok_or_degenerate(r: Result<Vec<f64>>) -> Result<Option<Vec<f64>>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::DegenerateVariance(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `max(1, max |r| / sigma_hat)`: the size of the terms an empirical score
/// sum cancels, in units of the score.
fn reward_scale(rewards: &[f64]) -> Result<f64> {
    let std = GroupStats::from_rewards(rewards)?.sample_std;
    let top = rewards.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(if std > 0.0 { (top / std).max(1.0) } else { 1.0 })
}

fn identity_violations<R: Rng + ?Sized>(rng: &mut R) -> Result<Violations> {
    let (instance, pi, contrast, g) = random_configuration(rng);
    let pair = make_pair(&pi, &contrast, &instance)?;
    let diag = diagnostics(&pi, &pair, &instance, g)?;
    let summary = instance.summarize()?;
    let m = vspo_moments(&pair, &instance)?;
    let mut v = Violations {
        mixture: pair.mixture_error(&pi),
        within_variance: (0.5 * (m.sigma_plus_sq + m.sigma_minus_sq) - (m.pooled_var - m.delta * m.delta / 4.0)).abs()
            / m.pooled_var.max(1.0),
        rho_range: diag.rho.iter().map(|r| (r.abs() - 1.0).max(0.0)).fold(0.0, f64::max),
        gamma_cap: (diag.gamma_t - diag.gamma_cap).max(0.0),
        ..Violations::default()
    };

    let gm = grpo_moments(&pi, &instance)?;
    let r = &summary.scalar_rewards;
    let spread = r.iter().copied().fold(f64::NEG_INFINITY, f64::max) - r.iter().copied().fold(f64::INFINITY, f64::min);
    v.popoviciu = (gm.variance() - spread * spread / 4.0).max(0.0);

    let mut sums = vec![
        sum_abs(&population_numerator_grpo(&pi, &instance, g)?),
        sum_abs(&population_numerator_vspo(&pi, &pair, &instance, g)?),
    ];
    let grpo = sample_group_grpo(&pi, &instance, g, rng)?;
    sums.push(sum_abs(&empirical_score_grpo(&grpo)?) / reward_scale(&grpo.rewards())?);
    let vspo = sample_group_vspo(&pair, &instance, g, rng)?;
    sums.push(sum_abs(&empirical_score_vspo(&vspo)?) / reward_scale(&vspo.rewards())?);
    if let Some(s) = ok_or_degenerate(population_score_vspo(&pi, &pair, &instance, g))? {
        sums.push(sum_abs(&s));
    }
    if let Some(a) = ok_or_degenerate(population_score_grpo(&pi, &instance, g))? {
        sums.push(sum_abs(&a));
        let eta = 0.1 + rng.random::<f64>();
        let sv = ScoreVector::new(a, eta, g)?;
        let next = soft_update_detailed(&pi, &sv)?.policy;
        v.ratio_recursion = recursion_error(&pi, &next, &sv.exponents(&pi), summary.target_arm);
    }
    v.score_sum = sums.into_iter().fold(0.0, f64::max);
    Ok(v)
}

/// Worst violation of each exact identity over `cfg.identity_configs` random
/// configurations drawn from the stream `mix(seeds[0], u64::MAX)`.
pub fn identity_checks(cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let master = cfg.seeds[0];
    let mut rng = ChaCha8Rng::seed_from_u64(mix(master, IDENTITY_STREAM));
    let mut worst = Violations::default();
    for _ in 0..cfg.identity_configs {
        let v = identity_violations(&mut rng)?;
        worst.mixture = worst.mixture.max(v.mixture);
        worst.within_variance = worst.within_variance.max(v.within_variance);
        worst.score_sum = worst.score_sum.max(v.score_sum);
        worst.rho_range = worst.rho_range.max(v.rho_range);
        worst.gamma_cap = worst.gamma_cap.max(v.gamma_cap);
        worst.popoviciu = worst.popoviciu.max(v.popoviciu);
        worst.ratio_recursion = worst.ratio_recursion.max(v.ratio_recursion);
    }
    let n = cfg.identity_configs;
    let check = |name: &str, value: f64| CheckResult::within(format!("{name} ({n} configs)"), value, 0.0, IDENTITY_TOL);
    Ok(vec![
        check("mixture reconstruction", worst.mixture),
        check("within-variance identity", worst.within_variance),
        check("score sums to zero", worst.score_sum),
        check("rho within [-1, 1]", worst.rho_range),
        check("gamma_t <= lambda Delta_max / G", worst.gamma_cap),
        check("Popoviciu variance bound", worst.popoviciu),
        check("soft-update ratio recursion", worst.ratio_recursion),
    ])
}

/// Runs the Monte Carlo checks and the exact identities.
pub fn verify_lemmas(cfg: &VerifyConfig) -> Result<VerifyReport> {
    if cfg.seeds.is_empty() {
        return Err(Error::Config("verify needs at least one seed".into()));
    }
    let low_power = cfg.groups < MIN_GROUPS;
    if low_power {
        log::warn!(
            "verify: {} groups per configuration is below {MIN_GROUPS}; z-scores have low power",
            cfg.groups
        );
    }
    let mc: Vec<Vec<CheckResult>> = jobs(cfg)
        .into_par_iter()
        .map(|job| run_job(job, cfg.groups))
        .collect::<Result<_>>()?;
    let mut checks: Vec<CheckResult> = mc.into_iter().flatten().collect();
    checks.extend(identity_checks(cfg)?);
    Ok(VerifyReport {
        groups: cfg.groups,
        seeds: cfg.seeds.clone(),
        identity_configs: cfg.identity_configs,
        low_power,
        checks,
    })
}
