// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exact (population) dynamics: the soft update driven by population scores.

use serde::Serialize;

use super::config::{Method, RunConfig};
use super::output::TrajectoryRecord;
use super::report::CheckResult;
use crate::advantage::{population_score_grpo, population_score_vspo};
use crate::bandit::BanditInstance;
use crate::error::{Error, Result};
use crate::policy::{soft_update_detailed, Policy, ScoreVector, SUPPORT_FLOOR};
use crate::steering::{bound_grpo, bound_vspo, diagnostics, make_pair, BoundInputs, ContrastSpec, SteeringDiagnostics};

/// Relative tolerance on the per-step ratio recursion.
pub const RECURSION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsSettings {
    pub method: Method,
    pub contrast: ContrastSpec,
    pub eta: f64,
    pub group_size: usize,
    pub eps: f64,
    pub max_iterations: usize,
}

impl From<&RunConfig> for DynamicsSettings {
    fn from(c: &RunConfig) -> Self {
        Self {
            method: c.method,
            contrast: c.contrast.clone(),
            eta: c.eta,
            group_size: c.group_size,
            eps: c.eps_target,
            max_iterations: c.max_iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopReason {
    MaxIterations,
    /// The score denominator vanished at iteration `t`: the policy has
    /// effectively collapsed.
    DegenerateVariance { t: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationRun {
    pub method: Method,
    pub records: Vec<TrajectoryRecord>,
    pub optimal_reward: f64,
    pub eps: f64,
    /// First `t` with `J(pi_t) >= r* - eps`.
    pub hitting_time: Option<usize>,
    pub stop: StopReason,
    /// Largest `|ratio_actual / ratio_predicted - 1|` over all steps and arms.
    pub max_recursion_error: f64,
    /// Smallest certified `gamma_t` before the hitting time (all iterations
    /// if the target is never reached). VSPO only.
    pub min_gamma: Option<f64>,
    /// Whether the alignment condition held at every iteration before the
    /// hitting time. VSPO only.
    pub cond2_before_hit: Option<bool>,
    /// Iteration bound of the method; VSPO uses `min_gamma`.
    pub bound: Option<f64>,
    pub checks: Vec<CheckResult>,
}

pub(crate) fn record(t: usize, j: f64, pi: &Policy, diag: Option<&SteeringDiagnostics>) -> TrajectoryRecord {
    TrajectoryRecord {
        t,
        j,
        probs: pi.probs().to_vec(),
        gamma_t: diag.map(|d| d.gamma_t),
        delta_t: diag.map(|d| d.delta),
        cond2_ok: diag.map(SteeringDiagnostics::cond2_all),
    }
}

/// Largest relative error of `pi'(i)/pi'(i*) = pi(i)/pi(i*) exp(e(i) - e(i*))`
/// over arms that were not floored.
pub(crate) fn recursion_error(before: &Policy, after: &Policy, exponents: &[f64], star: usize) -> f64 {
    let floored = |p: &Policy, i: usize| p[i] <= SUPPORT_FLOOR;
    if floored(after, star) || floored(before, star) {
        return 0.0;
    }
    (0..before.arm_count())
        .filter(|&i| i != star && !floored(after, i) && !floored(before, i))
        .map(|i| {
            let actual = after[i].ln() - after[star].ln();
            let predicted = before[i].ln() - before[star].ln() + exponents[i] - exponents[star];
            (actual - predicted).exp_m1().abs()
        })
        .fold(0.0, f64::max)
}

/// Iterates `pi_{t+1} = soft_update(pi_t, A(pi_t))` with the population
/// score of `settings.method`, re-deriving the steering pair and its
/// certificate at every VSPO step.
pub fn run_population(
    instance: &BanditInstance,
    initial: &Policy,
    settings: &DynamicsSettings,
) -> Result<PopulationRun> {
    let summary = instance.summarize()?;
    let r_star = summary.optimal_reward();
    let star = summary.target_arm;
    let g = settings.group_size;

    let mut pi = initial.clone();
    let mut records = Vec::new();
    let mut hitting_time = None;
    let mut stop = StopReason::MaxIterations;
    let mut max_recursion_error: f64 = 0.0;
    let mut gammas_before_hit = Vec::new();
    let mut cond2_before_hit = true;

    for t in 0..=settings.max_iterations {
        let j = instance.expected_reward(&pi)?;
        if hitting_time.is_none() && j >= r_star - settings.eps {
            hitting_time = Some(t);
        }
        let (score, diag) = match settings.method {
            Method::Grpo => (population_score_grpo(&pi, instance, g), None),
            Method::Vspo => {
                let pair = make_pair(&pi, &settings.contrast, instance)?;
                let diag = diagnostics(&pi, &pair, instance, g)?;
                (population_score_vspo(&pi, &pair, instance, g), Some(diag))
            }
        };
        if let (Some(d), None) = (&diag, hitting_time) {
            gammas_before_hit.push(d.gamma_t);
            cond2_before_hit &= d.cond2_all();
        }
        records.push(record(t, j, &pi, diag.as_ref()));

        let score = match score {
            Ok(s) => s,
            Err(Error::DegenerateVariance(msg)) => {
                log::info!("population run stopped at t = {t}: {msg}");
                stop = StopReason::DegenerateVariance { t };
                break;
            }
            Err(e) => return Err(e),
        };
        if t == settings.max_iterations || settings.eta == 0.0 {
            continue;
        }
        let sv = ScoreVector::new(score, settings.eta, g)?;
        let exponents = sv.exponents(&pi);
        let next = soft_update_detailed(&pi, &sv)?.policy;
        max_recursion_error = max_recursion_error.max(recursion_error(&pi, &next, &exponents, star));
        pi = next;
    }

    let (min_gamma, cond2) = match settings.method {
        Method::Grpo => (None, None),
        Method::Vspo => (
            gammas_before_hit.iter().copied().reduce(f64::min),
            Some(cond2_before_hit),
        ),
    };

    let mut checks = vec![
        CheckResult::within("ratio recursion (relative)", max_recursion_error, 0.0, RECURSION_TOL),
        CheckResult::flag("target reached", hitting_time.is_some()),
    ];
    let mut bound = None;
    if settings.eta > 0.0 {
        let inputs = |gamma| BoundInputs::new(initial, summary.clone(), settings.eta, g, settings.eps, gamma);
        let hit = hitting_time.map_or(f64::INFINITY, |h| h as f64);
        match settings.method {
            Method::Grpo => {
                let b = bound_grpo(&inputs(0.0)?);
                bound = Some(b);
                checks.push(CheckResult::at_most("hitting time <= ceil(T_GRPO)", hit, b.ceil()));
            }
            Method::Vspo => {
                let gamma = min_gamma.unwrap_or(0.0);
                let b = bound_vspo(&inputs(gamma)?);
                bound = Some(b);
                let check = CheckResult::at_most("hitting time <= ceil(T_VSPO(min gamma))", hit, b.ceil());
                checks.push(if cond2_before_hit { check } else { check.not_applicable() });
                checks.push(CheckResult::flag("alignment condition before hit", cond2_before_hit).not_applicable());
            }
        }
    }

    Ok(PopulationRun {
        method: settings.method,
        records,
        optimal_reward: r_star,
        eps: settings.eps,
        hitting_time,
        stop,
        max_recursion_error,
        min_gamma,
        cond2_before_hit: cond2,
        bound,
        checks,
    })
}
