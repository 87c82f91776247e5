// SPDX-License-Identifier: MIT OR Apache-2.0

//! Arm distributions and the KL-regularized soft update.
//!
//! Given a per-arm score `A`, the update
//!
//! ```text
//! pi_next = argmax_pi  (1/G) sum_i pi(i)/pi_t(i) A(i)  -  (1/eta) KL(pi || pi_t)
//! ```
//!
//! has the closed form `pi_next(i) ∝ pi_t(i) exp(eta A(i) / (G pi_t(i)))`.
//! [`soft_update`] evaluates it in log space; [`update_objective`] evaluates
//! the objective itself so optimality can be checked independently.

use serde::Serialize;

use crate::error::{Error, Result};

/// Probabilities below this are floored after an update so the support
/// never collapses to an exact zero.
pub const SUPPORT_FLOOR: f64 = 1e-300;

const SIMPLEX_TOL: f64 = 1e-12;

/// A probability distribution over `K` arms.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Policy {
    probs: Vec<f64>,
}

impl Policy {
    /// A policy usable as an initialization: on the simplex with every
    /// entry strictly positive.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let policy = Self::from_simplex(probs)?;
        if let Some(i) = policy.probs.iter().position(|&p| p <= 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "initial policy needs full support; arm {} has probability 0",
                i + 1
            )));
        }
        Ok(policy)
    }

    /// Any point of the simplex, zeros allowed.
    pub fn from_simplex(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty distribution".into()));
        }
        if let Some(i) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "entry {} = {} is not a nonnegative real",
                i + 1,
                probs[i]
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {total}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(arm_count: usize) -> Result<Self> {
        if arm_count == 0 {
            return Err(Error::InvalidDistribution("zero arms".into()));
        }
        Ok(Self {
            probs: vec![1.0 / arm_count as f64; arm_count],
        })
    }

    pub fn point_mass(arm_count: usize, arm: usize) -> Result<Self> {
        if arm >= arm_count {
            return Err(Error::InvalidParameter(format!(
                "arm {arm} out of range for {arm_count} arms"
            )));
        }
        let mut probs = vec![0.0; arm_count];
        probs[arm] = 1.0;
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn arm_count(&self) -> usize {
        self.probs.len()
    }

    pub fn is_full_support(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }
}

impl std::ops::Index<usize> for Policy {
    type Output = f64;

    fn index(&self, arm: usize) -> &f64 {
        &self.probs[arm]
    }
}

/// An arm-level score together with the step size and group size that
/// define how it moves a policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
    pub step_size: f64,
    pub group_size: usize,
}

impl ScoreVector {
    pub fn new(scores: Vec<f64>, step_size: f64, group_size: usize) -> Result<Self> {
        if !(step_size > 0.0) || !step_size.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {step_size}"
            )));
        }
        if group_size < 2 {
            return Err(Error::InvalidParameter(format!(
                "group size must be at least 2, got {group_size}"
            )));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("score of arm {}", i + 1)));
        }
        Ok(Self {
            scores,
            step_size,
            group_size,
        })
    }

    /// Per-arm exponent `eta A(i) / (G pi(i))` of the soft update.
    pub fn exponents(&self, policy: &Policy) -> Vec<f64> {
        let scale = self.step_size / self.group_size as f64;
        self.scores
            .iter()
            .zip(policy.probs())
            .map(|(a, p)| scale * a / p)
            .collect()
    }
}

/// Result of a soft update, including which arms hit the support floor.
#[derive(Debug, Clone)]
pub struct SoftUpdate {
    pub policy: Policy,
    pub floored_arms: Vec<usize>,
}

/// Closed-form maximizer of the KL-regularized objective.
///
/// Fails if the policy lacks full support or the exponent of some arm is
/// `+inf`/NaN. Arms whose new mass underflows are floored at
/// [`SUPPORT_FLOOR`] and a warning is logged.
pub fn soft_update(policy: &Policy, score: &ScoreVector) -> Result<Policy> {
    let out = soft_update_detailed(policy, score)?;
    if !out.floored_arms.is_empty() {
        log::warn!(
            "soft update underflowed on arms {:?}; floored at {SUPPORT_FLOOR:e}",
            out.floored_arms.iter().map(|i| i + 1).collect::<Vec<_>>()
        );
    }
    Ok(out.policy)
}

/// [`soft_update`] without logging; reports floored arms to the caller.
pub fn soft_update_detailed(policy: &Policy, score: &ScoreVector) -> Result<SoftUpdate> {
    if score.scores.len() != policy.arm_count() {
        return Err(Error::DimensionMismatch {
            expected: policy.arm_count(),
            got: score.scores.len(),
        });
    }
    if !policy.is_full_support() {
        return Err(Error::InvalidDistribution(
            "soft update requires a strictly positive policy".into(),
        ));
    }

    let log_weights: Vec<f64> = score
        .exponents(policy)
        .iter()
        .zip(policy.probs())
        .map(|(e, p)| p.ln() + e)
        .collect();
    if let Some(i) = log_weights.iter().position(|w| w.is_nan() || *w == f64::INFINITY) {
        return Err(Error::NonFinite(format!(
            "soft-update exponent of arm {}",
            i + 1
        )));
    }
    let shift = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_weights.iter().map(|w| (w - shift).exp()).collect();
    let total: f64 = weights.iter().sum();

    let mut floored_arms = Vec::new();
    let probs = weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let p = w / total;
            if p < SUPPORT_FLOOR {
                floored_arms.push(i);
                SUPPORT_FLOOR
            } else {
                p
            }
        })
        .collect();
    Ok(SoftUpdate {
        policy: Policy { probs },
        floored_arms,
    })
}

/// `(1/G) sum_i candidate(i)/base(i) A(i) - (1/eta) KL(candidate || base)`,
/// with `0 log 0 = 0`.
pub fn update_objective(candidate: &Policy, base: &Policy, score: &ScoreVector) -> Result<f64> {
    let k = base.arm_count();
    for got in [candidate.arm_count(), score.scores.len()] {
        if got != k {
            return Err(Error::DimensionMismatch { expected: k, got });
        }
    }
    if !base.is_full_support() {
        return Err(Error::InvalidDistribution(
            "objective base policy must be strictly positive".into(),
        ));
    }
    let g = score.group_size as f64;
    let mut linear = 0.0;
    let mut kl = 0.0;
    for i in 0..k {
        let (c, b) = (candidate[i], base[i]);
        linear += c / b * score.scores[i];
        if c > 0.0 {
            kl += c * (c / b).ln();
        }
    }
    Ok(linear / g - kl / score.step_size)
}

/// Per-step log-ratios `log(pi_t(i) / pi_t(i*))` of a policy sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioTrajectory {
    pub target_arm: usize,
    /// Indexed `[t][arm]`; the target arm's entry is always 0.
    pub log_ratios: Vec<Vec<f64>>,
}

impl RatioTrajectory {
    /// `log q_{i,t+1} - log q_{i,t}` for every arm.
    pub fn decrements(&self, t: usize) -> Vec<f64> {
        self.log_ratios[t + 1]
            .iter()
            .zip(&self.log_ratios[t])
            .map(|(next, cur)| next - cur)
            .collect()
    }

    /// `q_{i,t}` itself.
    pub fn ratios(&self, t: usize) -> Vec<f64> {
        self.log_ratios[t].iter().map(|l| l.exp()).collect()
    }

    pub fn len(&self) -> usize {
        self.log_ratios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_ratios.is_empty()
    }
}

pub fn ratio_trajectory(policies: &[Policy], target_arm: usize) -> RatioTrajectory {
    let log_ratios = policies
        .iter()
        .map(|p| {
            let anchor = p[target_arm].ln();
            p.probs().iter().map(|q| q.ln() - anchor).collect()
        })
        .collect();
    RatioTrajectory {
        target_arm,
        log_ratios,
    }
}
