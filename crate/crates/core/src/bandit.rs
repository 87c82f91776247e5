// SPDX-License-Identifier: MIT OR Apache-2.0

//! Deterministic two-objective bandits and their scalarized summary.
//!
//! Each arm `i` carries a primary reward `x(i)` and a behavioral reward
//! `y(i)`. Both optimizers studied here maximize the scalarized reward
//! `r(i) = x(i) + alpha * y(i)`. The *target arm* is the best-`x` arm among
//! those with maximal `y`; [`BanditInstance::new`] only accepts weights
//! `alpha` for which that arm is the unique maximizer of `r`.
//!
//! Arm indices are zero-based throughout the library. The CLI and CSV
//! outputs label arms from 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::Policy;

/// Absolute tolerance for equality comparisons between closed-form reals.
pub const EQ_TOL: f64 = 1e-12;

/// A `K`-armed bandit with deterministic primary and behavioral rewards.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BanditInstance {
    primary: Vec<f64>,
    behavior: Vec<f64>,
    alpha: f64,
}

impl BanditInstance {
    /// Validates and builds an instance.
    ///
    /// Rejects fewer than two arms, length mismatches, non-finite rewards,
    /// negative `alpha`, `alpha <= alpha_threshold`, and ties in `x` among
    /// the max-`y` arms (the target arm would not be unique).
    pub fn new(primary: Vec<f64>, behavior: Vec<f64>, alpha: f64) -> Result<Self> {
        if primary.len() < 2 {
            return Err(Error::InvalidInstance(format!(
                "need at least 2 arms, got {}",
                primary.len()
            )));
        }
        if behavior.len() != primary.len() {
            return Err(Error::InvalidInstance(format!(
                "primary has {} entries but behavior has {}",
                primary.len(),
                behavior.len()
            )));
        }
        if let Some(i) = primary
            .iter()
            .chain(behavior.iter())
            .position(|v| !v.is_finite())
        {
            return Err(Error::InvalidInstance(format!(
                "reward entry {i} is not finite"
            )));
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidInstance(format!(
                "alpha must be finite and nonnegative, got {alpha}"
            )));
        }

        let star = target_arm(&primary, &behavior);
        let y_max = behavior[star];
        if let Some(j) = (0..primary.len()).find(|&j| {
            j != star
                && (behavior[j] - y_max).abs() <= EQ_TOL
                && (primary[j] - primary[star]).abs() <= EQ_TOL
        }) {
            return Err(Error::InvalidInstance(format!(
                "arms {} and {} tie on both rewards among the max-y arms; target arm is not unique",
                star + 1,
                j + 1
            )));
        }

        let threshold = alpha_threshold(&primary, &behavior);
        if alpha <= threshold {
            return Err(Error::InvalidInstance(format!(
                "alpha = {alpha} must strictly exceed the threshold {threshold}"
            )));
        }

        let r = scalarize(&primary, &behavior, alpha);
        if let Some(i) = (0..r.len()).find(|&i| i != star && r[i] >= r[star]) {
            return Err(Error::InvalidInstance(format!(
                "arm {} is not strictly worse than the target arm {} after scalarization",
                i + 1,
                star + 1
            )));
        }

        Ok(Self {
            primary,
            behavior,
            alpha,
        })
    }

    pub fn arm_count(&self) -> usize {
        self.primary.len()
    }

    /// Primary rewards `x`.
    pub fn primary(&self) -> &[f64] {
        &self.primary
    }

    /// Behavioral rewards `y`.
    pub fn behavior(&self) -> &[f64] {
        &self.behavior
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scalarize(&self) -> Vec<f64> {
        scalarize(&self.primary, &self.behavior, self.alpha)
    }

    pub fn target_arm(&self) -> usize {
        target_arm(&self.primary, &self.behavior)
    }

    pub fn alpha_threshold(&self) -> f64 {
        alpha_threshold(&self.primary, &self.behavior)
    }

    /// Gaps, extremes and the conditioning constant for this instance.
    pub fn summarize(&self) -> Result<ScalarizedSummary> {
        summarize_rewards(&self.primary, &self.behavior, self.alpha)
    }

    /// `J(pi) = sum_i pi(i) r(i)`.
    pub fn expected_reward(&self, policy: &Policy) -> Result<f64> {
        if policy.arm_count() != self.arm_count() {
            return Err(Error::DimensionMismatch {
                expected: self.arm_count(),
                got: policy.arm_count(),
            });
        }
        Ok(self
            .scalarize()
            .iter()
            .zip(policy.probs())
            .map(|(r, p)| r * p)
            .sum())
    }

    /// Expected primary reward under `probs`.
    pub fn mean_primary(&self, probs: &[f64]) -> f64 {
        dot(probs, &self.primary)
    }

    /// Expected behavioral reward under `probs`.
    pub fn mean_behavior(&self, probs: &[f64]) -> f64 {
        dot(probs, &self.behavior)
    }

    /// Arms whose behavioral reward attains the maximum.
    pub fn max_behavior_arms(&self) -> Vec<usize> {
        let y_max = max(&self.behavior);
        (0..self.arm_count())
            .filter(|&i| (self.behavior[i] - y_max).abs() <= EQ_TOL)
            .collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Elementwise `x(i) + alpha * y(i)`, without any validity check.
pub fn scalarize(primary: &[f64], behavior: &[f64], alpha: f64) -> Vec<f64> {
    primary
        .iter()
        .zip(behavior)
        .map(|(x, y)| x + alpha * y)
        .collect()
}

/// Among arms attaining `max y`, the one with the largest `x`; ties on `x`
/// go to the lowest index.
///
/// # Panics
///
/// Panics on empty input.
pub fn target_arm(primary: &[f64], behavior: &[f64]) -> usize {
    assert!(!behavior.is_empty(), "target_arm of an empty bandit");
    let y_max = max(behavior);
    let mut best: Option<usize> = None;
    for i in 0..behavior.len() {
        if (behavior[i] - y_max).abs() > EQ_TOL {
            continue;
        }
        match best {
            Some(b) if primary[i] <= primary[b] => {}
            _ => best = Some(i),
        }
    }
    best.expect("max-y set is nonempty")
}

/// Smallest admissible weight: `max_{i : y(i) < y(i*)} max(x(i) - x(i*), 0) / (y(i*) - y(i))`,
/// or 0 when no arm has a lower behavioral reward.
pub fn alpha_threshold(primary: &[f64], behavior: &[f64]) -> f64 {
    let star = target_arm(primary, behavior);
    (0..primary.len())
        .filter(|&i| behavior[i] < behavior[star] - EQ_TOL)
        .map(|i| (primary[i] - primary[star]).max(0.0) / (behavior[star] - behavior[i]))
        .fold(0.0, f64::max)
}

/// Scalar rewards and the gap structure of a bandit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarizedSummary {
    /// `r(i)` for every arm.
    pub scalar_rewards: Vec<f64>,
    pub target_arm: usize,
    /// `Delta_i = r(i*) - r(i)` for the suboptimal arms, in arm order.
    pub gaps: Vec<f64>,
    pub gap_min: f64,
    pub gap_max: f64,
    /// `D_x = max x - min x`.
    pub range_x: f64,
    /// `D_y = max y - min y`.
    pub range_y: f64,
    /// `lambda = (D_x + alpha D_y) / Delta_max`.
    pub conditioning: f64,
    pub alpha: f64,
}

impl ScalarizedSummary {
    /// `r(i*)`.
    pub fn optimal_reward(&self) -> f64 {
        self.scalar_rewards[self.target_arm]
    }

    /// `r(i*) - r(arm)`; zero for the target arm itself.
    pub fn gap(&self, arm: usize) -> f64 {
        self.optimal_reward() - self.scalar_rewards[arm]
    }

    /// Indices of the suboptimal arms, in order.
    pub fn suboptimal_arms(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.scalar_rewards.len()).filter(move |&i| i != self.target_arm)
    }
}

/// Summarizes raw rewards. Fails when every arm shares the optimal scalar
/// reward (`Delta_max <= 1e-12`).
pub fn summarize_rewards(primary: &[f64], behavior: &[f64], alpha: f64) -> Result<ScalarizedSummary> {
    if primary.len() != behavior.len() {
        return Err(Error::DimensionMismatch {
            expected: primary.len(),
            got: behavior.len(),
        });
    }
    let scalar_rewards = scalarize(primary, behavior, alpha);
    let target = target_arm(primary, behavior);
    let r_star = scalar_rewards[target];
    let gaps: Vec<f64> = (0..scalar_rewards.len())
        .filter(|&i| i != target)
        .map(|i| r_star - scalar_rewards[i])
        .collect();
    let gap_min = min(&gaps);
    let gap_max = max(&gaps);
    if !(gap_max > EQ_TOL) {
        return Err(Error::DegenerateInstance);
    }
    let range_x = max(primary) - min(primary);
    let range_y = max(behavior) - min(behavior);
    Ok(ScalarizedSummary {
        conditioning: (range_x + alpha * range_y) / gap_max,
        scalar_rewards,
        target_arm: target,
        gaps,
        gap_min,
        gap_max,
        range_x,
        range_y,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1() -> BanditInstance {
        BanditInstance::new(vec![1.0, 0.8, 0.2], vec![0.0, 1.0, 1.0], 1.0).unwrap()
    }

    fn e3() -> BanditInstance {
        BanditInstance::new(vec![0.6, 0.4, 0.5], vec![0.0, 0.0, 1.0], 1.0).unwrap()
    }

    fn close(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (u, v) in a.iter().zip(b) {
            assert!((u - v).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn scalarize_examples() {
        let x = [1.0, 0.8, 0.2];
        let y = [0.0, 1.0, 1.0];
        close(&scalarize(&x, &y, 0.0), &[1.0, 0.8, 0.2]);
        close(&e1().scalarize(), &[1.0, 1.8, 1.2]);
        close(&e3().scalarize(), &[0.6, 0.4, 1.5]);
    }

    #[test]
    fn target_arm_examples() {
        assert_eq!(e1().target_arm(), 1);
        assert_eq!(e3().target_arm(), 2);
        assert_eq!(target_arm(&[1.0, 1.0], &[1.0, 1.0]), 0);
    }

    #[test]
    fn alpha_threshold_examples() {
        assert!((alpha_threshold(&[1.0, 0.8, 0.2], &[0.0, 1.0, 1.0]) - 0.2).abs() < 1e-12);
        assert!((alpha_threshold(&[0.6, 0.4, 0.5], &[0.0, 0.0, 1.0]) - 0.1).abs() < 1e-12);
        assert_eq!(alpha_threshold(&[3.0, -1.0, 7.0], &[0.5, 0.5, 0.5]), 0.0);
    }

    #[test]
    fn summarize_examples() {
        let s = e1().summarize().unwrap();
        assert!((s.gap_min - 0.6).abs() < 1e-12);
        assert!((s.gap_max - 0.8).abs() < 1e-12);
        assert!((s.range_x - 0.8).abs() < 1e-12);
        assert!((s.range_y - 1.0).abs() < 1e-12);
        assert!((s.conditioning - 2.25).abs() < 1e-12);
        assert_eq!(s.gaps.len(), 2);

        let s = e3().summarize().unwrap();
        assert!((s.gap_min - 0.9).abs() < 1e-12);
        assert!((s.gap_max - 1.1).abs() < 1e-12);
        assert!((s.conditioning - 1.2 / 1.1).abs() < 1e-12);

        let s = BanditInstance::new(vec![1.0, 0.0], vec![0.0, 0.0], 1.0)
            .unwrap()
            .summarize()
            .unwrap();
        assert_eq!((s.gap_max, s.range_x, s.range_y, s.conditioning), (1.0, 1.0, 0.0, 1.0));
    }

    #[test]
    fn summarize_degenerate() {
        assert!(matches!(
            summarize_rewards(&[1.0, 1.0], &[1.0, 1.0], 1.0),
            Err(Error::DegenerateInstance)
        ));
    }

    #[test]
    fn expected_reward_examples() {
        let inst = e1();
        let point = Policy::point_mass(3, 1).unwrap();
        assert!((inst.expected_reward(&point).unwrap() - 1.8).abs() < 1e-12);
        let uniform = Policy::uniform(3).unwrap();
        assert!((inst.expected_reward(&uniform).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        let p = Policy::new(vec![0.3, 0.2, 0.5]).unwrap();
        assert!((e3().expected_reward(&p).unwrap() - 1.01).abs() < 1e-12);
        assert!(matches!(
            inst.expected_reward(&Policy::uniform(2).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn construction_rejects() {
        // alpha at the threshold
        assert!(BanditInstance::new(vec![1.0, 0.8, 0.2], vec![0.0, 1.0, 1.0], 0.2).is_err());
        // below the threshold
        assert!(BanditInstance::new(vec![1.0, 0.8, 0.2], vec![0.0, 1.0, 1.0], 0.1).is_err());
        // alpha = 0 never exceeds a nonnegative threshold
        assert!(BanditInstance::new(vec![1.0, 0.0], vec![0.0, 0.0], 0.0).is_err());
        assert!(BanditInstance::new(vec![1.0], vec![0.0], 1.0).is_err());
        assert!(BanditInstance::new(vec![1.0, 2.0], vec![0.0], 1.0).is_err());
        assert!(BanditInstance::new(vec![1.0, f64::NAN], vec![0.0, 1.0], 1.0).is_err());
        assert!(BanditInstance::new(vec![1.0, 1.0], vec![1.0, 1.0], 1.0).is_err());
        assert!(BanditInstance::new(vec![1.0, 0.0], vec![0.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn max_behavior_arms_of_e1() {
        assert_eq!(e1().max_behavior_arms(), vec![1, 2]);
    }
}
