// SPDX-License-Identifier: MIT OR Apache-2.0

//! Arm-level advantage scores, sampled and exact.
//!
//! A rollout group is scored per arm by summing the standardized rewards of
//! the samples that landed on it:
//!
//! ```text
//! A_hat(i) = sum_{g : a_g = i} (r_g - r_bar) / sigma_hat
//! ```
//!
//! with `sigma_hat` the Bessel-corrected sample standard deviation. For
//! GRPO every sample is drawn from the policy and rewarded with the
//! scalarized reward; for VSPO half the group comes from each side of a
//! steering pair and the behavioral part of the reward is replaced by the
//! side's mean `mu_y^+-`.
//!
//! The population scores replace the numerator and `sigma_hat^2` by their
//! exact expectations. Those expectations are checked against sampling by
//! [`estimate_grpo_moments`] and [`estimate_vspo_moments`].

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use crate::bandit::{dot, BanditInstance};
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::steering::SteeringPair;

/// Groups whose sample standard deviation is below this carry no relative
/// signal; all their scores are 0.
pub const STD_FLOOR: f64 = 1e-12;

/// Where a sample in a rollout group came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceTag {
    /// Drawn from the policy itself.
    Plain,
    /// Drawn from the positively steered distribution.
    Plus,
    /// Drawn from the negatively steered distribution.
    Minus,
    /// Drawn from a latent policy steered with this intensity.
    Intensity(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub arm: usize,
    pub tag: SourceTag,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RolloutGroup {
    pub arm_count: usize,
    pub samples: Vec<Sample>,
}

impl RolloutGroup {
    pub fn group_size(&self) -> usize {
        self.samples.len()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.reward).collect()
    }

    pub fn arms(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.arm).collect()
    }

    /// Number of samples per arm carrying a tag accepted by `filter`.
    pub fn counts(&self, filter: impl Fn(SourceTag) -> bool) -> Vec<usize> {
        let mut counts = vec![0; self.arm_count];
        for s in self.samples.iter().filter(|s| filter(s.tag)) {
            counts[s.arm] += 1;
        }
        counts
    }

    pub fn stats(&self) -> Result<GroupStats> {
        GroupStats::from_rewards(&self.rewards())
    }
}

/// Mean and Bessel-corrected standard deviation of a group's rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupStats {
    pub mean: f64,
    pub sample_std: f64,
}

impl GroupStats {
    pub fn from_rewards(rewards: &[f64]) -> Result<Self> {
        if rewards.len() < 2 {
            return Err(Error::InvalidGroup(format!(
                "need at least 2 rewards, got {}",
                rewards.len()
            )));
        }
        let n = rewards.len() as f64;
        let mean = rewards.iter().sum::<f64>() / n;
        let ss: f64 = rewards.iter().map(|r| (r - mean).powi(2)).sum();
        Ok(Self {
            mean,
            sample_std: (ss / (n - 1.0)).sqrt(),
        })
    }

    pub fn sample_var(&self) -> f64 {
        self.sample_std * self.sample_std
    }
}

fn sampler(probs: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(probs).map_err(|e| Error::InvalidDistribution(e.to_string()))
}

/// `G` i.i.d. arms from `policy`, each rewarded with its scalarized reward.
pub fn sample_group_grpo<R: Rng + ?Sized>(
    policy: &Policy,
    instance: &BanditInstance,
    group_size: usize,
    rng: &mut R,
) -> Result<RolloutGroup> {
    if group_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "group size must be at least 2, got {group_size}"
        )));
    }
    if policy.arm_count() != instance.arm_count() {
        return Err(Error::DimensionMismatch {
            expected: instance.arm_count(),
            got: policy.arm_count(),
        });
    }
    let r = instance.scalarize();
    let dist = sampler(policy.probs())?;
    let samples = (0..group_size)
        .map(|_| {
            let arm = dist.sample(rng);
            Sample {
                arm,
                tag: SourceTag::Plain,
                reward: r[arm],
            }
        })
        .collect();
    Ok(RolloutGroup {
        arm_count: instance.arm_count(),
        samples,
    })
}

/// `G/2` arms from each side of `pair`. A plus-side sample on arm `i` earns
/// `x(i) + alpha mu_y^+`, a minus-side sample `x(i) + alpha mu_y^-`.
pub fn sample_group_vspo<R: Rng + ?Sized>(
    pair: &SteeringPair,
    instance: &BanditInstance,
    group_size: usize,
    rng: &mut R,
) -> Result<RolloutGroup> {
    if group_size < 2 || group_size % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "VSPO group size must be even and at least 2, got {group_size}"
        )));
    }
    if pair.arm_count() != instance.arm_count() {
        return Err(Error::DimensionMismatch {
            expected: instance.arm_count(),
            got: pair.arm_count(),
        });
    }
    let x = instance.primary();
    let alpha = instance.alpha();
    let half = group_size / 2;
    let mut samples = Vec::with_capacity(group_size);
    for (side, tag) in [(&pair.plus, SourceTag::Plus), (&pair.minus, SourceTag::Minus)] {
        let bonus = alpha * instance.mean_behavior(side.probs());
        let dist = sampler(side.probs())?;
        samples.extend((0..half).map(|_| {
            let arm = dist.sample(rng);
            Sample {
                arm,
                tag,
                reward: x[arm] + bonus,
            }
        }));
    }
    Ok(RolloutGroup {
        arm_count: instance.arm_count(),
        samples,
    })
}

/// Per-arm `sum_{g : a_g = i} (r_g - r_bar)`, the unnormalized score.
pub fn score_numerators(group: &RolloutGroup) -> Result<Vec<f64>> {
    let stats = group.stats()?;
    let mut out = vec![0.0; group.arm_count];
    for s in &group.samples {
        out[s.arm] += s.reward - stats.mean;
    }
    Ok(out)
}

fn standardized_scores(group: &RolloutGroup) -> Result<Vec<f64>> {
    let stats = group.stats()?;
    if stats.sample_std < STD_FLOOR {
        return Ok(vec![0.0; group.arm_count]);
    }
    Ok(score_numerators(group)?
        .into_iter()
        .map(|n| n / stats.sample_std)
        .collect())
}

/// `A_hat(i) = N(i) (r(i) - r_bar) / sigma_hat` for an all-plain group.
pub fn empirical_score_grpo(group: &RolloutGroup) -> Result<Vec<f64>> {
    if let Some(s) = group.samples.iter().find(|s| s.tag != SourceTag::Plain) {
        return Err(Error::InvalidGroup(format!(
            "GRPO groups hold only plain samples, found {:?}",
            s.tag
        )));
    }
    standardized_scores(group)
}

/// `A_hat(i) = [N+(i)(r+(i) - r_bar) + N-(i)(r-(i) - r_bar)] / sigma_hat` for a
/// group split evenly between the two steered sides.
pub fn empirical_score_vspo(group: &RolloutGroup) -> Result<Vec<f64>> {
    let plus = group.samples.iter().filter(|s| s.tag == SourceTag::Plus).count();
    let minus = group.samples.iter().filter(|s| s.tag == SourceTag::Minus).count();
    if plus != minus || plus + minus != group.group_size() {
        return Err(Error::InvalidGroup(format!(
            "VSPO groups need equal plus/minus halves, got {plus} plus, {minus} minus, {} total",
            group.group_size()
        )));
    }
    standardized_scores(group)
}

/// Exact mean and standard deviation of the scalarized reward under a policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrpoMoments {
    pub mu_r: f64,
    pub sigma_r: f64,
}

impl GrpoMoments {
    pub fn variance(&self) -> f64 {
        self.sigma_r * self.sigma_r
    }
}

pub fn grpo_moments(policy: &Policy, instance: &BanditInstance) -> Result<GrpoMoments> {
    if policy.arm_count() != instance.arm_count() {
        return Err(Error::DimensionMismatch {
            expected: instance.arm_count(),
            got: policy.arm_count(),
        });
    }
    let r = instance.scalarize();
    let mu_r = dot(policy.probs(), &r);
    let var: f64 = policy
        .probs()
        .iter()
        .zip(&r)
        .map(|(p, ri)| p * (ri - mu_r).powi(2))
        .sum();
    Ok(GrpoMoments {
        mu_r,
        sigma_r: var.sqrt(),
    })
}

/// `(G - 1) pi(i) (r(i) - mu_r)`, the expected GRPO numerator.
pub fn population_numerator_grpo(
    policy: &Policy,
    instance: &BanditInstance,
    group_size: usize,
) -> Result<Vec<f64>> {
    let m = grpo_moments(policy, instance)?;
    let g1 = group_size as f64 - 1.0;
    Ok(policy
        .probs()
        .iter()
        .zip(instance.scalarize())
        .map(|(p, r)| g1 * p * (r - m.mu_r))
        .collect())
}

/// `A(i) = (G - 1) pi(i) (r(i) - mu_r) / sigma_r`.
pub fn population_score_grpo(
    policy: &Policy,
    instance: &BanditInstance,
    group_size: usize,
) -> Result<Vec<f64>> {
    let m = grpo_moments(policy, instance)?;
    if m.sigma_r < STD_FLOOR {
        return Err(Error::DegenerateVariance(format!(
            "reward standard deviation under the policy is {:e}",
            m.sigma_r
        )));
    }
    Ok(population_numerator_grpo(policy, instance, group_size)?
        .into_iter()
        .map(|n| n / m.sigma_r)
        .collect())
}

/// Exact moments of the shaped rewards of a steering pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VspoMoments {
    pub mu_x_plus: f64,
    pub mu_x_minus: f64,
    pub mu_y_plus: f64,
    pub mu_y_minus: f64,
    pub mu_x: f64,
    pub mu_y: f64,
    /// `mu_x^+ + alpha mu_y^+`.
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub mu: f64,
    pub delta_x: f64,
    pub delta_y: f64,
    pub delta: f64,
    /// Pooled variance `v^2` of the shaped rewards around `mu`.
    pub pooled_var: f64,
    /// Within-side variance of the plus half.
    pub sigma_plus_sq: f64,
    pub sigma_minus_sq: f64,
}

impl VspoMoments {
    /// `v^2 + delta^2 / (4 (G - 1))`, the expected sample variance.
    pub fn expected_sample_var(&self, group_size: usize) -> f64 {
        self.pooled_var + self.delta * self.delta / (4.0 * (group_size as f64 - 1.0))
    }
}

pub fn vspo_moments(pair: &SteeringPair, instance: &BanditInstance) -> Result<VspoMoments> {
    if pair.arm_count() != instance.arm_count() {
        return Err(Error::DimensionMismatch {
            expected: instance.arm_count(),
            got: pair.arm_count(),
        });
    }
    let (x, alpha) = (instance.primary(), instance.alpha());
    let (plus, minus) = (pair.plus.probs(), pair.minus.probs());
    let mu_x_plus = dot(plus, x);
    let mu_x_minus = dot(minus, x);
    let mu_y_plus = instance.mean_behavior(plus);
    let mu_y_minus = instance.mean_behavior(minus);
    let mu_plus = mu_x_plus + alpha * mu_y_plus;
    let mu_minus = mu_x_minus + alpha * mu_y_minus;
    let mu = 0.5 * (mu_plus + mu_minus);

    let spread = |probs: &[f64], centre: f64, shift: f64| -> f64 {
        probs
            .iter()
            .zip(x)
            .map(|(p, xi)| p * (xi + shift - centre).powi(2))
            .sum()
    };
    let pooled_var = 0.5 * spread(plus, mu, alpha * mu_y_plus)
        + 0.5 * spread(minus, mu, alpha * mu_y_minus);

    Ok(VspoMoments {
        mu_x_plus,
        mu_x_minus,
        mu_y_plus,
        mu_y_minus,
        mu_x: 0.5 * (mu_x_plus + mu_x_minus),
        mu_y: 0.5 * (mu_y_plus + mu_y_minus),
        mu_plus,
        mu_minus,
        mu,
        delta_x: mu_x_plus - mu_x_minus,
        delta_y: mu_y_plus - mu_y_minus,
        delta: mu_plus - mu_minus,
        pooled_var,
        sigma_plus_sq: spread(plus, mu_x_plus, 0.0),
        sigma_minus_sq: spread(minus, mu_x_minus, 0.0),
    })
}

/// `(G - 1) pi(i) (x(i) - mu_x) + d(i)/2 (delta + alpha (G - 1) delta_y)`,
/// the expected VSPO numerator.
pub fn population_numerator_vspo(
    policy: &Policy,
    pair: &SteeringPair,
    instance: &BanditInstance,
    group_size: usize,
) -> Result<Vec<f64>> {
    pair.check_mixture(policy)?;
    let m = vspo_moments(pair, instance)?;
    let g1 = group_size as f64 - 1.0;
    let steer = m.delta + instance.alpha() * g1 * m.delta_y;
    Ok(policy
        .probs()
        .iter()
        .zip(instance.primary())
        .zip(pair.half_difference())
        .map(|((p, x), d)| g1 * p * (x - m.mu_x) + 0.5 * d * steer)
        .collect())
}

/// Expected VSPO numerator over `sqrt(v^2 + delta^2 / (4 (G - 1)))`.
pub fn population_score_vspo(
    policy: &Policy,
    pair: &SteeringPair,
    instance: &BanditInstance,
    group_size: usize,
) -> Result<Vec<f64>> {
    if group_size < 2 || group_size % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "VSPO group size must be even and at least 2, got {group_size}"
        )));
    }
    let numerators = population_numerator_vspo(policy, pair, instance, group_size)?;
    let denom = vspo_moments(pair, instance)?
        .expected_sample_var(group_size)
        .sqrt();
    if !(denom >= STD_FLOOR) {
        return Err(Error::DegenerateVariance(format!(
            "VSPO score denominator is {denom:e}"
        )));
    }
    Ok(numerators.into_iter().map(|n| n / denom).collect())
}

/// `(hi - lo)^2 / 4`, the largest variance of a variable confined to `[lo, hi]`.
pub fn popoviciu_bound(lo: f64, hi: f64) -> Result<f64> {
    if !(hi >= lo) {
        return Err(Error::InvalidParameter(format!(
            "popoviciu bound needs hi >= lo, got [{lo}, {hi}]"
        )));
    }
    Ok((hi - lo).powi(2) / 4.0)
}

/// Streaming mean and standard error.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningMoments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Standard error of the mean, from the Bessel-corrected sample variance.
    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        let n = self.count as f64;
        (self.m2 / (n - 1.0) / n).sqrt()
    }
}

/// Sampled estimates of the per-arm numerator and of `sigma_hat^2`.
#[derive(Debug, Clone)]
pub struct MomentEstimate {
    pub numerators: Vec<RunningMoments>,
    pub sample_var: RunningMoments,
}

impl MomentEstimate {
    fn new(arm_count: usize) -> Self {
        Self {
            numerators: vec![RunningMoments::default(); arm_count],
            sample_var: RunningMoments::default(),
        }
    }

    fn push(&mut self, group: &RolloutGroup) -> Result<()> {
        let stats = group.stats()?;
        for (acc, n) in self.numerators.iter_mut().zip(score_numerators(group)?) {
            acc.push(n);
        }
        self.sample_var.push(stats.sample_var());
        Ok(())
    }
}

/// Averages GRPO numerators and sample variances over `groups` sampled groups.
pub fn estimate_grpo_moments<R: Rng + ?Sized>(
    policy: &Policy,
    instance: &BanditInstance,
    group_size: usize,
    groups: usize,
    rng: &mut R,
) -> Result<MomentEstimate> {
    let mut est = MomentEstimate::new(instance.arm_count());
    for _ in 0..groups {
        est.push(&sample_group_grpo(policy, instance, group_size, rng)?)?;
    }
    Ok(est)
}

/// Averages VSPO numerators and sample variances over `groups` sampled groups.
pub fn estimate_vspo_moments<R: Rng + ?Sized>(
    pair: &SteeringPair,
    instance: &BanditInstance,
    group_size: usize,
    groups: usize,
    rng: &mut R,
) -> Result<MomentEstimate> {
    let mut est = MomentEstimate::new(instance.arm_count());
    for _ in 0..groups {
        est.push(&sample_group_vspo(pair, instance, group_size, rng)?)?;
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steering::{make_pair, ContrastSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e1() -> BanditInstance {
        BanditInstance::new(vec![1.0, 0.8, 0.2], vec![0.0, 1.0, 1.0], 1.0).unwrap()
    }

    fn e3() -> (BanditInstance, Policy) {
        (
            BanditInstance::new(vec![0.6, 0.4, 0.5], vec![0.0, 0.0, 1.0], 1.0).unwrap(),
            Policy::new(vec![0.3, 0.2, 0.5]).unwrap(),
        )
    }

    fn group(arm_count: usize, items: &[(usize, SourceTag, f64)]) -> RolloutGroup {
        RolloutGroup {
            arm_count,
            samples: items
                .iter()
                .map(|&(arm, tag, reward)| Sample { arm, tag, reward })
                .collect(),
        }
    }

    #[test]
    fn group_stats_use_bessel() {
        let s = GroupStats::from_rewards(&[1.0, 0.0]).unwrap();
        assert_eq!(s.mean, 0.5);
        assert!((s.sample_std - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(GroupStats::from_rewards(&[2.0, 2.0, 2.0]).unwrap().sample_std, 0.0);
        assert!(GroupStats::from_rewards(&[1.0]).is_err());
    }

    #[test]
    fn grpo_two_sample_score() {
        let g = group(2, &[(0, SourceTag::Plain, 1.0), (1, SourceTag::Plain, 0.0)]);
        let a = empirical_score_grpo(&g).unwrap();
        assert!((a[0] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((a[1] + 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn vspo_two_sample_score() {
        let g = group(2, &[(0, SourceTag::Plus, 1.0), (1, SourceTag::Minus, 0.0)]);
        let a = empirical_score_vspo(&g).unwrap();
        assert!((a[0] - 0.707107).abs() < 1e-6);
        assert!((a[1] + 0.707107).abs() < 1e-6);
        assert!(empirical_score_grpo(&g).is_err());
        let lopsided = group(2, &[(0, SourceTag::Plus, 1.0), (1, SourceTag::Plus, 0.0)]);
        assert!(empirical_score_vspo(&lopsided).is_err());
    }

    #[test]
    fn point_mass_group_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pi = Policy::point_mass(3, 2).unwrap();
        let g = sample_group_grpo(&pi, &e1(), 6, &mut rng).unwrap();
        assert!(g.arms().iter().all(|&a| a == 2));
        assert_eq!(g.stats().unwrap().sample_std, 0.0);
        assert_eq!(empirical_score_grpo(&g).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn zero_contrast_point_mass_vspo_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pi = Policy::point_mass(3, 0).unwrap();
        let pair = SteeringPair::zero_contrast(&pi);
        let g = sample_group_vspo(&pair, &e1(), 4, &mut rng).unwrap();
        assert_eq!(empirical_score_vspo(&g).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn same_seed_same_group() {
        let pi = Policy::uniform(3).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_group_grpo(&pi, &e1(), 6, &mut rng).unwrap()
        };
        assert_eq!(draw(11), draw(11));

        let (inst, pi) = e3();
        let pair = make_pair(&pi, &ContrastSpec::TwoSidedSplit, &inst).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_group_vspo(&pair, &inst, 6, &mut rng).unwrap()
        };
        assert_eq!(draw(5), draw(5));
    }

    #[test]
    fn vspo_rewards_use_side_means() {
        let (inst, pi) = e3();
        let pair = make_pair(&pi, &ContrastSpec::TwoSidedSplit, &inst).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = sample_group_vspo(&pair, &inst, 8, &mut rng).unwrap();
        for s in &g.samples {
            let bonus = match s.tag {
                SourceTag::Plus => 1.0,
                SourceTag::Minus => 0.0,
                other => panic!("unexpected tag {other:?}"),
            };
            assert_eq!(s.reward, inst.primary()[s.arm] + bonus);
        }
        assert!(sample_group_vspo(&pair, &inst, 3, &mut rng).is_err());
    }

    #[test]
    fn zero_contrast_vspo_rewards_are_shifted_x() {
        let (inst, pi) = e3();
        let pair = SteeringPair::zero_contrast(&pi);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = sample_group_vspo(&pair, &inst, 4, &mut rng).unwrap();
        let mu_y = inst.mean_behavior(pi.probs());
        for s in &g.samples {
            assert_eq!(s.reward, inst.primary()[s.arm] + mu_y);
        }
    }

    #[test]
    fn uniform_e1_population_grpo() {
        let a = population_score_grpo(&Policy::uniform(3).unwrap(), &e1(), 4).unwrap();
        let r = [1.0, 1.8, 1.2];
        let mu = 4.0 / 3.0;
        let sigma = (r.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / 3.0).sqrt();
        assert!((sigma - 0.339935).abs() < 1e-6);
        for i in 0..3 {
            assert!((a[i] - 3.0 / 3.0 * (r[i] - mu) / sigma).abs() < 1e-12);
        }
        for (got, want) in a.iter().zip([-0.980581, 1.372813, -0.392232]) {
            assert!((got - want).abs() < 1e-6);
        }
        assert!(a.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn degenerate_population_variance() {
        let pi = Policy::point_mass(3, 0).unwrap();
        assert!(matches!(
            population_score_grpo(&pi, &e1(), 4),
            Err(Error::DegenerateVariance(_))
        ));
        // two arms sharing a scalar reward, policy confined to them
        let inst = BanditInstance::new(vec![0.5, 0.5, 0.0], vec![0.0, 0.0, 1.0], 1.0).unwrap();
        let pi = Policy::from_simplex(vec![0.3, 0.7, 0.0]).unwrap();
        assert!(matches!(
            population_score_grpo(&pi, &inst, 4),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn zero_contrast_vspo_is_grpo_on_x() {
        let (inst, pi) = e3();
        let pair = SteeringPair::zero_contrast(&pi);
        let x_only = BanditInstance::new(inst.primary().to_vec(), vec![0.0; 3], 1.0);
        // x-only rewards: x = (0.6, 0.4, 0.5) has no y trade-off, alpha is irrelevant
        let x_only = x_only.unwrap();
        for g in [2, 4, 8] {
            let v = population_score_vspo(&pi, &pair, &inst, g).unwrap();
            let r = population_score_grpo(&pi, &x_only, g).unwrap();
            for i in 0..3 {
                assert!((v[i] - r[i]).abs() < 1e-12, "G={g}: {v:?} vs {r:?}");
            }
        }
    }

    #[test]
    fn within_variance_identity_e3() {
        let (inst, pi) = e3();
        let pair = make_pair(&pi, &ContrastSpec::TwoSidedSplit, &inst).unwrap();
        let m = vspo_moments(&pair, &inst).unwrap();
        let lhs = 0.5 * (m.sigma_plus_sq + m.sigma_minus_sq);
        assert!((lhs - (m.pooled_var - m.delta * m.delta / 4.0)).abs() < 1e-12);
        assert!((m.delta - 0.98).abs() < 1e-12);
    }

    #[test]
    fn popoviciu_examples() {
        assert_eq!(popoviciu_bound(0.0, 1.0).unwrap(), 0.25);
        assert_eq!(popoviciu_bound(0.3, 0.3).unwrap(), 0.0);
        assert!(popoviciu_bound(1.0, 0.0).is_err());
    }

    #[test]
    fn running_moments_match_direct() {
        let mut m = RunningMoments::default();
        for v in [1.0, 2.0, 4.0, 7.0] {
            m.push(v);
        }
        assert!((m.mean() - 3.5).abs() < 1e-15);
        let var = (6.25 + 2.25 + 0.25 + 12.25) / 3.0;
        assert!((m.std_error() - (var / 4.0f64).sqrt()).abs() < 1e-15);
    }
}
