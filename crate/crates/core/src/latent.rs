// SPDX-License-Identifier: MIT OR Apache-2.0

//! A latent policy small enough to differentiate by hand.
//!
//! Every arm and a start token get a one-hot feature vector. A token's hidden
//! state is `h = tanh(U phi)`, and the policy over arms reads the start
//! token's hidden state through the unembedding: `pi = softmax(W h_start)`.
//! Steering adds `beta v` to `h_start` before the readout, so a single latent
//! direction shifts the arms differentially through the rows of `W`.
//!
//! Training mirrors the full pipeline with one decision per rollout: build
//! `v` once from arm activations, sample one arm per intensity in the
//! schedule, reward it with `x(arm) + alpha beta`, standardize within the
//! group, and take gradient steps on a clipped surrogate whose ratios are
//! evaluated without steering.

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::advantage::{GroupStats, RolloutGroup, Sample, SourceTag, STD_FLOOR};
use crate::bandit::{dot, BanditInstance, EQ_TOL};
use crate::error::{Error, Result};

/// Smallest old-policy probability a sampled arm may have.
pub const OLD_PROB_FLOOR: f64 = 1e-300;

/// Intensities used when a schedule does not list its own.
pub const DEFAULT_INTENSITIES: [f64; 5] = [-0.3, -0.15, 0.0, 0.15, 0.3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Token {
    Arm(usize),
    Start,
}

/// Encoder `U` (`m x (K+1)`, last column is the start token) and unembedding
/// `W` (`K x m`), stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentParams {
    pub encode: Vec<Vec<f64>>,
    pub unembed: Vec<Vec<f64>>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// `KL(p || q)` in nats.
fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum()
}

impl LatentParams {
    /// Checks shapes and finiteness.
    pub fn new(encode: Vec<Vec<f64>>, unembed: Vec<Vec<f64>>) -> Result<Self> {
        let m = encode.len();
        let k = unembed.len();
        if m == 0 || k < 2 {
            return Err(Error::InvalidParameter(format!(
                "latent policy needs a hidden dimension >= 1 and >= 2 arms, got m = {m}, K = {k}"
            )));
        }
        if let Some(row) = encode.iter().find(|r| r.len() != k + 1) {
            return Err(Error::DimensionMismatch {
                expected: k + 1,
                got: row.len(),
            });
        }
        if let Some(row) = unembed.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: row.len(),
            });
        }
        let params = Self { encode, unembed };
        params.check_finite()?;
        Ok(params)
    }

    /// Entries drawn uniformly from `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(arm_count: usize, hidden_dim: usize, scale: f64, rng: &mut R) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("init scale must be positive, got {scale}")));
        }
        let dist = Uniform::new_inclusive(-scale, scale)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let encode = (0..hidden_dim)
            .map(|_| (0..=arm_count).map(|_| dist.sample(rng)).collect())
            .collect();
        let unembed = (0..arm_count)
            .map(|_| (0..hidden_dim).map(|_| dist.sample(rng)).collect())
            .collect();
        Self::new(encode, unembed)
    }

    /// Random parameters with a planted behavior direction on hidden unit 0.
    ///
    /// Arms with above-average `y` get `U[0][arm] = +axis` and
    /// `W[arm][0] = +axis`; the others get `-axis`. The start token's entry
    /// on that unit is `-start_bias`, so the unsteered policy leans toward
    /// the low-`y` arms. Everything else is uniform in `[-0.5, 0.5]`.
    pub fn with_behavior_axis<R: Rng + ?Sized>(
        instance: &BanditInstance,
        hidden_dim: usize,
        axis: f64,
        start_bias: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let k = instance.arm_count();
        let mut p = Self::random(k, hidden_dim, 0.5, rng)?;
        let y = instance.behavior();
        let mean_y = y.iter().sum::<f64>() / k as f64;
        for arm in 0..k {
            let sign = if y[arm] > mean_y { 1.0 } else { -1.0 };
            p.encode[0][arm] = sign * axis;
            p.unembed[arm][0] = sign * axis;
        }
        p.encode[0][k] = -start_bias;
        p.check_finite()?;
        Ok(p)
    }

    fn check_finite(&self) -> Result<()> {
        let all_finite = self
            .encode
            .iter()
            .chain(&self.unembed)
            .flatten()
            .all(|v| v.is_finite());
        if all_finite {
            Ok(())
        } else {
            Err(Error::NonFinite("latent parameters".into()))
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.encode.len()
    }

    pub fn arm_count(&self) -> usize {
        self.unembed.len()
    }

    fn column(&self, token: Token) -> Result<usize> {
        match token {
            Token::Arm(a) if a < self.arm_count() => Ok(a),
            Token::Arm(a) => Err(Error::InvalidParameter(format!(
                "arm token {a} out of range for {} arms",
                self.arm_count()
            ))),
            Token::Start => Ok(self.arm_count()),
        }
    }

    /// `tanh(U phi(token))`.
    pub fn activation(&self, token: Token) -> Result<Vec<f64>> {
        let col = self.column(token)?;
        Ok(self.encode.iter().map(|row| row[col].tanh()).collect())
    }

    fn start_activation(&self) -> Vec<f64> {
        let col = self.arm_count();
        self.encode.iter().map(|row| row[col].tanh()).collect()
    }

    fn readout(&self, hidden: &[f64]) -> Vec<f64> {
        softmax(&self.unembed.iter().map(|w| dot(w, hidden)).collect::<Vec<_>>())
    }

    /// `softmax(W tanh(U phi_start))`.
    pub fn base_distribution(&self) -> Vec<f64> {
        self.readout(&self.start_activation())
    }

    /// `softmax(W (tanh(U phi_start) + beta v))`.
    pub fn steered_distribution(&self, v: &SteeringVector, beta: f64) -> Result<Vec<f64>> {
        if v.v.len() != self.hidden_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.hidden_dim(),
                got: v.v.len(),
            });
        }
        let h: Vec<f64> = self
            .start_activation()
            .iter()
            .zip(&v.v)
            .map(|(h, vj)| h + beta * vj)
            .collect();
        Ok(self.readout(&h))
    }

    /// `self - rate * grad`.
    pub fn step(&mut self, grad: &LatentParams, rate: f64) {
        for (p, g) in self.encode.iter_mut().zip(&grad.encode) {
            for (pi, gi) in p.iter_mut().zip(g) {
                *pi -= rate * gi;
            }
        }
        for (p, g) in self.unembed.iter_mut().zip(&grad.unembed) {
            for (pi, gi) in p.iter_mut().zip(g) {
                *pi -= rate * gi;
            }
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            encode: vec![vec![0.0; self.arm_count() + 1]; self.hidden_dim()],
            unembed: vec![vec![0.0; self.hidden_dim()]; self.arm_count()],
        }
    }
}

/// Trainable parameters together with the frozen reference copy used by the
/// KL penalty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatentPolicy {
    pub params: LatentParams,
    pub reference: LatentParams,
}

impl LatentPolicy {
    /// Freezes a copy of `params` as the reference.
    pub fn new(params: LatentParams) -> Self {
        Self {
            reference: params.clone(),
            params,
        }
    }
}

/// A latent steering direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringVector {
    pub v: Vec<f64>,
    pub normalized: bool,
}

impl SteeringVector {
    pub fn norm(&self) -> f64 {
        dot(&self.v, &self.v).sqrt()
    }
}

fn mean_activation(params: &LatentParams, arms: &[usize]) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; params.hidden_dim()];
    for &a in arms {
        for (s, h) in acc.iter_mut().zip(params.activation(Token::Arm(a))?) {
            *s += h;
        }
    }
    Ok(acc.into_iter().map(|s| s / arms.len() as f64).collect())
}

/// Mean activation over `positive` arms minus mean activation over `negative`
/// arms, optionally scaled to unit length. A vector too short to normalize
/// is returned as is with `normalized = false`.
pub fn build_vector(
    params: &LatentParams,
    positive: &[usize],
    negative: &[usize],
    normalize: bool,
) -> Result<SteeringVector> {
    if positive.is_empty() || negative.is_empty() {
        return Err(Error::InvalidParameter(
            "steering vector needs nonempty positive and negative arm sets".into(),
        ));
    }
    let pos = mean_activation(params, positive)?;
    let neg = mean_activation(params, negative)?;
    let v: Vec<f64> = pos.iter().zip(&neg).map(|(p, n)| p - n).collect();
    let mut out = SteeringVector { v, normalized: false };
    if normalize {
        let norm = out.norm();
        if norm <= EQ_TOL {
            log::warn!("steering vector has norm {norm:e}; left unnormalized");
        } else {
            out.v.iter_mut().for_each(|x| *x /= norm);
            out.normalized = true;
        }
    }
    Ok(out)
}

/// Arms with maximal `y` as the positive set, the rest as the negative set.
pub fn behavior_sets(instance: &BanditInstance) -> (Vec<usize>, Vec<usize>) {
    let pos = instance.max_behavior_arms();
    let neg = (0..instance.arm_count()).filter(|a| !pos.contains(a)).collect();
    (pos, neg)
}

/// One steering intensity per rollout, and the weight on the intensity bonus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensitySchedule {
    pub coefficients: Vec<f64>,
    pub behavior_weight: f64,
}

impl IntensitySchedule {
    pub fn new(coefficients: Vec<f64>, behavior_weight: f64) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "intensity schedule needs at least 2 coefficients, got {}",
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter("intensities must be finite".into()));
        }
        if !(behavior_weight >= 0.0 && behavior_weight.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "behavior weight must be finite and nonnegative, got {behavior_weight}"
            )));
        }
        Ok(Self {
            coefficients,
            behavior_weight,
        })
    }

    /// [`DEFAULT_INTENSITIES`] with the given weight.
    pub fn symmetric_default(behavior_weight: f64) -> Result<Self> {
        Self::new(DEFAULT_INTENSITIES.to_vec(), behavior_weight)
    }

    pub fn group_size(&self) -> usize {
        self.coefficients.len()
    }

    /// True when the sorted intensities mirror around zero.
    pub fn is_symmetric(&self) -> bool {
        let mut b = self.coefficients.clone();
        b.sort_by(f64::total_cmp);
        b.iter().zip(b.iter().rev()).all(|(lo, hi)| (lo + hi).abs() <= EQ_TOL)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    #[serde(default = "TrainConfig::default_clip")]
    pub clip_ratio: f64,
    #[serde(default)]
    pub kl_weight: f64,
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    /// Gradient steps per sampled group, all against the same old policy.
    #[serde(default = "TrainConfig::default_epochs")]
    pub epochs: usize,
}

impl TrainConfig {
    fn default_clip() -> f64 {
        0.2
    }

    fn default_epochs() -> usize {
        1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip_ratio > 0.0 && self.clip_ratio < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "clip ratio must lie in (0, 1), got {}",
                self.clip_ratio
            )));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be finite and nonnegative, got {}",
                self.learning_rate
            )));
        }
        if !(self.kl_weight >= 0.0 && self.kl_weight.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kl weight must be finite and nonnegative, got {}",
                self.kl_weight
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            clip_ratio: Self::default_clip(),
            kl_weight: 0.0,
            iterations: 500,
            seed: 0,
            epochs: Self::default_epochs(),
        }
    }
}

/// One arm per intensity `beta_g`, drawn from the steered distribution and
/// rewarded with `x(arm) + alpha beta_g`.
pub fn rollout_group<R: Rng + ?Sized>(
    params: &LatentParams,
    v: &SteeringVector,
    schedule: &IntensitySchedule,
    instance: &BanditInstance,
    rng: &mut R,
) -> Result<RolloutGroup> {
    if instance.arm_count() != params.arm_count() {
        return Err(Error::DimensionMismatch {
            expected: params.arm_count(),
            got: instance.arm_count(),
        });
    }
    let x = instance.primary();
    let mut samples = Vec::with_capacity(schedule.group_size());
    for &beta in &schedule.coefficients {
        let probs = params.steered_distribution(v, beta)?;
        let arm = WeightedIndex::new(&probs)
            .map_err(|e| Error::InvalidDistribution(e.to_string()))?
            .sample(rng);
        samples.push(Sample {
            arm,
            tag: SourceTag::Intensity(beta),
            reward: x[arm] + schedule.behavior_weight * beta,
        });
    }
    Ok(RolloutGroup {
        arm_count: params.arm_count(),
        samples,
    })
}

/// `(r_g - r_bar) / sigma_r` per rollout, zeros for a flat group.
pub fn group_advantages(group: &RolloutGroup) -> Result<Vec<f64>> {
    let stats = GroupStats::from_rewards(&group.rewards())?;
    if stats.sample_std < STD_FLOOR {
        return Ok(vec![0.0; group.group_size()]);
    }
    Ok(group
        .samples
        .iter()
        .map(|s| (s.reward - stats.mean) / stats.sample_std)
        .collect())
}

/// Clipped surrogate loss and its gradient with respect to `params`.
///
/// ```text
/// loss = -(1/G) sum_g min(rho_g A_g, clip(rho_g, 1-eps, 1+eps) A_g) + kl_weight KL(pi || pi_ref)
/// ```
///
/// with `rho_g = pi(a_g) / pi_old(a_g)`, both unsteered. Only the start
/// column of `U` receives gradient.
pub fn surrogate_loss_and_grad(
    params: &LatentParams,
    old: &LatentParams,
    reference: &LatentParams,
    group: &RolloutGroup,
    advantages: &[f64],
    config: &TrainConfig,
) -> Result<(f64, LatentParams)> {
    if advantages.len() != group.group_size() {
        return Err(Error::DimensionMismatch {
            expected: group.group_size(),
            got: advantages.len(),
        });
    }
    let k = params.arm_count();
    if group.samples.iter().any(|s| s.arm >= k) {
        return Err(Error::InvalidGroup("sampled arm out of range".into()));
    }
    let h = params.start_activation();
    let pi = params.readout(&h);
    let pi_old = old.base_distribution();
    let pi_ref = reference.base_distribution();
    let g = group.group_size() as f64;
    let (lo, hi) = (1.0 - config.clip_ratio, 1.0 + config.clip_ratio);

    let mut loss = 0.0;
    let mut grad_z = vec![0.0; k];
    for (s, &adv) in group.samples.iter().zip(advantages) {
        let old_p = pi_old[s.arm];
        if old_p < OLD_PROB_FLOOR {
            return Err(Error::InvalidDistribution(format!(
                "old policy gives sampled arm {} probability {old_p:e}",
                s.arm + 1
            )));
        }
        let rho = pi[s.arm] / old_p;
        let unclipped = rho * adv;
        let clipped = rho.clamp(lo, hi) * adv;
        loss -= unclipped.min(clipped) / g;
        if unclipped <= clipped {
            // d rho / d z_j = rho (1[j = a] - pi_j)
            for (j, gz) in grad_z.iter_mut().enumerate() {
                let indicator = if j == s.arm { 1.0 } else { 0.0 };
                *gz -= adv * rho * (indicator - pi[j]) / g;
            }
        }
    }
    if config.kl_weight > 0.0 {
        let d = kl(&pi, &pi_ref);
        loss += config.kl_weight * d;
        for j in 0..k {
            if pi[j] > 0.0 {
                grad_z[j] += config.kl_weight * pi[j] * ((pi[j] / pi_ref[j]).ln() - d);
            }
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("surrogate loss is {loss}")));
    }

    let mut grad = params.zeros_like();
    for (row, gz) in grad.unembed.iter_mut().zip(&grad_z) {
        for (w, hj) in row.iter_mut().zip(&h) {
            *w = gz * hj;
        }
    }
    for (j, row) in grad.encode.iter_mut().enumerate() {
        let grad_h: f64 = (0..k).map(|i| params.unembed[i][j] * grad_z[i]).sum();
        row[k] = grad_h * (1.0 - h[j] * h[j]);
    }
    Ok((loss, grad))
}

/// Unsteered metrics after one training iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatentRecord {
    pub iteration: usize,
    pub mean_x: f64,
    pub mean_y: f64,
    pub entropy: f64,
    pub probs: Vec<f64>,
}

fn record(iteration: usize, params: &LatentParams, instance: &BanditInstance) -> LatentRecord {
    let probs = params.base_distribution();
    LatentRecord {
        iteration,
        mean_x: instance.mean_primary(&probs),
        mean_y: instance.mean_behavior(&probs),
        entropy: entropy(&probs),
        probs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatentTrajectory {
    pub records: Vec<LatentRecord>,
    /// Pearson correlation, pooled over all sampled rollouts, between the
    /// per-sample bonus `alpha beta_g` and the steered mean behavior
    /// `alpha E_{pi^(beta_g)}[y]`. `None` when either side is constant.
    pub bonus_vs_mean_behavior: Option<f64>,
    pub final_loss: f64,
}

impl LatentTrajectory {
    pub fn first(&self) -> &LatentRecord {
        &self.records[0]
    }

    pub fn last(&self) -> &LatentRecord {
        self.records.last().expect("trajectory holds the initial record")
    }
}

/// Trains the unsteered policy with steered rollout groups.
///
/// The steering vector is fixed for the whole run. Each iteration samples
/// one group under the current parameters, then takes `config.epochs`
/// gradient steps on the surrogate with those parameters as the old policy.
pub fn train(
    policy: &mut LatentPolicy,
    instance: &BanditInstance,
    v: &SteeringVector,
    schedule: &IntensitySchedule,
    config: &TrainConfig,
) -> Result<LatentTrajectory> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::with_capacity(config.iterations + 1);
    records.push(record(0, &policy.params, instance));
    let mut bonus = Vec::new();
    let mut mean_behavior = Vec::new();
    let mut final_loss = 0.0;
    let alpha = schedule.behavior_weight;

    for t in 1..=config.iterations {
        let old = policy.params.clone();
        let group = rollout_group(&old, v, schedule, instance, &mut rng)?;
        for &beta in &schedule.coefficients {
            bonus.push(alpha * beta);
            mean_behavior.push(alpha * instance.mean_behavior(&old.steered_distribution(v, beta)?));
        }
        let adv = group_advantages(&group)?;
        for _ in 0..config.epochs {
            let (loss, grad) =
                surrogate_loss_and_grad(&policy.params, &old, &policy.reference, &group, &adv, config)?;
            final_loss = loss;
            policy.params.step(&grad, config.learning_rate);
        }
        policy.params.check_finite()?;
        records.push(record(t, &policy.params, instance));
    }

    Ok(LatentTrajectory {
        records,
        bonus_vs_mean_behavior: pearson(&bonus, &mean_behavior),
        final_loss,
    })
}

/// `|| (pi^(+b) + pi^(-b)) / 2 - pi^(0) ||_1`.
pub fn mixture_deviation(params: &LatentParams, v: &SteeringVector, b: f64) -> Result<f64> {
    let plus = params.steered_distribution(v, b)?;
    let minus = params.steered_distribution(v, -b)?;
    let base = params.base_distribution();
    Ok(plus
        .iter()
        .zip(&minus)
        .zip(&base)
        .map(|((p, m), z)| (0.5 * (p + m) - z).abs())
        .sum())
}

/// Spearman rank correlation between each intensity in `schedule` and the
/// steered mean behavior at that intensity.
pub fn steering_monotonicity(
    params: &LatentParams,
    v: &SteeringVector,
    schedule: &IntensitySchedule,
    instance: &BanditInstance,
) -> Result<Option<f64>> {
    let mean_y = schedule
        .coefficients
        .iter()
        .map(|&b| Ok(instance.mean_behavior(&params.steered_distribution(v, b)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(spearman(&schedule.coefficients, &mean_y))
}

/// Pearson correlation; `None` for fewer than two points or a constant side.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len().min(b.len());
    if n < 2 {
        return None;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a[..n].iter().zip(&b[..n]) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end) as f64 / 2.0 + 1.0;
        for &i in &order[start..=end] {
            out[i] = rank;
        }
        start = end + 1;
    }
    out
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    pearson(&ranks(a), &ranks(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::advantage::Sample;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn group_of(arms: &[usize], rewards: &[f64]) -> RolloutGroup {
        RolloutGroup {
            arm_count: 3,
            samples: arms
                .iter()
                .zip(rewards)
                .map(|(&arm, &reward)| Sample {
                    arm,
                    tag: SourceTag::Plain,
                    reward,
                })
                .collect(),
        }
    }

    #[test]
    fn zero_encoder_gives_zero_activations() {
        let p = LatentParams::new(vec![vec![0.0; 4]; 3], vec![vec![1.0; 3]; 3]).unwrap();
        for t in [Token::Arm(0), Token::Arm(2), Token::Start] {
            assert_eq!(p.activation(t).unwrap(), vec![0.0; 3]);
        }
        assert!(p.activation(Token::Arm(3)).is_err());
    }

    #[test]
    fn activation_reads_one_column() {
        let encode = vec![vec![0.3, -1.0, 2.0], vec![0.7, 0.5, -0.2]];
        let p = LatentParams::new(encode, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(p.activation(Token::Arm(0)).unwrap(), vec![0.3f64.tanh(), 0.7f64.tanh()]);
        assert_eq!(p.activation(Token::Start).unwrap(), vec![2.0f64.tanh(), (-0.2f64).tanh()]);
    }

    #[test]
    fn activations_stay_inside_unit_box() {
        let mut r = rng(1);
        for _ in 0..50 {
            let p = LatentParams::random(4, 6, 3.0, &mut r).unwrap();
            for a in 0..4 {
                assert!(p.activation(Token::Arm(a)).unwrap().iter().all(|h| h.abs() < 1.0));
            }
        }
    }

    #[test]
    fn vector_from_two_arms() {
        // arm activations (0.9, 0.1) and (0.1, 0.9)
        let encode = vec![
            vec![0.9f64.atanh(), 0.1f64.atanh(), 0.0],
            vec![0.1f64.atanh(), 0.9f64.atanh(), 0.0],
        ];
        let p = LatentParams::new(encode, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let v = build_vector(&p, &[0], &[1], false).unwrap();
        assert!((v.v[0] - 0.8).abs() < 1e-12 && (v.v[1] + 0.8).abs() < 1e-12);
        assert!(!v.normalized);
        let n = build_vector(&p, &[0], &[1], true).unwrap();
        assert!(n.normalized);
        assert!((n.v[0] - 0.707107).abs() < 1e-6 && (n.v[1] + 0.707107).abs() < 1e-6);
        assert!((n.norm() - 1.0).abs() < 1e-12);

        let swapped = build_vector(&p, &[1], &[0], false).unwrap();
        assert_eq!(swapped.v, v.v.iter().map(|x| -x).collect::<Vec<_>>());

        let same = build_vector(&p, &[0, 1], &[0, 1], true).unwrap();
        assert_eq!(same.v, vec![0.0, 0.0]);
        assert!(!same.normalized);
        assert!(build_vector(&p, &[], &[1], false).is_err());
    }

    #[test]
    fn steered_two_arm_example() {
        let p = LatentParams::new(vec![vec![0.0; 3]; 2], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let v = SteeringVector { v: vec![0.8, -0.8], normalized: false };
        let d = p.steered_distribution(&v, 1.0).unwrap();
        let e = 1.6f64.exp();
        assert!((d[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((d[0] - 0.832018).abs() < 1e-6 && (d[1] - 0.167982).abs() < 1e-6);
    }

    #[test]
    fn zero_intensity_is_base() {
        let mut r = rng(4);
        let p = LatentParams::random(5, 8, 0.5, &mut r).unwrap();
        let v = SteeringVector { v: (0..8).map(|i| i as f64 - 3.0).collect(), normalized: false };
        let base = p.base_distribution();
        let steered = p.steered_distribution(&v, 0.0).unwrap();
        for (a, b) in base.iter().zip(&steered) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn opposite_intensities_negate_logit_shift() {
        let mut r = rng(5);
        let p = LatentParams::random(4, 6, 0.5, &mut r).unwrap();
        let v = build_vector(&p, &[0, 1], &[2, 3], true).unwrap();
        let logdiff = |d: &[f64]| d[0].ln() - d[3].ln();
        let base = logdiff(&p.base_distribution());
        let up = logdiff(&p.steered_distribution(&v, 0.2).unwrap()) - base;
        let down = logdiff(&p.steered_distribution(&v, -0.2).unwrap()) - base;
        assert!((up + down).abs() < 1e-12);
    }

    #[test]
    fn advantages_standardize() {
        assert_eq!(group_advantages(&group_of(&[0, 1], &[0.4, 0.4])).unwrap(), vec![0.0, 0.0]);
        let a = group_advantages(&group_of(&[0, 1], &[1.0, 0.0])).unwrap();
        assert!((a[0] - 0.707107).abs() < 1e-6 && (a[1] + 0.707107).abs() < 1e-6);
        let a = group_advantages(&group_of(&[0, 1, 2, 0], &[0.3, 1.2, -0.4, 2.0])).unwrap();
        assert!(a.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn plain_schedule_rewards_primary_only() {
        let inst = BanditInstance::new(vec![1.0, 0.5, 0.0], vec![0.0, 1.0, 0.0], 1.0).unwrap();
        let mut r = rng(2);
        let p = LatentParams::random(3, 4, 0.5, &mut r).unwrap();
        let v = build_vector(&p, &[1], &[0, 2], true).unwrap();
        let s = IntensitySchedule::new(vec![0.0; 4], 3.0).unwrap();
        let g = rollout_group(&p, &v, &s, &inst, &mut r).unwrap();
        for smp in &g.samples {
            assert_eq!(smp.reward, inst.primary()[smp.arm]);
        }
    }

    #[test]
    fn default_schedule_bonus_per_sample() {
        let inst = BanditInstance::new(vec![1.0, 0.5, 0.0], vec![0.0, 1.0, 0.0], 1.0).unwrap();
        let p = LatentParams::random(3, 4, 0.5, &mut rng(3)).unwrap();
        let v = build_vector(&p, &[1], &[0, 2], true).unwrap();
        let s = IntensitySchedule::symmetric_default(2.0).unwrap();
        assert!(s.is_symmetric());
        let g = rollout_group(&p, &v, &s, &inst, &mut rng(9)).unwrap();
        assert_eq!(g.group_size(), 5);
        for (smp, beta) in g.samples.iter().zip(DEFAULT_INTENSITIES) {
            assert_eq!(smp.tag, SourceTag::Intensity(beta));
            assert_eq!(smp.reward, inst.primary()[smp.arm] + 2.0 * beta);
        }
        assert_eq!(g, rollout_group(&p, &v, &s, &inst, &mut rng(9)).unwrap());
    }

    #[test]
    fn surrogate_at_old_params_is_zero() {
        let p = LatentParams::random(3, 4, 0.5, &mut rng(6)).unwrap();
        let g = group_of(&[0, 1, 2, 1], &[1.0, 0.2, 0.5, 0.9]);
        let adv = group_advantages(&g).unwrap();
        let (loss, _) = surrogate_loss_and_grad(&p, &p, &p, &g, &adv, &TrainConfig::default()).unwrap();
        assert!(loss.abs() < 1e-15);
    }

    #[test]
    fn one_step_raises_the_favoured_arm() {
        let p = LatentParams::random(3, 4, 0.5, &mut rng(7)).unwrap();
        let g = group_of(&[1, 0, 2], &[0.0; 3]);
        let adv = [1.0, -0.5, -0.5];
        let (_, grad) = surrogate_loss_and_grad(&p, &p, &p, &g, &adv, &TrainConfig::default()).unwrap();
        let mut q = p.clone();
        q.step(&grad, 1e-2);
        assert!(q.base_distribution()[1] > p.base_distribution()[1]);
    }

    #[test]
    fn zero_rate_keeps_trajectory_constant() {
        let inst = BanditInstance::new(vec![1.0, 0.5, 0.0], vec![0.0, 1.0, 0.0], 1.0).unwrap();
        let p = LatentParams::random(3, 4, 0.5, &mut rng(8)).unwrap();
        let v = build_vector(&p, &[1], &[0, 2], true).unwrap();
        let s = IntensitySchedule::symmetric_default(1.0).unwrap();
        let cfg = TrainConfig { learning_rate: 0.0, iterations: 20, ..TrainConfig::default() };
        let mut pol = LatentPolicy::new(p);
        let tr = train(&mut pol, &inst, &v, &s, &cfg).unwrap();
        assert_eq!(tr.records.len(), 21);
        assert!(tr.records.iter().all(|r| r.probs == tr.first().probs));
    }

    #[test]
    fn rank_correlations() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 35.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 1.0]), None);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { clip_ratio: 1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: -1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(IntensitySchedule::new(vec![0.1], 1.0).is_err());
        assert!(!IntensitySchedule::new(vec![0.1, 0.2], 1.0).unwrap().is_symmetric());
    }
}
