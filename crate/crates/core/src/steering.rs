// SPDX-License-Identifier: MIT OR Apache-2.0

//! The bandit model of vector steering.
//!
//! Steering the current policy `pi` yields a pair `(pi_plus, pi_minus)` whose
//! average is `pi` again. Every such pair can be written as
//! `pi_plus/minus(i) = pi(i) (1 +- c(i))` for a contrast `c` with entries in
//! `[-1, 1]` and `sum_i pi(i) c(i) = 0`; [`ContrastSpec`] names a few ways of
//! choosing `c`. [`diagnostics`] then measures how strongly a pair favours
//! the target arm (the `gamma`-good certificate), and [`bound_grpo`] /
//! [`bound_vspo`] evaluate the iteration-complexity bounds that the
//! certificate unlocks.

use serde::{Deserialize, Serialize};

use crate::bandit::{dot, BanditInstance, ScalarizedSummary, EQ_TOL};
use crate::error::{Error, Result};
use crate::policy::Policy;

/// Slack on the policy-weighted mean of a custom contrast.
const CONTRAST_CENTER_TOL: f64 = 1e-10;

/// How the steering contrast `c` is derived from the current policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContrastSpec {
    /// `c(i) = s (y(i) - mu_y) / max_j |y(j) - mu_y|`.
    YTilt { strength: f64 },
    /// Same as [`ContrastSpec::YTilt`] with the scalar reward in place of `y`.
    RTilt { strength: f64 },
    /// `+s_hi` on the max-`y` arms, `-s_lo` elsewhere, balanced so that
    /// `pi_hi s_hi = pi_lo s_lo` with the larger strength saturated at 1.
    TwoSidedSplit,
    /// An explicit contrast vector.
    Custom { contrast: Vec<f64> },
}

/// Two distributions whose average is the steered policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteeringPair {
    pub plus: Policy,
    pub minus: Policy,
}

impl SteeringPair {
    pub fn new(plus: Policy, minus: Policy) -> Result<Self> {
        if plus.arm_count() != minus.arm_count() {
            return Err(Error::DimensionMismatch {
                expected: plus.arm_count(),
                got: minus.arm_count(),
            });
        }
        Ok(Self { plus, minus })
    }

    /// Both halves identical to `policy`.
    pub fn zero_contrast(policy: &Policy) -> Self {
        Self {
            plus: policy.clone(),
            minus: policy.clone(),
        }
    }

    pub fn arm_count(&self) -> usize {
        self.plus.arm_count()
    }

    /// `(pi_plus + pi_minus) / 2`.
    pub fn mixture(&self) -> Vec<f64> {
        self.plus
            .probs()
            .iter()
            .zip(self.minus.probs())
            .map(|(p, m)| 0.5 * (p + m))
            .collect()
    }

    /// `d(i) = (pi_plus(i) - pi_minus(i)) / 2`.
    pub fn half_difference(&self) -> Vec<f64> {
        self.plus
            .probs()
            .iter()
            .zip(self.minus.probs())
            .map(|(p, m)| 0.5 * (p - m))
            .collect()
    }

    /// Largest entrywise deviation of the mixture from `policy`.
    pub fn mixture_error(&self, policy: &Policy) -> f64 {
        self.mixture()
            .iter()
            .zip(policy.probs())
            .map(|(m, p)| (m - p).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_mixture(&self, policy: &Policy) -> Result<()> {
        if self.arm_count() != policy.arm_count() {
            return Err(Error::DimensionMismatch {
                expected: policy.arm_count(),
                got: self.arm_count(),
            });
        }
        let err = self.mixture_error(policy);
        if err > CONTRAST_CENTER_TOL {
            return Err(Error::InvalidContrast(format!(
                "steering pair does not average to the policy (max deviation {err:e})"
            )));
        }
        Ok(())
    }
}

fn check_strength(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::InvalidContrast(format!(
            "tilt strength must lie in [0, 1], got {s}"
        )))
    }
}

fn tilt(probs: &[f64], values: &[f64], strength: f64) -> Vec<f64> {
    let mean = dot(probs, values);
    let spread = values
        .iter()
        .map(|v| (v - mean).abs())
        .fold(0.0, f64::max);
    if spread <= EQ_TOL {
        return vec![0.0; values.len()];
    }
    values
        .iter()
        .map(|v| strength * (v - mean) / spread)
        .collect()
}

/// The contrast vector `c` that `spec` assigns to `policy`.
pub fn contrast_vector(
    policy: &Policy,
    spec: &ContrastSpec,
    instance: &BanditInstance,
) -> Result<Vec<f64>> {
    let k = instance.arm_count();
    if policy.arm_count() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: policy.arm_count(),
        });
    }
    let probs = policy.probs();
    match spec {
        ContrastSpec::YTilt { strength } => {
            check_strength(*strength)?;
            Ok(tilt(probs, instance.behavior(), *strength))
        }
        ContrastSpec::RTilt { strength } => {
            check_strength(*strength)?;
            Ok(tilt(probs, &instance.scalarize(), *strength))
        }
        ContrastSpec::TwoSidedSplit => {
            let hi = instance.max_behavior_arms();
            let is_hi = |i: usize| hi.contains(&i);
            let mass_hi: f64 = hi.iter().map(|&i| probs[i]).sum();
            let mass_lo: f64 = (0..k).filter(|&i| !is_hi(i)).map(|i| probs[i]).sum();
            if mass_lo <= 0.0 || mass_hi <= 0.0 {
                return Ok(vec![0.0; k]);
            }
            let (s_hi, s_lo) = if mass_hi >= mass_lo {
                (mass_lo / mass_hi, 1.0)
            } else {
                (1.0, mass_hi / mass_lo)
            };
            Ok((0..k).map(|i| if is_hi(i) { s_hi } else { -s_lo }).collect())
        }
        ContrastSpec::Custom { contrast } => {
            if contrast.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: contrast.len(),
                });
            }
            if let Some(i) = contrast
                .iter()
                .position(|c| !c.is_finite() || c.abs() > 1.0 + EQ_TOL)
            {
                return Err(Error::InvalidContrast(format!(
                    "entry {} = {} is outside [-1, 1]",
                    i + 1,
                    contrast[i]
                )));
            }
            let centre = dot(probs, contrast);
            if centre.abs() > CONTRAST_CENTER_TOL {
                return Err(Error::InvalidContrast(format!(
                    "policy-weighted mean is {centre:e}, not 0"
                )));
            }
            Ok(contrast
                .iter()
                .map(|c| (c - centre).clamp(-1.0, 1.0))
                .collect())
        }
    }
}

/// Builds `pi_plus/minus = pi (1 +- c)` for the contrast `spec` selects.
pub fn make_pair(
    policy: &Policy,
    contrast: &ContrastSpec,
    instance: &BanditInstance,
) -> Result<SteeringPair> {
    let c = contrast_vector(policy, contrast, instance)?;
    let side = |sign: f64| -> Result<Policy> {
        let probs = policy
            .probs()
            .iter()
            .zip(&c)
            .map(|(p, ci)| (p * (1.0 + sign * ci)).max(0.0))
            .collect();
        Policy::from_simplex(probs)
    };
    SteeringPair::new(side(1.0)?, side(-1.0)?)
}

/// Distributional contrasts of a steering pair and its `gamma`-good certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteeringDiagnostics {
    pub target_arm: usize,
    pub group_size: usize,
    /// `d(i) = (pi_plus(i) - pi_minus(i)) / 2`.
    pub d: Vec<f64>,
    /// `rho(i) = d(i) / pi(i)`.
    pub rho: Vec<f64>,
    pub delta_x: f64,
    pub delta_y: f64,
    /// `delta_x + alpha delta_y`.
    pub delta: f64,
    /// `min_{i != i*} delta / (2G) (rho(i*) - rho(i))`.
    pub gamma_t: f64,
    /// The first `gamma`-good margin per arm; `None` for the target arm.
    pub cond1_margin: Vec<Option<f64>>,
    /// `delta_y (rho(i*) - rho(i)) >= 2 (y(i*) - y(i))`; trivially true for the target arm.
    pub cond2_satisfied: Vec<bool>,
    /// `lambda Delta_max / G`.
    pub gamma_cap: f64,
}

impl SteeringDiagnostics {
    /// True when the alignment inequality holds for every suboptimal arm.
    pub fn cond2_all(&self) -> bool {
        self.cond2_satisfied.iter().all(|&ok| ok)
    }
}

pub fn diagnostics(
    policy: &Policy,
    pair: &SteeringPair,
    instance: &BanditInstance,
    group_size: usize,
) -> Result<SteeringDiagnostics> {
    pair.check_mixture(policy)?;
    if group_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "group size must be at least 2, got {group_size}"
        )));
    }
    let summary = instance.summarize()?;
    let star = summary.target_arm;
    let k = instance.arm_count();
    let d = pair.half_difference();
    let rho: Vec<f64> = d
        .iter()
        .zip(policy.probs())
        .map(|(di, p)| if *p > 0.0 { di / p } else { 0.0 })
        .collect();
    let twice_diff = |values: &[f64]| 2.0 * dot(&d, values);
    let delta_x = twice_diff(instance.primary());
    let delta_y = twice_diff(instance.behavior());
    let delta = delta_x + instance.alpha() * delta_y;
    let g = group_size as f64;

    let y = instance.behavior();
    let mut cond1_margin = vec![None; k];
    let mut cond2_satisfied = vec![true; k];
    for i in summary.suboptimal_arms() {
        let lift = rho[star] - rho[i];
        cond1_margin[i] = Some(delta / (2.0 * g) * lift);
        cond2_satisfied[i] = delta_y * lift >= 2.0 * (y[star] - y[i]) - EQ_TOL;
    }
    let gamma_t = cond1_margin
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);

    Ok(SteeringDiagnostics {
        target_arm: star,
        group_size,
        d,
        rho,
        delta_x,
        delta_y,
        delta,
        gamma_t,
        cond1_margin,
        cond2_satisfied,
        gamma_cap: summary.conditioning * summary.gap_max / g,
    })
}

/// `gamma_t <= lambda Delta_max / G` (up to 1e-12).
pub fn gamma_cap_check(diag: &SteeringDiagnostics, summary: &ScalarizedSummary, group_size: usize) -> bool {
    diag.gamma_t <= summary.conditioning * summary.gap_max / group_size as f64 + EQ_TOL
}

/// Inputs shared by both iteration-complexity bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundInputs {
    /// `C_0 = sum_{i != i*} pi_0(i)/pi_0(i*) Delta_i`.
    pub c0: f64,
    pub eta: f64,
    pub group_size: usize,
    pub eps: f64,
    /// Certified margin; only read by [`bound_vspo`].
    pub gamma: f64,
    pub summary: ScalarizedSummary,
}

impl BoundInputs {
    pub fn new(
        initial: &Policy,
        summary: ScalarizedSummary,
        eta: f64,
        group_size: usize,
        eps: f64,
        gamma: f64,
    ) -> Result<Self> {
        if initial.arm_count() != summary.scalar_rewards.len() {
            return Err(Error::DimensionMismatch {
                expected: summary.scalar_rewards.len(),
                got: initial.arm_count(),
            });
        }
        if !initial.is_full_support() {
            return Err(Error::InvalidDistribution(
                "bounds need a strictly positive initial policy".into(),
            ));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
        }
        if group_size < 2 {
            return Err(Error::InvalidParameter(format!(
                "group size must be at least 2, got {group_size}"
            )));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        if !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma must be finite, got {gamma}")));
        }
        let star = summary.target_arm;
        let c0 = summary
            .suboptimal_arms()
            .map(|i| initial[i] / initial[star] * summary.gap(i))
            .sum();
        Ok(Self {
            c0,
            eta,
            group_size,
            eps,
            gamma,
            summary,
        })
    }

    fn log_ratio(&self) -> Option<f64> {
        if self.eps >= self.c0 {
            log::info!(
                "eps = {} is not below C0 = {}; the bound is 0",
                self.eps,
                self.c0
            );
            None
        } else {
            Some((self.c0 / self.eps).ln())
        }
    }

    fn keep(&self) -> f64 {
        1.0 - 1.0 / self.group_size as f64
    }
}

/// `Delta_max / (2 eta (1 - 1/G) Delta_min) * log(C0 / eps)`; 0 when `eps >= C0`.
pub fn bound_grpo(inputs: &BoundInputs) -> f64 {
    let Some(log_ratio) = inputs.log_ratio() else {
        return 0.0;
    };
    let s = &inputs.summary;
    s.gap_max / (2.0 * inputs.eta * inputs.keep() * s.gap_min) * log_ratio
}

/// `lambda Delta_max / (2 eta sqrt(1 - 1/G) ((1 - 1/G) Delta_min + gamma)) * log(C0 / eps)`.
///
/// Returns `+inf` when the contraction rate `(1 - 1/G) Delta_min + gamma`
/// is not positive, and 0 when `eps >= C0`.
pub fn bound_vspo(inputs: &BoundInputs) -> f64 {
    let Some(log_ratio) = inputs.log_ratio() else {
        return 0.0;
    };
    let s = &inputs.summary;
    let keep = inputs.keep();
    let rate = keep * s.gap_min + inputs.gamma;
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    s.conditioning * s.gap_max / (2.0 * inputs.eta * keep.sqrt() * rate) * log_ratio
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorollaryVerdict {
    /// `min(lambda, lambda^2 / 4) Delta_min`.
    pub threshold: f64,
    pub vspo_faster_guaranteed: bool,
}

/// Whether `gamma` is large enough for the VSPO bound to beat the GRPO bound.
pub fn corollary_compare(summary: &ScalarizedSummary, gamma: f64) -> CorollaryVerdict {
    let lambda = summary.conditioning;
    let threshold = lambda.min(lambda * lambda / 4.0) * summary.gap_min;
    CorollaryVerdict {
        threshold,
        vspo_faster_guaranteed: gamma > threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e3() -> (BanditInstance, Policy) {
        (
            BanditInstance::new(vec![0.6, 0.4, 0.5], vec![0.0, 0.0, 1.0], 1.0).unwrap(),
            Policy::new(vec![0.3, 0.2, 0.5]).unwrap(),
        )
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (u, v) in a.iter().zip(b) {
            assert!((u - v).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn zero_strength_tilt_is_trivial() {
        let (inst, pi) = e3();
        for spec in [ContrastSpec::YTilt { strength: 0.0 }, ContrastSpec::RTilt { strength: 0.0 }] {
            let pair = make_pair(&pi, &spec, &inst).unwrap();
            assert_eq!(pair.plus, pi);
            assert_eq!(pair.minus, pi);
        }
    }

    #[test]
    fn full_y_tilt_on_uniform() {
        let inst = BanditInstance::new(vec![1.0, 0.5, 0.0], vec![0.0, 0.5, 1.0], 2.0).unwrap();
        let pi = Policy::uniform(3).unwrap();
        let spec = ContrastSpec::YTilt { strength: 1.0 };
        close(&contrast_vector(&pi, &spec, &inst).unwrap(), &[-1.0, 0.0, 1.0], 1e-15);
        let pair = make_pair(&pi, &spec, &inst).unwrap();
        close(pair.plus.probs(), &[0.0, 1.0 / 3.0, 2.0 / 3.0], 1e-15);
        close(pair.minus.probs(), &[2.0 / 3.0, 1.0 / 3.0, 0.0], 1e-15);
    }

    #[test]
    fn split_on_e3() {
        let (inst, pi) = e3();
        let pair = make_pair(&pi, &ContrastSpec::TwoSidedSplit, &inst).unwrap();
        close(pair.plus.probs(), &[0.0, 0.0, 1.0], 1e-15);
        close(pair.minus.probs(), &[0.6, 0.4, 0.0], 1e-15);
    }

    #[test]
    fn split_saturates_on_heavy_side() {
        let (inst, _) = e3();
        let pi = Policy::new(vec![0.1, 0.1, 0.8]).unwrap();
        let c = contrast_vector(&pi, &ContrastSpec::TwoSidedSplit, &inst).unwrap();
        close(&c, &[-1.0, -1.0, 0.25], 1e-15);
        let pi = Policy::new(vec![0.5, 0.3, 0.2]).unwrap();
        let c = contrast_vector(&pi, &ContrastSpec::TwoSidedSplit, &inst).unwrap();
        close(&c, &[-0.25, -0.25, 1.0], 1e-15);
    }

    #[test]
    fn custom_contrast_validation() {
        let (inst, pi) = e3();
        let bad_range = ContrastSpec::Custom { contrast: vec![-1.5, 0.0, 0.9] };
        assert!(matches!(make_pair(&pi, &bad_range, &inst), Err(Error::InvalidContrast(_))));
        let off_centre = ContrastSpec::Custom { contrast: vec![0.1, 0.1, 0.1] };
        assert!(matches!(make_pair(&pi, &off_centre, &inst), Err(Error::InvalidContrast(_))));
        let ok = ContrastSpec::Custom { contrast: vec![-1.0, -1.0, 1.0] };
        let pair = make_pair(&pi, &ok, &inst).unwrap();
        assert!(pair.mixture_error(&pi) < 1e-15);
    }

    #[test]
    fn e3_diagnostics() {
        let (inst, pi) = e3();
        let pair = make_pair(&pi, &ContrastSpec::TwoSidedSplit, &inst).unwrap();
        let diag = diagnostics(&pi, &pair, &inst, 2).unwrap();
        assert!((diag.delta_y - 1.0).abs() < 1e-12);
        assert!((diag.delta_x + 0.02).abs() < 1e-12);
        assert!((diag.delta - 0.98).abs() < 1e-12);
        assert!((diag.gamma_t - 0.49).abs() < 1e-12);
        assert!(diag.cond2_all());
        assert!((diag.gamma_cap - 0.6).abs() < 1e-12);
        assert_eq!(diag.cond1_margin[2], None);
        assert!(gamma_cap_check(&diag, &inst.summarize().unwrap(), 2));
    }

    #[test]
    fn zero_contrast_diagnostics() {
        let (inst, pi) = e3();
        let diag = diagnostics(&pi, &SteeringPair::zero_contrast(&pi), &inst, 2).unwrap();
        assert!(diag.d.iter().all(|&d| d == 0.0));
        assert_eq!(diag.gamma_t, 0.0);
        assert_eq!(diag.cond2_satisfied, vec![false, false, true]);
        assert!(gamma_cap_check(&diag, &inst.summarize().unwrap(), 2));

        let flat = BanditInstance::new(vec![1.0, 0.0], vec![0.5, 0.5], 1.0).unwrap();
        let pi = Policy::uniform(2).unwrap();
        let diag = diagnostics(&pi, &SteeringPair::zero_contrast(&pi), &flat, 4).unwrap();
        assert!(diag.cond2_all());
    }

    #[test]
    fn non_gamma_good_configuration() {
        let inst = BanditInstance::new(vec![1.0, 0.5, 0.0], vec![0.0, 0.5, 1.0], 2.0).unwrap();
        let pi = Policy::uniform(3).unwrap();
        let pair = make_pair(&pi, &ContrastSpec::YTilt { strength: 1.0 }, &inst).unwrap();
        let diag = diagnostics(&pi, &pair, &inst, 4).unwrap();
        assert!((diag.delta_y - 2.0 / 3.0).abs() < 1e-12);
        assert!((diag.delta_x + 2.0 / 3.0).abs() < 1e-12);
        assert!((diag.delta - 2.0 / 3.0).abs() < 1e-12);
        assert!((diag.gamma_t - 1.0 / 12.0).abs() < 1e-12);
        assert!(!diag.cond2_satisfied[0]);
    }

    #[test]
    fn diagnostics_rejects_foreign_pair() {
        let (inst, pi) = e3();
        let other = Policy::uniform(3).unwrap();
        let pair = SteeringPair::zero_contrast(&other);
        assert!(matches!(diagnostics(&pi, &pair, &inst, 2), Err(Error::InvalidContrast(_))));
    }

    fn e3_inputs(gamma: f64, eta: f64, eps: f64) -> BoundInputs {
        let (inst, pi) = e3();
        BoundInputs::new(&pi, inst.summarize().unwrap(), eta, 2, eps, gamma).unwrap()
    }

    #[test]
    fn grpo_bound_on_e3() {
        let inputs = e3_inputs(0.49, 1.0, 0.01);
        assert!((inputs.c0 - 0.98).abs() < 1e-12);
        let expected = 1.1 / 0.9 * 98f64.ln();
        assert!((bound_grpo(&inputs) - expected).abs() < 1e-12);
        assert!((bound_grpo(&inputs) - 5.603849).abs() < 1e-6);
        let doubled = e3_inputs(0.49, 2.0, 0.01);
        assert!((bound_grpo(&doubled) - bound_grpo(&inputs) / 2.0).abs() < 1e-12);
        assert_eq!(bound_grpo(&e3_inputs(0.49, 1.0, inputs.c0)), 0.0);
        assert_eq!(bound_vspo(&e3_inputs(0.49, 1.0, 5.0)), 0.0);
    }

    #[test]
    fn vspo_bound_on_e3() {
        let inputs = e3_inputs(0.49, 1.0, 0.01);
        let expected = 1.2 / (2.0 * 0.5f64.sqrt() * 0.94) * 98f64.ln();
        assert!((bound_vspo(&inputs) - expected).abs() < 1e-12);
        assert!((bound_vspo(&inputs) - 4.138802).abs() < 1e-6);

        let zero = e3_inputs(0.0, 1.0, 0.01);
        let lambda = zero.summary.conditioning;
        let reduced = lambda * bound_grpo(&zero) / 0.5f64.sqrt();
        assert!((bound_vspo(&zero) - reduced).abs() < 1e-12);

        assert!(bound_vspo(&e3_inputs(0.6, 1.0, 0.01)) < bound_vspo(&inputs));
        assert_eq!(bound_vspo(&e3_inputs(-1.0, 1.0, 0.01)), f64::INFINITY);
    }

    #[test]
    fn corollary_on_e3() {
        let (inst, _) = e3();
        let s = inst.summarize().unwrap();
        let v = corollary_compare(&s, 0.49);
        let expected = (1.2f64 / 1.1).powi(2) / 4.0 * 0.9;
        assert!((v.threshold - expected).abs() < 1e-12);
        assert!((v.threshold - 0.267769).abs() < 1e-6);
        assert!(v.vspo_faster_guaranteed);
        assert!(!corollary_compare(&s, 0.0).vspo_faster_guaranteed);
    }

    #[test]
    fn contrast_spec_json_shape() {
        let spec: ContrastSpec = serde_json::from_str(r#"{"kind":"y_tilt","strength":0.5}"#).unwrap();
        assert_eq!(spec, ContrastSpec::YTilt { strength: 0.5 });
        let spec: ContrastSpec = serde_json::from_str(r#"{"kind":"two_sided_split"}"#).unwrap();
        assert_eq!(spec, ContrastSpec::TwoSidedSplit);
        assert!(serde_json::from_str::<ContrastSpec>(r#"{"kind":"y_tilt","strength":0.5,"x":1}"#).is_err());
    }
}
