// SPDX-License-Identifier: MIT OR Apache-2.0

//! A-priori iteration bounds for one instance, start and contrast.

use serde::Serialize;

use crate::bandit::BanditInstance;
use crate::error::Result;
use crate::policy::Policy;
use crate::steering::{
    bound_grpo, bound_vspo, corollary_compare, diagnostics, make_pair, BoundInputs, ContrastSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub target_arm: usize,
    pub eta: f64,
    pub group_size: usize,
    pub eps: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    /// Conditioning constant `(D_x + alpha D_y) / Delta_max`.
    pub lambda: f64,
    pub gap_min: f64,
    pub gap_max: f64,
    /// `gamma_t` of the steering pair at the start policy.
    pub gamma_t: f64,
    pub gamma_cap: f64,
    /// Whether the alignment condition holds at the start policy.
    pub cond2_ok: bool,
    pub corollary_threshold: f64,
    pub t_grpo: f64,
    pub t_vspo: f64,
    /// `gamma_t > corollary_threshold` and the alignment condition holds.
    pub vspo_faster_guaranteed: bool,
}

/// Evaluates both bounds with the certificate of the start policy's pair.
pub fn compute_bounds(
    instance: &BanditInstance,
    initial: &Policy,
    contrast: &ContrastSpec,
    eta: f64,
    group_size: usize,
    eps: f64,
) -> Result<Certificate> {
    let summary = instance.summarize()?;
    let pair = make_pair(initial, contrast, instance)?;
    let diag = diagnostics(initial, &pair, instance, group_size)?;
    let inputs = BoundInputs::new(initial, summary.clone(), eta, group_size, eps, diag.gamma_t)?;
    let verdict = corollary_compare(&summary, diag.gamma_t);
    let cond2_ok = diag.cond2_all();
    Ok(Certificate {
        target_arm: summary.target_arm,
        eta,
        group_size,
        eps,
        c0: inputs.c0,
        lambda: summary.conditioning,
        gap_min: summary.gap_min,
        gap_max: summary.gap_max,
        gamma_t: diag.gamma_t,
        gamma_cap: diag.gamma_cap,
        cond2_ok,
        corollary_threshold: verdict.threshold,
        t_grpo: bound_grpo(&inputs),
        t_vspo: bound_vspo(&inputs),
        vspo_faster_guaranteed: verdict.vspo_faster_guaranteed && cond2_ok,
    })
}
