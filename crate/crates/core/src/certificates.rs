//! Fairness certificates for trained reward models.
//!
//! The certified slack combines the inner-loop residual `ρ`, the dual regret
//! `R·G·√m/√T` and a sampling term `√(ln(1/δ)/n_min)` whose constant is
//! fixed to 1. Every input is carried in the output so the bound can be
//! recomputed by hand.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{FaroError, Result};
use crate::fairness::{self, ConstraintSpec, Family};
use crate::proxygda::SolverState;
use crate::reward_model::{Arch, RewardParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    #[serde(rename = "epsilon_T")]
    pub epsilon_t: f64,
    pub stat_term: f64,
}

/// `ε_T = ρ + R·G·√m/√T` and `√(ln(1/δ)/n_min)`.
pub fn slack_bound(rho: f64, dual_bound: f64, g: f64, m: usize, t: usize, n_min: usize, delta: f64) -> Result<Slack> {
    if t == 0 {
        return Err(FaroError::validation("T", "must be >= 1"));
    }
    if n_min == 0 {
        return Err(FaroError::validation("n_min", "must be >= 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(FaroError::validation("delta", "must lie in (0, 1)"));
    }
    for (name, v) in [("rho", rho), ("R", dual_bound), ("G", g)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(FaroError::validation(name, "must be finite and >= 0"));
        }
    }
    Ok(Slack {
        epsilon_t: rho + dual_bound * g * (m as f64).sqrt() / (t as f64).sqrt(),
        stat_term: ((1.0 / delta).ln() / n_min as f64).sqrt(),
    })
}

/// `ε_T` for a finished run, using the largest constraint norm seen during it.
pub fn epsilon_from_state(state: &SolverState) -> Result<f64> {
    Ok(slack_bound(
        state.rho_estimate,
        state.dual_bound,
        state.g_estimate,
        state.n_constraints,
        state.outer_iters,
        1,
        0.5,
    )?
    .epsilon_t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub family: Family,
    #[serde(rename = "epsilon_T")]
    pub epsilon_t: f64,
    pub stat_term: f64,
    pub delta: f64,
    pub measured_violation: f64,
    pub max_tolerance: f64,
    pub pass: bool,
    pub rho: f64,
    #[serde(rename = "R")]
    pub dual_bound: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub m: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub n_min: usize,
}

impl Certificate {
    pub fn threshold(&self) -> f64 {
        self.max_tolerance + self.epsilon_t + self.stat_term
    }
}

/// Certificate for explicit parameters and solver diagnostics.
#[allow(clippy::too_many_arguments)]
pub fn certify_params(
    params: &RewardParams,
    eval_data: &Dataset,
    spec: &ConstraintSpec,
    rho: f64,
    g: f64,
    t: usize,
    delta: f64,
) -> Result<Certificate> {
    spec.validate(eval_data.layout())?;
    let n_min = eval_data.n_min().unwrap_or(0);
    if n_min == 0 {
        return Err(FaroError::EmptyCell("evaluation data has an empty group".into()));
    }
    let m = spec.n_constraints(eval_data.layout());
    let slack = slack_bound(rho, spec.dual_bound, g, m, t, n_min, delta)?;
    let measured = fairness::true_violation(params, eval_data, spec.family)?;
    let max_tolerance = spec.max_tolerance();
    Ok(Certificate {
        family: spec.family,
        epsilon_t: slack.epsilon_t,
        stat_term: slack.stat_term,
        delta,
        measured_violation: measured,
        max_tolerance,
        pass: measured <= max_tolerance + slack.epsilon_t + slack.stat_term,
        rho,
        dual_bound: spec.dual_bound,
        g,
        m,
        t,
        n_min,
    })
}

/// Audits the averaged iterate of `state` on `eval_data`.
pub fn verify_certificate(
    state: &SolverState,
    arch: Arch,
    eval_data: &Dataset,
    spec: &ConstraintSpec,
    delta: f64,
) -> Result<Certificate> {
    let params = RewardParams::new(arch, state.phi_bar.clone())?;
    certify_params(
        &params,
        eval_data,
        spec,
        state.rho_estimate,
        state.g_estimate,
        state.outer_iters,
        delta,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairBound {
    pub i: usize,
    pub j: usize,
    pub stratum: usize,
    pub gap: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `|q_i − q_j| ≤ γ_i + γ_j + 2ε_T` for every unordered group pair and stratum.
pub fn groupwise_bounds(
    params: &RewardParams,
    data: &Dataset,
    spec: &ConstraintSpec,
    epsilon_t: f64,
) -> Result<Vec<PairBound>> {
    spec.validate(data.layout())?;
    let stats = fairness::proxy_for(params, data, spec.family)?;
    let k_card = data.layout().unrestricted_card;
    let mut out = Vec::new();
    for k in 0..stats.n_strata {
        for i in 0..stats.n_groups {
            for j in i + 1..stats.n_groups {
                let (Some(a), Some(b)) = (stats.get(i, k), stats.get(j, k)) else {
                    continue;
                };
                let gap = (a - b).abs();
                let bound = spec.tolerance(i, k, k_card) + spec.tolerance(j, k, k_card) + 2.0 * epsilon_t;
                out.push(PairBound {
                    i,
                    j,
                    stratum: k,
                    gap,
                    bound,
                    holds: gap <= bound,
                });
            }
        }
    }
    Ok(out)
}
