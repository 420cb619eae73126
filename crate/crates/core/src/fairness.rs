//! Differentiable group-fairness proxies and anchored constraints.
//!
//! A proxy `q` is the mean Bradley–Terry preference probability inside a
//! cell: a group (DP), a group and predicted label (EO), or a group and
//! unrestricted stratum (CF). Constraints compare every non-anchor group
//! with group 0, each `|q_0 − q_i| ≤ tol` becoming two signed entries.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeLayout, Dataset};
use crate::error::{FaroError, Result};
use crate::numeric::{sigmoid, Accumulator, VecAccumulator};
use crate::reward_model::{label_from_margin, RewardParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Dp,
    Eo,
    Cf,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Dp, Family::Eo, Family::Cf];

    /// Number of conditioning strata per group.
    pub fn n_strata(self, k: usize) -> usize {
        match self {
            Family::Dp => 1,
            Family::Eo => 2,
            Family::Cf => k,
        }
    }

    pub fn n_tolerances(self, p: usize, k: usize) -> usize {
        match self {
            Family::Dp | Family::Eo => p.saturating_sub(1),
            Family::Cf => p.saturating_sub(1) * k,
        }
    }

    /// Length of the signed anchored constraint vector.
    pub fn n_constraints(self, p: usize, k: usize) -> usize {
        2 * p.saturating_sub(1) * self.n_strata(k)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Dp => "dp",
            Family::Eo => "eo",
            Family::Cf => "cf",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub family: Family,
    /// γ_i / κ_i for groups `1..p` (DP, EO), or μ_ik group-major (CF).
    pub tolerances: Vec<f64>,
    /// Box bound on each dual variable.
    #[serde(rename = "R")]
    pub dual_bound: f64,
}

impl ConstraintSpec {
    pub fn uniform(family: Family, layout: &AttributeLayout, tol: f64, dual_bound: f64) -> Self {
        let n = family.n_tolerances(layout.n_groups(), layout.unrestricted_card);
        Self {
            family,
            tolerances: vec![tol; n],
            dual_bound,
        }
    }

    pub fn validate(&self, layout: &AttributeLayout) -> Result<()> {
        let p = layout.n_groups();
        let k = layout.unrestricted_card;
        let want = self.family.n_tolerances(p, k);
        if self.tolerances.len() != want {
            return Err(FaroError::validation(
                "tolerances",
                format!(
                    "{} needs {want} tolerances for p={p}, K={k}; got {}",
                    self.family,
                    self.tolerances.len()
                ),
            ));
        }
        if let Some(i) = self.tolerances.iter().position(|t| t.is_nan() || *t < 0.0) {
            return Err(FaroError::validation(format!("tolerances[{i}]"), "must be >= 0"));
        }
        if !(self.dual_bound > 0.0 && self.dual_bound.is_finite()) {
            return Err(FaroError::validation("R", "dual bound must be finite and > 0"));
        }
        Ok(())
    }

    pub fn n_constraints(&self, layout: &AttributeLayout) -> usize {
        self.family.n_constraints(layout.n_groups(), layout.unrestricted_card)
    }

    /// Tolerance of non-anchor group `group` in stratum `stratum`; the anchor's is 0.
    pub fn tolerance(&self, group: usize, stratum: usize, k: usize) -> f64 {
        if group == 0 {
            return 0.0;
        }
        match self.family {
            Family::Dp | Family::Eo => self.tolerances[group - 1],
            Family::Cf => self.tolerances[(group - 1) * k + stratum],
        }
    }

    pub fn max_tolerance(&self) -> f64 {
        self.tolerances.iter().copied().fold(0.0, f64::max)
    }
}

/// Per-cell proxy values; `None` marks an empty cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub family: Family,
    pub n_groups: usize,
    pub n_strata: usize,
    pub values: Vec<Option<f64>>,
    pub counts: Vec<usize>,
}

impl GroupStats {
    pub fn get(&self, group: usize, stratum: usize) -> Option<f64> {
        self.values[group * self.n_strata + stratum]
    }

    pub fn count(&self, group: usize, stratum: usize) -> usize {
        self.counts[group * self.n_strata + stratum]
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        for g in 0..self.n_groups {
            for k in 0..self.n_strata {
                if self.count(g, k) == 0 {
                    return Err(empty_cell_error(self.family, g, k));
                }
            }
        }
        Ok(())
    }

    /// `|q_ik − q_0k|` for every non-anchor group, group-major.
    pub fn anchored_gaps(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_groups.saturating_sub(1) * self.n_strata);
        for g in 1..self.n_groups {
            for k in 0..self.n_strata {
                match (self.get(g, k), self.get(0, k)) {
                    (Some(a), Some(b)) => out.push((a - b).abs()),
                    _ => out.push(f64::NAN),
                }
            }
        }
        out
    }

    /// Largest `|q_ik − q_jk|` over all group pairs and strata; empty cells skipped.
    pub fn max_pairwise_gap(&self) -> f64 {
        let mut best = 0.0f64;
        for k in 0..self.n_strata {
            let vals: Vec<f64> = (0..self.n_groups).filter_map(|g| self.get(g, k)).collect();
            if let (Some(lo), Some(hi)) = (
                vals.iter().copied().reduce(f64::min),
                vals.iter().copied().reduce(f64::max),
            ) {
                best = best.max(hi - lo);
            }
        }
        best
    }
}

fn empty_cell_error(family: Family, group: usize, stratum: usize) -> FaroError {
    match family {
        Family::Eo => FaroError::EoInfeasible {
            group,
            label: stratum as u8,
        },
        Family::Dp => FaroError::EmptyCell(format!("group {group} has no examples")),
        Family::Cf => FaroError::EmptyCell(format!("group {group} has no examples with U={stratum}")),
    }
}

/// Anchored constraint values and (optionally) their Jacobian, one row per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintEval {
    pub values: Vec<f64>,
    pub jacobian: Vec<Vec<f64>>,
}

/// Accumulates per-cell means of a probability and, optionally, its gradient.
/// Shared by reward-space and policy-space proxies.
pub(crate) struct CellAccumulator {
    family: Family,
    n_groups: usize,
    n_strata: usize,
    sums: Vec<Accumulator>,
    grads: Option<Vec<VecAccumulator>>,
    counts: Vec<usize>,
}

impl CellAccumulator {
    pub fn new(family: Family, n_groups: usize, n_strata: usize, grad_dim: Option<usize>) -> Self {
        let cells = n_groups * n_strata;
        Self {
            family,
            n_groups,
            n_strata,
            sums: vec![Accumulator::new(); cells],
            grads: grad_dim.map(|d| vec![VecAccumulator::new(d); cells]),
            counts: vec![0; cells],
        }
    }

    pub fn wants_grad(&self) -> bool {
        self.grads.is_some()
    }

    /// `prob_grad` is ∂prob/∂θ; required iff gradients were requested.
    pub fn add(&mut self, group: usize, stratum: usize, prob: f64, prob_grad: Option<&[f64]>) {
        let c = group * self.n_strata + stratum;
        self.sums[c].add(prob);
        self.counts[c] += 1;
        if let (Some(grads), Some(g)) = (self.grads.as_mut(), prob_grad) {
            grads[c].add_scaled(g, 1.0);
        }
    }

    pub fn finish(self) -> (GroupStats, Option<Vec<Vec<f64>>>) {
        let values = self
            .sums
            .iter()
            .zip(&self.counts)
            .map(|(s, &n)| (n > 0).then(|| s.value() / n as f64))
            .collect();
        let grads = self.grads.map(|gs| {
            gs.iter()
                .zip(&self.counts)
                .map(|(g, &n)| {
                    let v = g.values();
                    if n == 0 {
                        v
                    } else {
                        v.into_iter().map(|x| x / n as f64).collect()
                    }
                })
                .collect()
        });
        (
            GroupStats {
                family: self.family,
                n_groups: self.n_groups,
                n_strata: self.n_strata,
                values,
                counts: self.counts,
            },
            grads,
        )
    }
}

/// Expands cell statistics into the signed anchored constraint vector:
/// for each group `i ≥ 1` and stratum `k`, the pair
/// `(q_ik − q_0k − tol, q_0k − q_ik − tol)`.
pub(crate) fn anchored_constraints(
    stats: &GroupStats,
    cell_grads: Option<&[Vec<f64>]>,
    spec: &ConstraintSpec,
    k_card: usize,
) -> Result<ConstraintEval> {
    stats.require_nonempty()?;
    let m = 2 * stats.n_groups.saturating_sub(1) * stats.n_strata;
    let mut values = Vec::with_capacity(m);
    let mut jacobian = Vec::with_capacity(if cell_grads.is_some() { m } else { 0 });
    for g in 1..stats.n_groups {
        for k in 0..stats.n_strata {
            let tol = spec.tolerance(g, k, k_card);
            let diff = stats.get(g, k).unwrap() - stats.get(0, k).unwrap();
            values.push(diff - tol);
            values.push(-diff - tol);
            if let Some(grads) = cell_grads {
                let gi = &grads[g * stats.n_strata + k];
                let g0 = &grads[k];
                let up: Vec<f64> = gi.iter().zip(g0).map(|(a, b)| a - b).collect();
                let down: Vec<f64> = up.iter().map(|v| -v).collect();
                jacobian.push(up);
                jacobian.push(down);
            }
        }
    }
    Ok(ConstraintEval { values, jacobian })
}

fn check_params(params: &RewardParams, data: &Dataset) -> Result<()> {
    if params.arch().feature_dim() != data.dim() {
        return Err(FaroError::DimMismatch {
            what: "dataset feature dimension",
            expected: params.arch().feature_dim(),
            got: data.dim(),
        });
    }
    Ok(())
}

fn collect(params: &RewardParams, data: &Dataset, family: Family, with_grad: bool) -> Result<(GroupStats, Option<Vec<Vec<f64>>>)> {
    check_params(params, data)?;
    let k_card = data.layout().unrestricted_card;
    let n_params = params.weights().len();
    let mut acc = CellAccumulator::new(
        family,
        data.n_groups(),
        family.n_strata(k_card),
        with_grad.then_some(n_params),
    );
    let mut g = vec![0.0; n_params];
    for (i, ex) in data.examples().iter().enumerate() {
        let m = if acc.wants_grad() {
            params.margin_grad(ex, &mut g)
        } else {
            params.margin(ex)
        };
        let prob = sigmoid(m);
        let stratum = match family {
            Family::Dp => 0,
            Family::Eo => label_from_margin(m) as usize,
            Family::Cf => ex.u,
        };
        if acc.wants_grad() {
            let slope = prob * (1.0 - prob);
            g.iter_mut().for_each(|v| *v *= slope);
            acc.add(data.group_of(i), stratum, prob, Some(&g));
        } else {
            acc.add(data.group_of(i), stratum, prob, None);
        }
    }
    Ok(acc.finish())
}

/// Cell statistics without the non-empty requirement; empty cells are `None`.
pub fn group_stats(params: &RewardParams, data: &Dataset, family: Family) -> Result<GroupStats> {
    Ok(collect(params, data, family, false)?.0)
}

fn proxy(params: &RewardParams, data: &Dataset, family: Family) -> Result<GroupStats> {
    let stats = group_stats(params, data, family)?;
    stats.require_nonempty()?;
    Ok(stats)
}

/// `q^dp_i`: mean preference probability in group `i`.
pub fn proxy_dp(params: &RewardParams, data: &Dataset) -> Result<GroupStats> {
    proxy(params, data, Family::Dp)
}

/// `q^eo_iy`: mean preference probability in group `i` among examples whose
/// predicted label is `y`.
pub fn proxy_eo(params: &RewardParams, data: &Dataset) -> Result<GroupStats> {
    proxy(params, data, Family::Eo)
}

/// `q^cf_ik`: mean preference probability in group `i` with `U = k`.
pub fn proxy_cf(params: &RewardParams, data: &Dataset) -> Result<GroupStats> {
    proxy(params, data, Family::Cf)
}

pub fn proxy_for(params: &RewardParams, data: &Dataset, family: Family) -> Result<GroupStats> {
    proxy(params, data, family)
}

/// Signed anchored constraint vector with its Jacobian. EO labels are
/// recomputed from `params` but held fixed under differentiation.
pub fn constraint_vector(params: &RewardParams, data: &Dataset, spec: &ConstraintSpec) -> Result<ConstraintEval> {
    spec.validate(data.layout())?;
    let (stats, grads) = collect(params, data, spec.family, true)?;
    anchored_constraints(&stats, grads.as_deref(), spec, data.layout().unrestricted_card)
}

/// Constraint values only.
pub fn constraint_values(params: &RewardParams, data: &Dataset, spec: &ConstraintSpec) -> Result<Vec<f64>> {
    spec.validate(data.layout())?;
    let (stats, _) = collect(params, data, spec.family, false)?;
    Ok(anchored_constraints(&stats, None, spec, data.layout().unrestricted_card)?.values)
}

/// Un-anchored violation: the largest gap between any two groups, within
/// any stratum.
pub fn true_violation(params: &RewardParams, data: &Dataset, family: Family) -> Result<f64> {
    Ok(proxy(params, data, family)?.max_pairwise_gap())
}
