//! Hyperparameter sweeps over `(β, tolerances)` and Pareto filtering of the
//! resulting `(error, fairness)` points. Both coordinates are minimized.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{FaroError, Result};
use crate::fairness::{self, ConstraintSpec, Family};
use crate::policy::{self, FinitePolicy, FiniteWorld};
use crate::proxygda::{self, SolverConfig};
use crate::reward_model::{self, Arch, RewardParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub betas: Vec<f64>,
    pub tolerance_sets: Vec<Vec<f64>>,
    pub family: Family,
    #[serde(rename = "R")]
    pub dual_bound: f64,
    pub arch: Arch,
    pub solver: SolverConfig,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.tolerance_sets.is_empty() {
            return Err(FaroError::validation("tolerance_sets", "must be nonempty"));
        }
        if self.betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(FaroError::validation("betas", "every beta must be finite and > 0"));
        }
        self.solver.validate()
    }

    pub fn spec(&self, tol_index: usize) -> ConstraintSpec {
        ConstraintSpec {
            family: self.family,
            tolerances: self.tolerance_sets[tol_index].clone(),
            dual_bound: self.dual_bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    /// `None` in reward-only mode.
    pub beta: Option<f64>,
    pub tolerance_index: usize,
    pub error: f64,
    pub fairness: f64,
    pub dominated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub beta: Option<f64>,
    pub tolerance_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<ParetoPoint>,
    pub failures: Vec<CellFailure>,
}

/// Trains once per tolerance set (in parallel on `jobs` threads), then
/// evaluates every `β` against the world. Error is `1 − P_π(A)` and fairness
/// is `Δ(π)`. Without a world the sweep runs in reward-only mode: one point
/// per tolerance set with error = NLL and fairness = true violation.
/// Failing cells are recorded and the sweep continues.
pub fn sweep(
    grid: &SweepGrid,
    data: &Dataset,
    world: Option<(&FiniteWorld, &FinitePolicy)>,
    jobs: usize,
) -> Result<SweepResult> {
    grid.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| FaroError::validation("jobs", e.to_string()))?;
    let trained: Vec<Result<RewardParams>> = pool.install(|| {
        (0..grid.tolerance_sets.len())
            .into_par_iter()
            .map(|ti| {
                let spec = grid.spec(ti);
                let state = proxygda::run(&grid.solver, data, &spec, grid.arch)?;
                proxygda::averaged_params(&state, grid.arch)
            })
            .collect()
    });

    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (ti, params) in trained.iter().enumerate() {
        let params = match params {
            Ok(p) => p,
            Err(e) => {
                let betas: Vec<Option<f64>> = match world {
                    Some(_) => grid.betas.iter().map(|&b| Some(b)).collect(),
                    None => vec![None],
                };
                for beta in betas {
                    failures.push(CellFailure {
                        beta,
                        tolerance_index: ti,
                        message: e.to_string(),
                    });
                }
                continue;
            }
        };
        match world {
            Some((w, pi_ref)) => {
                for &beta in &grid.betas {
                    let cell = policy::gibbs_policy(params, w, pi_ref, beta)
                        .and_then(|pi| Ok((1.0 - policy::event_prob(&pi, w), policy::policy_violation(&pi, w)?)));
                    push_cell(&mut points, &mut failures, Some(beta), ti, cell);
                }
            }
            None => {
                let cell = reward_model::nll(params, data)
                    .and_then(|e| Ok((e, fairness::true_violation(params, data, grid.family)?)));
                push_cell(&mut points, &mut failures, None, ti, cell);
            }
        }
    }
    mark_dominated(&mut points);
    Ok(SweepResult { points, failures })
}

fn push_cell(
    points: &mut Vec<ParetoPoint>,
    failures: &mut Vec<CellFailure>,
    beta: Option<f64>,
    tolerance_index: usize,
    cell: Result<(f64, f64)>,
) {
    match cell {
        Ok((error, fairness)) if error.is_finite() && fairness.is_finite() => points.push(ParetoPoint {
            beta,
            tolerance_index,
            error: error.max(0.0),
            fairness,
            dominated: false,
        }),
        Ok(_) => failures.push(CellFailure {
            beta,
            tolerance_index,
            message: "non-finite objective".into(),
        }),
        Err(e) => failures.push(CellFailure {
            beta,
            tolerance_index,
            message: e.to_string(),
        }),
    }
}

fn mark_dominated(points: &mut [ParetoPoint]) {
    let coords: Vec<(f64, f64)> = points.iter().map(|p| (p.error, p.fairness)).collect();
    let keep = non_dominated(&coords);
    for p in points.iter_mut() {
        p.dominated = true;
    }
    for i in keep {
        points[i].dominated = false;
    }
}

/// Indices of points not weakly dominated by any other, in increasing order.
/// Exact duplicates are all kept.
///
/// Sorting by `(e, f)` lets each equal-`e` block be decided from its own
/// minimum `f` and the best `f` among strictly smaller `e`.
pub fn non_dominated(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .0
            .total_cmp(&points[b].0)
            .then(points[a].1.total_cmp(&points[b].1))
    });
    let mut keep = Vec::new();
    let mut best_prev = f64::INFINITY;
    let mut start = 0;
    while start < order.len() {
        let e = points[order[start]].0;
        let mut end = start;
        while end < order.len() && points[order[end]].0 == e {
            end += 1;
        }
        let f_min = points[order[start]].1;
        for &i in &order[start..end] {
            let f = points[i].1;
            if f <= f_min && best_prev > f {
                keep.push(i);
            }
        }
        best_prev = best_prev.min(f_min);
        start = end;
    }
    keep.sort_unstable();
    keep
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarizationEntry {
    pub alpha: f64,
    pub minimizer: usize,
    pub value: f64,
    pub in_frontier: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarizationReport {
    pub entries: Vec<ScalarizationEntry>,
    pub all_in_frontier: bool,
}

/// For each `α ∈ (0,1)`, checks the first minimizer of `αe + (1−α)f` lies in
/// the non-dominated set.
pub fn scalarization_check(points: &[(f64, f64)], alphas: &[f64]) -> Result<ScalarizationReport> {
    if points.is_empty() {
        return Err(FaroError::EmptyInput("points"));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(FaroError::validation("alpha", format!("{a} is outside (0, 1)")));
    }
    let frontier = non_dominated(points);
    let entries: Vec<ScalarizationEntry> = alphas
        .iter()
        .map(|&alpha| {
            let (minimizer, value) = points
                .iter()
                .map(|&(e, f)| alpha * e + (1.0 - alpha) * f)
                .enumerate()
                .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best });
            ScalarizationEntry {
                alpha,
                minimizer,
                value,
                in_frontier: frontier.binary_search(&minimizer).is_ok(),
            }
        })
        .collect();
    Ok(ScalarizationReport {
        all_in_frontier: entries.iter().all(|e| e.in_frontier),
        entries,
    })
}

/// `frontier.csv`: one row per point, plot-ready.
pub fn write_frontier_csv<W: Write>(result: &SweepResult, grid: &SweepGrid, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["beta", "tolerance_index", "tolerances", "error", "fairness", "dominated"])?;
    for p in &result.points {
        let tols = grid.tolerance_sets[p.tolerance_index]
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            p.beta.map(|b| b.to_string()).unwrap_or_default(),
            p.tolerance_index.to_string(),
            tols,
            p.error.to_string(),
            p.fairness.to_string(),
            p.dominated.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_is_its_own_frontier() {
        assert_eq!(non_dominated(&[(0.3, 0.4)]), vec![0]);
    }

    #[test]
    fn hand_triple() {
        let pts = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        assert_eq!(non_dominated(&pts), vec![0, 1]);
        let r = scalarization_check(&pts, &[0.5]).unwrap();
        assert!(r.all_in_frontier);
    }

    #[test]
    fn ties_and_duplicates() {
        let pts = [(0.5, 0.5), (0.5, 0.5), (0.5, 0.7), (0.2, 0.9), (0.9, 0.5)];
        assert_eq!(non_dominated(&pts), vec![0, 1, 3]);
        let same = [(0.1, 0.1); 4];
        assert_eq!(non_dominated(&same), vec![0, 1, 2, 3]);
        assert!(scalarization_check(&same, &[0.1, 0.9]).unwrap().all_in_frontier);
    }

    #[test]
    fn alpha_must_be_interior() {
        assert!(scalarization_check(&[(0.0, 0.0)], &[0.0]).is_err());
        assert!(scalarization_check(&[(0.0, 0.0)], &[1.0]).is_err());
        assert!(scalarization_check(&[], &[0.5]).is_err());
    }
}
