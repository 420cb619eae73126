//! Proxy-Lagrangian gradient descent–ascent.
//!
//! Each outer round re-initializes the primal parameters, minimizes the
//! Lagrangian `L(φ) + λᵀc(φ)` by fixed-step gradient descent until the
//! relative change in its value drops below `eps_rel`, then takes a
//! projected ascent step on `λ ∈ [0, R]^m`. The averaged primal iterate is
//! returned together with the diagnostics needed by a certificate.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{FaroError, Result};
use crate::fairness::{self, ConstraintEval, ConstraintSpec, Family};
use crate::numeric::{norm2, stable_sum};
use crate::reward_model::{self, uniform_weights, Arch, LossValue, RewardParams};
use crate::rng::{self, Stream};

/// Consecutive loss increases tolerated before the inner loop gives up.
pub const DIVERGENCE_PATIENCE: usize = 10;
/// Random parameter draws used to estimate `G` before the first round.
pub const PREPASS_DRAWS: usize = 10;

/// A smooth loss with a vector of differentiable constraints `c(θ) ≤ 0`.
pub trait ConstrainedObjective {
    fn n_params(&self) -> usize;

    fn n_constraints(&self) -> usize;

    /// Starting point of an outer round.
    fn init_params(&self, rng: &mut ChaCha20Rng) -> Vec<f64>;

    /// A broad random draw used by the `G` pre-pass.
    fn random_params(&self, rng: &mut ChaCha20Rng) -> Vec<f64> {
        uniform_weights(self.n_params(), 1.0, rng)
    }

    fn loss_and_grad(&self, params: &[f64]) -> Result<LossValue>;

    fn constraints(&self, params: &[f64], with_jacobian: bool) -> Result<ConstraintEval>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualStep {
    /// `R√m / (G√T)` with `G` from the pre-pass.
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DualStepRepr {
    Fixed(f64),
    Named(String),
}

impl Serialize for DualStep {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            DualStep::Auto => DualStepRepr::Named("auto".into()).serialize(s),
            DualStep::Fixed(v) => DualStepRepr::Fixed(v).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for DualStep {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match DualStepRepr::deserialize(d)? {
            DualStepRepr::Fixed(v) => Ok(DualStep::Fixed(v)),
            DualStepRepr::Named(s) if s == "auto" => Ok(DualStep::Auto),
            DualStepRepr::Named(s) => Err(serde::de::Error::custom(format!(
                "eta_lambda must be a number or \"auto\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Outer rounds `T`.
    pub outer_iters: usize,
    pub eta_phi: f64,
    pub eta_lambda: DualStep,
    pub eps_rel: f64,
    pub max_inner: usize,
    pub seed: u64,
    /// Start each round from the previous round's solution.
    #[serde(default)]
    pub warm_start: bool,
    /// Keep `λ ≡ 0`: plain unconstrained training.
    #[serde(default)]
    pub freeze_dual: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            outer_iters: 64,
            eta_phi: 0.5,
            eta_lambda: DualStep::Auto,
            eps_rel: 1e-9,
            max_inner: 20_000,
            seed: 0,
            warm_start: false,
            freeze_dual: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_iters == 0 {
            return Err(FaroError::validation("outer_iters", "T must be >= 1"));
        }
        if !(self.eta_phi > 0.0 && self.eta_phi.is_finite()) {
            return Err(FaroError::validation("eta_phi", "must be finite and > 0"));
        }
        if let DualStep::Fixed(v) = self.eta_lambda {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FaroError::validation("eta_lambda", "must be finite and > 0"));
            }
        }
        if !(self.eps_rel > 0.0 && self.eps_rel < 1.0) {
            return Err(FaroError::validation("eps_rel", "must lie in (0, 1)"));
        }
        if self.max_inner == 0 {
            return Err(FaroError::validation("max_inner", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// Dual variables used during this round.
    pub lambda: Vec<f64>,
    /// Constraint vector at the round's primal solution.
    pub constraints: Vec<f64>,
    /// `|q_i − q_anchor|` recovered from each signed pair.
    pub anchored_gaps: Vec<f64>,
    /// Unpenalized loss (NLL) at the round's primal solution.
    pub nll: f64,
    pub inner_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    /// Dual variables after the last ascent step.
    pub lambda: Vec<f64>,
    pub phi_history: Vec<Vec<f64>>,
    pub phi_bar: Vec<f64>,
    pub inner_steps_used: Vec<usize>,
    /// Largest `‖∇L‖·η_φ` at the end of any inner loop. Diagnostic only.
    pub rho_estimate: f64,
    /// Largest `‖c(φ^(t))‖₂` observed over the run.
    pub g_estimate: f64,
    /// Largest `‖c‖₂` over the random pre-pass draws.
    pub g_prepass: f64,
    pub eta_lambda: f64,
    pub outer_iters: usize,
    pub n_constraints: usize,
    pub dual_bound: f64,
    pub rounds: Vec<RoundRecord>,
}

impl SolverState {
    pub fn last_phi(&self) -> &[f64] {
        self.phi_history.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Projected dual ascent: `clamp(λ + η c, 0, R)` componentwise.
pub fn dual_step(lambda: &[f64], c: &[f64], eta_lambda: f64, dual_bound: f64) -> Vec<f64> {
    lambda
        .iter()
        .zip(c)
        .map(|(&l, &cj)| {
            let v = l + eta_lambda * cj;
            if v.is_nan() {
                0.0
            } else {
                v.clamp(0.0, dual_bound)
            }
        })
        .collect()
}

fn finite_norm(c: &[f64]) -> f64 {
    norm2(&c.iter().copied().filter(|v| v.is_finite()).collect::<Vec<_>>())
}

fn pair_gaps(c: &[f64]) -> Vec<f64> {
    c.chunks(2)
        .map(|pair| match pair {
            [up, down] => 0.5 * (up - down).abs(),
            [single] => single.abs(),
            _ => unreachable!(),
        })
        .collect()
}

/// Lagrangian value and gradient. Constraints are only evaluated when some
/// `λ_j > 0`, and only those terms contribute.
fn lagrangian_eval<O: ConstrainedObjective + ?Sized>(obj: &O, params: &[f64], lambda: &[f64]) -> Result<LossValue> {
    let mut lv = obj.loss_and_grad(params)?;
    if lambda.iter().any(|&l| l > 0.0) {
        let ce = obj.constraints(params, true)?;
        let mut terms = Vec::new();
        for (j, &l) in lambda.iter().enumerate() {
            if l > 0.0 {
                terms.push(l * ce.values[j]);
                for (g, dc) in lv.grad.iter_mut().zip(&ce.jacobian[j]) {
                    *g += l * dc;
                }
            }
        }
        lv.nll += stable_sum(&terms);
    }
    Ok(lv)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    pub phi: Vec<f64>,
    pub steps: usize,
    /// Final gradient norm times `η_φ`.
    pub rho: f64,
    pub lagrangian: f64,
}

/// Fixed-step gradient descent on the Lagrangian for fixed `λ`.
///
/// Stops when `|L_k − L_{k−1}| / max(|L_{k−1}|, 1e-12) ≤ eps_rel` or after
/// `max_inner` steps; fails after [`DIVERGENCE_PATIENCE`] consecutive increases.
pub fn inner_minimize<O: ConstrainedObjective + ?Sized>(
    obj: &O,
    phi0: Vec<f64>,
    lambda: &[f64],
    cfg: &SolverConfig,
) -> Result<InnerResult> {
    let mut phi = phi0;
    let mut cur = lagrangian_eval(obj, &phi, lambda)?;
    let mut steps = 0;
    let mut increases = 0;
    while steps < cfg.max_inner {
        let next: Vec<f64> = phi.iter().zip(&cur.grad).map(|(p, g)| p - cfg.eta_phi * g).collect();
        let eval = lagrangian_eval(obj, &next, lambda)?;
        steps += 1;
        if !eval.nll.is_finite() {
            return Err(FaroError::Divergence(increases + 1));
        }
        if eval.nll > cur.nll {
            increases += 1;
            if increases >= DIVERGENCE_PATIENCE {
                return Err(FaroError::Divergence(increases));
            }
        } else {
            increases = 0;
        }
        let rel = (eval.nll - cur.nll).abs() / cur.nll.abs().max(1e-12);
        phi = next;
        cur = eval;
        if rel <= cfg.eps_rel {
            break;
        }
    }
    Ok(InnerResult {
        rho: norm2(&cur.grad) * cfg.eta_phi,
        lagrangian: cur.nll,
        phi,
        steps,
    })
}

/// Runs the full primal–dual loop on an arbitrary objective.
pub fn run_objective<O: ConstrainedObjective + ?Sized>(obj: &O, cfg: &SolverConfig, dual_bound: f64) -> Result<SolverState> {
    cfg.validate()?;
    if !(dual_bound > 0.0 && dual_bound.is_finite()) {
        return Err(FaroError::validation("R", "dual bound must be finite and > 0"));
    }
    let m = obj.n_constraints();
    let t_total = cfg.outer_iters;

    let mut pre_rng = rng::stream(cfg.seed, Stream::DualPrepass);
    let mut g_prepass = 0.0f64;
    if m > 0 {
        for _ in 0..PREPASS_DRAWS {
            let theta = obj.random_params(&mut pre_rng);
            // Draws that hit an infeasible configuration (empty EO cell) are skipped.
            if let Ok(ce) = obj.constraints(&theta, false) {
                g_prepass = g_prepass.max(finite_norm(&ce.values));
            }
        }
    }
    let eta_lambda = match cfg.eta_lambda {
        DualStep::Fixed(v) => v,
        DualStep::Auto => {
            let g = if g_prepass > 0.0 { g_prepass } else { 1.0 };
            dual_bound * (m as f64).sqrt() / (g * (t_total as f64).sqrt())
        }
    };

    let mut init_rng = rng::stream(cfg.seed, Stream::Init);
    let mut lambda = vec![0.0; m];
    let mut phi_history = Vec::with_capacity(t_total);
    let mut phi_bar = vec![0.0; obj.n_params()];
    let mut rounds = Vec::with_capacity(t_total);
    let mut inner_steps_used = Vec::with_capacity(t_total);
    let mut rho_estimate = 0.0f64;
    let mut g_estimate = 0.0f64;

    for t in 1..=t_total {
        // Draw every round even when warm-starting so both modes share the stream.
        let fresh = obj.init_params(&mut init_rng);
        let phi0 = match (cfg.warm_start, phi_history.last()) {
            (true, Some(prev)) => Vec::clone(prev),
            _ => fresh,
        };
        let inner = inner_minimize(obj, phi0, &lambda, cfg)?;
        let c = if m > 0 {
            obj.constraints(&inner.phi, false)?.values
        } else {
            Vec::new()
        };
        g_estimate = g_estimate.max(finite_norm(&c));
        rho_estimate = rho_estimate.max(inner.rho);
        let nll = obj.loss_and_grad(&inner.phi)?.nll;

        rounds.push(RoundRecord {
            lambda: lambda.clone(),
            anchored_gaps: pair_gaps(&c),
            constraints: c.clone(),
            nll,
            inner_steps: inner.steps,
        });
        inner_steps_used.push(inner.steps);
        if !cfg.freeze_dual && m > 0 {
            lambda = dual_step(&lambda, &c, eta_lambda, dual_bound);
        }
        let w = 1.0 / t as f64;
        for (b, p) in phi_bar.iter_mut().zip(&inner.phi) {
            *b += (p - *b) * w;
        }
        phi_history.push(inner.phi);
    }

    Ok(SolverState {
        lambda,
        phi_history,
        phi_bar,
        inner_steps_used,
        rho_estimate,
        g_estimate,
        g_prepass,
        eta_lambda,
        outer_iters: t_total,
        n_constraints: m,
        dual_bound,
        rounds,
    })
}

/// FARO objective: Bradley–Terry NLL under anchored fairness constraints.
pub struct RewardObjective<'a> {
    data: &'a Dataset,
    spec: &'a ConstraintSpec,
    template: RewardParams,
}

impl<'a> RewardObjective<'a> {
    /// Validates the constraint set against the data; constraints that reference an
    /// empty group (or an empty CF cell) are rejected here.
    pub fn new(data: &'a Dataset, spec: &'a ConstraintSpec, arch: Arch) -> Result<Self> {
        spec.validate(data.layout())?;
        if arch.feature_dim() != data.dim() {
            return Err(FaroError::DimMismatch {
                what: "architecture feature dimension",
                expected: data.dim(),
                got: arch.feature_dim(),
            });
        }
        if data.is_empty() {
            return Err(FaroError::EmptyInput("training data"));
        }
        if spec.n_constraints(data.layout()) > 0 {
            let stats = fairness::group_stats(&RewardParams::zeros(arch), data, spec.family)?;
            for g in 0..stats.n_groups {
                let strata = if spec.family == Family::Cf { stats.n_strata } else { 1 };
                for k in 0..strata {
                    let count = if spec.family == Family::Cf {
                        stats.count(g, k)
                    } else {
                        (0..stats.n_strata).map(|s| stats.count(g, s)).sum()
                    };
                    if count == 0 {
                        return Err(FaroError::EmptyCell(format!(
                            "constraint references group {g}{} which has no training examples",
                            if spec.family == Family::Cf { format!(", U={k}") } else { String::new() }
                        )));
                    }
                }
            }
        }
        Ok(Self {
            data,
            spec,
            template: RewardParams::zeros(arch),
        })
    }

    fn params(&self, w: &[f64]) -> RewardParams {
        self.template.with_weights(w)
    }
}

impl ConstrainedObjective for RewardObjective<'_> {
    fn n_params(&self) -> usize {
        self.template.arch().n_params()
    }

    fn n_constraints(&self) -> usize {
        self.spec.n_constraints(self.data.layout())
    }

    fn init_params(&self, rng: &mut ChaCha20Rng) -> Vec<f64> {
        let arch = self.template.arch();
        match (arch, self.spec.family) {
            // All-zero weights predict Y=1 everywhere, leaving every EO (i, 0) cell empty.
            (Arch::Linear { d }, Family::Eo) => uniform_weights(arch.n_params(), 1.0 / ((2 * d) as f64).sqrt(), rng),
            _ => arch.init(rng),
        }
    }

    fn loss_and_grad(&self, params: &[f64]) -> Result<LossValue> {
        reward_model::nll_and_grad(&self.params(params), self.data, None)
    }

    fn constraints(&self, params: &[f64], with_jacobian: bool) -> Result<ConstraintEval> {
        let p = self.params(params);
        if with_jacobian {
            fairness::constraint_vector(&p, self.data, self.spec)
        } else {
            Ok(ConstraintEval {
                values: fairness::constraint_values(&p, self.data, self.spec)?,
                jacobian: Vec::new(),
            })
        }
    }
}

/// `L_NLL(φ) + λᵀc(φ)` for a reward model.
pub fn lagrangian(params: &RewardParams, lambda: &[f64], data: &Dataset, spec: &ConstraintSpec) -> Result<f64> {
    let obj = RewardObjective::new(data, spec, params.arch())?;
    if lambda.len() != obj.n_constraints() {
        return Err(FaroError::DimMismatch {
            what: "dual variables",
            expected: obj.n_constraints(),
            got: lambda.len(),
        });
    }
    Ok(lagrangian_eval(&obj, params.weights(), lambda)?.nll)
}

/// Lagrangian value and gradient for a reward model.
pub fn lagrangian_and_grad(params: &RewardParams, lambda: &[f64], data: &Dataset, spec: &ConstraintSpec) -> Result<LossValue> {
    let obj = RewardObjective::new(data, spec, params.arch())?;
    if lambda.len() != obj.n_constraints() {
        return Err(FaroError::DimMismatch {
            what: "dual variables",
            expected: obj.n_constraints(),
            got: lambda.len(),
        });
    }
    lagrangian_eval(&obj, params.weights(), lambda)
}

/// Trains a reward model with ProxyGDA.
pub fn run(cfg: &SolverConfig, data: &Dataset, spec: &ConstraintSpec, arch: Arch) -> Result<SolverState> {
    let obj = RewardObjective::new(data, spec, arch)?;
    run_objective(&obj, cfg, spec.dual_bound)
}

/// Averaged iterate as reward parameters.
pub fn averaged_params(state: &SolverState, arch: Arch) -> Result<RewardParams> {
    RewardParams::new(arch, state.phi_bar.clone())
}

/// Last primal iterate as reward parameters.
pub fn last_params(state: &SolverState, arch: Arch) -> Result<RewardParams> {
    RewardParams::new(arch, state.last_phi().to_vec())
}

/// Helper: a random `RewardParams` for tests and pre-passes.
pub fn random_reward_params<R: Rng>(arch: Arch, scale: f64, rng: &mut R) -> RewardParams {
    RewardParams::new(arch, uniform_weights(arch.n_params(), scale, rng)).expect("length matches")
}
