//! Fairness-constrained direct alignment on finite worlds.
//!
//! The policy is a softmax over the linear score `θ·ψ(x, a)` with
//! `ψ(x, a) = [a; x ⊙ a]`, and a frozen reference copy `θ_ref`. Implicit
//! rewards are `β·(log π_θ − log π_ref)`. DPO, a simplified KTO and an
//! exact-expectation GRPO loss are combined with policy-space fairness
//! proxies and trained with the same primal–dual solver as reward models.
//!
//! Interpretations:
//! - KTO uses `−log σ(±β·lr)` on single labelled actions, without the
//!   reference-point term.
//! - GRPO scores each context's candidate set by empirical win rate,
//!   standardizes within the set, and minimizes `−E_π[A] + β·KL`. Its fairness
//!   proxy is the DPO margin proxy over each group's preference pairs.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{group_tilt, ground_truth_weights, FLIP_RATE};
use crate::error::{FaroError, Result};
use crate::fairness::{anchored_constraints, CellAccumulator, ConstraintEval, ConstraintSpec, Family, GroupStats};
use crate::numeric::{dot, log_sigmoid, log_sum_exp, sigmoid, Accumulator, VecAccumulator};
use crate::policy::{FinitePolicy, FiniteWorld};
use crate::proxygda::{self, ConstrainedObjective, SolverConfig, SolverState};
use crate::reward_model::{label_from_margin, uniform_weights, LossValue};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dpo,
    Kto,
    Grpo,
}

/// A preference between two actions of one context (indices into the
/// context's action list).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaPair {
    pub context: usize,
    pub winner: usize,
    pub loser: usize,
}

/// A single action labelled desirable (1) or not (0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KtoExample {
    pub context: usize,
    pub action: usize,
    pub desirable: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignmentData {
    Pairs(Vec<DaPair>),
    Kto(Vec<KtoExample>),
}

/// Softmax policy over a finite world with a frozen reference.
#[derive(Debug, Clone)]
pub struct ToyPolicyModel {
    world: FiniteWorld,
    theta_ref: Vec<f64>,
    psi: Vec<Vec<Vec<f64>>>,
    ref_logp: Vec<Vec<f64>>,
}

/// Per-context quantities at one parameter vector.
struct ContextEval {
    logp: Vec<f64>,
    probs: Vec<f64>,
    psi_bar: Vec<f64>,
}

impl ToyPolicyModel {
    pub fn new(world: FiniteWorld, theta_ref: Vec<f64>) -> Result<Self> {
        let d = world.dim();
        if theta_ref.len() != 2 * d {
            return Err(FaroError::DimMismatch {
                what: "reference parameters",
                expected: 2 * d,
                got: theta_ref.len(),
            });
        }
        let psi: Vec<Vec<Vec<f64>>> = world
            .contexts()
            .iter()
            .enumerate()
            .map(|(ci, c)| {
                world
                    .actions_of(ci)
                    .map(|a| {
                        let mut v = a.features.clone();
                        v.extend(c.features.iter().zip(&a.features).map(|(x, y)| x * y));
                        v
                    })
                    .collect()
            })
            .collect();
        let mut model = Self {
            world,
            theta_ref,
            psi,
            ref_logp: Vec::new(),
        };
        model.ref_logp = model.log_probs(&model.theta_ref);
        for (ci, row) in model.ref_logp.iter().enumerate() {
            if let Some(ai) = row.iter().position(|lp| lp.exp() <= 0.0) {
                return Err(FaroError::ZeroReferenceMass {
                    context: model.world.contexts()[ci].id,
                    action: ai,
                });
            }
        }
        Ok(model)
    }

    /// Uniform reference (`θ_ref = 0`).
    pub fn uniform_reference(world: FiniteWorld) -> Result<Self> {
        let n = 2 * world.dim();
        Self::new(world, vec![0.0; n])
    }

    pub fn world(&self) -> &FiniteWorld {
        &self.world
    }

    pub fn theta_ref(&self) -> &[f64] {
        &self.theta_ref
    }

    pub fn n_params(&self) -> usize {
        self.theta_ref.len()
    }

    pub fn features(&self, ci: usize, ai: usize) -> &[f64] {
        &self.psi[ci][ai]
    }

    /// Raw scores `θ·ψ(x, a)`.
    pub fn logits(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        self.psi
            .iter()
            .map(|row| row.iter().map(|p| dot(theta, p)).collect())
            .collect()
    }

    pub fn log_probs(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        self.logits(theta)
            .into_iter()
            .map(|row| {
                let z = log_sum_exp(&row);
                row.into_iter().map(|v| v - z).collect()
            })
            .collect()
    }

    pub fn policy(&self, theta: &[f64]) -> Result<FinitePolicy> {
        FinitePolicy::from_logits(&self.world, &self.logits(theta))
    }

    pub fn reference_policy(&self) -> Result<FinitePolicy> {
        self.policy(&self.theta_ref)
    }

    /// `β·(log π_θ(a|x) − log π_ref(a|x))` from normalized log-probabilities.
    pub fn implicit_reward(&self, theta: &[f64], beta: f64, ci: usize, ai: usize) -> f64 {
        let logp = self.log_probs(theta);
        beta * (logp[ci][ai] - self.ref_logp[ci][ai])
    }

    /// The same quantity from raw scores and log-partitions.
    pub fn implicit_reward_from_logits(&self, theta: &[f64], beta: f64, ci: usize, ai: usize) -> f64 {
        let s = self.logits(theta);
        let s_ref = self.logits(&self.theta_ref);
        beta * ((s[ci][ai] - s_ref[ci][ai]) - (log_sum_exp(&s[ci]) - log_sum_exp(&s_ref[ci])))
    }

    fn eval(&self, theta: &[f64]) -> Vec<ContextEval> {
        let n = self.n_params();
        self.psi
            .iter()
            .map(|row| {
                let scores: Vec<f64> = row.iter().map(|p| dot(theta, p)).collect();
                let z = log_sum_exp(&scores);
                let logp: Vec<f64> = scores.iter().map(|s| s - z).collect();
                let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
                let mut psi_bar = vec![0.0; n];
                for (p, f) in probs.iter().zip(row) {
                    for (b, v) in psi_bar.iter_mut().zip(f) {
                        *b += p * v;
                    }
                }
                ContextEval { logp, probs, psi_bar }
            })
            .collect()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(FaroError::DimMismatch {
                what: "policy parameters",
                expected: self.n_params(),
                got: theta.len(),
            });
        }
        Ok(())
    }

    fn check_pairs(&self, pairs: &[DaPair]) -> Result<()> {
        for (i, p) in pairs.iter().enumerate() {
            let ok = p.context < self.world.n_contexts()
                && p.winner < self.world.n_actions(p.context)
                && p.loser < self.world.n_actions(p.context);
            if !ok {
                return Err(FaroError::validation("pairs", format!("pair {i} references a missing context or action")));
            }
        }
        Ok(())
    }

    fn check_kto(&self, data: &[KtoExample]) -> Result<()> {
        for (i, e) in data.iter().enumerate() {
            if e.context >= self.world.n_contexts() || e.action >= self.world.n_actions(e.context) || e.desirable > 1 {
                return Err(FaroError::validation("kto", format!("example {i} is out of range")));
            }
        }
        Ok(())
    }

    /// `∇_θ log π_θ(a|x) = ψ(x,a) − E_π[ψ(x,·)]`.
    fn grad_logp(&self, ev: &[ContextEval], ci: usize, ai: usize) -> Vec<f64> {
        self.psi[ci][ai].iter().zip(&ev[ci].psi_bar).map(|(a, b)| a - b).collect()
    }

    fn log_ratio(&self, ev: &[ContextEval], ci: usize, ai: usize) -> f64 {
        ev[ci].logp[ai] - self.ref_logp[ci][ai]
    }
}

fn mean_loss(n: usize, loss: Accumulator, grad: VecAccumulator) -> Result<LossValue> {
    if n == 0 {
        return Err(FaroError::EmptyInput("alignment data"));
    }
    let inv = 1.0 / n as f64;
    Ok(LossValue {
        nll: loss.value() * inv,
        grad: grad.values().into_iter().map(|g| g * inv).collect(),
    })
}

/// Mean `−log σ(β·(lr_w − lr_l))` with its analytic gradient.
pub fn dpo_loss_and_grad(model: &ToyPolicyModel, theta: &[f64], pairs: &[DaPair], beta: f64) -> Result<LossValue> {
    model.check_theta(theta)?;
    model.check_pairs(pairs)?;
    let ev = model.eval(theta);
    let mut loss = Accumulator::new();
    let mut grad = VecAccumulator::new(model.n_params());
    for p in pairs {
        let m = beta * (model.log_ratio(&ev, p.context, p.winner) - model.log_ratio(&ev, p.context, p.loser));
        loss.add(-log_sigmoid(m));
        let dpsi: Vec<f64> = model.psi[p.context][p.winner]
            .iter()
            .zip(&model.psi[p.context][p.loser])
            .map(|(a, b)| a - b)
            .collect();
        grad.add_scaled(&dpsi, -sigmoid(-m) * beta);
    }
    mean_loss(pairs.len(), loss, grad)
}

/// Mean `−log σ(β·lr)` for desirable and `−log σ(−β·lr)` for undesirable actions.
pub fn kto_loss_and_grad(model: &ToyPolicyModel, theta: &[f64], data: &[KtoExample], beta: f64) -> Result<LossValue> {
    model.check_theta(theta)?;
    model.check_kto(data)?;
    let ev = model.eval(theta);
    let mut loss = Accumulator::new();
    let mut grad = VecAccumulator::new(model.n_params());
    for e in data {
        let sign = if e.desirable == 1 { 1.0 } else { -1.0 };
        let z = sign * beta * model.log_ratio(&ev, e.context, e.action);
        loss.add(-log_sigmoid(z));
        grad.add_scaled(&model.grad_logp(&ev, e.context, e.action), -sigmoid(-z) * sign * beta);
    }
    mean_loss(data.len(), loss, grad)
}

/// Standardized empirical win rates per context; `None` for contexts with
/// no pairs. Unseen actions get win rate 1/2.
pub fn grpo_advantages(model: &ToyPolicyModel, pairs: &[DaPair]) -> Result<Vec<Option<Vec<f64>>>> {
    model.check_pairs(pairs)?;
    let w = model.world();
    let mut wins: Vec<Vec<f64>> = (0..w.n_contexts()).map(|ci| vec![0.0; w.n_actions(ci)]).collect();
    let mut seen: Vec<Vec<f64>> = wins.clone();
    for p in pairs {
        wins[p.context][p.winner] += 1.0;
        seen[p.context][p.winner] += 1.0;
        seen[p.context][p.loser] += 1.0;
    }
    Ok(wins
        .iter()
        .zip(&seen)
        .map(|(wr, sr)| {
            if sr.iter().all(|&s| s == 0.0) {
                return None;
            }
            let rate: Vec<f64> = wr.iter().zip(sr).map(|(a, s)| if *s > 0.0 { a / s } else { 0.5 }).collect();
            let n = rate.len() as f64;
            let mean = rate.iter().sum::<f64>() / n;
            let std = (rate.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
            Some(rate.iter().map(|r| (r - mean) / (std + 1e-8)).collect())
        })
        .collect())
}

/// Mean over contexts with data of `−Σ_a π(a|x)·A(x,a) + β·KL(π(·|x) ‖ π_ref(·|x))`.
pub fn grpo_loss_and_grad(
    model: &ToyPolicyModel,
    theta: &[f64],
    advantages: &[Option<Vec<f64>>],
    beta: f64,
) -> Result<LossValue> {
    model.check_theta(theta)?;
    let ev = model.eval(theta);
    let mut loss = Accumulator::new();
    let mut grad = VecAccumulator::new(model.n_params());
    let mut n = 0;
    for (ci, adv) in advantages.iter().enumerate() {
        let Some(adv) = adv else { continue };
        n += 1;
        let e = &ev[ci];
        let expected_adv: f64 = e.probs.iter().zip(adv).map(|(p, a)| p * a).sum();
        let lr: Vec<f64> = (0..adv.len()).map(|ai| model.log_ratio(&ev, ci, ai)).collect();
        let kl: f64 = e.probs.iter().zip(&lr).map(|(p, l)| p * l).sum();
        loss.add(-expected_adv + beta * kl);
        // ∇E_π[g] = Σ_a π_a (g_a − E_π[g]) ψ_a
        for ai in 0..adv.len() {
            let coeff = e.probs[ai] * (-(adv[ai] - expected_adv) + beta * (lr[ai] - kl));
            grad.add_scaled(&model.psi[ci][ai], coeff);
        }
    }
    mean_loss(n, loss, grad)
}

fn dpo_cells(
    model: &ToyPolicyModel,
    theta: &[f64],
    pairs: &[DaPair],
    beta: f64,
    family: Family,
    with_grad: bool,
) -> Result<(GroupStats, Option<Vec<Vec<f64>>>)> {
    model.check_theta(theta)?;
    model.check_pairs(pairs)?;
    let w = model.world();
    let k_card = w.layout().unrestricted_card;
    let mut acc = CellAccumulator::new(family, w.n_groups(), family.n_strata(k_card), with_grad.then_some(model.n_params()));
    let ev = model.eval(theta);
    for p in pairs {
        let m = beta * (model.log_ratio(&ev, p.context, p.winner) - model.log_ratio(&ev, p.context, p.loser));
        let prob = sigmoid(m);
        let stratum = match family {
            Family::Dp => 0,
            Family::Eo => label_from_margin(m) as usize,
            Family::Cf => w.contexts()[p.context].u,
        };
        let g = with_grad.then(|| {
            let slope = prob * (1.0 - prob) * beta;
            model.psi[p.context][p.winner]
                .iter()
                .zip(&model.psi[p.context][p.loser])
                .map(|(a, b)| slope * (a - b))
                .collect::<Vec<f64>>()
        });
        acc.add(w.group_of(p.context), stratum, prob, g.as_deref());
    }
    Ok(acc.finish())
}

/// DP and CF cells use desirable examples only; EO cells are stratified by
/// the desirability label.
fn kto_cells(
    model: &ToyPolicyModel,
    theta: &[f64],
    data: &[KtoExample],
    beta: f64,
    family: Family,
    with_grad: bool,
) -> Result<(GroupStats, Option<Vec<Vec<f64>>>)> {
    model.check_theta(theta)?;
    model.check_kto(data)?;
    let w = model.world();
    let k_card = w.layout().unrestricted_card;
    let mut acc = CellAccumulator::new(family, w.n_groups(), family.n_strata(k_card), with_grad.then_some(model.n_params()));
    let ev = model.eval(theta);
    for e in data {
        let stratum = match family {
            Family::Dp if e.desirable == 1 => 0,
            Family::Cf if e.desirable == 1 => w.contexts()[e.context].u,
            Family::Eo => e.desirable as usize,
            _ => continue,
        };
        let prob = sigmoid(beta * model.log_ratio(&ev, e.context, e.action));
        let g = with_grad.then(|| {
            let slope = prob * (1.0 - prob) * beta;
            model.grad_logp(&ev, e.context, e.action).into_iter().map(|v| v * slope).collect::<Vec<f64>>()
        });
        acc.add(w.group_of(e.context), stratum, prob, g.as_deref());
    }
    Ok(acc.finish())
}

fn require(stats: GroupStats, what: &str) -> Result<GroupStats> {
    stats
        .require_nonempty()
        .map_err(|e| FaroError::EmptyCell(format!("{what}: {e}")))?;
    Ok(stats)
}

/// Group-cell means of `σ(β·(lr_w − lr_l))`.
pub fn dpo_proxy(model: &ToyPolicyModel, theta: &[f64], pairs: &[DaPair], beta: f64, family: Family) -> Result<GroupStats> {
    require(dpo_cells(model, theta, pairs, beta, family, false)?.0, "preference pairs")
}

/// Group-cell means of `σ(β·lr)` over desirable examples (EO: per label).
pub fn kto_proxy(model: &ToyPolicyModel, theta: &[f64], data: &[KtoExample], beta: f64, family: Family) -> Result<GroupStats> {
    require(kto_cells(model, theta, data, beta, family, false)?.0, "desirable examples")
}

/// `q_i` for the DPO demographic-parity proxy.
pub fn dpo_group_proxy(model: &ToyPolicyModel, theta: &[f64], pairs: &[DaPair], beta: f64, group: usize) -> Result<f64> {
    let (stats, _) = dpo_cells(model, theta, pairs, beta, Family::Dp, false)?;
    group_value(&stats, group)
}

/// `q_i` for the KTO proxy: mean `σ(β·lr)` over desirable examples of group `i`.
pub fn kto_group_proxy(model: &ToyPolicyModel, theta: &[f64], data: &[KtoExample], beta: f64, group: usize) -> Result<f64> {
    let (stats, _) = kto_cells(model, theta, data, beta, Family::Dp, false)?;
    group_value(&stats, group)
}

fn group_value(stats: &GroupStats, group: usize) -> Result<f64> {
    if group >= stats.n_groups {
        return Err(FaroError::validation("group", format!("{group} out of range")));
    }
    stats
        .get(group, 0)
        .ok_or_else(|| FaroError::EmptyCell(format!("group {group} has no examples for this proxy")))
}

/// The combined objective handed to the solver.
pub struct DaObjective<'a> {
    model: &'a ToyPolicyModel,
    method: Method,
    data: &'a AlignmentData,
    beta: f64,
    spec: &'a ConstraintSpec,
    advantages: Vec<Option<Vec<f64>>>,
}

impl<'a> DaObjective<'a> {
    pub fn new(model: &'a ToyPolicyModel, method: Method, data: &'a AlignmentData, beta: f64, spec: &'a ConstraintSpec) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(FaroError::validation("beta", "must be finite and > 0"));
        }
        spec.validate(model.world().layout())?;
        let advantages = match (method, data) {
            (Method::Grpo, AlignmentData::Pairs(p)) => grpo_advantages(model, p)?,
            (Method::Dpo, AlignmentData::Pairs(_)) | (Method::Kto, AlignmentData::Kto(_)) => Vec::new(),
            _ => {
                return Err(FaroError::validation(
                    "data",
                    format!("{method:?} needs {} data", if method == Method::Kto { "KTO" } else { "pairwise" }),
                ))
            }
        };
        let obj = Self {
            model,
            method,
            data,
            beta,
            spec,
            advantages,
        };
        if obj.n_constraints() > 0 && spec.family != Family::Eo {
            // EO cells depend on θ; the rest can be checked up front.
            obj.cells(model.theta_ref(), false)?.0.require_nonempty()?;
        }
        Ok(obj)
    }

    fn cells(&self, theta: &[f64], with_grad: bool) -> Result<(GroupStats, Option<Vec<Vec<f64>>>)> {
        match self.data {
            AlignmentData::Pairs(p) => dpo_cells(self.model, theta, p, self.beta, self.spec.family, with_grad),
            AlignmentData::Kto(k) => kto_cells(self.model, theta, k, self.beta, self.spec.family, with_grad),
        }
    }
}

impl ConstrainedObjective for DaObjective<'_> {
    fn n_params(&self) -> usize {
        self.model.n_params()
    }

    fn n_constraints(&self) -> usize {
        self.spec.n_constraints(self.model.world().layout())
    }

    /// `θ_ref` plus a small uniform perturbation, so EO cells start populated.
    fn init_params(&self, rng: &mut ChaCha20Rng) -> Vec<f64> {
        let scale = 1.0 / (self.n_params() as f64).sqrt();
        uniform_weights(self.n_params(), scale, rng)
            .into_iter()
            .zip(self.model.theta_ref())
            .map(|(u, r)| r + u)
            .collect()
    }

    fn loss_and_grad(&self, theta: &[f64]) -> Result<LossValue> {
        match (self.method, self.data) {
            (Method::Dpo, AlignmentData::Pairs(p)) => dpo_loss_and_grad(self.model, theta, p, self.beta),
            (Method::Kto, AlignmentData::Kto(k)) => kto_loss_and_grad(self.model, theta, k, self.beta),
            (Method::Grpo, _) => grpo_loss_and_grad(self.model, theta, &self.advantages, self.beta),
            _ => unreachable!("checked in DaObjective::new"),
        }
    }

    fn constraints(&self, theta: &[f64], with_jacobian: bool) -> Result<ConstraintEval> {
        let (stats, grads) = self.cells(theta, with_jacobian)?;
        anchored_constraints(&stats, grads.as_deref(), self.spec, self.model.world().layout().unrestricted_card)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaRun {
    pub method: Method,
    pub beta: f64,
    pub theta_bar: Vec<f64>,
    pub state: SolverState,
}

/// Trains a direct-alignment policy with ProxyGDA.
pub fn faro_da_train(
    method: Method,
    cfg: &SolverConfig,
    model: &ToyPolicyModel,
    data: &AlignmentData,
    beta: f64,
    spec: &ConstraintSpec,
) -> Result<DaRun> {
    let obj = DaObjective::new(model, method, data, beta, spec)?;
    let state = proxygda::run_objective(&obj, cfg, spec.dual_bound)?;
    Ok(DaRun {
        method,
        beta,
        theta_bar: state.phi_bar.clone(),
        state,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub n_pairs: usize,
    pub bias_strength: f64,
    pub noise: f64,
    pub seed: u64,
}

/// Preference pairs over a world. Contexts are visited round-robin; the
/// winner follows a Bradley–Terry draw on ground-truth quality, except that
/// in tilted groups, with probability `FLIP_RATE·b·|tilt|`, the action
/// higher (positive tilt) or lower (negative tilt) on the spurious
/// dimension wins instead.
pub fn generate_pairs(world: &FiniteWorld, cfg: &PairConfig) -> Result<Vec<DaPair>> {
    if cfg.n_pairs == 0 {
        return Err(FaroError::validation("n_pairs", "must be >= 1"));
    }
    if !(cfg.noise > 0.0 && cfg.noise.is_finite()) {
        return Err(FaroError::validation("noise", "must be finite and > 0"));
    }
    if !(cfg.bias_strength >= 0.0 && cfg.bias_strength.is_finite()) {
        return Err(FaroError::validation("bias_strength", "must be finite and >= 0"));
    }
    if let Some(ci) = (0..world.n_contexts()).find(|&ci| world.n_actions(ci) < 2) {
        return Err(FaroError::validation("world", format!("context index {ci} has fewer than two actions")));
    }
    let d = world.dim();
    let w_true = ground_truth_weights(d);
    let p = world.n_groups();
    let mut rng = rng::stream(cfg.seed, Stream::Alignment);
    let mut pairs = Vec::with_capacity(cfg.n_pairs);
    for k in 0..cfg.n_pairs {
        let ci = k % world.n_contexts();
        let n = world.n_actions(ci);
        let a = rng.random_range(0..n);
        let b = (a + rng.random_range(1..n)) % n;
        let acts: Vec<&[f64]> = world.actions_of(ci).map(|x| x.features.as_slice()).collect();
        let margin = dot(&w_true, acts[a]) - dot(&w_true, acts[b]);
        let mut a_wins = rng.random::<f64>() < sigmoid(margin / cfg.noise);
        let tilt = group_tilt(world.group_of(ci), p);
        let planted = (FLIP_RATE * cfg.bias_strength * tilt.abs()).min(0.5);
        if rng.random::<f64>() < planted {
            let a_higher = acts[a][d - 1] >= acts[b][d - 1];
            a_wins = a_higher == (tilt > 0.0);
        }
        let (winner, loser) = if a_wins { (a, b) } else { (b, a) };
        pairs.push(DaPair { context: ci, winner, loser });
    }
    Ok(pairs)
}

/// Winner desirable, loser undesirable.
pub fn kto_from_pairs(pairs: &[DaPair]) -> Vec<KtoExample> {
    pairs
        .iter()
        .flat_map(|p| {
            [
                KtoExample { context: p.context, action: p.winner, desirable: 1 },
                KtoExample { context: p.context, action: p.loser, desirable: 0 },
            ]
        })
        .collect()
}
