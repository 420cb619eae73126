//! KL-regularized policies over finite worlds.
//!
//! A world is a finite set of contexts, each with a finite action list and a
//! binary outcome `f(x, a)` marking the audited event `A`. For a reward `r`
//! and reference `π_ref`, the KL-regularized optimum is the Gibbs policy
//! `π_β(a|x) ∝ π_ref(a|x)·exp(r(x,a)/β)`, computed exactly in log space.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{group_tilt, ground_truth_weights, AttributeLayout, SPURIOUS_SCALE};
use crate::error::{FaroError, Result};
use crate::numeric::{dot, log_sum_exp, Accumulator};
use crate::reward_model::RewardParams;
use crate::rng::{self, Stream};

/// Row-sum tolerance for probability tables.
pub const ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub id: usize,
    pub features: Vec<f64>,
    pub s: Vec<usize>,
    pub u: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub context_id: usize,
    pub features: Vec<f64>,
    pub f: u8,
}

#[derive(Serialize, Deserialize)]
struct WorldRepr {
    layout: AttributeLayout,
    contexts: Vec<Context>,
    actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WorldRepr", into = "WorldRepr")]
pub struct FiniteWorld {
    layout: AttributeLayout,
    contexts: Vec<Context>,
    actions: Vec<Action>,
    /// Action indices per context, in input order.
    rows: Vec<Vec<usize>>,
    groups: Vec<usize>,
}

impl TryFrom<WorldRepr> for FiniteWorld {
    type Error = FaroError;

    fn try_from(r: WorldRepr) -> Result<Self> {
        FiniteWorld::new(r.layout, r.contexts, r.actions)
    }
}

impl From<FiniteWorld> for WorldRepr {
    fn from(w: FiniteWorld) -> Self {
        WorldRepr {
            layout: w.layout,
            contexts: w.contexts,
            actions: w.actions,
        }
    }
}

impl FiniteWorld {
    pub fn new(layout: AttributeLayout, contexts: Vec<Context>, actions: Vec<Action>) -> Result<Self> {
        layout.validate()?;
        if contexts.is_empty() {
            return Err(FaroError::EmptyInput("world contexts"));
        }
        let d = contexts[0].features.len();
        let mut index = std::collections::HashMap::new();
        let mut groups = Vec::with_capacity(contexts.len());
        let mut mass = Accumulator::new();
        for (ci, c) in contexts.iter().enumerate() {
            if index.insert(c.id, ci).is_some() {
                return Err(FaroError::validation("contexts.id", format!("duplicate context id {}", c.id)));
            }
            if c.features.len() != d {
                return Err(FaroError::DimMismatch {
                    what: "context features",
                    expected: d,
                    got: c.features.len(),
                });
            }
            if !(0.0..=1.0).contains(&c.p) {
                return Err(FaroError::validation("contexts.p", format!("context {} has p={} outside [0,1]", c.id, c.p)));
            }
            if c.u >= layout.unrestricted_card {
                return Err(FaroError::validation("contexts.u", format!("context {} has u={} out of range", c.id, c.u)));
            }
            groups.push(layout.group_index(&c.s)?);
            mass.add(c.p);
        }
        if (mass.value() - 1.0).abs() > ROW_TOL {
            return Err(FaroError::validation(
                "contexts.p",
                format!("context probabilities sum to {}", mass.value()),
            ));
        }
        let mut rows = vec![Vec::new(); contexts.len()];
        for (ai, a) in actions.iter().enumerate() {
            let ci = *index.get(&a.context_id).ok_or_else(|| {
                FaroError::validation("actions.context_id", format!("unknown context id {}", a.context_id))
            })?;
            if a.features.len() != d {
                return Err(FaroError::DimMismatch {
                    what: "action features",
                    expected: d,
                    got: a.features.len(),
                });
            }
            if a.f > 1 {
                return Err(FaroError::validation("actions.f", "outcome must be 0 or 1"));
            }
            rows[ci].push(ai);
        }
        if let Some(ci) = rows.iter().position(Vec::is_empty) {
            return Err(FaroError::validation(
                "actions",
                format!("context {} has no actions", contexts[ci].id),
            ));
        }
        Ok(Self {
            layout,
            contexts,
            actions,
            rows,
            groups,
        })
    }

    pub fn layout(&self) -> &AttributeLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.contexts[0].features.len()
    }

    pub fn contexts(&self) -> &[Context] {
        &self.contexts
    }

    pub fn n_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn n_groups(&self) -> usize {
        self.layout.n_groups()
    }

    pub fn group_of(&self, ci: usize) -> usize {
        self.groups[ci]
    }

    /// Actions available in context `ci`.
    pub fn actions_of(&self, ci: usize) -> impl Iterator<Item = &Action> + '_ {
        self.rows[ci].iter().map(move |&ai| &self.actions[ai])
    }

    pub fn n_actions(&self, ci: usize) -> usize {
        self.rows[ci].len()
    }

    /// Context mass per group.
    pub fn group_mass(&self) -> Vec<f64> {
        let mut acc = vec![Accumulator::new(); self.n_groups()];
        for (ci, c) in self.contexts.iter().enumerate() {
            acc[self.groups[ci]].add(c.p);
        }
        acc.iter().map(Accumulator::value).collect()
    }

    /// Replaces every outcome with `f(context, action)`.
    pub fn with_outcome(mut self, f: impl Fn(&Context, &Action) -> bool) -> Self {
        for (ci, row) in self.rows.iter().enumerate() {
            for &ai in row {
                self.actions[ai].f = u8::from(f(&self.contexts[ci], &self.actions[ai]));
            }
        }
        self
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Per-context action distributions, aligned with [`FiniteWorld::actions_of`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitePolicy {
    rows: Vec<Vec<f64>>,
}

impl FinitePolicy {
    pub fn new(world: &FiniteWorld, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != world.n_contexts() {
            return Err(FaroError::DimMismatch {
                what: "policy rows",
                expected: world.n_contexts(),
                got: rows.len(),
            });
        }
        for (ci, row) in rows.iter().enumerate() {
            if row.len() != world.n_actions(ci) {
                return Err(FaroError::DimMismatch {
                    what: "policy row length",
                    expected: world.n_actions(ci),
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(FaroError::validation("policy", format!("row {ci} has an entry outside [0,1]")));
            }
            let mut acc = Accumulator::new();
            row.iter().for_each(|&v| acc.add(v));
            if (acc.value() - 1.0).abs() > ROW_TOL {
                return Err(FaroError::validation("policy", format!("row {ci} sums to {}", acc.value())));
            }
        }
        Ok(Self { rows })
    }

    pub fn uniform(world: &FiniteWorld) -> Self {
        Self {
            rows: (0..world.n_contexts())
                .map(|ci| {
                    let n = world.n_actions(ci);
                    vec![1.0 / n as f64; n]
                })
                .collect(),
        }
    }

    /// Softmax of arbitrary per-context logits.
    pub fn from_logits(world: &FiniteWorld, logits: &[Vec<f64>]) -> Result<Self> {
        let rows = logits
            .iter()
            .map(|row| {
                let z = log_sum_exp(row);
                row.iter().map(|v| (v - z).exp()).collect()
            })
            .collect();
        Self::new(world, rows)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, ci: usize) -> &[f64] {
        &self.rows[ci]
    }
}

/// `r(x, a)` for every context-action pair.
pub fn reward_table(params: &RewardParams, world: &FiniteWorld) -> Result<Vec<Vec<f64>>> {
    world
        .contexts()
        .iter()
        .enumerate()
        .map(|(ci, c)| world.actions_of(ci).map(|a| params.reward(&c.features, &a.features)).collect())
        .collect()
}

/// Gibbs policy from an explicit reward table.
pub fn gibbs_from_rewards(rewards: &[Vec<f64>], world: &FiniteWorld, pi_ref: &FinitePolicy, beta: f64) -> Result<FinitePolicy> {
    if beta.is_nan() || beta <= 0.0 {
        return Err(FaroError::validation("beta", "must be > 0"));
    }
    if rewards.len() != world.n_contexts() {
        return Err(FaroError::DimMismatch {
            what: "reward table rows",
            expected: world.n_contexts(),
            got: rewards.len(),
        });
    }
    let mut rows = Vec::with_capacity(rewards.len());
    for (ci, (r, q)) in rewards.iter().zip(pi_ref.rows()).enumerate() {
        if r.len() != q.len() {
            return Err(FaroError::DimMismatch {
                what: "reward table row",
                expected: q.len(),
                got: r.len(),
            });
        }
        if let Some(ai) = q.iter().position(|&v| v <= 0.0) {
            return Err(FaroError::ZeroReferenceMass {
                context: world.contexts()[ci].id,
                action: ai,
            });
        }
        let logits: Vec<f64> = q.iter().zip(r).map(|(qa, ra)| qa.ln() + ra / beta).collect();
        let z = log_sum_exp(&logits);
        rows.push(logits.iter().map(|l| (l - z).exp()).collect());
    }
    Ok(FinitePolicy { rows })
}

/// `π_β(a|x) ∝ π_ref(a|x)·exp(r(x,a)/β)`.
pub fn gibbs_policy(params: &RewardParams, world: &FiniteWorld, pi_ref: &FinitePolicy, beta: f64) -> Result<FinitePolicy> {
    gibbs_from_rewards(&reward_table(params, world)?, world, pi_ref, beta)
}

fn row_kl(world: &FiniteWorld, ci: usize, p: &[f64], q: &[f64]) -> Result<f64> {
    let mut acc = Accumulator::new();
    for (ai, (&pa, &qa)) in p.iter().zip(q).enumerate() {
        if pa > 0.0 {
            if qa <= 0.0 {
                return Err(FaroError::SupportViolation {
                    context: world.contexts()[ci].id,
                    action: ai,
                });
            }
            acc.add(pa * (pa / qa).ln());
        }
    }
    Ok(acc.value().max(0.0))
}

/// Per-context `KL(π(·|x) ‖ π_ref(·|x))`.
pub fn context_kls(pi: &FinitePolicy, pi_ref: &FinitePolicy, world: &FiniteWorld) -> Result<Vec<f64>> {
    (0..world.n_contexts())
        .map(|ci| row_kl(world, ci, pi.row(ci), pi_ref.row(ci)))
        .collect()
}

/// Context-weighted KL; equals the KL between the joint `(x, a)` laws.
pub fn kl(pi: &FinitePolicy, pi_ref: &FinitePolicy, world: &FiniteWorld) -> Result<f64> {
    let per = context_kls(pi, pi_ref, world)?;
    let mut acc = Accumulator::new();
    for (c, k) in world.contexts().iter().zip(&per) {
        acc.add(c.p * k);
    }
    Ok(acc.value())
}

/// Group-conditional KLs `Σ_{x∈i} P(x|S=i)·KL_x`; `None` for massless groups.
pub fn group_kl(pi: &FinitePolicy, pi_ref: &FinitePolicy, world: &FiniteWorld) -> Result<Vec<Option<f64>>> {
    let per = context_kls(pi, pi_ref, world)?;
    Ok(group_average(world, |ci| per[ci]))
}

fn group_average(world: &FiniteWorld, value: impl Fn(usize) -> f64) -> Vec<Option<f64>> {
    let mut num = vec![Accumulator::new(); world.n_groups()];
    let mut den = vec![Accumulator::new(); world.n_groups()];
    for (ci, c) in world.contexts().iter().enumerate() {
        let g = world.group_of(ci);
        num[g].add(c.p * value(ci));
        den[g].add(c.p);
    }
    num.iter()
        .zip(&den)
        .map(|(n, d)| (d.value() > 0.0).then(|| n.value() / d.value()))
        .collect()
}

fn context_event_prob(world: &FiniteWorld, pi: &FinitePolicy, ci: usize) -> f64 {
    let mut acc = Accumulator::new();
    for (a, &pa) in world.actions_of(ci).zip(pi.row(ci)) {
        if a.f == 1 {
            acc.add(pa);
        }
    }
    acc.value()
}

/// `P_π(A)` under the context distribution.
pub fn event_prob(pi: &FinitePolicy, world: &FiniteWorld) -> f64 {
    let mut acc = Accumulator::new();
    for (ci, c) in world.contexts().iter().enumerate() {
        acc.add(c.p * context_event_prob(world, pi, ci));
    }
    acc.value()
}

/// `P_π(A | S = i)` per group; `None` for massless groups.
pub fn group_event_probs(pi: &FinitePolicy, world: &FiniteWorld) -> Vec<Option<f64>> {
    group_average(world, |ci| context_event_prob(world, pi, ci))
}

/// `Δ(π) = max_{i,j} |P_π(A|S=i) − P_π(A|S=j)|`.
pub fn policy_violation(pi: &FinitePolicy, world: &FiniteWorld) -> Result<f64> {
    let probs = group_event_probs(pi, world);
    if let Some(g) = probs.iter().position(Option::is_none) {
        return Err(FaroError::EmptyCell(format!("group {g} has no context mass")));
    }
    let vals: Vec<f64> = probs.into_iter().flatten().collect();
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(hi - lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs + 1e-12,
        }
    }
}

/// `|P_π(A) − P_ref(A)| ≤ √(KL/2)`.
pub fn pinsker_check(pi: &FinitePolicy, pi_ref: &FinitePolicy, world: &FiniteWorld) -> Result<InequalityCheck> {
    let k = kl(pi, pi_ref, world)?;
    let lhs = (event_prob(pi, world) - event_prob(pi_ref, world)).abs();
    Ok(InequalityCheck::new(lhs, (k / 2.0).sqrt()))
}

/// Per-group `|P_π(A|S=i) − P_ref(A|S=i)| ≤ √(2·KL_i)`; massless groups skipped.
pub fn drift_checks(pi: &FinitePolicy, pi_ref: &FinitePolicy, world: &FiniteWorld) -> Result<Vec<Option<InequalityCheck>>> {
    let kls = group_kl(pi, pi_ref, world)?;
    let a = group_event_probs(pi, world);
    let b = group_event_probs(pi_ref, world);
    Ok(kls
        .iter()
        .zip(a.iter().zip(&b))
        .map(|(k, (pa, pb))| match (k, pa, pb) {
            (Some(k), Some(pa), Some(pb)) => Some(InequalityCheck::new((pa - pb).abs(), (2.0 * k).sqrt())),
            _ => None,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaReport {
    pub betas: Vec<f64>,
    pub kls: Vec<f64>,
    pub monotone: bool,
}

/// KL of the Gibbs policy along an increasing `β` grid; equal neighbours are
/// allowed so duplicated values can be checked for equal KL.
pub fn beta_monotonicity_rewards(
    rewards: &[Vec<f64>],
    world: &FiniteWorld,
    pi_ref: &FinitePolicy,
    betas: &[f64],
) -> Result<BetaReport> {
    if betas.is_empty() {
        return Err(FaroError::EmptyInput("betas"));
    }
    if betas.windows(2).any(|w| w[1] < w[0]) {
        return Err(FaroError::validation("betas", "must be sorted in increasing order"));
    }
    let kls = betas
        .iter()
        .map(|&b| kl(&gibbs_from_rewards(rewards, world, pi_ref, b)?, pi_ref, world))
        .collect::<Result<Vec<_>>>()?;
    let monotone = kls.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    Ok(BetaReport {
        betas: betas.to_vec(),
        kls,
        monotone,
    })
}

pub fn beta_monotonicity(params: &RewardParams, world: &FiniteWorld, pi_ref: &FinitePolicy, betas: &[f64]) -> Result<BetaReport> {
    beta_monotonicity_rewards(&reward_table(params, world)?, world, pi_ref, betas)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub beta: f64,
    pub delta_fair: f64,
    pub delta_plain: f64,
    pub delta_ref: f64,
    #[serde(rename = "epsilon_T")]
    pub epsilon_t: f64,
    /// `Δ_fair ≤ Δ_plain + ε_T`.
    pub holds: bool,
    pub margin: f64,
    pub kl_fair: f64,
    pub kl_plain: f64,
    /// Per-group drift bound holds for both policies.
    pub drift_holds: bool,
    pub accuracy_fair: f64,
    pub accuracy_plain: f64,
}

/// Compares the Gibbs policies of a fair and a plain reward at one `β`.
pub fn transfer_experiment(
    fair: &RewardParams,
    plain: &RewardParams,
    world: &FiniteWorld,
    pi_ref: &FinitePolicy,
    beta: f64,
    epsilon_t: f64,
) -> Result<TransferReport> {
    let pf = gibbs_policy(fair, world, pi_ref, beta)?;
    let pp = gibbs_policy(plain, world, pi_ref, beta)?;
    let delta_fair = policy_violation(&pf, world)?;
    let delta_plain = policy_violation(&pp, world)?;
    let drift_ok = |pi: &FinitePolicy| -> Result<bool> {
        Ok(drift_checks(pi, pi_ref, world)?.iter().flatten().all(|c| c.holds))
    };
    Ok(TransferReport {
        beta,
        delta_fair,
        delta_plain,
        delta_ref: policy_violation(pi_ref, world)?,
        epsilon_t,
        holds: delta_fair <= delta_plain + epsilon_t,
        margin: delta_plain + epsilon_t - delta_fair,
        kl_fair: kl(&pf, pi_ref, world)?,
        kl_plain: kl(&pp, pi_ref, world)?,
        drift_holds: drift_ok(&pf)? && drift_ok(&pp)?,
        accuracy_fair: event_prob(&pf, world),
        accuracy_plain: event_prob(&pp, world),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub n_contexts: usize,
    pub actions_per_context: usize,
    pub d: usize,
    pub layout: AttributeLayout,
    pub bias_strength: f64,
    /// Extra spread of the spurious dimension per unit of positive tilt.
    #[serde(default = "default_spread")]
    pub spurious_spread: f64,
    pub seed: u64,
}

fn default_spread() -> f64 {
    3.0
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        if self.n_contexts == 0 {
            return Err(FaroError::validation("n_contexts", "must be >= 1"));
        }
        if self.actions_per_context == 0 {
            return Err(FaroError::validation("actions_per_context", "must be >= 1"));
        }
        if self.d < 2 {
            return Err(FaroError::validation("d", "must be >= 2"));
        }
        if !(self.bias_strength >= 0.0 && self.bias_strength.is_finite()) {
            return Err(FaroError::validation("bias_strength", "must be finite and >= 0"));
        }
        if !(self.spurious_spread >= 0.0 && self.spurious_spread.is_finite()) {
            return Err(FaroError::validation("spurious_spread", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Uniform context distribution, groups assigned round-robin so each has
/// mass. Actions in tilted groups spread wider on the spurious dimension,
/// so rewards leaning on it pick worse actions there. `f` marks the action
/// of highest ground-truth quality.
pub fn generate_world(cfg: &WorldConfig) -> Result<FiniteWorld> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, Stream::World);
    let p = cfg.layout.n_groups();
    let d = cfg.d;
    let w_true = ground_truth_weights(d);
    let prob = 1.0 / cfg.n_contexts as f64;
    let mut contexts = Vec::with_capacity(cfg.n_contexts);
    let mut actions = Vec::with_capacity(cfg.n_contexts * cfg.actions_per_context);
    for id in 0..cfg.n_contexts {
        let g = id % p;
        let s = cfg.layout.group_attributes(g);
        let u = rng.random_range(0..cfg.layout.unrestricted_card);
        let tilt = group_tilt(g, p);
        let mut x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        x[0] += cfg.bias_strength * tilt;
        let spread = SPURIOUS_SCALE * (1.0 + cfg.spurious_spread * cfg.bias_strength * tilt.max(0.0));
        let feats: Vec<Vec<f64>> = (0..cfg.actions_per_context)
            .map(|_| {
                let mut a: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                a[d - 1] *= spread;
                a
            })
            .collect();
        let quality: Vec<f64> = feats.iter().map(|a| dot(&w_true, a)).collect();
        let best = (0..quality.len())
            .reduce(|b, i| if quality[i] > quality[b] { i } else { b })
            .expect("at least one action");
        for (ai, features) in feats.into_iter().enumerate() {
            actions.push(Action {
                context_id: id,
                features,
                f: u8::from(ai == best),
            });
        }
        contexts.push(Context {
            id,
            features: x,
            s,
            u,
            p: prob,
        });
    }
    // Rounding in 1/n can leave the total a few ulps from 1.
    let total: f64 = contexts.iter().map(|c| c.p).sum();
    if let Some(last) = contexts.last_mut() {
        last.p += 1.0 - total;
    }
    FiniteWorld::new(cfg.layout.clone(), contexts, actions)
}
