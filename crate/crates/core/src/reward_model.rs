//! Scalar reward models and the Bradley–Terry likelihood.
//!
//! A reward model scores a (context, response) pair from the concatenation
//! `[x; feat]`. Two architectures are supported: a linear map, and a single
//! tanh hidden layer followed by a linear head. Gradients are analytic.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, PreferenceExample};
use crate::error::{FaroError, Result};
use crate::numeric::{log_sigmoid, sigmoid, Accumulator, VecAccumulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Arch {
    Linear { d: usize },
    Mlp { d: usize, hidden: usize },
}

impl Arch {
    /// Feature dimension of contexts and responses.
    pub fn feature_dim(&self) -> usize {
        match *self {
            Arch::Linear { d } | Arch::Mlp { d, .. } => d,
        }
    }

    pub fn n_params(&self) -> usize {
        match *self {
            Arch::Linear { d } => 2 * d,
            Arch::Mlp { d, hidden } => hidden * (2 * d + 2),
        }
    }

    pub fn is_convex(&self) -> bool {
        matches!(self, Arch::Linear { .. })
    }

    /// Initial weights: zeros for the linear model, `U(-1/√D, 1/√D)` for the
    /// MLP where `D = 2d` is the input width.
    pub fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match *self {
            Arch::Linear { .. } => vec![0.0; self.n_params()],
            Arch::Mlp { d, .. } => uniform_weights(self.n_params(), 1.0 / ((2 * d) as f64).sqrt(), rng),
        }
    }
}

pub(crate) fn uniform_weights<R: Rng>(n: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..=scale)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct RewardParams {
    arch: Arch,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    arch: String,
    dims: Vec<usize>,
    weights: Vec<f64>,
}

impl From<RewardParams> for ParamsRepr {
    fn from(p: RewardParams) -> Self {
        let (arch, dims) = match p.arch {
            Arch::Linear { d } => ("linear", vec![d]),
            Arch::Mlp { d, hidden } => ("mlp", vec![d, hidden]),
        };
        ParamsRepr {
            arch: arch.to_string(),
            dims,
            weights: p.weights,
        }
    }
}

impl TryFrom<ParamsRepr> for RewardParams {
    type Error = FaroError;

    fn try_from(r: ParamsRepr) -> Result<Self> {
        let arch = match (r.arch.as_str(), r.dims.as_slice()) {
            ("linear", &[d]) => Arch::Linear { d },
            ("mlp", &[d, hidden]) => Arch::Mlp { d, hidden },
            (a, dims) => {
                return Err(FaroError::validation(
                    "arch",
                    format!("unknown architecture {a:?} with dims {dims:?}"),
                ))
            }
        };
        RewardParams::new(arch, r.weights)
    }
}

/// Loss value with its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub nll: f64,
    pub grad: Vec<f64>,
}

impl RewardParams {
    pub fn new(arch: Arch, weights: Vec<f64>) -> Result<Self> {
        if arch.feature_dim() == 0 {
            return Err(FaroError::validation("dims", "feature dimension must be >= 1"));
        }
        if weights.len() != arch.n_params() {
            return Err(FaroError::DimMismatch {
                what: "reward weights",
                expected: arch.n_params(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(FaroError::validation("weights", "non-finite weight"));
        }
        Ok(Self { arch, weights })
    }

    pub fn zeros(arch: Arch) -> Self {
        Self {
            arch,
            weights: vec![0.0; arch.n_params()],
        }
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same architecture, different weights (length unchecked beyond debug builds).
    pub(crate) fn with_weights(&self, weights: &[f64]) -> Self {
        debug_assert_eq!(weights.len(), self.weights.len());
        Self {
            arch: self.arch,
            weights: weights.to_vec(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    fn check_dims(&self, x: &[f64], feat: &[f64]) -> Result<()> {
        let d = self.arch.feature_dim();
        for (what, v) in [("context features", x), ("response features", feat)] {
            if v.len() != d {
                return Err(FaroError::DimMismatch {
                    what,
                    expected: d,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }

    pub fn reward(&self, x: &[f64], feat: &[f64]) -> Result<f64> {
        self.check_dims(x, feat)?;
        Ok(self.reward_unchecked(x, feat))
    }

    pub(crate) fn reward_unchecked(&self, x: &[f64], feat: &[f64]) -> f64 {
        let w = &self.weights;
        match self.arch {
            Arch::Linear { d } => {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += w[j] * x[j] + w[d + j] * feat[j];
                }
                acc
            }
            Arch::Mlp { d, hidden } => {
                let width = 2 * d;
                let (wmat, rest) = w.split_at(hidden * width);
                let (bias, head) = rest.split_at(hidden);
                let mut r = 0.0;
                for k in 0..hidden {
                    let row = &wmat[k * width..(k + 1) * width];
                    let mut pre = bias[k];
                    for j in 0..d {
                        pre += row[j] * x[j] + row[d + j] * feat[j];
                    }
                    r += head[k] * pre.tanh();
                }
                r
            }
        }
    }

    /// Adds `scale * ∂r/∂φ` into `grad` and returns `r`.
    pub(crate) fn reward_grad_into(&self, x: &[f64], feat: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let w = &self.weights;
        match self.arch {
            Arch::Linear { d } => {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += w[j] * x[j] + w[d + j] * feat[j];
                    grad[j] += scale * x[j];
                    grad[d + j] += scale * feat[j];
                }
                acc
            }
            Arch::Mlp { d, hidden } => {
                let width = 2 * d;
                let (wmat, rest) = w.split_at(hidden * width);
                let (bias, head) = rest.split_at(hidden);
                let bias_off = hidden * width;
                let head_off = bias_off + hidden;
                let mut r = 0.0;
                for k in 0..hidden {
                    let row = &wmat[k * width..(k + 1) * width];
                    let mut pre = bias[k];
                    for j in 0..d {
                        pre += row[j] * x[j] + row[d + j] * feat[j];
                    }
                    let a = pre.tanh();
                    r += head[k] * a;
                    grad[head_off + k] += scale * a;
                    let back = scale * head[k] * (1.0 - a * a);
                    grad[bias_off + k] += back;
                    let grow = &mut grad[k * width..(k + 1) * width];
                    for j in 0..d {
                        grow[j] += back * x[j];
                        grow[d + j] += back * feat[j];
                    }
                }
                r
            }
        }
    }

    /// Reward margin `r(x, ŷ_w) − r(x, ŷ_l)`.
    pub fn margin(&self, ex: &PreferenceExample) -> f64 {
        self.reward_unchecked(&ex.x, &ex.feat_w) - self.reward_unchecked(&ex.x, &ex.feat_l)
    }

    /// Margin and its gradient; `grad` is overwritten.
    pub(crate) fn margin_grad(&self, ex: &PreferenceExample, grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let rw = self.reward_grad_into(&ex.x, &ex.feat_w, 1.0, grad);
        let rl = self.reward_grad_into(&ex.x, &ex.feat_l, -1.0, grad);
        rw - rl
    }

    /// Bradley–Terry probability that the preferred response wins.
    pub fn pref_prob(&self, ex: &PreferenceExample) -> f64 {
        sigmoid(self.margin(ex))
    }

    /// `Y = 1` iff the model ranks the preferred response at least as high.
    pub fn predict_label(&self, ex: &PreferenceExample) -> u8 {
        label_from_margin(self.margin(ex))
    }

    fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.dim() != self.arch.feature_dim() {
            return Err(FaroError::DimMismatch {
                what: "dataset feature dimension",
                expected: self.arch.feature_dim(),
                got: data.dim(),
            });
        }
        Ok(())
    }
}

/// Tie rule: a zero margin counts as a correct ranking.
#[inline]
pub fn label_from_margin(margin: f64) -> u8 {
    u8::from(margin >= 0.0)
}

/// Mean Bradley–Terry negative log-likelihood over `subset` (all examples
/// when `None`) with its analytic gradient.
pub fn nll_and_grad(params: &RewardParams, data: &Dataset, subset: Option<&[usize]>) -> Result<LossValue> {
    params.check_dataset(data)?;
    let all: Vec<usize>;
    let idx = match subset {
        Some(s) => s,
        None => {
            all = (0..data.len()).collect();
            &all
        }
    };
    if idx.is_empty() {
        return Err(FaroError::EmptyInput("nll subset"));
    }
    let n = params.weights.len();
    let mut loss = Accumulator::new();
    let mut grad = VecAccumulator::new(n);
    let mut g = vec![0.0; n];
    for &i in idx {
        let ex = data.examples().get(i).ok_or_else(|| {
            FaroError::validation("subset", format!("index {i} out of range for {} examples", data.len()))
        })?;
        let m = params.margin_grad(ex, &mut g);
        loss.add(-log_sigmoid(m));
        // d/dm −ln σ(m) = −σ(−m)
        grad.add_scaled(&g, -sigmoid(-m));
    }
    let scale = 1.0 / idx.len() as f64;
    Ok(LossValue {
        nll: loss.value() * scale,
        grad: grad.values().into_iter().map(|v| v * scale).collect(),
    })
}

/// NLL only; cheaper than [`nll_and_grad`].
pub fn nll(params: &RewardParams, data: &Dataset) -> Result<f64> {
    params.check_dataset(data)?;
    if data.is_empty() {
        return Err(FaroError::EmptyInput("nll dataset"));
    }
    let mut loss = Accumulator::new();
    for ex in data.examples() {
        loss.add(-log_sigmoid(params.margin(ex)));
    }
    Ok(loss.value() / data.len() as f64)
}
