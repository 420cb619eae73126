//! Ordinal, cardinal and fairness evaluation of a reward model.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{FaroError, Result};
use crate::fairness::{self, Family};
use crate::numeric::Accumulator;
use crate::reward_model::RewardParams;

pub const DEFAULT_BINS: usize = 10;

/// A predicted probability and the binary outcome it should forecast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub prob: f64,
    pub label: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ordinal {
    pub acc01: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cardinal {
    pub ece: f64,
    pub mce: f64,
    pub rmsce: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessPanel {
    pub delta_dp: Option<f64>,
    pub delta_eo: Option<f64>,
    pub delta_cf: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ordinal: Ordinal,
    pub cardinal: Cardinal,
    pub fairness: FairnessPanel,
}

fn check(preds: &[Prediction]) -> Result<()> {
    if preds.is_empty() {
        return Err(FaroError::EmptyInput("predictions"));
    }
    for (i, p) in preds.iter().enumerate() {
        if !(0.0..=1.0).contains(&p.prob) {
            return Err(FaroError::validation("prob", format!("prediction {i} has p={} outside [0,1]", p.prob)));
        }
        if p.label > 1 {
            return Err(FaroError::validation("label", format!("prediction {i} has label {}", p.label)));
        }
    }
    Ok(())
}

/// Accuracy and F1 at threshold 0.5 (ties predict positive); F1 is 0 when
/// there are no true or predicted positives.
pub fn classification_metrics(preds: &[Prediction]) -> Result<Ordinal> {
    check(preds)?;
    let (mut tp, mut fp, mut fneg, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for p in preds {
        match (p.prob >= 0.5, p.label == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => tn += 1,
        }
    }
    let denom = 2 * tp + fp + fneg;
    Ok(Ordinal {
        acc01: (tp + tn) as f64 / preds.len() as f64,
        f1: if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 },
    })
}

/// ECE, MCE and RMSCE over `bins` equal-width bins on `[0, 1]`; empty bins
/// are skipped.
pub fn calibration_metrics(preds: &[Prediction], bins: usize) -> Result<Cardinal> {
    check(preds)?;
    if bins == 0 {
        return Err(FaroError::validation("bins", "must be >= 1"));
    }
    let mut sum_p = vec![Accumulator::new(); bins];
    let mut sum_y = vec![0usize; bins];
    let mut count = vec![0usize; bins];
    for p in preds {
        let b = ((p.prob * bins as f64) as usize).min(bins - 1);
        sum_p[b].add(p.prob);
        sum_y[b] += p.label as usize;
        count[b] += 1;
    }
    let n = preds.len() as f64;
    let (mut ece, mut sq, mut mce) = (Accumulator::new(), Accumulator::new(), 0.0f64);
    for b in 0..bins {
        if count[b] == 0 {
            continue;
        }
        let nb = count[b] as f64;
        let gap = (sum_p[b].value() / nb - sum_y[b] as f64 / nb).abs();
        ece.add(nb / n * gap);
        sq.add(nb / n * gap * gap);
        mce = mce.max(gap);
    }
    // ECE ≤ RMSCE ≤ MCE holds exactly; clamp away rounding at the boundaries.
    let ece = ece.value().min(mce);
    let rmsce = sq.value().sqrt().clamp(ece, mce);
    Ok(Cardinal { ece, mce, rmsce })
}

/// Predictions with balanced outcomes: even-indexed pairs are scored in the
/// recorded order (outcome 1), odd-indexed pairs with winner and loser
/// swapped (outcome 0).
pub fn predictions(params: &RewardParams, data: &Dataset) -> Vec<Prediction> {
    data.examples()
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let p = params.pref_prob(ex);
            if i % 2 == 0 {
                Prediction { prob: p, label: 1 }
            } else {
                Prediction { prob: 1.0 - p, label: 0 }
            }
        })
        .collect()
}

/// All three panels. A fairness entry is `None` when its cells are empty
/// (for example an EO label cell no example falls into).
pub fn evaluate(params: &RewardParams, data: &Dataset) -> Result<EvalReport> {
    let preds = predictions(params, data);
    let delta = |family| fairness::true_violation(params, data, family).ok();
    Ok(EvalReport {
        ordinal: classification_metrics(&preds)?,
        cardinal: calibration_metrics(&preds, DEFAULT_BINS)?,
        fairness: FairnessPanel {
            delta_dp: delta(Family::Dp),
            delta_eo: delta(Family::Eo),
            delta_cf: delta(Family::Cf),
        },
    })
}
