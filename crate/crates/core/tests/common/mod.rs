//! Naive reference implementations used as test oracles. Everything here is
//! written from the definitions, loop by loop, without calling the library's
//! numeric code paths.

#![allow(dead_code, clippy::needless_range_loop)]

use faro::dataset::{AttributeLayout, Dataset, PreferenceExample};
use faro::direct_alignment::{DaPair, KtoExample};
use faro::fairness::Family;
use faro::policy::FiniteWorld;
use faro::reward_model::Arch;

pub fn sig(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn reward(arch: Arch, w: &[f64], x: &[f64], feat: &[f64]) -> f64 {
    let z: Vec<f64> = x.iter().chain(feat.iter()).copied().collect();
    match arch {
        Arch::Linear { .. } => z.iter().zip(w).map(|(a, b)| a * b).sum(),
        Arch::Mlp { d, hidden } => {
            let width = 2 * d;
            let (wm, rest) = w.split_at(hidden * width);
            let (b, v) = rest.split_at(hidden);
            (0..hidden)
                .map(|k| {
                    let pre: f64 = (0..width).map(|j| wm[k * width + j] * z[j]).sum::<f64>() + b[k];
                    v[k] * pre.tanh()
                })
                .sum()
        }
    }
}

pub fn margin(arch: Arch, w: &[f64], ex: &PreferenceExample) -> f64 {
    reward(arch, w, &ex.x, &ex.feat_w) - reward(arch, w, &ex.x, &ex.feat_l)
}

pub fn nll(arch: Arch, w: &[f64], data: &Dataset) -> f64 {
    let n = data.len() as f64;
    data.examples().iter().map(|ex| -sig(margin(arch, w, ex)).ln()).sum::<f64>() / n
}

/// Mixed-radix group index, last attribute fastest.
pub fn group_index(layout: &AttributeLayout, s: &[usize]) -> usize {
    let mut g = 0;
    for (v, card) in s.iter().zip(&layout.sensitive_dims) {
        g = g * card + v;
    }
    g
}

pub fn n_strata(family: Family, k: usize) -> usize {
    match family {
        Family::Dp => 1,
        Family::Eo => 2,
        Family::Cf => k,
    }
}

/// `cells[g][k]` = mean σ(margin) over members, or `None`. EO strata use
/// the labels predicted by `label_weights` (so they can be frozen).
pub fn proxy_cells(arch: Arch, w: &[f64], label_weights: &[f64], data: &Dataset, family: Family) -> Vec<Vec<Option<f64>>> {
    let layout = data.layout();
    let p: usize = layout.sensitive_dims.iter().product();
    let ks = n_strata(family, layout.unrestricted_card);
    let mut out = vec![vec![None; ks]; p];
    for g in 0..p {
        for k in 0..ks {
            let mut vals = Vec::new();
            for ex in data.examples() {
                if group_index(layout, &ex.s) != g {
                    continue;
                }
                let stratum = match family {
                    Family::Dp => 0,
                    Family::Eo => usize::from(margin(arch, label_weights, ex) >= 0.0),
                    Family::Cf => ex.u,
                };
                if stratum == k {
                    vals.push(sig(margin(arch, w, ex)));
                }
            }
            if !vals.is_empty() {
                out[g][k] = Some(vals.iter().sum::<f64>() / vals.len() as f64);
            }
        }
    }
    out
}

pub fn tolerance(family: Family, tols: &[f64], g: usize, k: usize, k_card: usize) -> f64 {
    if g == 0 {
        0.0
    } else if family == Family::Cf {
        tols[(g - 1) * k_card + k]
    } else {
        tols[g - 1]
    }
}

/// Anchored constraint vector from cell values; `None` if any cell is empty.
pub fn anchored(cells: &[Vec<Option<f64>>], family: Family, tols: &[f64], k_card: usize) -> Option<Vec<f64>> {
    let mut out = Vec::new();
    for g in 1..cells.len() {
        for k in 0..cells[g].len() {
            let d = cells[g][k]? - cells[0][k]?;
            let t = tolerance(family, tols, g, k, k_card);
            out.push(d - t);
            out.push(-d - t);
        }
    }
    if cells.iter().flatten().any(Option::is_none) {
        return None;
    }
    Some(out)
}

/// Max gap over all group pairs within each stratum.
pub fn max_gap(cells: &[Vec<Option<f64>>]) -> Option<f64> {
    if cells.iter().flatten().any(Option::is_none) {
        return None;
    }
    let mut best = 0.0f64;
    for i in 0..cells.len() {
        for j in 0..cells.len() {
            for k in 0..cells[i].len() {
                best = best.max((cells[i][k].unwrap() - cells[j][k].unwrap()).abs());
            }
        }
    }
    Some(best)
}

/// Central finite-difference gradient.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let orig = xp[i];
        xp[i] = orig + h;
        let fp = f(&xp);
        xp[i] = orig - h;
        let fm = f(&xp);
        xp[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Relative error floor: components whose magnitude is below this are
/// compared absolutely at this scale.
pub const REL_FLOOR: f64 = 1e-6;

pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(REL_FLOOR))
        .fold(0.0, f64::max)
}

/// Policy log-probabilities from the definition `ψ = [a; x ⊙ a]`.
pub fn log_policy(world: &FiniteWorld, theta: &[f64], ci: usize) -> Vec<f64> {
    let x = &world.contexts()[ci].features;
    let scores: Vec<f64> = world
        .actions_of(ci)
        .map(|a| {
            let psi: Vec<f64> = a.features.iter().copied().chain(x.iter().zip(&a.features).map(|(u, v)| u * v)).collect();
            psi.iter().zip(theta).map(|(p, t)| p * t).sum()
        })
        .collect();
    let z = scores.iter().map(|s| s.exp()).sum::<f64>().ln();
    scores.iter().map(|s| s - z).collect()
}

pub fn dpo_loss(world: &FiniteWorld, theta: &[f64], theta_ref: &[f64], pairs: &[DaPair], beta: f64) -> f64 {
    pairs
        .iter()
        .map(|p| {
            let lp = log_policy(world, theta, p.context);
            let lr = log_policy(world, theta_ref, p.context);
            let m = beta * ((lp[p.winner] - lr[p.winner]) - (lp[p.loser] - lr[p.loser]));
            -sig(m).ln()
        })
        .sum::<f64>()
        / pairs.len() as f64
}

pub fn kto_loss(world: &FiniteWorld, theta: &[f64], theta_ref: &[f64], data: &[KtoExample], beta: f64) -> f64 {
    data.iter()
        .map(|e| {
            let lr = log_policy(world, theta, e.context)[e.action] - log_policy(world, theta_ref, e.context)[e.action];
            let z = beta * lr;
            if e.desirable == 1 {
                -sig(z).ln()
            } else {
                -sig(-z).ln()
            }
        })
        .sum::<f64>()
        / data.len() as f64
}

/// Brute-force O(n²) non-dominated filter.
pub fn brute_frontier(points: &[(f64, f64)]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            !points.iter().enumerate().any(|(j, q)| {
                j != i && q.0 <= points[i].0 && q.1 <= points[i].1 && (q.0 < points[i].0 || q.1 < points[i].1)
            })
        })
        .collect()
}
