//! Preference data with demographic structure.
//!
//! Groups are the intersections of all sensitive attributes, encoded in mixed
//! radix with the last attribute varying fastest. Group 0 is the anchor that
//! every anchored constraint compares against.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{FaroError, Result};
use crate::numeric::sigmoid;
use crate::reward_model::{Arch, RewardParams};
use crate::rng::{self, Stream};

/// Flip probability per unit of bias strength for fully tilted groups.
pub const FLIP_RATE: f64 = 0.3;
/// Winner offset on the spurious dimension per unit of bias strength.
pub const SPURIOUS_OFFSET: f64 = 2.0;
/// Standard deviation of response features on the spurious dimension.
pub const SPURIOUS_SCALE: f64 = 0.5;
/// Tilt of the anchor group; non-anchor groups tilt in `(0, 1]`.
pub const ANCHOR_TILT: f64 = -0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeLayout {
    /// Cardinality of each sensitive attribute.
    pub sensitive_dims: Vec<usize>,
    /// Cardinality of the unrestricted attribute.
    pub unrestricted_card: usize,
}

impl AttributeLayout {
    pub fn new(sensitive_dims: Vec<usize>, unrestricted_card: usize) -> Result<Self> {
        let layout = Self {
            sensitive_dims,
            unrestricted_card,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// One sensitive attribute with `p` values and `k` unrestricted strata.
    pub fn single(p: usize, k: usize) -> Self {
        Self {
            sensitive_dims: vec![p],
            unrestricted_card: k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensitive_dims.is_empty() {
            return Err(FaroError::validation(
                "sensitive_dims",
                "at least one sensitive attribute is required",
            ));
        }
        if let Some(n) = self.sensitive_dims.iter().position(|&p| p == 0) {
            return Err(FaroError::validation(
                format!("sensitive_dims[{n}]"),
                "cardinality must be >= 1",
            ));
        }
        if self.unrestricted_card == 0 {
            return Err(FaroError::validation("unrestricted_card", "K must be >= 1"));
        }
        self.sensitive_dims
            .iter()
            .try_fold(1usize, |acc, &p| acc.checked_mul(p))
            .ok_or_else(|| FaroError::validation("sensitive_dims", "group count overflows"))?;
        Ok(())
    }

    /// Total number of intersectional groups `p`.
    pub fn n_groups(&self) -> usize {
        self.sensitive_dims.iter().product()
    }

    pub fn n_attributes(&self) -> usize {
        self.sensitive_dims.len()
    }

    pub fn group_index(&self, s: &[usize]) -> Result<usize> {
        if s.len() != self.sensitive_dims.len() {
            return Err(FaroError::DimMismatch {
                what: "sensitive attributes",
                expected: self.sensitive_dims.len(),
                got: s.len(),
            });
        }
        let mut id = 0usize;
        for (n, (&v, &card)) in s.iter().zip(&self.sensitive_dims).enumerate() {
            if v >= card {
                return Err(FaroError::validation(
                    format!("s[{n}]"),
                    format!("category {v} out of range [0, {card})"),
                ));
            }
            id = id * card + v;
        }
        Ok(id)
    }

    /// Inverse of [`group_index`](Self::group_index).
    pub fn group_attributes(&self, mut group: usize) -> Vec<usize> {
        let mut s = vec![0; self.sensitive_dims.len()];
        for (slot, &card) in s.iter_mut().zip(&self.sensitive_dims).rev() {
            *slot = group % card;
            group /= card;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceExample {
    pub x: Vec<f64>,
    /// Features of the preferred response.
    pub feat_w: Vec<f64>,
    /// Features of the rejected response.
    pub feat_l: Vec<f64>,
    pub s: Vec<usize>,
    pub u: usize,
}

impl PreferenceExample {
    /// Same example with the two responses exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            feat_w: self.feat_l.clone(),
            feat_l: self.feat_w.clone(),
            ..self.clone()
        }
    }
}

/// Immutable collection of preference examples sharing one layout.
#[derive(Debug, Clone)]
pub struct Dataset {
    layout: AttributeLayout,
    d: usize,
    examples: Vec<PreferenceExample>,
    groups: Vec<usize>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.layout == other.layout && self.d == other.d && self.examples == other.examples
    }
}

impl Dataset {
    pub fn new(layout: AttributeLayout, d: usize, examples: Vec<PreferenceExample>) -> Result<Self> {
        layout.validate()?;
        if d == 0 {
            return Err(FaroError::validation("d", "feature dimension must be >= 1"));
        }
        let groups = examples
            .iter()
            .enumerate()
            .map(|(row, ex)| check_example(&layout, d, ex).map_err(|e| at_row(row, e)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layout,
            d,
            examples,
            groups,
        })
    }

    pub fn layout(&self) -> &AttributeLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn examples(&self) -> &[PreferenceExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn n_groups(&self) -> usize {
        self.layout.n_groups()
    }

    /// Intersectional group of example `idx`.
    pub fn group_of(&self, idx: usize) -> usize {
        self.groups[idx]
    }

    pub fn group_ids(&self) -> &[usize] {
        &self.groups
    }

    pub fn group_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_groups()];
        for &g in &self.groups {
            counts[g] += 1;
        }
        counts
    }

    /// Smallest size among non-empty groups, `None` if the dataset is empty.
    pub fn n_min(&self) -> Option<usize> {
        self.group_counts().into_iter().filter(|&c| c > 0).min()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            layout: self.layout.clone(),
            d: self.d,
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            groups: indices.iter().map(|&i| self.groups[i]).collect(),
        }
    }

    /// Random disjoint split; the second part holds `round(test_frac * n)` examples.
    pub fn split(&self, test_frac: f64, seed: u64) -> Result<(Self, Self)> {
        if !(0.0..1.0).contains(&test_frac) {
            return Err(FaroError::validation("test_frac", "must lie in [0, 1)"));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        let mut rng = rng::stream(seed, Stream::Split);
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let n_test = (test_frac * self.len() as f64).round() as usize;
        let (test, train) = order.split_at(n_test);
        let mut train = train.to_vec();
        let mut test = test.to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.subset(&train), self.subset(&test)))
    }
}

fn check_example(layout: &AttributeLayout, d: usize, ex: &PreferenceExample) -> Result<usize> {
    for (what, v) in [("x", &ex.x), ("feat_w", &ex.feat_w), ("feat_l", &ex.feat_l)] {
        if v.len() != d {
            return Err(FaroError::DimMismatch {
                what,
                expected: d,
                got: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(FaroError::validation(what, "non-finite feature value"));
        }
    }
    if ex.u >= layout.unrestricted_card {
        return Err(FaroError::validation(
            "u",
            format!("category {} out of range [0, {})", ex.u, layout.unrestricted_card),
        ));
    }
    layout.group_index(&ex.s)
}

fn at_row(row: usize, e: FaroError) -> FaroError {
    FaroError::Parse {
        row,
        msg: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_examples: usize,
    pub d: usize,
    pub layout: AttributeLayout,
    pub bias_strength: f64,
    /// Temperature of the ground-truth Bradley–Terry labels; 0 means noiseless.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        if self.n_examples == 0 {
            return Err(FaroError::validation("n_examples", "must be >= 1"));
        }
        if self.d < 2 {
            return Err(FaroError::validation(
                "d",
                "must be >= 2 (the last dimension carries the planted cue)",
            ));
        }
        if !(self.bias_strength >= 0.0 && self.bias_strength.is_finite()) {
            return Err(FaroError::validation("bias_strength", "must be finite and >= 0"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(FaroError::validation("noise", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// How strongly group `g` (out of `p`) is affected by planted bias.
///
/// The anchor leans slightly against the spurious cue, every other group
/// leans towards it in proportion to its index.
pub fn group_tilt(g: usize, p: usize) -> f64 {
    if p <= 1 {
        0.0
    } else if g == 0 {
        ANCHOR_TILT
    } else {
        g as f64 / (p - 1) as f64
    }
}

/// Ground-truth response-quality weights: equal weight on the first `d - 1`
/// dimensions, none on the spurious last dimension. Unit norm.
pub fn ground_truth_weights(d: usize) -> Vec<f64> {
    let mut w = vec![0.0; d];
    let k = d.saturating_sub(1).max(1);
    for v in w.iter_mut().take(k) {
        *v = 1.0 / (k as f64).sqrt();
    }
    if d == 1 {
        w[0] = 1.0;
    }
    w
}

/// The generating reward as a linear reward model (context weights zero).
pub fn ground_truth_params(d: usize) -> RewardParams {
    let mut weights = vec![0.0; 2 * d];
    weights[d..].copy_from_slice(&ground_truth_weights(d));
    RewardParams::new(Arch::Linear { d }, weights).expect("weight length matches")
}

/// Draws a dataset whose labels follow a linear Bradley–Terry ground truth,
/// corrupted per group by a label flip and a spurious winner offset, both
/// scaled by `bias_strength`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    cfg.validate()?;
    let d = cfg.d;
    let p = cfg.layout.n_groups();
    let spurious = d - 1;
    let w_true = ground_truth_weights(d);
    let mut rng = rng::stream(cfg.seed, Stream::Dataset);
    let normal = |rng: &mut rand_chacha::ChaCha20Rng| -> f64 { rng.sample(StandardNormal) };

    let mut examples = Vec::with_capacity(cfg.n_examples);
    for _ in 0..cfg.n_examples {
        let s: Vec<usize> = cfg
            .layout
            .sensitive_dims
            .iter()
            .map(|&card| rng.random_range(0..card))
            .collect();
        let u = rng.random_range(0..cfg.layout.unrestricted_card);
        let g = cfg.layout.group_index(&s)?;
        let tilt = group_tilt(g, p);

        let mut x: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
        x[0] += cfg.bias_strength * tilt;

        let mut a: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
        let mut b: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
        a[spurious] *= SPURIOUS_SCALE;
        b[spurious] *= SPURIOUS_SCALE;

        let margin: f64 = w_true.iter().zip(a.iter().zip(&b)).map(|(w, (ai, bi))| w * (ai - bi)).sum();
        let a_wins = if cfg.noise > 0.0 {
            rng.random::<f64>() < sigmoid(margin / cfg.noise)
        } else {
            let _ = rng.random::<f64>();
            margin >= 0.0
        };
        let flip_p = (FLIP_RATE * cfg.bias_strength * tilt.max(0.0)).min(0.5);
        let flip = rng.random::<f64>() < flip_p;

        let (mut feat_w, feat_l) = if a_wins != flip { (a, b) } else { (b, a) };
        feat_w[spurious] += SPURIOUS_OFFSET * cfg.bias_strength * tilt;

        examples.push(PreferenceExample {
            x,
            feat_w,
            feat_l,
            s,
            u,
        });
    }
    Dataset::new(cfg.layout.clone(), d, examples)
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    let layout = ds.layout();
    let n = layout.n_attributes();

    let mut meta_names = vec!["d".to_string(), "N".to_string()];
    meta_names.extend((1..=n).map(|i| format!("p_{i}")));
    meta_names.push("K".to_string());
    w.write_record(&meta_names)?;
    let mut meta = vec![ds.dim().to_string(), n.to_string()];
    meta.extend(layout.sensitive_dims.iter().map(|p| p.to_string()));
    meta.push(layout.unrestricted_card.to_string());
    w.write_record(&meta)?;

    w.write_record(data_header(ds.dim(), n))?;
    for ex in ds.examples() {
        let mut row: Vec<String> = Vec::with_capacity(3 * ds.dim() + n + 1);
        row.extend(ex.x.iter().map(|&v| fmt_f64(v)));
        row.extend(ex.feat_w.iter().map(|&v| fmt_f64(v)));
        row.extend(ex.feat_l.iter().map(|&v| fmt_f64(v)));
        row.extend(ex.s.iter().map(|v| v.to_string()));
        row.push(ex.u.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn data_header(d: usize, n: usize) -> Vec<String> {
    let mut h: Vec<String> = Vec::with_capacity(3 * d + n + 1);
    h.extend((0..d).map(|i| format!("x_{i}")));
    h.extend((0..d).map(|i| format!("fw_{i}")));
    h.extend((0..d).map(|i| format!("fl_{i}")));
    h.extend((1..=n).map(|i| format!("s_{i}")));
    h.push("u".to_string());
    h
}

/// Reads the CSV layout written by [`write_csv`]. Row numbers in errors are
/// 1-based file lines.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = r.records();
    let mut next = |line: usize| -> Result<csv::StringRecord> {
        records
            .next()
            .ok_or(FaroError::Parse {
                row: line,
                msg: "unexpected end of file".into(),
            })?
            .map_err(FaroError::from)
    };

    let _meta_names = next(1)?;
    let meta = next(2)?;
    let parse_usize = |rec: &csv::StringRecord, i: usize, line: usize| -> Result<usize> {
        rec.get(i)
            .ok_or_else(|| FaroError::Parse {
                row: line,
                msg: format!("missing column {i}"),
            })?
            .trim()
            .parse::<usize>()
            .map_err(|e| FaroError::Parse {
                row: line,
                msg: format!("column {i}: {e}"),
            })
    };
    let d = parse_usize(&meta, 0, 2)?;
    let n = parse_usize(&meta, 1, 2)?;
    if meta.len() != n + 3 {
        return Err(FaroError::Parse {
            row: 2,
            msg: format!("header declares N={n} but has {} fields", meta.len()),
        });
    }
    let dims = (0..n).map(|i| parse_usize(&meta, 2 + i, 2)).collect::<Result<Vec<_>>>()?;
    let k = parse_usize(&meta, 2 + n, 2)?;
    let layout = AttributeLayout::new(dims, k).map_err(|e| at_row(2, e))?;

    let header = next(3)?;
    let width = 3 * d + n + 1;
    if header.len() != width {
        return Err(FaroError::Parse {
            row: 3,
            msg: format!("expected {width} data columns, found {}", header.len()),
        });
    }

    let mut examples = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 4;
        let rec = rec?;
        if rec.len() != width {
            return Err(FaroError::Parse {
                row: line,
                msg: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let float = |j: usize| -> Result<f64> {
            rec[j].trim().parse::<f64>().map_err(|e| FaroError::Parse {
                row: line,
                msg: format!("column {j}: {e}"),
            })
        };
        let floats = |range: std::ops::Range<usize>| range.map(float).collect::<Result<Vec<f64>>>();
        let ex = PreferenceExample {
            x: floats(0..d)?,
            feat_w: floats(d..2 * d)?,
            feat_l: floats(2 * d..3 * d)?,
            s: (0..n)
                .map(|j| parse_usize(&rec, 3 * d + j, line))
                .collect::<Result<Vec<_>>>()?,
            u: parse_usize(&rec, 3 * d + n, line)?,
        };
        check_example(&layout, d, &ex).map_err(|e| at_row(line, e))?;
        examples.push(ex);
    }
    Dataset::new(layout, d, examples)
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_csv(ds, BufWriter::new(file))
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = File::open(path)?;
    read_csv(BufReader::new(file))
}
