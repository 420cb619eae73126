//! Small numerical helpers shared across modules.

/// Logistic function, stable for large |z|.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(z)` without overflow.
#[inline]
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Derivative of the logistic function.
#[inline]
pub fn sigmoid_prime(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 - s)
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Neumaier-compensated scalar sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Component-wise compensated sum of equal-length vectors.
#[derive(Debug, Clone)]
pub struct VecAccumulator {
    parts: Vec<Accumulator>,
}

impl VecAccumulator {
    pub fn new(len: usize) -> Self {
        Self {
            parts: vec![Accumulator::new(); len],
        }
    }

    #[inline]
    pub fn add_scaled(&mut self, v: &[f64], scale: f64) {
        for (acc, x) in self.parts.iter_mut().zip(v) {
            acc.add(scale * x);
        }
    }

    pub fn merge(&mut self, other: &VecAccumulator) {
        for (a, b) in self.parts.iter_mut().zip(&other.parts) {
            a.merge(b);
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.parts.iter().map(Accumulator::value).collect()
    }
}

/// Compensated sum of a slice.
pub fn stable_sum(xs: &[f64]) -> f64 {
    let mut acc = Accumulator::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(stable_sum(xs) / xs.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_saturates_without_overflow() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((1.0 - sigmoid(50.0)).abs() <= 1e-15);
        assert!(sigmoid(-700.0) >= 0.0);
        assert!(sigmoid(700.0) <= 1.0);
        assert!(log_sigmoid(-700.0).is_finite());
        assert!((log_sigmoid(-700.0) + 700.0).abs() < 1e-9);
    }

    #[test]
    fn log_sigmoid_matches_naive_in_safe_range() {
        for i in -40..=40 {
            let z = i as f64 * 0.5;
            let naive = (1.0 / (1.0 + (-z).exp())).ln();
            assert!((log_sigmoid(z) - naive).abs() < 1e-12, "z={z}");
        }
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(stable_sum(&xs), 2.0);
    }

    #[test]
    fn chunked_merge_matches_serial() {
        let xs: Vec<f64> = (0..10_000).map(|i| ((i * 7919) % 1000) as f64 * 1e-3 - 0.3).collect();
        let serial = stable_sum(&xs);
        let mut merged = Accumulator::new();
        for chunk in xs.chunks(37) {
            let mut a = Accumulator::new();
            chunk.iter().for_each(|&x| a.add(x));
            merged.merge(&a);
        }
        assert!((serial - merged.value()).abs() <= 1e-12 * serial.abs().max(1.0));
    }
}
