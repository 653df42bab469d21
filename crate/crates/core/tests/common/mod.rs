//! Shared oracles for the integration suites: dense eigensolver checks,
//! least-squares slope fits, Kolmogorov-Smirnov distances, and grid
//! quadrature of unnormalized posteriors. Everything here is independent
//! of the library's own computational paths.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Random SPD matrix `B Bᵀ + shift I` with entries of `B` uniform in
/// `[-1, 1]`.
pub fn random_spd(dim: usize, shift: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    &b * b.transpose() + DMatrix::identity(dim, dim) * shift
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Kolmogorov-Smirnov distance between a sample and a reference CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max((f - (i as f64 + 1.0) / n).abs());
    }
    d
}

/// CDF of an unnormalized log-density on `[lo, hi]`, built by trapezoid
/// quadrature on a dense grid with linear interpolation between nodes.
pub struct QuadratureCdf {
    lo: f64,
    hi: f64,
    cumulative: Vec<f64>,
}

impl QuadratureCdf {
    pub fn new(lo: f64, hi: f64, nodes: usize, log_density: impl Fn(f64) -> f64) -> Self {
        assert!(nodes >= 2);
        let h = (hi - lo) / (nodes - 1) as f64;
        let logs: Vec<f64> = (0..nodes).map(|i| log_density(lo + i as f64 * h)).collect();
        let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
        let mut cumulative = vec![0.0; nodes];
        for i in 1..nodes {
            cumulative[i] = cumulative[i - 1] + 0.5 * (weights[i - 1] + weights[i]) * h;
        }
        let total = cumulative[nodes - 1];
        for c in cumulative.iter_mut() {
            *c /= total;
        }
        QuadratureCdf { lo, hi, cumulative }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        let n = self.cumulative.len();
        let pos = (x - self.lo) / (self.hi - self.lo) * (n - 1) as f64;
        let i = (pos.floor() as usize).min(n - 2);
        let frac = pos - i as f64;
        self.cumulative[i] * (1.0 - frac) + self.cumulative[i + 1] * frac
    }
}

/// Mean and standard deviation of a slice.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
