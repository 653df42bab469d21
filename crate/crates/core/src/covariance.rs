//! Covariance representations and the SPD machinery built on them.
//!
//! All noise models in this crate are symmetric strictly positive definite
//! (SPD) covariances in one of three forms: a scalar multiple of the
//! identity, a diagonal matrix, or a full dense matrix. SPD-ness is
//! certified by an attempted Cholesky factorization, never by an
//! eigendecomposition; the factor is cached on construction and reused for
//! solves, log-determinants and sampling.
//!
//! The strict Löwner order `A ≻ B` (meaning `A - B` is strictly positive
//! definite) is decided the same way, with a pivot margin of
//! `1e-14 · trace(A)` to make the boundary decidable in floating point.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use std::hash::{Hash, Hasher};

/// Relative tolerance against which a full matrix must be symmetric before
/// it is symmetrized as `(Q + Qᵀ)/2`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Pivot margin for the strict Löwner test, scaled by `trace(A)`.
pub const STRICTNESS_MARGIN: f64 = 1e-14;

/// Attempts a lower Cholesky factorization, requiring every pivot to exceed
/// `pivot_floor`. Returns `None` when the matrix fails that certificate.
pub(crate) fn cholesky_lower(a: &DMatrix<f64>, pivot_floor: f64) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot.is_finite() && pivot > pivot_floor) {
            return None;
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` given the lower factor.
pub(crate) fn cholesky_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let y = l
        .solve_lower_triangular(b)
        .expect("cholesky factor has positive diagonal");
    l.transpose()
        .solve_upper_triangular(&y)
        .expect("cholesky factor has positive diagonal")
}

fn logdet_from_factor(l: &DMatrix<f64>) -> f64 {
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Full SPD covariance with its cached lower Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct FullCovariance {
    matrix: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl FullCovariance {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// SPD covariance in scalar-identity, diagonal, or full form.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceSpec {
    /// `σ² I` with an explicit dimension.
    ScalarIdentity { variance: f64, dim: usize },
    /// `diag(d)` with strictly positive entries.
    Diagonal(Vec<f64>),
    /// Dense symmetric positive definite matrix.
    Full(FullCovariance),
}

/// Outcome of a strict Löwner comparison `A ≻ B`.
///
/// `Boundary` marks pairs whose difference cannot be certified strictly
/// positive definite but sits within the pivot margin of the boundary;
/// callers that only need a yes/no answer should treat it as "no".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    Strict,
    Boundary,
    Below,
}

impl CovarianceSpec {
    /// `σ² I` on `dim` dimensions.
    pub fn scalar_identity(variance: f64, dim: usize) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::invalid(format!(
                "scalar covariance needs positive finite variance, got {variance}"
            )));
        }
        if dim == 0 {
            return Err(Error::invalid("covariance dimension must be positive"));
        }
        Ok(CovarianceSpec::ScalarIdentity { variance, dim })
    }

    /// Diagonal covariance with strictly positive entries.
    pub fn diagonal(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("covariance dimension must be positive"));
        }
        if let Some(d) = entries.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::invalid(format!(
                "diagonal covariance entries must be positive and finite, got {d}"
            )));
        }
        Ok(CovarianceSpec::Diagonal(entries))
    }

    /// Full covariance. The input must be symmetric within
    /// `SYMMETRY_TOL · ‖Q‖_F`; it is then symmetrized as `(Q + Qᵀ)/2` and
    /// must admit a Cholesky factorization.
    pub fn full(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() || q.nrows() == 0 {
            return Err(Error::invalid(
                "full covariance must be square and nonempty",
            ));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("full covariance entries must be finite"));
        }
        let norm = q.norm();
        let asym = (&q - q.transpose()).norm();
        if asym > SYMMETRY_TOL * norm.max(f64::MIN_POSITIVE) {
            return Err(Error::NotSpd(format!(
                "asymmetry {asym:.3e} exceeds tolerance {:.3e}",
                SYMMETRY_TOL * norm
            )));
        }
        let sym = (&q + q.transpose()) * 0.5;
        let factor = cholesky_lower(&sym, 0.0)
            .ok_or_else(|| Error::NotSpd("cholesky factorization failed".into()))?;
        Ok(CovarianceSpec::Full(FullCovariance {
            matrix: sym,
            factor,
        }))
    }

    pub fn dim(&self) -> usize {
        match self {
            CovarianceSpec::ScalarIdentity { dim, .. } => *dim,
            CovarianceSpec::Diagonal(d) => d.len(),
            CovarianceSpec::Full(f) => f.matrix.nrows(),
        }
    }

    /// Diagonal of the covariance as a vector.
    pub fn diagonal_entries(&self) -> Vec<f64> {
        match self {
            CovarianceSpec::ScalarIdentity { variance, dim } => vec![*variance; *dim],
            CovarianceSpec::Diagonal(d) => d.clone(),
            CovarianceSpec::Full(f) => (0..f.matrix.nrows()).map(|i| f.matrix[(i, i)]).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        self.diagonal_entries().iter().sum()
    }

    /// `log |Σ|` from the cached factorization.
    pub fn log_det(&self) -> f64 {
        match self {
            CovarianceSpec::ScalarIdentity { variance, dim } => *dim as f64 * variance.ln(),
            CovarianceSpec::Diagonal(d) => d.iter().map(|x| x.ln()).sum(),
            CovarianceSpec::Full(f) => logdet_from_factor(&f.factor),
        }
    }

    /// Scales the covariance by a positive factor.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::invalid(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        Ok(match self {
            CovarianceSpec::ScalarIdentity { variance, dim } => CovarianceSpec::ScalarIdentity {
                variance: variance * factor,
                dim: *dim,
            },
            CovarianceSpec::Diagonal(d) => {
                CovarianceSpec::Diagonal(d.iter().map(|x| x * factor).collect())
            }
            CovarianceSpec::Full(f) => CovarianceSpec::Full(FullCovariance {
                matrix: &f.matrix * factor,
                factor: &f.factor * factor.sqrt(),
            }),
        })
    }

    /// Widens a scalar covariance to diagonal form; diagonal stays as is.
    pub fn to_diagonal(&self) -> Result<Self> {
        match self {
            CovarianceSpec::Full(_) => Err(Error::UnsupportedInput(
                "full covariance has no diagonal representation".into(),
            )),
            other => Ok(CovarianceSpec::Diagonal(other.diagonal_entries())),
        }
    }

    /// Widens any variant to an explicit full matrix.
    pub fn to_full(&self) -> Self {
        match self {
            CovarianceSpec::Full(f) => CovarianceSpec::Full(f.clone()),
            other => CovarianceSpec::full(other.to_dense())
                .expect("scalar and diagonal variants are SPD by construction"),
        }
    }

    /// Dense copy of the covariance matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            CovarianceSpec::ScalarIdentity { variance, dim } => {
                DMatrix::identity(*dim, *dim) * *variance
            }
            CovarianceSpec::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_row_slice(d)),
            CovarianceSpec::Full(f) => f.matrix.clone(),
        }
    }

    /// Dense precision matrix `Σ⁻¹`, via the cached factor for full inputs.
    pub(crate) fn dense_precision(&self) -> DMatrix<f64> {
        match self {
            CovarianceSpec::ScalarIdentity { variance, dim } => {
                DMatrix::identity(*dim, *dim) / *variance
            }
            CovarianceSpec::Diagonal(d) => {
                DMatrix::from_diagonal(&DVector::from_iterator(d.len(), d.iter().map(|x| 1.0 / x)))
            }
            CovarianceSpec::Full(f) => {
                let n = f.matrix.nrows();
                let mut inv = DMatrix::zeros(n, n);
                for j in 0..n {
                    let e = DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
                    inv.set_column(j, &cholesky_solve(&f.factor, &e));
                }
                // Symmetrize away factorization round-off.
                (&inv + inv.transpose()) * 0.5
            }
        }
    }

    /// One draw from `N(mean, Σ)`.
    pub fn sample<R: Rng + ?Sized>(&self, mean: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        if mean.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: mean.len(),
            });
        }
        Ok(match self {
            CovarianceSpec::ScalarIdentity { variance, .. } => {
                let sd = variance.sqrt();
                mean.iter()
                    .map(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
            CovarianceSpec::Diagonal(d) => mean
                .iter()
                .zip(d)
                .map(|(m, v)| m + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            CovarianceSpec::Full(f) => {
                let z = DVector::from_iterator(
                    mean.len(),
                    (0..mean.len()).map(|_| rng.sample::<f64, _>(StandardNormal)),
                );
                let correlated = &f.factor * z;
                mean.iter()
                    .zip(correlated.iter())
                    .map(|(m, c)| m + c)
                    .collect()
            }
        })
    }

    /// Content hash binding dimension, variant and entries; used to reject
    /// likelihood ratios formed under different noise models.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.dim().hash(&mut h);
        match self {
            CovarianceSpec::ScalarIdentity { variance, .. } => {
                0u8.hash(&mut h);
                variance.to_bits().hash(&mut h);
            }
            CovarianceSpec::Diagonal(d) => {
                1u8.hash(&mut h);
                for x in d {
                    x.to_bits().hash(&mut h);
                }
            }
            CovarianceSpec::Full(f) => {
                2u8.hash(&mut h);
                for x in f.matrix.iter() {
                    x.to_bits().hash(&mut h);
                }
            }
        }
        h.finish()
    }
}

fn check_same_dim(a: &CovarianceSpec, b: &CovarianceSpec) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// Classifies the strict Löwner comparison `A ≻ B`.
///
/// `A - B` must factor with all pivots above `1e-14 · trace(A)` to count as
/// strict. Differences within that margin of the positive-semidefinite
/// boundary are reported as [`Dominance::Boundary`].
pub fn dominance(a: &CovarianceSpec, b: &CovarianceSpec) -> Result<Dominance> {
    check_same_dim(a, b)?;
    let margin = STRICTNESS_MARGIN * a.trace();
    let diagonal_pair =
        !matches!(a, CovarianceSpec::Full(_)) && !matches!(b, CovarianceSpec::Full(_));
    if diagonal_pair {
        let da = a.diagonal_entries();
        let db = b.diagonal_entries();
        let min_diff = da
            .iter()
            .zip(&db)
            .map(|(x, y)| x - y)
            .fold(f64::INFINITY, f64::min);
        return Ok(if min_diff > margin {
            Dominance::Strict
        } else if min_diff > -margin {
            Dominance::Boundary
        } else {
            Dominance::Below
        });
    }
    let diff = a.to_dense() - b.to_dense();
    if cholesky_lower(&diff, margin).is_some() {
        return Ok(Dominance::Strict);
    }
    let n = diff.nrows();
    let shifted = &diff + DMatrix::identity(n, n) * (2.0 * margin);
    if cholesky_lower(&shifted, margin).is_some() {
        Ok(Dominance::Boundary)
    } else {
        Ok(Dominance::Below)
    }
}

/// True iff `A - B` is strictly positive definite (with the pivot margin).
pub fn loewner_strictly_dominates(a: &CovarianceSpec, b: &CovarianceSpec) -> Result<bool> {
    Ok(dominance(a, b)? == Dominance::Strict)
}

/// Quadratic form `‖v‖²_{Q⁻¹} = vᵀ Q⁻¹ v`, computed by an SPD solve.
///
/// For full covariances the result is assembled as `‖L⁻¹v‖²`, which is
/// nonnegative by construction.
pub fn weighted_norm_sq(v: &[f64], q: &CovarianceSpec) -> Result<f64> {
    if v.len() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            got: v.len(),
        });
    }
    Ok(match q {
        CovarianceSpec::ScalarIdentity { variance, .. } => {
            v.iter().map(|x| x * x).sum::<f64>() / variance
        }
        CovarianceSpec::Diagonal(d) => v.iter().zip(d).map(|(x, di)| x * x / di).sum(),
        CovarianceSpec::Full(f) => {
            let rhs = DVector::from_row_slice(v);
            let w = f
                .factor
                .solve_lower_triangular(&rhs)
                .expect("cached factor has positive diagonal");
            w.dot(&w)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let b = DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        &b * b.transpose() + DMatrix::identity(dim, dim) * 0.1
    }

    fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
        SymmetricEigen::new(m.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn constructors_validate() {
        assert!(CovarianceSpec::scalar_identity(0.0, 3).is_err());
        assert!(CovarianceSpec::scalar_identity(1.0, 0).is_err());
        assert!(CovarianceSpec::diagonal(vec![1.0, -0.5]).is_err());
        assert!(CovarianceSpec::diagonal(vec![]).is_err());
        // Asymmetric beyond tolerance.
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        assert!(matches!(CovarianceSpec::full(q), Err(Error::NotSpd(_))));
        // Symmetric but indefinite.
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(CovarianceSpec::full(q), Err(Error::NotSpd(_))));
        // Tiny asymmetry within tolerance gets symmetrized.
        let eps = 1e-15;
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.5 + eps, 0.5 - eps, 1.0]);
        assert!(CovarianceSpec::full(q).is_ok());
    }

    #[test]
    fn loewner_hand_cases() {
        let eye = CovarianceSpec::scalar_identity(1.0, 2).unwrap();
        let half = CovarianceSpec::scalar_identity(0.5, 2).unwrap();
        assert!(loewner_strictly_dominates(&eye, &half).unwrap());
        // The strict order is irreflexive.
        assert!(!loewner_strictly_dominates(&eye, &eye).unwrap());
        assert_eq!(dominance(&eye, &eye).unwrap(), Dominance::Boundary);
        // diag(1,1) vs diag(0.5,1.5): difference has eigenvalues {0.5,-0.5}.
        let d = CovarianceSpec::diagonal(vec![0.5, 1.5]).unwrap();
        assert!(!loewner_strictly_dominates(&eye, &d).unwrap());
        assert_eq!(dominance(&eye, &d).unwrap(), Dominance::Below);
        // Dimension mismatch.
        let d3 = CovarianceSpec::diagonal(vec![1.0, 1.0, 1.0]).unwrap();
        assert!(loewner_strictly_dominates(&eye, &d3).is_err());
    }

    #[test]
    fn loewner_agrees_with_eigensolver_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for dim in 1..=8 {
            for _ in 0..40 {
                let a = random_spd(dim, &mut rng);
                let b = random_spd(dim, &mut rng);
                let diff = &a - &b;
                let expected = min_eigenvalue(&diff) > 0.0;
                let got = loewner_strictly_dominates(
                    &CovarianceSpec::full(a).unwrap(),
                    &CovarianceSpec::full(b).unwrap(),
                )
                .unwrap();
                assert_eq!(got, expected, "dim {dim}");
            }
        }
    }

    #[test]
    fn weighted_norm_hand_cases() {
        let eye = CovarianceSpec::scalar_identity(1.0, 3).unwrap();
        let v = [1.0, -2.0, 2.0];
        assert_relative_eq!(
            weighted_norm_sq(&v, &eye).unwrap(),
            9.0,
            max_relative = 1e-15
        );

        let d = CovarianceSpec::diagonal(vec![0.25, 1.0]).unwrap();
        assert_relative_eq!(
            weighted_norm_sq(&[0.5, -1.0], &d).unwrap(),
            2.0,
            max_relative = 1e-15
        );

        assert_eq!(weighted_norm_sq(&[0.0, 0.0], &d).unwrap(), 0.0);
        assert!(weighted_norm_sq(&[1.0], &d).is_err());
    }

    #[test]
    fn weighted_norm_scalar_scaling() {
        let v = [0.3, -1.7, 2.2, 0.9];
        let base: f64 = v.iter().map(|x| x * x).sum();
        for sigma_sq in [1e-6, 0.25, 1.0, 73.0] {
            let q = CovarianceSpec::scalar_identity(sigma_sq, 4).unwrap();
            assert_relative_eq!(
                weighted_norm_sq(&v, &q).unwrap(),
                base / sigma_sq,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn variant_conversions_preserve_weighted_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let dim = 1 + (rng.random::<u32>() % 6) as usize;
            let variance = 0.1 + rng.random::<f64>();
            let v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let scalar = CovarianceSpec::scalar_identity(variance, dim).unwrap();
            let diag = scalar.to_diagonal().unwrap();
            let full = scalar.to_full();
            let reference = weighted_norm_sq(&v, &scalar).unwrap();
            assert_relative_eq!(
                weighted_norm_sq(&v, &diag).unwrap(),
                reference,
                max_relative = 1e-10
            );
            assert_relative_eq!(
                weighted_norm_sq(&v, &full).unwrap(),
                reference,
                max_relative = 1e-10
            );

            let entries: Vec<f64> = (0..dim).map(|_| 0.1 + rng.random::<f64>()).collect();
            let diag = CovarianceSpec::diagonal(entries).unwrap();
            let full = diag.to_full();
            assert_relative_eq!(
                weighted_norm_sq(&v, &full).unwrap(),
                weighted_norm_sq(&v, &diag).unwrap(),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn log_det_matches_dense_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_spd(5, &mut rng);
        let spec = CovarianceSpec::full(q.clone()).unwrap();
        let eig = SymmetricEigen::new(q);
        let expected: f64 = eig.eigenvalues.iter().map(|l| l.ln()).sum();
        assert_relative_eq!(spec.log_det(), expected, max_relative = 1e-10);

        let d = CovarianceSpec::diagonal(vec![0.25, 4.0]).unwrap();
        assert_relative_eq!(d.log_det(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn precision_inverts_the_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let q = random_spd(4, &mut rng);
        let spec = CovarianceSpec::full(q.clone()).unwrap();
        let prod = &q * spec.dense_precision();
        assert!((prod - DMatrix::<f64>::identity(4, 4)).norm() < 1e-10);
    }

    #[test]
    fn sampling_has_requested_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = CovarianceSpec::full(DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0])).unwrap();
        let mean = [1.0, -2.0];
        let n = 50_000;
        let mut acc = [0.0f64; 2];
        let mut cross = 0.0;
        for _ in 0..n {
            let x = q.sample(&mean, &mut rng).unwrap();
            acc[0] += x[0];
            acc[1] += x[1];
            cross += (x[0] - mean[0]) * (x[1] - mean[1]);
        }
        assert!((acc[0] / n as f64 - 1.0).abs() < 0.02);
        assert!((acc[1] / n as f64 + 2.0).abs() < 0.02);
        assert!((cross / n as f64 - 0.6).abs() < 0.03);
    }

    #[test]
    fn fingerprint_distinguishes_content() {
        let a = CovarianceSpec::scalar_identity(1.0, 3).unwrap();
        let b = CovarianceSpec::scalar_identity(1.0, 3).unwrap();
        let c = CovarianceSpec::scalar_identity(1.0 + 1e-12, 3).unwrap();
        let d = CovarianceSpec::diagonal(vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
        // Same matrix, different variant: still a different noise object.
        assert_ne!(a.fingerprint(), d.fingerprint());
    }

    #[test]
    fn scaled_full_keeps_factor_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let q = random_spd(3, &mut rng);
        let spec = CovarianceSpec::full(q.clone())
            .unwrap()
            .scaled(2.5)
            .unwrap();
        let direct = CovarianceSpec::full(q * 2.5).unwrap();
        assert_relative_eq!(spec.log_det(), direct.log_det(), max_relative = 1e-12);
        let v = [0.3, -0.4, 1.1];
        assert_relative_eq!(
            weighted_norm_sq(&v, &spec).unwrap(),
            weighted_norm_sq(&v, &direct).unwrap(),
            max_relative = 1e-12
        );
    }
}
