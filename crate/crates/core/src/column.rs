//! Per-column pieces common to coordinate descent and ECM.
//!
//! With `Sigma11` held fixed and `A = Sigma11^-1`, the objective restricted
//! to column `i` in the `(b, gamma)` coordinates is, up to constants,
//!
//! ```text
//! log gamma + a / gamma + rho_ii gamma + b'Vb - 2u'b + 2 sum_k rho_ki |b_k|
//! ```
//!
//! where `a = b'A S11 A b - 2 s12'A b + s22`, `V = A S11 A / gamma + rho_ii A`
//! and `u = A s12 / gamma`.

use nalgebra::{DMatrix, DVector};

use crate::error::{CovError, Result};
use crate::partition::{full_index, quad_form, symmetrize_in_place, ColumnPartition};
use crate::penalty::PenaltySpec;

/// `a = b' A S11 A b - 2 s12' A b + s22`. Nonnegative whenever `S` is PSD:
/// with `S = Y'Y/n` it equals `||y_i - Y_{-i} A b||^2 / n`.
pub fn compute_a(b: &DVector<f64>, part: &ColumnPartition) -> Result<f64> {
    let inv = part.sigma11_inverse()?;
    compute_a_with_inverse(b, part, &inv)
}

pub(crate) fn compute_a_with_inverse(
    b: &DVector<f64>,
    part: &ColumnPartition,
    sigma11_inv: &DMatrix<f64>,
) -> Result<f64> {
    if b.len() != part.s.m12.len() {
        return Err(CovError::DimensionMismatch { expected: part.s.m12.len(), got: b.len() });
    }
    let w = sigma11_inv * b;
    Ok(quad_form(&part.s.m11, &w) - 2.0 * part.s.m12.dot(&w) + part.s.m22)
}

/// Unique minimizer over `gamma > 0` of `log gamma + a / gamma + rho gamma`.
///
/// Equals `a` for `rho = 0` and `(-1 + sqrt(1 + 4 a rho)) / (2 rho)` otherwise;
/// evaluated as `2a / (1 + sqrt(1 + 4 a rho))`, which is the same quantity
/// without the cancellation for small `a rho`.
pub fn gamma_update(a: f64, rho: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() || !(rho >= 0.0) {
        return Err(CovError::DegenerateSubproblem { column: None, a, rho });
    }
    Ok(2.0 * a / (1.0 + (1.0 + 4.0 * a * rho).sqrt()))
}

/// The quadratic-plus-L1 problem `min_b b'Vb - 2u'b + 2 sum_k w_k |b_k|`.
#[derive(Clone, Debug, PartialEq)]
pub struct LassoSubproblem {
    pub v: DMatrix<f64>,
    pub u: DVector<f64>,
    /// Per-coordinate L1 weights `w_k` (all equal to `rho` for a scalar penalty).
    pub weights: DVector<f64>,
}

impl LassoSubproblem {
    pub fn new(v: DMatrix<f64>, u: DVector<f64>, rho: f64) -> Result<Self> {
        let q = u.len();
        Self::with_weights(v, u, DVector::from_element(q, rho))
    }

    pub fn with_weights(v: DMatrix<f64>, u: DVector<f64>, weights: DVector<f64>) -> Result<Self> {
        let q = u.len();
        if v.nrows() != q || v.ncols() != q || weights.len() != q {
            return Err(CovError::DimensionMismatch { expected: q, got: v.nrows() });
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(CovError::InvalidInput("lasso weights must be >= 0".into()));
        }
        Ok(Self { v, u, weights })
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn value(&self, beta: &DVector<f64>) -> f64 {
        let l1: f64 = beta.iter().zip(self.weights.iter()).map(|(b, w)| w * b.abs()).sum();
        quad_form(&self.v, beta) - 2.0 * self.u.dot(beta) + 2.0 * l1
    }
}

pub fn build_lasso_subproblem(part: &ColumnPartition, gamma: f64, penalty: &PenaltySpec) -> Result<LassoSubproblem> {
    let inv = part.sigma11_inverse()?;
    build_with_inverse(part, &inv, gamma, penalty)
}

pub(crate) fn build_with_inverse(
    part: &ColumnPartition,
    sigma11_inv: &DMatrix<f64>,
    gamma: f64,
    penalty: &PenaltySpec,
) -> Result<LassoSubproblem> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(CovError::NotPositiveDefinite { context: format!("gamma = {gamma} must be positive") });
    }
    let i = part.pivot();
    let q = part.s.m12.len();
    let diag_rho = penalty.at(i, i);
    let a_s11 = sigma11_inv * &part.s.m11;
    let mut v = &a_s11 * sigma11_inv / gamma;
    if diag_rho != 0.0 {
        v += sigma11_inv * diag_rho;
    }
    symmetrize_in_place(&mut v);
    let u = sigma11_inv * &part.s.m12 / gamma;
    let weights = DVector::from_fn(q, |k, _| penalty.at(full_index(i, k), i));
    Ok(LassoSubproblem { v, u, weights })
}

/// Writes `sigma12 = beta` (both triangles) and `sigma22` into column `i`.
pub(crate) fn write_column(sigma: &mut DMatrix<f64>, i: usize, beta: &DVector<f64>, sigma22: f64) {
    for (k, &b) in beta.iter().enumerate() {
        let r = full_index(i, k);
        sigma[(r, i)] = b;
        sigma[(i, r)] = b;
    }
    sigma[(i, i)] = sigma22;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{sample_covariance, CovarianceMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn part_of(sigma: &CovarianceMatrix, s: &CovarianceMatrix, i: usize) -> ColumnPartition {
        ColumnPartition::new(sigma, s, i).unwrap()
    }

    #[test]
    fn a_at_zero_b_is_s22() {
        let s = CovarianceMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.7]]).unwrap();
        let sigma = CovarianceMatrix::identity(2);
        let part = part_of(&sigma, &s, 1);
        assert_eq!(compute_a(&DVector::zeros(1), &part).unwrap(), 1.7);
    }

    #[test]
    fn a_vanishes_for_perfect_fit() {
        let s = CovarianceMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let sigma = CovarianceMatrix::identity(2);
        let part = part_of(&sigma, &s, 1);
        assert_eq!(compute_a(&DVector::from_element(1, 1.0), &part).unwrap(), 0.0);
    }

    #[test]
    fn a_is_residual_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..10 {
            let (n, p) = (12, 5);
            let y = DMatrix::from_fn(n, p, |_, _| rng.random_range(-2.0..2.0));
            let s = sample_covariance(&y).unwrap();
            let g = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
            let sigma = CovarianceMatrix::new(&g * g.transpose() + DMatrix::identity(p, p)).unwrap();
            let i = trial % p;
            let part = part_of(&sigma, &s, i);
            let b = DVector::from_fn(p - 1, |_, _| rng.random_range(-1.0..1.0));
            let a = compute_a(&b, &part).unwrap();

            // Direct route: residual of column i on the other columns with
            // coefficients Sigma11^-1 b, computed from Y itself.
            let others: Vec<usize> = (0..p).filter(|&k| k != i).collect();
            let y_rest = DMatrix::from_fn(n, p - 1, |r, c| y[(r, others[c])]);
            let coef = part.sigma.m11.clone().lu().solve(&b).unwrap();
            let resid = y.column(i) - &y_rest * coef;
            let direct = resid.norm_squared() / n as f64;
            assert!((a - direct).abs() < 1e-10 * direct.max(1.0), "a = {a}, direct = {direct}");
        }
    }

    #[test]
    fn gamma_branches() {
        assert_eq!(gamma_update(2.0, 0.0).unwrap(), 2.0);
        let g = gamma_update(2.0, 0.5).unwrap();
        assert!((g - (5f64.sqrt() - 1.0)).abs() < 1e-14);
        let tiny = gamma_update(1.0, 1e-14).unwrap();
        assert!((tiny - 1.0).abs() < 1e-12);
        let paper_form = (-1.0 + (1.0 + 4.0 * 5.0 * 2.0f64).sqrt()) / (2.0 * 2.0);
        assert!((gamma_update(5.0, 2.0).unwrap() - paper_form).abs() < 1e-14);
    }

    #[test]
    fn gamma_zero_residual_is_degenerate() {
        assert!(matches!(gamma_update(0.0, 1.0), Err(CovError::DegenerateSubproblem { column: None, .. })));
        assert!(gamma_update(-1e-18, 0.0).is_err());
    }

    #[test]
    fn subproblem_examples() {
        let i2 = CovarianceMatrix::identity(3);
        let part = part_of(&i2, &i2, 2);
        let sub = build_lasso_subproblem(&part, 1.0, &PenaltySpec::Scalar(0.0)).unwrap();
        assert_eq!(sub.v, DMatrix::identity(2, 2));
        let sub = build_lasso_subproblem(&part, 2.0, &PenaltySpec::Scalar(1.0)).unwrap();
        assert_eq!(sub.v, DMatrix::identity(2, 2) * 1.5);
        assert!(build_lasso_subproblem(&part, 0.0, &PenaltySpec::Scalar(1.0)).is_err());
    }

    #[test]
    fn subproblem_is_symmetric_pd() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let p = rng.random_range(3..8);
            let g = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
            let sigma = CovarianceMatrix::new(&g * g.transpose() + DMatrix::identity(p, p) * 0.3).unwrap();
            let y = DMatrix::from_fn(2 * p, p, |_, _| rng.random_range(-1.0..1.0));
            let s = sample_covariance(&y).unwrap();
            let part = part_of(&sigma, &s, rng.random_range(0..p));
            let gamma = rng.random_range(0.1..3.0);
            let sub = build_lasso_subproblem(&part, gamma, &PenaltySpec::Scalar(0.2)).unwrap();
            assert!((&sub.v - sub.v.transpose()).amax() < 1e-12);
            assert!(sub.v.clone().cholesky().is_some());
        }
    }
}
