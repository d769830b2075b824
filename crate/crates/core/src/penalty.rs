use nalgebra::DMatrix;

use crate::error::{CovError, Result};
use crate::matrix::CovarianceMatrix;

/// Shrinkage applied to the entries of the covariance matrix.
///
/// `Scalar(rho)` penalizes every entry with the same weight. `Matrix(P)`
/// gives entry `(i, j)` the weight `P[i][j]`; `P` is symmetric and
/// nonnegative. Both forms are evaluated through [`PenaltySpec::at`], so a
/// constant matrix follows exactly the same arithmetic as the scalar form.
#[derive(Clone, Debug, PartialEq)]
pub enum PenaltySpec {
    Scalar(f64),
    Matrix(DMatrix<f64>),
}

impl PenaltySpec {
    pub fn scalar(rho: f64) -> Result<Self> {
        if !rho.is_finite() || rho < 0.0 {
            return Err(CovError::InvalidInput(format!("penalty must be finite and >= 0, got {rho}")));
        }
        Ok(PenaltySpec::Scalar(rho))
    }

    pub fn matrix(p: DMatrix<f64>) -> Result<Self> {
        let sym = CovarianceMatrix::new(p)?;
        if sym.as_matrix().iter().any(|&v| v < 0.0) {
            return Err(CovError::InvalidInput("penalty matrix has negative entries".into()));
        }
        Ok(PenaltySpec::Matrix(sym.into_inner()))
    }

    /// Constant matrix with every entry equal to `rho`.
    pub fn constant_matrix(rho: f64, p: usize) -> Result<Self> {
        Self::matrix(DMatrix::from_element(p, p, rho))
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        match self {
            PenaltySpec::Scalar(rho) => *rho,
            PenaltySpec::Matrix(m) => m[(i, j)],
        }
    }

    /// Checks that a matrix penalty matches the problem dimension.
    pub fn check_dim(&self, p: usize) -> Result<()> {
        match self {
            PenaltySpec::Scalar(_) => Ok(()),
            PenaltySpec::Matrix(m) if m.nrows() == p => Ok(()),
            PenaltySpec::Matrix(m) => Err(CovError::DimensionMismatch { expected: p, got: m.nrows() }),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            PenaltySpec::Scalar(rho) => *rho == 0.0,
            PenaltySpec::Matrix(m) => m.iter().all(|&v| v == 0.0),
        }
    }

    /// Smallest diagonal weight over a `p x p` problem.
    pub fn min_diagonal(&self, p: usize) -> f64 {
        (0..p).map(|i| self.at(i, i)).fold(f64::INFINITY, f64::min)
    }

    /// `sum_{i,j} P_ij |sigma_ij|`; off-diagonal entries count twice.
    pub fn weighted_l1(&self, sigma: &DMatrix<f64>) -> f64 {
        let p = sigma.nrows();
        let mut total = 0.0;
        for j in 0..p {
            for i in 0..p {
                total += self.at(i, j) * sigma[(i, j)].abs();
            }
        }
        total
    }
}

impl From<f64> for PenaltySpec {
    fn from(rho: f64) -> Self {
        PenaltySpec::Scalar(rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_asymmetric() {
        assert!(PenaltySpec::scalar(-0.1).is_err());
        assert!(PenaltySpec::scalar(f64::NAN).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        assert!(PenaltySpec::matrix(neg).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(PenaltySpec::matrix(asym).is_err());
    }

    #[test]
    fn weighted_l1_counts_off_diagonals_twice() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 2.0]);
        assert_eq!(PenaltySpec::Scalar(1.0).weighted_l1(&sigma), 4.0);
    }

    #[test]
    fn dimension_check() {
        let p = PenaltySpec::constant_matrix(0.1, 3).unwrap();
        assert!(p.check_dim(3).is_ok());
        assert!(matches!(p.check_dim(4), Err(CovError::DimensionMismatch { .. })));
    }
}
