//! The penalized negative log-likelihood
//! `g(Sigma) = log det Sigma + tr(S Sigma^-1) + sum_ij P_ij |sigma_ij|`.

use crate::error::{CovError, Result};
use crate::matrix::{log_det_from_cholesky, CovarianceMatrix};
use crate::penalty::PenaltySpec;

/// The three additive pieces of the objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveTerms {
    pub log_det: f64,
    pub trace: f64,
    pub penalty: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.log_det + self.trace + self.penalty
    }
}

pub fn objective_terms(
    sigma: &CovarianceMatrix,
    s: &CovarianceMatrix,
    penalty: &PenaltySpec,
) -> Result<ObjectiveTerms> {
    let p = sigma.dim();
    if s.dim() != p {
        return Err(CovError::DimensionMismatch { expected: p, got: s.dim() });
    }
    penalty.check_dim(p)?;
    let chol = sigma.cholesky()?;
    let log_det = log_det_from_cholesky(&chol);
    let trace = chol.solve(s.as_matrix()).trace();
    Ok(ObjectiveTerms { log_det, trace, penalty: penalty.weighted_l1(sigma.as_matrix()) })
}

/// Evaluates `g(Sigma)`. Fails with [`CovError::NotPositiveDefinite`] when
/// `sigma` has no Cholesky factor.
pub fn objective(sigma: &CovarianceMatrix, s: &CovarianceMatrix, penalty: &PenaltySpec) -> Result<f64> {
    objective_terms(sigma, s, penalty).map(|t| t.total())
}

/// `sign(x) * max(|x| - t, 0)`.
#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}
