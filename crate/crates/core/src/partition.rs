//! Column partitions and the Schur-complement reparameterization shared by
//! both solvers.
//!
//! Updating column `i` permutes row/column `i` to the last position:
//!
//! ```text
//! Sigma = [ Sigma11   sigma12 ]      S = [ S11   s12 ]
//!         [ sigma12'  sigma22 ]          [ s12'  s22 ]
//! ```
//!
//! The remaining indices keep their relative order. Indices are zero-based.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{CovError, Result};
use crate::matrix::CovarianceMatrix;

/// The blocks of one symmetric matrix around a pivot column.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixBlocks {
    /// `(p-1) x (p-1)` block with the pivot row and column removed.
    pub m11: DMatrix<f64>,
    /// Pivot column without its diagonal entry.
    pub m12: DVector<f64>,
    pub m22: f64,
    pub pivot: usize,
}

/// Maps a position in the reduced `(p-1)`-block back to the full matrix.
#[inline]
pub fn full_index(pivot: usize, k: usize) -> usize {
    if k < pivot {
        k
    } else {
        k + 1
    }
}

pub fn partition_column(m: &CovarianceMatrix, i: usize) -> Result<MatrixBlocks> {
    partition_dense(m.as_matrix(), i)
}

pub(crate) fn partition_dense(m: &DMatrix<f64>, i: usize) -> Result<MatrixBlocks> {
    let p = m.nrows();
    if p < 2 {
        return Err(CovError::InvalidInput("cannot partition a 1x1 matrix".into()));
    }
    if i >= p {
        return Err(CovError::InvalidInput(format!("column {i} out of range for p = {p}")));
    }
    let q = p - 1;
    Ok(MatrixBlocks {
        m11: DMatrix::from_fn(q, q, |a, b| m[(full_index(i, a), full_index(i, b))]),
        m12: DVector::from_fn(q, |a, _| m[(full_index(i, a), i)]),
        m22: m[(i, i)],
        pivot: i,
    })
}

impl MatrixBlocks {
    pub fn dim(&self) -> usize {
        self.m12.len() + 1
    }

    /// Inverts the partition, restoring the original row/column order.
    pub fn reassemble(&self) -> CovarianceMatrix {
        let p = self.dim();
        let i = self.pivot;
        let mut m = DMatrix::zeros(p, p);
        for b in 0..p - 1 {
            for a in 0..p - 1 {
                m[(full_index(i, a), full_index(i, b))] = self.m11[(a, b)];
            }
            m[(full_index(i, b), i)] = self.m12[b];
            m[(i, full_index(i, b))] = self.m12[b];
        }
        m[(i, i)] = self.m22;
        CovarianceMatrix::from_symmetric_unchecked(m)
    }
}

/// Matching partitions of the iterate `Sigma` and the sample covariance `S`.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnPartition {
    pub sigma: MatrixBlocks,
    pub s: MatrixBlocks,
}

impl ColumnPartition {
    pub fn new(sigma: &CovarianceMatrix, s: &CovarianceMatrix, i: usize) -> Result<Self> {
        if sigma.dim() != s.dim() {
            return Err(CovError::DimensionMismatch { expected: sigma.dim(), got: s.dim() });
        }
        Self::from_dense(sigma.as_matrix(), s.as_matrix(), i)
    }

    pub(crate) fn from_dense(sigma: &DMatrix<f64>, s: &DMatrix<f64>, i: usize) -> Result<Self> {
        Ok(Self { sigma: partition_dense(sigma, i)?, s: partition_dense(s, i)? })
    }

    pub fn pivot(&self) -> usize {
        self.sigma.pivot
    }

    pub fn sigma11_cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.sigma.m11.clone()).ok_or_else(|| CovError::NotPositiveDefinite {
            context: format!("Sigma11 for column {} is singular or indefinite", self.pivot()),
        })
    }

    /// `Sigma11^-1`, symmetrized.
    pub fn sigma11_inverse(&self) -> Result<DMatrix<f64>> {
        let mut inv = self.sigma11_cholesky()?.inverse();
        symmetrize_in_place(&mut inv);
        Ok(inv)
    }
}

pub(crate) fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for j in 0..p {
        for i in (j + 1)..p {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `gamma = sigma22 - sigma12' Sigma11^-1 sigma12`.
///
/// Given `Sigma11` positive definite, `gamma > 0` exactly when the whole
/// matrix is positive definite.
pub fn schur_gamma(part: &ColumnPartition) -> Result<f64> {
    let chol = part.sigma11_cholesky()?;
    let w = chol.solve(&part.sigma.m12);
    Ok(part.sigma.m22 - part.sigma.m12.dot(&w))
}

/// The `(b, gamma)` coordinates of one column: `b = sigma12` and `gamma`
/// the Schur complement.
#[derive(Clone, Debug, PartialEq)]
pub struct ReparamPoint {
    pub b: DVector<f64>,
    pub gamma: f64,
}

impl ReparamPoint {
    pub fn from_partition(part: &ColumnPartition) -> Result<Self> {
        Ok(Self { b: part.sigma.m12.clone(), gamma: schur_gamma(part)? })
    }

    /// `sigma22 = gamma + b' Sigma11^-1 b`.
    pub fn sigma22(&self, sigma11_inv: &DMatrix<f64>) -> f64 {
        self.gamma + quad_form(sigma11_inv, &self.b)
    }
}

/// `x' A x`.
pub(crate) fn quad_form(a: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(a * x))
}

/// `Sigma^-1` assembled blockwise from `(Sigma11^-1, b, gamma)`, in the
/// partitioned order (pivot last):
///
/// ```text
/// [ A + A b b' A / gamma   -A b / gamma ]
/// [ -b' A / gamma            1 / gamma  ]      with A = Sigma11^-1
/// ```
pub fn block_inverse(sigma11_inv: &DMatrix<f64>, point: &ReparamPoint) -> Result<DMatrix<f64>> {
    if !(point.gamma > 0.0) {
        return Err(CovError::NotPositiveDefinite {
            context: format!("Schur complement gamma = {} is not positive", point.gamma),
        });
    }
    let q = point.b.len();
    let ab = sigma11_inv * &point.b;
    let g = point.gamma;
    let mut inv = DMatrix::zeros(q + 1, q + 1);
    inv.view_mut((0, 0), (q, q)).copy_from(&(sigma11_inv + &ab * ab.transpose() / g));
    for k in 0..q {
        inv[(k, q)] = -ab[k] / g;
        inv[(q, k)] = -ab[k] / g;
    }
    inv[(q, q)] = 1.0 / g;
    Ok(inv)
}

/// Reorders a full matrix so that `pivot` becomes the last index, matching
/// the layout of [`block_inverse`].
pub fn pivot_last(m: &CovarianceMatrix, pivot: usize) -> Result<CovarianceMatrix> {
    let p = m.dim();
    let perm: Vec<usize> = (0..p - 1).map(|k| full_index(pivot, k)).chain([pivot]).collect();
    m.permuted(&perm)
}
