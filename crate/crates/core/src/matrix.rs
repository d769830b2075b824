//! Dense symmetric matrices and their plain-text CSV representation.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{CovError, Result};

/// Largest tolerated `|m[i][j] - m[j][i]|`, relative to `max(1, max |m|)`.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// A dense symmetric `p x p` matrix.
///
/// Used both for the optimization variable and for the sample covariance.
/// Symmetry is exact: construction mirrors the averaged off-diagonal pairs,
/// so `m[(i, j)] == m[(j, i)]` holds bit-for-bit. Positive definiteness is
/// not part of the type; query it with [`CovarianceMatrix::cholesky`].
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix {
    inner: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Validates shape, finiteness and symmetry (within [`SYMMETRY_TOL`]).
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(CovError::InvalidInput("empty matrix".into()));
        }
        if m.nrows() != m.ncols() {
            return Err(CovError::InvalidInput(format!("matrix must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(CovError::InvalidInput("matrix has non-finite entries".into()));
        }
        let scale = m.amax().max(1.0);
        let p = m.nrows();
        for j in 0..p {
            for i in (j + 1)..p {
                let gap = (m[(i, j)] - m[(j, i)]).abs();
                if gap > SYMMETRY_TOL * scale {
                    return Err(CovError::InvalidInput(format!(
                        "matrix is not symmetric: |m[{i}][{j}] - m[{j}][{i}]| = {gap:e}"
                    )));
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    /// Averages each off-diagonal pair. The caller guarantees squareness.
    pub(crate) fn symmetrized(mut m: DMatrix<f64>) -> Self {
        let p = m.nrows();
        for j in 0..p {
            for i in (j + 1)..p {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        Self { inner: m }
    }

    /// Wraps a matrix that is symmetric by construction.
    pub(crate) fn from_symmetric_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert!(m.is_square());
        Self { inner: m }
    }

    pub fn identity(p: usize) -> Self {
        Self { inner: DMatrix::identity(p, p) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(CovError::InvalidInput("empty diagonal".into()));
        }
        let p = diag.len();
        Ok(Self { inner: DMatrix::from_fn(p, p, |i, j| if i == j { diag[i] } else { 0.0 }) })
    }

    /// Builds a matrix from row-major nested slices.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(CovError::InvalidInput("rows must form a square matrix".into()));
        }
        Self::new(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.inner.clone()).ok_or_else(|| CovError::NotPositiveDefinite {
            context: format!("Cholesky factorization failed for {0}x{0} matrix", self.dim()),
        })
    }

    pub fn is_positive_definite(&self) -> bool {
        Cholesky::new(self.inner.clone()).is_some()
    }

    /// `log det` through the Cholesky factor.
    pub fn log_det(&self) -> Result<f64> {
        let chol = self.cholesky()?;
        Ok(log_det_from_cholesky(&chol))
    }

    /// `diag(m_11, ..., m_pp)`.
    pub fn diagonal_part(&self) -> Self {
        let p = self.dim();
        Self { inner: DMatrix::from_fn(p, p, |i, j| if i == j { self.inner[(i, i)] } else { 0.0 }) }
    }

    /// Adds `eps` to every entry, diagonal included.
    pub fn plus_constant(&self, eps: f64) -> Self {
        Self { inner: self.inner.add_scalar(eps) }
    }

    /// Applies `out[a][b] = m[perm[a]][perm[b]]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let p = self.dim();
        let mut seen = vec![false; p];
        if perm.len() != p || perm.iter().any(|&k| k >= p || std::mem::replace(&mut seen[k], true)) {
            return Err(CovError::InvalidInput("not a permutation of 0..p".into()));
        }
        Ok(Self { inner: DMatrix::from_fn(p, p, |a, b| self.inner[(perm[a], perm[b])]) })
    }

    /// Fraction of off-diagonal pairs `i < j` with `|m_ij| > threshold`.
    /// A threshold of zero counts exact nonzeros. Returns 0 for `p = 1`.
    pub fn nonzero_fraction(&self, threshold: f64) -> f64 {
        let p = self.dim();
        if p < 2 {
            return 0.0;
        }
        let mut count = 0usize;
        for j in 0..p {
            for i in (j + 1)..p {
                if self.inner[(i, j)].abs() > threshold {
                    count += 1;
                }
            }
        }
        count as f64 / (p * (p - 1) / 2) as f64
    }

    /// Largest off-diagonal magnitude.
    pub fn max_abs_off_diagonal(&self) -> f64 {
        let p = self.dim();
        let mut best = 0.0f64;
        for j in 0..p {
            for i in (j + 1)..p {
                best = best.max(self.inner[(i, j)].abs());
            }
        }
        best
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.inner - &other.inner).amax()
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path.as_ref())?;
        Self::from_csv_reader(file)
    }

    /// Parses a headerless CSV, one matrix row per line. Lines starting with
    /// `#` are skipped.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let m = read_dense_csv(reader)?;
        Self::new(m)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_dense_csv(&self.inner, File::create(path.as_ref())?)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        write_dense_csv(&self.inner, &mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

impl fmt::Display for CovarianceMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.inner)
    }
}

impl AsRef<DMatrix<f64>> for CovarianceMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.inner
    }
}

pub(crate) fn log_det_from_cholesky(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Reads a headerless numeric CSV into a dense matrix (any shape).
pub fn read_dense_csv(reader: impl Read) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| CovError::Parse(format!("row {}: {f:?}: {e}", line + 1))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let nrows = rows.len();
    if nrows == 0 {
        return Err(CovError::InvalidInput("CSV contains no rows".into()));
    }
    let ncols = rows[0].len();
    if let Some((k, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(CovError::Parse(format!("row {} has {} fields, expected {ncols}", k + 1, r.len())));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn write_dense_csv(m: &DMatrix<f64>, mut out: impl Write) -> Result<()> {
    for i in 0..m.nrows() {
        let line = (0..m.ncols()).map(|j| format_f64(m[(i, j)])).collect::<Vec<_>>().join(",");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// `S = Y'Y / n` for an `n x p` data matrix, without mean-centering.
pub fn sample_covariance(y: &DMatrix<f64>) -> Result<CovarianceMatrix> {
    check_data(y)?;
    let n = y.nrows() as f64;
    let s = y.tr_mul(y) / n;
    Ok(CovarianceMatrix::symmetrized(s))
}

/// Column-centered variant of [`sample_covariance`], still divided by `n`.
pub fn sample_covariance_centered(y: &DMatrix<f64>) -> Result<CovarianceMatrix> {
    check_data(y)?;
    let mut centered = y.clone();
    for mut col in centered.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    sample_covariance(&centered)
}

fn check_data(y: &DMatrix<f64>) -> Result<()> {
    if y.nrows() == 0 || y.ncols() == 0 {
        return Err(CovError::InvalidInput(format!("data matrix must be non-empty, got {}x{}", y.nrows(), y.ncols())));
    }
    if y.iter().any(|x| !x.is_finite()) {
        return Err(CovError::InvalidInput("data matrix has non-finite entries".into()));
    }
    Ok(())
}
