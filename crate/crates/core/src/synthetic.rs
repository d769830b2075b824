//! Test covariance models and zero-mean Gaussian sampling.

use std::fmt;
use std::fs::{self, File};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CovError, Result};
use crate::matrix::{format_f64, read_dense_csv, sample_covariance, write_dense_csv, CovarianceMatrix};

/// Off-diagonal value of the tridiagonal model.
pub const SPARSE_OFF_DIAGONAL: f64 = 0.4;
pub const DENSE_DIAGONAL: f64 = 2.0;
pub const DENSE_OFF_DIAGONAL: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    /// `sigma_{i,i+1} = 0.4`, diagonal tuned so the condition number is `p`.
    SparseTridiagonal,
    /// `sigma_ii = 2`, `sigma_ij = 1`.
    DenseCompound,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::SparseTridiagonal => "sparse",
            ModelKind::DenseCompound => "dense",
        }
    }

    pub fn sigma(self, p: usize) -> Result<CovarianceMatrix> {
        match self {
            ModelKind::SparseTridiagonal => make_sparse_sigma(p),
            ModelKind::DenseCompound => make_dense_sigma(p),
        }
    }

    /// The diagonal value of the model at dimension `p`.
    pub fn diagonal(self, p: usize) -> f64 {
        match self {
            ModelKind::SparseTridiagonal => sparse_delta(p),
            ModelKind::DenseCompound => DENSE_DIAGONAL,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = CovError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sparse" | "sparse_tridiagonal" | "sparsetridiagonal" => Ok(ModelKind::SparseTridiagonal),
            "dense" | "dense_compound" | "densecompound" => Ok(ModelKind::DenseCompound),
            other => Err(CovError::Parse(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub p: usize,
    pub n: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, p: usize, n: usize, seed: u64) -> Result<Self> {
        if p < 2 || n < 1 {
            return Err(CovError::InvalidInput(format!("model needs p >= 2 and n >= 1, got p = {p}, n = {n}")));
        }
        Ok(Self { kind, p, n, seed })
    }
}

/// Diagonal `delta` giving the tridiagonal model condition number `p`.
///
/// The eigenvalues of the symmetric tridiagonal Toeplitz matrix are
/// `delta + 0.8 cos(k pi / (p + 1))`, `k = 1..p`; setting the ratio of the
/// extremes to `p` gives `delta = 0.8 cos(pi / (p + 1)) (p + 1) / (p - 1)`.
pub fn sparse_delta(p: usize) -> f64 {
    let c = (std::f64::consts::PI / (p as f64 + 1.0)).cos();
    2.0 * SPARSE_OFF_DIAGONAL * c * (p as f64 + 1.0) / (p as f64 - 1.0)
}

pub fn make_sparse_sigma(p: usize) -> Result<CovarianceMatrix> {
    if p < 2 {
        return Err(CovError::InvalidInput(format!("sparse model needs p >= 2, got {p}")));
    }
    let delta = sparse_delta(p);
    let m = DMatrix::from_fn(p, p, |i, j| match i.abs_diff(j) {
        0 => delta,
        1 => SPARSE_OFF_DIAGONAL,
        _ => 0.0,
    });
    Ok(CovarianceMatrix::from_symmetric_unchecked(m))
}

pub fn make_dense_sigma(p: usize) -> Result<CovarianceMatrix> {
    if p < 2 {
        return Err(CovError::InvalidInput(format!("dense model needs p >= 2, got {p}")));
    }
    let m = DMatrix::from_fn(p, p, |i, j| if i == j { DENSE_DIAGONAL } else { DENSE_OFF_DIAGONAL });
    Ok(CovarianceMatrix::from_symmetric_unchecked(m))
}

/// `n` independent rows from `N(0, sigma)`, as `Z L'` with `L` the Cholesky
/// factor. Deterministic in `seed`.
pub fn sample_mvn(sigma: &CovarianceMatrix, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let l = sigma.cholesky()?.unpack();
    let p = sigma.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::<f64>::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    Ok(z * l.transpose())
}

/// Ratio of the extreme eigenvalues; `+inf` when the smallest is `<= 0`.
pub fn condition_number(sigma: &CovarianceMatrix) -> f64 {
    let eig = SymmetricEigen::new(sigma.as_matrix().clone()).eigenvalues;
    let lo = eig.min();
    let hi = eig.max();
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// A generated dataset: the true covariance, the data and its sample covariance.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub spec: ModelSpec,
    pub sigma_true: CovarianceMatrix,
    pub y: DMatrix<f64>,
    pub s: CovarianceMatrix,
}

const Y_FILE: &str = "y.csv";
const SIGMA_FILE: &str = "sigma_true.csv";
const META_FILE: &str = "meta.txt";

impl Dataset {
    pub fn generate(spec: ModelSpec) -> Result<Self> {
        let sigma_true = spec.kind.sigma(spec.p)?;
        let y = sample_mvn(&sigma_true, spec.n, spec.seed)?;
        let s = sample_covariance(&y)?;
        Ok(Self { spec, sigma_true, y, s })
    }

    /// Writes `y.csv`, `sigma_true.csv` and the `key=value` sidecar `meta.txt`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        write_dense_csv(&self.y, File::create(dir.join(Y_FILE))?)?;
        self.sigma_true.write_csv(dir.join(SIGMA_FILE))?;
        let meta = format!(
            "kind={}\np={}\nn={}\nseed={}\ndelta={}\n",
            self.spec.kind,
            self.spec.p,
            self.spec.n,
            self.spec.seed,
            format_f64(self.spec.kind.diagonal(self.spec.p)),
        );
        fs::write(dir.join(META_FILE), meta)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta = fs::read_to_string(dir.join(META_FILE))?;
        let mut kind = None;
        let (mut p, mut n, mut seed) = (None, None, None);
        for line in meta.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) =
                line.split_once('=').ok_or_else(|| CovError::Parse(format!("metadata line without '=': {line:?}")))?;
            let value = value.trim();
            let bad = |e: std::num::ParseIntError| CovError::Parse(format!("{key}: {e}"));
            match key.trim() {
                "kind" => kind = Some(value.parse::<ModelKind>()?),
                "p" => p = Some(value.parse::<usize>().map_err(bad)?),
                "n" => n = Some(value.parse::<usize>().map_err(bad)?),
                "seed" => seed = Some(value.parse::<u64>().map_err(bad)?),
                _ => {}
            }
        }
        let missing = |k: &str| CovError::Parse(format!("metadata is missing {k}"));
        let spec = ModelSpec::new(
            kind.ok_or_else(|| missing("kind"))?,
            p.ok_or_else(|| missing("p"))?,
            n.ok_or_else(|| missing("n"))?,
            seed.ok_or_else(|| missing("seed"))?,
        )?;
        let y = read_dense_csv(File::open(dir.join(Y_FILE))?)?;
        if y.nrows() != spec.n || y.ncols() != spec.p {
            return Err(CovError::InvalidInput(format!(
                "data is {}x{} but metadata says {}x{}",
                y.nrows(),
                y.ncols(),
                spec.n,
                spec.p
            )));
        }
        let sigma_true = CovarianceMatrix::read_csv(dir.join(SIGMA_FILE))?;
        let s = sample_covariance(&y)?;
        Ok(Self { spec, sigma_true, y, s })
    }
}
