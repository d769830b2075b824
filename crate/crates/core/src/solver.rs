//! Configuration, results and the outer iteration loop shared by the
//! coordinate descent and ECM solvers.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use crate::error::{CovError, Result};
use crate::matrix::CovarianceMatrix;
use crate::objective::objective;
use crate::penalty::PenaltySpec;

/// Offset added to every entry of `diag(S)` when ECM has to start from a
/// diagonal matrix.
pub const DIAGONAL_INIT_EPS: f64 = 1e-3;

/// Starting point `Sigma^(0)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    /// `Sigma^(0) = S`.
    SampleCovariance,
    /// `Sigma^(0) = diag(s_11, ..., s_pp)`.
    DiagonalOfS,
    /// `diag(s_11, ..., s_pp) + eps`, the constant added to every entry.
    DiagonalOfSPlusEps(f64),
    Custom(CovarianceMatrix),
}

impl Init {
    /// Materializes the starting matrix and checks it is positive definite.
    pub fn resolve(&self, s: &CovarianceMatrix) -> Result<CovarianceMatrix> {
        let sigma0 = match self {
            Init::SampleCovariance => s.clone(),
            Init::DiagonalOfS => s.diagonal_part(),
            Init::DiagonalOfSPlusEps(eps) => s.diagonal_part().plus_constant(*eps),
            Init::Custom(m) => {
                if m.dim() != s.dim() {
                    return Err(CovError::DimensionMismatch { expected: s.dim(), got: m.dim() });
                }
                m.clone()
            }
        };
        if !sigma0.is_positive_definite() {
            return Err(CovError::InvalidInput("initial matrix is not positive definite".into()));
        }
        Ok(sigma0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Stop once `|g(k+1) - g(k)|` falls below this.
    pub outer_tol: f64,
    /// Inner lasso stops when a full sweep moves no coordinate by more than this.
    pub inner_tol: f64,
    pub max_outer_iters: usize,
    /// Cap on inner lasso sweeps per column visit.
    pub max_inner_iters: usize,
    pub init: Init,
    /// Lower bound on `|sigma_ij|` inside the ECM weights.
    pub ecm_scale_floor: f64,
    /// `|sigma_ij|` at or below this is reported as zero for ECM estimates.
    pub zero_report_threshold: f64,
    /// Replace [`Init::DiagonalOfS`] with [`Init::DiagonalOfSPlusEps`] for ECM.
    pub ecm_promote_diagonal_init: bool,
    /// Recorded with results; the solvers themselves are deterministic.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            outer_tol: 1e-3,
            inner_tol: 1e-6,
            max_outer_iters: 500,
            max_inner_iters: 10_000,
            init: Init::SampleCovariance,
            ecm_scale_floor: 1e-12,
            zero_report_threshold: 1e-4,
            ecm_promote_diagonal_init: true,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_outer_tol(mut self, tol: f64) -> Self {
        self.outer_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("outer_tol", self.outer_tol),
            ("inner_tol", self.inner_tol),
            ("ecm_scale_floor", self.ecm_scale_floor),
            ("zero_report_threshold", self.zero_report_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CovError::InvalidInput(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return Err(CovError::InvalidInput("iteration caps must be >= 1".into()));
        }
        if let Init::DiagonalOfSPlusEps(eps) = self.init {
            if !eps.is_finite() || eps < 0.0 {
                return Err(CovError::InvalidInput(format!("init offset must be >= 0, got {eps}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    pub sigma_hat: CovarianceMatrix,
    /// `g` at the starting point followed by one value per outer iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub outer_iters: usize,
    pub wall_time: Duration,
    /// Off-diagonal nonzero fraction of `sigma_hat`. Coordinate descent
    /// counts exact nonzeros; ECM uses `zero_report_threshold`.
    pub nonzero_fraction: f64,
    /// Column visits whose inner lasso hit `max_inner_iters`.
    pub inner_nonconverged: usize,
}

impl SolverResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace always holds the initial value")
    }
}

/// Called after every outer iteration with the iteration number (from 1),
/// the new iterate and its objective value.
pub type Observer<'a> = &'a mut dyn FnMut(usize, &CovarianceMatrix, f64);

/// Checks shared by both solvers: shapes, config, and that the smooth part
/// has a unique blockwise minimizer (positive diagonal penalty or PD `S`).
pub(crate) fn check_problem(s: &CovarianceMatrix, penalty: &PenaltySpec, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    let p = s.dim();
    penalty.check_dim(p)?;
    if p < 2 {
        return Err(CovError::InvalidInput("need p >= 2 variables".into()));
    }
    if s.as_matrix().diagonal().iter().any(|&d| d < 0.0) {
        return Err(CovError::InvalidInput("sample covariance has a negative variance".into()));
    }
    if !(penalty.min_diagonal(p) > 0.0) && !s.is_positive_definite() {
        return Err(CovError::InvalidInput(
            "zero diagonal penalty requires a positive definite sample covariance".into(),
        ));
    }
    Ok(())
}

/// Runs `sweep` until the objective change drops below `outer_tol`.
pub(crate) fn drive<F>(
    s: &CovarianceMatrix,
    penalty: &PenaltySpec,
    cfg: &SolverConfig,
    sigma0: CovarianceMatrix,
    zero_threshold: f64,
    mut sweep: F,
    observer: Option<Observer<'_>>,
) -> Result<SolverResult>
where
    F: FnMut(&mut DMatrix<f64>) -> Result<usize>,
{
    let start = Instant::now();
    let mut trace = vec![objective(&sigma0, s, penalty)?];
    let mut sigma = sigma0.into_inner();
    let mut converged = false;
    let mut inner_nonconverged = 0;
    let mut observer = observer;

    for iter in 1..=cfg.max_outer_iters {
        inner_nonconverged += sweep(&mut sigma)?;
        let current = CovarianceMatrix::from_symmetric_unchecked(sigma.clone());
        let g = objective(&current, s, penalty).map_err(|e| match e {
            CovError::NotPositiveDefinite { context } => {
                CovError::NotPositiveDefinite { context: format!("iterate {iter}: {context}") }
            }
            other => other,
        })?;
        if !g.is_finite() {
            return Err(CovError::Numerical(format!("objective is {g} at iterate {iter}")));
        }
        if let Some(obs) = observer.as_mut() {
            obs(iter, &current, g);
        }
        let prev = *trace.last().unwrap();
        trace.push(g);
        if (g - prev).abs() < cfg.outer_tol {
            converged = true;
            break;
        }
    }

    let sigma_hat = CovarianceMatrix::from_symmetric_unchecked(sigma);
    Ok(SolverResult {
        nonzero_fraction: sigma_hat.nonzero_fraction(zero_threshold),
        outer_iters: trace.len() - 1,
        sigma_hat,
        objective_trace: trace,
        converged,
        wall_time: start.elapsed(),
        inner_nonconverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_matches_documented_values() {
        let cfg = SolverConfig::default();
        assert_eq!(cfg.outer_tol, 1e-3);
        assert_eq!(cfg.inner_tol, 1e-6);
        assert_eq!(cfg.max_outer_iters, 500);
        assert_eq!(cfg.max_inner_iters, 10_000);
        assert_eq!(cfg.ecm_scale_floor, 1e-12);
        assert_eq!(cfg.zero_report_threshold, 1e-4);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn invalid_configs_rejected() {
        let cfg = SolverConfig { outer_tol: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig { max_inner_iters: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig::default().with_init(Init::DiagonalOfSPlusEps(-1.0));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn init_resolution() {
        let s = CovarianceMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        assert_eq!(Init::SampleCovariance.resolve(&s).unwrap(), s);
        let d = Init::DiagonalOfS.resolve(&s).unwrap();
        assert_eq!(d.get(0, 1), 0.0);
        assert_eq!(d.get(1, 1), 1.0);
        let e = Init::DiagonalOfSPlusEps(1e-3).resolve(&s).unwrap();
        assert_eq!(e.get(0, 1), 1e-3);
        assert_eq!(e.get(0, 0), 2.0 + 1e-3);
        let bad = CovarianceMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(Init::Custom(bad).resolve(&s).is_err());
    }
}
