//! Expectation / conditional maximization.
//!
//! Each off-diagonal penalty term is written as a normal scale mixture with
//! an exponential mixing density on the latent variance `tau_ij`. The E-step
//! replaces `1 / tau_ij` by its conditional mean `rho / |sigma_ij^(k)|`,
//! turning the L1 term into the weighted ridge `sum_{i<j} W_ij sigma_ij^2`.
//! The CM-steps then cycle through the columns, maximizing in closed form
//! over `gamma` (same update as coordinate descent) and over `b`
//! (a linear solve). `Q(. | Sigma^(k))` majorizes `g` up to a constant, so
//! the objective is non-increasing across iterations.
//!
//! The weights blow up at `sigma_ij = 0`, so a start with exact off-diagonal
//! zeros never moves those entries; such starts are rejected.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::column::{build_with_inverse, compute_a_with_inverse, gamma_update, write_column, LassoSubproblem};
use crate::error::{CovError, Result};
use crate::matrix::{log_det_from_cholesky, CovarianceMatrix};
use crate::partition::{full_index, quad_form, ColumnPartition};
use crate::penalty::PenaltySpec;
use crate::solver::{check_problem, drive, Init, Observer, SolverConfig, SolverResult, DIAGONAL_INIT_EPS};

/// Conditional expectations `E[1 / tau_ij | S, Sigma^(k)]`, with
/// `|sigma_ij^(k)|` floored. Symmetric, zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct EStepWeights {
    w: DMatrix<f64>,
}

impl EStepWeights {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.w
    }
}

/// `W_ij = rho_ij / max(|sigma_ij|, floor)` for `i != j`, zero on the diagonal.
pub fn e_step_weights(sigma_k: &CovarianceMatrix, penalty: &PenaltySpec, floor: f64) -> EStepWeights {
    weights_from_dense(sigma_k.as_matrix(), penalty, floor)
}

fn weights_from_dense(sigma: &DMatrix<f64>, penalty: &PenaltySpec, floor: f64) -> EStepWeights {
    let p = sigma.nrows();
    let w = DMatrix::from_fn(p, p, |i, j| if i == j { 0.0 } else { penalty.at(i, j) / sigma[(i, j)].abs().max(floor) });
    EStepWeights { w }
}

/// Conditional maximizer over `b`: solves `(V + diag(w_k / max(d_k, floor))) b = u`,
/// where `w` are the subproblem's per-coordinate penalties and
/// `d = |sigma12^(k)|`.
pub fn beta_ecm(sub: &LassoSubproblem, d: &DVector<f64>, floor: f64) -> Result<DVector<f64>> {
    if d.len() != sub.dim() {
        return Err(CovError::DimensionMismatch { expected: sub.dim(), got: d.len() });
    }
    let ridge = DVector::from_fn(sub.dim(), |k, _| sub.weights[k] / d[k].abs().max(floor));
    solve_ridge(sub, &ridge)
}

fn solve_ridge(sub: &LassoSubproblem, ridge: &DVector<f64>) -> Result<DVector<f64>> {
    let mut m = sub.v.clone();
    for k in 0..sub.dim() {
        m[(k, k)] += ridge[k];
    }
    if let Some(chol) = m.clone().cholesky() {
        return Ok(chol.solve(&sub.u));
    }
    let eig = SymmetricEigen::new(m).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    Err(CovError::Numerical(format!(
        "ECM b-step system is not positive definite (eigenvalues in [{lo:e}, {hi:e}], condition {:e})",
        hi.abs() / lo.abs()
    )))
}

/// The E-step criterion in minimization form,
/// `log det Sigma + tr(S Sigma^-1) + sum_{i<j} W_ij sigma_ij^2 + sum_i rho_ii sigma_ii`.
pub fn ecm_surrogate(
    sigma: &CovarianceMatrix,
    s: &CovarianceMatrix,
    weights: &EStepWeights,
    penalty: &PenaltySpec,
) -> Result<f64> {
    let p = sigma.dim();
    if s.dim() != p || weights.w.nrows() != p {
        return Err(CovError::DimensionMismatch { expected: p, got: s.dim() });
    }
    let chol = sigma.cholesky()?;
    let mut total = log_det_from_cholesky(&chol) + chol.solve(s.as_matrix()).trace();
    for j in 0..p {
        total += penalty.at(j, j) * sigma.get(j, j);
        for i in (j + 1)..p {
            total += weights.w[(i, j)] * sigma.get(i, j).powi(2);
        }
    }
    Ok(total)
}

fn update_column_in_place(
    sigma: &mut DMatrix<f64>,
    s: &DMatrix<f64>,
    i: usize,
    weights: &EStepWeights,
    penalty: &PenaltySpec,
) -> Result<()> {
    let part = ColumnPartition::from_dense(sigma, s, i)?;
    let inv = part.sigma11_inverse()?;
    let a = compute_a_with_inverse(&part.sigma.m12, &part, &inv)?;
    let rho_ii = penalty.at(i, i);
    let gamma =
        gamma_update(a, rho_ii).map_err(|_| CovError::DegenerateSubproblem { column: Some(i), a, rho: rho_ii })?;
    let sub = build_with_inverse(&part, &inv, gamma, penalty)?;
    let ridge = DVector::from_fn(sub.dim(), |k, _| weights.w[(full_index(i, k), i)]);
    let beta = solve_ridge(&sub, &ridge)?;
    let sigma22 = gamma + quad_form(&inv, &beta);
    write_column(sigma, i, &beta, sigma22);
    Ok(())
}

/// The two CM-steps (`gamma`, then `b`) for column `i` under fixed weights.
pub fn ecm_column_update(
    sigma: &CovarianceMatrix,
    s: &CovarianceMatrix,
    i: usize,
    weights: &EStepWeights,
    penalty: &PenaltySpec,
) -> Result<CovarianceMatrix> {
    if sigma.dim() != s.dim() {
        return Err(CovError::DimensionMismatch { expected: sigma.dim(), got: s.dim() });
    }
    penalty.check_dim(sigma.dim())?;
    let mut m = sigma.as_matrix().clone();
    update_column_in_place(&mut m, s.as_matrix(), i, weights, penalty)?;
    Ok(CovarianceMatrix::from_symmetric_unchecked(m))
}

/// The starting point ECM will actually use: `DiagonalOfS` is promoted to
/// `diag(S) + 1e-3` when `ecm_promote_diagonal_init` is set.
pub fn ecm_init(cfg: &SolverConfig) -> Init {
    match &cfg.init {
        Init::DiagonalOfS if cfg.ecm_promote_diagonal_init => Init::DiagonalOfSPlusEps(DIAGONAL_INIT_EPS),
        other => other.clone(),
    }
}

fn check_nonzero_start(sigma0: &CovarianceMatrix, penalty: &PenaltySpec) -> Result<()> {
    let p = sigma0.dim();
    for j in 0..p {
        for i in (j + 1)..p {
            if sigma0.get(i, j) == 0.0 && penalty.at(i, j) > 0.0 {
                return Err(CovError::InvalidInput(format!(
                    "ECM must start from a matrix with every penalized off-diagonal entry \
                     nonzero, but sigma[{i}][{j}] = 0 (the iteration would never move it)"
                )));
            }
        }
    }
    Ok(())
}

pub fn solve_ecm(s: &CovarianceMatrix, penalty: &PenaltySpec, cfg: &SolverConfig) -> Result<SolverResult> {
    solve_ecm_observed(s, penalty, cfg, None)
}

/// [`solve_ecm`] with a callback after every outer iteration.
pub fn solve_ecm_observed(
    s: &CovarianceMatrix,
    penalty: &PenaltySpec,
    cfg: &SolverConfig,
    observer: Option<Observer<'_>>,
) -> Result<SolverResult> {
    check_problem(s, penalty, cfg)?;
    let sigma0 = ecm_init(cfg).resolve(s)?;
    check_nonzero_start(&sigma0, penalty)?;
    let p = s.dim();
    let s_dense = s.as_matrix();
    let floor = cfg.ecm_scale_floor;
    drive(
        s,
        penalty,
        cfg,
        sigma0,
        cfg.zero_report_threshold,
        |sigma| {
            let weights = weights_from_dense(sigma, penalty, floor);
            for i in 0..p {
                update_column_in_place(sigma, s_dense, i, &weights, penalty)?;
            }
            Ok(0)
        },
        observer,
    )
}
