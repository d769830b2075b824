//! Block coordinate descent.
//!
//! Each outer iteration visits columns `0..p` in order. For a column it
//! minimizes exactly over `gamma` in closed form, then over `b = sigma12`
//! by cyclic soft-thresholding on the lasso subproblem, and writes back
//! `sigma12 = b`, `sigma22 = gamma + b' Sigma11^-1 b`. Every block step is
//! a minimization, so the objective never increases.

use nalgebra::{DMatrix, DVector};

use crate::column::{build_with_inverse, compute_a_with_inverse, gamma_update, write_column, LassoSubproblem};
use crate::error::{CovError, Result};
use crate::matrix::CovarianceMatrix;
use crate::objective::soft_threshold;
use crate::partition::{quad_form, ColumnPartition};
use crate::penalty::PenaltySpec;
use crate::solver::{check_problem, drive, Observer, SolverConfig, SolverResult};

#[derive(Clone, Debug, PartialEq)]
pub struct LassoOutcome {
    pub beta: DVector<f64>,
    pub sweeps: usize,
    /// False when `max_inner_iters` sweeps ran without meeting `inner_tol`;
    /// `beta` is then the last (and lowest-objective) iterate.
    pub converged: bool,
}

/// Cyclic coordinate descent on `b'Vb - 2u'b + 2 sum_k w_k |b_k|`, warm
/// started at `beta0`.
///
/// Coordinate `j` moves to `S(u_j - sum_{k != j} v_kj b_k, w_j) / v_jj`.
/// Stops when a full sweep changes no coordinate by `inner_tol` or more.
pub fn lasso_inner(sub: &LassoSubproblem, beta0: &DVector<f64>, cfg: &SolverConfig) -> Result<LassoOutcome> {
    let q = sub.dim();
    if beta0.len() != q {
        return Err(CovError::DimensionMismatch { expected: q, got: beta0.len() });
    }
    if let Some(j) = (0..q).find(|&j| !(sub.v[(j, j)] > 0.0)) {
        return Err(CovError::InvalidInput(format!(
            "lasso subproblem needs v_jj > 0, got v[{j}][{j}] = {}",
            sub.v[(j, j)]
        )));
    }

    let mut beta = beta0.clone();
    for sweep in 1..=cfg.max_inner_iters {
        // r = u - V beta, refreshed each sweep to keep rounding from drifting.
        let mut r = &sub.u - &sub.v * &beta;
        let mut max_change = 0.0f64;
        for j in 0..q {
            let vjj = sub.v[(j, j)];
            let old = beta[j];
            let new = soft_threshold(r[j] + vjj * old, sub.weights[j]) / vjj;
            let delta = new - old;
            if delta != 0.0 {
                r.axpy(-delta, &sub.v.column(j), 1.0);
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < cfg.inner_tol {
            return Ok(LassoOutcome { beta, sweeps: sweep, converged: true });
        }
    }
    Ok(LassoOutcome { beta, sweeps: cfg.max_inner_iters, converged: false })
}

/// What one column visit did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColumnStep {
    pub a: f64,
    pub gamma: f64,
    pub inner_sweeps: usize,
    pub inner_converged: bool,
}

pub(crate) fn update_column_in_place(
    sigma: &mut DMatrix<f64>,
    s: &DMatrix<f64>,
    i: usize,
    penalty: &PenaltySpec,
    cfg: &SolverConfig,
) -> Result<ColumnStep> {
    let part = ColumnPartition::from_dense(sigma, s, i)?;
    let inv = part.sigma11_inverse()?;
    let b = &part.sigma.m12;
    let a = compute_a_with_inverse(b, &part, &inv)?;
    let rho_ii = penalty.at(i, i);
    let gamma =
        gamma_update(a, rho_ii).map_err(|_| CovError::DegenerateSubproblem { column: Some(i), a, rho: rho_ii })?;
    let sub = build_with_inverse(&part, &inv, gamma, penalty)?;
    let out = lasso_inner(&sub, b, cfg)?;
    let sigma22 = gamma + quad_form(&inv, &out.beta);
    write_column(sigma, i, &out.beta, sigma22);
    Ok(ColumnStep { a, gamma, inner_sweeps: out.sweeps, inner_converged: out.converged })
}

/// One coordinate descent block update of column `i` (zero-based).
pub fn cd_column_update(
    sigma: &CovarianceMatrix,
    s: &CovarianceMatrix,
    i: usize,
    penalty: &PenaltySpec,
    cfg: &SolverConfig,
) -> Result<CovarianceMatrix> {
    if sigma.dim() != s.dim() {
        return Err(CovError::DimensionMismatch { expected: sigma.dim(), got: s.dim() });
    }
    penalty.check_dim(sigma.dim())?;
    let mut m = sigma.as_matrix().clone();
    update_column_in_place(&mut m, s.as_matrix(), i, penalty, cfg)?;
    Ok(CovarianceMatrix::from_symmetric_unchecked(m))
}

pub fn solve_cd(s: &CovarianceMatrix, penalty: &PenaltySpec, cfg: &SolverConfig) -> Result<SolverResult> {
    solve_cd_observed(s, penalty, cfg, None)
}

/// [`solve_cd`] with a callback after every outer iteration.
pub fn solve_cd_observed(
    s: &CovarianceMatrix,
    penalty: &PenaltySpec,
    cfg: &SolverConfig,
    observer: Option<Observer<'_>>,
) -> Result<SolverResult> {
    check_problem(s, penalty, cfg)?;
    let sigma0 = cfg.init.resolve(s)?;
    let p = s.dim();
    let s_dense = s.as_matrix();
    drive(
        s,
        penalty,
        cfg,
        sigma0,
        0.0,
        |sigma| {
            let mut stalled = 0;
            for i in 0..p {
                let step = update_column_in_place(sigma, s_dense, i, penalty, cfg)?;
                if !step.inner_converged {
                    stalled += 1;
                }
            }
            Ok(stalled)
        },
        observer,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::sample_covariance;
    use crate::objective::objective;
    use crate::solver::Init;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    fn random_s(n: usize, p: usize, seed: u64) -> CovarianceMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        sample_covariance(&y).unwrap()
    }

    #[test]
    fn lasso_separable_case() {
        let sub = LassoSubproblem::new(DMatrix::identity(2, 2), DVector::from_vec(vec![3.0, -0.2]), 1.0).unwrap();
        let out = lasso_inner(&sub, &DVector::zeros(2), &cfg()).unwrap();
        assert!(out.converged);
        assert_eq!(out.beta, DVector::from_vec(vec![2.0, 0.0]));
    }

    #[test]
    fn lasso_unpenalized_identity() {
        let u = DVector::from_vec(vec![0.7, -1.3, 2.0]);
        let sub = LassoSubproblem::new(DMatrix::identity(3, 3), u.clone(), 0.0).unwrap();
        let out = lasso_inner(&sub, &DVector::from_element(3, 5.0), &cfg()).unwrap();
        assert_eq!(out.beta, u);
    }

    #[test]
    fn lasso_subgradient_optimality() {
        let v = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
        let sub = LassoSubproblem::new(v.clone(), DVector::from_vec(vec![1.0, 1.0]), 0.2).unwrap();
        let tight = SolverConfig { inner_tol: 1e-12, ..cfg() };
        let beta = lasso_inner(&sub, &DVector::zeros(2), &tight).unwrap().beta;
        // 0 must lie in 2V beta - 2u + 2 rho d|beta|.
        let grad = &v * &beta - &sub.u;
        for j in 0..2 {
            if beta[j] != 0.0 {
                assert!((grad[j] + 0.2 * beta[j].signum()).abs() < 1e-6);
            } else {
                assert!(grad[j].abs() <= 0.2 + 1e-6);
            }
        }
        // Both coordinates active: (V) beta = u - rho 1 has the closed form below.
        let expected = 0.8 / 1.3;
        assert!((beta[0] - expected).abs() < 1e-6 && (beta[1] - expected).abs() < 1e-6);
    }

    #[test]
    fn lasso_reports_non_convergence() {
        let v = DMatrix::from_row_slice(2, 2, &[1.0, 0.99, 0.99, 1.0]);
        let sub = LassoSubproblem::new(v, DVector::from_vec(vec![1.0, -1.0]), 0.0).unwrap();
        let capped = SolverConfig { max_inner_iters: 2, ..cfg() };
        let out = lasso_inner(&sub, &DVector::zeros(2), &capped).unwrap();
        assert!(!out.converged);
        assert_eq!(out.sweeps, 2);
        assert!(sub.value(&out.beta) < sub.value(&DVector::zeros(2)));
    }

    #[test]
    fn lasso_rejects_nonpositive_diagonal() {
        let sub = LassoSubproblem::new(DMatrix::zeros(1, 1), DVector::from_element(1, 1.0), 0.0).unwrap();
        assert!(lasso_inner(&sub, &DVector::zeros(1), &cfg()).is_err());
    }

    #[test]
    fn unpenalized_column_update_is_stationary() {
        let s = random_s(30, 5, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-0.5..0.5));
        let sigma = CovarianceMatrix::new(&g * g.transpose() + DMatrix::identity(5, 5)).unwrap();
        let tight = SolverConfig { inner_tol: 1e-13, ..cfg() };
        for i in 0..5 {
            // Without a penalty beta does not depend on gamma, so a second pass
            // makes gamma optimal for the final beta.
            let once = cd_column_update(&sigma, &s, i, &PenaltySpec::Scalar(0.0), &tight).unwrap();
            let updated = cd_column_update(&once, &s, i, &PenaltySpec::Scalar(0.0), &tight).unwrap();
            // d g / d Sigma = Sigma^-1 - Sigma^-1 S Sigma^-1 vanishes on column i.
            let inv = updated.as_matrix().clone().try_inverse().unwrap();
            let grad = &inv - &inv * s.as_matrix() * &inv;
            for r in 0..5 {
                assert!(grad[(r, i)].abs() < 1e-8, "column {i}, row {r}: {}", grad[(r, i)]);
            }
        }
    }

    #[test]
    fn heavy_penalty_zeroes_off_diagonal_in_one_update() {
        let s = CovarianceMatrix::identity(2);
        let sigma = CovarianceMatrix::from_rows(&[vec![1.0, 0.4], vec![0.4, 1.0]]).unwrap();
        let part = ColumnPartition::new(&sigma, &s, 1).unwrap();
        let inv = part.sigma11_inverse().unwrap();
        let a = compute_a_with_inverse(&part.sigma.m12, &part, &inv).unwrap();
        let gamma = gamma_update(a, 10.0).unwrap();
        let sub = build_with_inverse(&part, &inv, gamma, &PenaltySpec::Scalar(10.0)).unwrap();
        assert!(sub.u[0].abs() <= 10.0);
        let out = cd_column_update(&sigma, &s, 1, &PenaltySpec::Scalar(10.0), &cfg()).unwrap();
        assert_eq!(out.get(0, 1), 0.0);
        assert_eq!(out.get(1, 0), 0.0);
    }

    #[test]
    fn optimum_is_fixed_point() {
        let s = random_s(40, 4, 9);
        let pen = PenaltySpec::Scalar(0.05);
        let tight = SolverConfig { outer_tol: 1e-14, inner_tol: 1e-14, max_outer_iters: 5000, ..cfg() };
        let res = solve_cd(&s, &pen, &tight).unwrap();
        let again = cd_column_update(&res.sigma_hat, &s, 3, &pen, &tight).unwrap();
        assert!(again.max_abs_diff(&res.sigma_hat) < 1e-8);
    }

    #[test]
    fn unpenalized_solution_is_sample_covariance() {
        for p in [3, 10] {
            let s = random_s(4 * p, p, p as u64);
            let res = solve_cd(&s, &PenaltySpec::Scalar(0.0), &cfg()).unwrap();
            assert!(res.converged);
            assert!(res.sigma_hat.max_abs_diff(&s) < 1e-6);
        }
    }

    #[test]
    fn huge_penalty_gives_diagonal() {
        let s = random_s(40, 6, 3);
        let res = solve_cd(&s, &PenaltySpec::Scalar(50.0), &cfg()).unwrap();
        assert_eq!(res.nonzero_fraction, 0.0);
        assert_eq!(res.sigma_hat.max_abs_off_diagonal(), 0.0);
    }

    #[test]
    fn trace_is_monotone_and_iterates_pd() {
        let s = random_s(20, 8, 4);
        let pen = PenaltySpec::Scalar(0.1);
        let mut iterates = 0;
        let mut obs = |_: usize, m: &CovarianceMatrix, g: f64| {
            assert!(m.is_positive_definite());
            assert!(g.is_finite());
            iterates += 1;
        };
        let res = solve_cd_observed(&s, &pen, &cfg().with_init(Init::DiagonalOfS), Some(&mut obs)).unwrap();
        assert_eq!(iterates, res.outer_iters);
        for w in res.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
        let g = objective(&res.sigma_hat, &s, &pen).unwrap();
        assert_eq!(g, res.objective());
    }

    #[test]
    fn constant_matrix_penalty_matches_scalar_bitwise() {
        let s = random_s(25, 6, 12);
        let scalar = solve_cd(&s, &PenaltySpec::Scalar(0.15), &cfg()).unwrap();
        let matrix = solve_cd(&s, &PenaltySpec::constant_matrix(0.15, 6).unwrap(), &cfg()).unwrap();
        assert_eq!(scalar.sigma_hat, matrix.sigma_hat);
        assert_eq!(scalar.objective_trace, matrix.objective_trace);
    }

    #[test]
    fn elementwise_penalty_can_protect_an_entry() {
        let s = random_s(30, 4, 21);
        let mut p = DMatrix::from_element(4, 4, 100.0);
        p[(0, 1)] = 0.0;
        p[(1, 0)] = 0.0;
        let res = solve_cd(&s, &PenaltySpec::matrix(p).unwrap(), &cfg()).unwrap();
        assert!(res.sigma_hat.get(0, 1) != 0.0);
        assert_eq!(res.sigma_hat.get(2, 3), 0.0);
    }

    #[test]
    fn rejects_unpenalized_singular_sample_covariance() {
        let s = random_s(2, 5, 7);
        assert!(matches!(solve_cd(&s, &PenaltySpec::Scalar(0.0), &cfg()), Err(CovError::InvalidInput(_))));
        let diag = cfg().with_init(Init::DiagonalOfS);
        // A penalty lifts the precondition; rank deficiency may still surface
        // later as a degenerate column, never as an input error.
        match solve_cd(&s, &PenaltySpec::Scalar(0.1), &diag) {
            Ok(_) | Err(CovError::DegenerateSubproblem { column: Some(_), .. }) => {}
            Err(e) => panic!("unexpected error {e:?}"),
        }
    }

    #[test]
    fn rejects_non_pd_initialization() {
        let s = random_s(30, 2, 7);
        let bad = CovarianceMatrix::from_rows(&[vec![1.0, 3.0], vec![3.0, 1.0]]).unwrap();
        let err = solve_cd(&s, &PenaltySpec::Scalar(0.1), &cfg().with_init(Init::Custom(bad))).unwrap_err();
        assert!(matches!(err, CovError::InvalidInput(_)));
    }

    #[test]
    fn degenerate_column_reports_index() {
        // A zero sample variance leaves a = s22 = 0 at b = 0.
        let s = CovarianceMatrix::from_rows(&[vec![1.0, 0.2, 0.0], vec![0.2, 1.0, 0.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let sigma = CovarianceMatrix::identity(3);
        let err = cd_column_update(&sigma, &s, 2, &PenaltySpec::Scalar(0.5), &cfg()).unwrap_err();
        assert!(matches!(err, CovError::DegenerateSubproblem { column: Some(2), .. }));
    }
}
