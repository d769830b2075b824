//! Brute-force reference computations for verifying the solvers.
//!
//! Nothing here shares code with the solver path: the objective is
//! re-derived with explicit cofactor formulas (p = 2, 3) or an unpivoted
//! symmetric elimination (general p), and the `gamma` update is checked by
//! golden-section search rather than its closed form.

use nalgebra::DMatrix;

use crate::error::{CovError, Result};
use crate::matrix::CovarianceMatrix;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub best_point: CovarianceMatrix,
    pub best_value: f64,
    pub evaluations: usize,
    /// Final grid spacing (or pattern step) over the free entries.
    pub resolution: f64,
}

/// Golden-section search on `[lo, hi]` driven by a comparison: `less(x, y)`
/// must return `f(x) < f(y)`. Stops when the bracket is narrower than `width`.
pub fn golden_section_by(mut lo: f64, mut hi: f64, width: f64, less: impl Fn(f64, f64) -> bool) -> f64 {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    while hi - lo > width {
        if less(x1, x2) {
            hi = x2;
            x2 = x1;
            x1 = hi - INV_PHI * (hi - lo);
        } else {
            lo = x1;
            x1 = x2;
            x2 = lo + INV_PHI * (hi - lo);
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section minimization of a plain function.
pub fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64, width: f64) -> f64 {
    golden_section_by(lo, hi, width, |x, y| f(x) < f(y))
}

/// Minimizes `log gamma + a / gamma + rho gamma` by golden-section search on
/// `[1e-8, a + 10 / max(rho, 1e-8)]` down to a bracket of width `1e-10`.
///
/// Function values are compared through the exact difference
/// `f(x) - f(y) = (x - y) [ln(1 + (x - y)/y) / (x - y) - a / (xy) + rho]`,
/// which keeps full precision near the flat minimum. If the result lands on
/// an end of the bracket, the bracket is widened (up to three times).
pub fn oracle_gamma(a: f64, rho: f64) -> Result<f64> {
    if !(a > 0.0) || !(rho >= 0.0) {
        return Err(CovError::InvalidInput(format!("oracle_gamma needs a > 0, rho >= 0 (a = {a}, rho = {rho})")));
    }
    let width = 1e-10;
    let less = |x: f64, y: f64| {
        let d = x - y;
        if d == 0.0 {
            return false;
        }
        let slope = (d / y).ln_1p() / d - a / (x * y) + rho;
        d * slope < 0.0
    };
    let mut lo = 1e-8;
    let mut hi = a + 10.0 / rho.max(1e-8);
    for _ in 0..=3 {
        let x = golden_section_by(lo, hi, width, less);
        let at_top = hi - x <= 2.0 * width;
        let at_bottom = x - lo <= 2.0 * width && lo > f64::MIN_POSITIVE;
        if !at_top && !at_bottom {
            return Ok(x);
        }
        if at_top {
            hi *= 10.0;
        }
        if at_bottom {
            lo *= 1e-3;
        }
    }
    Err(CovError::Numerical(format!("oracle_gamma: no interior minimum for a = {a}, rho = {rho}")))
}

/// `g` for a 2x2 matrix in closed form; `None` unless positive definite.
fn g2(s11: f64, s22: f64, s12: f64, x11: f64, x22: f64, x12: f64, rho: f64) -> Option<f64> {
    let det = x11 * x22 - x12 * x12;
    if !(x11 > 0.0 && det > 0.0) {
        return None;
    }
    let trace = (s11 * x22 + s22 * x11 - 2.0 * s12 * x12) / det;
    Some(det.ln() + trace + rho * (x11.abs() + x22.abs() + 2.0 * x12.abs()))
}

/// `g` for a 3x3 symmetric matrix via cofactors; `None` unless positive definite.
fn g3(s: &[[f64; 3]; 3], x: &[[f64; 3]; 3], rho: f64) -> Option<f64> {
    let m1 = x[0][0];
    let m2 = x[0][0] * x[1][1] - x[0][1] * x[1][0];
    let c00 = x[1][1] * x[2][2] - x[1][2] * x[2][1];
    let c01 = x[1][2] * x[2][0] - x[1][0] * x[2][2];
    let c02 = x[1][0] * x[2][1] - x[1][1] * x[2][0];
    let det = x[0][0] * c00 + x[0][1] * c01 + x[0][2] * c02;
    if !(m1 > 0.0 && m2 > 0.0 && det > 0.0) {
        return None;
    }
    // Adjugate of a symmetric matrix is symmetric.
    let c11 = x[0][0] * x[2][2] - x[0][2] * x[2][0];
    let c12 = x[0][1] * x[2][0] - x[0][0] * x[2][1];
    let c22 = m2;
    let adj = [[c00, c01, c02], [c01, c11, c12], [c02, c12, c22]];
    let mut trace = 0.0;
    let mut l1 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            trace += s[i][j] * adj[j][i];
            l1 += x[i][j].abs();
        }
    }
    Some(det.ln() + trace / det + rho * l1)
}

/// `g` for any `p` through unpivoted symmetric elimination (`LDL'`): the
/// matrix is positive definite exactly when every pivot is positive.
/// Returns `None` otherwise.
pub fn dense_objective(sigma: &DMatrix<f64>, s: &DMatrix<f64>, rho: f64) -> Option<f64> {
    let p = sigma.nrows();
    let mut a: Vec<Vec<f64>> = (0..p).map(|i| (0..p).map(|j| sigma[(i, j)]).collect()).collect();
    // Right-hand sides: solve Sigma X = S to get tr(Sigma^-1 S).
    let mut b: Vec<Vec<f64>> = (0..p).map(|i| (0..p).map(|j| s[(i, j)]).collect()).collect();
    let mut log_det = 0.0;
    for k in 0..p {
        let pivot = a[k][k];
        if !(pivot > 0.0) {
            return None;
        }
        log_det += pivot.ln();
        for i in (k + 1)..p {
            let f = a[i][k] / pivot;
            if f == 0.0 {
                continue;
            }
            for j in k..p {
                a[i][j] -= f * a[k][j];
            }
            for j in 0..p {
                b[i][j] -= f * b[k][j];
            }
        }
    }
    // Back substitution column by column; only the diagonal of X is needed,
    // but every entry of a column is required to reach it.
    let mut trace = 0.0;
    for col in 0..p {
        let mut x = vec![0.0; p];
        for i in (0..p).rev() {
            let mut acc = b[i][col];
            for j in (i + 1)..p {
                acc -= a[i][j] * x[j];
            }
            x[i] = acc / a[i][i];
        }
        trace += x[col];
    }
    let l1: f64 = sigma.iter().map(|v| v.abs()).sum();
    Some(log_det + trace + rho * l1)
}

/// Grid parameters for [`oracle_small_problem`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridOptions {
    /// Points per axis on every pass (odd, so the center is on the grid).
    pub points_per_axis: usize,
    /// Spacing shrink factor between passes.
    pub refine_factor: f64,
    pub min_refinements: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { points_per_axis: 41, refine_factor: 5.0, min_refinements: 2 }
    }
}

/// Brute-force minimum of `g` for `p = 2` (exhaustive grid with refinement)
/// or `p = 3` (coarse grid followed by compass search). Passes continue
/// until the spacing is at most `resolution` (at least two refinements).
pub fn oracle_small_problem(s: &CovarianceMatrix, rho: f64, resolution: f64) -> Result<OracleReport> {
    oracle_small_problem_with(s, rho, resolution, GridOptions::default())
}

pub fn oracle_small_problem_with(
    s: &CovarianceMatrix,
    rho: f64,
    resolution: f64,
    opts: GridOptions,
) -> Result<OracleReport> {
    if !(rho >= 0.0) || !(resolution > 0.0) {
        return Err(CovError::InvalidInput("oracle needs rho >= 0 and resolution > 0".into()));
    }
    if (0..s.dim()).any(|i| !(s.get(i, i) > 0.0)) {
        return Err(CovError::InvalidInput("oracle box needs positive sample variances".into()));
    }
    match s.dim() {
        2 => grid_p2(s, rho, resolution, opts),
        3 => pattern_p3(s, rho, resolution),
        p => Err(CovError::InvalidInput(format!("oracle_small_problem supports p = 2 or 3, got {p}"))),
    }
}

/// Axis values `center + (k - mid) h`, optionally with 0 inserted so kinks
/// of the L1 term are on the grid.
fn axis(center: f64, h: f64, points: usize, include_zero: bool, positive_only: bool) -> Vec<f64> {
    let mid = (points / 2) as f64;
    let mut v: Vec<f64> = (0..points).map(|k| center + (k as f64 - mid) * h).collect();
    if include_zero && v[0] < 0.0 && *v.last().unwrap() > 0.0 {
        v.push(0.0);
    }
    if positive_only {
        v.retain(|&x| x > 0.0);
    }
    v
}

fn grid_p2(s: &CovarianceMatrix, rho: f64, resolution: f64, opts: GridOptions) -> Result<OracleReport> {
    let (s11, s22, s12) = (s.get(0, 0), s.get(1, 1), s.get(0, 1));
    let half = (opts.points_per_axis / 2) as f64;
    // Diagonals span (0, 2 s_ii); the off-diagonal spans s12 +- sqrt(s11 s22).
    let mut h = [0.975 * s11 / half, 0.975 * s22 / half, (s11 * s22).sqrt() / half];
    let mut center = [s11, s22, s12];
    let mut best: Option<([f64; 3], f64)> = None;
    let mut evaluations = 0usize;
    let mut pass = 0usize;
    loop {
        let a11 = axis(center[0], h[0], opts.points_per_axis, false, true);
        let a22 = axis(center[1], h[1], opts.points_per_axis, false, true);
        let a12 = axis(center[2], h[2], opts.points_per_axis, true, false);
        for &x11 in &a11 {
            for &x22 in &a22 {
                for &x12 in &a12 {
                    evaluations += 1;
                    if let Some(v) = g2(s11, s22, s12, x11, x22, x12, rho) {
                        let better = match best {
                            None => true,
                            Some((pt, bv)) => v < bv || (v == bv && [x11, x22, x12] < pt),
                        };
                        if better {
                            best = Some(([x11, x22, x12], v));
                        }
                    }
                }
            }
        }
        let Some((pt, _)) = best else {
            return Err(CovError::Numerical("oracle grid found no positive definite point".into()));
        };
        let spacing = h.iter().copied().fold(0.0, f64::max);
        if pass >= opts.min_refinements && spacing <= resolution {
            break;
        }
        center = pt;
        for hk in h.iter_mut() {
            *hk /= opts.refine_factor;
        }
        pass += 1;
    }
    let (pt, value) = best.unwrap();
    let point = CovarianceMatrix::from_rows(&[vec![pt[0], pt[2]], vec![pt[2], pt[1]]])?;
    Ok(OracleReport {
        best_point: point,
        best_value: value,
        evaluations,
        resolution: h.iter().copied().fold(0.0, f64::max),
    })
}

fn pattern_p3(s: &CovarianceMatrix, rho: f64, resolution: f64) -> Result<OracleReport> {
    let mut sm = [[0.0; 3]; 3];
    for (i, row) in sm.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = s.get(i, j);
        }
    }
    // Free entries: x11, x22, x33, x12, x13, x23.
    const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];
    let to_matrix = |z: &[f64; 6]| {
        let mut x = [[0.0; 3]; 3];
        for (k, &(i, j)) in PAIRS.iter().enumerate() {
            x[i][j] = z[k];
            x[j][i] = z[k];
        }
        x
    };
    let mut evaluations = 0usize;
    let mut eval = |z: &[f64; 6]| {
        evaluations += 1;
        g3(&sm, &to_matrix(z), rho)
    };

    let center: [f64; 6] = std::array::from_fn(|k| sm[PAIRS[k].0][PAIRS[k].1]);
    let mut h: [f64; 6] = std::array::from_fn(|k| {
        let (i, j) = PAIRS[k];
        if i == j {
            0.975 * sm[i][i] / 3.0
        } else {
            (sm[i][i] * sm[j][j]).sqrt() / 3.0
        }
    });

    // Coarse 7^6 grid.
    let axes: Vec<Vec<f64>> = (0..6)
        .map(|k| {
            let diag = PAIRS[k].0 == PAIRS[k].1;
            axis(center[k], h[k], 7, !diag, diag)
        })
        .collect();
    let mut best: Option<([f64; 6], f64)> = None;
    let mut idx = [0usize; 6];
    'grid: loop {
        let z: [f64; 6] = std::array::from_fn(|k| axes[k][idx[k]]);
        if let Some(v) = eval(&z) {
            if best.is_none_or(|(_, bv)| v < bv) {
                best = Some((z, v));
            }
        }
        for k in (0..6).rev() {
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                continue 'grid;
            }
            idx[k] = 0;
        }
        break;
    }
    let Some((mut z, mut value)) = best else {
        return Err(CovError::Numerical("oracle grid found no positive definite point".into()));
    };

    // Compass search with step halving; off-diagonals also try exact zero.
    while h.iter().copied().fold(0.0, f64::max) > resolution {
        let mut improved = false;
        for k in 0..6 {
            let mut candidates = vec![z[k] + h[k], z[k] - h[k]];
            if PAIRS[k].0 != PAIRS[k].1 && z[k] != 0.0 {
                candidates.push(0.0);
            }
            for c in candidates {
                let mut trial = z;
                trial[k] = c;
                if let Some(v) = eval(&trial) {
                    if v < value {
                        z = trial;
                        value = v;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            for hk in h.iter_mut() {
                *hk *= 0.5;
            }
        }
    }
    let x = to_matrix(&z);
    let point = CovarianceMatrix::from_rows(&x.iter().map(|r| r.to_vec()).collect::<Vec<_>>())?;
    Ok(OracleReport {
        best_point: point,
        best_value: value,
        evaluations,
        resolution: h.iter().copied().fold(0.0, f64::max),
    })
}

/// Result of [`check_stationarity`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationarityReport {
    /// Most negative one-sided directional derivative found (0 if none is negative).
    pub worst: f64,
    /// Coordinate `(i, j)` with `i <= j` where it occurred.
    pub coordinate: (usize, usize),
    /// Finite-difference step actually used (shrunk if PD was lost).
    pub step: f64,
}

/// One-sided finite-difference directional derivatives of `g` at
/// `sigma_hat` along `+-E_ij` for every `i <= j`, where `E_ij` moves
/// `sigma_ij` and `sigma_ji` together. At a stationary point none of them
/// is negative beyond finite-difference error.
pub fn check_stationarity(
    sigma_hat: &CovarianceMatrix,
    s: &CovarianceMatrix,
    rho: f64,
    step: f64,
) -> Result<StationarityReport> {
    let p = sigma_hat.dim();
    if s.dim() != p {
        return Err(CovError::DimensionMismatch { expected: p, got: s.dim() });
    }
    if !(step > 0.0) {
        return Err(CovError::InvalidInput("finite-difference step must be > 0".into()));
    }
    let base_m = sigma_hat.as_matrix();
    let s_m = s.as_matrix();
    let base = dense_objective(base_m, s_m, rho).ok_or_else(|| CovError::NotPositiveDefinite {
        context: "check_stationarity needs a positive definite point".into(),
    })?;

    let mut report = StationarityReport { worst: 0.0, coordinate: (0, 0), step };
    let mut trial = base_m.clone();
    for j in 0..p {
        for i in 0..=j {
            for sign in [1.0, -1.0] {
                let mut h = step;
                let mut attempts = 0;
                let deriv = loop {
                    trial[(i, j)] = base_m[(i, j)] + sign * h;
                    trial[(j, i)] = trial[(i, j)];
                    let value = dense_objective(&trial, s_m, rho);
                    trial[(i, j)] = base_m[(i, j)];
                    trial[(j, i)] = base_m[(j, i)];
                    match value {
                        Some(v) => break (v - base) / h,
                        None if attempts < 40 => {
                            h *= 0.5;
                            attempts += 1;
                        }
                        None => {
                            return Err(CovError::NotPositiveDefinite {
                                context: format!("no positive definite step along ({i}, {j})"),
                            })
                        }
                    }
                };
                if deriv < report.worst {
                    report = StationarityReport { worst: deriv, coordinate: (i, j), step: h };
                }
            }
        }
    }
    Ok(report)
}
