//! Quick self-check against the brute-force references in
//! [`covglasso::oracle`].

use covglasso::oracle::{check_stationarity, oracle_gamma, oracle_small_problem};
use covglasso::{gamma_update, solve_cd, Dataset, ModelKind, ModelSpec, PenaltySpec, Result, SolverConfig};

pub struct VerifyOutcome {
    pub lines: Vec<String>,
    pub passed: bool,
}

/// Fractional parts of `k * (golden ratio)`: evenly spread points in [0, 1).
fn spread(k: usize) -> f64 {
    (k as f64 * 0.618_033_988_749_894_9).fract()
}

pub fn run_verification(cases: usize) -> Result<VerifyOutcome> {
    let mut lines = Vec::new();
    let mut passed = true;
    let mut report = |name: &str, ok: bool, detail: String| {
        passed &= ok;
        lines.push(format!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" }));
    };

    let mut worst = 0.0f64;
    for k in 0..1000 {
        let a = 1e-3 + 10.0 * spread(2 * k + 1);
        let rho = 5.0 * spread(2 * k + 2);
        worst = worst.max((gamma_update(a, rho)? - oracle_gamma(a, rho)?).abs());
    }
    report("gamma closed form", worst < 1e-8, format!("max |closed - search| = {worst:e} over 1000 pairs"));

    let cfg = SolverConfig { outer_tol: 1e-12, inner_tol: 1e-12, max_outer_iters: 20_000, ..SolverConfig::default() };
    let (mut gap, mut violation) = (f64::NEG_INFINITY, 0.0f64);
    for seed in 0..cases as u64 {
        let kind = if seed % 2 == 0 { ModelKind::SparseTridiagonal } else { ModelKind::DenseCompound };
        let s = Dataset::generate(ModelSpec::new(kind, 2, 5, seed)?)?.s;
        for rho in [0.05, 0.2, 1.0] {
            let cd = solve_cd(&s, &PenaltySpec::Scalar(rho), &cfg)?;
            let oracle = oracle_small_problem(&s, rho, 1e-3)?;
            gap = gap.max(cd.objective() - oracle.best_value);
            if cd.converged {
                violation = violation.min(check_stationarity(&cd.sigma_hat, &s, rho, 1e-6)?.worst);
            }
        }
    }
    report("2x2 grid minimum", gap <= 1e-3, format!("max g(cd) - g(grid) = {gap:e} over {} instances", 3 * cases));
    report("stationarity", violation >= -1e-4, format!("most negative directional derivative {violation:e}"));
    Ok(VerifyOutcome { lines, passed })
}
