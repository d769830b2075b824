//! Running a plan: dataset generation, penalty grids, and one solver call
//! per cell.

use std::cmp::Ordering;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Mutex;
use std::time::Instant;

use covglasso::{
    solve_cd, solve_ecm, CovError, CovarianceMatrix, Dataset, Init, ModelKind, ModelSpec, PenaltySpec, Result,
    SolverConfig, SolverResult, DIAGONAL_INIT_EPS,
};

use crate::plan::{log_spaced, ExperimentPlan, InitKind, ModelShape, RhoGrid, SolverKind};

/// Upper bound on doublings when searching for the smallest fully sparse penalty.
const MAX_DOUBLINGS: usize = 64;

/// One solver run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub model: ModelKind,
    pub p: usize,
    pub n: usize,
    pub seed: u64,
    pub rho: f64,
    pub solver: SolverKind,
    pub init: InitKind,
    pub wall_time_seconds: f64,
    pub outer_iters: usize,
    /// Fraction of off-diagonal pairs reported as nonzero.
    pub pct_nonzero: f64,
    /// `NaN` when the cell failed.
    pub objective_value: f64,
    pub converged: bool,
    /// Failure message for cells whose solve returned an error.
    pub error: Option<String>,
}

impl RunRecord {
    pub fn cell(&self) -> CellKey {
        CellKey { model: self.model, p: self.p, n: self.n, seed: self.seed, rho: self.rho, init: self.init }
    }

    /// Off-diagonal nonzero count, `pct_nonzero * p (p - 1) / 2`.
    pub fn nonzero_count(&self) -> usize {
        (self.pct_nonzero * (self.p * (self.p - 1) / 2) as f64).round() as usize
    }

    /// Emission order: model, p, seed, rho, solver, init (then n).
    pub fn sort_key_cmp(&self, other: &Self) -> Ordering {
        self.model
            .cmp(&other.model)
            .then(self.p.cmp(&other.p))
            .then(self.seed.cmp(&other.seed))
            .then(self.rho.total_cmp(&other.rho))
            .then(self.solver.cmp(&other.solver))
            .then(self.init.cmp(&other.init))
            .then(self.n.cmp(&other.n))
    }
}

/// Everything that identifies a cell except the solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellKey {
    pub model: ModelKind,
    pub p: usize,
    pub n: usize,
    pub seed: u64,
    pub rho: f64,
    pub init: InitKind,
}

/// The starting point a cell uses for a given solver.
pub fn cell_init(solver: SolverKind, init: InitKind) -> Init {
    match (solver, init) {
        (_, InitKind::Full) => Init::SampleCovariance,
        (SolverKind::Cd, InitKind::Diag) => Init::DiagonalOfS,
        (SolverKind::Ecm, InitKind::Diag) => Init::DiagonalOfSPlusEps(DIAGONAL_INIT_EPS),
    }
}

pub fn run_solver(solver: SolverKind, s: &CovarianceMatrix, rho: f64, cfg: &SolverConfig) -> Result<SolverResult> {
    let penalty = PenaltySpec::scalar(rho)?;
    match solver {
        SolverKind::Cd => solve_cd(s, &penalty, cfg),
        SolverKind::Ecm => solve_ecm(s, &penalty, cfg),
    }
}

/// Smallest `rho = 2^k max |s_ij|` (k may be negative) at which coordinate
/// descent from `S` returns a diagonal matrix.
pub fn diagonal_rho(s: &CovarianceMatrix, cfg: &SolverConfig) -> Result<f64> {
    let cfg = cfg.clone().with_init(Init::SampleCovariance);
    let is_diagonal =
        |rho: f64| -> Result<bool> { Ok(run_solver(SolverKind::Cd, s, rho, &cfg)?.nonzero_fraction == 0.0) };
    let start = s.max_abs_off_diagonal();
    let mut rho = if start > 0.0 { start } else { 1.0 };
    let mut steps = 0;
    while !is_diagonal(rho)? {
        rho *= 2.0;
        steps += 1;
        if steps > MAX_DOUBLINGS {
            return Err(CovError::Numerical("no penalty up to 2^64 max|s_ij| gives a diagonal estimate".into()));
        }
    }
    while steps < MAX_DOUBLINGS && is_diagonal(rho / 2.0)? {
        rho /= 2.0;
        steps += 1;
    }
    Ok(rho)
}

/// Penalty values for one dataset.
pub fn rho_values(grid: &RhoGrid, s: &CovarianceMatrix, cfg: &SolverConfig) -> Result<Vec<f64>> {
    grid.validate()?;
    match grid {
        RhoGrid::Explicit(values) => Ok(values.clone()),
        RhoGrid::Auto { count, min_ratio } => {
            let hi = diagonal_rho(s, cfg)?;
            Ok(log_spaced(hi * min_ratio, hi, *count))
        }
    }
}

struct Job<'a> {
    data: &'a Dataset,
    rho: f64,
    solver: SolverKind,
    init: InitKind,
}

fn run_cell(job: &Job<'_>, plan: &ExperimentPlan) -> RunRecord {
    let spec = job.data.spec;
    let mut record = RunRecord {
        model: spec.kind,
        p: spec.p,
        n: spec.n,
        seed: spec.seed,
        rho: job.rho,
        solver: job.solver,
        init: job.init,
        wall_time_seconds: 0.0,
        outer_iters: 0,
        pct_nonzero: 0.0,
        objective_value: f64::NAN,
        converged: false,
        error: None,
    };
    let cfg = SolverConfig { seed: spec.seed, ..plan.solver.clone() }.with_init(cell_init(job.solver, job.init));
    let mut times = Vec::with_capacity(plan.timing_repeats);
    let mut outcome = None;
    for _ in 0..plan.timing_repeats {
        let start = Instant::now();
        let res = run_solver(job.solver, &job.data.s, job.rho, &cfg);
        times.push(start.elapsed().as_secs_f64());
        match res {
            Ok(r) => outcome = Some(Ok(r)),
            Err(e) => {
                outcome = Some(Err(e));
                break;
            }
        }
    }
    times.sort_by(f64::total_cmp);
    record.wall_time_seconds = times[times.len() / 2];
    match outcome.expect("at least one repeat") {
        Ok(res) => {
            record.outer_iters = res.outer_iters;
            record.pct_nonzero = res.nonzero_fraction;
            record.objective_value = res.objective();
            record.converged = res.converged;
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Generates one dataset per (model, seed) pair.
pub fn generate_datasets(models: &[ModelShape], seeds: &[u64]) -> Result<Vec<Dataset>> {
    let mut out = Vec::with_capacity(models.len() * seeds.len());
    for shape in models {
        for &seed in seeds {
            out.push(Dataset::generate(ModelSpec::new(shape.kind, shape.p, shape.n, seed)?)?);
        }
    }
    Ok(out)
}

/// Runs every (model, seed, rho, solver, init) cell of the plan.
///
/// A failing cell becomes a non-converged record carrying the error message;
/// it never stops the sweep. Records come back sorted by
/// [`RunRecord::sort_key_cmp`] regardless of `plan.threads`.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<RunRecord>> {
    plan.validate()?;
    let datasets = generate_datasets(&plan.models, &plan.replicate_seeds)?;
    let mut grids = Vec::with_capacity(datasets.len());
    for data in &datasets {
        grids.push(rho_values(&plan.rho_grid, &data.s, &plan.solver)?);
    }
    let mut jobs = Vec::new();
    for (data, grid) in datasets.iter().zip(&grids) {
        for &rho in grid {
            for &solver in &plan.solvers {
                for &init in &plan.inits {
                    jobs.push(Job { data, rho, solver, init });
                }
            }
        }
    }

    let next = AtomicUsize::new(0);
    let records = Mutex::new(Vec::with_capacity(jobs.len()));
    let workers = plan.threads.min(jobs.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, AtomicOrdering::Relaxed);
                let Some(job) = jobs.get(k) else { break };
                let record = run_cell(job, plan);
                records.lock().expect("no worker panics while holding the lock").push(record);
            });
        }
    });
    let mut records = records.into_inner().expect("workers have finished");
    records.sort_by(RunRecord::sort_key_cmp);
    Ok(records)
}

/// `g(CD) - g(ECM)` for one cell; negative means coordinate descent found
/// the lower objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativeObjective {
    pub cell: CellKey,
    pub solver: SolverKind,
    /// Nonzero count of the coordinate descent estimate.
    pub cd_nonzero: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelativeObjectives {
    pub rows: Vec<RelativeObjective>,
    /// Cells lacking a successful ECM or coordinate descent counterpart.
    pub skipped: Vec<CellKey>,
}

pub fn find<'a>(records: &'a [RunRecord], cell: &CellKey, solver: SolverKind) -> Option<&'a RunRecord> {
    records.iter().find(|r| r.solver == solver && r.cell() == *cell)
}

/// Relative objectives against ECM for every non-ECM record.
pub fn relative_objective(records: &[RunRecord]) -> RelativeObjectives {
    let mut out = RelativeObjectives::default();
    for r in records.iter().filter(|r| r.solver != SolverKind::Ecm) {
        let cell = r.cell();
        let reference = find(records, &cell, SolverKind::Ecm).filter(|e| e.error.is_none());
        match reference {
            Some(ecm) if r.error.is_none() => out.rows.push(RelativeObjective {
                cell,
                solver: r.solver,
                cd_nonzero: r.nonzero_count(),
                value: r.objective_value - ecm.objective_value,
            }),
            _ => out.skipped.push(cell),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(solver: SolverKind, rho: f64, objective: f64) -> RunRecord {
        RunRecord {
            model: ModelKind::SparseTridiagonal,
            p: 4,
            n: 8,
            seed: 1,
            rho,
            solver,
            init: InitKind::Full,
            wall_time_seconds: 0.01,
            outer_iters: 3,
            pct_nonzero: 0.5,
            objective_value: objective,
            converged: true,
            error: None,
        }
    }

    #[test]
    fn relative_objective_sign_and_skips() {
        let records = vec![
            record(SolverKind::Cd, 0.1, 2.0),
            record(SolverKind::Ecm, 0.1, 2.0),
            record(SolverKind::Cd, 0.2, 3.0),
            record(SolverKind::Ecm, 0.2, 3.5),
            record(SolverKind::Cd, 0.3, 4.0),
        ];
        let rel = relative_objective(&records);
        assert_eq!(rel.rows.len(), 2);
        assert_eq!(rel.rows[0].value, 0.0);
        assert_eq!(rel.rows[1].value, -0.5);
        assert_eq!(rel.rows[0].cd_nonzero, 3);
        assert_eq!(rel.skipped.len(), 1);
        assert_eq!(rel.skipped[0].rho, 0.3);
    }

    #[test]
    fn failed_reference_is_skipped() {
        let mut ecm = record(SolverKind::Ecm, 0.1, f64::NAN);
        ecm.error = Some("boom".into());
        let rel = relative_objective(&[record(SolverKind::Cd, 0.1, 1.0), ecm]);
        assert!(rel.rows.is_empty());
        assert_eq!(rel.skipped.len(), 1);
    }

    #[test]
    fn diag_init_depends_on_solver() {
        assert_eq!(cell_init(SolverKind::Cd, InitKind::Diag), Init::DiagonalOfS);
        assert_eq!(cell_init(SolverKind::Ecm, InitKind::Diag), Init::DiagonalOfSPlusEps(1e-3));
        assert_eq!(cell_init(SolverKind::Ecm, InitKind::Full), Init::SampleCovariance);
    }

    #[test]
    fn diagonal_rho_is_tight_to_a_factor_of_two() {
        let data = Dataset::generate(ModelSpec::new(ModelKind::DenseCompound, 6, 30, 2).unwrap()).unwrap();
        let cfg = SolverConfig::default();
        let rho = diagonal_rho(&data.s, &cfg).unwrap();
        let at = |r: f64| run_solver(SolverKind::Cd, &data.s, r, &cfg).unwrap().nonzero_fraction;
        assert_eq!(at(rho), 0.0);
        assert!(at(rho / 2.0) > 0.0);
    }
}
