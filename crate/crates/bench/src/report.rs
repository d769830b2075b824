//! CSV reports for a finished sweep.
//!
//! A report directory holds:
//!
//! - `runs.csv`: one row per record, the measured quantities.
//! - `status.csv`: convergence flag and error message per record, same order.
//! - `time_vs_nonzero.csv`: wall time per solver against the coordinate
//!   descent nonzero count of the same cell.
//! - `relobj_vs_nonzero.csv`: `g(CD) - g(ECM)` per cell against the same count.
//! - `report_meta.txt`: `#`-prefixed notes on how the columns are measured.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use covglasso::matrix::format_f64;
use covglasso::{CovError, ModelKind, Result};

use crate::experiment::{find, relative_objective, RunRecord};
use crate::plan::{InitKind, SolverKind};

pub const RUNS_FILE: &str = "runs.csv";
pub const STATUS_FILE: &str = "status.csv";
pub const TIME_FILE: &str = "time_vs_nonzero.csv";
pub const RELOBJ_FILE: &str = "relobj_vs_nonzero.csv";
pub const META_FILE: &str = "report_meta.txt";

pub const RUNS_HEADER: [&str; 11] =
    ["model", "p", "n", "seed", "rho", "solver", "init", "wall_time_s", "outer_iters", "pct_nonzero", "objective"];
const STATUS_HEADER: [&str; 9] = ["model", "p", "n", "seed", "rho", "solver", "init", "converged", "error"];
const TIME_HEADER: [&str; 9] = ["model", "p", "n", "seed", "init", "rho", "cd_nonzero", "solver", "wall_time_s"];
const RELOBJ_HEADER: [&str; 9] =
    ["model", "p", "n", "seed", "init", "rho", "cd_nonzero", "solver", "relative_objective"];

#[derive(Clone, Debug, PartialEq)]
pub struct ReportFiles {
    pub runs: PathBuf,
    pub status: PathBuf,
    pub time_vs_nonzero: PathBuf,
    pub relobj_vs_nonzero: PathBuf,
    pub meta: PathBuf,
    /// Cells left out of the relative-objective file.
    pub skipped_cells: usize,
}

fn key_fields(r: &RunRecord) -> [String; 7] {
    [
        r.model.to_string(),
        r.p.to_string(),
        r.n.to_string(),
        r.seed.to_string(),
        format_f64(r.rho),
        r.solver.to_string(),
        r.init.to_string(),
    ]
}

/// Writes the report files into `dir`, creating it if needed.
pub fn emit_report(records: &[RunRecord], dir: impl AsRef<Path>) -> Result<ReportFiles> {
    if records.is_empty() {
        return Err(CovError::InvalidInput("no records to report".into()));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let files = ReportFiles {
        runs: dir.join(RUNS_FILE),
        status: dir.join(STATUS_FILE),
        time_vs_nonzero: dir.join(TIME_FILE),
        relobj_vs_nonzero: dir.join(RELOBJ_FILE),
        meta: dir.join(META_FILE),
        skipped_cells: 0,
    };

    let mut runs = csv::Writer::from_writer(File::create(&files.runs)?);
    let mut status = csv::Writer::from_writer(File::create(&files.status)?);
    runs.write_record(RUNS_HEADER)?;
    status.write_record(STATUS_HEADER)?;
    for r in records {
        let key = key_fields(r);
        runs.write_record(key.iter().map(String::as_str).chain([
            format_f64(r.wall_time_seconds).as_str(),
            r.outer_iters.to_string().as_str(),
            format_f64(r.pct_nonzero).as_str(),
            format_f64(r.objective_value).as_str(),
        ]))?;
        status.write_record(
            key.iter()
                .map(String::as_str)
                .chain([if r.converged { "true" } else { "false" }, r.error.as_deref().unwrap_or("")]),
        )?;
    }
    runs.flush()?;
    status.flush()?;

    let mut time = csv::Writer::from_writer(File::create(&files.time_vs_nonzero)?);
    time.write_record(TIME_HEADER)?;
    for r in records.iter().filter(|r| r.error.is_none()) {
        let Some(cd) = find(records, &r.cell(), SolverKind::Cd).filter(|c| c.error.is_none()) else {
            continue;
        };
        time.write_record([
            r.model.to_string(),
            r.p.to_string(),
            r.n.to_string(),
            r.seed.to_string(),
            r.init.to_string(),
            format_f64(r.rho),
            cd.nonzero_count().to_string(),
            r.solver.to_string(),
            format_f64(r.wall_time_seconds),
        ])?;
    }
    time.flush()?;

    let rel = relative_objective(records);
    let mut relobj = csv::Writer::from_writer(File::create(&files.relobj_vs_nonzero)?);
    relobj.write_record(RELOBJ_HEADER)?;
    for row in &rel.rows {
        let c = &row.cell;
        relobj.write_record([
            c.model.to_string(),
            c.p.to_string(),
            c.n.to_string(),
            c.seed.to_string(),
            c.init.to_string(),
            format_f64(c.rho),
            row.cd_nonzero.to_string(),
            row.solver.to_string(),
            format_f64(row.value),
        ])?;
    }
    relobj.flush()?;

    let meta = "\
# pct_nonzero: fraction of off-diagonal pairs i < j reported as nonzero.
# cd counts exact nonzeros; ecm counts |sigma_ij| > zero_threshold, since its
# off-diagonal entries shrink toward zero without reaching it.
# wall_time_s: median wall-clock seconds of the solve call alone.
# objective: g(Sigma) = log det Sigma + tr(S Sigma^-1) + rho sum_ij |sigma_ij|; NaN for failed cells.
# relative_objective: g(solver) - g(ecm) at the same cell; negative favours the solver.
# cd_nonzero: off-diagonal nonzero count of the coordinate descent estimate at the same cell.
";
    fs::write(&files.meta, meta)?;
    Ok(ReportFiles { skipped_cells: rel.skipped.len(), ..files })
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, k: usize, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = row.get(k).ok_or_else(|| CovError::Parse(format!("missing column {what}")))?;
    raw.parse::<T>().map_err(|e| CovError::Parse(format!("column {what}: {raw:?}: {e}")))
}

/// Reads back `runs.csv` and `status.csv` from a report directory.
pub fn parse_report(dir: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let dir = dir.as_ref();
    let mut runs = csv::Reader::from_path(dir.join(RUNS_FILE))?;
    if runs.headers()?.iter().ne(RUNS_HEADER) {
        return Err(CovError::Parse(format!("{RUNS_FILE} has an unexpected header")));
    }
    let mut status = csv::Reader::from_path(dir.join(STATUS_FILE))?;
    let status_rows: Vec<csv::StringRecord> = status.records().collect::<std::result::Result<_, _>>()?;
    let mut out = Vec::new();
    for (k, row) in runs.records().enumerate() {
        let row = row?;
        let st = status_rows
            .get(k)
            .ok_or_else(|| CovError::Parse(format!("{STATUS_FILE} has fewer rows than {RUNS_FILE}")))?;
        let error = st.get(8).filter(|e| !e.is_empty()).map(str::to_owned);
        out.push(RunRecord {
            model: field::<ModelKind>(&row, 0, "model")?,
            p: field(&row, 1, "p")?,
            n: field(&row, 2, "n")?,
            seed: field(&row, 3, "seed")?,
            rho: field(&row, 4, "rho")?,
            solver: field::<SolverKind>(&row, 5, "solver")?,
            init: field::<InitKind>(&row, 6, "init")?,
            wall_time_seconds: field(&row, 7, "wall_time_s")?,
            outer_iters: field(&row, 8, "outer_iters")?,
            pct_nonzero: field(&row, 9, "pct_nonzero")?,
            objective_value: field(&row, 10, "objective")?,
            converged: field(st, 7, "converged")?,
            error,
        });
    }
    if status_rows.len() != out.len() {
        return Err(CovError::Parse(format!("{STATUS_FILE} and {RUNS_FILE} disagree in length")));
    }
    Ok(out)
}
