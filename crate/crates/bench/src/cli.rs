//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use covglasso::{CovError, CovarianceMatrix, Dataset, Init, ModelKind, ModelSpec, Result, SolverConfig};

use crate::experiment::{cell_init, run_experiment, run_solver};
use crate::plan::{ExperimentPlan, InitKind, SolverKind};
use crate::report::emit_report;
use crate::verify::run_verification;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "covglasso", version, about = "Sparse covariance estimation with the covariance graphical lasso")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset (y.csv, s.csv, sigma_true.csv, meta.txt).
    Generate {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate a sparse covariance matrix from a sample covariance CSV.
    Solve {
        /// Sample covariance, one row per line, no header.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        rho: f64,
        #[arg(long, value_enum, default_value_t = SolverArg::Cd)]
        solver: SolverArg,
        /// full, diag or custom:PATH
        #[arg(long, default_value = "full")]
        init: String,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment plan and write CSV reports.
    Sweep {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the solvers against brute-force references.
    #[command(hide = true)]
    Verify {
        #[arg(long, default_value_t = 20)]
        cases: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Sparse,
    Dense,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverArg {
    Cd,
    Ecm,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Cd => SolverKind::Cd,
            SolverArg::Ecm => SolverKind::Ecm,
        }
    }
}

fn parse_init(arg: &str, solver: SolverKind) -> Result<Init> {
    if let Some(path) = arg.strip_prefix("custom:") {
        return Ok(Init::Custom(CovarianceMatrix::read_csv(path)?));
    }
    Ok(cell_init(solver, arg.parse::<InitKind>()?))
}

fn exit_code(err: &CovError) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Generate { model, p, n, seed, out } => {
            let kind = match model {
                ModelArg::Sparse => ModelKind::SparseTridiagonal,
                ModelArg::Dense => ModelKind::DenseCompound,
            };
            generate(ModelSpec::new(kind, p, n, seed)?, &out)?;
            Ok(EXIT_OK)
        }
        Command::Solve { input, rho, solver, init, tol, max_iters, out } => {
            let solver = SolverKind::from(solver);
            let cfg = SolverConfig { outer_tol: tol, max_outer_iters: max_iters, ..SolverConfig::default() }
                .with_init(parse_init(&init, solver)?);
            let s = CovarianceMatrix::read_csv(&input)?;
            let res = run_solver(solver, &s, rho, &cfg)?;
            res.sigma_hat.write_csv(&out)?;
            println!(
                "solver={solver} rho={rho} objective={} outer_iters={} converged={} pct_nonzero={} wall_time_s={}",
                res.objective(),
                res.outer_iters,
                res.converged,
                res.nonzero_fraction,
                res.wall_time.as_secs_f64()
            );
            if !res.converged {
                eprintln!("warning: stopped after {} iterations without meeting tol = {tol}", res.outer_iters);
            }
            Ok(EXIT_OK)
        }
        Command::Sweep { plan, out } => {
            let plan = ExperimentPlan::from_file(&plan)?;
            let records = run_experiment(&plan)?;
            let files = emit_report(&records, &out)?;
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            let unconverged = records.iter().filter(|r| !r.converged).count();
            println!("{} runs written to {}", records.len(), files.runs.display());
            if failed > 0 {
                eprintln!("warning: {failed} cells failed; see {}", files.status.display());
            }
            if unconverged > failed {
                eprintln!("warning: {} cells hit max_iters", unconverged - failed);
            }
            if files.skipped_cells > 0 {
                eprintln!(
                    "warning: {} cells lack a solver counterpart for the relative objective",
                    files.skipped_cells
                );
            }
            Ok(EXIT_OK)
        }
        Command::Verify { cases } => {
            let outcome = run_verification(cases)?;
            for line in &outcome.lines {
                println!("{line}");
            }
            Ok(if outcome.passed { EXIT_OK } else { EXIT_NUMERICAL })
        }
    }
}

fn generate(spec: ModelSpec, out: &Path) -> Result<()> {
    let data = Dataset::generate(spec)?;
    data.save(out)?;
    data.s.write_csv(out.join("s.csv"))?;
    println!("wrote {} samples of {} ({}) to {}", spec.n, spec.kind, spec.p, out.display());
    Ok(())
}
