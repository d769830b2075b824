//! Experiment harness for the covariance graphical lasso solvers: penalty
//! sweeps over synthetic datasets, CSV reports, and the `covglasso` CLI.

pub mod cli;
pub mod experiment;
pub mod plan;
pub mod report;
pub mod verify;

pub use experiment::{relative_objective, run_experiment, RelativeObjective, RunRecord};
pub use plan::{ExperimentPlan, InitKind, ModelShape, RhoGrid, SolverKind};
pub use report::{emit_report, parse_report, ReportFiles};
