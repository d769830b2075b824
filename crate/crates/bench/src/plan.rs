//! Experiment plans: which datasets, penalties, solvers and starting points
//! to sweep, and the plain-text `key = value` file format that describes them.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use covglasso::{CovError, ModelKind, Result, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverKind {
    Cd,
    Ecm,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Cd => "cd",
            SolverKind::Ecm => "ecm",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = CovError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cd" => Ok(SolverKind::Cd),
            "ecm" => Ok(SolverKind::Ecm),
            other => Err(CovError::Parse(format!("unknown solver {other:?} (expected cd or ecm)"))),
        }
    }
}

/// Starting point of a sweep cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InitKind {
    /// The sample covariance.
    Full,
    /// `diag(S)` for coordinate descent, `diag(S) + 1e-3` for ECM.
    Diag,
}

impl InitKind {
    pub fn name(self) -> &'static str {
        match self {
            InitKind::Full => "full",
            InitKind::Diag => "diag",
        }
    }
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitKind {
    type Err = CovError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(InitKind::Full),
            "diag" => Ok(InitKind::Diag),
            other => Err(CovError::Parse(format!("unknown init {other:?} (expected full or diag)"))),
        }
    }
}

/// A generated model without its seed; seeds come from the plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModelShape {
    pub kind: ModelKind,
    pub p: usize,
    pub n: usize,
}

impl FromStr for ModelShape {
    type Err = CovError;

    /// Parses `kind:p:n`, e.g. `sparse:50:100`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let [kind, p, n] = parts[..] else {
            return Err(CovError::Parse(format!("model {s:?} is not of the form kind:p:n")));
        };
        let int = |v: &str| v.trim().parse::<usize>().map_err(|e| CovError::Parse(format!("model {s:?}: {e}")));
        let shape = ModelShape { kind: kind.parse()?, p: int(p)?, n: int(n)? };
        if shape.p < 2 || shape.n < 1 {
            return Err(CovError::InvalidInput(format!("model {s:?} needs p >= 2 and n >= 1")));
        }
        Ok(shape)
    }
}

impl fmt::Display for ModelShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.kind, self.p, self.n)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RhoGrid {
    Explicit(Vec<f64>),
    /// `count` log-spaced values from `min_ratio * rho_max` to `rho_max`,
    /// where `rho_max` is the smallest power-of-two multiple of the largest
    /// off-diagonal `|s_ij|` at which coordinate descent returns a diagonal
    /// estimate. Computed per dataset.
    Auto {
        count: usize,
        min_ratio: f64,
    },
}

impl Default for RhoGrid {
    fn default() -> Self {
        RhoGrid::Auto { count: 20, min_ratio: 1e-3 }
    }
}

impl RhoGrid {
    pub fn validate(&self) -> Result<()> {
        match self {
            RhoGrid::Explicit(values) => {
                if values.is_empty() {
                    return Err(CovError::InvalidInput("rho grid is empty".into()));
                }
                if values.iter().any(|r| !r.is_finite() || *r < 0.0) {
                    return Err(CovError::InvalidInput("rho values must be finite and >= 0".into()));
                }
                if values.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(CovError::InvalidInput("rho values must be strictly increasing".into()));
                }
            }
            RhoGrid::Auto { count, min_ratio } => {
                if *count == 0 {
                    return Err(CovError::InvalidInput("rho_count must be >= 1".into()));
                }
                if !(*min_ratio > 0.0 && *min_ratio < 1.0) {
                    return Err(CovError::InvalidInput(format!("rho_min_ratio must be in (0, 1), got {min_ratio}")));
                }
            }
        }
        Ok(())
    }
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|k| if k + 1 == count { hi } else { (a + (b - a) * k as f64 / (count - 1) as f64).exp() }).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub models: Vec<ModelShape>,
    pub rho_grid: RhoGrid,
    pub solvers: Vec<SolverKind>,
    pub inits: Vec<InitKind>,
    /// One dataset per model and seed.
    pub replicate_seeds: Vec<u64>,
    /// Shared solver settings; `init` is overridden per cell.
    pub solver: SolverConfig,
    /// Each cell is timed this many times and the median is reported.
    pub timing_repeats: usize,
    /// Worker threads for running cells. Solvers are single-threaded.
    pub threads: usize,
}

impl ExperimentPlan {
    pub fn new(models: Vec<ModelShape>) -> Self {
        Self {
            models,
            rho_grid: RhoGrid::default(),
            solvers: vec![SolverKind::Cd, SolverKind::Ecm],
            inits: vec![InitKind::Full],
            replicate_seeds: vec![1],
            solver: SolverConfig::default(),
            timing_repeats: 1,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(CovError::InvalidInput("plan has no models".into()));
        }
        if self.solvers.is_empty() || self.inits.is_empty() || self.replicate_seeds.is_empty() {
            return Err(CovError::InvalidInput("plan needs at least one solver, init and seed".into()));
        }
        if self.timing_repeats == 0 || self.threads == 0 {
            return Err(CovError::InvalidInput("timing_repeats and threads must be >= 1".into()));
        }
        self.rho_grid.validate()?;
        self.solver.validate()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        text.parse()
    }
}

/// Plan files are `key = value` lines; `#` starts a comment. Lists are
/// comma separated. Recognized keys:
///
/// ```text
/// models         = sparse:50:100, dense:50:100   # required
/// seeds          = 1, 2
/// rho            = 0.01, 0.1, 1                  # explicit grid, or:
/// rho_count      = 20
/// rho_min_ratio  = 1e-3
/// solvers        = cd, ecm
/// inits          = full, diag
/// tol            = 1e-3
/// inner_tol      = 1e-6
/// max_iters      = 500
/// zero_threshold = 1e-4
/// timing_repeats = 1
/// threads        = 1
/// ```
impl FromStr for ExperimentPlan {
    type Err = CovError;

    fn from_str(text: &str) -> Result<Self> {
        let mut plan = ExperimentPlan::new(Vec::new());
        let mut explicit: Option<Vec<f64>> = None;
        let (mut count, mut min_ratio) = (20usize, 1e-3f64);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CovError::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let ctx = |e: CovError| CovError::Parse(format!("line {} ({key}): {e}", lineno + 1));
            match key {
                "models" | "model" => plan.models = list(value).map_err(ctx)?,
                "seeds" | "replicate_seeds" => plan.replicate_seeds = list(value).map_err(ctx)?,
                "rho" => explicit = Some(list(value).map_err(ctx)?),
                "rho_count" => count = scalar(value).map_err(ctx)?,
                "rho_min_ratio" => min_ratio = scalar(value).map_err(ctx)?,
                "solvers" => plan.solvers = list(value).map_err(ctx)?,
                "inits" => plan.inits = list(value).map_err(ctx)?,
                "tol" => plan.solver.outer_tol = scalar(value).map_err(ctx)?,
                "inner_tol" => plan.solver.inner_tol = scalar(value).map_err(ctx)?,
                "max_iters" => plan.solver.max_outer_iters = scalar(value).map_err(ctx)?,
                "zero_threshold" => plan.solver.zero_report_threshold = scalar(value).map_err(ctx)?,
                "timing_repeats" => plan.timing_repeats = scalar(value).map_err(ctx)?,
                "threads" => plan.threads = scalar(value).map_err(ctx)?,
                other => return Err(CovError::Parse(format!("line {}: unknown key {other:?}", lineno + 1))),
            }
        }
        plan.rho_grid = match explicit {
            Some(values) => RhoGrid::Explicit(values),
            None => RhoGrid::Auto { count, min_ratio },
        };
        plan.validate()?;
        Ok(plan)
    }
}

fn scalar<T: FromStr>(value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| CovError::Parse(format!("{value:?}: {e}")))
}

fn list<T: FromStr>(value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value.split(',').map(str::trim).filter(|v| !v.is_empty()).map(scalar).collect()
}
