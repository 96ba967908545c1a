//! Running a configuration and writing its output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fracstep::controller::{run_adaptive, RunReport};
use fracstep::reference::{max_error, uniform_times, Reference};
use fracstep::strategies::{solve_by_shifting_with, solve_by_splitting_weighted, Trajectory};
use fracstep::{assemble, AssembledOperator, Error};
use serde::Serialize;

use crate::config::{ConfigError, RunConfig, Strategy};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    /// The controller could not advance (locking or exhausted restarts).
    Locked(Error),
    Solver(Error),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "configuration error: {e}"),
            RunError::Locked(e) | RunError::Solver(e) => write!(f, "solver error: {e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Locked(_) => 2,
            RunError::Config(_) => 3,
            RunError::Solver(_) | RunError::Io(_) => 1,
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        let mut root = &e;
        while let Error::Subproblem { source, .. } = root {
            root = source;
        }
        match root {
            Error::Locking { .. } | Error::RestartBudget(_) => RunError::Locked(e),
            Error::InvalidParams(_) | Error::InvalidProblem(_) | Error::InvalidSpatial(_) => {
                RunError::Config(ConfigError(e.to_string()))
            }
            _ => RunError::Solver(e),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub label: String,
    pub problem: String,
    pub strategy: String,
    pub tol: f64,
    /// `None` when no exact solution is known.
    pub max_error: Option<f64>,
    pub error_bound: f64,
    pub step_count: usize,
    pub forced_steps: usize,
    pub first_step_width: Option<f64>,
    pub min_step_width: Option<f64>,
    pub solves: usize,
    pub restarts: usize,
    pub detected_onsets: Vec<f64>,
    pub barrier_onsets: Vec<f64>,
    pub wall_time: f64,
}

/// Finished solve with everything needed for the output files.
pub struct Outcome {
    pub summary: Summary,
    report: RunReport,
    solution: Box<dyn Trajectory>,
    op: AssembledOperator,
    times: Vec<f64>,
}

pub fn solve(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let spec = cfg.problem_spec()?;
    let rule = cfg.rule()?;
    let params = cfg.params();
    let op = assemble(&spec.spatial)?;
    let t0 = Instant::now();
    let (solution, report): (Box<dyn Trajectory>, RunReport) = match cfg.strategy {
        Strategy::Barrier => {
            let bspec = cfg.barrier_spec(&spec)?;
            let (sol, rep) = run_adaptive(&spec, &bspec, &rule, &op, &params)?;
            (Box::new(sol), rep)
        }
        Strategy::Split => {
            let w = cfg.weight_list(spec.pieces.len())?;
            let (sol, rep) = solve_by_splitting_weighted(&spec, &rule, &op, &params, &w)?;
            (Box::new(sol), rep)
        }
        Strategy::Shift => {
            let bspec = cfg.barrier_spec(&spec)?;
            let (sol, rep) = solve_by_shifting_with(&spec, &bspec, &rule, &op, &params)?;
            (Box::new(sol), rep)
        }
    };
    let wall_time = t0.elapsed().as_secs_f64();
    let times = uniform_times(spec.horizon, cfg.time_samples);
    let max_error = match Reference::exact(cfg.problem_id()?, spec.alpha) {
        Some(r) => Some(max_error(solution.as_ref(), &r, &op, &times)?),
        None => None,
    };
    let summary = Summary {
        label: cfg.label(),
        problem: cfg.problem.clone(),
        strategy: cfg.strategy.name().to_string(),
        tol: cfg.tol,
        max_error,
        error_bound: report.error_bound(),
        step_count: report.step_count(),
        forced_steps: report.forced_count(),
        first_step_width: report.first_width(),
        min_step_width: report.min_width(),
        solves: report.solves,
        restarts: report.restarts,
        detected_onsets: report.detected_onsets.clone(),
        barrier_onsets: report.barrier_onsets.clone(),
        wall_time,
    };
    Ok(Outcome {
        summary,
        report,
        solution,
        op,
        times,
    })
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn mesh_csv(rep: &RunReport) -> String {
    let mut s = String::from("step_index,t_left,t_right,width\n");
    for (k, c) in rep.cells.iter().enumerate() {
        let _ = writeln!(s, "{k},{},{},{}", num(c.left), num(c.right), num(c.width()));
    }
    s
}

/// Samples of accepted cells; forced cells carry no guarantee and are left out.
fn residual_csv(rep: &RunReport) -> String {
    let mut s = String::from("t,residual_linf,barrier_value,tol_times_barrier\n");
    for c in rep.cells.iter().filter(|c| !c.forced) {
        for p in &c.samples {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                num(p.t),
                num(p.residual),
                num(p.barrier),
                num(rep.tol * p.barrier)
            );
        }
    }
    s
}

fn solution_csv(out: &Outcome) -> Result<String, RunError> {
    let mut s = String::from("t,x,value\n");
    let xs = out.op.sample_points();
    for &t in std::iter::once(&0.0).chain(&out.times) {
        let u = out.op.sample_matrix() * out.solution.value_at(t)?;
        for (x, v) in xs.iter().zip(u.iter()) {
            let _ = writeln!(s, "{},{},{}", num(t), num(*x), num(*v));
        }
    }
    Ok(s)
}

fn write_outputs(out: &Outcome, dir: &Path) -> Result<(), RunError> {
    fs::write(dir.join("mesh.csv"), mesh_csv(&out.report))?;
    fs::write(dir.join("residual_trace.csv"), residual_csv(&out.report))?;
    fs::write(dir.join("solution.csv"), solution_csv(out)?)?;
    let json = serde_json::to_string_pretty(&out.summary).expect("summary serializes");
    fs::write(dir.join("report.json"), json + "\n")?;
    Ok(())
}

/// Build `dir` through a staging directory next to it, so a failed run never
/// leaves partial output behind.
pub fn atomic_dir(
    dir: &Path,
    fill: impl FnOnce(&Path) -> Result<(), RunError>,
) -> Result<(), RunError> {
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    let staging = tempfile::Builder::new()
        .prefix(".fracstep-")
        .tempdir_in(&parent)?;
    fill(staging.path())?;
    if dir.exists() {
        let old = tempfile::Builder::new()
            .prefix(".fracstep-old-")
            .tempdir_in(&parent)?;
        let trash = old.path().join("previous");
        fs::rename(dir, &trash)?;
        fs::rename(staging.keep(), dir)?;
        drop(old);
    } else {
        fs::rename(staging.keep(), dir)?;
    }
    Ok(())
}

/// Solve one configuration and write its files into `dir`.
pub fn execute(cfg: &RunConfig, dir: &Path) -> Result<Summary, RunError> {
    let outcome = solve(cfg)?;
    atomic_dir(dir, |staging| write_outputs(&outcome, staging))?;
    Ok(outcome.summary)
}

/// Solve several configurations of the same problem; each gets its own
/// subdirectory named by its label, plus a shared `compare.csv`.
pub fn compare(cfgs: &[RunConfig], dir: &Path) -> Result<Vec<Summary>, RunError> {
    let Some(first) = cfgs.first() else {
        return Err(ConfigError("nothing to compare".into()).into());
    };
    if cfgs.len() < 2 {
        return Err(ConfigError("compare needs at least two configurations".into()).into());
    }
    if let Some(other) = cfgs.iter().find(|c| c.problem != first.problem) {
        return Err(ConfigError(format!(
            "cannot compare problem {} with {}",
            first.problem, other.problem
        ))
        .into());
    }
    let mut labels: Vec<String> = cfgs.iter().map(RunConfig::label).collect();
    labels.sort();
    labels.dedup();
    if labels.len() != cfgs.len() {
        return Err(ConfigError("compared configurations need distinct labels".into()).into());
    }
    let outcomes = cfgs.iter().map(solve).collect::<Result<Vec<_>, _>>()?;
    atomic_dir(dir, |staging| {
        let mut table = String::from(
            "config_label,step_count,max_error,min_step_width,wall_time,error_bound\n",
        );
        for o in &outcomes {
            let sub = staging.join(&o.summary.label);
            fs::create_dir(&sub)?;
            write_outputs(o, &sub)?;
            let s = &o.summary;
            let _ = writeln!(
                table,
                "{},{},{},{},{},{}",
                s.label,
                s.step_count,
                s.max_error.map_or(String::new(), num),
                s.min_step_width.map_or(String::new(), num),
                num(s.wall_time),
                num(s.error_bound)
            );
        }
        fs::write(staging.join("compare.csv"), table)?;
        Ok(())
    })?;
    Ok(outcomes.into_iter().map(|o| o.summary).collect())
}
