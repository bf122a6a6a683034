//! The `run`, `sweep` and `selftest` subcommands, independent of argument parsing.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::PathBuf;

use gyrolim_core::gyrocenter::GyrocenterModel;
use gyrolim_core::{Error, MethodTableau};

use crate::config::{ConfigError, ConfigIssue, ResolvedRun, RunConfig, SweepPlan};
use crate::harness::{
    convergence_table, hamiltonian_error_table, integrate, solver_robustness_table, spectral_run, CellStatus,
    HarnessError, SweepReport, TableKind,
};
use crate::output::{self, RunSummary};
use crate::selftest::{run_selftest, GroupResult, SelftestOptions};

/// Failure of a subcommand.
#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    /// Invalid configuration.
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// Reading or writing files.
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    /// The integration stopped; the summary was still written.
    #[error("{error}")]
    Run {
        /// What stopped it.
        error: HarnessError,
        /// Where the summary went.
        summary: PathBuf,
    },
    /// A sweep could not be set up.
    #[error("{0}")]
    Sweep(Error),
    /// Some self-test groups failed.
    #[error("{0} self-test group(s) failed")]
    Selftest(usize),
}

impl CommandError {
    /// Process exit code: 2 configuration, 3 non-convergence, 4 domain error, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 2,
            CommandError::Run { error, .. } => core_code(error.cause()),
            CommandError::Sweep(e) => core_code(e),
            CommandError::Io(_) | CommandError::Selftest(_) => 1,
        }
    }
}

fn core_code(e: &Error) -> i32 {
    if e.is_solver_failure() {
        3
    } else if e.field_error().is_some() {
        4
    } else if matches!(e, Error::InvalidParameter { .. }) {
        2
    } else {
        1
    }
}

fn setup_error(field: &str, e: Error) -> ConfigError {
    ConfigError {
        issues: vec![ConfigIssue {
            field: field.into(),
            message: e.to_string(),
        }],
    }
}

fn build(run: &ResolvedRun) -> Result<(GyrocenterModel, MethodTableau), ConfigError> {
    let model = run.problem.model().map_err(|e| setup_error("params", e))?;
    let tableau = run.method.tableau().map_err(|e| setup_error("method", e))?;
    Ok((model, tableau))
}

/// Status label of a failed run.
pub fn failure_status(e: &HarnessError) -> &'static str {
    match CellStatus::from_error(e) {
        CellStatus::NonConvergence => "non_convergence",
        CellStatus::DomainError => "domain_error",
        _ => "failed",
    }
}

/// Integrates one trajectory and writes `trajectory.csv` and `summary.json`
/// into the output directory. A failed run still writes its summary.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunSummary, CommandError> {
    let run = cfg.resolve_run()?;
    let (model, tableau) = build(&run)?;
    let y0 = run.problem.y0;
    let result = integrate(&model, &y0, run.h, run.n_steps, &tableau, &run.solver, run.sample_every);
    let mut summary = RunSummary {
        config: run.to_config(),
        status: "ok".into(),
        error: None,
        steps: 0,
        final_state: y0.to_vec(),
        max_abs_drift: 0.0,
        total_iterations: 0,
        iterations_per_step: 0.0,
        max_iterations_per_step: 0,
        wall_time: 0.0,
        trajectory: String::new(),
    };
    let failure = match result {
        Ok(rec) => {
            let (_, mut w) = output::create(&run.out_dir, "trajectory.csv")?;
            output::write_trajectory_csv(&rec, &mut w)?;
            w.flush()?;
            summary.steps = rec.stats.steps;
            summary.final_state = rec.final_state().to_vec();
            summary.max_abs_drift = rec.max_abs_drift;
            summary.total_iterations = rec.stats.total_iterations;
            summary.iterations_per_step = rec.stats.mean_per_step();
            summary.max_iterations_per_step = rec.stats.max_per_step;
            summary.wall_time = rec.wall_time;
            summary.trajectory = "trajectory.csv".into();
            None
        }
        Err(e) => {
            summary.status = failure_status(&e).into();
            summary.error = Some(e.to_string());
            if let HarnessError::StepFailed { step, .. } = e {
                summary.steps = step;
            }
            Some(e)
        }
    };
    let (path, mut w) = output::create(&run.out_dir, "summary.json")?;
    output::write_json(&summary, &mut w)?;
    w.flush()?;
    match failure {
        None => Ok(summary),
        Some(error) => Err(CommandError::Run { error, summary: path }),
    }
}

/// File stem of a table.
pub fn table_name(t: TableKind) -> &'static str {
    match t {
        TableKind::Energy => "energy",
        TableKind::Convergence => "convergence",
        TableKind::Spectral => "spectral",
        TableKind::Robustness => "robustness",
    }
}

/// Computes the report of a sweep without writing anything.
pub fn compute_sweep(cfg: &RunConfig, table: Option<TableKind>) -> Result<(SweepReport, PathBuf), CommandError> {
    let sw = cfg.resolve_sweep(table)?;
    let model = sw.problem.model().map_err(|e| setup_error("params", e))?;
    let y0 = sw.problem.y0;
    let report = match &sw.plan {
        SweepPlan::Energy { s_list, k_list } => {
            hamiltonian_error_table(&model, &y0, sw.h, sw.t_end, s_list, k_list, &sw.solver)
        }
        SweepPlan::Convergence {
            methods,
            halvings,
            reference,
        } => convergence_table(&model, &y0, sw.h, *halvings, sw.t_end, methods, *reference, &sw.solver),
        SweepPlan::Spectral { s_list, k, reference_s } => {
            spectral_run(&model, &y0, sw.h, sw.t_end, s_list, *k, *reference_s, &sw.solver)
        }
        SweepPlan::Robustness { methods, solvers, grid } => {
            solver_robustness_table(&model, &y0, sw.t_end, methods, solvers, *grid, &sw.solver)
        }
    }
    .map_err(CommandError::Sweep)?;
    Ok((report, sw.out_dir))
}

/// Runs a sweep and writes `sweep_<table>.csv` and `sweep_<table>.json`.
pub fn cmd_sweep(cfg: &RunConfig, table: Option<TableKind>) -> Result<SweepReport, CommandError> {
    let (report, dir) = compute_sweep(cfg, table)?;
    let stem = format!("sweep_{}", table_name(report.table));
    let (_, mut w) = output::create(&dir, &format!("{stem}.csv"))?;
    output::write_sweep_csv(&report, &mut w)?;
    w.flush()?;
    let (_, mut w) = output::create(&dir, &format!("{stem}.json"))?;
    output::write_json(&report, &mut w)?;
    w.flush()?;
    Ok(report)
}

fn short(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into())
}

/// Plain-text rendering of a sweep, one line per cell.
pub fn render_report(report: &SweepReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:<18} {:>10} {:>8} {:>11} {:>11} {:>6} {:>9}",
        "method", "solver", "h", "status", "drift", "error", "rate", "it/step"
    );
    for c in &report.cells {
        let _ = writeln!(
            s,
            "{:<16} {:<18} {:>10} {:>8} {:>11} {:>11} {:>6} {:>9.2}",
            c.method.to_string(),
            format!("{:?}", c.solver),
            short(c.h),
            c.status.label(),
            short(c.max_energy_drift),
            short(c.final_error),
            c.empirical_rate.map(|r| format!("{r:.2}")).unwrap_or_else(|| "-".into()),
            c.iterations_per_step,
        );
    }
    s
}

/// Runs the self-test, printing one line per group.
pub fn cmd_selftest<W: Write>(opts: SelftestOptions, mut out: W) -> Result<Vec<GroupResult>, CommandError> {
    let results = run_selftest(opts);
    for g in &results {
        let verdict = if g.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{verdict} {:<30} {:>7.2}s  {}", g.name, g.seconds, g.detail)?;
    }
    let failed = results.iter().filter(|g| !g.passed).count();
    if failed > 0 {
        return Err(CommandError::Selftest(failed));
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gyrolim_core::poisson::{FieldError, FieldErrorKind};

    #[test]
    fn exit_codes() {
        let field = Error::Field(FieldError::new(FieldErrorKind::OutsideDomain, &[0.0; 4]));
        assert_eq!(CommandError::Sweep(field.clone()).exit_code(), 4);
        let stuck = Error::NonConvergence {
            iterations: 10,
            last_update: 1.0,
        };
        assert_eq!(
            CommandError::Run {
                error: HarnessError::StepFailed { step: 3, cause: stuck },
                summary: PathBuf::new(),
            }
            .exit_code(),
            3
        );
        assert_eq!(CommandError::Config(ConfigError { issues: vec![] }).exit_code(), 2);
        assert_eq!(CommandError::Io(io::Error::other("x")).exit_code(), 1);
        assert_eq!(failure_status(&HarnessError::Setup(field)), "domain_error");
    }
}
