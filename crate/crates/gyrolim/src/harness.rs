//! Multi-step integration and the table generators.

use std::fmt;
use std::time::Instant;

use gyrolim_core::{build_tableau, solvers, Error, MethodTableau, PoissonSystem, SolverConfig, SolverKind, StageCoefficients};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Failure of a multi-step run.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    /// Step `step` (zero-based) could not be completed.
    #[error("step {step} failed: {cause}")]
    StepFailed {
        /// Index of the failing step.
        step: usize,
        /// Underlying error.
        cause: Error,
    },
    /// Bad run parameters or a failure before the first step.
    #[error(transparent)]
    Setup(#[from] Error),
}

impl HarnessError {
    /// The core error behind this failure.
    pub fn cause(&self) -> &Error {
        match self {
            HarnessError::StepFailed { cause, .. } => cause,
            HarnessError::Setup(e) => e,
        }
    }
}

/// Iteration counts of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    /// Iterations over the whole run.
    pub total_iterations: u64,
    /// Steps taken.
    pub steps: usize,
    /// Iterations spent since the previous sample, one entry per sample (zero for the first).
    pub per_sample: Vec<u64>,
    /// Largest iteration count of a single step.
    pub max_per_step: usize,
}

impl SolverStats {
    /// Mean iterations per step, zero for an empty run.
    pub fn mean_per_step(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.total_iterations as f64 / self.steps as f64
        }
    }
}

/// Sampled trajectory of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    /// Sample times, strictly increasing, starting at 0.
    pub times: Vec<f64>,
    /// States at `times`.
    pub states: Vec<Vec<f64>>,
    /// `H(y)` at `times`.
    pub energy: Vec<f64>,
    /// `H(y) - H(y0)` at `times`.
    pub energy_drift: Vec<f64>,
    /// `max |H(y_n) - H(y0)|` over every step, sampled or not.
    pub max_abs_drift: f64,
    /// Iteration statistics.
    pub stats: SolverStats,
    /// Seconds spent stepping.
    pub wall_time: f64,
}

impl TrajectoryRecord {
    /// Last recorded state.
    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Applies `n_steps` steps of size `h` and samples every `sample_every`-th
/// step, always including the initial and final states.
pub fn integrate<P: PoissonSystem + ?Sized>(
    sys: &P,
    y0: &[f64],
    h: f64,
    n_steps: usize,
    tableau: &MethodTableau,
    cfg: &SolverConfig,
    sample_every: usize,
) -> Result<TrajectoryRecord, HarnessError> {
    if sample_every == 0 {
        return Err(Error::InvalidParameter {
            name: "sample_every",
            reason: "must be at least 1".into(),
        }
        .into());
    }
    if !h.is_finite() {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: "stepsize must be finite".into(),
        }
        .into());
    }
    cfg.validate()?;
    let h0 = sys.hamiltonian(y0).map_err(Error::from)?;
    let mut rec = TrajectoryRecord {
        times: vec![0.0],
        states: vec![y0.to_vec()],
        energy: vec![h0],
        energy_drift: vec![0.0],
        max_abs_drift: 0.0,
        stats: SolverStats {
            per_sample: vec![0],
            ..SolverStats::default()
        },
        wall_time: 0.0,
    };
    let start = Instant::now();
    let mut y = y0.to_vec();
    let mut guess: Option<StageCoefficients> = None;
    let mut since_sample = 0u64;
    for n in 0..n_steps {
        let res = solvers::step(tableau, sys, &y, h, cfg, guess.as_ref())
            .map_err(|cause| HarnessError::StepFailed { step: n, cause })?;
        y = res.y1;
        if cfg.warm_start {
            guess = Some(res.stages);
        }
        let it = res.iterations as u64;
        rec.stats.total_iterations += it;
        rec.stats.steps += 1;
        rec.stats.max_per_step = rec.stats.max_per_step.max(res.iterations);
        since_sample += it;
        let energy = sys
            .hamiltonian(&y)
            .map_err(|e| HarnessError::StepFailed { step: n, cause: e.into() })?;
        let drift = energy - h0;
        rec.max_abs_drift = rec.max_abs_drift.max(drift.abs());
        if (n + 1) % sample_every == 0 || n + 1 == n_steps {
            rec.times.push((n + 1) as f64 * h);
            rec.states.push(y.clone());
            rec.energy.push(energy);
            rec.energy_drift.push(drift);
            rec.stats.per_sample.push(since_sample);
            since_sample = 0;
        }
    }
    rec.wall_time = start.elapsed().as_secs_f64();
    Ok(rec)
}

/// Number of steps of size `h` covering `[0, t_end]`: `t_end / h` when that is
/// an integer up to round-off, otherwise rounded up.
pub fn steps_for(t_end: f64, h: f64) -> usize {
    if t_end <= 0.0 || h <= 0.0 {
        return 0;
    }
    let q = t_end / h;
    let r = q.round();
    if (q - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        q.ceil() as usize
    }
}

/// A `LIM(k1, k2, s)` method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Method {
    /// Polynomial degree.
    pub s: usize,
    /// Nodes for the structure matrix.
    pub k1: usize,
    /// Nodes for the gradient.
    pub k2: usize,
}

impl Method {
    /// `LIM(s, k, s)`.
    pub fn lim(s: usize, k: usize) -> Self {
        Self { s, k1: s, k2: k }
    }

    /// Builds the tableau.
    pub fn tableau(&self) -> Result<MethodTableau, Error> {
        build_tableau(self.s, self.k1, self.k2)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LIM({},{},{})", self.k1, self.k2, self.s)
    }
}

/// Outcome category of a sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    /// The run completed.
    Ok,
    /// The cell lies outside the method's domain (`k < s`).
    NotApplicable,
    /// The nonlinear iteration diverged or ran out of iterations.
    NonConvergence,
    /// The trajectory left the model's domain.
    DomainError,
    /// Other failure.
    Failed,
    /// No grid stepsize converged.
    BelowGridMinimum,
}

impl CellStatus {
    /// Status for a failed run.
    pub fn from_error(e: &HarnessError) -> Self {
        let cause = e.cause();
        if cause.is_solver_failure() {
            CellStatus::NonConvergence
        } else if cause.field_error().is_some() {
            CellStatus::DomainError
        } else {
            CellStatus::Failed
        }
    }

    /// Short label used in CSV output.
    pub fn label(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::NotApplicable => "n/a",
            CellStatus::NonConvergence => "***",
            CellStatus::DomainError => "domain",
            CellStatus::Failed => "failed",
            CellStatus::BelowGridMinimum => "below grid minimum",
        }
    }
}

/// One configuration of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    /// Method of this cell.
    pub method: Method,
    /// Solver of this cell.
    pub solver: SolverKind,
    /// Stepsize (the largest convergent one for robustness cells).
    pub h: Option<f64>,
    /// Outcome.
    pub status: CellStatus,
    /// `max |H(y_n) - H(y0)|`.
    pub max_energy_drift: Option<f64>,
    /// Max state error against the reference.
    pub final_error: Option<f64>,
    /// `log2(err(2h) / err(h))` against the previous row.
    pub empirical_rate: Option<f64>,
    /// Total nonlinear iterations.
    pub iterations: u64,
    /// Mean iterations per step.
    pub iterations_per_step: f64,
    /// Seconds.
    pub wall_time: f64,
    /// Failure description, if any.
    pub detail: Option<String>,
}

impl SweepCell {
    fn new(method: Method, solver: SolverKind, h: Option<f64>) -> Self {
        Self {
            method,
            solver,
            h,
            status: CellStatus::Ok,
            max_energy_drift: None,
            final_error: None,
            empirical_rate: None,
            iterations: 0,
            iterations_per_step: 0.0,
            wall_time: 0.0,
            detail: None,
        }
    }

    fn absorb(&mut self, rec: &TrajectoryRecord) {
        self.max_energy_drift = Some(rec.max_abs_drift);
        self.iterations = rec.stats.total_iterations;
        self.iterations_per_step = rec.stats.mean_per_step();
        self.wall_time = rec.wall_time;
    }

    fn fail(&mut self, e: &HarnessError) {
        self.status = CellStatus::from_error(e);
        self.detail = Some(e.to_string());
    }
}

/// Which experiment produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    /// Max Hamiltonian drift per `(s, k)`.
    Energy,
    /// Error and rate per method and stepsize.
    Convergence,
    /// Large-step runs for increasing `s`.
    Spectral,
    /// Largest convergent stepsize per method and solver.
    Robustness,
}

/// Cells of one experiment in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// Experiment.
    pub table: TableKind,
    /// Human-readable description of the axes.
    pub axes: Vec<String>,
    /// Cells in axis order.
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    /// First cell matching `pred`.
    pub fn find(&self, pred: impl Fn(&SweepCell) -> bool) -> Option<&SweepCell> {
        self.cells.iter().find(|c| pred(c))
    }
}

fn fmt_list<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn nonempty<T>(v: &[T], name: &'static str) -> Result<(), Error> {
    if v.is_empty() {
        Err(Error::InvalidParameter {
            name,
            reason: "axis list must not be empty".into(),
        })
    } else {
        Ok(())
    }
}

/// Max Hamiltonian drift of `LIM(s, k, s)` over `[0, t_end]` for every
/// `k ∈ k_list`, `s ∈ s_list`, ordered by `k` then `s`.
pub fn hamiltonian_error_table<P: PoissonSystem + Sync + ?Sized>(
    sys: &P,
    y0: &[f64],
    h: f64,
    t_end: f64,
    s_list: &[usize],
    k_list: &[usize],
    cfg: &SolverConfig,
) -> Result<SweepReport, Error> {
    nonempty(s_list, "s_list")?;
    nonempty(k_list, "k_list")?;
    cfg.validate()?;
    let n_steps = if h == 0.0 { 1 } else { steps_for(t_end, h.abs()) };
    let grid: Vec<(usize, usize)> = k_list.iter().flat_map(|&k| s_list.iter().map(move |&s| (k, s))).collect();
    let cells = grid
        .par_iter()
        .map(|&(k, s)| {
            let method = Method::lim(s, k);
            let mut cell = SweepCell::new(method, cfg.kind, Some(h));
            if k < s {
                cell.status = CellStatus::NotApplicable;
                return cell;
            }
            let run = method
                .tableau()
                .map_err(HarnessError::from)
                .and_then(|tab| integrate(sys, y0, h, n_steps, &tab, cfg, n_steps.max(1)));
            match run {
                Ok(rec) => cell.absorb(&rec),
                Err(e) => cell.fail(&e),
            }
            cell
        })
        .collect();
    Ok(SweepReport {
        table: TableKind::Energy,
        axes: vec![format!("k={}", fmt_list(k_list)), format!("s={}", fmt_list(s_list))],
        cells,
    })
}

/// Max over common sample times of the ∞-norm state difference.
pub fn max_state_error(a: &TrajectoryRecord, b: &TrajectoryRecord) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| x.iter().zip(y).fold(0.0_f64, |m, (p, q)| m.max((p - q).abs())))
        .fold(0.0, f64::max)
}

/// Reference run for [`convergence_table`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    /// Method of the reference run.
    pub method: Method,
    /// Its stepsize; must divide the base stepsize.
    pub h: f64,
}

/// Errors and empirical rates for every method at `base_h / 2^i`,
/// `i = 0..=halvings`, measured at the multiples of `base_h`.
#[allow(clippy::too_many_arguments)]
pub fn convergence_table<P: PoissonSystem + Sync + ?Sized>(
    sys: &P,
    y0: &[f64],
    base_h: f64,
    halvings: u32,
    t_end: f64,
    methods: &[Method],
    reference: Reference,
    cfg: &SolverConfig,
) -> Result<SweepReport, Error> {
    nonempty(methods, "methods")?;
    cfg.validate()?;
    if !(base_h > 0.0) {
        return Err(Error::InvalidParameter {
            name: "base_h",
            reason: "must be positive".into(),
        });
    }
    let coarse_steps = steps_for(t_end, base_h);
    let ratio = base_h / reference.h;
    let ref_every = ratio.round() as usize;
    if ref_every == 0 || (ratio - ref_every as f64).abs() > 1e-9 * ratio {
        return Err(Error::InvalidParameter {
            name: "reference.h",
            reason: "must divide the base stepsize".into(),
        });
    }
    let ref_tab = reference.method.tableau()?;
    let ref_rec = integrate(sys, y0, reference.h, coarse_steps * ref_every, &ref_tab, cfg, ref_every).map_err(|e| e.cause().clone())?;

    let grid: Vec<(usize, u32)> = (0..methods.len()).flat_map(|m| (0..=halvings).map(move |i| (m, i))).collect();
    let mut cells: Vec<SweepCell> = grid
        .par_iter()
        .map(|&(m, i)| {
            let method = methods[m];
            let every = 1usize << i;
            let h = base_h / every as f64;
            let mut cell = SweepCell::new(method, cfg.kind, Some(h));
            let run = method
                .tableau()
                .map_err(HarnessError::from)
                .and_then(|tab| integrate(sys, y0, h, coarse_steps * every, &tab, cfg, every));
            match run {
                Ok(rec) => {
                    cell.absorb(&rec);
                    cell.final_error = Some(max_state_error(&rec, &ref_rec));
                }
                Err(e) => cell.fail(&e),
            }
            cell
        })
        .collect();
    let rows = halvings as usize + 1;
    for m in 0..methods.len() {
        for i in 1..rows {
            let (prev, cur) = (cells[m * rows + i - 1].final_error, cells[m * rows + i].final_error);
            if let (Some(a), Some(b)) = (prev, cur) {
                if a > 0.0 && b > 0.0 {
                    cells[m * rows + i].empirical_rate = Some((a / b).log2());
                }
            }
        }
    }
    Ok(SweepReport {
        table: TableKind::Convergence,
        axes: vec![
            format!("method={}", fmt_list(methods)),
            format!("h={base_h}/2^i, i=0..={halvings}"),
            format!("reference={} h={}", reference.method, reference.h),
        ],
        cells,
    })
}

/// `LIM(s, k, s)` for each `s ∈ s_list` at one large stepsize, with errors
/// against `LIM(reference_s, k, reference_s)` at the same stepsize.
#[allow(clippy::too_many_arguments)]
pub fn spectral_run<P: PoissonSystem + Sync + ?Sized>(
    sys: &P,
    y0: &[f64],
    h: f64,
    t_end: f64,
    s_list: &[usize],
    k: usize,
    reference_s: usize,
    cfg: &SolverConfig,
) -> Result<SweepReport, Error> {
    nonempty(s_list, "s_list")?;
    cfg.validate()?;
    let n_steps = steps_for(t_end, h);
    let reference = Method::lim(reference_s, k);
    let mut jobs: Vec<Method> = s_list.iter().map(|&s| Method::lim(s, k)).collect();
    jobs.push(reference);
    let runs: Vec<Result<TrajectoryRecord, HarnessError>> = jobs
        .par_iter()
        .map(|method| {
            let tab = method.tableau()?;
            integrate(sys, y0, h, n_steps, &tab, cfg, 1)
        })
        .collect();
    let (ref_run, runs) = runs.split_last().expect("reference run present");
    let ref_rec = ref_run.as_ref().map_err(|e| e.cause().clone())?;
    let cells = jobs
        .iter()
        .zip(runs)
        .map(|(method, run)| {
            let mut cell = SweepCell::new(*method, cfg.kind, Some(h));
            match run {
                Ok(rec) => {
                    cell.absorb(rec);
                    cell.final_error = Some(max_state_error(rec, ref_rec));
                }
                Err(e) => cell.fail(e),
            }
            cell
        })
        .collect();
    Ok(SweepReport {
        table: TableKind::Spectral,
        axes: vec![format!("s={}", fmt_list(s_list)), format!("k={k} h={h} reference s={reference_s}")],
        cells,
    })
}

/// Stepsizes `h_min · ratio^j`, `j = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepGrid {
    /// Smallest probed stepsize.
    pub h_min: f64,
    /// Growth factor between probes.
    pub ratio: f64,
    /// Number of grid points.
    pub count: usize,
}

impl StepGrid {
    /// Grid point `j`.
    pub fn at(&self, j: usize) -> f64 {
        self.h_min * self.ratio.powi(j as i32)
    }

    fn validate(&self) -> Result<(), Error> {
        if !(self.h_min > 0.0) || !(self.ratio > 1.0) || self.count == 0 {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: "need h_min > 0, ratio > 1 and at least one point".into(),
            });
        }
        Ok(())
    }
}

/// Largest grid stepsize at which the whole run over the smallest multiple
/// of `h` covering `[0, t_end]` converges, found by bisection over the grid
/// indices, for every method and solver.
pub fn solver_robustness_table<P: PoissonSystem + Sync + ?Sized>(
    sys: &P,
    y0: &[f64],
    t_end: f64,
    methods: &[Method],
    solver_kinds: &[SolverKind],
    grid: StepGrid,
    cfg: &SolverConfig,
) -> Result<SweepReport, Error> {
    nonempty(methods, "methods")?;
    nonempty(solver_kinds, "solvers")?;
    grid.validate()?;
    cfg.validate()?;
    let jobs: Vec<(Method, SolverKind)> = methods.iter().flat_map(|&m| solver_kinds.iter().map(move |&k| (m, k))).collect();
    let cells = jobs
        .par_iter()
        .map(|&(method, kind)| {
            let cfg = SolverConfig { kind, ..*cfg };
            let mut cell = SweepCell::new(method, kind, None);
            let tab = match method.tableau() {
                Ok(t) => t,
                Err(e) => {
                    cell.fail(&e.into());
                    return cell;
                }
            };
            let probe = |j: usize| {
                let h = grid.at(j);
                integrate(sys, y0, h, steps_for(t_end, h).max(1), &tab, &cfg, usize::MAX)
            };
            // invariant: lo converges (or is None), hi fails (or is past the grid)
            let mut lo: Option<(usize, TrajectoryRecord)> = None;
            let mut hi = grid.count;
            let mut first_failure: Option<HarnessError> = None;
            let mut a = 0usize;
            while a < hi {
                let mid = a + (hi - a) / 2;
                match probe(mid) {
                    Ok(rec) => {
                        lo = Some((mid, rec));
                        a = mid + 1;
                    }
                    Err(e) => {
                        first_failure.get_or_insert(e);
                        hi = mid;
                    }
                }
            }
            match lo {
                Some((j, rec)) => {
                    cell.h = Some(grid.at(j));
                    cell.absorb(&rec);
                }
                None => {
                    cell.status = CellStatus::BelowGridMinimum;
                    cell.detail = first_failure.map(|e| e.to_string());
                }
            }
            cell
        })
        .collect();
    Ok(SweepReport {
        table: TableKind::Robustness,
        axes: vec![
            format!("method={}", fmt_list(methods)),
            format!("solver={}", solver_kinds.iter().map(|k| format!("{k:?}")).collect::<Vec<_>>().join(",")),
            format!("h={}*{}^j, j<{}", grid.h_min, grid.ratio, grid.count),
        ],
        cells,
    })
}
