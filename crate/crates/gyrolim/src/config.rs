//! Run configuration: a JSON document whose fields may be left out and are
//! then filled from per-problem and per-table defaults.

use std::fmt;
use std::path::PathBuf;

use gyrolim_core::gyrocenter::{quadratic_potential, DipoleField, GyrocenterModel, MagneticField, TokamakField};
use gyrolim_core::{PoissonSystem, SolverConfig, SolverKind};
use serde::{Deserialize, Serialize};

use crate::harness::{steps_for, Method, Reference, StepGrid, TableKind};

/// Built-in test problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ProblemKind {
    /// Dipole field, `M = 10³`, `μ = 10⁻²`, `y0 = (1, 1, 1, 0.01)`.
    Dipole,
    /// Tokamak field, circular orbit in `(R, x₃)`.
    TokamakTransit,
    /// Tokamak field, banana-shaped orbit in `(R, x₃)`.
    TokamakBanana,
    /// Dipole field plus the potential `½ xᵀ diag(1, 1, 10⁴) x`.
    DipoleElectric,
    /// Every parameter given explicitly.
    Custom,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProblemKind::Dipole => "dipole",
            ProblemKind::TokamakTransit => "tokamak_transit",
            ProblemKind::TokamakBanana => "tokamak_banana",
            ProblemKind::DipoleElectric => "dipole_electric",
            ProblemKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// Magnetic field family of a custom problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// Dipole, parameter `moment`.
    Dipole,
    /// Tokamak, parameters `b0`, `r0`, `q`.
    Tokamak,
}

/// Physical parameters; absent entries take the problem defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemParams {
    /// Field family (custom problems only).
    pub field: Option<FieldKind>,
    /// Dipole moment `M`.
    pub moment: Option<f64>,
    /// Field strength on the magnetic axis.
    pub b0: Option<f64>,
    /// Major radius.
    pub r0: Option<f64>,
    /// Safety factor.
    pub q: Option<f64>,
    /// Magnetic moment `μ`.
    pub mu: Option<f64>,
    /// Diagonal of the quadratic potential; `null` for none.
    pub potential_diag: Option<[f64; 3]>,
    /// Initial state `(x₁, x₂, x₃, u)`.
    pub y0: Option<[f64; 4]>,
}

/// `LIM(k1, k2, s)` with optional entries.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodParams {
    /// Polynomial degree.
    pub s: Option<usize>,
    /// Structure-matrix nodes (defaults to `s`).
    pub k1: Option<usize>,
    /// Gradient nodes.
    pub k2: Option<usize>,
}

/// Solver settings with optional entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Iteration kind.
    pub kind: Option<SolverKind>,
    /// Relative increment tolerance.
    pub tol: Option<f64>,
    /// Iteration budget per step.
    pub max_iters: Option<usize>,
    /// Blow-up factor that signals divergence.
    pub divergence_factor: Option<f64>,
    /// Start each step from the previous coefficients.
    pub warm_start: Option<bool>,
}

/// Axis lists of a sweep; absent entries take the table defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    /// Which table.
    pub table: Option<TableKind>,
    /// Degrees (energy, spectral).
    pub s_list: Option<Vec<usize>>,
    /// Gradient node counts (energy).
    pub k_list: Option<Vec<usize>>,
    /// Gradient node count (spectral).
    pub k: Option<usize>,
    /// Reference degree (spectral).
    pub reference_s: Option<usize>,
    /// Methods (convergence, robustness).
    pub methods: Option<Vec<Method>>,
    /// Number of stepsize halvings (convergence).
    pub halvings: Option<u32>,
    /// Reference run (convergence).
    pub reference: Option<Reference>,
    /// Solvers to compare (robustness).
    pub solvers: Option<Vec<SolverKind>>,
    /// Stepsize grid (robustness).
    pub grid: Option<StepGrid>,
}

/// Where results go.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputParams {
    /// Output directory.
    pub dir: Option<PathBuf>,
}

/// The configuration document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Problem preset.
    pub problem: Option<ProblemKind>,
    /// Physical parameters.
    pub params: ProblemParams,
    /// Method.
    pub method: MethodParams,
    /// Solver.
    pub solver: SolverParams,
    /// Stepsize (base stepsize for convergence sweeps).
    pub h: Option<f64>,
    /// End of the integration interval.
    pub t_end: Option<f64>,
    /// Sample every this many steps.
    pub sample_every: Option<usize>,
    /// Sweep axes.
    pub sweep: SweepParams,
    /// Output location.
    pub output: OutputParams,
}

/// One violated field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    /// Dotted field path.
    pub field: String,
    /// What is wrong.
    pub message: String,
}

/// Every problem found in a configuration.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    /// All violations, in field order.
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for i in &self.issues {
            write!(f, "\n  {}: {}", i.field, i.message)?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Issues(Vec<ConfigIssue>);

impl Issues {
    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(ConfigIssue {
            field: field.into(),
            message: message.into(),
        });
    }

    fn finite(&mut self, field: &str, v: f64) {
        if !v.is_finite() {
            self.push(field, "must be finite");
        }
    }

    fn positive(&mut self, field: &str, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.push(field, "must be positive and finite");
        }
    }

    fn finish<T>(self, value: T) -> Result<T, ConfigError> {
        if self.0.is_empty() {
            Ok(value)
        } else {
            Err(ConfigError { issues: self.0 })
        }
    }
}

/// Field and parameters of a resolved problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    /// Preset the values came from.
    pub kind: ProblemKind,
    /// Field family.
    pub field: FieldKind,
    /// Dipole moment.
    pub moment: f64,
    /// Axis field strength.
    pub b0: f64,
    /// Major radius.
    pub r0: f64,
    /// Safety factor.
    pub q: f64,
    /// Magnetic moment.
    pub mu: f64,
    /// Potential diagonal.
    pub potential_diag: Option<[f64; 3]>,
    /// Initial state.
    pub y0: [f64; 4],
}

impl ProblemSpec {
    /// Builds the model, failing on invalid field parameters.
    pub fn model(&self) -> Result<GyrocenterModel, gyrolim_core::Error> {
        let field: MagneticField = match self.field {
            FieldKind::Dipole => DipoleField::new(self.moment)?.into(),
            FieldKind::Tokamak => TokamakField::new(self.b0, self.r0, self.q)?.into(),
        };
        let model = GyrocenterModel::new(field, self.mu)?;
        Ok(match self.potential_diag {
            Some(g) => model.with_potential(quadratic_potential(g)),
            None => model,
        })
    }
}

fn preset(kind: ProblemKind) -> ProblemParams {
    let dipole = ProblemParams {
        field: Some(FieldKind::Dipole),
        moment: Some(1.0e3),
        mu: Some(1.0e-2),
        y0: Some([1.0, 1.0, 1.0, 0.01]),
        ..ProblemParams::default()
    };
    let tokamak = |u0: f64| ProblemParams {
        field: Some(FieldKind::Tokamak),
        b0: Some(1.0),
        r0: Some(1.0),
        q: Some(2.0),
        mu: Some(2.25e-6),
        y0: Some([1.05, 0.0, 0.0, u0]),
        ..ProblemParams::default()
    };
    match kind {
        ProblemKind::Dipole => dipole,
        ProblemKind::TokamakTransit => tokamak(0.0008117),
        ProblemKind::TokamakBanana => tokamak(0.0004306),
        ProblemKind::DipoleElectric => ProblemParams {
            potential_diag: Some([1.0, 1.0, 1.0e4]),
            y0: Some([1.0, 1.0, 0.01, 0.01]),
            ..dipole
        },
        ProblemKind::Custom => ProblemParams::default(),
    }
}

/// Default stepsize, interval, method and solver of a single run.
fn run_defaults(kind: ProblemKind) -> (Option<f64>, Option<f64>, Method, SolverKind) {
    match kind {
        ProblemKind::Dipole => (Some(0.4), Some(1.0e3), Method::lim(1, 7), SolverKind::FixedPoint),
        ProblemKind::TokamakTransit => (Some(8.0e3), Some(1.0e6), Method::lim(12, 20), SolverKind::FixedPoint),
        ProblemKind::TokamakBanana => (Some(1.0e4), Some(1.0e6), Method::lim(12, 20), SolverKind::FixedPoint),
        ProblemKind::DipoleElectric => (Some(10.0), Some(1.0e3), Method::lim(1, 7), SolverKind::Blended),
        ProblemKind::Custom => (None, None, Method::lim(1, 7), SolverKind::FixedPoint),
    }
}

/// Preset solver tolerance: iterate to round-off.
pub const PRESET_TOL: f64 = 1.0e-16;
/// Preset iteration budget.
pub const PRESET_MAX_ITERS: usize = 1000;

/// Everything needed for a single trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    /// Problem.
    pub problem: ProblemSpec,
    /// Method.
    pub method: Method,
    /// Solver.
    pub solver: SolverConfig,
    /// Stepsize.
    pub h: f64,
    /// Interval end.
    pub t_end: f64,
    /// Steps to take.
    pub n_steps: usize,
    /// Sampling cadence.
    pub sample_every: usize,
    /// Output directory.
    pub out_dir: PathBuf,
}

impl ResolvedRun {
    /// The fully populated configuration that reproduces this run.
    pub fn to_config(&self) -> RunConfig {
        RunConfig {
            problem: Some(self.problem.kind),
            params: problem_to_params(&self.problem),
            method: MethodParams {
                s: Some(self.method.s),
                k1: Some(self.method.k1),
                k2: Some(self.method.k2),
            },
            solver: solver_to_params(&self.solver),
            h: Some(self.h),
            t_end: Some(self.t_end),
            sample_every: Some(self.sample_every),
            sweep: SweepParams::default(),
            output: OutputParams {
                dir: Some(self.out_dir.clone()),
            },
        }
    }
}

fn problem_to_params(p: &ProblemSpec) -> ProblemParams {
    let tok = p.field == FieldKind::Tokamak;
    ProblemParams {
        field: Some(p.field),
        moment: (!tok).then_some(p.moment),
        b0: tok.then_some(p.b0),
        r0: tok.then_some(p.r0),
        q: tok.then_some(p.q),
        mu: Some(p.mu),
        potential_diag: p.potential_diag,
        y0: Some(p.y0),
    }
}

fn solver_to_params(s: &SolverConfig) -> SolverParams {
    SolverParams {
        kind: Some(s.kind),
        tol: Some(s.tol),
        max_iters: Some(s.max_iters),
        divergence_factor: Some(s.divergence_factor),
        warm_start: Some(s.warm_start),
    }
}

/// Resolved sweep axes.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepPlan {
    /// Max drift over `(k, s)`.
    Energy {
        /// Degrees.
        s_list: Vec<usize>,
        /// Node counts.
        k_list: Vec<usize>,
    },
    /// Error and rate under halving.
    Convergence {
        /// Methods.
        methods: Vec<Method>,
        /// Halvings.
        halvings: u32,
        /// Reference run.
        reference: Reference,
    },
    /// Large-step runs over `s`.
    Spectral {
        /// Degrees.
        s_list: Vec<usize>,
        /// Node count.
        k: usize,
        /// Reference degree.
        reference_s: usize,
    },
    /// Largest convergent stepsize.
    Robustness {
        /// Methods.
        methods: Vec<Method>,
        /// Solvers.
        solvers: Vec<SolverKind>,
        /// Stepsize grid.
        grid: StepGrid,
    },
}

/// Everything needed for a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSweep {
    /// Table.
    pub table: TableKind,
    /// Problem.
    pub problem: ProblemSpec,
    /// Solver (its kind is overridden per cell for robustness sweeps).
    pub solver: SolverConfig,
    /// Stepsize (unused by robustness sweeps).
    pub h: f64,
    /// Interval end.
    pub t_end: f64,
    /// Axes.
    pub plan: SweepPlan,
    /// Output directory.
    pub out_dir: PathBuf,
}

fn table5() -> Vec<Method> {
    vec![Method::lim(1, 7), Method::lim(2, 8), Method::lim(3, 9), Method::lim(4, 9), Method::lim(5, 9)]
}

impl RunConfig {
    /// Parses a JSON document.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError {
            issues: vec![ConfigIssue {
                field: "<document>".into(),
                message: e.to_string(),
            }],
        })
    }

    /// Pretty JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn resolve_problem(&self, default_kind: ProblemKind, issues: &mut Issues) -> ProblemSpec {
        let kind = self.problem.unwrap_or(default_kind);
        let base = preset(kind);
        let p = &self.params;
        let pick = |a: Option<f64>, b: Option<f64>| a.or(b);
        let field = p.field.or(base.field);
        if field.is_none() {
            issues.push("params.field", "required for a custom problem (dipole or tokamak)");
        }
        let field = field.unwrap_or(FieldKind::Dipole);
        if kind != ProblemKind::Custom && p.field.is_some() && p.field != base.field {
            issues.push("params.field", format!("problem {kind} fixes the field family"));
        }
        let mut need = |name: &str, v: Option<f64>| -> f64 {
            match v {
                Some(x) => {
                    issues.finite(&format!("params.{name}"), x);
                    x
                }
                None => {
                    issues.push(format!("params.{name}"), "required for a custom problem");
                    f64::NAN
                }
            }
        };
        let (moment, b0, r0, q) = match field {
            FieldKind::Dipole => (need("moment", pick(p.moment, base.moment)), 0.0, 0.0, 0.0),
            FieldKind::Tokamak => (
                0.0,
                need("b0", pick(p.b0, base.b0)),
                need("r0", pick(p.r0, base.r0)),
                need("q", pick(p.q, base.q)),
            ),
        };
        let mu = need("mu", pick(p.mu, base.mu));
        let potential_diag = p.potential_diag.or(base.potential_diag);
        if let Some(g) = potential_diag {
            for (i, v) in g.iter().enumerate() {
                issues.finite(&format!("params.potential_diag[{i}]"), *v);
            }
        }
        let y0 = match p.y0.or(base.y0) {
            Some(y) => {
                for (i, v) in y.iter().enumerate() {
                    issues.finite(&format!("params.y0[{i}]"), *v);
                }
                y
            }
            None => {
                issues.push("params.y0", "required for a custom problem");
                [f64::NAN; 4]
            }
        };
        let spec = ProblemSpec {
            kind,
            field,
            moment,
            b0,
            r0,
            q,
            mu,
            potential_diag,
            y0,
        };
        if issues.0.is_empty() {
            match spec.model() {
                Err(e) => issues.push("params", e.to_string()),
                Ok(m) => {
                    if let Err(e) = m.hamiltonian(&spec.y0) {
                        issues.push("params.y0", format!("outside the model domain: {e}"));
                    }
                }
            }
        }
        spec
    }

    fn resolve_solver(&self, default_kind: SolverKind, issues: &mut Issues) -> SolverConfig {
        let s = &self.solver;
        let cfg = SolverConfig {
            kind: s.kind.unwrap_or(default_kind),
            tol: s.tol.unwrap_or(PRESET_TOL),
            max_iters: s.max_iters.unwrap_or(PRESET_MAX_ITERS),
            divergence_factor: s.divergence_factor.unwrap_or(SolverConfig::default().divergence_factor),
            warm_start: s.warm_start.unwrap_or(false),
        };
        if !(cfg.tol > 0.0 && cfg.tol.is_finite()) {
            issues.push("solver.tol", "must be positive and finite");
        }
        if cfg.max_iters == 0 {
            issues.push("solver.max_iters", "must be at least 1");
        }
        if !(cfg.divergence_factor > 1.0) {
            issues.push("solver.divergence_factor", "must exceed 1");
        }
        cfg
    }

    fn resolve_method(&self, default: Method, issues: &mut Issues) -> Method {
        let s = self.method.s.unwrap_or(default.s);
        let k1 = self.method.k1.unwrap_or(if self.method.s.is_some() { s } else { default.k1 });
        let k2 = self.method.k2.unwrap_or(default.k2.max(s));
        if s == 0 {
            issues.push("method.s", "must be at least 1");
        }
        if k1 < s {
            issues.push("method.k1", format!("must be at least s = {s}"));
        }
        if k2 < s {
            issues.push("method.k2", format!("must be at least s = {s}"));
        }
        Method { s, k1, k2 }
    }

    fn out_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Validates and fills defaults for a single run.
    pub fn resolve_run(&self) -> Result<ResolvedRun, ConfigError> {
        let mut issues = Issues::default();
        let kind = self.problem.unwrap_or(ProblemKind::Dipole);
        let (dh, dt, dm, ds) = run_defaults(kind);
        let problem = self.resolve_problem(kind, &mut issues);
        let method = self.resolve_method(dm, &mut issues);
        let solver = self.resolve_solver(ds, &mut issues);
        let h = match self.h.or(dh) {
            Some(h) => {
                issues.positive("h", h);
                h
            }
            None => {
                issues.push("h", "required for a custom problem");
                f64::NAN
            }
        };
        let t_end = match self.t_end.or(dt) {
            Some(t) => {
                if !(t >= 0.0 && t.is_finite()) {
                    issues.push("t_end", "must be non-negative and finite");
                }
                t
            }
            None => {
                issues.push("t_end", "required for a custom problem");
                f64::NAN
            }
        };
        let n_steps = if issues.0.is_empty() { steps_for(t_end, h) } else { 0 };
        let sample_every = match self.sample_every {
            Some(0) => {
                issues.push("sample_every", "must be at least 1");
                1
            }
            Some(k) => k,
            None => default_sample_every(n_steps),
        };
        issues.finish(ResolvedRun {
            problem,
            method,
            solver,
            h,
            t_end,
            n_steps,
            sample_every,
            out_dir: self.out_dir(),
        })
    }

    /// Validates and fills defaults for a sweep; `table` overrides the file's choice.
    pub fn resolve_sweep(&self, table: Option<TableKind>) -> Result<ResolvedSweep, ConfigError> {
        let Some(table) = table.or(self.sweep.table) else {
            return Err(ConfigError {
                issues: vec![ConfigIssue {
                    field: "sweep.table".into(),
                    message: "no table selected".into(),
                }],
            });
        };
        let mut issues = Issues::default();
        let default_problem = match table {
            TableKind::Energy | TableKind::Convergence => ProblemKind::Dipole,
            TableKind::Spectral => ProblemKind::TokamakTransit,
            TableKind::Robustness => ProblemKind::DipoleElectric,
        };
        let kind = self.problem.unwrap_or(default_problem);
        let problem = self.resolve_problem(kind, &mut issues);
        let solver = self.resolve_solver(SolverKind::FixedPoint, &mut issues);
        let (dh, dt) = match table {
            TableKind::Energy => (0.4, 1.0e3),
            TableKind::Convergence => (0.4, 40.0),
            TableKind::Spectral => (if kind == ProblemKind::TokamakBanana { 1.0e4 } else { 8.0e3 }, 1.0e6),
            TableKind::Robustness => (f64::NAN, 100.0),
        };
        let h = self.h.unwrap_or(dh);
        if table != TableKind::Robustness {
            if table == TableKind::Energy {
                if !(h >= 0.0 && h.is_finite()) {
                    issues.push("h", "must be non-negative and finite");
                }
            } else {
                issues.positive("h", h);
            }
        }
        let t_end = self.t_end.unwrap_or(dt);
        issues.positive("t_end", t_end);
        let sw = &self.sweep;
        let list_ok = |issues: &mut Issues, name: &str, v: &[usize]| {
            if v.is_empty() {
                issues.push(format!("sweep.{name}"), "axis list must not be empty");
            }
            if v.contains(&0) {
                issues.push(format!("sweep.{name}"), "entries must be at least 1");
            }
        };
        let methods_ok = |issues: &mut Issues, v: &[Method]| {
            if v.is_empty() {
                issues.push("sweep.methods", "axis list must not be empty");
            }
            for (i, m) in v.iter().enumerate() {
                if m.s == 0 || m.k1 < m.s || m.k2 < m.s {
                    issues.push(format!("sweep.methods[{i}]"), "need s ≥ 1, k1 ≥ s and k2 ≥ s");
                }
            }
        };
        let plan = match table {
            TableKind::Energy => {
                let s_list = sw.s_list.clone().unwrap_or_else(|| (1..=5).collect());
                let k_list = sw.k_list.clone().unwrap_or_else(|| (1..=10).collect());
                list_ok(&mut issues, "s_list", &s_list);
                list_ok(&mut issues, "k_list", &k_list);
                SweepPlan::Energy { s_list, k_list }
            }
            TableKind::Convergence => {
                let methods = sw.methods.clone().unwrap_or_else(table5);
                methods_ok(&mut issues, &methods);
                let halvings = sw.halvings.unwrap_or(4);
                if halvings > 20 {
                    issues.push("sweep.halvings", "at most 20");
                }
                let reference = sw.reference.unwrap_or(Reference {
                    method: Method::lim(5, 9),
                    h: h / f64::from(1u32 << (halvings.min(20) + 2)),
                });
                methods_ok(&mut issues, &[reference.method]);
                issues.positive("sweep.reference.h", reference.h);
                SweepPlan::Convergence {
                    methods,
                    halvings,
                    reference,
                }
            }
            TableKind::Spectral => {
                let s_list = sw.s_list.clone().unwrap_or_else(|| (1..=16).collect());
                list_ok(&mut issues, "s_list", &s_list);
                let k = sw.k.unwrap_or(20);
                let reference_s = sw.reference_s.unwrap_or(18);
                if s_list.iter().any(|&s| s > k) || reference_s > k || reference_s == 0 {
                    issues.push("sweep.k", "every degree, including reference_s, must be between 1 and k");
                }
                SweepPlan::Spectral { s_list, k, reference_s }
            }
            TableKind::Robustness => {
                let methods = sw.methods.clone().unwrap_or_else(table5);
                methods_ok(&mut issues, &methods);
                let solvers = sw.solvers.clone().unwrap_or_else(|| vec![SolverKind::FixedPoint, SolverKind::Blended]);
                if solvers.is_empty() {
                    issues.push("sweep.solvers", "axis list must not be empty");
                }
                let grid = sw.grid.unwrap_or(StepGrid {
                    h_min: 40.0 / 8192.0,
                    ratio: 2.0,
                    count: 16,
                });
                if !(grid.h_min > 0.0 && grid.ratio > 1.0 && grid.count > 0 && grid.h_min.is_finite() && grid.ratio.is_finite()) {
                    issues.push("sweep.grid", "need h_min > 0, ratio > 1 and count ≥ 1");
                }
                SweepPlan::Robustness { methods, solvers, grid }
            }
        };
        issues.finish(ResolvedSweep {
            table,
            problem,
            solver,
            h,
            t_end,
            plan,
            out_dir: self.out_dir(),
        })
    }
}

/// Every step for short runs, every 100th above 10⁵ steps.
pub fn default_sample_every(n_steps: usize) -> usize {
    if n_steps > 100_000 {
        100
    } else {
        1
    }
}
