//! Nonlinear solvers for the stage equation `G(Γ) = 0`.
//!
//! All three start from `Γ⁰ = 0` (or a caller-supplied guess) and stop once
//! `‖Γ^{ℓ+1} - Γ^ℓ‖_∞ ≤ tol (1 + ‖Γ^{ℓ+1}‖_∞)`, or once the increments stop
//! decreasing below [`ROUNDOFF_FLOOR`]` ‖Γ^{ℓ+1}‖_∞`. A `tol` under that
//! floor therefore iterates to machine precision.
//!
//! * fixed point: `Γ^{ℓ+1} = Γ^ℓ - G(Γ^ℓ)`;
//! * simplified Newton: `[I_s ⊗ I - h X_s ⊗ J] Δ = -G(Γ^ℓ)` with `J = f'(y0)`
//!   frozen and the `sn × sn` matrix factored once per step;
//! * blended: only `I - h ρ_s J` (`n × n`) is factored. With
//!   `Θ = (I - hρ_s J)⁻¹`, `η = -G(Γ^ℓ)` and `η₁ = (ρ_s X_s⁻¹ ⊗ I) η`,
//!   `Γ^{ℓ+1} = Γ^ℓ + (I_s ⊗ Θ)[η₁ + (I_s ⊗ Θ)(η - η₁)]`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::legendre::MethodTableau;
use crate::lim::{advance, fixed_point_map_into, residual_into, StageCoefficients, StageWorkspace, StepResult};
use crate::poisson::{jacobian_f, PoissonSystem};

/// Which iteration solves the stage equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SolverKind {
    /// Plain fixed-point (Picard) iteration.
    FixedPoint,
    /// Simplified Newton with a frozen Jacobian.
    SimplifiedNewton,
    /// Newton-splitting blended iteration.
    Blended,
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Iteration kind.
    pub kind: SolverKind,
    /// Relative increment tolerance.
    pub tol: f64,
    /// Iteration budget per step.
    pub max_iters: usize,
    /// An increment larger than this multiple of the first one is a divergence.
    pub divergence_factor: f64,
    /// Start each step from the previous step's coefficients instead of zero.
    pub warm_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kind: SolverKind::FixedPoint,
            tol: 1e-12,
            max_iters: 100,
            divergence_factor: 1e4,
            warm_start: false,
        }
    }
}

impl SolverConfig {
    /// Default settings for `kind`.
    pub fn new(kind: SolverKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    /// Checks `tol > 0`, `max_iters ≥ 1` and `divergence_factor > 1`.
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::param("tol", "tolerance must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "at least one iteration is required"));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::param("divergence_factor", "must exceed 1"));
        }
        Ok(())
    }
}

/// A converged solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    /// Solution of `G(Γ) = 0`.
    pub gamma: StageCoefficients,
    /// Number of increments computed.
    pub iterations: usize,
    /// `‖Δ^ℓ‖_∞` per iteration.
    pub history: Vec<f64>,
}

/// Relative increment below which a non-decreasing increment counts as converged.
pub const ROUNDOFF_FLOOR: f64 = 64.0 * f64::EPSILON;

/// Tracks increments and decides when to stop.
struct Monitor {
    tol: f64,
    max_iters: usize,
    divergence_factor: f64,
    history: Vec<f64>,
}

enum Verdict {
    Continue,
    Converged,
}

impl Monitor {
    fn new(cfg: &SolverConfig) -> Self {
        Self {
            tol: cfg.tol,
            max_iters: cfg.max_iters,
            divergence_factor: cfg.divergence_factor,
            history: Vec::new(),
        }
    }

    fn record(&mut self, update: f64, gamma_norm: f64) -> Result<Verdict> {
        self.history.push(update);
        let it = self.history.len();
        if !update.is_finite() || !gamma_norm.is_finite() {
            return Err(Error::Divergence { iteration: it, update });
        }
        let scale = 1.0 + gamma_norm;
        if update <= self.tol * scale {
            return Ok(Verdict::Converged);
        }
        // increments stalled at round-off level; fixed-point increments may
        // alternate, so compare with the one two iterations back
        if update == 0.0 || (it > 2 && update <= ROUNDOFF_FLOOR * gamma_norm && update >= self.history[it - 3]) {
            return Ok(Verdict::Converged);
        }
        if update > self.divergence_factor * self.history[0] {
            return Err(Error::Divergence { iteration: it, update });
        }
        if it >= self.max_iters {
            return Err(Error::NonConvergence {
                iterations: it,
                last_update: update,
            });
        }
        Ok(Verdict::Continue)
    }

    fn finish(self, gamma: StageCoefficients) -> SolveOutcome {
        SolveOutcome {
            iterations: self.history.len(),
            history: self.history,
            gamma,
        }
    }
}

fn check_inputs<P: PoissonSystem + ?Sized>(
    tableau: &MethodTableau,
    sys: &P,
    y0: &[f64],
    cfg: &SolverConfig,
    guess: Option<&StageCoefficients>,
) -> Result<StageCoefficients> {
    cfg.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::param("y0", "state dimension does not match the system"));
    }
    match guess {
        Some(g) if g.s() == tableau.s() && g.n() == n => Ok(g.clone()),
        Some(_) => Err(Error::param("guess", "initial guess has the wrong shape")),
        None => Ok(StageCoefficients::zeros(tableau.s(), n)),
    }
}

/// Fixed-point iteration `Γ^{ℓ+1} = ρ̂(Γ^ℓ) γ̂(Γ^ℓ)`.
pub fn solve_fixed_point<P: PoissonSystem + ?Sized>(
    tableau: &MethodTableau,
    sys: &P,
    y0: &[f64],
    h: f64,
    cfg: &SolverConfig,
    guess: Option<&StageCoefficients>,
) -> Result<SolveOutcome> {
    let mut gamma = check_inputs(tableau, sys, y0, cfg, guess)?;
    let mut ws = StageWorkspace::new(tableau, sys.dim());
    let mut next = gamma.clone();
    let mut mon = Monitor::new(cfg);
    loop {
        fixed_point_map_into(tableau, sys, y0, h, &gamma, &mut ws, &mut next)?;
        let update = gamma
            .as_slice()
            .iter()
            .zip(next.as_slice())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        core::mem::swap(&mut gamma, &mut next);
        if let Verdict::Converged = mon.record(update, gamma.norm_inf())? {
            return Ok(mon.finish(gamma));
        }
    }
}

/// Simplified Newton iteration with `J = f'(y0)` frozen for the step.
pub fn solve_simplified_newton<P: PoissonSystem + ?Sized>(
    tableau: &MethodTableau,
    sys: &P,
    y0: &[f64],
    h: f64,
    cfg: &SolverConfig,
    guess: Option<&StageCoefficients>,
) -> Result<SolveOutcome> {
    let mut gamma = check_inputs(tableau, sys, y0, cfg, guess)?;
    let n = sys.dim();
    let s = tableau.s();
    let jac = jacobian_f(sys, y0)?;
    let x = tableau.x_s();
    let mut m = DMatrix::identity(s * n, s * n);
    for bi in 0..s {
        for bj in 0..s {
            let c = h * x[(bi, bj)];
            if c == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    m[(bi * n + i, bj * n + j)] -= c * jac[(i, j)];
                }
            }
        }
    }
    let lu = m.lu();
    if !lu.is_invertible() {
        return Err(Error::SingularMatrix);
    }
    let mut ws = StageWorkspace::new(tableau, n);
    let mut g = StageCoefficients::zeros(s, n);
    let mut mon = Monitor::new(cfg);
    loop {
        residual_into(tableau, sys, y0, h, &gamma, &mut ws, &mut g)?;
        let rhs = DVector::from_iterator(s * n, g.as_slice().iter().map(|v| -v));
        let delta = lu.solve(&rhs).ok_or(Error::SingularMatrix)?;
        for (a, d) in gamma.as_mut_slice().iter_mut().zip(delta.iter()) {
            *a += d;
        }
        let update = crate::norm_inf(delta.as_slice());
        if let Verdict::Converged = mon.record(update, gamma.norm_inf())? {
            return Ok(mon.finish(gamma));
        }
    }
}

/// Blended iteration; factors only the `n × n` matrix `I - h ρ_s f'(y0)`.
pub fn solve_blended<P: PoissonSystem + ?Sized>(
    tableau: &MethodTableau,
    sys: &P,
    y0: &[f64],
    h: f64,
    cfg: &SolverConfig,
    guess: Option<&StageCoefficients>,
) -> Result<SolveOutcome> {
    let mut gamma = check_inputs(tableau, sys, y0, cfg, guess)?;
    let n = sys.dim();
    let s = tableau.s();
    let rho = tableau.rho_s();
    let jac = jacobian_f(sys, y0)?;
    let theta_inv = DMatrix::identity(n, n) - jac * (h * rho);
    let lu = theta_inv.lu();
    if !lu.is_invertible() {
        return Err(Error::SingularMatrix);
    }
    // Θ applied to one block in place
    let apply_theta = |block: &mut [f64]| -> Result<()> {
        let mut b = DVector::from_column_slice(block);
        if !lu.solve_mut(&mut b) {
            return Err(Error::SingularMatrix);
        }
        block.copy_from_slice(b.as_slice());
        Ok(())
    };
    let scaled_xinv = tableau.x_s_inv() * rho;
    let mut ws = StageWorkspace::new(tableau, n);
    let mut g = StageCoefficients::zeros(s, n);
    let mut eta1 = StageCoefficients::zeros(s, n);
    let mut update_vec = vec![0.0; s * n];
    let mut mon = Monitor::new(cfg);
    loop {
        residual_into(tableau, sys, y0, h, &gamma, &mut ws, &mut g)?;
        // η = -G; η₁ = (ρ X⁻¹ ⊗ I) η
        for i in 0..s {
            let e = eta1.block_mut(i);
            e.fill(0.0);
            for j in 0..s {
                let c = -scaled_xinv[(i, j)];
                if c != 0.0 {
                    for (a, b) in e.iter_mut().zip(g.block(j)) {
                        *a += c * b;
                    }
                }
            }
        }
        for i in 0..s {
            let blk = &mut update_vec[i * n..(i + 1) * n];
            for ((u, e1), gv) in blk.iter_mut().zip(eta1.block(i)).zip(g.block(i)) {
                *u = -gv - e1;
            }
            apply_theta(blk)?;
            for (u, e1) in blk.iter_mut().zip(eta1.block(i)) {
                *u += e1;
            }
            apply_theta(blk)?;
        }
        for (a, d) in gamma.as_mut_slice().iter_mut().zip(&update_vec) {
            *a += d;
        }
        let update = crate::norm_inf(&update_vec);
        if let Verdict::Converged = mon.record(update, gamma.norm_inf())? {
            return Ok(mon.finish(gamma));
        }
    }
}

/// Dispatches on `cfg.kind`.
pub fn solve<P: PoissonSystem + ?Sized>(
    tableau: &MethodTableau,
    sys: &P,
    y0: &[f64],
    h: f64,
    cfg: &SolverConfig,
    guess: Option<&StageCoefficients>,
) -> Result<SolveOutcome> {
    match cfg.kind {
        SolverKind::FixedPoint => solve_fixed_point(tableau, sys, y0, h, cfg, guess),
        SolverKind::SimplifiedNewton => solve_simplified_newton(tableau, sys, y0, h, cfg, guess),
        SolverKind::Blended => solve_blended(tableau, sys, y0, h, cfg, guess),
    }
}

/// Solves the stage equation and advances `y0 → y1`.
pub fn step<P: PoissonSystem + ?Sized>(
    tableau: &MethodTableau,
    sys: &P,
    y0: &[f64],
    h: f64,
    cfg: &SolverConfig,
    guess: Option<&StageCoefficients>,
) -> Result<StepResult> {
    let out = solve(tableau, sys, y0, h, cfg, guess)?;
    advance(tableau, sys, y0, h, out.gamma, out.iterations)
}
