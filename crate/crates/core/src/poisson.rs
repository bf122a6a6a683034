//! Poisson systems `y' = S(y) ∇H(y)` with `S(y) = -S(y)ᵀ`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;

/// Why a model field could not be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldErrorKind {
    /// The state lies outside the model's domain (e.g. the dipole origin).
    OutsideDomain,
    /// `|bᵀa|` vanished: the gyrocenter equations degenerate.
    Singular,
    /// The state or a computed field is not finite.
    NonFinite,
    /// The state has the wrong length.
    DimensionMismatch,
}

/// A field evaluation failure, carrying the offending state.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{kind:?} at state {state:?}")]
pub struct FieldError {
    /// Failure category.
    pub kind: FieldErrorKind,
    /// The state at which evaluation failed.
    pub state: Vec<f64>,
}

impl FieldError {
    /// New error at `y`.
    pub fn new(kind: FieldErrorKind, y: &[f64]) -> Self {
        FieldError {
            kind,
            state: y.to_vec(),
        }
    }
}

/// The fields defining a Poisson problem.
///
/// Implementations must be re-entrant; `S(y)` is written row-major into an
/// `n × n` buffer.
pub trait PoissonSystem {
    /// State dimension `n`.
    fn dim(&self) -> usize;

    /// `H(y)`.
    fn hamiltonian(&self, y: &[f64]) -> Result<f64, FieldError>;

    /// `∇H(y)` into `out` (length `n`).
    fn grad_hamiltonian(&self, y: &[f64], out: &mut [f64]) -> Result<(), FieldError>;

    /// `S(y)` into `out` (length `n²`, row-major).
    fn structure_matrix(&self, y: &[f64], out: &mut [f64]) -> Result<(), FieldError>;

    /// Analytic Jacobian of `f = S∇H`, if the model has one.
    fn jacobian(&self, _y: &[f64]) -> Option<Result<DMatrix<f64>, FieldError>> {
        None
    }
}

impl<T: PoissonSystem + ?Sized> PoissonSystem for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn hamiltonian(&self, y: &[f64]) -> Result<f64, FieldError> {
        (**self).hamiltonian(y)
    }
    fn grad_hamiltonian(&self, y: &[f64], out: &mut [f64]) -> Result<(), FieldError> {
        (**self).grad_hamiltonian(y, out)
    }
    fn structure_matrix(&self, y: &[f64], out: &mut [f64]) -> Result<(), FieldError> {
        (**self).structure_matrix(y, out)
    }
    fn jacobian(&self, y: &[f64]) -> Option<Result<DMatrix<f64>, FieldError>> {
        (**self).jacobian(y)
    }
}

fn check_dim<P: PoissonSystem + ?Sized>(sys: &P, y: &[f64]) -> Result<(), FieldError> {
    if y.len() != sys.dim() {
        return Err(FieldError::new(FieldErrorKind::DimensionMismatch, y));
    }
    Ok(())
}

/// `out = m · v` for a row-major square `m`.
pub(crate) fn matvec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &m[i * n..(i + 1) * n];
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

/// `f(y) = S(y) ∇H(y)`.
pub fn eval_f<P: PoissonSystem + ?Sized>(sys: &P, y: &[f64]) -> Result<Vec<f64>, FieldError> {
    check_dim(sys, y)?;
    let n = sys.dim();
    let mut s = vec![0.0; n * n];
    let mut g = vec![0.0; n];
    let mut out = vec![0.0; n];
    sys.structure_matrix(y, &mut s)?;
    sys.grad_hamiltonian(y, &mut g)?;
    matvec(&s, &g, &mut out);
    Ok(out)
}

/// [`eval_f`] at each state, in order. Failures are reported per index.
pub fn eval_f_batch<P: PoissonSystem + ?Sized>(
    sys: &P,
    ys: &[Vec<f64>],
) -> Vec<Result<Vec<f64>, FieldError>> {
    ys.iter().map(|y| eval_f(sys, y)).collect()
}

/// Jacobian of `f` at `y`: the model's analytic one if supplied, else central
/// differences with step `√ε (1 + |y_j|)` per column.
pub fn jacobian_f<P: PoissonSystem + ?Sized>(sys: &P, y: &[f64]) -> Result<DMatrix<f64>, FieldError> {
    check_dim(sys, y)?;
    if let Some(j) = sys.jacobian(y) {
        return j;
    }
    let n = sys.dim();
    let sqrt_eps = Float::sqrt(f64::EPSILON);
    let mut jac = DMatrix::zeros(n, n);
    let mut yp = y.to_vec();
    for j in 0..n {
        let step = sqrt_eps * (1.0 + Float::abs(y[j]));
        yp[j] = y[j] + step;
        let fp = eval_f(sys, &yp)?;
        yp[j] = y[j] - step;
        let fm = eval_f(sys, &yp)?;
        yp[j] = y[j];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    Ok(jac)
}

/// Pointwise checks of the Poisson structure at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureCheck {
    /// `‖S + Sᵀ‖_max / (1 + ‖S‖_max)`.
    pub skew: f64,
    /// `|∇Hᵀ S ∇H| / (‖S‖_max ‖∇H‖²)`, zero for exact skew-symmetry.
    pub orthogonality: f64,
    /// `‖∇H - ∇_fd H‖_∞ / (1 + ‖∇H‖_∞)` with a central difference of step `fd_step`.
    pub gradient: f64,
}

/// Evaluates [`StructureCheck`] at `y`.
pub fn check_structure<P: PoissonSystem + ?Sized>(
    sys: &P,
    y: &[f64],
    fd_step: f64,
) -> Result<StructureCheck, FieldError> {
    check_dim(sys, y)?;
    let n = sys.dim();
    let mut s = vec![0.0; n * n];
    let mut g = vec![0.0; n];
    sys.structure_matrix(y, &mut s)?;
    sys.grad_hamiltonian(y, &mut g)?;
    let s_max = crate::norm_inf(&s);
    let mut skew: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            skew = skew.max(Float::abs(s[i * n + j] + s[j * n + i]));
        }
    }
    let mut sg = vec![0.0; n];
    matvec(&s, &g, &mut sg);
    let quad: f64 = g.iter().zip(&sg).map(|(a, b)| a * b).sum();
    let g2: f64 = g.iter().map(|a| a * a).sum();
    let orthogonality = if s_max * g2 > 0.0 {
        Float::abs(quad) / (s_max * g2)
    } else {
        0.0
    };
    let mut yp = y.to_vec();
    let mut gradient: f64 = 0.0;
    for j in 0..n {
        let step = fd_step * (1.0 + Float::abs(y[j]));
        yp[j] = y[j] + step;
        let hp = sys.hamiltonian(&yp)?;
        yp[j] = y[j] - step;
        let hm = sys.hamiltonian(&yp)?;
        yp[j] = y[j];
        gradient = gradient.max(Float::abs((hp - hm) / (2.0 * step) - g[j]));
    }
    Ok(StructureCheck {
        skew: skew / (1.0 + s_max),
        orthogonality,
        gradient: gradient / (1.0 + crate::norm_inf(&g)),
    })
}

/// `y' = S Q y`: constant skew `S` and `H(y) = ½ yᵀ Q y` with symmetric `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPoissonSystem {
    s: DMatrix<f64>,
    q: DMatrix<f64>,
}

impl LinearPoissonSystem {
    /// Returns `None` unless `s` is skew-symmetric and `q` symmetric, both square and the same size.
    pub fn new(s: DMatrix<f64>, q: DMatrix<f64>) -> Option<Self> {
        let n = s.nrows();
        if s.ncols() != n || q.nrows() != n || q.ncols() != n {
            return None;
        }
        if (&s + s.transpose()).amax() > 0.0 || (&q - q.transpose()).amax() > 0.0 {
            return None;
        }
        Some(Self { s, q })
    }

    /// `S Q`.
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.s * &self.q
    }
}

impl PoissonSystem for LinearPoissonSystem {
    fn dim(&self) -> usize {
        self.s.nrows()
    }

    fn hamiltonian(&self, y: &[f64]) -> Result<f64, FieldError> {
        check_dim(self, y)?;
        let n = self.dim();
        let mut h = 0.0;
        for i in 0..n {
            for j in 0..n {
                h += y[i] * self.q[(i, j)] * y[j];
            }
        }
        Ok(0.5 * h)
    }

    fn grad_hamiltonian(&self, y: &[f64], out: &mut [f64]) -> Result<(), FieldError> {
        check_dim(self, y)?;
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..y.len()).map(|j| self.q[(i, j)] * y[j]).sum();
        }
        Ok(())
    }

    fn structure_matrix(&self, y: &[f64], out: &mut [f64]) -> Result<(), FieldError> {
        check_dim(self, y)?;
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.s[(i, j)];
            }
        }
        Ok(())
    }
}
