//! Gyrocenter dynamics as a Poisson system in `y = (x, u) ∈ ℝ⁴`.
//!
//! With `b = B/‖B‖`, `a = B + u ∇×b` and `H = u²/2 + μ‖B‖ + φ(x)`, the
//! structure matrix is
//!
//! ```text
//!               ⎡  0   -b₃   b₂   a₁ ⎤
//!   S(y) = 1/d  ⎢  b₃   0   -b₁   a₂ ⎥ ,   d = |bᵀa|.
//!               ⎢ -b₂   b₁   0    a₃ ⎥
//!               ⎣ -a₁  -a₂  -a₃   0  ⎦
//! ```
//!
//! Field models supply `B` and its Jacobian `∂B_i/∂x_j` in closed form. The
//! derivatives entering the equations follow from those:
//! `∇‖B‖ = (∂B)ᵀ b` and `∇×b = (∇×B + b × ∇‖B‖) / ‖B‖`.

use num_traits::Float;

use crate::error::{Error, Result};
use crate::poisson::{FieldError, FieldErrorKind, PoissonSystem};

/// A point or vector in ℝ³.
pub type Vec3 = [f64; 3];
/// `m[i][j] = ∂B_i/∂x_j`.
pub type Mat3 = [[f64; 3]; 3];

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn finite3(v: &Vec3) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Magnetic field quantities at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    /// `B(x)`.
    pub b_field: Vec3,
    /// `‖B(x)‖`.
    pub norm: f64,
    /// `b(x) = B/‖B‖`, from the model's closed form.
    pub unit: Vec3,
    /// `∂B_i/∂x_j`.
    pub jacobian: Mat3,
}

impl FieldSample {
    /// `∇‖B‖ = (∂B)ᵀ b`.
    pub fn grad_norm(&self) -> Vec3 {
        let (j, b) = (&self.jacobian, &self.unit);
        core::array::from_fn(|k| j[0][k] * b[0] + j[1][k] * b[1] + j[2][k] * b[2])
    }

    /// `∇×B`.
    pub fn curl_field(&self) -> Vec3 {
        let j = &self.jacobian;
        [j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]]
    }

    /// `∇×b = (∇×B + b × ∇‖B‖) / ‖B‖`.
    pub fn curl_unit(&self) -> Vec3 {
        let c = self.curl_field();
        let t = cross(&self.unit, &self.grad_norm());
        core::array::from_fn(|k| (c[k] + t[k]) / self.norm)
    }
}

/// A static magnetic field with closed-form first derivatives.
pub trait FieldModel {
    /// Vector potential `A(x)` with `B = ∇×A`.
    fn vector_potential(&self, x: &Vec3) -> core::result::Result<Vec3, FieldError>;

    /// `B`, `‖B‖`, `b` and `∂B` at `x`.
    fn sample(&self, x: &Vec3) -> core::result::Result<FieldSample, FieldError>;

    /// `B(x)`.
    fn field(&self, x: &Vec3) -> core::result::Result<Vec3, FieldError> {
        Ok(self.sample(x)?.b_field)
    }
    /// `‖B(x)‖`.
    fn field_norm(&self, x: &Vec3) -> core::result::Result<f64, FieldError> {
        Ok(self.sample(x)?.norm)
    }
    /// `b(x)`.
    fn unit_field(&self, x: &Vec3) -> core::result::Result<Vec3, FieldError> {
        Ok(self.sample(x)?.unit)
    }
    /// `∇×b(x)`.
    fn curl_unit_field(&self, x: &Vec3) -> core::result::Result<Vec3, FieldError> {
        Ok(self.sample(x)?.curl_unit())
    }
    /// `∇‖B(x)‖`.
    fn grad_field_norm(&self, x: &Vec3) -> core::result::Result<Vec3, FieldError> {
        Ok(self.sample(x)?.grad_norm())
    }
}

/// Magnetic dipole with moment `M` along `-x₃`:
/// `A = (M/ρ³)(x₂, -x₁, 0)`, `B = -(M/ρ⁵)(3x₁x₃, 3x₂x₃, 2x₃² - x₁² - x₂²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleField {
    moment: f64,
}

impl DipoleField {
    /// Requires `m ≠ 0` and finite.
    pub fn new(m: f64) -> Result<Self> {
        if m == 0.0 || !m.is_finite() {
            return Err(Error::param("M", "dipole moment must be finite and nonzero"));
        }
        Ok(Self { moment: m })
    }

    /// Dipole moment `M`.
    pub fn moment(&self) -> f64 {
        self.moment
    }

    fn radius(&self, x: &Vec3) -> core::result::Result<f64, FieldError> {
        let rho = Float::sqrt(dot(x, x));
        if !rho.is_finite() {
            return Err(FieldError::new(FieldErrorKind::NonFinite, x));
        }
        if rho == 0.0 {
            return Err(FieldError::new(FieldErrorKind::OutsideDomain, x));
        }
        Ok(rho)
    }
}

impl FieldModel for DipoleField {
    fn vector_potential(&self, x: &Vec3) -> core::result::Result<Vec3, FieldError> {
        let rho = self.radius(x)?;
        let f = self.moment / (rho * rho * rho);
        Ok([f * x[1], -f * x[0], 0.0])
    }

    fn sample(&self, x: &Vec3) -> core::result::Result<FieldSample, FieldError> {
        let rho = self.radius(x)?;
        let m = self.moment;
        let [x1, x2, x3] = *x;
        let rho2 = rho * rho;
        let rho5 = rho2 * rho2 * rho;
        let v = [3.0 * x1 * x3, 3.0 * x2 * x3, 2.0 * x3 * x3 - x1 * x1 - x2 * x2];
        let b_field = v.map(|vi| -m * vi / rho5);
        let root = Float::sqrt(rho2 + 3.0 * x3 * x3);
        let norm = Float::abs(m) * root / (rho2 * rho2);
        let sign = -Float::signum(m);
        let unit = v.map(|vi| sign * vi / (rho * root));
        // ∂V_i/∂x_j
        let dv = [
            [3.0 * x3, 0.0, 3.0 * x1],
            [0.0, 3.0 * x3, 3.0 * x2],
            [-2.0 * x1, -2.0 * x2, 4.0 * x3],
        ];
        let rho7 = rho5 * rho2;
        let jacobian = core::array::from_fn(|i| {
            core::array::from_fn(|j| -m * (dv[i][j] / rho5 - 5.0 * v[i] * x[j] / rho7))
        });
        let s = FieldSample {
            b_field,
            norm,
            unit,
            jacobian,
        };
        if !(finite3(&b_field) && norm.is_finite() && norm > 0.0) {
            return Err(FieldError::new(FieldErrorKind::NonFinite, x));
        }
        Ok(s)
    }
}

/// Axisymmetric tokamak field with circular flux surfaces, on-axis field `B0`,
/// major radius `R0` and safety factor `q`.
///
/// With `R = √(x₁² + x₂²)` and `r = √((R - R0)² + x₃²)`:
/// `B = B0/(qR²) (-x₁x₃ - qR0x₂, -x₂x₃ + qR0x₁, R(R - R0))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokamakField {
    b0: f64,
    r0: f64,
    q: f64,
}

impl TokamakField {
    /// Requires `B0 ≠ 0`, `R0 > 0`, `q ≠ 0`.
    pub fn new(b0: f64, r0: f64, q: f64) -> Result<Self> {
        if b0 == 0.0 || !b0.is_finite() {
            return Err(Error::param("B0", "on-axis field must be finite and nonzero"));
        }
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::param("R0", "major radius must be positive"));
        }
        if q == 0.0 || !q.is_finite() {
            return Err(Error::param("q", "safety factor must be finite and nonzero"));
        }
        Ok(Self { b0, r0, q })
    }

    /// `(B0, R0, q)`.
    pub fn parameters(&self) -> (f64, f64, f64) {
        (self.b0, self.r0, self.q)
    }

    fn major(&self, x: &Vec3) -> core::result::Result<f64, FieldError> {
        let r = Float::sqrt(x[0] * x[0] + x[1] * x[1]);
        if !(r.is_finite() && x[2].is_finite()) {
            return Err(FieldError::new(FieldErrorKind::NonFinite, x));
        }
        if r == 0.0 {
            return Err(FieldError::new(FieldErrorKind::OutsideDomain, x));
        }
        Ok(r)
    }
}

impl FieldModel for TokamakField {
    fn vector_potential(&self, x: &Vec3) -> core::result::Result<Vec3, FieldError> {
        let big_r = self.major(x)?;
        let (b0, r0, q) = (self.b0, self.r0, self.q);
        let [x1, x2, x3] = *x;
        let r2 = (big_r - r0) * (big_r - r0) + x3 * x3;
        let f = b0 / (2.0 * q * big_r * big_r);
        Ok([
            f * (q * r0 * x1 * x3 - x2 * r2),
            f * (q * r0 * x2 * x3 + x1 * r2),
            -f * q * big_r * big_r * r0 * Float::ln(big_r / r0),
        ])
    }

    fn sample(&self, x: &Vec3) -> core::result::Result<FieldSample, FieldError> {
        let big_r = self.major(x)?;
        let (b0, r0, q) = (self.b0, self.r0, self.q);
        let [x1, x2, x3] = *x;
        let r2 = (big_r - r0) * (big_r - r0) + x3 * x3;
        let w = [
            -x1 * x3 - q * r0 * x2,
            -x2 * x3 + q * r0 * x1,
            big_r * (big_r - r0),
        ];
        let big_r2 = big_r * big_r;
        let c = b0 / q;
        let b_field = w.map(|wi| c * wi / big_r2);
        let root = Float::sqrt(r2 + q * q * r0 * r0);
        let norm = Float::abs(c) * root / big_r;
        let sign = Float::signum(c);
        let unit = w.map(|wi| sign * wi / (big_r * root));
        // ∂W_i/∂x_j, then B = c W / R² with ∂(R²)/∂x = (2x₁, 2x₂, 0)
        let dw = [
            [-x3, -q * r0, -x1],
            [q * r0, -x3, -x2],
            [2.0 * x1 - r0 * x1 / big_r, 2.0 * x2 - r0 * x2 / big_r, 0.0],
        ];
        let dr2 = [2.0 * x1, 2.0 * x2, 0.0];
        let big_r4 = big_r2 * big_r2;
        let jacobian = core::array::from_fn(|i| {
            core::array::from_fn(|j| c * (dw[i][j] / big_r2 - w[i] * dr2[j] / big_r4))
        });
        if !(finite3(&b_field) && norm.is_finite() && norm > 0.0) {
            return Err(FieldError::new(FieldErrorKind::NonFinite, x));
        }
        Ok(FieldSample {
            b_field,
            norm,
            unit,
            jacobian,
        })
    }
}

/// One of the built-in magnetic fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MagneticField {
    /// [`DipoleField`].
    Dipole(DipoleField),
    /// [`TokamakField`].
    Tokamak(TokamakField),
}

impl From<DipoleField> for MagneticField {
    fn from(f: DipoleField) -> Self {
        MagneticField::Dipole(f)
    }
}

impl From<TokamakField> for MagneticField {
    fn from(f: TokamakField) -> Self {
        MagneticField::Tokamak(f)
    }
}

impl FieldModel for MagneticField {
    fn vector_potential(&self, x: &Vec3) -> core::result::Result<Vec3, FieldError> {
        match self {
            MagneticField::Dipole(f) => f.vector_potential(x),
            MagneticField::Tokamak(f) => f.vector_potential(x),
        }
    }

    fn sample(&self, x: &Vec3) -> core::result::Result<FieldSample, FieldError> {
        match self {
            MagneticField::Dipole(f) => f.sample(x),
            MagneticField::Tokamak(f) => f.sample(x),
        }
    }
}

/// Electric potential `φ(x)`, `E = -∇φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElectricPotential {
    /// `φ ≡ 0`.
    Zero,
    /// `φ = ½ xᵀ G x` with `G = diag(g)`.
    Quadratic {
        /// Diagonal of `G`.
        g: Vec3,
    },
}

/// `φ(x) = ½ xᵀ diag(g) x`.
pub fn quadratic_potential(g: Vec3) -> ElectricPotential {
    ElectricPotential::Quadratic { g }
}

impl ElectricPotential {
    /// `φ(x)`.
    pub fn phi(&self, x: &Vec3) -> f64 {
        match self {
            ElectricPotential::Zero => 0.0,
            ElectricPotential::Quadratic { g } => {
                0.5 * (g[0] * x[0] * x[0] + g[1] * x[1] * x[1] + g[2] * x[2] * x[2])
            }
        }
    }

    /// `∇φ(x)`.
    pub fn grad_phi(&self, x: &Vec3) -> Vec3 {
        match self {
            ElectricPotential::Zero => [0.0; 3],
            ElectricPotential::Quadratic { g } => [g[0] * x[0], g[1] * x[1], g[2] * x[2]],
        }
    }
}

/// Gyrocenter model: magnetic field, electric potential and adiabatic invariant `μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GyrocenterModel {
    field: MagneticField,
    potential: ElectricPotential,
    mu: f64,
}

const SINGULAR_FLOOR: f64 = 1e-300;

impl GyrocenterModel {
    /// Model with `φ ≡ 0`. Requires `μ ≥ 0`.
    pub fn new(field: impl Into<MagneticField>, mu: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::param("mu", "adiabatic invariant must be finite and non-negative"));
        }
        Ok(Self {
            field: field.into(),
            potential: ElectricPotential::Zero,
            mu,
        })
    }

    /// Replaces the electric potential.
    pub fn with_potential(mut self, potential: ElectricPotential) -> Self {
        self.potential = potential;
        self
    }

    /// Magnetic field.
    pub fn field(&self) -> &MagneticField {
        &self.field
    }
    /// Electric potential.
    pub fn potential(&self) -> &ElectricPotential {
        &self.potential
    }
    /// `μ`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    fn split(y: &[f64]) -> core::result::Result<(Vec3, f64), FieldError> {
        if y.len() != 4 {
            return Err(FieldError::new(FieldErrorKind::DimensionMismatch, y));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(FieldError::new(FieldErrorKind::NonFinite, y));
        }
        Ok(([y[0], y[1], y[2]], y[3]))
    }

    fn lift(e: FieldError, y: &[f64]) -> FieldError {
        FieldError::new(e.kind, y)
    }

    /// `a(y) = B + u ∇×b`.
    pub fn a_vector(&self, y: &[f64]) -> core::result::Result<Vec3, FieldError> {
        let (x, u) = Self::split(y)?;
        let s = self.field.sample(&x).map_err(|e| Self::lift(e, y))?;
        let cb = s.curl_unit();
        Ok(core::array::from_fn(|k| s.b_field[k] + u * cb[k]))
    }
}

/// Dipole model `φ ≡ 0` with moment `m` and invariant `mu`.
pub fn dipole_model(m: f64, mu: f64) -> Result<GyrocenterModel> {
    GyrocenterModel::new(DipoleField::new(m)?, mu)
}

/// Tokamak model `φ ≡ 0`.
pub fn tokamak_model(b0: f64, r0: f64, q: f64, mu: f64) -> Result<GyrocenterModel> {
    GyrocenterModel::new(TokamakField::new(b0, r0, q)?, mu)
}

/// `(R, x₃)` with `R = √(x₁² + x₂²)`.
pub fn cylindrical_coords(x: &Vec3) -> (f64, f64) {
    (Float::sqrt(x[0] * x[0] + x[1] * x[1]), x[2])
}

impl PoissonSystem for GyrocenterModel {
    fn dim(&self) -> usize {
        4
    }

    fn hamiltonian(&self, y: &[f64]) -> core::result::Result<f64, FieldError> {
        let (x, u) = Self::split(y)?;
        let norm = self.field.field_norm(&x).map_err(|e| Self::lift(e, y))?;
        Ok(0.5 * u * u + self.mu * norm + self.potential.phi(&x))
    }

    fn grad_hamiltonian(&self, y: &[f64], out: &mut [f64]) -> core::result::Result<(), FieldError> {
        let (x, u) = Self::split(y)?;
        let s = self.field.sample(&x).map_err(|e| Self::lift(e, y))?;
        let gn = s.grad_norm();
        let gp = self.potential.grad_phi(&x);
        for k in 0..3 {
            out[k] = self.mu * gn[k] + gp[k];
        }
        out[3] = u;
        Ok(())
    }

    fn structure_matrix(&self, y: &[f64], out: &mut [f64]) -> core::result::Result<(), FieldError> {
        let (x, u) = Self::split(y)?;
        let s = self.field.sample(&x).map_err(|e| Self::lift(e, y))?;
        let b = s.unit;
        let cb = s.curl_unit();
        let a: Vec3 = core::array::from_fn(|k| s.b_field[k] + u * cb[k]);
        let d = Float::abs(dot(&b, &a));
        if !d.is_finite() {
            return Err(FieldError::new(FieldErrorKind::NonFinite, y));
        }
        if d < SINGULAR_FLOOR {
            return Err(FieldError::new(FieldErrorKind::Singular, y));
        }
        let inv = 1.0 / d;
        let m = [
            [0.0, -b[2], b[1], a[0]],
            [b[2], 0.0, -b[0], a[1]],
            [-b[1], b[0], 0.0, a[2]],
            [-a[0], -a[1], -a[2], 0.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                out[i * 4 + j] = m[i][j] * inv;
            }
        }
        Ok(())
    }
}
