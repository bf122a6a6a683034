//! Energy-conserving line integral methods `LIM(k1, k2, s)` for Poisson systems
//! `y' = S(y) ∇H(y)` with skew-symmetric `S`.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! * [`legendre`]: shifted orthonormal Legendre polynomials on `[0, 1]`,
//!   Gauss-Legendre rules and the per-method tableaux.
//! * [`poisson`]: the [`PoissonSystem`] abstraction and its derived maps
//!   (`f = S ∇H`, batched evaluation, Jacobian).
//! * [`gyrocenter`]: guiding-center dynamics in a dipole or tokamak magnetic
//!   field, optionally with a quadratic electric potential.
//! * [`lim`]: the discrete stage equation of one step, dense output and the
//!   step update.
//! * [`solvers`]: fixed-point, simplified Newton and blended iterations for the
//!   stage equation.
//!
//! A step of size `h` from `y0` with a method built for `s = 2`, `k2 = 8`:
//!
//! ```
//! use gyrolim_core::gyrocenter::dipole_model;
//! use gyrolim_core::legendre::build_tableau;
//! use gyrolim_core::solvers::{step, SolverConfig};
//! use gyrolim_core::PoissonSystem;
//!
//! let model = dipole_model(1.0e3, 1.0e-2).unwrap();
//! let tableau = build_tableau(2, 2, 8).unwrap();
//! let y0 = [1.0, 1.0, 1.0, 0.01];
//! let res = step(&tableau, &model, &y0, 0.4, &SolverConfig::default(), None).unwrap();
//! assert!(res.energy_drift.abs() < 1e-12 * model.hamiltonian(&y0).unwrap().abs());
//! ```
#![no_std]
#![deny(missing_docs)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod gyrocenter;
pub mod legendre;
pub mod lim;
pub mod poisson;
pub mod solvers;

pub use error::{Error, NodeSet, Result};
pub use legendre::{build_tableau, gauss_legendre, MethodTableau, Quadrature, TableauCache};
pub use lim::{StageCoefficients, StepResult};
pub use poisson::{FieldError, FieldErrorKind, PoissonSystem};
pub use solvers::{SolveOutcome, SolverConfig, SolverKind};

/// Infinity norm of a slice.
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| {
        let a = if *x < 0.0 { -*x } else { *x };
        // NaN must propagate so that blow-ups are never mistaken for convergence
        if a.is_nan() || m.is_nan() {
            f64::NAN
        } else if a > m {
            a
        } else {
            m
        }
    })
}
