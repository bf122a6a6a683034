//! One step of `LIM(k1, k2, s)`.
//!
//! The unknowns are the `s` Legendre coefficients `Γ̂_0 … Γ̂_{s-1}` of the
//! derivative of the step polynomial
//!
//! ```text
//! u(ch) = y0 + h Σ_i ∫₀^c P_i · Γ̂_i,      y1 = u(h) = y0 + h Γ̂_0.
//! ```
//!
//! They solve `G(Γ) = Γ - [P̂ᵀΩ̂ ⊗ I] S(u(ĉh)) [P̂ PᵀΩ ⊗ I] ∇H(u(ch)) = 0`.
//! The block matrix of `S` values is never formed: `S` is evaluated at the
//! `k1` nodes and `∇H` at the `k2` nodes, and both are contracted with the
//! small tableau matrices.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, NodeSet, Result};
use crate::legendre::{legendre_integral, MethodTableau};
use crate::poisson::{matvec, PoissonSystem};

/// `Γ = (Γ̂_0, …, Γ̂_{s-1})`, stored block by block.
#[derive(Debug, Clone, PartialEq)]
pub struct StageCoefficients {
    n: usize,
    data: Vec<f64>,
}

impl StageCoefficients {
    /// All zero.
    pub fn zeros(s: usize, n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; s * n],
        }
    }

    /// From stacked blocks; `data.len()` must be a multiple of `n`.
    pub fn from_vec(n: usize, data: Vec<f64>) -> Self {
        assert!(n > 0 && data.len().is_multiple_of(n), "stacked length must be a multiple of n");
        Self { n, data }
    }

    /// Number of blocks `s`.
    pub fn s(&self) -> usize {
        self.data.len() / self.n
    }

    /// Block size `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// `Γ̂_i`.
    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Mutable `Γ̂_i`.
    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    /// Stacked vector of length `s·n`.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Mutable stacked vector.
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Consumes into the stacked vector.
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// `‖Γ‖_∞`.
    pub fn norm_inf(&self) -> f64 {
        crate::norm_inf(&self.data)
    }
}

/// Polynomial values at the nodes of both rules, `k × n` row blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct StageStates {
    /// `u(ĉ_ℓ h)`, ℓ = 1..k1.
    pub structure_nodes: Vec<Vec<f64>>,
    /// `u(c_ℓ h)`, ℓ = 1..k2.
    pub gradient_nodes: Vec<Vec<f64>>,
}

/// `out = y0 + h Σ_i int[row, i] Γ̂_i`.
fn node_state(int: &nalgebra::DMatrix<f64>, row: usize, y0: &[f64], h: f64, gamma: &StageCoefficients, out: &mut [f64]) {
    out.copy_from_slice(y0);
    for i in 0..gamma.s() {
        let w = h * int[(row, i)];
        for (o, g) in out.iter_mut().zip(gamma.block(i)) {
            *o += w * g;
        }
    }
}

/// `u(ĉ_ℓ h)` and `u(c_ℓ h)`.
pub fn stage_states(tableau: &MethodTableau, y0: &[f64], h: f64, gamma: &StageCoefficients) -> StageStates {
    let n = y0.len();
    let collect = |int: &nalgebra::DMatrix<f64>, k: usize| {
        (0..k)
            .map(|l| {
                let mut u = vec![0.0; n];
                node_state(int, l, y0, h, gamma, &mut u);
                u
            })
            .collect()
    };
    StageStates {
        structure_nodes: collect(tableau.i_hat(), tableau.k1()),
        gradient_nodes: collect(tableau.i(), tableau.k2()),
    }
}

/// Scratch buffers for repeated residual evaluations of one step.
#[derive(Debug, Clone)]
pub struct StageWorkspace {
    n: usize,
    state: Vec<f64>,
    s_mat: Vec<f64>,
    grads: Vec<f64>,
    gamma_hat: Vec<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
}

impl StageWorkspace {
    /// Buffers sized for `tableau` and dimension `n`.
    pub fn new(tableau: &MethodTableau, n: usize) -> Self {
        Self {
            n,
            state: vec![0.0; n],
            s_mat: vec![0.0; n * n],
            grads: vec![0.0; tableau.k2() * n],
            gamma_hat: vec![0.0; tableau.s() * n],
            v: vec![0.0; n],
            w: vec![0.0; n],
        }
    }
}

/// `out = ρ̂ γ̂ = [P̂ᵀΩ̂ ⊗ I] S(u(ĉh)) [P̂ PᵀΩ ⊗ I] ∇H(u(ch))`, the fixed-point map.
pub fn fixed_point_map_into<P: PoissonSystem + ?Sized>(
    tableau: &MethodTableau,
    sys: &P,
    y0: &[f64],
    h: f64,
    gamma: &StageCoefficients,
    ws: &mut StageWorkspace,
    out: &mut StageCoefficients,
) -> Result<()> {
    let n = ws.n;
    let s = tableau.s();
    debug_assert_eq!(gamma.s(), s);
    debug_assert_eq!(y0.len(), n);

    // ∇H at the k2 nodes
    for l in 0..tableau.k2() {
        node_state(tableau.i(), l, y0, h, gamma, &mut ws.state);
        sys.grad_hamiltonian(&ws.state, &mut ws.grads[l * n..(l + 1) * n])
            .map_err(|source| Error::FieldAtNode {
                set: NodeSet::Gradient,
                index: l,
                source,
            })?;
    }
    // γ̂_j = Σ_ℓ b_ℓ P_j(c_ℓ) ∇H_ℓ
    let pw = tableau.p_weighted();
    ws.gamma_hat.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..s {
        let gj = &mut ws.gamma_hat[j * n..(j + 1) * n];
        for l in 0..tableau.k2() {
            let c = pw[(j, l)];
            for (g, d) in gj.iter_mut().zip(&ws.grads[l * n..(l + 1) * n]) {
                *g += c * d;
            }
        }
    }
    // Γ̂_i = Σ_ℓ b̂_ℓ P_i(ĉ_ℓ) S(u_ℓ) Σ_j P_j(ĉ_ℓ) γ̂_j
    out.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
    let p_hat = tableau.p_hat();
    let phw = tableau.p_hat_weighted();
    for l in 0..tableau.k1() {
        node_state(tableau.i_hat(), l, y0, h, gamma, &mut ws.state);
        sys.structure_matrix(&ws.state, &mut ws.s_mat)
            .map_err(|source| Error::FieldAtNode {
                set: NodeSet::Structure,
                index: l,
                source,
            })?;
        ws.v.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..s {
            let c = p_hat[(l, j)];
            for (v, g) in ws.v.iter_mut().zip(&ws.gamma_hat[j * n..(j + 1) * n]) {
                *v += c * g;
            }
        }
        matvec(&ws.s_mat, &ws.v, &mut ws.w);
        for i in 0..s {
            let c = phw[(i, l)];
            for (o, w) in out.block_mut(i).iter_mut().zip(&ws.w) {
                *o += c * w;
            }
        }
    }
    Ok(())
}

/// `G(Γ)` into `out`.
pub fn residual_into<P: PoissonSystem + ?Sized>(
    tableau: &MethodTableau,
    sys: &P,
    y0: &[f64],
    h: f64,
    gamma: &StageCoefficients,
    ws: &mut StageWorkspace,
    out: &mut StageCoefficients,
) -> Result<()> {
    fixed_point_map_into(tableau, sys, y0, h, gamma, ws, out)?;
    for (o, g) in out.as_mut_slice().iter_mut().zip(gamma.as_slice()) {
        *o = g - *o;
    }
    Ok(())
}

/// `G(Γ)`.
pub fn residual<P: PoissonSystem + ?Sized>(
    tableau: &MethodTableau,
    sys: &P,
    y0: &[f64],
    h: f64,
    gamma: &StageCoefficients,
) -> Result<StageCoefficients> {
    let n = y0.len();
    if n != sys.dim() || gamma.n() != n || gamma.s() != tableau.s() {
        return Err(Error::param("gamma", "dimensions of y0, gamma and the system disagree"));
    }
    let mut ws = StageWorkspace::new(tableau, n);
    let mut out = StageCoefficients::zeros(tableau.s(), n);
    residual_into(tableau, sys, y0, h, gamma, &mut ws, &mut out)?;
    Ok(out)
}

/// `u(ch) = y0 + h Σ_i ∫₀^c P_i · Γ̂_i`.
pub fn dense_output(tableau: &MethodTableau, y0: &[f64], h: f64, gamma: &StageCoefficients, c: f64) -> Vec<f64> {
    let mut out = y0.to_vec();
    for i in 0..tableau.s() {
        let w = if c == 1.0 {
            if i == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            legendre_integral(i, c)
        };
        if w != 0.0 {
            for (o, g) in out.iter_mut().zip(gamma.block(i)) {
                *o += h * w * g;
            }
        }
    }
    out
}

/// Outcome of one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    /// `y1 = y0 + h Γ̂_0`.
    pub y1: Vec<f64>,
    /// Converged coefficients.
    pub stages: StageCoefficients,
    /// Nonlinear iterations used.
    pub iterations: usize,
    /// `‖G(Γ)‖_∞` at the returned coefficients.
    pub residual_norm: f64,
    /// `H(y1) - H(y0)`.
    pub energy_drift: f64,
}

/// Forms `y1` from solved coefficients and records the energy drift.
pub fn advance<P: PoissonSystem + ?Sized>(
    tableau: &MethodTableau,
    sys: &P,
    y0: &[f64],
    h: f64,
    gamma: StageCoefficients,
    iterations: usize,
) -> Result<StepResult> {
    let residual_norm = residual(tableau, sys, y0, h, &gamma)?.norm_inf();
    let mut y1 = y0.to_vec();
    for (y, g) in y1.iter_mut().zip(gamma.block(0)) {
        *y += h * g;
    }
    let energy_drift = sys.hamiltonian(&y1)? - sys.hamiltonian(y0)?;
    Ok(StepResult {
        y1,
        stages: gamma,
        iterations,
        residual_norm,
        energy_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gyrocenter::dipole_model;
    use crate::legendre::build_tableau;
    use crate::poisson::{eval_f, FieldError};
    use approx::assert_abs_diff_eq;

    fn some_gamma(s: usize, n: usize) -> StageCoefficients {
        StageCoefficients::from_vec(n, (0..s * n).map(|i| 0.1 * (i as f64 + 1.0).sin()).collect())
    }

    #[test]
    fn stage_states_trivial() {
        let t = build_tableau(3, 4, 6).unwrap();
        let y0 = [1.0, 2.0, 3.0, 4.0];
        let z = stage_states(&t, &y0, 0.5, &StageCoefficients::zeros(3, 4));
        let g = stage_states(&t, &y0, 0.0, &some_gamma(3, 4));
        for st in [z, g] {
            assert_eq!(st.structure_nodes.len(), 4);
            assert_eq!(st.gradient_nodes.len(), 6);
            assert!(st.structure_nodes.iter().chain(&st.gradient_nodes).all(|u| u == &y0));
        }
    }

    #[test]
    fn stage_states_s1_linear() {
        let t = build_tableau(1, 1, 5).unwrap();
        let y0 = [1.0, -1.0];
        let g = StageCoefficients::from_vec(2, vec![0.3, 0.7]);
        let st = stage_states(&t, &y0, 0.2, &g);
        for (c, u) in t.quad().nodes().iter().zip(&st.gradient_nodes) {
            assert_abs_diff_eq!(u[0], 1.0 + 0.2 * c * 0.3, epsilon = 1e-15);
            assert_abs_diff_eq!(u[1], -1.0 + 0.2 * c * 0.7, epsilon = 1e-15);
        }
    }

    #[test]
    fn residual_at_zero_is_minus_f() {
        let m = dipole_model(1.0e3, 1.0e-2).unwrap();
        let y0 = [1.0, 1.0, 1.0, 0.01];
        let f = eval_f(&m, &y0).unwrap();
        for (s, k1, k2) in [(1, 1, 1), (2, 2, 8), (3, 5, 9)] {
            let t = build_tableau(s, k1, k2).unwrap();
            let r = residual(&t, &m, &y0, 0.4, &StageCoefficients::zeros(s, 4)).unwrap();
            for k in 0..4 {
                assert_abs_diff_eq!(r.block(0)[k], -f[k], epsilon = 1e-12 * (1.0 + f[k].abs()));
            }
            for i in 1..s {
                assert!(crate::norm_inf(r.block(i)) < 1e-12 * crate::norm_inf(&f));
            }
        }
    }

    struct Flat;
    impl PoissonSystem for Flat {
        fn dim(&self) -> usize {
            2
        }
        fn hamiltonian(&self, _: &[f64]) -> core::result::Result<f64, FieldError> {
            Ok(1.0)
        }
        fn grad_hamiltonian(&self, _: &[f64], out: &mut [f64]) -> core::result::Result<(), FieldError> {
            out.fill(0.0);
            Ok(())
        }
        fn structure_matrix(&self, _: &[f64], out: &mut [f64]) -> core::result::Result<(), FieldError> {
            out.copy_from_slice(&[0.0, 1.0, -1.0, 0.0]);
            Ok(())
        }
    }

    #[test]
    fn zero_gradient_residual_is_identity() {
        let t = build_tableau(2, 3, 3).unwrap();
        let g = some_gamma(2, 2);
        let r = residual(&t, &Flat, &[0.1, 0.2], 0.3, &g).unwrap();
        assert_eq!(r, g);
    }

    #[test]
    fn residual_rejects_shapes() {
        let t = build_tableau(2, 3, 3).unwrap();
        assert!(residual(&t, &Flat, &[0.1, 0.2], 0.3, &some_gamma(3, 2)).is_err());
    }

    #[test]
    fn node_errors_carry_index() {
        let m = dipole_model(1.0, 0.1).unwrap();
        let t = build_tableau(1, 1, 2).unwrap();
        // the single structure node sits at c = 1/2 where u passes through the origin
        let g = StageCoefficients::from_vec(4, vec![-2.0, 0.0, 0.0, 0.0]);
        let e = residual(&t, &m, &[1.0, 0.0, 0.0, 0.0], 1.0, &g).unwrap_err();
        assert!(e.field_error().is_some());
    }

    #[test]
    fn dense_output_endpoints() {
        let t = build_tableau(3, 3, 5).unwrap();
        let y0 = [1.0, 2.0, 3.0];
        let g = some_gamma(3, 3);
        assert_eq!(dense_output(&t, &y0, 0.7, &g, 0.0), y0.to_vec());
        let end = dense_output(&t, &y0, 0.7, &g, 1.0);
        for k in 0..3 {
            assert_eq!(end[k], y0[k] + 0.7 * g.block(0)[k]);
        }
        let st = stage_states(&t, &y0, 0.7, &g);
        for (c, u) in t.quad().nodes().iter().zip(&st.gradient_nodes) {
            let d = dense_output(&t, &y0, 0.7, &g, *c);
            for k in 0..3 {
                assert_abs_diff_eq!(d[k], u[k], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn advance_with_zero_step() {
        let m = dipole_model(1.0e3, 1.0e-2).unwrap();
        let t = build_tableau(2, 2, 4).unwrap();
        let y0 = [1.0, 1.0, 1.0, 0.01];
        let r = advance(&t, &m, &y0, 0.0, some_gamma(2, 4), 0).unwrap();
        assert_eq!(r.y1, y0.to_vec());
        assert_eq!(r.energy_drift, 0.0);
    }
}
