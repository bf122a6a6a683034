//! Shifted orthonormal Legendre polynomials on `[0, 1]`, Gauss-Legendre rules
//! and the matrices a `LIM(k1, k2, s)` method is built from.
//!
//! The polynomials satisfy `∫₀¹ P_i P_j = δ_ij`, so `P_j(c) = √(2j+1) L_j(2c-1)`
//! with `L_j` the classical Legendre polynomial. The scale factor never leaves
//! this module.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;

use crate::error::{Error, Result};

/// Classical Legendre values `L_0(t) ..= L_{out.len()-1}(t)`.
fn classical_all(t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = t;
    }
    for j in 1..out.len().saturating_sub(1) {
        let jf = j as f64;
        out[j + 1] = ((2.0 * jf + 1.0) * t * out[j] - jf * out[j - 1]) / (jf + 1.0);
    }
}

/// Classical `(L_{n-1}(t), L_n(t))` by the three-term recurrence.
fn classical_pair(n: usize, t: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (0.0, 1.0);
    for j in 0..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0) * t * cur - jf * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    (prev, cur)
}

/// Orthonormal shifted Legendre polynomial `P_degree(c)`.
pub fn legendre_eval(degree: usize, c: f64) -> f64 {
    let (_, l) = classical_pair(degree, 2.0 * c - 1.0);
    Float::sqrt(2.0 * degree as f64 + 1.0) * l
}

/// Fills `out[j] = P_j(c)` for `j < out.len()`.
pub fn legendre_eval_all(c: f64, out: &mut [f64]) {
    classical_all(2.0 * c - 1.0, out);
    for (j, v) in out.iter_mut().enumerate() {
        *v *= Float::sqrt(2.0 * j as f64 + 1.0);
    }
}

/// `∫₀^c P_degree(x) dx`.
///
/// Uses `∫_{-1}^t L_j = (L_{j+1}(t) - L_{j-1}(t)) / (2j+1)` for `j ≥ 1`, which
/// gives `∫₀¹ P_j = δ_{j0}` exactly at `c = 1` since `L_j(1) = 1`.
pub fn legendre_integral(degree: usize, c: f64) -> f64 {
    if degree == 0 {
        return c;
    }
    let t = 2.0 * c - 1.0;
    let mut l = vec![0.0; degree + 2];
    classical_all(t, &mut l);
    (l[degree + 1] - l[degree - 1]) / (2.0 * Float::sqrt(2.0 * degree as f64 + 1.0))
}

/// A Gauss-Legendre rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    /// Abscissae in `(0, 1)`, strictly increasing.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Positive weights summing to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of nodes `k`.
    pub fn order_k(&self) -> usize {
        self.nodes.len()
    }

    /// Applies the rule to `g` on `[0, 1]`.
    pub fn integrate(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&c, &b)| b * g(c))
            .sum()
    }
}

const NODE_TOL: f64 = 1e-15;
const NODE_MAX_NEWTON: usize = 100;

/// The `k`-point Gauss-Legendre rule mapped to `[0, 1]`.
///
/// Roots of `L_k` on `[-1, 1]` are refined by Newton's method from the
/// Chebyshev-like guesses `cos(π(i + 3/4)/(k + 1/2))`. Only the left half is
/// computed; the right half is its exact mirror image.
pub fn gauss_legendre(k: usize) -> Result<Quadrature> {
    if k == 0 {
        return Err(Error::param("k", "a quadrature needs at least one node"));
    }
    let mut t_nodes = vec![0.0; k];
    let mut t_weights = vec![0.0; k];
    let kf = k as f64;
    for i in 0..k.div_ceil(2) {
        // guess for the i-th largest root, then mirrored to the left half
        let mut t = Float::cos(core::f64::consts::PI * (i as f64 + 0.75) / (kf + 0.5));
        let mut converged = false;
        let mut dl = 0.0;
        for _ in 0..NODE_MAX_NEWTON {
            let (lm1, l) = classical_pair(k, t);
            dl = kf * (t * l - lm1) / (t * t - 1.0);
            let dt = l / dl;
            t -= dt;
            if Float::abs(dt) <= NODE_TOL {
                let (lm1, l) = classical_pair(k, t);
                dl = kf * (t * l - lm1) / (t * t - 1.0);
                converged = true;
                break;
            }
        }
        if !converged || !t.is_finite() {
            return Err(Error::QuadratureNotConverged { k, node: i });
        }
        let w = 2.0 / ((1.0 - t * t) * dl * dl);
        // t > 0 is the (i+1)-th largest root
        let (lo, hi) = (i, k - 1 - i);
        if lo == hi {
            t_nodes[lo] = 0.0;
        } else {
            t_nodes[lo] = -t;
            t_nodes[hi] = t;
        }
        t_weights[lo] = w;
        t_weights[hi] = w;
    }
    let nodes = t_nodes.iter().map(|t| 0.5 * (1.0 + t)).collect();
    let weights = t_weights.iter().map(|w| 0.5 * w).collect();
    Ok(Quadrature { nodes, weights })
}

/// `ξ_i = 1/(2√(4i²-1))` for `i ≥ 1` and `ξ_0 = 1/2`.
pub fn xi(i: usize) -> f64 {
    if i == 0 {
        0.5
    } else {
        let i = i as f64;
        0.5 / Float::sqrt(4.0 * i * i - 1.0)
    }
}

/// The `s × s` matrix `X_s`: `ξ_0` in the corner, `ξ_i` below and `-ξ_i` above
/// the diagonal.
pub fn x_matrix(s: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(s, s);
    if s > 0 {
        x[(0, 0)] = xi(0);
    }
    for i in 1..s {
        x[(i, i - 1)] = xi(i);
        x[(i - 1, i)] = -xi(i);
    }
    x
}

fn eval_matrix(q: &Quadrature, s: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = q.order_k();
    let mut p = DMatrix::zeros(k, s);
    let mut int = DMatrix::zeros(k, s);
    let mut row = vec![0.0; s];
    for (l, &c) in q.nodes().iter().enumerate() {
        legendre_eval_all(c, &mut row);
        for j in 0..s {
            p[(l, j)] = row[j];
            int[(l, j)] = legendre_integral(j, c);
        }
    }
    (p, int)
}

/// Every quadrature- and Legendre-derived matrix of one `LIM(k1, k2, s)`.
///
/// `P_hat`, `I_hat` live on the `k1` nodes `ĉ` (used for `S(y)`); `P`, `I` on
/// the `k2` nodes `c` (used for `∇H(y)`). Immutable once built.
#[derive(Debug, Clone)]
pub struct MethodTableau {
    s: usize,
    quad_hat: Quadrature,
    quad: Quadrature,
    p_hat: DMatrix<f64>,
    i_hat: DMatrix<f64>,
    p: DMatrix<f64>,
    i: DMatrix<f64>,
    // P_hatᵀ Ω_hat and Pᵀ Ω, both s × k
    p_hat_w: DMatrix<f64>,
    p_w: DMatrix<f64>,
    x_s: DMatrix<f64>,
    x_s_inv: DMatrix<f64>,
    rho_s: f64,
}

/// Builds the tableau of `LIM(k1, k2, s)`; requires `k1 ≥ s` and `k2 ≥ s`.
pub fn build_tableau(s: usize, k1: usize, k2: usize) -> Result<MethodTableau> {
    if s == 0 {
        return Err(Error::param("s", "the polynomial degree s must be at least 1"));
    }
    if k1 < s {
        return Err(Error::param("k1", format!("k1 >= s required (k1 = {k1}, s = {s})")));
    }
    if k2 < s {
        return Err(Error::param("k2", format!("k2 >= s required (k2 = {k2}, s = {s})")));
    }
    let quad_hat = gauss_legendre(k1)?;
    let quad = gauss_legendre(k2)?;
    let (p_hat, i_hat) = eval_matrix(&quad_hat, s);
    let (p, i) = eval_matrix(&quad, s);
    let p_hat_w = weighted_transpose(&p_hat, quad_hat.weights());
    let p_w = weighted_transpose(&p, quad.weights());
    let x_s = x_matrix(s);
    let x_s_inv = x_s
        .clone()
        .try_inverse()
        .ok_or(Error::SingularMatrix)?;
    let rho_s = x_s
        .complex_eigenvalues()
        .iter()
        .map(|l| num_traits::Float::hypot(l.re, l.im))
        .fold(f64::INFINITY, f64::min);
    Ok(MethodTableau {
        s,
        quad_hat,
        quad,
        p_hat,
        i_hat,
        p,
        i,
        p_hat_w,
        p_w,
        x_s,
        x_s_inv,
        rho_s,
    })
}

fn weighted_transpose(p: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut out = p.transpose();
    for (l, &b) in w.iter().enumerate() {
        out.column_mut(l).scale_mut(b);
    }
    out
}

impl MethodTableau {
    /// Polynomial degree `s` (the number of unknown coefficient blocks).
    pub fn s(&self) -> usize {
        self.s
    }
    /// Nodes used for the `S(y)` coefficients.
    pub fn k1(&self) -> usize {
        self.quad_hat.order_k()
    }
    /// Nodes used for the `∇H(y)` coefficients.
    pub fn k2(&self) -> usize {
        self.quad.order_k()
    }
    /// The `k1`-point rule.
    pub fn quad_hat(&self) -> &Quadrature {
        &self.quad_hat
    }
    /// The `k2`-point rule.
    pub fn quad(&self) -> &Quadrature {
        &self.quad
    }
    /// `P_{j-1}(ĉ_i)`, `k1 × s`.
    pub fn p_hat(&self) -> &DMatrix<f64> {
        &self.p_hat
    }
    /// `∫₀^{ĉ_i} P_{j-1}`, `k1 × s`.
    pub fn i_hat(&self) -> &DMatrix<f64> {
        &self.i_hat
    }
    /// `P_{j-1}(c_i)`, `k2 × s`.
    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }
    /// `∫₀^{c_i} P_{j-1}`, `k2 × s`.
    pub fn i(&self) -> &DMatrix<f64> {
        &self.i
    }
    /// `P_hatᵀ Ω_hat`, `s × k1`.
    pub fn p_hat_weighted(&self) -> &DMatrix<f64> {
        &self.p_hat_w
    }
    /// `Pᵀ Ω`, `s × k2`.
    pub fn p_weighted(&self) -> &DMatrix<f64> {
        &self.p_w
    }
    /// `Ω_hat` diagonal.
    pub fn omega_hat(&self) -> &[f64] {
        self.quad_hat.weights()
    }
    /// `Ω` diagonal.
    pub fn omega(&self) -> &[f64] {
        self.quad.weights()
    }
    /// `X_s`.
    pub fn x_s(&self) -> &DMatrix<f64> {
        &self.x_s
    }
    /// `X_s⁻¹`.
    pub fn x_s_inv(&self) -> &DMatrix<f64> {
        &self.x_s_inv
    }
    /// Smallest eigenvalue modulus of `X_s`.
    pub fn rho_s(&self) -> f64 {
        self.rho_s
    }

    /// Copy with `ξ_i` replaced by `ξ_i + delta` in `X_s`. Negative control for
    /// the self test only.
    #[doc(hidden)]
    pub fn with_perturbed_xi(&self, i: usize, delta: f64) -> MethodTableau {
        let mut t = self.clone();
        if i == 0 {
            t.x_s[(0, 0)] += delta;
        } else if i < self.s {
            t.x_s[(i, i - 1)] += delta;
            t.x_s[(i - 1, i)] -= delta;
        }
        t
    }
}

/// Max-entry errors of the tableau identities:
/// `P_hatᵀΩ_hat P_hat = I_s`, `PᵀΩ1 = e_1`, `P_hatᵀΩ_hat I_hat = X_s` and `PᵀΩI = X_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityErrors {
    /// `‖P_hatᵀΩ_hat P_hat - I_s‖_max`
    pub orthonormality: f64,
    /// `‖PᵀΩ1 - e_1‖_max`
    pub first_moment: f64,
    /// `‖P_hatᵀΩ_hat I_hat - X_s‖_max`
    pub x_hat: f64,
    /// `‖PᵀΩI - X_s‖_max`
    pub x: f64,
}

impl IdentityErrors {
    /// Largest of the four.
    pub fn max(&self) -> f64 {
        self.orthonormality
            .max(self.first_moment)
            .max(self.x_hat)
            .max(self.x)
    }
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

impl MethodTableau {
    /// Evaluates the structural identities the solvers rely on.
    pub fn identity_errors(&self) -> IdentityErrors {
        let s = self.s;
        let ones = DMatrix::from_element(self.k2(), 1, 1.0);
        let mut e1 = DMatrix::zeros(s, 1);
        e1[(0, 0)] = 1.0;
        IdentityErrors {
            orthonormality: max_abs_diff(&(&self.p_hat_w * &self.p_hat), &DMatrix::identity(s, s)),
            first_moment: max_abs_diff(&(&self.p_w * ones), &e1),
            x_hat: max_abs_diff(&(&self.p_hat_w * &self.i_hat), &self.x_s),
            x: max_abs_diff(&(&self.p_w * &self.i), &self.x_s),
        }
    }
}

/// Memoizes tableaux per `(s, k1, k2)`.
#[derive(Debug, Default, Clone)]
pub struct TableauCache {
    map: BTreeMap<(usize, usize, usize), Arc<MethodTableau>>,
}

impl TableauCache {
    /// Empty cache.
    pub fn new() -> Self {
        Self::default()
    }

    /// The tableau for `(s, k1, k2)`, built on first use.
    pub fn get(&mut self, s: usize, k1: usize, k2: usize) -> Result<Arc<MethodTableau>> {
        if let Some(t) = self.map.get(&(s, k1, k2)) {
            return Ok(Arc::clone(t));
        }
        let t = Arc::new(build_tableau(s, k1, k2)?);
        self.map.insert((s, k1, k2), Arc::clone(&t));
        Ok(t)
    }

    /// Number of cached tableaux.
    pub fn len(&self) -> usize {
        self.map.len()
    }

    /// True if nothing is cached.
    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}
