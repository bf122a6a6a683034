//! Fast invariant suite behind `gyrolim selftest`.

use std::time::Instant;

use gyrolim_core::gyrocenter::{dipole_model, quadratic_potential, tokamak_model, FieldModel, GyrocenterModel, Vec3};
use gyrolim_core::poisson::check_structure;
use gyrolim_core::solvers::step;
use gyrolim_core::{build_tableau, gauss_legendre, MethodTableau, SolverConfig, SolverKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one check group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupResult {
    /// Group name.
    pub name: &'static str,
    /// Whether every check passed.
    pub passed: bool,
    /// Worst value seen or the first failure.
    pub detail: String,
    /// Seconds.
    pub seconds: f64,
}

/// Test hooks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SelftestOptions {
    /// Perturb `ξ₁` in every tableau of the identity group.
    pub corrupt_xi: bool,
}

/// The three built-in models with names.
pub fn models() -> [(&'static str, GyrocenterModel); 3] {
    let dipole = dipole_model(1.0e3, 1.0e-2).expect("valid dipole");
    [
        ("dipole", dipole),
        ("tokamak", tokamak_model(1.0, 1.0, 2.0, 2.25e-6).expect("valid tokamak")),
        ("dipole_electric", dipole.with_potential(quadratic_potential([1.0, 1.0, 1.0e4]))),
    ]
}

/// A random point well inside the domain of `name`'s field, and its length scale.
pub fn random_point(name: &str, rng: &mut ChaCha8Rng) -> (Vec3, f64) {
    if name == "tokamak" {
        let big_r = rng.random_range(0.5..1.5);
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let x3 = rng.random_range(-0.5..0.5);
        ([big_r * angle.cos(), big_r * angle.sin(), x3], 1.0)
    } else {
        loop {
            let x: Vec3 = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
            let rho = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            if rho > 0.5 {
                return (x, rho);
            }
        }
    }
}

fn group(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> GroupResult {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    GroupResult {
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn quadrature_exactness() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for k in 1..=20 {
        let q = gauss_legendre(k).map_err(|e| e.to_string())?;
        for d in 0..2 * k {
            let err = (q.integrate(|c| c.powi(d as i32)) - 1.0 / (d as f64 + 1.0)).abs();
            worst = worst.max(err);
            if err > 1e-14 {
                return Err(format!("k={k}, degree {d}: error {err:e}"));
            }
        }
    }
    Ok(format!("max error {worst:.1e} over k ≤ 20"))
}

/// Max identity error over `s ≤ 8`, `s ≤ k1, k2 ≤ 20`.
pub fn tableau_identities(corrupt: bool) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for s in 1..=8 {
        for k1 in s..=20 {
            for k2 in s..=20 {
                let mut t = build_tableau(s, k1, k2).map_err(|e| e.to_string())?;
                if corrupt && s >= 2 {
                    t = t.with_perturbed_xi(1, 1e-3);
                }
                let e = t.identity_errors().max();
                worst = worst.max(e);
                count += 1;
                if e > 1e-13 {
                    return Err(format!("LIM({k1},{k2},{s}): identity error {e:e}"));
                }
            }
        }
    }
    Ok(format!("{count} tableaux, max error {worst:.1e}"))
}

fn minimal_method() -> Result<String, String> {
    let t = build_tableau(1, 1, 1).map_err(|e| e.to_string())?;
    let e = t.identity_errors().max();
    if e > 1e-15 {
        return Err(format!("identity error {e:e}"));
    }
    let (_, model) = models()[0];
    let y0 = [1.0, 1.0, 1.0, 0.01];
    let r = step(&t, &model, &y0, 0.4, &SolverConfig::default(), None).map_err(|e| e.to_string())?;
    if !r.y1.iter().all(|v| v.is_finite()) || r.residual_norm > 1e-10 {
        return Err(format!("step residual {:e}", r.residual_norm));
    }
    Ok(format!("one step, residual {:.1e}", r.residual_norm))
}

fn skew_symmetry() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for (name, model) in models() {
        for _ in 0..100 {
            let (x, _) = random_point(name, &mut rng);
            let y = [x[0], x[1], x[2], rng.random_range(-0.1..0.1)];
            let c = check_structure(&model, &y, 1e-6).map_err(|e| e.to_string())?;
            worst = worst.max(c.skew).max(c.orthogonality);
            if c.skew > 0.0 || c.orthogonality > 1e-12 || c.gradient > 1e-6 {
                return Err(format!(
                    "{name} at {y:?}: skew {:e}, orthogonality {:e}, gradient {:e}",
                    c.skew, c.orthogonality, c.gradient
                ));
            }
        }
    }
    Ok(format!("300 points, worst {worst:.1e}"))
}

/// Error of central differences of `f` against `exact` at steps `delta` and
/// `delta / 2`; returns the observed order, or `None` when both errors are at
/// round-off level.
pub fn richardson_order(exact: &[f64], fd: impl Fn(f64) -> Vec<f64>, delta: f64) -> (Option<f64>, f64) {
    let scale = 1.0 + exact.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let err = |d: f64| {
        fd(d).iter().zip(exact).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    };
    let (e1, e2) = (err(delta), err(delta / 2.0));
    if e1 <= 1e-10 * scale && e2 <= 1e-10 * scale {
        return (None, e2 / scale);
    }
    ((e2 > 0.0).then(|| (e1 / e2).log2()), e2 / scale)
}

fn central(f: &impl Fn(&Vec3) -> f64, x: &Vec3, d: f64) -> Vec3 {
    std::array::from_fn(|j| {
        let (mut p, mut m) = (*x, *x);
        p[j] += d;
        m[j] -= d;
        (f(&p) - f(&m)) / (2.0 * d)
    })
}

fn derivative_checks() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst_order: f64 = 2.0;
    for (name, model) in models() {
        let field = *model.field();
        let pot = *model.potential();
        for _ in 0..100 {
            let (x, len) = random_point(name, &mut rng);
            let d = 1e-2 * len;
            let check = |what: &str, exact: Vec3, fd: &dyn Fn(f64) -> Vec3| -> Result<f64, String> {
                let (order, err) = richardson_order(&exact, |h| fd(h).to_vec(), d);
                match order {
                    None => Ok(2.0),
                    Some(p) if (p - 2.0).abs() <= 0.3 && err < 1e-3 => Ok(p),
                    Some(p) => Err(format!("{name} {what} at {x:?}: order {p:.2}, error {err:.1e}")),
                }
            };
            let norm = |p: &Vec3| field.field_norm(p).unwrap();
            let unit = |p: &Vec3| field.unit_field(p).unwrap();
            let exact_grad = field.grad_field_norm(&x).map_err(|e| e.to_string())?;
            let p1 = check("grad |B|", exact_grad, &|h| central(&norm, &x, h))?;
            let exact_curl = field.curl_unit_field(&x).map_err(|e| e.to_string())?;
            let p2 = check("curl b", exact_curl, &|h| {
                let db: Vec<Vec3> = (0..3).map(|i| central(&|p: &Vec3| unit(p)[i], &x, h)).collect();
                [db[2][1] - db[1][2], db[0][2] - db[2][0], db[1][0] - db[0][1]]
            })?;
            let exact_b = field.field(&x).map_err(|e| e.to_string())?;
            let p4 = check("curl A", exact_b, &|h| {
                let da: Vec<Vec3> = (0..3)
                    .map(|i| central(&|p: &Vec3| field.vector_potential(p).unwrap()[i], &x, h))
                    .collect();
                [da[2][1] - da[1][2], da[0][2] - da[2][0], da[1][0] - da[0][1]]
            })?;
            let p3 = check("grad phi", pot.grad_phi(&x), &|h| central(&|p: &Vec3| pot.phi(p), &x, h))?;
            worst_order = worst_order.min(p1).min(p2).min(p3).min(p4);
        }
    }
    Ok(format!("300 points, lowest observed order {worst_order:.2}"))
}

fn one_step_symmetry() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let starts = [[1.0, 1.0, 1.0, 0.01], [1.05, 0.0, 0.0, 0.0008117], [1.0, 1.0, 0.01, 0.01]];
    for ((name, model), y0) in models().into_iter().zip(starts) {
        for s in 1..=3 {
            let t = build_tableau(s, s, s + 6).map_err(|e| e.to_string())?;
            let cfg = SolverConfig {
                tol: 1e-14,
                max_iters: 500,
                ..SolverConfig::new(SolverKind::Blended)
            };
            let h = 0.1;
            let fwd = step(&t, &model, &y0, h, &cfg, None).map_err(|e| e.to_string())?;
            let back = step(&t, &model, &fwd.y1, -h, &cfg, None).map_err(|e| e.to_string())?;
            let d = back.y1.iter().zip(&y0).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            worst = worst.max(d);
            if d > 1e-12 {
                return Err(format!("{name}, s={s}: |y(-h) - y0| = {d:e}"));
            }
        }
    }
    Ok(format!("max return error {worst:.1e}"))
}

fn negative_control() -> Result<String, String> {
    let t: MethodTableau = build_tableau(3, 3, 5).map_err(|e| e.to_string())?.with_perturbed_xi(1, 1e-3);
    let e = t.identity_errors();
    if e.x_hat > 1e-13 && e.x > 1e-13 {
        Ok(format!("corrupted ξ₁ detected, error {:.1e}", e.x_hat))
    } else {
        Err("corrupted tableau passed the identity check".into())
    }
}

/// Runs every group in order.
pub fn run_selftest(opts: SelftestOptions) -> Vec<GroupResult> {
    vec![
        group("quadrature exactness", quadrature_exactness),
        group("tableau identities", || tableau_identities(opts.corrupt_xi)),
        group("minimal LIM(1,1,1)", minimal_method),
        group("skew-symmetry", skew_symmetry),
        group("finite-difference derivatives", derivative_checks),
        group("one-step symmetry", one_step_symmetry),
        group("negative control", negative_control),
    ]
}
