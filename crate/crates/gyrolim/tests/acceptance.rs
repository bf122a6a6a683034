//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits nonzero when a criterion fails that is not listed in `KNOWN_GAPS`.

use std::process::ExitCode;
use std::time::Instant;

use gyrolim::commands::{cmd_run, compute_sweep};
use gyrolim::config::{ProblemKind, RunConfig};
use gyrolim::harness::{CellStatus, Method, SweepCell, SweepReport, TableKind};
use gyrolim::output::write_sweep_csv_stable;
use gyrolim_core::gyrocenter::{dipole_model, quadratic_potential, tokamak_model, FieldModel, GyrocenterModel, Vec3};
use gyrolim_core::legendre::{gauss_legendre, legendre_eval, legendre_integral};
use gyrolim_core::lim::residual;
use gyrolim_core::poisson::FieldError;
use gyrolim_core::solvers::step;
use gyrolim_core::{build_tableau, PoissonSystem, SolverConfig, SolverKind, StageCoefficients};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that fail for reasons recorded in the README; they still print FAIL.
const KNOWN_GAPS: &[u32] = &[2];

type Check = Result<String, String>;

fn cell(r: &SweepReport, m: Method) -> &SweepCell {
    r.find(|c| c.method == m).unwrap_or_else(|| panic!("{m} missing from report"))
}

fn within_factor(x: f64, target: f64, f: f64) -> bool {
    x <= target * f && x >= target / f
}

fn c1_tableau_identities() -> Check {
    let mut worst: f64 = 0.0;
    for s in 1..=8 {
        for k1 in s..=20 {
            for k2 in s..=20 {
                let e = build_tableau(s, k1, k2).map_err(|e| e.to_string())?.identity_errors();
                for (name, v) in [("orthonormality", e.orthonormality), ("first moment", e.first_moment), ("X hat", e.x_hat), ("X", e.x)] {
                    worst = worst.max(v);
                    if !(v <= 1e-13) {
                        return Err(format!("LIM({k1},{k2},{s}) {name} error {v:e}"));
                    }
                }
            }
        }
    }
    Ok(format!("max entry error {worst:.2e}"))
}

fn c2_energy_table() -> Check {
    let mut cfg = RunConfig::default();
    cfg.sweep.k_list = Some(vec![1, 2, 7, 8, 9]);
    let (r, _) = compute_sweep(&cfg, Some(TableKind::Energy)).map_err(|e| e.to_string())?;
    let drift = |s, k| cell(&r, Method::lim(s, k)).max_energy_drift.unwrap_or(f64::INFINITY);
    let mut bad = Vec::new();
    for (s, k, target) in [(1, 1, 2.689e-2), (2, 2, 5.103e-3)] {
        if !within_factor(drift(s, k), target, 3.0) {
            bad.push(format!("({s},{k}) = {:.3e} not within 3x of {target:e}", drift(s, k)));
        }
    }
    let mut small = vec![(1, 7), (2, 8)];
    small.extend((1..=5).map(|s| (s, 9)));
    for (s, k) in small {
        if !(drift(s, k) <= 1e-13) {
            bad.push(format!("({s},{k}) = {:.3e} > 1e-13", drift(s, k)));
        }
    }
    let summary = format!(
        "(1,1) {:.3e}, (2,2) {:.3e}, (1,7) {:.2e}, (2,8) {:.2e}, k=9 max {:.2e}",
        drift(1, 1),
        drift(2, 2),
        drift(1, 7),
        drift(2, 8),
        (1..=5).map(|s| drift(s, 9)).fold(0.0, f64::max)
    );
    if bad.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", bad.join("; ")))
    }
}

fn c3_convergence_table() -> Check {
    let (r, _) = compute_sweep(&RunConfig::default(), Some(TableKind::Convergence)).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for (s, k, reference_err) in [(1, 7, 1.05e0), (2, 8, 1.58e-2), (3, 9, 1.82e-3)] {
        let m = Method::lim(s, k);
        let cells: Vec<&SweepCell> = r.cells.iter().filter(|c| c.method == m).collect();
        if cells.len() < 4 || cells.iter().any(|c| c.status != CellStatus::Ok) {
            return Err(format!("{m}: incomplete run"));
        }
        let err0 = cells[0].final_error.unwrap_or(f64::NAN);
        if !within_factor(err0, reference_err, 5.0) {
            return Err(format!("{m}: error at h=0.4 is {err0:.3e}, reference {reference_err:e}"));
        }
        let rates: Vec<f64> = cells[cells.len() - 3..].iter().map(|c| c.empirical_rate.unwrap_or(f64::NAN)).collect();
        let target = 2.0 * s as f64;
        if rates.iter().any(|p| !((p - target).abs() <= 0.3)) {
            return Err(format!("{m}: rates {rates:.2?}, expected {target} ± 0.3"));
        }
        parts.push(format!("{m} err {err0:.2e} rates {rates:.2?}"));
    }
    Ok(parts.join("; "))
}

fn c4_spectral_regime() -> Check {
    let (transit, _) = compute_sweep(&RunConfig::default(), Some(TableKind::Spectral)).map_err(|e| e.to_string())?;
    let status = |r: &SweepReport, s| cell(r, Method::lim(s, 20)).status;
    for s in 1..=8 {
        if status(&transit, s) != CellStatus::NonConvergence {
            return Err(format!("transit s={s}: {:?}, expected non-convergence", status(&transit, s)));
        }
    }
    for s in 9..=16 {
        if status(&transit, s) != CellStatus::Ok {
            return Err(format!("transit s={s}: {:?}", status(&transit, s)));
        }
    }
    let errs: Vec<f64> = (10..=16).map(|s| cell(&transit, Method::lim(s, 20)).final_error.unwrap_or(f64::NAN)).collect();
    if errs.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(format!("transit errors not monotone: {errs:?}"));
    }
    let orders = (errs[0] / errs[6]).log10();
    if !(orders >= 5.0) {
        return Err(format!("transit errors drop {orders:.2} orders from s=10 to s=16"));
    }
    let mut cfg = RunConfig::default();
    cfg.problem = Some(ProblemKind::TokamakBanana);
    let (banana, _) = compute_sweep(&cfg, Some(TableKind::Spectral)).map_err(|e| e.to_string())?;
    for s in 8..=16 {
        if status(&banana, s) != CellStatus::Ok {
            return Err(format!("banana s={s}: {:?}", status(&banana, s)));
        }
    }
    let first = (1..=16).find(|&s| status(&banana, s) == CellStatus::Ok).unwrap_or(0);
    Ok(format!(
        "transit converges for s=9..16, error {:.2e} -> {:.2e} ({orders:.1} orders); banana from s={first}",
        errs[0], errs[6]
    ))
}

fn c5_solver_robustness() -> Check {
    let (r, _) = compute_sweep(&RunConfig::default(), Some(TableKind::Robustness)).map_err(|e| e.to_string())?;
    let h_max = |m: Method, kind: SolverKind| {
        r.cells
            .iter()
            .find(|c| c.method == m && c.solver == kind)
            .and_then(|c| (c.status == CellStatus::Ok).then_some(c.h).flatten())
    };
    let fp = h_max(Method::lim(1, 7), SolverKind::FixedPoint).ok_or("fixed point never converged")?;
    if !(0.005..=0.05).contains(&fp) {
        return Err(format!("fixed-point h_max {fp} outside [0.005, 0.05]"));
    }
    let methods = [Method::lim(1, 7), Method::lim(2, 8), Method::lim(3, 9), Method::lim(4, 9), Method::lim(5, 9)];
    let blended: Vec<f64> = methods.iter().map(|&m| h_max(m, SolverKind::Blended).unwrap_or(0.0)).collect();
    if !(blended[0] >= 40.0) {
        return Err(format!("blended LIM(1,7,1) h_max {}", blended[0]));
    }
    if blended.windows(2).any(|w| w[1] < w[0]) {
        return Err(format!("blended h_max decreases: {blended:?}"));
    }
    // the bisection probes on a grid; check h = 40 directly
    let model = dipole_model(1.0e3, 1.0e-2)
        .unwrap()
        .with_potential(quadratic_potential([1.0, 1.0, 1.0e4]));
    let tab = build_tableau(1, 1, 7).unwrap();
    let cfg = SolverConfig {
        max_iters: 1000,
        ..SolverConfig::new(SolverKind::Blended)
    };
    let mut y = vec![1.0, 1.0, 0.01, 0.01];
    for _ in 0..3 {
        y = step(&tab, &model, &y, 40.0, &cfg, None).map_err(|e| format!("blended at h=40: {e}"))?.y1;
    }
    Ok(format!("fixed-point h_max {fp:.4}, blended h_max {blended:?}"))
}

fn preset_models() -> Vec<(&'static str, GyrocenterModel, [f64; 4])> {
    let dipole = dipole_model(1.0e3, 1.0e-2).unwrap();
    vec![
        ("dipole", dipole, [1.0, 1.0, 1.0, 0.01]),
        ("tokamak", tokamak_model(1.0, 1.0, 2.0, 2.25e-6).unwrap(), [1.05, 0.0, 0.0, 0.0008117]),
        (
            "dipole_electric",
            dipole.with_potential(quadratic_potential([1.0, 1.0, 1.0e4])),
            [1.0, 1.0, 0.01, 0.01],
        ),
    ]
}

fn c6_symmetry() -> Check {
    let tol = 1e-12;
    let mut worst: f64 = 0.0;
    let (mut checked, mut skipped) = (0, 0);
    for (name, model, y0) in preset_models() {
        let bound = 10.0 * tol * (1.0 + y0.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        for s in 1..=3 {
            let tab = build_tableau(s, s, s + 6).unwrap();
            for h in [0.1, 0.4] {
                for kind in [SolverKind::FixedPoint, SolverKind::Blended] {
                    let cfg = SolverConfig {
                        tol,
                        max_iters: 1000,
                        ..SolverConfig::new(kind)
                    };
                    let fwd = match step(&tab, &model, &y0, h, &cfg, None) {
                        Ok(r) => r,
                        Err(e) if kind == SolverKind::FixedPoint && e.is_solver_failure() => {
                            skipped += 1;
                            continue;
                        }
                        Err(e) => return Err(format!("{name} s={s} h={h} {kind:?}: {e}")),
                    };
                    let back = step(&tab, &model, &fwd.y1, -h, &cfg, None)
                        .map_err(|e| format!("{name} s={s} h={h} {kind:?} backward: {e}"))?;
                    let d = back.y1.iter().zip(&y0).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                    worst = worst.max(d / bound);
                    checked += 1;
                    if d > bound {
                        return Err(format!("{name} s={s} h={h} {kind:?}: return error {d:e} > {bound:e}"));
                    }
                }
            }
        }
    }
    Ok(format!("{checked} round trips, worst {worst:.2} of the bound, {skipped} fixed-point cases not convergent"))
}

/// `S(y) = A₀ + Σ_k y_k A_k` with skew `A`, `H = ½yᵀQy + ¼c Σ y⁴ + sin(d·y)`.
struct SkewGradient {
    a: Vec<DMatrix<f64>>,
    q: DMatrix<f64>,
    c: f64,
    d: [f64; 4],
}

impl SkewGradient {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut u = || rng.random_range(-1.0..1.0_f64);
        let a = (0..5)
            .map(|_| {
                let mut m = DMatrix::zeros(4, 4);
                for i in 0..4 {
                    for j in i + 1..4 {
                        let v = u();
                        m[(i, j)] = v;
                        m[(j, i)] = -v;
                    }
                }
                m
            })
            .collect();
        let mut q = DMatrix::zeros(4, 4);
        for i in 0..4 {
            for j in i..4 {
                let v = u();
                q[(i, j)] = v;
                q[(j, i)] = v;
            }
        }
        let c = u().abs();
        let d = [u(), u(), u(), u()];
        Self { a, q, c, d }
    }

    fn s_of(&self, y: &[f64]) -> DMatrix<f64> {
        let mut m = self.a[0].clone();
        for k in 0..4 {
            m += &self.a[k + 1] * y[k];
        }
        m
    }

    fn grad_of(&self, y: &[f64]) -> DVector<f64> {
        let dot: f64 = self.d.iter().zip(y).map(|(a, b)| a * b).sum();
        let mut g = &self.q * DVector::from_column_slice(y);
        for i in 0..4 {
            g[i] += self.c * y[i].powi(3) + dot.cos() * self.d[i];
        }
        g
    }
}

impl PoissonSystem for SkewGradient {
    fn dim(&self) -> usize {
        4
    }
    fn hamiltonian(&self, y: &[f64]) -> Result<f64, FieldError> {
        let yv = DVector::from_column_slice(y);
        let dot: f64 = self.d.iter().zip(y).map(|(a, b)| a * b).sum();
        Ok(0.5 * yv.dot(&(&self.q * &yv)) + 0.25 * self.c * y.iter().map(|v| v.powi(4)).sum::<f64>() + dot.sin())
    }
    fn grad_hamiltonian(&self, y: &[f64], out: &mut [f64]) -> Result<(), FieldError> {
        out.copy_from_slice(self.grad_of(y).as_slice());
        Ok(())
    }
    fn structure_matrix(&self, y: &[f64], out: &mut [f64]) -> Result<(), FieldError> {
        let m = self.s_of(y);
        for i in 0..4 {
            for j in 0..4 {
                out[i * 4 + j] = m[(i, j)];
            }
        }
        Ok(())
    }
}

fn kronecker_residual(sys: &SkewGradient, (s, k1, k2): (usize, usize, usize), y0: &[f64], h: f64, gamma: &[f64]) -> Vec<f64> {
    let n = 4;
    let qh = gauss_legendre(k1).unwrap();
    let q = gauss_legendre(k2).unwrap();
    let node = |c: f64| -> Vec<f64> {
        let mut u = y0.to_vec();
        for i in 0..s {
            for r in 0..n {
                u[r] += h * legendre_integral(i, c) * gamma[i * n + r];
            }
        }
        u
    };
    let eye = DMatrix::<f64>::identity(n, n);
    let pht_w = DMatrix::from_fn(s, k1, |i, l| qh.weights()[l] * legendre_eval(i, qh.nodes()[l]));
    let ph = DMatrix::from_fn(k1, s, |l, j| legendre_eval(j, qh.nodes()[l]));
    let pt_w = DMatrix::from_fn(s, k2, |j, l| q.weights()[l] * legendre_eval(j, q.nodes()[l]));
    let mut blocks = DMatrix::zeros(k1 * n, k1 * n);
    for l in 0..k1 {
        blocks.view_mut((l * n, l * n), (n, n)).copy_from(&sys.s_of(&node(qh.nodes()[l])));
    }
    let mut grads = DVector::zeros(k2 * n);
    for l in 0..k2 {
        grads.rows_mut(l * n, n).copy_from(&sys.grad_of(&node(q.nodes()[l])));
    }
    let rhs = pht_w.kronecker(&eye) * blocks * (&ph * &pt_w).kronecker(&eye) * grads;
    (0..s * n).map(|i| gamma[i] - rhs[i]).collect()
}

fn c7_kronecker_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let sys = SkewGradient::random(&mut rng);
        let s = rng.random_range(1..=3);
        let (k1, k2) = (rng.random_range(s..=5), rng.random_range(s..=5));
        let y0: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gamma: Vec<f64> = (0..4 * s).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = rng.random_range(0.0..0.5);
        let tab = build_tableau(s, k1, k2).unwrap();
        let fast = residual(&tab, &sys, &y0, h, &StageCoefficients::from_vec(4, gamma.clone())).map_err(|e| e.to_string())?;
        let slow = kronecker_residual(&sys, (s, k1, k2), &y0, h, &gamma);
        for (a, b) in fast.as_slice().iter().zip(&slow) {
            let e = (a - b).abs();
            worst = worst.max(e);
            if !(e <= 1e-13) {
                return Err(format!("trial {trial}, LIM({k1},{k2},{s}): {a} vs {b}"));
            }
        }
    }
    Ok(format!("200 trials, max deviation {worst:.2e}"))
}

fn fd_gradient(f: &dyn Fn(&Vec3) -> f64, x: &Vec3, d: f64) -> Vec3 {
    std::array::from_fn(|j| {
        let (mut p, mut m) = (*x, *x);
        p[j] += d;
        m[j] -= d;
        (f(&p) - f(&m)) / (2.0 * d)
    })
}

fn fd_curl(f: &dyn Fn(&Vec3) -> Vec3, x: &Vec3, d: f64) -> Vec3 {
    let j: Vec<Vec3> = (0..3).map(|i| fd_gradient(&|p| f(p)[i], x, d)).collect();
    [j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]]
}

/// Observed order of central differences at `d` and `d/2`; `None` when both
/// errors sit at round-off level.
fn observed_order(exact: Vec3, fd: &dyn Fn(f64) -> Vec3, d: f64) -> Result<Option<f64>, String> {
    let scale = 1.0 + exact.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let err = |h| fd(h).iter().zip(&exact).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())) / scale;
    let (e1, e2) = (err(d), err(d / 2.0));
    if e1 <= 1e-10 && e2 <= 1e-10 {
        return Ok(None);
    }
    let p = (e1 / e2).log2();
    if (p - 2.0).abs() <= 0.3 && e2 < 1e-3 {
        Ok(Some(p))
    } else {
        Err(format!("order {p:.2}, relative errors {e1:.2e} / {e2:.2e}"))
    }
}

fn c8_derivatives() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut lo, mut hi, mut exact_hits) = (f64::INFINITY, f64::NEG_INFINITY, 0);
    for (name, model, _) in preset_models() {
        let field = *model.field();
        let pot = *model.potential();
        let mut accepted = 0;
        while accepted < 100 {
            let x: Vec3 = if name == "tokamak" {
                let (r, a) = (rng.random_range(0.5..1.5), rng.random_range(0.0..std::f64::consts::TAU));
                [r * a.cos(), r * a.sin(), rng.random_range(-0.5..0.5)]
            } else {
                std::array::from_fn(|_| rng.random_range(-3.0..3.0))
            };
            let rho = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if name != "tokamak" && rho < 0.5 {
                continue;
            }
            accepted += 1;
            let d = 1e-2 * if name == "tokamak" { 1.0 } else { rho };
            let unit = |p: &Vec3| field.unit_field(p).unwrap();
            let norm = |p: &Vec3| field.field_norm(p).unwrap();
            let phi = |p: &Vec3| pot.phi(p);
            let checks: [(&str, Vec3, &dyn Fn(f64) -> Vec3); 3] = [
                ("curl b", field.curl_unit_field(&x).unwrap(), &|h| fd_curl(&unit, &x, h)),
                ("grad |B|", field.grad_field_norm(&x).unwrap(), &|h| fd_gradient(&norm, &x, h)),
                ("grad phi", pot.grad_phi(&x), &|h| fd_gradient(&phi, &x, h)),
            ];
            for (what, exact, fd) in checks {
                match observed_order(exact, fd, d).map_err(|e| format!("{name} {what} at {x:?}: {e}"))? {
                    Some(p) => {
                        lo = lo.min(p);
                        hi = hi.max(p);
                    }
                    None => exact_hits += 1,
                }
            }
        }
    }
    Ok(format!("300 points, observed orders in [{lo:.3}, {hi:.3}], {exact_hits} checks exact to round-off"))
}

fn c9_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run_csv = |problem: ProblemKind, t_end: f64, sub: &str| -> Result<Vec<u8>, String> {
        let mut cfg = RunConfig::default();
        cfg.problem = Some(problem);
        cfg.t_end = Some(t_end);
        cfg.output.dir = Some(dir.path().join(sub));
        cmd_run(&cfg).map_err(|e| e.to_string())?;
        std::fs::read(dir.path().join(sub).join("trajectory.csv")).map_err(|e| e.to_string())
    };
    let mut bytes = 0;
    for (p, t) in [(ProblemKind::Dipole, 200.0), (ProblemKind::TokamakTransit, 8.0e4)] {
        let a = run_csv(p, t, "a")?;
        let b = run_csv(p, t, "b")?;
        if a != b {
            return Err(format!("{p} trajectories differ"));
        }
        bytes += a.len();
    }
    let sweep_csv = || -> Result<Vec<u8>, String> {
        let mut cfg = RunConfig::default();
        cfg.sweep.s_list = Some(vec![1, 2, 3]);
        cfg.sweep.k_list = Some(vec![3, 7]);
        cfg.t_end = Some(100.0);
        let (r, _) = compute_sweep(&cfg, Some(TableKind::Energy)).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        write_sweep_csv_stable(&r, &mut buf).map_err(|e| e.to_string())?;
        Ok(buf)
    };
    if sweep_csv()? != sweep_csv()? {
        return Err("parallel sweep CSVs differ".into());
    }
    Ok(format!("trajectory CSVs ({bytes} bytes) and sweep CSV identical across runs"))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Check); 9] = [
        (1, "tableau identities", c1_tableau_identities),
        (2, "Hamiltonian drift table", c2_energy_table),
        (3, "convergence table", c3_convergence_table),
        (4, "large-step regime on the tokamak", c4_spectral_regime),
        (5, "solver robustness", c5_solver_robustness),
        (6, "one-step symmetry", c6_symmetry),
        (7, "residual vs Kronecker oracle", c7_kronecker_oracle),
        (8, "model derivatives vs finite differences", c8_derivatives),
        (9, "determinism", c9_determinism),
    ];
    let budgets = [5.0, 120.0, 180.0, 300.0, 180.0, f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY];
    let mut unexpected = 0;
    let mut passed = 0;
    for ((n, name, check), budget) in criteria.into_iter().zip(budgets) {
        let start = Instant::now();
        let mut result = check();
        let secs = start.elapsed().as_secs_f64();
        if result.is_ok() && secs > budget {
            result = Err(format!("took {secs:.1}s, budget {budget}s"));
        }
        match result {
            Ok(detail) => {
                passed += 1;
                println!("criterion {n} PASS {name} ({secs:.2}s): {detail}");
            }
            Err(detail) => {
                let known = KNOWN_GAPS.contains(&n);
                if !known {
                    unexpected += 1;
                }
                let tag = if known { " [known gap]" } else { "" };
                println!("criterion {n} FAIL{tag} {name} ({secs:.2}s): {detail}");
            }
        }
    }
    println!("acceptance: {passed}/9 criteria passed");
    if unexpected > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
