use gyrolim::harness::{
    convergence_table, hamiltonian_error_table, integrate, solver_robustness_table, steps_for, CellStatus, Method,
    Reference, StepGrid,
};
use gyrolim_core::poisson::LinearPoissonSystem;
use gyrolim_core::{build_tableau, SolverConfig, SolverKind};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn oscillator(omega: f64) -> LinearPoissonSystem {
    let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let q = DMatrix::from_row_slice(2, 2, &[omega * omega, 0.0, 0.0, 1.0]);
    LinearPoissonSystem::new(s, q).unwrap()
}

fn tight() -> SolverConfig {
    SolverConfig {
        tol: 1e-15,
        max_iters: 500,
        ..SolverConfig::default()
    }
}

#[test]
fn step_counts() {
    assert_eq!(steps_for(1000.0, 0.4), 2500);
    assert_eq!(steps_for(40.0, 0.4 / 64.0), 6400);
    assert_eq!(steps_for(1.0, 0.3), 4);
    assert_eq!(steps_for(0.0, 0.3), 0);
    assert_eq!(steps_for(100.0, 40.0), 3);
}

#[test]
fn sampling_keeps_first_and_last_states() {
    let sys = oscillator(1.0);
    let tab = build_tableau(2, 2, 2).unwrap();
    let rec = integrate(&sys, &[1.0, 0.0], 0.1, 10, &tab, &tight(), 3).unwrap();
    let t: Vec<f64> = rec.times.iter().map(|t| (t * 10.0).round()).collect();
    assert_eq!(t, [0.0, 3.0, 6.0, 9.0, 10.0]);
    assert_eq!(rec.stats.steps, 10);
    assert_eq!(rec.stats.per_sample.iter().sum::<u64>(), rec.stats.total_iterations);
    assert!(rec.max_abs_drift < 1e-14);

    let empty = integrate(&sys, &[1.0, 0.0], 0.1, 0, &tab, &tight(), 1).unwrap();
    assert_eq!(empty.times, [0.0]);
    assert_eq!(empty.final_state(), [1.0, 0.0]);
    assert!(integrate(&sys, &[1.0, 0.0], 0.1, 3, &tab, &tight(), 0).is_err());
}

#[test]
fn warm_start_saves_iterations() {
    let sys = oscillator(2.0);
    let tab = build_tableau(3, 3, 3).unwrap();
    let cold = integrate(&sys, &[1.0, 0.5], 0.05, 200, &tab, &tight(), 50).unwrap();
    let warm_cfg = SolverConfig {
        warm_start: true,
        ..tight()
    };
    let warm = integrate(&sys, &[1.0, 0.5], 0.05, 200, &tab, &warm_cfg, 50).unwrap();
    assert!(warm.stats.total_iterations < cold.stats.total_iterations);
    for (a, b) in warm.final_state().iter().zip(cold.final_state()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn quadratic_energy_is_exact_for_every_cell() {
    let sys = oscillator(1.5);
    let r = hamiltonian_error_table(&sys, &[1.0, 0.0], 0.3, 30.0, &[1, 2, 3], &[1, 2, 3], &tight()).unwrap();
    assert_eq!(r.cells.len(), 9);
    let order: Vec<(usize, usize)> = r.cells.iter().map(|c| (c.method.k2, c.method.s)).collect();
    let mut sorted = order.clone();
    sorted.sort();
    assert_eq!(order, sorted);
    for c in &r.cells {
        if c.method.k2 < c.method.s {
            assert_eq!(c.status, CellStatus::NotApplicable);
        } else {
            assert_eq!(c.status, CellStatus::Ok);
            assert!(c.max_energy_drift.unwrap() < 1e-13, "{}", c.method);
        }
    }
}

#[test]
fn convergence_rates_on_the_oscillator() {
    let sys = oscillator(1.0);
    let methods = [Method::lim(1, 3), Method::lim(2, 4)];
    let reference = Reference {
        method: Method::lim(4, 6),
        h: 0.5 / 64.0,
    };
    let r = convergence_table(&sys, &[1.0, 0.0], 0.5, 3, 10.0, &methods, reference, &tight()).unwrap();
    for m in methods {
        let rates: Vec<f64> = r.cells.iter().filter(|c| c.method == m).filter_map(|c| c.empirical_rate).collect();
        assert_eq!(rates.len(), 3);
        let last = *rates.last().unwrap();
        assert!((last - 2.0 * m.s as f64).abs() < 0.2, "{m}: {rates:?}");
    }
}

#[test]
fn blended_outlasts_fixed_point_on_a_stiff_oscillator() {
    let sys = oscillator(50.0);
    let grid = StepGrid {
        h_min: 1e-3,
        ratio: 2.0,
        count: 10,
    };
    let cfg = SolverConfig {
        tol: 1e-12,
        max_iters: 500,
        ..SolverConfig::default()
    };
    let kinds = [SolverKind::FixedPoint, SolverKind::Blended];
    let r = solver_robustness_table(&sys, &[0.01, 0.0], 1.0, &[Method::lim(1, 2)], &kinds, grid, &cfg).unwrap();
    let h = |k| r.cells.iter().find(|c| c.solver == k).unwrap().h.unwrap();
    assert!(h(SolverKind::FixedPoint) < 0.04);
    assert_eq!(h(SolverKind::Blended), grid.at(grid.count - 1));

    let coarse = StepGrid {
        h_min: 0.5,
        ratio: 2.0,
        count: 3,
    };
    let r = solver_robustness_table(&sys, &[0.01, 0.0], 1.0, &[Method::lim(1, 2)], &kinds[..1], coarse, &cfg).unwrap();
    assert_eq!(r.cells[0].status, CellStatus::BelowGridMinimum);
}

proptest! {
    #[test]
    fn step_count_covers_the_interval(t in 1e-3f64..1e4, h in 1e-3f64..10.0) {
        let n = steps_for(t, h);
        prop_assert!(n as f64 * h >= t * (1.0 - 1e-9));
        prop_assert!((n as f64 - 1.0) * h < t);
    }
}

#[test]
fn more_gradient_nodes_never_increase_the_drift() {
    let mut cfg = gyrolim::config::RunConfig::default();
    cfg.sweep.s_list = Some(vec![1, 2, 3]);
    cfg.sweep.k_list = Some((1..=10).collect());
    let (r, _) = gyrolim::commands::compute_sweep(&cfg, Some(gyrolim::harness::TableKind::Energy)).unwrap();
    for s in 1..=3 {
        let drift: Vec<f64> = (s..=10)
            .map(|k| r.find(|c| c.method == Method::lim(s, k)).unwrap().max_energy_drift.unwrap())
            .collect();
        for w in drift.windows(2) {
            assert!(w[1] <= w[0] + 1e-13, "s={s}: {drift:?}");
        }
    }
}
