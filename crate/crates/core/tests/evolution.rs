use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slipflow::corrector::RitzBasis;
use slipflow::evolution::*;
use slipflow::interaction::{InteractionMode, QuadratureConfig};
use slipflow::{pt, DislocationConfig, Geometry, Material, Point, ScalingSchedule};

fn freespace() -> EnergyContext {
    EnergyContext::freespace(Geometry::unit_square(), Material::unit()).unwrap()
}

fn grid(t0: f64, t1: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| t0 + (t1 - t0) * k as f64 / steps as f64).collect()
}

fn cfg(points: Vec<Point>) -> DislocationConfig {
    DislocationConfig::new(points, ScalingSchedule::default()).unwrap()
}

#[test]
fn zero_loading_gives_a_constant_trace() {
    let ctx = freespace();
    let load = LoadingProgram::uniform_shear(SigmaProfile::constant(0.0), 1.0);
    let init = cfg(vec![pt(0.35, 0.4), pt(0.65, 0.6)]);
    let init = relax(&init, 0.0, &load, &SolverConfig::default(), &ctx).unwrap();
    let trace = run_quasistatic(&init, &grid(0.0, 1.0, 10), &load, &SolverConfig::default(), &ctx).unwrap();
    assert!(trace.configs.iter().all(|c| c.points() == init.points()));
    assert!(trace.step_d.iter().all(|&d| d == 0.0));
    assert_eq!(energy_balance_residual(&trace, &load), 0.0);
}

#[test]
fn unstable_start_is_rejected() {
    let ctx = freespace();
    let load = LoadingProgram::uniform_shear(SigmaProfile::constant(1.5), 1.0);
    let r = run_quasistatic(&cfg(vec![pt(0.5, 0.5)]), &grid(0.0, 1.0, 4), &load, &SolverConfig::default(), &ctx);
    assert!(matches!(r, Err(slipflow::Error::Unstable { .. })));
}

#[test]
fn ramp_holds_then_jumps_to_the_edge() {
    let ctx = freespace();
    let load = LoadingProgram::uniform_shear(SigmaProfile::ramp(1.0, 2.0), 2.0);
    let times = grid(0.0, 2.0, 200);
    let trace = run_quasistatic(&cfg(vec![pt(0.5, 0.5)]), &times, &load, &SolverConfig::default(), &ctx).unwrap();
    for (k, c) in trace.configs.iter().enumerate() {
        let x = c.points()[0].x;
        if times[k] <= 1.0 {
            assert_eq!(x, 0.5, "moved at t = {}", times[k]);
        } else {
            assert_eq!(x, 0.75, "not at the edge at t = {}", times[k]);
        }
    }
    assert!(flow_rule_residual(&trace, &ctx, 1e-12) < 1e-12);
    assert!(minimality_violation(&trace, &load) <= 1e-12);
}

#[test]
fn energy_balance_error_is_first_order() {
    let ctx = freespace();
    let load = LoadingProgram::uniform_shear(SigmaProfile::ramp(1.0, 2.0), 2.0);
    let init = cfg(vec![pt(0.5, 0.5)]);
    let run = |steps| {
        let t = run_quasistatic(&init, &grid(0.0, 2.0, steps), &load, &SolverConfig::default(), &ctx).unwrap();
        energy_balance_residual(&t, &load)
    };
    let (coarse, fine) = (run(200), run(400));
    assert!(coarse <= 0.05 && fine <= 0.55 * coarse, "{coarse} {fine}");
}

#[test]
fn rate_independence() {
    let ctx = freespace();
    let solver = SolverConfig::default();
    let init = cfg(vec![pt(0.4, 0.5), pt(0.6, 0.5), pt(0.5, 0.3)]);
    let a = LoadingProgram::uniform_shear(SigmaProfile::ramp(1.0, 2.0), 2.0);
    let b = LoadingProgram::uniform_shear(SigmaProfile::ramp(2.0, 1.0), 1.0);
    let ta = run_quasistatic(&init, &grid(0.0, 2.0, 40), &a, &solver, &ctx).unwrap();
    let tb = run_quasistatic(&init, &grid(0.0, 1.0, 40), &b, &solver, &ctx).unwrap();
    for (p, q) in ta.configs.iter().zip(&tb.configs) {
        for (u, v) in p.points().iter().zip(q.points()) {
            assert!((u - v).norm() <= 1e-12);
        }
    }
}

#[test]
fn pair_spreads_to_unit_force() {
    let ctx = freespace();
    let load = LoadingProgram::uniform_shear(SigmaProfile::constant(0.0), 1.0);
    let sched = ScalingSchedule::new(0.01, 1.5, 1.0, 6.0).unwrap();
    let init = DislocationConfig::new(vec![pt(0.475, 0.5), pt(0.525, 0.5)], sched).unwrap();
    let out = incremental_step(&init, 0.0, &load, &SolverConfig::default(), &ctx).unwrap();
    let s = out.points()[1].x - out.points()[0].x;
    assert!((s - 1.0 / (3.0 * PI)).abs() <= 0.02 / (3.0 * PI), "separation {s}");
    assert!(stability_residual(&out, 0.0, &load, &ctx).unwrap() <= 1e-6);
}

#[test]
fn bounded_force_matches_energy_differences() {
    let ctx = EnergyContext::new(
        InteractionMode::Bounded,
        Geometry::unit_square(),
        Material::unit(),
        QuadratureConfig::default(),
        RitzBasis::new(6).unwrap(),
    )
    .unwrap();
    let load = LoadingProgram::uniform_shear(SigmaProfile::constant(0.0), 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-5 * 2f64.sqrt() * 0.5;
    for _ in 0..20 {
        let pts: Vec<Point> = (0..3).map(|_| pt(rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7))).collect();
        let c = cfg(pts.clone());
        if c.closest_pair().unwrap().2 < 0.05 {
            continue;
        }
        let f = driving_force(&c, 0.0, &load, &ctx).unwrap().forces;
        for i in 0..3 {
            let shifted = |d: f64| {
                let mut p = pts.clone();
                p[i].x += d;
                3.0 * ctx.energy(&cfg(p)).unwrap()
            };
            let fd = -(shifted(h) - shifted(-h)) / (2.0 * h);
            assert!((f[i] - fd).abs() < 1e-5 * (1.0 + fd.abs()), "{} vs {fd}", f[i]);
        }
    }
}

#[test]
fn overfull_plane_is_infeasible() {
    let ctx = freespace();
    let sched = ScalingSchedule::new(2.0, 1.5, 1.0, 6.0).unwrap();
    let pts: Vec<Point> = (0..4).map(|k| pt(0.25 + 0.5 * k as f64 / 3.0, 0.5)).collect();
    let c = DislocationConfig::new(pts, sched).unwrap();
    let load = LoadingProgram::uniform_shear(SigmaProfile::constant(0.0), 1.0);
    let r = incremental_step(&c, 0.0, &load, &SolverConfig::default(), &ctx);
    assert!(matches!(r, Err(slipflow::Error::Infeasible(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn trace_invariants(seed in 0u64..1000, sigma in 0.5f64..3.0) {
        let ctx = freespace();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ys = [0.375, 0.5, 0.625];
        let pts: Vec<Point> = (0..6).map(|k| pt(0.3 + 0.4 * rng.gen::<f64>(), ys[k % 3])).collect();
        let init = cfg(pts);
        prop_assume!(init.validate(&ctx.geom).is_ok());
        let zero = LoadingProgram::uniform_shear(SigmaProfile::constant(0.0), 1.0);
        let solver = SolverConfig { restarts: 1, ..SolverConfig::default() };
        let init = relax(&init, 0.0, &zero, &solver, &ctx).unwrap();
        let load = LoadingProgram::uniform_shear(SigmaProfile::ramp(sigma, 1.0), 1.0);
        let times = grid(0.0, 1.0, 8);
        let trace = run_quasistatic(&init, &times, &load, &solver, &ctx).unwrap();
        for (k, c) in trace.configs.iter().enumerate() {
            for (p, q) in c.points().iter().zip(init.points()) {
                prop_assert_eq!(p.y.to_bits(), q.y.to_bits());
            }
            prop_assert!(c.validate(&ctx.geom).is_ok());
            prop_assert!(stability_residual(c, times[k], &load, &ctx).unwrap() <= solver.sweep_tol);
        }
        prop_assert!(minimality_violation(&trace, &load) <= 1e-10);
    }

    #[test]
    fn monotone_loading_moves_single_dislocation_forward(x in 0.3f64..0.7, rate in 0.5f64..4.0) {
        let ctx = freespace();
        let load = LoadingProgram::uniform_shear(SigmaProfile::ramp(rate, 1.0), 1.0);
        let trace = run_quasistatic(&cfg(vec![pt(x, 0.5)]), &grid(0.0, 1.0, 16), &load, &SolverConfig::default(), &ctx).unwrap();
        for w in trace.configs.windows(2) {
            prop_assert!(w[1].points()[0].x >= w[0].points()[0].x);
        }
    }
}
