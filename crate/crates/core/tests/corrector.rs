use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slipflow::corrector::*;
use slipflow::interaction::{InteractionMode, QuadratureConfig};
use slipflow::{pt, DislocationConfig, Geometry, Material, Point, ScalingSchedule};

fn three() -> DislocationConfig {
    DislocationConfig::new(vec![pt(0.3, 0.4), pt(0.6, 0.6), pt(0.7, 0.3)], ScalingSchedule::default()).unwrap()
}

#[test]
fn enrichment_lowers_the_energy() {
    let g = Geometry::unit_square();
    let q = QuadratureConfig::default();
    let mut last = 0.0;
    for d in [2, 4, 6, 8] {
        let s = solve_corrector(CorrectorSource::Config(&three()), &g, &Material::unit(), RitzBasis::new(d).unwrap(), &q).unwrap();
        assert!(s.energy <= last + 1e-12, "degree {d}: {} > {last}", s.energy);
        assert!(s.gauge_residual <= 1e-10);
        assert!((s.energy - 0.5 * s.boundary_term).abs() <= 1e-8);
        last = s.energy;
    }
}

#[test]
fn single_dislocation_energy_is_non_positive() {
    let g = Geometry::unit_square();
    let q = QuadratureConfig::default();
    let cfg = DislocationConfig::new(vec![pt(0.5, 0.5)], ScalingSchedule::default()).unwrap();
    let b = RitzBasis::default();
    assert_eq!(total_energy(&cfg, InteractionMode::Freespace, &g, &Material::unit(), b, &q).unwrap(), 0.0);
    let e = total_energy(&cfg, InteractionMode::Bounded, &g, &Material::unit(), b, &q).unwrap();
    assert!(e < 0.0);
}

#[test]
fn total_energy_is_bounded_below() {
    let g = Geometry::unit_square();
    let q = QuadratureConfig::default();
    let m = Material::unit();
    let solver = CorrectorSolver::new(&g, &m, RitzBasis::default(), &q).unwrap();
    // coarse sweep oracle for the uniform constant: all pairs of a 5x5 lattice in the confinement
    let lattice: Vec<Point> = (0..5).flat_map(|i| (0..5).map(move |j| pt(0.25 + 0.125 * i as f64, 0.25 + 0.125 * j as f64))).collect();
    let mut c_uniform: f64 = 0.0;
    for a in &lattice {
        for b in &lattice {
            if a != b {
                let cfg = DislocationConfig::new(vec![*a, *b], ScalingSchedule::default()).unwrap();
                let e = total_energy(&cfg, InteractionMode::Bounded, &g, &m, RitzBasis::default(), &q).unwrap();
                c_uniform = c_uniform.max(-e);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let n = rng.gen_range(1..6);
        let p: Vec<Point> = (0..n).map(|_| pt(rng.gen_range(0.25..0.75), rng.gen_range(0.25..0.75))).collect();
        let cfg = DislocationConfig::new(p, ScalingSchedule::default()).unwrap();
        let pair = slipflow::interaction::interaction_sum(&cfg, InteractionMode::Bounded, &g, &m, &q).unwrap();
        let e = pair + solver.energy_of_load(&solver.config_load(&cfg));
        assert!(e >= -1.5 * c_uniform - 1e-12, "{e} below -{c_uniform}");
    }
}
