use proptest::prelude::*;
use slipflow::kernels::*;
use slipflow::{pt, Material};

proptest! {
    #[test]
    fn strain_is_homogeneous_of_degree_minus_one(
        x in -2.0f64..2.0, y in -2.0f64..2.0, s in 0.01f64..100.0, l in 0.0f64..3.0, m in 0.1f64..3.0,
    ) {
        prop_assume!(x.hypot(y) > 1e-3);
        let mat = Material::new(l, m).unwrap();
        let k = strain_k(&pt(x, y), &mat);
        let ks = strain_k(&pt(s * x, s * y), &mat);
        prop_assert!((ks * s - k).norm() <= 1e-12 * k.norm());
    }

    #[test]
    fn stream_function_reproduces_the_first_stress_row(x in -2.0f64..2.0, y in -2.0f64..2.0) {
        prop_assume!(x.hypot(y) > 1e-2);
        let mat = Material::new(0.7, 1.3).unwrap();
        let g = grad_psi(&pt(x, y), &mat);
        let s = stress_k(&pt(x, y), &mat);
        prop_assert!((s[(0, 0)] - g.y).abs() <= 1e-12 * s.norm());
        prop_assert!((s[(0, 1)] + g.x).abs() <= 1e-12 * s.norm());
    }
}

#[test]
fn circulation_of_the_core_field_is_the_burgers_vector() {
    let mat = Material::new(1.5, 0.5).unwrap();
    let z = pt(0.3, 0.7);
    let core = CoreRadius::new(1e-3).unwrap();
    for r in [1e-3, 0.02, 0.3] {
        let c = circulation(&z, r, |x| eval_kn(x, &z, core, &mat), 512).unwrap();
        assert!((c - pt(1.0, 0.0)).norm() < 1e-8);
    }
}
