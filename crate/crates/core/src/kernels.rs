//! Single-dislocation strain fields `K`, `Kⁿ` and related closed forms.
//!
//! All fields are written in terms of the offset `p = x - z` between the
//! evaluation point and the dislocation. The Burgers vector is `e₁`.

use std::f64::consts::PI;

use crate::{Error, Material, Matrix2, Point, Result};

/// Offsets shorter than this are treated as coincident with the source.
pub const SINGULAR_GUARD: f64 = 1e-12;

/// Core cut-off radius ε around each dislocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoreRadius(f64);

impl CoreRadius {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::NonPositiveRadius(eps));
        }
        Ok(Self(eps))
    }

    /// ε = 0, only useful to check that `Kⁿ` collapses onto `K`.
    pub fn zero() -> Self {
        Self(0.0)
    }

    pub fn eps(&self) -> f64 {
        self.0
    }
}

fn guard(x: &Point, z: &Point) -> Result<Point> {
    let p = x - z;
    if p.norm() < SINGULAR_GUARD {
        Err(Error::CoincidentPoints(z.x, z.y))
    } else {
        Ok(p)
    }
}

/// Correction displacement `v(p)` of the single-dislocation field.
pub fn correction_v(p: &Point, mat: &Material) -> Point {
    let (l, m) = (mat.lambda(), mat.mu());
    let r2 = p.norm_squared();
    let a = (l + m) / (4.0 * PI * (l + 2.0 * m) * r2);
    let b = m / (2.0 * PI * (l + 2.0 * m));
    Point::new(a * 2.0 * p.x * p.y, a * (p.y * p.y - p.x * p.x) - b * 0.5 * r2.ln())
}

/// Gradient `∇v(p)`, row = component, column = derivative.
pub fn grad_v(p: &Point, mat: &Material) -> Matrix2 {
    let (l, m) = (mat.lambda(), mat.mu());
    let (x, y) = (p.x, p.y);
    let r2 = x * x + y * y;
    let s = 1.0 / (2.0 * PI * (l + 2.0 * m) * r2 * r2);
    let d = x * x - y * y;
    Matrix2::new(
        -y * (l + m) * d * s,
        x * (l + m) * d * s,
        -x * (2.0 * l * y * y + m * x * x + 3.0 * m * y * y) * s,
        y * (2.0 * l * x * x + m * x * x - m * y * y) * s,
    )
}

/// Core correction `w(p)`, normalised so that `C Kⁿ ν` vanishes on `∂B_ε`.
pub fn core_w(p: &Point, mat: &Material) -> Point {
    let (l, m) = (mat.lambda(), mat.mu());
    let r2 = p.norm_squared();
    let a = (l + m) / (4.0 * PI * (l + 2.0 * m) * r2 * r2);
    Point::new(-a * 2.0 * p.x * p.y, a * (p.x * p.x - p.y * p.y))
}

/// Gradient `∇w(p)`.
pub fn grad_w(p: &Point, mat: &Material) -> Matrix2 {
    let (l, m) = (mat.lambda(), mat.mu());
    let (x, y) = (p.x, p.y);
    let r2 = x * x + y * y;
    let s = (l + m) / (2.0 * PI * (l + 2.0 * m) * r2 * r2 * r2);
    let a = y * (3.0 * x * x - y * y) * s;
    let b = x * (x * x - 3.0 * y * y) * s;
    Matrix2::new(a, -b, -b, -a)
}

/// `K` at offset `p` (no singularity guard).
pub fn strain_k(p: &Point, mat: &Material) -> Matrix2 {
    let r2 = p.norm_squared();
    let s = 1.0 / (2.0 * PI * r2);
    Matrix2::new(-p.y * s, p.x * s, 0.0, 0.0) + grad_v(p, mat)
}

/// `C K` at offset `p` in closed form.
pub fn stress_k(p: &Point, mat: &Material) -> Matrix2 {
    let c = mat.log_coefficient();
    let (x, y) = (p.x, p.y);
    let r2 = x * x + y * y;
    let s = c / (r2 * r2);
    let d = x * x - y * y;
    let s12 = x * d * s;
    Matrix2::new(-y * (3.0 * x * x + y * y) * s, s12, s12, y * d * s)
}

/// `∂/∂p₁` of [`stress_k`].
pub fn stress_k_dx1(p: &Point, mat: &Material) -> Matrix2 {
    let c = mat.log_coefficient();
    let (x, y) = (p.x, p.y);
    let r2 = x * x + y * y;
    let s = c / (r2 * r2 * r2);
    let d = x * x - y * y;
    let s12 = -(d * d - 4.0 * x * x * y * y) * s;
    Matrix2::new(
        2.0 * x * y * (3.0 * x * x - y * y) * s,
        s12,
        s12,
        -2.0 * x * y * (x * x - 3.0 * y * y) * s,
    )
}

/// Stream function of the first row of `C K`:
/// `(C K)₁₁ = ∂₂ψ`, `(C K)₁₂ = -∂₁ψ`.
pub fn stream_psi(p: &Point, mat: &Material) -> f64 {
    let r2 = p.norm_squared();
    mat.log_coefficient() * (p.x * p.x / r2 - 0.5 * r2.ln())
}

/// Gradient of [`stream_psi`].
pub fn grad_psi(p: &Point, mat: &Material) -> Point {
    let c = mat.log_coefficient();
    let (x, y) = (p.x, p.y);
    let r2 = x * x + y * y;
    let s = c / (r2 * r2);
    Point::new(x * (y * y - x * x) * s, -y * (3.0 * x * x + y * y) * s)
}

/// `K(x; z)`.
pub fn eval_k(x: &Point, z: &Point, mat: &Material) -> Result<Matrix2> {
    Ok(strain_k(&guard(x, z)?, mat))
}

/// `Kⁿ(x; z) = K(x; z) + ε² ∇w(x - z)`.
pub fn eval_kn(x: &Point, z: &Point, core: CoreRadius, mat: &Material) -> Result<Matrix2> {
    let p = guard(x, z)?;
    let e2 = core.eps() * core.eps();
    Ok(strain_k(&p, mat) + grad_w(&p, mat) * e2)
}

/// Contour integral `∮_{∂B_r(z)} F τ dH¹` by the composite trapezoid rule
/// with `quad_n` nodes (τ the counter-clockwise tangent).
pub fn circulation<F>(z: &Point, r: f64, field: F, quad_n: usize) -> Result<Point>
where
    F: Fn(&Point) -> Result<Matrix2>,
{
    if !(r > 0.0) {
        return Err(Error::NonPositiveRadius(r));
    }
    if quad_n == 0 {
        return Err(Error::InvalidParameter("quad_n must be positive".into()));
    }
    let dtheta = 2.0 * PI / quad_n as f64;
    let mut acc = Point::zeros();
    for k in 0..quad_n {
        let th = dtheta * k as f64;
        let (s, c) = th.sin_cos();
        let x = z + Point::new(c, s) * r;
        let tau = Point::new(-s, c);
        acc += field(&x)? * tau;
    }
    Ok(acc * (r * dtheta))
}

/// `|div C F|` at `x` by second-order central differences with step `h`.
pub fn divergence_residual<F>(field: F, x: &Point, mat: &Material, h: f64) -> Result<f64>
where
    F: Fn(&Point) -> Result<Matrix2>,
{
    let stress = |p: Point| -> Result<Matrix2> { Ok(mat.apply_c(&field(&p)?)) };
    let e1 = Point::new(h, 0.0);
    let e2 = Point::new(0.0, h);
    let d1 = (stress(x + e1)? - stress(x - e1)?) / (2.0 * h);
    let d2 = (stress(x + e2)? - stress(x - e2)?) / (2.0 * h);
    let div = Point::new(d1[(0, 0)] + d2[(0, 1)], d1[(1, 0)] + d2[(1, 1)]);
    Ok(div.norm())
}

/// Largest traction `|C Kⁿ ν|` over `samples` points of `∂B_ε(z)`.
pub fn core_traction_max(
    z: &Point,
    radius: f64,
    core: CoreRadius,
    mat: &Material,
    samples: usize,
) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::NonPositiveRadius(radius));
    }
    let mut worst: f64 = 0.0;
    for k in 0..samples {
        let th = 2.0 * PI * k as f64 / samples as f64;
        let nu = Point::new(th.cos(), th.sin());
        let x = z + nu * radius;
        let t = mat.apply_c(&eval_kn(&x, z, core, mat)?) * nu;
        worst = worst.max(t.norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pt;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mats() -> Vec<Material> {
        vec![Material::unit(), Material::new(2.3, 0.8).unwrap(), Material::new(-0.5, 1.0).unwrap()]
    }

    fn fd_grad<F: Fn(&Point) -> Point>(f: F, p: &Point, h: f64) -> Matrix2 {
        let dx = (f(&(p + pt(h, 0.0))) - f(&(p - pt(h, 0.0)))) / (2.0 * h);
        let dy = (f(&(p + pt(0.0, h))) - f(&(p - pt(0.0, h)))) / (2.0 * h);
        Matrix2::new(dx.x, dy.x, dx.y, dy.y)
    }

    fn rel(a: &Matrix2, b: &Matrix2) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mat in mats() {
            for _ in 0..50 {
                let r = rng.gen_range(0.2..2.0);
                let th: f64 = rng.gen_range(0.0..2.0 * PI);
                let p = pt(r * th.cos(), r * th.sin());
                let gv = fd_grad(|q| correction_v(q, &mat), &p, 1e-6);
                assert!(rel(&grad_v(&p, &mat), &gv) < 1e-6);
                let gw = fd_grad(|q| core_w(q, &mat), &p, 1e-6);
                assert!(rel(&grad_w(&p, &mat), &gw) < 1e-6);
            }
        }
    }

    #[test]
    fn k_entries_at_unit_offset() {
        // independent route: FD gradient of the closed-form v plus the angular part
        let mat = Material::unit();
        let k = eval_k(&pt(1.0, 0.0), &pt(0.0, 0.0), &mat).unwrap();
        let gv = fd_grad(|q| correction_v(q, &mat), &pt(1.0, 0.0), 1e-6);
        let expected = Matrix2::new(0.0, 1.0 / (2.0 * PI), 0.0, 0.0) + gv;
        for (a, b) in k.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        // closed values: K = [[0, 1/(2π) + 2/(6π)], [-1/(6π), 0]]
        assert!((k[(0, 1)] - (1.0 / (2.0 * PI) + 1.0 / (3.0 * PI))).abs() < 1e-15);
        assert!((k[(1, 0)] + 1.0 / (6.0 * PI)).abs() < 1e-15);
        assert_eq!(k[(1, 1)], 0.0);
        assert_eq!(k[(0, 0)], 0.0);
    }

    #[test]
    fn homogeneity_degree_minus_one() {
        let mat = Material::new(0.4, 1.7).unwrap();
        let z = pt(0.3, -0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let w = pt(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let s = rng.gen_range(0.1..10.0);
            let a = eval_k(&(z + w * s), &z, &mat).unwrap();
            let b = eval_k(&(z + w), &z, &mat).unwrap() / s;
            assert!(rel(&a, &b) < 1e-12);
        }
        let a = eval_k(&(z + pt(2.0, 0.0)), &z, &mat).unwrap();
        let b = eval_k(&(z + pt(1.0, 0.0)), &z, &mat).unwrap() * 0.5;
        assert!(rel(&a, &b) < 1e-14);
    }

    #[test]
    fn closed_form_stress_matches_apply_c() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for mat in mats() {
            for _ in 0..50 {
                let p = pt(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                let direct = mat.apply_c(&strain_k(&p, &mat));
                assert!(rel(&stress_k(&p, &mat), &direct) < 1e-12);
                let h = 1e-6;
                let fd = (stress_k(&(p + pt(h, 0.0)), &mat) - stress_k(&(p - pt(h, 0.0)), &mat)) / (2.0 * h);
                assert!(rel(&stress_k_dx1(&p, &mat), &fd) < 1e-6);
            }
        }
    }

    #[test]
    fn stream_function_generates_first_stress_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mat = Material::new(1.5, 0.6).unwrap();
        for _ in 0..50 {
            let p = pt(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let g = grad_psi(&p, &mat);
            let h = 1e-6;
            let fd = pt(
                (stream_psi(&(p + pt(h, 0.0)), &mat) - stream_psi(&(p - pt(h, 0.0)), &mat)) / (2.0 * h),
                (stream_psi(&(p + pt(0.0, h)), &mat) - stream_psi(&(p - pt(0.0, h)), &mat)) / (2.0 * h),
            );
            assert!((g - fd).norm() < 1e-6 * (1.0 + g.norm()));
            let s = stress_k(&p, &mat);
            assert!((s[(0, 0)] - g.y).abs() < 1e-12 * (1.0 + g.norm()));
            assert!((s[(0, 1)] + g.x).abs() < 1e-12 * (1.0 + g.norm()));
        }
    }

    #[test]
    fn circulation_of_k_is_e1() {
        let mat = Material::unit();
        let z = pt(0.4, 0.6);
        for r in [0.05, 0.1, 0.5] {
            let c = circulation(&z, r, |x| eval_k(x, &z, &mat), 512).unwrap();
            assert!((c - pt(1.0, 0.0)).norm() < 1e-8, "r={r}: {c:?}");
        }
    }

    #[test]
    fn circulation_of_constant_vanishes() {
        let m = Matrix2::new(1.0, 2.0, 3.0, 4.0);
        let c = circulation(&pt(0.0, 0.0), 0.3, |_| Ok(m), 64).unwrap();
        assert!(c.norm() < 1e-14);
        assert!(matches!(circulation(&pt(0.0, 0.0), 0.0, |_| Ok(m), 64), Err(Error::NonPositiveRadius(_))));
    }

    #[test]
    fn circulation_of_kn_on_core() {
        let mat = Material::unit();
        let z = pt(0.0, 0.0);
        let core = CoreRadius::new(0.05).unwrap();
        let c = circulation(&z, 0.05, |x| eval_kn(x, &z, core, &mat), 256).unwrap();
        assert!((c - pt(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn divergence_free_stress() {
        let mat = Material::new(0.9, 1.2).unwrap();
        let z = pt(0.0, 0.0);
        let r = divergence_residual(|x| eval_k(x, &z, &mat), &pt(1.0, 0.0), &mat, 1e-4).unwrap();
        assert!(r <= 1e-5, "{r}");
        let core = CoreRadius::new(0.01).unwrap();
        let r = divergence_residual(|x| eval_kn(x, &z, core, &mat), &pt(0.3, 0.2), &mat, 1e-4).unwrap();
        assert!(r <= 1e-5, "{r}");
        let m = Matrix2::new(1.0, 0.5, -0.2, 3.0);
        assert_eq!(divergence_residual(|_| Ok(m), &pt(0.1, 0.1), &mat, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn core_is_traction_free() {
        for mat in mats() {
            for eps in [1e-3, 0.05, 0.3] {
                let core = CoreRadius::new(eps).unwrap();
                let t = core_traction_max(&pt(0.2, 0.1), eps, core, &mat, 64).unwrap();
                assert!(t <= 1e-8 * (1.0 + 1.0 / eps), "eps={eps}: {t}");
            }
        }
    }

    #[test]
    fn kn_reduces_to_k() {
        let mat = Material::unit();
        let z = pt(0.0, 0.0);
        let x = pt(0.3, -0.7);
        assert_eq!(eval_kn(&x, &z, CoreRadius::zero(), &mat).unwrap(), eval_k(&x, &z, &mat).unwrap());
        let x = pt(1.0, 0.0);
        let k = eval_k(&x, &z, &mat).unwrap();
        let d1 = (eval_kn(&x, &z, CoreRadius::new(1e-2).unwrap(), &mat).unwrap() - k).norm();
        let d2 = (eval_kn(&x, &z, CoreRadius::new(5e-3).unwrap(), &mat).unwrap() - k).norm();
        assert!((d1 / d2 - 4.0).abs() < 1e-9);
    }

    #[test]
    fn singular_points_are_rejected() {
        let mat = Material::unit();
        let z = pt(0.5, 0.5);
        assert!(matches!(eval_k(&z, &z, &mat), Err(Error::CoincidentPoints(..))));
        assert!(eval_kn(&(z + pt(1e-13, 0.0)), &z, CoreRadius::new(0.1).unwrap(), &mat).is_err());
    }
}
