//! Ritz minimisation of the boundary-corrector functional
//!
//! `I_μ(v) = ½ ∫_Ω C∇v : ∇v + ∫_∂Ω T_μ · v`,  `T_μ(x) = ∫ C K(x;y)ν(x) dμ(y)`,
//!
//! over tensor Legendre polynomials, with the gauge `∫_B v = 0`,
//! `∫_B (∂₁v₂ - ∂₂v₁) = 0` imposed by Lagrange multipliers.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use crate::interaction::{continuum_fields, interaction_sum, InteractionEngine, InteractionMode, QuadratureConfig};
use crate::measure::CellMeasure;
use crate::quadrature::{legendre_table, GaussLegendre};
use crate::{DislocationConfig, Error, Geometry, Material, Matrix2, Point, Rect, Result};

/// Tensor Legendre polynomials `P_a(ξ) P_b(η)`, `a, b ≤ degree`, per component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RitzBasis {
    degree: usize,
}

impl Default for RitzBasis {
    fn default() -> Self {
        Self { degree: 8 }
    }
}

impl RitzBasis {
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidParameter("Ritz degree must be at least 1".into()));
        }
        Ok(Self { degree })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Scalar polynomials per component.
    pub fn scalar_len(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }

    pub fn len(&self) -> usize {
        2 * self.scalar_len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Values and gradients of the scalar polynomials at `x`.
    fn scalar_eval(&self, omega: &Rect, x: &Point) -> (Vec<f64>, Vec<Point>) {
        let d = self.degree;
        let sx = 2.0 / omega.width();
        let sy = 2.0 / omega.height();
        let xi = (x.x - omega.x0) * sx - 1.0;
        let eta = (x.y - omega.y0) * sy - 1.0;
        let (px, dpx) = legendre_table(d, xi);
        let (py, dpy) = legendre_table(d, eta);
        let mut val = Vec::with_capacity(self.scalar_len());
        let mut grad = Vec::with_capacity(self.scalar_len());
        for a in 0..=d {
            for b in 0..=d {
                val.push(px[a] * py[b]);
                grad.push(Point::new(dpx[a] * sx * py[b], px[a] * dpy[b] * sy));
            }
        }
        (val, grad)
    }
}

/// Minimiser of the corrector functional in the Ritz space.
#[derive(Debug, Clone)]
pub struct CorrectorSolution {
    pub coefficients: DVector<f64>,
    /// `I_μ(v_μ)`.
    pub energy: f64,
    /// `∫_∂Ω T_μ · v_μ`.
    pub boundary_term: f64,
    /// Largest absolute gauge constraint value.
    pub gauge_residual: f64,
}

/// Factorised Ritz system for one geometry, material and basis. Loads for
/// different measures reuse the factorisation.
#[derive(Debug, Clone)]
pub struct CorrectorSolver {
    pub basis: RitzBasis,
    pub omega: Rect,
    pub mat: Material,
    pub engine: InteractionEngine,
    stiffness: DMatrix<f64>,
    constraints: DMatrix<f64>,
    /// Basis values at the boundary nodes, `K × 2Q`.
    boundary_values: DMatrix<f64>,
    /// `c = -response · L` solves the constrained problem.
    response: DMatrix<f64>,
}

impl CorrectorSolver {
    pub fn new(geom: &Geometry, mat: &Material, basis: RitzBasis, q: &QuadratureConfig) -> Result<Self> {
        let engine = InteractionEngine::new(geom, mat, q)?;
        let omega = geom.omega;
        let k = basis.len();
        let ks = basis.scalar_len();

        let g = GaussLegendre::new(basis.degree + 2);
        let mut stiffness = DMatrix::<f64>::zeros(k, k);
        let (l, mu) = (mat.lambda(), mat.mu());
        for (x, wx) in g.mapped(omega.x0, omega.x1) {
            for (y, wy) in g.mapped(omega.y0, omega.y1) {
                let w = wx * wy;
                let (_, grad) = basis.scalar_eval(&omega, &Point::new(x, y));
                // v = φ_s e_c: ∇v has row c equal to ∇φ_s
                for c in 0..2 {
                    for d in 0..2 {
                        for s in 0..ks {
                            let gs = grad[s];
                            for t in 0..ks {
                                let gt = grad[t];
                                // C(e_c ⊗ gs) : (e_d ⊗ gt)
                                let tr = l * gs[c] * gt[d];
                                let sym = if c == d {
                                    mu * (gs.dot(&gt) + gs[c] * gt[d])
                                } else {
                                    mu * gs[d] * gt[c]
                                };
                                stiffness[(c * ks + s, d * ks + t)] += w * (tr + sym);
                            }
                        }
                    }
                }
            }
        }

        let constraints = gauge_matrix(&basis, &omega, geom);
        let m = engine.rule.len();
        let mut boundary_values = DMatrix::<f64>::zeros(k, 2 * m);
        for (qi, x) in engine.rule.points.iter().enumerate() {
            let (val, _) = basis.scalar_eval(&omega, x);
            for s in 0..ks {
                boundary_values[(s, 2 * qi)] = val[s];
                boundary_values[(ks + s, 2 * qi + 1)] = val[s];
            }
        }

        let nc = constraints.nrows();
        let mut kkt = DMatrix::<f64>::zeros(k + nc, k + nc);
        kkt.view_mut((0, 0), (k, k)).copy_from(&stiffness);
        kkt.view_mut((k, 0), (nc, k)).copy_from(&constraints);
        kkt.view_mut((0, k), (k, nc)).copy_from(&constraints.transpose());
        let inv = kkt
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::SingularSystem(format!("Ritz KKT system of size {}", k + nc)))?;
        let check = (&kkt * &inv - DMatrix::<f64>::identity(k + nc, k + nc)).amax();
        if !(check < 1e-6) {
            return Err(Error::SingularSystem(format!("Ritz KKT system is ill-conditioned (residual {check:e})")));
        }
        let mut response = inv.view((0, 0), (k, k)).into_owned();
        response = (&response + response.transpose()) * 0.5;
        Ok(Self { basis, omega, mat: *mat, engine, stiffness, constraints, boundary_values, response })
    }

    /// Load vector `L_k = Σ_q w_q T(x_q) · φ_k(x_q)` from weighted tractions.
    pub fn load(&self, weighted_traction: &[Point]) -> DVector<f64> {
        let t = DVector::from_iterator(2 * weighted_traction.len(), weighted_traction.iter().flat_map(|p| [p.x, p.y]));
        &self.boundary_values * t
    }

    /// Load of a single unit source at `y`.
    pub fn point_load(&self, y: &Point) -> DVector<f64> {
        self.load(&self.engine.source(y).weighted_traction)
    }

    /// `I_μ(v_μ) = -½ Lᵀ S L` without forming the coefficients.
    pub fn energy_of_load(&self, load: &DVector<f64>) -> f64 {
        -0.5 * load.dot(&(&self.response * load))
    }

    /// Directional derivative `-Lᵀ S dL` of the energy at `load`.
    pub fn energy_derivative(&self, load: &DVector<f64>, dload: &DVector<f64>) -> f64 {
        -load.dot(&(&self.response * dload))
    }

    pub fn solve_load(&self, load: &DVector<f64>) -> CorrectorSolution {
        let coefficients = -(&self.response * load);
        let boundary_term = load.dot(&coefficients);
        let gauge_residual = (&self.constraints * &coefficients).amax();
        CorrectorSolution { energy: 0.5 * boundary_term, boundary_term, gauge_residual, coefficients }
    }

    /// `I(v) = ½ cᵀ A c + Lᵀ c` for arbitrary coefficients.
    pub fn functional(&self, coefficients: &DVector<f64>, load: &DVector<f64>) -> f64 {
        0.5 * coefficients.dot(&(&self.stiffness * coefficients)) + load.dot(coefficients)
    }

    /// Gauge constraint values `(∫_B v₁, ∫_B v₂, ∫_B curl v)`.
    pub fn gauge(&self, coefficients: &DVector<f64>) -> DVector<f64> {
        &self.constraints * coefficients
    }

    pub fn eval(&self, coefficients: &DVector<f64>, x: &Point) -> Point {
        let ks = self.basis.scalar_len();
        let (val, _) = self.basis.scalar_eval(&self.omega, x);
        let mut out = Point::zeros();
        for s in 0..ks {
            out.x += coefficients[s] * val[s];
            out.y += coefficients[ks + s] * val[s];
        }
        out
    }

    pub fn eval_grad(&self, coefficients: &DVector<f64>, x: &Point) -> Matrix2 {
        let ks = self.basis.scalar_len();
        let (_, grad) = self.basis.scalar_eval(&self.omega, x);
        let mut out = Matrix2::zeros();
        for s in 0..ks {
            for c in 0..2 {
                let a = coefficients[c * ks + s];
                out[(c, 0)] += a * grad[s].x;
                out[(c, 1)] += a * grad[s].y;
            }
        }
        out
    }

    /// Load of the empirical measure of `cfg`.
    pub fn config_load(&self, cfg: &DislocationConfig) -> DVector<f64> {
        let n = cfg.n() as f64;
        let mut acc = DVector::<f64>::zeros(self.basis.len());
        for p in cfg.canonical_points() {
            acc += self.point_load(&p);
        }
        acc / n
    }

    /// Load of a piecewise-constant density.
    pub fn cell_load(&self, density: &CellMeasure, ell: f64) -> DVector<f64> {
        let nodes = density.quadrature(0.25 * ell, 8);
        self.load(&continuum_fields(&self.engine, &nodes).weighted_traction)
    }
}

/// Rows `∫_B φ_k e₁`, `∫_B φ_k e₂`, `∫_B (∂₁v₂ - ∂₂v₁)` by polar quadrature,
/// exact for the polynomial basis.
fn gauge_matrix(basis: &RitzBasis, omega: &Rect, geom: &Geometry) -> DMatrix<f64> {
    let ks = basis.scalar_len();
    let mut c = DMatrix::<f64>::zeros(3, basis.len());
    let b = &geom.ball;
    let gr = GaussLegendre::new(basis.degree + 2);
    let nt = 2 * basis.degree + 4;
    for (r, wr) in gr.mapped(0.0, b.radius) {
        for j in 0..nt {
            let th = 2.0 * PI * j as f64 / nt as f64;
            let x = b.center + Point::new(th.cos(), th.sin()) * r;
            let w = wr * r * 2.0 * PI / nt as f64;
            let (val, grad) = basis.scalar_eval(omega, &x);
            for s in 0..ks {
                c[(0, s)] += w * val[s];
                c[(1, ks + s)] += w * val[s];
                c[(2, ks + s)] += w * grad[s].x;
                c[(2, s)] -= w * grad[s].y;
            }
        }
    }
    c
}

/// What the corrector is solved for.
#[derive(Debug, Clone, Copy)]
pub enum CorrectorSource<'a> {
    Config(&'a DislocationConfig),
    Cells(&'a CellMeasure),
}

fn check_margin(geom: &Geometry, pts: impl Iterator<Item = Point>) -> Result<()> {
    for (index, p) in pts.enumerate() {
        if geom.omega.dist_to_boundary(&p) < geom.ell * (1.0 - 1e-12) || !geom.omega.contains(&p, 0.0) {
            return Err(Error::OutsideConfinement { index, x: p.x, y: p.y });
        }
    }
    Ok(())
}

/// Solves the corrector problem for a configuration or a cell density.
pub fn solve_corrector(
    source: CorrectorSource<'_>,
    geom: &Geometry,
    mat: &Material,
    basis: RitzBasis,
    q: &QuadratureConfig,
) -> Result<CorrectorSolution> {
    let solver = CorrectorSolver::new(geom, mat, basis, q)?;
    let load = match source {
        CorrectorSource::Config(cfg) => {
            check_margin(geom, cfg.points().iter().copied())?;
            solver.config_load(cfg)
        }
        CorrectorSource::Cells(d) => {
            check_margin(
                geom,
                d.cells.iter().filter(|c| c.mass > 0.0).flat_map(|c| c.rect.corners()),
            )?;
            solver.cell_load(d, geom.ell)
        }
    };
    Ok(solver.solve_load(&load))
}

/// Interaction sum plus, in bounded mode, the corrector energy.
pub fn total_energy(
    cfg: &DislocationConfig,
    mode: InteractionMode,
    geom: &Geometry,
    mat: &Material,
    basis: RitzBasis,
    q: &QuadratureConfig,
) -> Result<f64> {
    let pair = interaction_sum(cfg, mode, geom, mat, q)?;
    match mode {
        InteractionMode::Freespace => Ok(pair),
        InteractionMode::Bounded => {
            Ok(pair + solve_corrector(CorrectorSource::Config(cfg), geom, mat, basis, q)?.energy)
        }
    }
}
