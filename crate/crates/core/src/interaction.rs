//! The pair interaction potential `V(y, z) = ∫_Ω C K(x;y) : K(x;z) dx` on the
//! bounded domain, its free-space logarithmic reference, and the discrete and
//! continuum interaction energies.
//!
//! The default evaluation of `V` moves the area integral to `∂Ω`. Away from
//! `y` the stress `C K(·;y)` is divergence free with a stream function `ψ`,
//! and `K(·;z)` is the gradient of the multivalued displacement
//! `φ_z = e₁ θ_z / 2π + v(· - z)` cut along a segment from `z` to the corner
//! `E` of Ω where the boundary traversal starts. Integrating by parts leaves
//!
//! `V(y, z) = ∫_∂Ω C K(x;y)ν · φ_z dH¹ - ψ(E - y) + ψ(z - y)`,
//!
//! whose integrand is smooth because sources stay `ℓ` away from `∂Ω`. The
//! tensor-cell quadrature of the defining area integral is kept as an
//! independent method.

use nalgebra::DMatrix;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::geometry::BoundaryRule;
use crate::kernels::{correction_v, grad_psi, strain_k, stream_psi, stress_k, stress_k_dx1, SINGULAR_GUARD};
use crate::measure::CellMeasure;
use crate::quadrature::GaussLegendre;
use crate::{DislocationConfig, Error, Geometry, Material, Point, Rect, Result};

/// How `V` is evaluated in bounded mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VMethod {
    /// Boundary representation through the stream function (default).
    BoundaryIntegral,
    /// Tensor cells over Ω with dyadic refinement near the singularities.
    CellQuadrature,
}

/// Quadrature controls for `V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Cells per axis of the base grid (cell method).
    pub base_cells: usize,
    /// Dyadic refinement levels near `y` and `z` (cell method).
    pub singular_refine_depth: usize,
    /// Gauss points per axis on each leaf cell (cell method).
    pub leaf_order: usize,
    pub tol: f64,
    pub method: VMethod,
    /// Gauss points per boundary panel.
    pub boundary_order: usize,
    /// Longest boundary panel as a fraction of `ℓ`.
    pub boundary_panel: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            base_cells: 32,
            singular_refine_depth: 8,
            leaf_order: 3,
            tol: 1e-8,
            method: VMethod::BoundaryIntegral,
            boundary_order: 16,
            boundary_panel: 0.5,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("quadrature tolerance must be positive".into()));
        }
        if self.base_cells == 0 || self.leaf_order == 0 || self.boundary_order == 0 {
            return Err(Error::InvalidParameter("quadrature counts must be positive".into()));
        }
        if !(self.boundary_panel > 0.0) {
            return Err(Error::InvalidParameter("boundary panel fraction must be positive".into()));
        }
        Ok(())
    }

    pub fn boundary_rule(&self, geom: &Geometry) -> BoundaryRule {
        BoundaryRule::new(&geom.omega, self.boundary_panel * geom.ell, self.boundary_order)
    }
}

/// Whether energies include the bounded-domain correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionMode {
    Bounded,
    Freespace,
}

/// `-[μ(λ+μ)/(π(λ+2μ))] log|y - z|`.
pub fn v_freespace_leading(y: &Point, z: &Point, mat: &Material) -> Result<f64> {
    let r = (y - z).norm();
    if r < SINGULAR_GUARD {
        return Err(Error::CoincidentPoints(y.x, y.y));
    }
    Ok(-mat.log_coefficient() * r.ln())
}

/// `∂/∂y₁` of [`v_freespace_leading`].
pub fn v_freespace_dy1(y: &Point, z: &Point, mat: &Material) -> f64 {
    let d = y - z;
    -mat.log_coefficient() * d.x / d.norm_squared()
}

/// Boundary data of one source point: traction `C K(x_q; y)ν` premultiplied
/// by the quadrature weight, and the cut displacement `φ_y(x_q)`.
#[derive(Debug, Clone)]
pub struct SourceData {
    pub point: Point,
    pub weighted_traction: Vec<Point>,
    pub phi: Vec<Point>,
    /// `ψ(E - y)`.
    pub psi_corner: f64,
}

/// Precomputed boundary rule for evaluating `V` and its derivatives.
#[derive(Debug, Clone)]
pub struct InteractionEngine {
    pub mat: Material,
    pub rule: BoundaryRule,
}

impl InteractionEngine {
    pub fn new(geom: &Geometry, mat: &Material, q: &QuadratureConfig) -> Result<Self> {
        q.validate()?;
        Ok(Self { mat: *mat, rule: q.boundary_rule(geom) })
    }

    fn corner(&self) -> Point {
        self.rule.start
    }

    /// `C K(x_q; y) ν_q` at the boundary nodes.
    pub fn traction(&self, y: &Point) -> Vec<Point> {
        self.rule
            .points
            .iter()
            .zip(&self.rule.normals)
            .map(|(x, nu)| stress_k(&(x - y), &self.mat) * nu)
            .collect()
    }

    /// `∂/∂y₁` of [`Self::traction`].
    pub fn traction_dy1(&self, y: &Point) -> Vec<Point> {
        self.rule
            .points
            .iter()
            .zip(&self.rule.normals)
            .map(|(x, nu)| -(stress_k_dx1(&(x - y), &self.mat) * nu))
            .collect()
    }

    /// Cut displacement `φ_z` at the boundary nodes, the angle unwrapped
    /// along the traversal from the corner `E`.
    pub fn phi(&self, z: &Point) -> Vec<Point> {
        let e = self.corner() - z;
        let mut prev = e.y.atan2(e.x);
        let mut theta = prev;
        self.rule
            .points
            .iter()
            .map(|x| {
                let p = x - z;
                let ang = p.y.atan2(p.x);
                let mut d = ang - prev;
                if d > PI {
                    d -= 2.0 * PI;
                } else if d <= -PI {
                    d += 2.0 * PI;
                }
                theta += d;
                prev = ang;
                Point::new(theta / (2.0 * PI), 0.0) + correction_v(&p, &self.mat)
            })
            .collect()
    }

    pub fn source(&self, y: &Point) -> SourceData {
        let w = &self.rule.weights;
        SourceData {
            point: *y,
            weighted_traction: self.traction(y).into_iter().zip(w).map(|(t, &w)| t * w).collect(),
            phi: self.phi(y),
            psi_corner: stream_psi(&(self.corner() - y), &self.mat),
        }
    }

    /// One-sided boundary representation of `V(a, b)`.
    pub fn v_raw(&self, a: &SourceData, b: &SourceData) -> f64 {
        let s: f64 = a.weighted_traction.iter().zip(&b.phi).map(|(t, p)| t.dot(p)).sum();
        s - a.psi_corner + stream_psi(&(b.point - a.point), &self.mat)
    }

    /// Symmetrised `V(a, b)`.
    pub fn v_sources(&self, a: &SourceData, b: &SourceData) -> f64 {
        0.5 * (self.v_raw(a, b) + self.v_raw(b, a))
    }

    pub fn v(&self, y: &Point, z: &Point) -> Result<f64> {
        if (y - z).norm() < SINGULAR_GUARD {
            return Ok(f64::INFINITY);
        }
        Ok(self.v_sources(&self.source(y), &self.source(z)))
    }

    /// `∂V(y, z)/∂y₁`; `dtraction` is [`Self::traction_dy1`] of `y`
    /// premultiplied by the weights.
    pub fn dv_dy1_with(&self, y: &Point, dtraction: &[Point], b: &SourceData) -> f64 {
        let s: f64 = dtraction.iter().zip(&b.phi).map(|(t, p)| t.dot(p)).sum();
        s + grad_psi(&(self.corner() - y), &self.mat).x - grad_psi(&(b.point - y), &self.mat).x
    }

    pub fn weighted_traction_dy1(&self, y: &Point) -> Vec<Point> {
        self.traction_dy1(y).into_iter().zip(&self.rule.weights).map(|(t, &w)| t * w).collect()
    }

    pub fn dv_dy1(&self, y: &Point, z: &Point) -> f64 {
        self.dv_dy1_with(y, &self.weighted_traction_dy1(y), &self.source(z))
    }

    /// Symmetric matrix of `V(z_i, z_j)`, zero on the diagonal.
    pub fn pair_matrix(&self, points: &[Point]) -> DMatrix<f64> {
        let n = points.len();
        let m = self.rule.len();
        let sources: Vec<SourceData> = points.par_iter().map(|p| self.source(p)).collect();
        let mut tw = DMatrix::<f64>::zeros(n, 2 * m);
        let mut ph = DMatrix::<f64>::zeros(n, 2 * m);
        for (i, s) in sources.iter().enumerate() {
            for q in 0..m {
                tw[(i, 2 * q)] = s.weighted_traction[q].x;
                tw[(i, 2 * q + 1)] = s.weighted_traction[q].y;
                ph[(i, 2 * q)] = s.phi[q].x;
                ph[(i, 2 * q + 1)] = s.phi[q].y;
            }
        }
        let g = &tw * ph.transpose();
        let mut out = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let psi = stream_psi(&(points[j] - points[i]), &self.mat);
                let v = 0.5 * (g[(i, j)] + g[(j, i)] - sources[i].psi_corner - sources[j].psi_corner) + psi;
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }
}

/// `V(y, z)` on the bounded domain; `+∞` when `y = z`.
pub fn v_pair(y: &Point, z: &Point, geom: &Geometry, mat: &Material, q: &QuadratureConfig) -> Result<f64> {
    for p in [y, z] {
        if !geom.omega.contains(p, 0.0) {
            return Err(Error::InvalidParameter(format!("point ({}, {}) is outside the domain", p.x, p.y)));
        }
    }
    if (y - z).norm() < SINGULAR_GUARD {
        return Ok(f64::INFINITY);
    }
    match q.method {
        VMethod::BoundaryIntegral => InteractionEngine::new(geom, mat, q)?.v(y, z),
        VMethod::CellQuadrature => v_pair_cells(y, z, geom, mat, q),
    }
}

fn rect_distance(r: &Rect, p: &Point) -> f64 {
    let dx = (r.x0 - p.x).max(0.0).max(p.x - r.x1);
    let dy = (r.y0 - p.y).max(0.0).max(p.y - r.y1);
    dx.hypot(dy)
}

/// Area quadrature of `C K(x;y) : K(x;z)` over Ω.
pub fn v_pair_cells(y: &Point, z: &Point, geom: &Geometry, mat: &Material, q: &QuadratureConfig) -> Result<f64> {
    q.validate()?;
    let g = GaussLegendre::new(q.leaf_order);
    let om = geom.omega;
    let nb = q.base_cells;
    let hx = om.width() / nb as f64;
    let hy = om.height() / nb as f64;
    let integrand = |x: &Point| -> f64 {
        let (a, b) = (x - y, x - z);
        if a.norm() < SINGULAR_GUARD || b.norm() < SINGULAR_GUARD {
            return 0.0;
        }
        stress_k(&a, mat).component_mul(&strain_k(&b, mat)).sum()
    };
    fn cell(
        r: Rect,
        depth: usize,
        max_depth: usize,
        y: &Point,
        z: &Point,
        g: &GaussLegendre,
        f: &dyn Fn(&Point) -> f64,
    ) -> f64 {
        let w = r.width().max(r.height());
        let near = rect_distance(&r, y) < 2.0 * w || rect_distance(&r, z) < 2.0 * w;
        if near && depth < max_depth {
            let (xm, ym) = (0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1));
            let kids = [
                Rect { x0: r.x0, x1: xm, y0: r.y0, y1: ym },
                Rect { x0: xm, x1: r.x1, y0: r.y0, y1: ym },
                Rect { x0: r.x0, x1: xm, y0: ym, y1: r.y1 },
                Rect { x0: xm, x1: r.x1, y0: ym, y1: r.y1 },
            ];
            return kids.iter().map(|k| cell(*k, depth + 1, max_depth, y, z, g, f)).sum();
        }
        let mut acc = 0.0;
        for (x, wx) in g.mapped(r.x0, r.x1) {
            for (yy, wy) in g.mapped(r.y0, r.y1) {
                acc += wx * wy * f(&Point::new(x, yy));
            }
        }
        acc
    }
    let parts: Vec<f64> = (0..nb * nb)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / nb, k % nb);
            let r = Rect {
                x0: om.x0 + hx * i as f64,
                x1: if i + 1 == nb { om.x1 } else { om.x0 + hx * (i + 1) as f64 },
                y0: om.y0 + hy * j as f64,
                y1: if j + 1 == nb { om.y1 } else { om.y0 + hy * (j + 1) as f64 },
            };
            cell(r, 0, q.singular_refine_depth, y, z, &g, &integrand)
        })
        .collect();
    Ok(parts.iter().sum())
}

/// Sums `rows[i]` in index order after computing them in parallel.
fn ordered_sum<F: Fn(usize) -> f64 + Sync + Send>(n: usize, row: F) -> f64 {
    let rows: Vec<f64> = (0..n).into_par_iter().map(row).collect();
    rows.iter().sum()
}

fn check_distinct(points: &[Point]) -> Result<()> {
    for w in points.windows(2) {
        if (w[0] - w[1]).norm() < SINGULAR_GUARD {
            return Err(Error::CoincidentPoints(w[0].x, w[0].y));
        }
    }
    Ok(())
}

/// `(1/2n²) Σ_{i≠j} V(z_i, z_j)`; points are put in canonical order first so
/// the result does not depend on labelling.
pub fn interaction_sum(
    cfg: &DislocationConfig,
    mode: InteractionMode,
    geom: &Geometry,
    mat: &Material,
    q: &QuadratureConfig,
) -> Result<f64> {
    let pts = cfg.canonical_points();
    check_distinct(&pts)?;
    let n = pts.len();
    let scale = 1.0 / (2.0 * (n * n) as f64);
    if n < 2 {
        return Ok(0.0);
    }
    let total = match (mode, q.method) {
        (InteractionMode::Freespace, _) => ordered_sum(n, |i| {
            let c = mat.log_coefficient();
            (0..n).filter(|&j| j != i).map(|j| -c * (pts[i] - pts[j]).norm().ln()).sum()
        }),
        (InteractionMode::Bounded, VMethod::BoundaryIntegral) => {
            let m = InteractionEngine::new(geom, mat, q)?.pair_matrix(&pts);
            ordered_sum(n, |i| m.row(i).iter().sum())
        }
        (InteractionMode::Bounded, VMethod::CellQuadrature) => {
            let mut acc = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    acc += 2.0 * v_pair_cells(&pts[i], &pts[j], geom, mat, q)?;
                }
            }
            acc
        }
    };
    Ok(total * scale)
}

/// Fourth antiderivative of `½ log(x² + y²)`: `∂²_x ∂²_y F = ½ log(x² + y²)`.
fn f_log(x: f64, y: f64) -> f64 {
    let (x2, y2) = (x * x, y * y);
    let r2 = x2 + y2;
    if r2 == 0.0 {
        return 0.0;
    }
    let mut s = -25.0 / 48.0 * x2 * y2 + (-x2 * x2 / 48.0 + x2 * y2 / 8.0 - y2 * y2 / 48.0) * r2.ln();
    if x != 0.0 && y != 0.0 {
        s += x2 * x * y * (y / x).atan() / 6.0 + x * y2 * y * (x / y).atan() / 6.0;
    }
    s
}

/// Fourth antiderivative of `x² / (x² + y²)`.
fn f_cos2(x: f64, y: f64) -> f64 {
    let (x2, y2) = (x * x, y * y);
    let r2 = x2 + y2;
    if r2 == 0.0 {
        return 0.0;
    }
    let mut s = x2 * y2 / 8.0 + (y2 * y2 - x2 * x2) / 24.0 * r2.ln();
    if x != 0.0 && y != 0.0 {
        s += x2 * x * y * (y / x).atan() / 6.0 - x * y2 * y * (x / y).atan() / 6.0;
    }
    s
}

/// `∫_A ∫_B g(y - z) dz dy` for a function `g` of the difference with fourth
/// antiderivative `f`.
fn rect_pair<F: Fn(f64, f64) -> f64>(a: &Rect, b: &Rect, f: F) -> f64 {
    let us = [(a.x1 - b.x0, 1.0), (a.x0 - b.x0, -1.0), (a.x1 - b.x1, -1.0), (a.x0 - b.x1, 1.0)];
    let vs = [(a.y1 - b.y0, 1.0), (a.y0 - b.y0, -1.0), (a.y1 - b.y1, -1.0), (a.y0 - b.y1, 1.0)];
    let mut acc = 0.0;
    for (u, su) in us {
        for (v, sv) in vs {
            acc += su * sv * f(u, v);
        }
    }
    acc
}

/// `∫_A ∫_B ψ(z - y) dz dy` in closed form.
pub fn psi_rect_pair(a: &Rect, b: &Rect, mat: &Material) -> f64 {
    mat.log_coefficient() * (rect_pair(a, b, f_cos2) - rect_pair(a, b, f_log))
}

/// `½ ∬ V dμ dμ` for a piecewise-constant density.
pub fn continuum_interaction(density: &CellMeasure, geom: &Geometry, mat: &Material, q: &QuadratureConfig) -> Result<f64> {
    let engine = InteractionEngine::new(geom, mat, q)?;
    if let Some(b) = density_bbox(density) {
        if !geom.omega.contains_rect(&b) {
            return Err(Error::InvalidParameter("density leaves the domain".into()));
        }
    }
    let nodes = density.quadrature(0.25 * geom.ell, 8);
    let fields = continuum_fields(&engine, &nodes);
    let boundary: f64 = fields.weighted_traction.iter().zip(&fields.phi).map(|(t, p)| t.dot(p)).sum();
    let mass: f64 = density.cells.iter().map(|c| c.mass).sum();
    let corner = fields.psi_corner * mass;
    let cells: Vec<_> = density.cells.iter().filter(|c| c.mass > 0.0).collect();
    let near = ordered_sum(cells.len(), |i| {
        cells
            .iter()
            .map(|cj| cells[i].density() * cj.density() * psi_rect_pair(&cells[i].rect, &cj.rect, mat))
            .sum()
    });
    Ok(0.5 * (boundary - corner + near))
}

/// `½ ∬ -c log|y - z| dμ dμ` for a piecewise-constant density, in closed form.
pub fn continuum_freespace(density: &CellMeasure, mat: &Material) -> f64 {
    let cells: Vec<_> = density.cells.iter().filter(|c| c.mass > 0.0).collect();
    let total = ordered_sum(cells.len(), |i| {
        cells
            .iter()
            .map(|cj| cells[i].density() * cj.density() * rect_pair(&cells[i].rect, &cj.rect, f_log))
            .sum()
    });
    -0.5 * mat.log_coefficient() * total
}

fn density_bbox(d: &CellMeasure) -> Option<Rect> {
    use crate::measure::MassDistribution;
    d.bbox()
}

/// `∫ SourceData(y) dμ(y)` for quadrature nodes of a density.
pub fn continuum_fields(engine: &InteractionEngine, nodes: &[(Point, f64)]) -> SourceData {
    let m = engine.rule.len();
    let chunks: Vec<SourceData> = nodes
        .par_chunks(256)
        .map(|chunk| {
            let mut acc = SourceData {
                point: Point::zeros(),
                weighted_traction: vec![Point::zeros(); m],
                phi: vec![Point::zeros(); m],
                psi_corner: 0.0,
            };
            for (p, w) in chunk {
                let s = engine.source(p);
                for q in 0..m {
                    acc.weighted_traction[q] += s.weighted_traction[q] * *w;
                    acc.phi[q] += s.phi[q] * *w;
                }
                acc.psi_corner += s.psi_corner * w;
            }
            acc
        })
        .collect();
    let mut total = SourceData {
        point: Point::zeros(),
        weighted_traction: vec![Point::zeros(); m],
        phi: vec![Point::zeros(); m],
        psi_corner: 0.0,
    };
    for c in chunks {
        for q in 0..m {
            total.weighted_traction[q] += c.weighted_traction[q];
            total.phi[q] += c.phi[q];
        }
        total.psi_corner += c.psi_corner;
    }
    total
}
