//! Finite measures on the plane: weighted atoms, piecewise-constant cell
//! densities, uniform segment measures and analytic densities.

use crate::geometry::Rect;
use crate::quadrature::GaussLegendre;
use crate::{Error, Point, Result};

/// Anything that can report how much mass it puts in a rectangle.
pub trait MassDistribution {
    fn total_mass(&self) -> f64;

    /// Mass in the half-open rectangle `[x0, x1) × [y0, y1)`.
    fn mass_in_rect(&self, r: &Rect) -> f64;

    /// Smallest closed rectangle containing the support.
    fn bbox(&self) -> Option<Rect>;

    /// Finitely many slip planes carrying all the mass, if that is the case.
    fn slip_planes(&self) -> Option<Vec<f64>> {
        None
    }

    /// Mass on `[a, b) × {s}`.
    fn mass_on_segment(&self, _s: f64, _a: f64, _b: f64) -> f64 {
        0.0
    }

    /// Largest mass of `ℝ × [y, y + h]` over the support, used to check
    /// density bounds of the vertical marginal.
    fn max_strip_mass(&self, h: f64) -> f64;
}

fn bbox_of(points: impl Iterator<Item = Point>) -> Option<Rect> {
    let mut it = points.peekable();
    it.peek()?;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in it {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    Some(Rect { x0, x1, y0, y1 })
}

fn half_open_contains(r: &Rect, p: &Point) -> bool {
    p.x >= r.x0 && p.x < r.x1 && p.y >= r.y0 && p.y < r.y1
}

/// A probability measure with finitely many weighted atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<(Point, f64)>,
}

/// Atoms sharing one exact second coordinate, sorted by first coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSlice {
    pub y: f64,
    pub xs: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PlaneSlice {
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

impl DiscreteMeasure {
    /// Weights must be positive and sum to one within `1e-12`; atoms must be
    /// distinct.
    pub fn new(atoms: Vec<(Point, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("measure needs at least one atom".into()));
        }
        let mut total = 0.0;
        for (p, w) in &atoms {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::InvalidParameter("atom position is not finite".into()));
            }
            if !(*w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidParameter(format!("atom weight must be positive, got {w}")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, expected 1")));
        }
        let mut sorted: Vec<Point> = atoms.iter().map(|a| a.0).collect();
        sorted.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x)));
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::CoincidentPoints(w[0].x, w[0].y));
        }
        Ok(Self { atoms })
    }

    /// Equal weights `1/n`.
    pub fn uniform(points: &[Point]) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        Self::new(points.iter().map(|&p| (p, w)).collect())
    }

    pub fn atoms(&self) -> &[(Point, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Horizontal slices grouped by exactly equal second coordinate, in
    /// increasing order of the plane height.
    pub fn planes(&self) -> Vec<PlaneSlice> {
        let mut idx: Vec<usize> = (0..self.atoms.len()).collect();
        idx.sort_by(|&a, &b| {
            let (pa, pb) = (self.atoms[a].0, self.atoms[b].0);
            pa.y.total_cmp(&pb.y).then(pa.x.total_cmp(&pb.x))
        });
        let mut out: Vec<PlaneSlice> = Vec::new();
        for i in idx {
            let (p, w) = self.atoms[i];
            match out.last_mut() {
                Some(s) if s.y == p.y => {
                    s.xs.push(p.x);
                    s.weights.push(w);
                }
                _ => out.push(PlaneSlice { y: p.y, xs: vec![p.x], weights: vec![w] }),
            }
        }
        out
    }

    /// Vertical marginal as `(height, mass)` pairs.
    pub fn vertical_marginal(&self) -> Vec<(f64, f64)> {
        self.planes().iter().map(|s| (s.y, s.mass())).collect()
    }

    /// `∫ φ dμ`.
    pub fn integrate<F: Fn(&Point) -> f64>(&self, phi: F) -> f64 {
        self.atoms.iter().map(|(p, w)| w * phi(p)).sum()
    }
}

impl MassDistribution for DiscreteMeasure {
    fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    fn mass_in_rect(&self, r: &Rect) -> f64 {
        self.atoms.iter().filter(|(p, _)| half_open_contains(r, p)).map(|a| a.1).sum()
    }

    fn bbox(&self) -> Option<Rect> {
        bbox_of(self.atoms.iter().map(|a| a.0))
    }

    fn slip_planes(&self) -> Option<Vec<f64>> {
        Some(self.planes().iter().map(|s| s.y).collect())
    }

    fn mass_on_segment(&self, s: f64, a: f64, b: f64) -> f64 {
        self.atoms.iter().filter(|(p, _)| p.y == s && p.x >= a && p.x < b).map(|x| x.1).sum()
    }

    fn max_strip_mass(&self, h: f64) -> f64 {
        let marg = self.vertical_marginal();
        let mut best: f64 = 0.0;
        let mut j = 0;
        let mut acc = 0.0;
        for i in 0..marg.len() {
            while j < marg.len() && marg[j].0 <= marg[i].0 + h {
                acc += marg[j].1;
                j += 1;
            }
            best = best.max(acc);
            acc -= marg[i].1;
        }
        best
    }
}

/// One rectangle of constant density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub rect: Rect,
    pub mass: f64,
}

impl Cell {
    pub fn density(&self) -> f64 {
        self.mass / self.rect.area()
    }
}

/// Piecewise-constant density on disjoint rectangles of nominal side `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMeasure {
    pub h: f64,
    pub cells: Vec<Cell>,
}

impl CellMeasure {
    /// Masses must be non-negative and finite; cells must have positive area.
    pub fn new(h: f64, cells: Vec<Cell>) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(format!("cell size must be positive, got {h}")));
        }
        for c in &cells {
            if !(c.mass >= 0.0) || !c.mass.is_finite() {
                return Err(Error::InvalidParameter(format!("cell mass must be non-negative, got {}", c.mass)));
            }
            if !(c.rect.area() > 0.0) {
                return Err(Error::InvalidParameter("cell has zero area".into()));
            }
        }
        Ok(Self { h, cells })
    }

    /// Uniform probability density on `rect`.
    pub fn uniform(rect: Rect) -> Self {
        Self { h: rect.width().max(rect.height()), cells: vec![Cell { rect, mass: 1.0 }] }
    }

    /// Same cells, every mass multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            h: self.h,
            cells: self.cells.iter().map(|c| Cell { rect: c.rect, mass: c.mass * alpha }).collect(),
        }
    }

    pub fn density_at(&self, p: &Point) -> f64 {
        self.cells.iter().filter(|c| half_open_contains(&c.rect, p)).map(Cell::density).sum()
    }

    /// Gauss quadrature nodes `(point, weight)` for integrating against the
    /// density; every cell is split into squares of side at most `max_side`
    /// carrying an `order × order` rule.
    pub fn quadrature(&self, max_side: f64, order: usize) -> Vec<(Point, f64)> {
        let g = GaussLegendre::new(order);
        let mut out = Vec::new();
        for c in self.cells.iter().filter(|c| c.mass > 0.0) {
            let rho = c.density();
            let nx = (c.rect.width() / max_side).ceil().max(1.0) as usize;
            let ny = (c.rect.height() / max_side).ceil().max(1.0) as usize;
            let hx = c.rect.width() / nx as f64;
            let hy = c.rect.height() / ny as f64;
            for i in 0..nx {
                let xa = c.rect.x0 + hx * i as f64;
                for j in 0..ny {
                    let ya = c.rect.y0 + hy * j as f64;
                    for (x, wx) in g.mapped(xa, xa + hx) {
                        for (y, wy) in g.mapped(ya, ya + hy) {
                            out.push((Point::new(x, y), wx * wy * rho));
                        }
                    }
                }
            }
        }
        out
    }
}

impl MassDistribution for CellMeasure {
    fn total_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.mass).sum()
    }

    fn mass_in_rect(&self, r: &Rect) -> f64 {
        self.cells.iter().map(|c| c.density() * c.rect.overlap_area(r)).sum()
    }

    fn bbox(&self) -> Option<Rect> {
        let live: Vec<&Cell> = self.cells.iter().filter(|c| c.mass > 0.0).collect();
        bbox_of(live.iter().flat_map(|c| [Point::new(c.rect.x0, c.rect.y0), Point::new(c.rect.x1, c.rect.y1)]))
    }

    fn max_strip_mass(&self, h: f64) -> f64 {
        let Some(b) = self.bbox() else { return 0.0 };
        let mut starts: Vec<f64> = self
            .cells
            .iter()
            .flat_map(|c| [c.rect.y0, c.rect.y1 - h, c.rect.y0 - h, c.rect.y1])
            .collect();
        starts.push(b.y0);
        starts
            .into_iter()
            .map(|y| {
                let strip = Rect { x0: b.x0, x1: b.x1, y0: y, y1: y + h };
                self.mass_in_rect(&strip)
            })
            .fold(0.0, f64::max)
    }
}

/// Mass spread uniformly on a horizontal segment `[x0, x1] × {y}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub y: f64,
    pub x0: f64,
    pub x1: f64,
    pub mass: f64,
}

/// Finite sum of uniform segment measures.
#[derive(Debug, Clone, PartialEq)]
pub struct LineMeasure {
    pub segments: Vec<Segment>,
}

impl LineMeasure {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        for s in &segments {
            if !(s.x1 > s.x0) || !(s.mass >= 0.0) {
                return Err(Error::InvalidParameter("segments need x1 > x0 and non-negative mass".into()));
            }
        }
        Ok(Self { segments })
    }
}

impl MassDistribution for LineMeasure {
    fn total_mass(&self) -> f64 {
        self.segments.iter().map(|s| s.mass).sum()
    }

    fn mass_in_rect(&self, r: &Rect) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.y >= r.y0 && s.y < r.y1)
            .map(|s| self_overlap(s, r.x0, r.x1))
            .sum()
    }

    fn bbox(&self) -> Option<Rect> {
        bbox_of(self.segments.iter().flat_map(|s| [Point::new(s.x0, s.y), Point::new(s.x1, s.y)]))
    }

    fn slip_planes(&self) -> Option<Vec<f64>> {
        let mut ys: Vec<f64> = self.segments.iter().filter(|s| s.mass > 0.0).map(|s| s.y).collect();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        Some(ys)
    }

    fn mass_on_segment(&self, s: f64, a: f64, b: f64) -> f64 {
        self.segments.iter().filter(|g| g.y == s).map(|g| self_overlap(g, a, b)).sum()
    }

    fn max_strip_mass(&self, h: f64) -> f64 {
        let mut planes: Vec<(f64, f64)> = Vec::new();
        for y in self.slip_planes().unwrap_or_default() {
            let m = self.segments.iter().filter(|s| s.y == y).map(|s| s.mass).sum();
            planes.push((y, m));
        }
        let mut best: f64 = 0.0;
        for (i, &(y, _)) in planes.iter().enumerate() {
            let m: f64 = planes[i..].iter().take_while(|p| p.0 <= y + h).map(|p| p.1).sum();
            best = best.max(m);
        }
        best
    }
}

fn self_overlap(s: &Segment, a: f64, b: f64) -> f64 {
    let len = (s.x1.min(b) - s.x0.max(a)).max(0.0);
    s.mass * len / (s.x1 - s.x0)
}

/// An analytic density `ρ` supported in `support`, integrated by tensor
/// Gauss quadrature.
pub struct DensityFn<F: Fn(&Point) -> f64> {
    pub rho: F,
    pub support: Rect,
    pub order: usize,
    pub panels: usize,
}

impl<F: Fn(&Point) -> f64> DensityFn<F> {
    pub fn new(rho: F, support: Rect) -> Self {
        Self { rho, support, order: 8, panels: 4 }
    }

    fn integrate_over(&self, r: &Rect) -> f64 {
        let x0 = r.x0.max(self.support.x0);
        let x1 = r.x1.min(self.support.x1);
        let y0 = r.y0.max(self.support.y0);
        let y1 = r.y1.min(self.support.y1);
        if !(x1 > x0 && y1 > y0) {
            return 0.0;
        }
        let g = GaussLegendre::new(self.order);
        let xs = crate::quadrature::composite(&g, x0, x1, self.panels);
        let ys = crate::quadrature::composite(&g, y0, y1, self.panels);
        let mut acc = 0.0;
        for &(x, wx) in &xs {
            for &(y, wy) in &ys {
                acc += wx * wy * (self.rho)(&Point::new(x, y));
            }
        }
        acc
    }
}

impl<F: Fn(&Point) -> f64> MassDistribution for DensityFn<F> {
    fn total_mass(&self) -> f64 {
        self.integrate_over(&self.support)
    }

    fn mass_in_rect(&self, r: &Rect) -> f64 {
        self.integrate_over(r)
    }

    fn bbox(&self) -> Option<Rect> {
        Some(self.support)
    }

    fn max_strip_mass(&self, h: f64) -> f64 {
        let s = self.support;
        let steps = 64;
        (0..=steps)
            .map(|k| {
                let y = s.y0 - h + (s.height() + h) * k as f64 / steps as f64;
                self.integrate_over(&Rect { x0: s.x0, x1: s.x1, y0: y, y1: y + h })
            })
            .fold(0.0, f64::max)
    }
}
