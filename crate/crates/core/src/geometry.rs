//! Domain, confinement rectangle, normalisation ball and boundary quadrature.

use crate::quadrature::{composite_with_breaks, GaussLegendre};
use crate::{pt, Error, Point, Result};

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    pub fn unit() -> Self {
        Self { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diam(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Point {
        pt(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    /// Closed containment with an absolute slack.
    pub fn contains(&self, p: &Point, slack: f64) -> bool {
        p.x >= self.x0 - slack && p.x <= self.x1 + slack && p.y >= self.y0 - slack && p.y <= self.y1 + slack
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    /// Distance from an interior point to the boundary.
    pub fn dist_to_boundary(&self, p: &Point) -> f64 {
        (p.x - self.x0).min(self.x1 - p.x).min(p.y - self.y0).min(self.y1 - p.y)
    }

    /// Area of the intersection with another rectangle.
    pub fn overlap_area(&self, other: &Rect) -> f64 {
        let w = (self.x1.min(other.x1) - self.x0.max(other.x0)).max(0.0);
        let h = (self.y1.min(other.y1) - self.y0.max(other.y0)).max(0.0);
        w * h
    }

    /// Corners in counter-clockwise order starting at the lower-left one.
    pub fn corners(&self) -> [Point; 4] {
        [pt(self.x0, self.y0), pt(self.x1, self.y0), pt(self.x1, self.y1), pt(self.x0, self.y1)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: Point,
    pub radius: f64,
}

/// Domain Ω, confinement rectangle ℛ, separation ℓ and normalisation ball B.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub omega: Rect,
    pub confinement: Rect,
    pub ell: f64,
    pub ball: Disk,
}

impl Geometry {
    /// Validates `dist(R, ∂Ω) >= ell` and that every point of `ball` lies in Ω
    /// within `ell / 2` of `∂Ω`.
    pub fn new(omega: Rect, confinement: Rect, ell: f64, ball: Disk) -> Result<Self> {
        if !(ell > 0.0) {
            return Err(Error::InvalidParameter(format!("ell must be positive, got {ell}")));
        }
        let gap = (confinement.x0 - omega.x0)
            .min(omega.x1 - confinement.x1)
            .min(confinement.y0 - omega.y0)
            .min(omega.y1 - confinement.y1);
        if gap < ell * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "confinement rectangle is {gap} from the domain boundary, need at least {ell}"
            )));
        }
        if !(ball.radius > 0.0) {
            return Err(Error::InvalidParameter("normalisation ball radius must be positive".into()));
        }
        let center_depth = omega.dist_to_boundary(&ball.center);
        if center_depth < ball.radius {
            return Err(Error::InvalidParameter("normalisation ball leaves the domain".into()));
        }
        if center_depth + ball.radius >= 0.5 * ell {
            return Err(Error::InvalidParameter(format!(
                "normalisation ball reaches depth {}, must stay below ell/2 = {}",
                center_depth + ball.radius,
                0.5 * ell
            )));
        }
        Ok(Self { omega, confinement, ell, ball })
    }

    /// Ω = (0,1)², ℛ = [1/4, 3/4]², ℓ = 1/4, B = B_{0.05}((0.06, 0.5)).
    pub fn unit_square() -> Self {
        Self::new(
            Rect::unit(),
            Rect { x0: 0.25, x1: 0.75, y0: 0.25, y1: 0.75 },
            0.25,
            Disk { center: pt(0.06, 0.5), radius: 0.05 },
        )
        .expect("default geometry is valid")
    }

    /// A geometry with the given domain and confinement; ℓ is the actual gap
    /// and B sits at the middle of the left edge.
    pub fn with_boxes(omega: Rect, confinement: Rect) -> Result<Self> {
        let ell = (confinement.x0 - omega.x0)
            .min(omega.x1 - confinement.x1)
            .min(confinement.y0 - omega.y0)
            .min(omega.y1 - confinement.y1);
        let radius = 0.2 * ell;
        let ball = Disk { center: pt(omega.x0 + 0.24 * ell, 0.5 * (omega.y0 + omega.y1)), radius };
        Self::new(omega, confinement, ell, ball)
    }
}

/// Quadrature nodes on ∂Ω, ordered counter-clockwise starting at the lower-left
/// corner of Ω. Every corner is a panel break.
#[derive(Debug, Clone)]
pub struct BoundaryRule {
    pub points: Vec<Point>,
    pub normals: Vec<Point>,
    pub weights: Vec<f64>,
    /// Start of the traversal (lower-left corner of Ω).
    pub start: Point,
    pub max_panel: f64,
    pub order: usize,
}

impl BoundaryRule {
    pub fn new(omega: &Rect, max_panel: f64, order: usize) -> Self {
        let g = GaussLegendre::new(order);
        let corners = omega.corners();
        let normals = [pt(0.0, -1.0), pt(1.0, 0.0), pt(0.0, 1.0), pt(-1.0, 0.0)];
        let mut rule = Self {
            points: Vec::new(),
            normals: Vec::new(),
            weights: Vec::new(),
            start: corners[0],
            max_panel,
            order,
        };
        for e in 0..4 {
            let a = corners[e];
            let b = corners[(e + 1) % 4];
            let len = (b - a).norm();
            for (s, w) in composite_with_breaks(&g, 0.0, len, &[], max_panel) {
                rule.points.push(a + (b - a) * (s / len));
                rule.normals.push(normals[e]);
                rule.weights.push(w);
            }
        }
        rule
    }

    /// Default rule for sources kept `ell` away from ∂Ω.
    pub fn for_geometry(geom: &Geometry) -> Self {
        Self::new(&geom.omega, 0.5 * geom.ell, 16)
    }

    /// Panel length halved.
    pub fn refined(&self, omega: &Rect) -> Self {
        Self::new(omega, 0.5 * self.max_panel, self.order)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry_is_consistent() {
        let g = Geometry::unit_square();
        assert!(g.omega.contains_rect(&g.confinement));
        assert!((g.ell - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_ball_too_deep() {
        let r = Geometry::new(
            Rect::unit(),
            Rect::new(0.25, 0.75, 0.25, 0.75).unwrap(),
            0.25,
            Disk { center: pt(0.5, 0.5), radius: 0.05 },
        );
        assert!(r.is_err());
    }

    #[test]
    fn rejects_confinement_too_close() {
        let r = Geometry::new(
            Rect::unit(),
            Rect::new(0.1, 0.9, 0.25, 0.75).unwrap(),
            0.25,
            Disk { center: pt(0.06, 0.5), radius: 0.05 },
        );
        assert!(r.is_err());
    }

    #[test]
    fn boundary_rule_measures_perimeter() {
        let omega = Rect::new(-1.0, 2.0, 0.0, 1.5).unwrap();
        let rule = BoundaryRule::new(&omega, 0.3, 8);
        let per: f64 = rule.weights.iter().sum();
        assert!((per - 9.0).abs() < 1e-13);
        // ∮ x·ν = 2 |Ω|
        let flux: f64 = rule
            .points
            .iter()
            .zip(&rule.normals)
            .zip(&rule.weights)
            .map(|((p, n), w)| w * p.dot(n))
            .sum();
        assert!((flux - 2.0 * omega.area()).abs() < 1e-12);
    }
}
