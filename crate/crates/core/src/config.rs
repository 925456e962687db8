//! Dislocation configurations `μ = (1/n) Σ δ_{z_i}` and the `n`-dependent
//! scales of the admissible class.

use crate::measure::DiscreteMeasure;
use crate::{Error, Geometry, Point, Result};

/// Power-law rules `r_n = r_coef · n^{-r_exp}`, `ε_n = eps_coef · n^{-eps_exp}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingSchedule {
    pub r_coef: f64,
    pub r_exp: f64,
    pub eps_coef: f64,
    pub eps_exp: f64,
}

impl Default for ScalingSchedule {
    /// `r_n = n^{-3/2}`, `ε_n = n^{-6}`.
    fn default() -> Self {
        Self { r_coef: 1.0, r_exp: 1.5, eps_coef: 1.0, eps_exp: 6.0 }
    }
}

impl ScalingSchedule {
    /// Checks `ε_n → 0`, `r_n → 0`, `ε_n / r_n³ → 0` and `n r_n → 0`.
    pub fn new(r_coef: f64, r_exp: f64, eps_coef: f64, eps_exp: f64) -> Result<Self> {
        if !(r_coef > 0.0 && eps_coef > 0.0) {
            return Err(Error::InvalidParameter("schedule coefficients must be positive".into()));
        }
        if !(r_exp > 1.0) {
            return Err(Error::InvalidParameter(format!("need n r_n -> 0, i.e. r_exp > 1, got {r_exp}")));
        }
        if !(eps_exp > 3.0 * r_exp) {
            return Err(Error::InvalidParameter(format!(
                "need eps_n / r_n^3 -> 0, i.e. eps_exp > 3 r_exp, got {eps_exp} <= {}",
                3.0 * r_exp
            )));
        }
        Ok(Self { r_coef, r_exp, eps_coef, eps_exp })
    }

    pub fn r(&self, n: usize) -> f64 {
        self.r_coef * (n as f64).powf(-self.r_exp)
    }

    pub fn eps(&self, n: usize) -> f64 {
        self.eps_coef * (n as f64).powf(-self.eps_exp)
    }
}

/// Indices of the dislocations sharing one slip plane, sorted by abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub y: f64,
    pub members: Vec<usize>,
}

/// `n` equal-weight dislocations with their slip-plane grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct DislocationConfig {
    points: Vec<Point>,
    planes: Vec<Plane>,
    pub schedule: ScalingSchedule,
}

impl DislocationConfig {
    /// Builds the plane index; no admissibility checks beyond finiteness.
    pub fn new(points: Vec<Point>, schedule: ScalingSchedule) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("configuration needs at least one dislocation".into()));
        }
        if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::InvalidParameter("dislocation position is not finite".into()));
        }
        let planes = build_planes(&points);
        Ok(Self { points, planes, schedule })
    }

    /// [`Self::new`] followed by [`Self::validate`].
    pub fn admissible(points: Vec<Point>, schedule: ScalingSchedule, geom: &Geometry) -> Result<Self> {
        let cfg = Self::new(points, schedule)?;
        cfg.validate(geom)?;
        Ok(cfg)
    }

    /// Confinement to ℛ and pairwise separation `≥ r_n`.
    pub fn validate(&self, geom: &Geometry) -> Result<()> {
        for (index, p) in self.points.iter().enumerate() {
            if !geom.confinement.contains(p, 1e-12) {
                return Err(Error::OutsideConfinement { index, x: p.x, y: p.y });
            }
        }
        if let Some((i, j, distance)) = self.closest_pair() {
            let required = self.r_n();
            if distance < required {
                return Err(Error::SeparationViolated { i, j, distance, required });
            }
        }
        Ok(())
    }

    /// Closest pair `(i, j, |z_i - z_j|)` with `i < j`.
    pub fn closest_pair(&self) -> Option<(usize, usize, f64)> {
        let n = self.points.len();
        if n < 2 {
            return None;
        }
        // sweep over x-sorted indices
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| self.points[a].x.total_cmp(&self.points[b].x));
        let mut best = (0, 1, f64::INFINITY);
        for a in 0..n {
            for b in a + 1..n {
                let (i, j) = (idx[a], idx[b]);
                if self.points[j].x - self.points[i].x >= best.2 {
                    break;
                }
                let d = (self.points[i] - self.points[j]).norm();
                if d < best.2 {
                    best = (i.min(j), i.max(j), d);
                }
            }
        }
        Some(best)
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn r_n(&self) -> f64 {
        self.schedule.r(self.n())
    }

    pub fn eps_n(&self) -> f64 {
        self.schedule.eps(self.n())
    }

    /// Largest number of dislocations on one slip plane.
    pub fn max_per_plane(&self) -> usize {
        self.planes.iter().map(|p| p.members.len()).max().unwrap_or(0)
    }

    /// Same slip planes, new abscissae.
    pub fn with_abscissae(&self, xs: &[f64]) -> Result<Self> {
        if xs.len() != self.points.len() {
            return Err(Error::InvalidParameter("abscissa count does not match".into()));
        }
        let points = self.points.iter().zip(xs).map(|(p, &x)| Point::new(x, p.y)).collect();
        Self::new(points, self.schedule)
    }

    pub fn abscissae(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    /// The empirical measure with weights `1/n`.
    pub fn to_measure(&self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::uniform(&self.points)
    }

    /// Points sorted by `(y, x)`; used to make reductions independent of the
    /// caller's ordering.
    pub fn canonical_points(&self) -> Vec<Point> {
        let mut p = self.points.clone();
        p.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x)));
        p
    }
}

fn build_planes(points: &[Point]) -> Vec<Plane> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| points[a].y.total_cmp(&points[b].y).then(points[a].x.total_cmp(&points[b].x)));
    let mut planes: Vec<Plane> = Vec::new();
    for i in idx {
        match planes.last_mut() {
            Some(p) if p.y == points[i].y => p.members.push(i),
            _ => planes.push(Plane { y: points[i].y, members: vec![i] }),
        }
    }
    planes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pt;

    #[test]
    fn default_schedule_satisfies_hypotheses() {
        let s = ScalingSchedule::default();
        let t = ScalingSchedule::new(s.r_coef, s.r_exp, s.eps_coef, s.eps_exp).unwrap();
        assert_eq!(s, t);
        assert!((s.r(4) - 0.125).abs() < 1e-15);
        for n in [10usize, 100, 1000] {
            let nf = n as f64;
            assert!((s.eps(n) / s.r(n).powi(3) - nf.powf(-1.5)).abs() < 1e-12);
            assert!((nf * s.r(n) - nf.powf(-0.5)).abs() < 1e-12);
        }
        assert!(ScalingSchedule::new(1.0, 1.0, 1.0, 6.0).is_err());
        assert!(ScalingSchedule::new(1.0, 1.5, 1.0, 4.5).is_err());
    }

    #[test]
    fn planes_are_sorted_by_abscissa() {
        let cfg = DislocationConfig::new(
            vec![pt(0.6, 0.5), pt(0.3, 0.4), pt(0.4, 0.5), pt(0.7, 0.4)],
            ScalingSchedule::default(),
        )
        .unwrap();
        assert_eq!(cfg.planes().len(), 2);
        assert_eq!(cfg.planes()[0].members, vec![1, 3]);
        assert_eq!(cfg.planes()[1].members, vec![2, 0]);
        assert_eq!(cfg.max_per_plane(), 2);
    }

    #[test]
    fn validation_catches_violations() {
        let g = Geometry::unit_square();
        let s = ScalingSchedule::default();
        assert!(matches!(
            DislocationConfig::admissible(vec![pt(0.1, 0.5)], s, &g),
            Err(Error::OutsideConfinement { index: 0, .. })
        ));
        // r_2 = 2^{-3/2} ≈ 0.354
        assert!(matches!(
            DislocationConfig::admissible(vec![pt(0.4, 0.5), pt(0.6, 0.5)], s, &g),
            Err(Error::SeparationViolated { .. })
        ));
        assert!(DislocationConfig::admissible(vec![pt(0.25, 0.5), pt(0.75, 0.5)], s, &g).is_ok());
    }

    #[test]
    fn closest_pair_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let pts: Vec<Point> = (0..30).map(|_| pt(rng.gen(), rng.gen())).collect();
            let cfg = DislocationConfig::new(pts.clone(), ScalingSchedule::default()).unwrap();
            let mut best = f64::INFINITY;
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    best = best.min((pts[i] - pts[j]).norm());
                }
            }
            assert_eq!(cfg.closest_pair().unwrap().2, best);
        }
    }
}
