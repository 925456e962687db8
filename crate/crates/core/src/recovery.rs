//! Constructors of admissible discrete approximations of limit measures:
//! grid lumping, per-cell sub-grids, slip-plane class constructions and the
//! grid-snapping modification.

use crate::measure::{Cell, CellMeasure, MassDistribution};
use crate::{DislocationConfig, Error, Geometry, Point, Rect, Result, ScalingSchedule};

/// Parameters `(γ, c)` of the slip-plane classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassParams {
    pub gamma: f64,
    pub c: f64,
}

impl ClassParams {
    pub fn new(gamma: f64, c: f64) -> Result<Self> {
        if !(gamma > -0.5 && gamma <= 0.5) || !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("need -1/2 < gamma <= 1/2 and c > 0, got ({gamma}, {c})")));
        }
        Ok(Self { gamma, c })
    }

    /// Minimal slip-plane spacing `c n^{-1/2+γ}`.
    pub fn plane_spacing(&self, n: usize) -> f64 {
        self.c * (n as f64).powf(self.gamma - 0.5)
    }

    /// Maximal count per plane `n^{1/2+γ} / c`.
    pub fn plane_capacity(&self, n: usize) -> f64 {
        (n as f64).powf(0.5 + self.gamma) / self.c
    }
}

/// Lumps the mass of every `2h`-square of the lattice anchored at the origin
/// onto its lower-left `h`-square.
pub fn grid_approximation(target: &dyn MassDistribution, h: f64, geom: &Geometry) -> Result<CellMeasure> {
    let rb = &geom.confinement;
    if !(h > 0.0) || h >= rb.width().min(rb.height()) {
        return Err(Error::InvalidParameter(format!("cell size {h} must be positive and below the sides of the confinement")));
    }
    let Some(b) = target.bbox() else {
        return Err(Error::InvalidParameter("target has empty support".into()));
    };
    let s = 2.0 * h;
    let (m0, m1) = ((b.x0 / s).floor() as i64, (b.x1 / s).floor() as i64);
    let (l0, l1) = ((b.y0 / s).floor() as i64, (b.y1 / s).floor() as i64);
    let mut cells = Vec::new();
    for l in l0..=l1 {
        for m in m0..=m1 {
            let (x, y) = (s * m as f64, s * l as f64);
            let big = Rect { x0: x, x1: x + s, y0: y, y1: y + s };
            let mass = target.mass_in_rect(&big);
            if mass <= 0.0 {
                continue;
            }
            let small = Rect { x0: x, x1: x + h, y0: y, y1: y + h };
            if !rb.contains_rect(&small) {
                return Err(Error::Infeasible(format!(
                    "lumped cell [{}, {}) x [{}, {}) leaves the confinement rectangle",
                    small.x0, small.x1, small.y0, small.y1
                )));
            }
            cells.push(Cell { rect: small, mass });
        }
    }
    CellMeasure::new(h, cells)
}

/// Splits `n` into integer parts proportional to `weights`, rounding by
/// largest remainder (ties to the lower index).
pub fn largest_remainder(weights: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

fn check_separation(points: Vec<Point>, schedule: ScalingSchedule) -> Result<DislocationConfig> {
    let cfg = DislocationConfig::new(points, schedule)?;
    if let Some((i, j, d)) = cfg.closest_pair() {
        if d < cfg.r_n() {
            return Err(Error::SeparationViolated { i, j, distance: d, required: cfg.r_n() });
        }
    }
    Ok(cfg)
}

/// Places `n` dislocations on cell-centred sub-grids, `N_k` in cell `k` with
/// `N_k` the largest-remainder rounding of `n · mass_k`. A cell with a
/// perfect-square count gets a square `√N_k × √N_k` grid; otherwise the
/// nearest rectangular grid with `⌈√N_k⌉` columns is filled row by row.
pub fn discretize_grid(density: &CellMeasure, n: usize, schedule: ScalingSchedule) -> Result<DislocationConfig> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one dislocation".into()));
    }
    let masses: Vec<f64> = density.cells.iter().map(|c| c.mass).collect();
    let counts = largest_remainder(&masses, n);
    let mut points = Vec::with_capacity(n);
    for (cell, &k) in density.cells.iter().zip(&counts) {
        if k == 0 {
            continue;
        }
        let cols = (k as f64).sqrt().ceil() as usize;
        let rows = k.div_ceil(cols);
        let r = &cell.rect;
        let (dx, dy) = (r.width() / cols as f64, r.height() / rows as f64);
        for idx in 0..k {
            let (i, j) = (idx % cols, idx / cols);
            points.push(Point::new(r.x0 + (i as f64 + 0.5) * dx, r.y0 + (j as f64 + 0.5) * dy));
        }
    }
    if points.len() != n {
        return Err(Error::Infeasible(format!("placed {} of {n} dislocations", points.len())));
    }
    check_separation(points, schedule).map_err(|e| Error::Infeasible(format!("cell sub-grid too dense: {e}")))
}

/// `m` points equidistant on `[a, b]` (the midpoint when `m = 1`).
fn equidistant(a: f64, b: f64, m: usize) -> Vec<f64> {
    match m {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..m).map(|k| a + (b - a) * k as f64 / (m - 1) as f64).collect(),
    }
}

/// Default recovery cell size `n^{-1/4}`.
pub fn default_cell_size(n: usize) -> f64 {
    (n as f64).powf(-0.25)
}

struct Line {
    y: f64,
    xs: Vec<f64>,
}

/// Recovery configuration in the slip-plane class `(γ, c)` approximating
/// `target`.
///
/// For `γ < 1/2` dislocations sit on the lattice lines `y = c j n^{-1/2+γ}`,
/// `⌊μ(Q) c n^{1/2+γ} / h⌋` of them on each intersection of a line with a
/// grid square `Q` of side `h = n^{-1/4}`, equidistant at distance `r_n`
/// from the square's sides. For `γ = 1/2` the target's own slip planes are
/// used with `⌊μ(I) n⌋` dislocations on each segment `I` of length `h`.
/// Shortfalls are added in the middle of the largest gaps of lines below
/// their capacity.
pub fn slipclass_discretize(
    target: &dyn MassDistribution,
    n: usize,
    params: ClassParams,
    schedule: ScalingSchedule,
    geom: &Geometry,
) -> Result<DislocationConfig> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one dislocation".into()));
    }
    let rb = geom.confinement;
    let Some(b) = target.bbox() else {
        return Err(Error::InvalidParameter("target has empty support".into()));
    };
    if !rb.contains_rect(&b) {
        return Err(Error::Infeasible("target support leaves the confinement rectangle".into()));
    }
    let r = schedule.r(n);
    let h = default_cell_size(n);
    let cap = (params.plane_capacity(n) * (1.0 + 1e-12)).floor() as usize;
    let mut lines: Vec<Line> = Vec::new();
    let i0 = (rb.x0 / h).floor() as i64;
    let i1 = (rb.x1 / h).ceil() as i64;
    let segment_bounds = |i: i64| {
        let a = (h * i as f64).max(rb.x0) + r;
        let e = (h * (i + 1) as f64).min(rb.x1) - r;
        (a, e)
    };

    if params.gamma < 0.5 {
        let strip = target.max_strip_mass(h) / h;
        if strip > params.c.powi(-2) * (1.0 + 1e-9) {
            return Err(Error::Infeasible(format!(
                "vertical marginal density {strip} exceeds the class bound {}",
                params.c.powi(-2)
            )));
        }
        let spacing = params.plane_spacing(n);
        let scale = params.c * (n as f64).powf(0.5 + params.gamma) / h;
        let j0 = (rb.y0 / spacing).ceil() as i64;
        let j1 = (rb.y1 / spacing).floor() as i64;
        for j in j0..=j1 {
            let y = spacing * j as f64;
            let k = (y / h).floor();
            let (qy0, qy1) = (h * k, h * (k + 1.0));
            let mut xs = Vec::new();
            for i in i0..i1 {
                let q = Rect { x0: h * i as f64, x1: h * (i + 1) as f64, y0: qy0, y1: qy1 };
                let m = (target.mass_in_rect(&q) * scale + 1e-9).floor().max(0.0) as usize;
                let (a, e) = segment_bounds(i);
                if m > 0 && e >= a {
                    xs.extend(equidistant(a, e, m));
                }
            }
            lines.push(Line { y, xs });
        }
    } else {
        let planes = target
            .slip_planes()
            .ok_or_else(|| Error::Infeasible("for gamma = 1/2 the target must live on finitely many slip planes".into()))?;
        for w in planes.windows(2) {
            if w[1] - w[0] < params.c * (1.0 - 1e-12) {
                return Err(Error::Infeasible(format!("slip planes {} and {} are closer than c", w[0], w[1])));
            }
        }
        for &y in &planes {
            let mass = target.mass_on_segment(y, f64::NEG_INFINITY, f64::INFINITY);
            if mass > (1.0 + 1e-9) / params.c {
                return Err(Error::Infeasible(format!("plane {y} carries mass {mass} above 1/c")));
            }
            if y < rb.y0 || y > rb.y1 {
                return Err(Error::Infeasible(format!("plane {y} lies outside the confinement rectangle")));
            }
            let mut xs = Vec::new();
            for i in i0..i1 {
                let m = (target.mass_on_segment(y, h * i as f64, h * (i + 1) as f64) * n as f64 + 1e-9).floor() as usize;
                let (a, e) = segment_bounds(i);
                if m > 0 && e >= a {
                    xs.extend(equidistant(a, e, m));
                }
            }
            lines.push(Line { y, xs });
        }
    }

    // Trim overfull lines and any global excess from the most crowded lines.
    for line in &mut lines {
        while line.xs.len() > cap {
            remove_from(line);
        }
    }
    let mut total: usize = lines.iter().map(|l| l.xs.len()).sum();
    while total > n {
        let k = (0..lines.len()).max_by_key(|&k| (lines[k].xs.len(), std::cmp::Reverse(k))).expect("non-empty");
        remove_from(&mut lines[k]);
        total -= 1;
    }
    while total < n {
        top_up(&mut lines, cap, r, &rb)?;
        total += 1;
    }
    let points: Vec<Point> = lines.iter().flat_map(|l| l.xs.iter().map(move |&x| Point::new(x, l.y))).collect();
    let cfg = check_separation(points, schedule)?;
    cfg.validate(geom)?;
    Ok(cfg)
}

/// Removes the point with the smallest neighbour gap.
fn remove_from(line: &mut Line) {
    line.xs.sort_by(f64::total_cmp);
    if line.xs.len() <= 1 {
        line.xs.clear();
        return;
    }
    let k = (1..line.xs.len())
        .min_by(|&a, &b| (line.xs[a] - line.xs[a - 1]).total_cmp(&(line.xs[b] - line.xs[b - 1])))
        .expect("at least two points");
    line.xs.remove(k);
}

/// Adds one dislocation in the middle of the widest free gap among lines
/// below capacity, preferring lines that already carry dislocations.
fn top_up(lines: &mut [Line], cap: usize, r: f64, rb: &Rect) -> Result<()> {
    let mut best: Option<(bool, f64, usize, f64)> = None;
    for (k, line) in lines.iter_mut().enumerate() {
        if line.xs.len() >= cap {
            continue;
        }
        line.xs.sort_by(f64::total_cmp);
        let active = !line.xs.is_empty();
        let mut gaps = Vec::new();
        if line.xs.is_empty() {
            gaps.push((rb.width(), 0.5 * (rb.x0 + rb.x1)));
        } else {
            let (first, last) = (line.xs[0], line.xs[line.xs.len() - 1]);
            if first - rb.x0 >= r {
                gaps.push((2.0 * (first - rb.x0), rb.x0.max(first - (first - rb.x0))));
            }
            if rb.x1 - last >= r {
                gaps.push((2.0 * (rb.x1 - last), rb.x1));
            }
            for w in line.xs.windows(2) {
                gaps.push((w[1] - w[0], 0.5 * (w[0] + w[1])));
            }
        }
        for (g, x) in gaps {
            if g < 2.0 * r {
                continue;
            }
            let key = (active, g, k, x);
            let better = match best {
                None => true,
                Some((ba, bg, _, _)) => (active && !ba) || (active == ba && g > bg),
            };
            if better {
                best = Some(key);
            }
        }
    }
    match best {
        Some((_, _, k, x)) => {
            lines[k].xs.push(x);
            Ok(())
        }
        None => Err(Error::Infeasible("no room left on the slip planes to reach n dislocations".into())),
    }
}

/// Outcome of [`class_membership`].
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipReport {
    pub min_plane_spacing: f64,
    pub required_spacing: f64,
    pub max_per_plane: usize,
    pub capacity: f64,
    pub violations: Vec<String>,
}

impl MembershipReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the class bounds (plane spacing and count per plane) together with
/// separation and confinement.
pub fn class_membership(cfg: &DislocationConfig, params: ClassParams, geom: &Geometry) -> MembershipReport {
    let n = cfg.n();
    let ys: Vec<f64> = cfg.planes().iter().map(|p| p.y).collect();
    let min_plane_spacing = ys.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let required_spacing = params.plane_spacing(n);
    let max_per_plane = cfg.max_per_plane();
    let capacity = params.plane_capacity(n);
    let mut violations = Vec::new();
    if min_plane_spacing < required_spacing * (1.0 - 1e-12) {
        violations.push(format!("slip-plane spacing {min_plane_spacing} below {required_spacing}"));
    }
    if max_per_plane as f64 > capacity * (1.0 + 1e-12) {
        violations.push(format!("{max_per_plane} dislocations on one plane exceed {capacity}"));
    }
    if let Err(e) = cfg.validate(geom) {
        violations.push(e.to_string());
    }
    MembershipReport { min_plane_spacing, required_spacing, max_per_plane, capacity, violations }
}

/// Moves every slip plane's dislocations onto the grid `(η/m_s) ℤ ∩ ℛ`,
/// choosing the injective order-preserving assignment of least total
/// horizontal displacement.
pub fn snap_modification(cfg: &DislocationConfig, eta: f64, geom: &Geometry) -> Result<DislocationConfig> {
    let rb = &geom.confinement;
    if !(eta > 0.0) || eta >= rb.width() {
        return Err(Error::InvalidParameter(format!("eta = {eta} must lie in (0, width of the confinement)")));
    }
    let mut xs = cfg.abscissae();
    for plane in cfg.planes() {
        let m = plane.members.len();
        let pitch = eta / m as f64;
        let k0 = (rb.x0 / pitch).ceil() as i64;
        let k1 = (rb.x1 / pitch).floor() as i64;
        let grid: Vec<f64> = (k0..=k1).map(|k| k as f64 * pitch).filter(|&g| g >= rb.x0 && g <= rb.x1).collect();
        if grid.len() < m {
            return Err(Error::Infeasible(format!("plane {} has {m} dislocations but only {} grid nodes", plane.y, grid.len())));
        }
        let src: Vec<f64> = plane.members.iter().map(|&i| xs[i]).collect();
        for (&i, x) in plane.members.iter().zip(monotone_assignment(&src, &grid)) {
            xs[i] = x;
        }
    }
    cfg.with_abscissae(&xs)
}

/// Order-preserving injective assignment of sorted `src` into sorted `grid`
/// minimising `Σ |src_i - grid_{j_i}|`.
fn monotone_assignment(src: &[f64], grid: &[f64]) -> Vec<f64> {
    let (m, k) = (src.len(), grid.len());
    let mut cost = vec![f64::INFINITY; k];
    let mut choice = vec![vec![0usize; k]; m];
    for j in 0..k {
        cost[j] = (src[0] - grid[j]).abs();
        choice[0][j] = j;
    }
    for i in 1..m {
        let mut next = vec![f64::INFINITY; k];
        let (mut best, mut arg) = (f64::INFINITY, 0);
        for j in i..k {
            if cost[j - 1] < best {
                best = cost[j - 1];
                arg = j - 1;
            }
            next[j] = best + (src[i] - grid[j]).abs();
            choice[i][j] = arg;
        }
        cost = next;
    }
    let mut j = (m - 1..k).min_by(|&a, &b| cost[a].total_cmp(&cost[b])).expect("grid has at least m nodes");
    let mut out = vec![0.0; m];
    for i in (0..m).rev() {
        out[i] = grid[j];
        if i > 0 {
            j = choice[i][j];
        }
    }
    out
}

/// Per-plane monotone rearrangement towards a target: the `k`-th of `m`
/// dislocations on plane `y` goes to `quantile(y, (k + 1/2) / m)`, clamped
/// into ℛ and pushed apart to keep the separation `r_n`.
pub fn rearrange_towards<Q>(cfg: &DislocationConfig, quantile: Q, geom: &Geometry) -> Result<DislocationConfig>
where
    Q: Fn(f64, f64) -> f64,
{
    let rb = &geom.confinement;
    let r = cfg.r_n() * (1.0 + 1e-12);
    let mut xs = cfg.abscissae();
    for plane in cfg.planes() {
        let m = plane.members.len();
        let mut v: Vec<f64> = (0..m).map(|k| quantile(plane.y, (k as f64 + 0.5) / m as f64).clamp(rb.x0, rb.x1)).collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("quantile function returned a non-finite value".into()));
        }
        v.sort_by(f64::total_cmp);
        for k in 1..m {
            v[k] = v[k].max(v[k - 1] + r);
        }
        if v[m - 1] > rb.x1 {
            v[m - 1] = rb.x1;
            for k in (0..m - 1).rev() {
                v[k] = v[k].min(v[k + 1] - r);
            }
        }
        if v[0] < rb.x0 {
            return Err(Error::Infeasible(format!("plane {} cannot hold {m} separated dislocations", plane.y)));
        }
        for (&i, x) in plane.members.iter().zip(v) {
            xs[i] = x;
        }
    }
    let out = cfg.with_abscissae(&xs)?;
    out.validate(geom)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::DiscreteMeasure;
    use crate::pt;

    #[test]
    fn largest_remainder_sums_to_n() {
        assert_eq!(largest_remainder(&[1.0, 1.0, 1.0], 4), vec![2, 1, 1]);
        assert_eq!(largest_remainder(&[0.5, 0.25, 0.25], 8), vec![4, 2, 2]);
        assert_eq!(largest_remainder(&[0.7, 0.3], 3).iter().sum::<usize>(), 3);
    }

    #[test]
    fn point_mass_lumps_onto_one_cell() {
        let g = Geometry::unit_square();
        let mu = DiscreteMeasure::new(vec![(pt(0.55, 0.6), 1.0)]).unwrap();
        let c = grid_approximation(&mu, 0.125, &g).unwrap();
        assert_eq!(c.cells.len(), 1);
        assert_eq!(c.cells[0].mass, 1.0);
        assert_eq!(c.cells[0].rect, Rect { x0: 0.5, x1: 0.625, y0: 0.5, y1: 0.625 });
    }

    #[test]
    fn one_cell_four_points_is_a_square_grid() {
        let cells = CellMeasure::new(0.5, vec![Cell { rect: Rect::new(0.25, 0.75, 0.25, 0.75).unwrap(), mass: 1.0 }]).unwrap();
        let cfg = discretize_grid(&cells, 4, ScalingSchedule::default()).unwrap();
        let mut p: Vec<(f64, f64)> = cfg.points().iter().map(|p| (p.x, p.y)).collect();
        p.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(p, vec![(0.375, 0.375), (0.375, 0.625), (0.625, 0.375), (0.625, 0.625)]);
    }

    #[test]
    fn monotone_assignment_handles_collisions() {
        let out = monotone_assignment(&[0.5, 0.5], &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(out == vec![0.25, 0.5] || out == vec![0.5, 0.75]);
        assert_eq!(monotone_assignment(&[0.1, 0.9], &[0.0, 0.5, 1.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn class_params_validate() {
        assert!(ClassParams::new(-0.5, 1.0).is_err());
        assert!(ClassParams::new(0.5, 1.0).is_ok());
        assert!(ClassParams::new(0.0, 0.0).is_err());
        let p = ClassParams::new(0.0, 1.0).unwrap();
        assert_eq!(p.plane_spacing(16), 0.25);
        assert_eq!(p.plane_capacity(16), 4.0);
    }
}
