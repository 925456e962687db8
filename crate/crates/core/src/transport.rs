//! The slip-plane-confined transport distance `d`, its relaxations `d_{1,ε}`,
//! dual lower bounds and trajectory dissipation.

use rayon::prelude::*;

use crate::measure::{DiscreteMeasure, PlaneSlice};
use crate::{Error, Point, Result};

/// Default tolerance for matching slip-plane heights and masses.
pub const PLANE_TOL: f64 = 1e-9;

/// Largest support handled by [`exact_transport`].
pub const SUPPORT_CAP: usize = 64;

/// Couplings as `(source, target, mass)` triples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransportPlan {
    pub entries: Vec<(usize, usize, f64)>,
}

impl TransportPlan {
    pub fn row_sums(&self, n: usize) -> Vec<f64> {
        let mut r = vec![0.0; n];
        for &(i, _, m) in &self.entries {
            r[i] += m;
        }
        r
    }

    pub fn col_sums(&self, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; n];
        for &(_, j, m) in &self.entries {
            c[j] += m;
        }
        c
    }
}

/// `W₁` between two weighted point sets on the line, as `∫ |F - G| dx` of the
/// cumulative distribution functions.
pub fn plane_w1(xs: &[(f64, f64)], ys: &[(f64, f64)]) -> Result<f64> {
    let left: f64 = xs.iter().map(|a| a.1).sum();
    let right: f64 = ys.iter().map(|a| a.1).sum();
    if (left - right).abs() > 1e-12 * left.abs().max(right.abs()).max(1.0) {
        return Err(Error::UnequalMass { left, right });
    }
    let mut events: Vec<(f64, f64)> = xs.iter().map(|&(x, w)| (x, w)).chain(ys.iter().map(|&(y, w)| (y, -w))).collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut diff = 0.0;
    let mut acc = 0.0;
    for k in 0..events.len() {
        diff += events[k].1;
        if k + 1 < events.len() {
            acc += diff.abs() * (events[k + 1].0 - events[k].0);
        }
    }
    Ok(acc)
}

fn slice_pairs(s: &PlaneSlice) -> Vec<(f64, f64)> {
    s.xs.iter().copied().zip(s.weights.iter().copied()).collect()
}

/// Whether the vertical marginals agree plane by plane within `tol`.
pub fn same_vertical_marginal(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> bool {
    let (a, b) = (mu.vertical_marginal(), nu.vertical_marginal());
    a.len() == b.len() && a.iter().zip(&b).all(|(p, q)| (p.0 - q.0).abs() <= tol && (p.1 - q.1).abs() <= tol)
}

/// `d(μ, ν)`: sum over slip planes of the one-dimensional `W₁` between the
/// restrictions; `+∞` when the vertical marginals differ.
pub fn slip_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> f64 {
    if !same_vertical_marginal(mu, nu, tol) {
        return f64::INFINITY;
    }
    let (pa, pb) = (mu.planes(), nu.planes());
    let parts: Vec<f64> = pa
        .par_iter()
        .zip(pb.par_iter())
        .map(|(a, b)| {
            let (xa, mut xb) = (slice_pairs(a), slice_pairs(b));
            // masses agree within tol; rescale so the 1-D problem is balanced
            let scale = a.mass() / b.mass();
            for w in &mut xb {
                w.1 *= scale;
            }
            plane_w1(&xa, &xb).unwrap_or(f64::INFINITY)
        })
        .collect();
    parts.iter().sum()
}

/// Exact optimal transport between two discrete measures for a given cost, by
/// successive shortest paths with Dijkstra potentials on the bipartite graph.
pub fn exact_transport<C>(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: C) -> Result<(f64, TransportPlan)>
where
    C: Fn(&Point, &Point) -> f64,
{
    let (m, k) = (mu.len(), nu.len());
    if m.max(k) > SUPPORT_CAP {
        return Err(Error::SupportCapExceeded { size: m.max(k), cap: SUPPORT_CAP });
    }
    let (a, b) = (mu.atoms(), nu.atoms());
    let c: Vec<Vec<f64>> = a.iter().map(|(p, _)| b.iter().map(|(q, _)| cost(p, q)).collect()).collect();
    let mut supply: Vec<f64> = a.iter().map(|x| x.1).collect();
    let mut demand: Vec<f64> = b.iter().map(|x| x.1).collect();
    let mut flow = vec![vec![0.0; k]; m];
    // node ids: sources 0..m, sinks m..m+k; an implicit super-source with
    // potential 0 feeds every source that still has supply
    let nn = m + k;
    let mut pot = vec![0.0_f64; nn];
    let eps = 1e-15;
    loop {
        let remaining: f64 = supply.iter().filter(|&&s| s > eps).sum();
        if remaining <= eps || demand.iter().all(|&d| d <= eps) {
            break;
        }
        let mut dist = vec![f64::INFINITY; nn];
        let mut prev = vec![usize::MAX; nn];
        let mut done = vec![false; nn];
        for i in 0..m {
            if supply[i] > eps {
                dist[i] = (-pot[i]).max(0.0);
            }
        }
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nn {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < m {
                for j in 0..k {
                    let v = m + j;
                    let rc = (c[u][j] + pot[u] - pot[v]).max(0.0);
                    if dist[u] + rc < dist[v] {
                        dist[v] = dist[u] + rc;
                        prev[v] = u;
                    }
                }
            } else {
                let j = u - m;
                for i in 0..m {
                    if flow[i][j] > eps {
                        let rc = (-c[i][j] + pot[u] - pot[i]).max(0.0);
                        if dist[u] + rc < dist[i] {
                            dist[i] = dist[u] + rc;
                            prev[i] = u;
                        }
                    }
                }
            }
        }
        let target = (0..k)
            .filter(|&j| demand[j] > eps && dist[m + j].is_finite())
            .min_by(|&x, &y| dist[m + x].total_cmp(&dist[m + y]))
            .ok_or_else(|| Error::Infeasible("no augmenting path in transport problem".into()))?;
        // bottleneck along the path
        let mut amount = demand[target];
        let mut v = m + target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= m {
                amount = amount.min(flow[v][u - m]);
            }
            v = u;
        }
        amount = amount.min(supply[v]);
        let start = v;
        let mut v = m + target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < m {
                flow[u][v - m] += amount;
            } else {
                flow[v][u - m] -= amount;
            }
            v = u;
        }
        supply[start] -= amount;
        demand[target] -= amount;
        let cap = dist[m + target];
        for v in 0..nn {
            pot[v] += dist[v].min(cap);
        }
    }
    let mut plan = TransportPlan::default();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..k {
            if flow[i][j] > eps {
                plan.entries.push((i, j, flow[i][j]));
                total += flow[i][j] * c[i][j];
            }
        }
    }
    Ok((total, plan))
}

/// `d_{1,ε}`: optimal transport for `c_ε(x, y) = |x₁ - y₁| + ε⁻¹ |x₂ - y₂|`.
pub fn eps_relaxed_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    Ok(exact_transport(mu, nu, |x, y| (x.x - y.x).abs() + (x.y - y.y).abs() / eps)?.0)
}

/// Unconstrained `d₁` with Euclidean cost.
pub fn euclidean_w1(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    Ok(exact_transport(mu, nu, |x, y| (x - y).norm())?.0)
}

/// `d₁` between the horizontal marginals.
pub fn horizontal_marginal_w1(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    let a: Vec<(f64, f64)> = mu.atoms().iter().map(|(p, w)| (p.x, *w)).collect();
    let b: Vec<(f64, f64)> = nu.atoms().iter().map(|(p, w)| (p.x, *w)).collect();
    plane_w1(&a, &b)
}

/// `∫ φ d(μ - ν)` for `φ` that is 1-Lipschitz in `x₁` along each slip plane;
/// the condition is checked between consecutive atoms of `μ ∪ ν` per plane.
pub fn dual_lower_bound<F>(mu: &DiscreteMeasure, nu: &DiscreteMeasure, phi: F) -> Result<f64>
where
    F: Fn(&Point) -> f64,
{
    let mut pts: Vec<Point> = mu.atoms().iter().chain(nu.atoms()).map(|a| a.0).collect();
    pts.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x)));
    for w in pts.windows(2) {
        if w[0].y == w[1].y && w[1].x > w[0].x {
            let slope = (phi(&w[1]) - phi(&w[0])).abs() / (w[1].x - w[0].x);
            if slope > 1.0 + 1e-12 {
                return Err(Error::LipschitzViolation { plane: w[0].y, slope });
            }
        }
    }
    Ok(mu.integrate(&phi) - nu.integrate(&phi))
}

/// Piecewise-linear test function, 1-Lipschitz in `x₁` along each slip plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanePotential {
    /// `(y, knots, values)` per plane.
    pub planes: Vec<(f64, Vec<f64>, Vec<f64>)>,
}

impl PlanePotential {
    /// Linear between knots, constant beyond them, zero off the planes.
    pub fn eval(&self, p: &Point) -> f64 {
        let Some((_, xs, vs)) = self.planes.iter().find(|pl| (pl.0 - p.y).abs() <= PLANE_TOL) else {
            return 0.0;
        };
        let k = xs.partition_point(|&x| x <= p.x);
        if k == 0 {
            vs[0]
        } else if k == xs.len() {
            vs[k - 1]
        } else {
            let t = (p.x - xs[k - 1]) / (xs[k] - xs[k - 1]);
            vs[k - 1] + t * (vs[k] - vs[k - 1])
        }
    }
}

/// Potential attaining `d(μ, ν)` in `∫ φ d(μ - ν)`: on each plane its slope is
/// `-sign(F_μ - F_ν)` of the cumulative distributions.
pub fn optimal_plane_potential(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<PlanePotential> {
    if !same_vertical_marginal(mu, nu, PLANE_TOL) {
        return Err(Error::InvalidParameter("vertical marginals differ; d is infinite".into()));
    }
    let planes = mu
        .planes()
        .iter()
        .zip(nu.planes().iter())
        .map(|(a, b)| {
            let mut ev: Vec<(f64, f64)> = slice_pairs(a);
            ev.extend(slice_pairs(b).into_iter().map(|(x, w)| (x, -w)));
            ev.sort_by(|p, q| p.0.total_cmp(&q.0));
            let (mut xs, mut vs) = (vec![ev[0].0], vec![0.0]);
            let mut cum = 0.0;
            for w in ev.windows(2) {
                cum += w[0].1;
                if w[1].0 > w[0].0 {
                    let slope = if cum > 0.0 { -1.0 } else if cum < 0.0 { 1.0 } else { 0.0 };
                    let last = *vs.last().unwrap_or(&0.0);
                    xs.push(w[1].0);
                    vs.push(last + slope * (w[1].0 - w[0].0));
                }
            }
            (a.y, xs, vs)
        })
        .collect();
    Ok(PlanePotential { planes })
}

/// `Σ d(state_{i+1}, state_i)`; `+∞` as soon as one step is infinite.
pub fn trajectory_dissipation(states: &[DiscreteMeasure]) -> f64 {
    states.windows(2).map(|w| slip_distance(&w[1], &w[0], PLANE_TOL)).sum()
}
