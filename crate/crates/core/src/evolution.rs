//! Rate-independent quasi-static evolution by incremental minimisation,
//! with the configurational forces and the stability, flow-rule and
//! energy-balance diagnostics.
//!
//! Forces are scaled so the yield threshold is 1: for the `i`-th dislocation
//! `force_i = -n ∂_{z_i,1} 𝓕_n + ∂₁f(t, z_i)`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Arc;

use crate::corrector::{CorrectorSolver, RitzBasis};
use crate::interaction::{interaction_sum, v_freespace_dy1, InteractionEngine, InteractionMode, QuadratureConfig, SourceData};
use crate::transport::slip_distance;
use crate::{DislocationConfig, Error, Geometry, Material, Point, Result};

/// Piecewise-linear `σ(t)` through the given knots, constant outside them.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaProfile {
    knots: Vec<(f64, f64)>,
}

impl SigmaProfile {
    pub fn new(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidParameter("stress profile needs at least one knot".into()));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) || knots.iter().any(|k| !(k.0.is_finite() && k.1.is_finite())) {
            return Err(Error::InvalidParameter("stress profile knots must have distinct finite times".into()));
        }
        Ok(Self { knots })
    }

    pub fn constant(sigma: f64) -> Self {
        Self { knots: vec![(0.0, sigma)] }
    }

    /// `σ(t) = rate · t` on `[0, horizon]`.
    pub fn ramp(rate: f64, horizon: f64) -> Self {
        Self { knots: vec![(0.0, 0.0), (horizon, rate * horizon)] }
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    fn segment(&self, t: f64) -> Option<usize> {
        let k = &self.knots;
        if k.len() < 2 || t < k[0].0 || t >= k[k.len() - 1].0 {
            return None;
        }
        Some(k.partition_point(|p| p.0 <= t) - 1)
    }

    pub fn value(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= k[0].0 {
            return k[0].1;
        }
        if t >= k[k.len() - 1].0 {
            return k[k.len() - 1].1;
        }
        let s = self.segment(t).expect("inside the knot range");
        let (a, b) = (k[s], k[s + 1]);
        a.1 + (t - a.0) * (b.1 - a.1) / (b.0 - a.0)
    }

    /// Right derivative.
    pub fn derivative(&self, t: f64) -> f64 {
        match self.segment(t) {
            Some(s) => {
                let (a, b) = (self.knots[s], self.knots[s + 1]);
                (b.1 - a.1) / (b.0 - a.0)
            }
            None => 0.0,
        }
    }
}

type ScalarField = Arc<dyn Fn(f64, &Point) -> f64 + Send + Sync>;

#[derive(Clone)]
enum LoadSource {
    Shear(SigmaProfile),
    Custom { f: ScalarField, df_dt: ScalarField, df_dx1: ScalarField },
}

/// The loading potential `f(t, x)`.
#[derive(Clone)]
pub struct LoadingProgram {
    source: LoadSource,
    pub horizon: f64,
}

impl fmt::Debug for LoadingProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            LoadSource::Shear(s) => f.debug_struct("UniformShear").field("sigma", s).field("horizon", &self.horizon).finish(),
            LoadSource::Custom { .. } => f.debug_struct("Custom").field("horizon", &self.horizon).finish(),
        }
    }
}

impl LoadingProgram {
    /// `f(t, x) = σ(t) x₁`.
    pub fn uniform_shear(sigma: SigmaProfile, horizon: f64) -> Self {
        Self { source: LoadSource::Shear(sigma), horizon }
    }

    /// A general potential with its time derivative and `∂/∂x₁`.
    pub fn custom<F, G, H>(f: F, df_dt: G, df_dx1: H, horizon: f64) -> Self
    where
        F: Fn(f64, &Point) -> f64 + Send + Sync + 'static,
        G: Fn(f64, &Point) -> f64 + Send + Sync + 'static,
        H: Fn(f64, &Point) -> f64 + Send + Sync + 'static,
    {
        Self { source: LoadSource::Custom { f: Arc::new(f), df_dt: Arc::new(df_dt), df_dx1: Arc::new(df_dx1) }, horizon }
    }

    pub fn sigma(&self) -> Option<&SigmaProfile> {
        match &self.source {
            LoadSource::Shear(s) => Some(s),
            LoadSource::Custom { .. } => None,
        }
    }

    pub fn f(&self, t: f64, x: &Point) -> f64 {
        match &self.source {
            LoadSource::Shear(s) => s.value(t) * x.x,
            LoadSource::Custom { f, .. } => f(t, x),
        }
    }

    pub fn f_t(&self, t: f64, x: &Point) -> f64 {
        match &self.source {
            LoadSource::Shear(s) => s.derivative(t) * x.x,
            LoadSource::Custom { df_dt, .. } => df_dt(t, x),
        }
    }

    pub fn f_x1(&self, t: f64, x: &Point) -> f64 {
        match &self.source {
            LoadSource::Shear(s) => s.value(t),
            LoadSource::Custom { df_dx1, .. } => df_dx1(t, x),
        }
    }

    /// `∫ f(t) dμ` for the empirical measure of `cfg`.
    pub fn work(&self, t: f64, cfg: &DislocationConfig) -> f64 {
        cfg.points().iter().map(|p| self.f(t, p)).sum::<f64>() / cfg.n() as f64
    }

    /// `∫ ∂_t f(t) dμ`.
    pub fn power(&self, t: f64, cfg: &DislocationConfig) -> f64 {
        cfg.points().iter().map(|p| self.f_t(t, p)).sum::<f64>() / cfg.n() as f64
    }
}

/// Controls of the incremental minimisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stability tolerance and convergence threshold of the sweeps.
    pub sweep_tol: f64,
    pub max_sweeps: usize,
    /// Perturbed restarts per step.
    pub restarts: usize,
    /// Grid points of the scan preceding each one-dimensional search.
    pub line_grid: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { sweep_tol: 1e-6, max_sweeps: 500, restarts: 2, line_grid: 64, seed: 0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sweep_tol > 0.0) || self.max_sweeps == 0 || self.line_grid < 2 {
            return Err(Error::InvalidParameter("solver tolerances and counts must be positive".into()));
        }
        Ok(())
    }
}

/// Everything needed to evaluate `𝓕_n` and its derivatives.
#[derive(Debug, Clone)]
pub struct EnergyContext {
    pub mode: InteractionMode,
    pub geom: Geometry,
    pub mat: Material,
    pub q: QuadratureConfig,
    engine: InteractionEngine,
    corrector: Option<CorrectorSolver>,
}

impl EnergyContext {
    pub fn new(mode: InteractionMode, geom: Geometry, mat: Material, q: QuadratureConfig, basis: RitzBasis) -> Result<Self> {
        let engine = InteractionEngine::new(&geom, &mat, &q)?;
        let corrector = match mode {
            InteractionMode::Bounded => Some(CorrectorSolver::new(&geom, &mat, basis, &q)?),
            InteractionMode::Freespace => None,
        };
        Ok(Self { mode, geom, mat, q, engine, corrector })
    }

    pub fn freespace(geom: Geometry, mat: Material) -> Result<Self> {
        Self::new(InteractionMode::Freespace, geom, mat, QuadratureConfig::default(), RitzBasis::default())
    }

    /// `𝓕_n(μ)`: interaction sum plus the corrector energy in bounded mode.
    pub fn energy(&self, cfg: &DislocationConfig) -> Result<f64> {
        let pair = interaction_sum(cfg, self.mode, &self.geom, &self.mat, &self.q)?;
        Ok(match &self.corrector {
            Some(c) => pair + c.energy_of_load(&c.config_load(cfg)),
            None => pair,
        })
    }

    /// `𝓕_n(μ) - ∫ f(t) dμ`.
    pub fn loaded_energy(&self, cfg: &DislocationConfig, t: f64, load: &LoadingProgram) -> Result<f64> {
        Ok(self.energy(cfg)? - load.work(t, cfg))
    }

    fn workspace(&self, cfg: &DislocationConfig) -> Workspace<'_> {
        Workspace::new(self, cfg)
    }
}

/// Horizontal configurational forces, one per dislocation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceRecord {
    pub forces: Vec<f64>,
}

/// Cached per-dislocation data for fast one-coordinate energy updates.
struct Workspace<'a> {
    ctx: &'a EnergyContext,
    xs: Vec<f64>,
    ys: Vec<f64>,
    sources: Vec<SourceData>,
    loads: Vec<DVector<f64>>,
    total_load: DVector<f64>,
}

impl<'a> Workspace<'a> {
    fn new(ctx: &'a EnergyContext, cfg: &DislocationConfig) -> Self {
        let xs = cfg.abscissae();
        let ys: Vec<f64> = cfg.points().iter().map(|p| p.y).collect();
        let n = xs.len();
        let (mut sources, mut loads) = (Vec::new(), Vec::new());
        let mut total_load = DVector::zeros(0);
        if let Some(c) = &ctx.corrector {
            total_load = DVector::zeros(c.basis.len());
            for p in cfg.points() {
                let s = ctx.engine.source(p);
                let l = c.load(&s.weighted_traction);
                total_load += &l / n as f64;
                sources.push(s);
                loads.push(l);
            }
        }
        Self { ctx, xs, ys, sources, loads, total_load }
    }

    fn n(&self) -> usize {
        self.xs.len()
    }

    fn point(&self, i: usize) -> Point {
        Point::new(self.xs[i], self.ys[i])
    }

    fn bounded(&self) -> bool {
        self.ctx.corrector.is_some()
    }

    /// Terms of `n 𝓕_n` that depend on the position `x` of dislocation `i`,
    /// with the source data at `x` when in bounded mode.
    fn local(&self, i: usize, x: f64) -> (f64, Option<(SourceData, DVector<f64>)>) {
        let n = self.n();
        let p = Point::new(x, self.ys[i]);
        if let Some(c) = &self.ctx.corrector {
            let s = self.ctx.engine.source(&p);
            let mut pair = 0.0;
            for j in 0..n {
                if j != i {
                    pair += self.ctx.engine.v_sources(&s, &self.sources[j]);
                }
            }
            let l = c.load(&s.weighted_traction);
            let load = &self.total_load + (&l - &self.loads[i]) / n as f64;
            let e = pair / n as f64 + n as f64 * c.energy_of_load(&load);
            (e, Some((s, l)))
        } else {
            let coef = self.ctx.mat.log_coefficient();
            let mut pair = 0.0;
            for j in 0..n {
                if j != i {
                    pair -= coef * (p - self.point(j)).norm().ln();
                }
            }
            (pair / n as f64, None)
        }
    }

    fn set(&mut self, i: usize, x: f64, data: Option<(SourceData, DVector<f64>)>) {
        self.xs[i] = x;
        if let Some((s, l)) = data {
            let n = self.n() as f64;
            self.total_load += (&l - &self.loads[i]) / n;
            self.sources[i] = s;
            self.loads[i] = l;
        }
    }

    /// `n 𝓕_n` from the cached data.
    fn scaled_energy(&self) -> f64 {
        let n = self.n();
        let mut pair = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    pair += if self.bounded() {
                        self.ctx.engine.v_sources(&self.sources[i], &self.sources[j])
                    } else {
                        -self.ctx.mat.log_coefficient() * (self.point(i) - self.point(j)).norm().ln()
                    };
                }
            }
        }
        let mut e = pair / (2.0 * n as f64);
        if let Some(c) = &self.ctx.corrector {
            e += n as f64 * c.energy_of_load(&self.total_load);
        }
        e
    }

    /// `-n ∂_{z_i,1} 𝓕_n`.
    fn elastic_force(&self, i: usize) -> f64 {
        let n = self.n();
        let p = self.point(i);
        let mut dv = 0.0;
        if let Some(c) = &self.ctx.corrector {
            let dt = self.ctx.engine.weighted_traction_dy1(&p);
            for j in 0..n {
                if j != i {
                    dv += self.ctx.engine.dv_dy1_with(&p, &dt, &self.sources[j]);
                }
            }
            let dload = c.load(&dt);
            // d/dz of n I(L) with dL/dz = dload / n
            let di = c.energy_derivative(&self.total_load, &dload);
            -dv / n as f64 - di
        } else {
            for j in 0..n {
                if j != i {
                    dv += v_freespace_dy1(&p, &self.point(j), &self.ctx.mat);
                }
            }
            -dv / n as f64
        }
    }
}

/// Feasible range of dislocation `i` with all others frozen: ℛ, same-plane
/// order and separation, and cross-plane separation. Returns the component
/// containing the current abscissa.
fn feasible_interval(cfg_planes: &Neighbours, xs: &[f64], ys: &[f64], i: usize, r: f64, geom: &Geometry) -> (f64, f64) {
    let pad = r * (1.0 + 1e-12);
    let rb = &geom.confinement;
    let mut a = rb.x0;
    let mut b = rb.x1;
    if let Some(l) = cfg_planes.left[i] {
        a = a.max(xs[l] + pad);
    }
    if let Some(rn) = cfg_planes.right[i] {
        b = b.min(xs[rn] - pad);
    }
    let x = xs[i];
    for j in 0..xs.len() {
        let dy = (ys[j] - ys[i]).abs();
        if j == i || ys[j] == ys[i] || dy >= r {
            continue;
        }
        let w = (r * r - dy * dy).sqrt() * (1.0 + 1e-12);
        if xs[j] >= x {
            b = b.min(xs[j] - w);
        } else {
            a = a.max(xs[j] + w);
        }
    }
    if a > b {
        (x, x)
    } else {
        (a, b)
    }
}

/// Same-plane neighbours by index.
struct Neighbours {
    left: Vec<Option<usize>>,
    right: Vec<Option<usize>>,
}

impl Neighbours {
    fn of(cfg: &DislocationConfig) -> Self {
        let n = cfg.n();
        let mut left = vec![None; n];
        let mut right = vec![None; n];
        for p in cfg.planes() {
            for w in p.members.windows(2) {
                right[w[0]] = Some(w[1]);
                left[w[1]] = Some(w[0]);
            }
        }
        Self { left, right }
    }
}

/// Brent's minimiser on `[a, b]`.
fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    const CG: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut x = a + CG * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e): (f64, f64) = (0.0, 0.0);
    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-15;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if !(p.abs() >= (0.5 * q * etemp).abs() || p <= q * (a - x) || p >= q * (b - x)) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CG * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + if d >= 0.0 { tol1 } else { -tol1 } };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

/// Minimises `g` on `[a, b]`: grid scan including `special` points, then
/// Brent on the bracket around the best scanned point.
fn line_minimize<F: FnMut(f64) -> f64>(mut g: F, a: f64, b: f64, special: &[f64], grid: usize) -> (f64, f64) {
    let mut pts: Vec<f64> = (0..grid).map(|k| a + (b - a) * k as f64 / (grid - 1) as f64).collect();
    pts.extend(special.iter().copied().filter(|&s| s >= a && s <= b));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let vals: Vec<f64> = pts.iter().map(|&x| g(x)).collect();
    let mut k = 0;
    for j in 1..pts.len() {
        if vals[j] < vals[k] {
            k = j;
        }
    }
    let (mut bx, mut bv) = (pts[k], vals[k]);
    if pts.len() > 1 {
        let lo = pts[k.saturating_sub(1)];
        let hi = pts[(k + 1).min(pts.len() - 1)];
        if hi > lo {
            let (x, v) = brent(&mut g, lo, hi, 1e-12, 200);
            if v < bv {
                bx = x;
                bv = v;
            }
        }
    }
    (bx, bv)
}

fn check_plane_capacity(cfg: &DislocationConfig, geom: &Geometry) -> Result<()> {
    let r = cfg.r_n();
    for p in cfg.planes() {
        let need = (p.members.len().saturating_sub(1)) as f64 * r;
        if need > geom.confinement.width() {
            return Err(Error::Infeasible(format!(
                "{} dislocations on plane y = {} need width {need}, the confinement has {}",
                p.members.len(),
                p.y,
                geom.confinement.width()
            )));
        }
    }
    Ok(())
}

/// Result of one constrained descent from a starting point.
struct Descent {
    xs: Vec<f64>,
    objective: f64,
}

#[allow(clippy::too_many_arguments)]
fn coordinate_descent(
    ctx: &EnergyContext,
    start: &DislocationConfig,
    prev_xs: &[f64],
    t: f64,
    load: &LoadingProgram,
    solver: &SolverConfig,
    nb: &Neighbours,
) -> Result<Descent> {
    let mut ws = ctx.workspace(start);
    let n = ws.n();
    let r = start.r_n();
    let width = ctx.geom.confinement.width();
    for _ in 0..solver.max_sweeps {
        let mut max_move: f64 = 0.0;
        for i in 0..n {
            let (a, b) = feasible_interval(nb, &ws.xs, &ws.ys, i, r, &ctx.geom);
            let y = ws.ys[i];
            let xp = prev_xs[i];
            let x_cur = ws.xs[i];
            let g = |x: f64| ws.local(i, x).0 + (x - xp).abs() - load.f(t, &Point::new(x, y));
            let g_cur = g(x_cur);
            if !(b > a) {
                continue;
            }
            let (x_new, g_new) = line_minimize(g, a, b, &[a, b, xp, x_cur], solver.line_grid);
            if g_new < g_cur - 1e-14 * (1.0 + g_cur.abs()) {
                let (_, data) = ws.local(i, x_new);
                max_move = max_move.max((x_new - x_cur).abs());
                ws.set(i, x_new, data);
            }
        }
        if max_move <= 1e-13 * width {
            break;
        }
    }
    let objective = ws.scaled_energy()
        + ws.xs.iter().zip(prev_xs).map(|(x, p)| (x - p).abs()).sum::<f64>()
        - ws.xs.iter().zip(&ws.ys).map(|(&x, &y)| load.f(t, &Point::new(x, y))).sum::<f64>();
    Ok(Descent { xs: ws.xs, objective })
}

/// Random admissible rearrangement of `cfg` within its slip planes.
fn perturbed(cfg: &DislocationConfig, geom: &Geometry, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let r = cfg.r_n() * (1.0 + 1e-9);
    let rb = &geom.confinement;
    let delta = 0.1 * rb.width();
    let mut xs = cfg.abscissae();
    for p in cfg.planes() {
        let mut v: Vec<f64> = p.members.iter().map(|&i| (xs[i] + rng.gen_range(-delta..delta)).clamp(rb.x0, rb.x1)).collect();
        v.sort_by(f64::total_cmp);
        for k in 1..v.len() {
            v[k] = v[k].max(v[k - 1] + r);
        }
        let last = v.len() - 1;
        if v[last] > rb.x1 {
            v[last] = rb.x1;
            for k in (0..last).rev() {
                v[k] = v[k].min(v[k + 1] - r);
            }
        }
        if v[0] < rb.x0 {
            return None;
        }
        for (&i, x) in p.members.iter().zip(v) {
            xs[i] = x;
        }
    }
    Some(xs)
}

/// One step of the incremental scheme: minimises
/// `n 𝓕_n(ν) + n d(ν, prev) - n ∫ f(t) dν` over horizontal rearrangements of
/// `prev` that keep each slip plane's order.
pub fn incremental_step(
    prev: &DislocationConfig,
    t: f64,
    load: &LoadingProgram,
    solver: &SolverConfig,
    ctx: &EnergyContext,
) -> Result<DislocationConfig> {
    incremental_step_seeded(prev, t, load, solver, ctx, 0).map(|(c, _)| c)
}

/// [`incremental_step`] with an explicit restart stream; also reports whether
/// a restart beat the plain descent.
pub fn incremental_step_seeded(
    prev: &DislocationConfig,
    t: f64,
    load: &LoadingProgram,
    solver: &SolverConfig,
    ctx: &EnergyContext,
    stream: u64,
) -> Result<(DislocationConfig, bool)> {
    solver.validate()?;
    check_plane_capacity(prev, &ctx.geom)?;
    prev.validate(&ctx.geom)?;
    let nb = Neighbours::of(prev);
    let prev_xs = prev.abscissae();
    let mut best = coordinate_descent(ctx, prev, &prev_xs, t, load, solver, &nb)?;
    let mut improved = false;
    let mut rng = ChaCha8Rng::seed_from_u64(solver.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stream);
    for _ in 0..solver.restarts {
        let Some(xs) = perturbed(prev, &ctx.geom, &mut rng) else { continue };
        let start = prev.with_abscissae(&xs)?;
        if start.validate(&ctx.geom).is_err() {
            continue;
        }
        let cand = coordinate_descent(ctx, &start, &prev_xs, t, load, solver, &nb)?;
        if cand.objective < best.objective - 1e-10 * (1.0 + best.objective.abs()) {
            log::warn!(
                "restart improved the incremental objective at t = {t} by {:e}",
                best.objective - cand.objective
            );
            best = cand;
            improved = true;
        }
    }
    let out = prev.with_abscissae(&best.xs)?;
    out.validate(&ctx.geom)?;
    Ok((out, improved))
}

/// Configurational forces at time `t`.
pub fn driving_force(cfg: &DislocationConfig, t: f64, load: &LoadingProgram, ctx: &EnergyContext) -> Result<ForceRecord> {
    if let Some((i, _, d)) = cfg.closest_pair() {
        if d < crate::kernels::SINGULAR_GUARD {
            let p = cfg.points()[i];
            return Err(Error::CoincidentPoints(p.x, p.y));
        }
    }
    let ws = ctx.workspace(cfg);
    let forces = (0..cfg.n()).map(|i| ws.elastic_force(i) + load.f_x1(t, &cfg.points()[i])).collect();
    Ok(ForceRecord { forces })
}

/// Forces projected by the one-sided convention: a dislocation resting on the
/// right (left) end of its feasible range may be pushed beyond threshold to
/// the right (left).
fn effective_forces(cfg: &DislocationConfig, forces: &[f64], geom: &Geometry) -> Vec<f64> {
    let nb = Neighbours::of(cfg);
    let xs = cfg.abscissae();
    let ys: Vec<f64> = cfg.points().iter().map(|p| p.y).collect();
    let tol = 1e-9 * geom.confinement.width();
    (0..cfg.n())
        .map(|i| {
            let (a, b) = feasible_interval(&nb, &xs, &ys, i, cfg.r_n(), geom);
            let f = forces[i];
            if f > 1.0 && xs[i] >= b - tol {
                1.0
            } else if f < -1.0 && xs[i] <= a + tol {
                -1.0
            } else {
                f
            }
        })
        .collect()
}

/// `max_i (|force_i| - 1)₊` with the one-sided convention at constraints.
pub fn stability_residual(cfg: &DislocationConfig, t: f64, load: &LoadingProgram, ctx: &EnergyContext) -> Result<f64> {
    let f = driving_force(cfg, t, load, ctx)?;
    Ok(effective_forces(cfg, &f.forces, &ctx.geom).iter().map(|f| (f.abs() - 1.0).max(0.0)).fold(0.0, f64::max))
}

/// Repeats incremental steps at fixed `t` until the configuration is stable.
pub fn relax(
    cfg: &DislocationConfig,
    t: f64,
    load: &LoadingProgram,
    solver: &SolverConfig,
    ctx: &EnergyContext,
) -> Result<DislocationConfig> {
    let mut cur = cfg.clone();
    for k in 0..100 {
        if stability_residual(&cur, t, load, ctx)? <= solver.sweep_tol {
            return Ok(cur);
        }
        let (next, _) = incremental_step_seeded(&cur, t, load, solver, ctx, u64::MAX - k)?;
        if next.points() == cur.points() {
            break;
        }
        cur = next;
    }
    let residual = stability_residual(&cur, t, load, ctx)?;
    if residual > solver.sweep_tol {
        return Err(Error::Unstable { residual, tol: solver.sweep_tol });
    }
    Ok(cur)
}

/// Time-discrete quasi-static trajectory.
#[derive(Debug, Clone)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub configs: Vec<DislocationConfig>,
    /// `d(μ_k, μ_{k-1})`, zero at the first time.
    pub step_d: Vec<f64>,
    /// `𝓕_n(μ_k)`.
    pub energies: Vec<f64>,
    pub forces: Vec<ForceRecord>,
    /// Steps where a perturbed restart found a better minimiser.
    pub restart_improvements: usize,
}

impl EvolutionTrace {
    /// Cumulative dissipation `𝒟(μ, [0, t_k])`.
    pub fn dissipation(&self) -> Vec<f64> {
        self.step_d
            .iter()
            .scan(0.0, |acc, d| {
                *acc += d;
                Some(*acc)
            })
            .collect()
    }
}

/// Sequential incremental minimisation over `times`, starting from a stable
/// configuration.
pub fn run_quasistatic(
    init: &DislocationConfig,
    times: &[f64],
    load: &LoadingProgram,
    solver: &SolverConfig,
    ctx: &EnergyContext,
) -> Result<EvolutionTrace> {
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("time grid must be non-empty and increasing".into()));
    }
    init.validate(&ctx.geom)?;
    let residual = stability_residual(init, times[0], load, ctx)?;
    if residual > solver.sweep_tol {
        return Err(Error::Unstable { residual, tol: solver.sweep_tol });
    }
    let mut trace = EvolutionTrace {
        times: times.to_vec(),
        configs: vec![init.clone()],
        step_d: vec![0.0],
        energies: vec![ctx.energy(init)?],
        forces: vec![driving_force(init, times[0], load, ctx)?],
        restart_improvements: 0,
    };
    for (k, &t) in times.iter().enumerate().skip(1) {
        let prev = trace.configs.last().expect("trace is never empty");
        let (next, improved) = incremental_step_seeded(prev, t, load, solver, ctx, k as u64)?;
        let d = slip_distance(&next.to_measure()?, &prev.to_measure()?, crate::transport::PLANE_TOL);
        if !d.is_finite() {
            return Err(Error::Infeasible("step changed the vertical marginal".into()));
        }
        trace.restart_improvements += improved as usize;
        trace.step_d.push(d);
        trace.energies.push(ctx.energy(&next)?);
        trace.forces.push(driving_force(&next, t, load, ctx)?);
        trace.configs.push(next);
    }
    Ok(trace)
}

/// `max_k |LHS(t_k) - RHS(t_k)|` of the energy balance, with the power
/// integral by the trapezoid rule on the trace's grid.
pub fn energy_balance_residual(trace: &EvolutionTrace, load: &LoadingProgram) -> f64 {
    let t = &trace.times;
    let diss = trace.dissipation();
    let rhs0 = trace.energies[0] - load.work(t[0], &trace.configs[0]);
    let mut integral = 0.0;
    let mut worst: f64 = 0.0;
    for k in 0..t.len() {
        if k > 0 {
            let p0 = load.power(t[k - 1], &trace.configs[k - 1]);
            let p1 = load.power(t[k], &trace.configs[k]);
            integral += 0.5 * (t[k] - t[k - 1]) * (p0 + p1);
        }
        let lhs = trace.energies[k] + diss[k] - load.work(t[k], &trace.configs[k]);
        worst = worst.max((lhs - (rhs0 - integral)).abs());
    }
    worst
}

/// `max |force_i Δx_i - |Δx_i||` over moving dislocations, with forces at the
/// arrival state under the one-sided convention.
pub fn flow_rule_residual(trace: &EvolutionTrace, ctx: &EnergyContext, motion_tol: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 1..trace.configs.len() {
        let (a, b) = (&trace.configs[k - 1], &trace.configs[k]);
        let eff = effective_forces(b, &trace.forces[k].forces, &ctx.geom);
        for i in 0..b.n() {
            let dx = b.points()[i].x - a.points()[i].x;
            if dx.abs() > motion_tol {
                worst = worst.max((eff[i] * dx - dx.abs()).abs());
            }
        }
    }
    worst
}

/// `max_k [𝓕̃(μ_k, t_k) + d(μ_k, μ_{k-1}) - 𝓕̃(μ_{k-1}, t_k)]`; non-positive
/// when every step did at least as well as staying put.
pub fn minimality_violation(trace: &EvolutionTrace, load: &LoadingProgram) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for k in 1..trace.configs.len() {
        let t = trace.times[k];
        let new = trace.energies[k] - load.work(t, &trace.configs[k]) + trace.step_d[k];
        let old = trace.energies[k - 1] - load.work(t, &trace.configs[k - 1]);
        worst = worst.max(new - old);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{pt, ScalingSchedule};
    use std::f64::consts::PI;

    fn ctx() -> EnergyContext {
        EnergyContext::freespace(Geometry::unit_square(), Material::unit()).unwrap()
    }

    fn single(x: f64) -> DislocationConfig {
        DislocationConfig::new(vec![pt(x, 0.5)], ScalingSchedule::default()).unwrap()
    }

    #[test]
    fn sigma_profile_interpolates() {
        let s = SigmaProfile::new(vec![(0.0, 0.0), (1.0, 2.0), (3.0, 2.0)]).unwrap();
        assert_eq!(s.value(-1.0), 0.0);
        assert_eq!(s.value(0.5), 1.0);
        assert_eq!(s.value(2.0), 2.0);
        assert_eq!(s.derivative(0.5), 2.0);
        assert_eq!(s.derivative(1.0), 0.0);
        assert_eq!(s.derivative(5.0), 0.0);
        assert!(SigmaProfile::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
    }

    #[test]
    fn single_dislocation_force_is_the_applied_stress() {
        let load = LoadingProgram::uniform_shear(SigmaProfile::constant(0.5), 1.0);
        let f = driving_force(&single(0.5), 0.0, &load, &ctx()).unwrap();
        assert_eq!(f.forces, vec![0.5]);
        assert_eq!(stability_residual(&single(0.5), 0.0, &load, &ctx()).unwrap(), 0.0);
        let load = LoadingProgram::uniform_shear(SigmaProfile::constant(1.2), 1.0);
        assert!((stability_residual(&single(0.5), 0.0, &load, &ctx()).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn pair_force_in_free_space() {
        let s = 0.2;
        let cfg = DislocationConfig::new(vec![pt(0.4, 0.5), pt(0.4 + s, 0.5)], ScalingSchedule::default()).unwrap();
        let load = LoadingProgram::uniform_shear(SigmaProfile::constant(0.0), 1.0);
        let f = driving_force(&cfg, 0.0, &load, &ctx()).unwrap().forces;
        let expected = 1.0 / (3.0 * PI * s);
        assert!((f[1] - expected).abs() < 1e-13 && (f[0] + expected).abs() < 1e-13);
    }

    #[test]
    fn incremental_step_single_dislocation() {
        let c = ctx();
        let solver = SolverConfig::default();
        let weak = LoadingProgram::uniform_shear(SigmaProfile::constant(0.5), 1.0);
        assert_eq!(incremental_step(&single(0.5), 0.0, &weak, &solver, &c).unwrap().points()[0].x, 0.5);
        let strong = LoadingProgram::uniform_shear(SigmaProfile::constant(2.0), 1.0);
        assert_eq!(incremental_step(&single(0.5), 0.0, &strong, &solver, &c).unwrap().points()[0].x, 0.75);
    }

    #[test]
    fn brent_finds_smooth_minimum() {
        let (x, v) = brent(|x| (x - 0.3).powi(2) + 1.0, 0.0, 1.0, 1e-12, 200);
        assert!((x - 0.3).abs() < 1e-7 && (v - 1.0).abs() < 1e-14);
        let (x, _) = line_minimize(|x| (x - 0.7).abs(), 0.0, 1.0, &[], 10);
        assert!((x - 0.7).abs() < 1e-9);
    }
}
