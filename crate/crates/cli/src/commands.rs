//! Experiment drivers: each returns a [`Report`] without touching the disk.

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use slipflow::corrector::{solve_corrector, CorrectorSource};
use slipflow::evolution::{
    energy_balance_residual, flow_rule_residual, minimality_violation, relax, run_quasistatic,
    stability_residual, EvolutionTrace,
};
use slipflow::interaction::{continuum_freespace, continuum_interaction, interaction_sum, InteractionMode};
use slipflow::kernels::{circulation, core_traction_max, divergence_residual, eval_k, eval_kn, CoreRadius};
use slipflow::measure::{CellMeasure, DiscreteMeasure};
use slipflow::recovery::{discretize_grid, grid_approximation, snap_modification};
use slipflow::transport::{
    dual_lower_bound, eps_relaxed_distance, euclidean_w1, horizontal_marginal_w1, optimal_plane_potential,
    slip_distance, PLANE_TOL,
};
use slipflow::{pt, DislocationConfig, Point, Rect};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::output::{num, Report, Table};

/// Dispatches on the configured kind.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    match cfg.kind {
        ExperimentKind::Simulate => simulate(cfg),
        ExperimentKind::Gamma => gamma(cfg),
        ExperimentKind::Distance => distance(cfg),
        ExperimentKind::KernelCheck => kernel_check(cfg),
    }
}

/// Runs the configured simulation and returns the trace with its report.
pub fn simulate_trace(cfg: &ExperimentConfig) -> Result<(EvolutionTrace, Report)> {
    let Some(sim) = &cfg.simulate else { bail!("no [simulate] section") };
    let ctx = cfg.energy_context()?;
    let load = cfg.loading()?;
    let solver = cfg.solver();
    let times = cfg.times()?;
    let geom = cfg.geometry()?;
    let pts: Vec<Point> = sim.points.iter().map(|p| pt(p[0], p[1])).collect();
    let mut init = DislocationConfig::admissible(pts, cfg.schedule()?, &geom)?;
    if sim.relax {
        init = relax(&init, times[0], &load, &solver, &ctx).context("relaxing the initial configuration")?;
    }
    let trace = run_quasistatic(&init, &times, &load, &solver, &ctx)?;
    let n = init.n();
    let jump_tol = sim.jump_threshold.unwrap_or(0.05 * geom.confinement.width());

    let mut header: Vec<String> = vec!["step".into(), "t".into()];
    header.extend((0..n).map(|i| format!("x_{i}")));
    header.extend(
        ["energy", "loaded_energy", "step_d", "dissipation", "stability", "flow", "balance", "jump"].map(String::from),
    );
    let mut table = Table::new(header);
    let mut plot = Table::new(["t", "dissipation"]);
    let diss = trace.dissipation();
    let (mut integral, mut first_jump) = (0.0, None);
    let rhs0 = trace.energies[0] - load.work(times[0], &trace.configs[0]);
    let mut max_stability: f64 = 0.0;
    for (k, c) in trace.configs.iter().enumerate() {
        let t = times[k];
        let stability = stability_residual(c, t, &load, &ctx)?;
        max_stability = max_stability.max(stability);
        let (flow, jump) = if k == 0 {
            (0.0, false)
        } else {
            integral += 0.5 * (t - times[k - 1]) * (load.power(times[k - 1], &trace.configs[k - 1]) + load.power(t, c));
            let pair = EvolutionTrace {
                times: times[k - 1..=k].to_vec(),
                configs: trace.configs[k - 1..=k].to_vec(),
                step_d: trace.step_d[k - 1..=k].to_vec(),
                energies: trace.energies[k - 1..=k].to_vec(),
                forces: trace.forces[k - 1..=k].to_vec(),
                restart_improvements: 0,
            };
            let moved = c.points().iter().zip(trace.configs[k - 1].points()).any(|(a, b)| (a.x - b.x).abs() > jump_tol);
            (flow_rule_residual(&pair, &ctx, 1e-9), moved)
        };
        if jump && first_jump.is_none() {
            first_jump = Some(t);
        }
        let loaded = trace.energies[k] - load.work(t, c);
        let balance = (loaded + diss[k] - (rhs0 - integral)).abs();
        let mut row = vec![k.to_string(), num(t)];
        row.extend(c.points().iter().map(|p| num(p.x)));
        row.extend([
            num(trace.energies[k]),
            num(loaded),
            num(trace.step_d[k]),
            num(diss[k]),
            num(stability),
            num(flow),
            num(balance),
            u8::from(jump).to_string(),
        ]);
        table.push(row);
        plot.push(vec![num(t), num(diss[k])]);
    }
    let last = trace.configs.last().expect("trace is never empty");
    let summary = json!({
        "n": n,
        "steps": times.len() - 1,
        "mode": format!("{:?}", ctx.mode).to_lowercase(),
        "r_n": init.r_n(),
        "planes": init.points().iter().map(|p| p.y).collect::<Vec<_>>(),
        "final_positions": last.points().iter().map(|p| p.x).collect::<Vec<_>>(),
        "total_dissipation": diss.last().copied().unwrap_or(0.0),
        "first_jump_time": first_jump,
        "max_stability_residual": max_stability,
        "flow_rule_residual": flow_rule_residual(&trace, &ctx, 1e-9),
        "energy_balance_residual": energy_balance_residual(&trace, &load),
        "minimality_violation": minimality_violation(&trace, &load),
        "restart_improvements": trace.restart_improvements,
    });
    let report = Report { tables: vec![("simulate".into(), table), ("plot_dissipation".into(), plot)], summary };
    Ok((trace, report))
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Report> {
    simulate_trace(cfg).map(|(_, r)| r)
}

struct GammaRow {
    n: usize,
    r_n: f64,
    interaction: f64,
    corrector: f64,
    snap_eta: f64,
    snap_distance: f64,
}

/// Convergence table of the recovery construction for a uniform target.
pub fn gamma(cfg: &ExperimentConfig) -> Result<Report> {
    let Some(g) = &cfg.gamma else { bail!("no [gamma] section") };
    let geom = cfg.geometry()?;
    let mat = cfg.material()?;
    let q = cfg.quadrature();
    let mode = cfg.mode();
    let basis = cfg.basis()?;
    let schedule = cfg.schedule()?;
    let target = CellMeasure::uniform(Rect::new(g.target[0], g.target[1], g.target[2], g.target[3])?);
    let density = grid_approximation(&target, g.cell_size, &geom)?;

    let (continuum_pair, continuum_corr) = match mode {
        InteractionMode::Freespace => (continuum_freespace(&target, &mat), 0.0),
        InteractionMode::Bounded => (
            continuum_interaction(&target, &geom, &mat, &q)?,
            solve_corrector(CorrectorSource::Cells(&target), &geom, &mat, basis, &q)?.energy,
        ),
    };
    let continuum = continuum_pair + continuum_corr;

    let rows: Vec<Result<GammaRow>> = g
        .ladder
        .par_iter()
        .map(|&n| {
            let c = discretize_grid(&density, n, schedule).with_context(|| format!("discretising at n = {n}"))?;
            let interaction = interaction_sum(&c, mode, &geom, &mat, &q)?;
            let corrector = match mode {
                InteractionMode::Freespace => 0.0,
                InteractionMode::Bounded => solve_corrector(CorrectorSource::Config(&c), &geom, &mat, basis, &q)?.energy,
            };
            let snap_eta = (n as f64).powf(-0.5 + g.snap_gamma);
            // coarse entries have no admissible snapping grid
            let snap_distance = if snap_eta < geom.confinement.width() {
                let snapped = snap_modification(&c, snap_eta, &geom)?;
                slip_distance(&snapped.to_measure()?, &c.to_measure()?, PLANE_TOL)
            } else {
                f64::NAN
            };
            Ok(GammaRow { n, r_n: c.r_n(), interaction, corrector, snap_eta, snap_distance })
        })
        .collect();

    let mut table = Table::new([
        "n",
        "r_n",
        "interaction",
        "corrector",
        "discrete_energy",
        "continuum_energy",
        "abs_error",
        "snap_eta",
        "snap_distance",
    ]);
    let mut plot = Table::new(["n", "abs_error"]);
    let mut errors = Vec::new();
    for r in rows {
        let r = r?;
        let discrete = r.interaction + r.corrector;
        let err = (discrete - continuum).abs();
        errors.push(err);
        table.push(vec![
            r.n.to_string(),
            num(r.r_n),
            num(r.interaction),
            num(r.corrector),
            num(discrete),
            num(continuum),
            num(err),
            num(r.snap_eta),
            num(r.snap_distance),
        ]);
        plot.push(vec![r.n.to_string(), num(err)]);
    }
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    let summary = json!({
        "mode": format!("{mode:?}").to_lowercase(),
        "cell_size": g.cell_size,
        "continuum_interaction": continuum_pair,
        "continuum_corrector": continuum_corr,
        "continuum_energy": continuum,
        "errors": errors,
        "strictly_decreasing": decreasing,
        "last_over_first": errors.last().zip(errors.first()).map(|(l, f)| l / f),
    });
    Ok(Report { tables: vec![("gamma".into(), table), ("plot_error".into(), plot)], summary })
}

fn measure(atoms: &[[f64; 3]]) -> Result<DiscreteMeasure> {
    Ok(DiscreteMeasure::new(atoms.iter().map(|a| (pt(a[0], a[1]), a[2])).collect())?)
}

/// Distances between two inline measures.
pub fn distance(cfg: &ExperimentConfig) -> Result<Report> {
    let Some(dc) = &cfg.distance else { bail!("no [distance] section") };
    let (mu, nu) = (measure(&dc.mu).context("measure mu")?, measure(&dc.nu).context("measure nu")?);
    let d = slip_distance(&mu, &nu, PLANE_TOL);
    let mut table = Table::new(["quantity", "parameter", "value", "status"]);
    let status = |v: f64| if v.is_finite() { "finite" } else { "infinite" };
    table.push(vec!["d".into(), String::new(), num(d), status(d).into()]);
    let mut ladder = Vec::new();
    for &eps in &dc.eps {
        let v = eps_relaxed_distance(&mu, &nu, eps)?;
        ladder.push(v);
        table.push(vec!["d1_eps".into(), num(eps), num(v), status(v).into()]);
    }
    let euclid = euclidean_w1(&mu, &nu)?;
    let horiz = horizontal_marginal_w1(&mu, &nu)?;
    table.push(vec!["d1_euclidean".into(), String::new(), num(euclid), status(euclid).into()]);
    table.push(vec!["w1_horizontal".into(), String::new(), num(horiz), status(horiz).into()]);
    let mut bounds = vec![
        ("x1", dual_lower_bound(&mu, &nu, |p| p.x)?),
        ("-x1", dual_lower_bound(&mu, &nu, |p| -p.x)?),
        ("zero", dual_lower_bound(&mu, &nu, |_| 0.0)?),
    ];
    if d.is_finite() {
        let phi = optimal_plane_potential(&mu, &nu)?;
        bounds.push(("optimal", dual_lower_bound(&mu, &nu, |p| phi.eval(p))?));
    }
    for (name, v) in &bounds {
        let ok = *v <= d + 1e-12 * (1.0 + d.abs());
        table.push(vec!["dual_bound".into(), (*name).into(), num(*v), if ok { "below_d" } else { "ABOVE_D" }.into()]);
    }
    let summary = json!({
        "d": if d.is_finite() { json!(d) } else { json!("infinite") },
        "eps_ladder": dc.eps.iter().zip(&ladder).map(|(e, v)| json!([e, v])).collect::<Vec<_>>(),
        "d1_euclidean": euclid,
        "w1_horizontal": horiz,
        "max_dual_bound": bounds.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max),
        "dual_bounds_hold": bounds.iter().all(|b| b.1 <= d + 1e-12 * (1.0 + d.abs())),
    });
    Ok(Report { tables: vec![("distance".into(), table)], summary })
}

/// Circulation, equilibrium and traction-free checks on the kernels.
pub fn kernel_check(cfg: &ExperimentConfig) -> Result<Report> {
    let k = cfg.kernel_check.clone().unwrap_or_default();
    let mat = cfg.material()?;
    let z = pt(0.0, 0.0);
    let core = CoreRadius::new(k.core_eps)?;
    let mut table = Table::new(["check", "parameter", "quad_n", "residual", "tolerance", "pass"]);
    let mut all = true;
    let mut push = |table: &mut Table, check: &str, param: f64, quad: usize, res: f64, tol: f64| {
        let pass = res <= tol;
        all &= pass;
        table.push(vec![check.into(), num(param), quad.to_string(), num(res), num(tol), u8::from(pass).to_string()]);
    };
    for &r in &k.radii {
        for quad in [k.quad_n, 2 * k.quad_n] {
            let c = circulation(&z, r, |x| eval_k(x, &z, &mat), quad)?;
            push(&mut table, "circulation_k", r, quad, (c - pt(1.0, 0.0)).norm(), k.circulation_tol);
            if r > k.core_eps {
                let c = circulation(&z, r, |x| eval_kn(x, &z, core, &mat), quad)?;
                push(&mut table, "circulation_kn", r, quad, (c - pt(1.0, 0.0)).norm(), k.circulation_tol);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..k.divergence_points {
        let (rad, th) = (rng.gen_range(0.25..1.0), rng.gen_range(0.0..std::f64::consts::TAU));
        let x = z + pt(th.cos(), th.sin()) * rad;
        worst = worst.max(divergence_residual(|p| eval_k(p, &z, &mat), &x, &mat, k.divergence_step)?);
        worst = worst.max(divergence_residual(|p| eval_kn(p, &z, core, &mat), &x, &mat, k.divergence_step)?);
    }
    push(&mut table, "divergence", k.divergence_step, k.divergence_points, worst, k.divergence_tol);
    let radius = k.traction_radius.unwrap_or(k.core_eps);
    let t = core_traction_max(&z, radius, core, &mat, k.traction_samples)?;
    push(&mut table, "core_traction", radius, k.traction_samples, t, k.traction_tol);
    let summary = json!({ "all_pass": all, "core_eps": k.core_eps, "traction_radius": radius });
    Ok(Report { tables: vec![("kernel_check".into(), table)], summary })
}
