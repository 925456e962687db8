//! Declarative experiment configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use slipflow::corrector::RitzBasis;
use slipflow::evolution::{EnergyContext, LoadingProgram, SigmaProfile, SolverConfig};
use slipflow::geometry::Disk;
use slipflow::interaction::{InteractionMode, QuadratureConfig, VMethod};
use slipflow::{pt, Geometry, Material, Rect, ScalingSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Gamma,
    Distance,
    KernelCheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Gamma => "gamma",
            Self::Distance => "distance",
            Self::KernelCheck => "kernel-check",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub material: MaterialSection,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub loading: Option<LoadingSection>,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    #[serde(default)]
    pub gamma: Option<GammaSection>,
    #[serde(default)]
    pub distance: Option<DistanceSection>,
    #[serde(default)]
    pub kernel_check: Option<KernelCheckSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub lambda: f64,
    pub mu: f64,
}

impl Default for MaterialSection {
    fn default() -> Self {
        Self { lambda: 1.0, mu: 1.0 }
    }
}

/// Rectangles are `[x0, x1, y0, y1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub omega: [f64; 4],
    pub confinement: [f64; 4],
    /// Defaults to the gap between the confinement and the domain boundary.
    #[serde(default)]
    pub ell: Option<f64>,
    /// `[x, y, radius]`; defaults to a small disk near the left edge.
    #[serde(default)]
    pub ball: Option<[f64; 3]>,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self { omega: [0.0, 1.0, 0.0, 1.0], confinement: [0.25, 0.75, 0.25, 0.75], ell: None, ball: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub r_coef: f64,
    pub r_exp: f64,
    pub eps_coef: f64,
    pub eps_exp: f64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        let s = ScalingSchedule::default();
        Self { r_coef: s.r_coef, r_exp: s.r_exp, eps_coef: s.eps_coef, eps_exp: s.eps_exp }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Boundary,
    Cells,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSection {
    pub method: MethodName,
    pub base_cells: usize,
    pub singular_refine_depth: usize,
    pub leaf_order: usize,
    pub tol: f64,
    pub boundary_order: usize,
    pub boundary_panel: f64,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        let q = QuadratureConfig::default();
        Self {
            method: MethodName::Boundary,
            base_cells: q.base_cells,
            singular_refine_depth: q.singular_refine_depth,
            leaf_order: q.leaf_order,
            tol: q.tol,
            boundary_order: q.boundary_order,
            boundary_panel: q.boundary_panel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    Bounded,
    Freespace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub mode: ModeName,
    pub sweep_tol: f64,
    pub max_sweeps: usize,
    pub restarts: usize,
    pub line_grid: usize,
    pub ritz_degree: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            mode: ModeName::Freespace,
            sweep_tol: s.sweep_tol,
            max_sweeps: s.max_sweeps,
            restarts: s.restarts,
            line_grid: s.line_grid,
            ritz_degree: RitzBasis::default().degree(),
        }
    }
}

/// Uniform shear `f(t, x) = σ(t) x₁` with piecewise-linear `σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadingSection {
    /// Knots `[t, σ]`.
    pub sigma: Vec<[f64; 2]>,
    pub horizon: f64,
    /// Uniform steps on `[0, horizon]`.
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_steps() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Initial positions `[x, y]`.
    pub points: Vec<[f64; 2]>,
    /// Relax the initial configuration at `t = 0` before the run.
    #[serde(default)]
    pub relax: bool,
    /// Displacement in one step above which the step is flagged as a jump;
    /// defaults to 5% of the confinement width.
    #[serde(default)]
    pub jump_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaSection {
    /// Support `[x0, x1, y0, y1]` of the uniform target.
    pub target: [f64; 4],
    pub ladder: Vec<usize>,
    /// Cell size of the grid approximation.
    pub cell_size: f64,
    /// Exponent γ of the snapping step `η = n^{-1/2+γ}`.
    #[serde(default)]
    pub snap_gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceSection {
    /// Atoms `[x, y, weight]`.
    pub mu: Vec<[f64; 3]>,
    pub nu: Vec<[f64; 3]>,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
}

fn default_eps() -> Vec<f64> {
    vec![1.0, 1e-1, 1e-2, 1e-3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelCheckSection {
    pub radii: Vec<f64>,
    pub quad_n: usize,
    pub circulation_tol: f64,
    pub divergence_points: usize,
    pub divergence_step: f64,
    pub divergence_tol: f64,
    pub core_eps: f64,
    /// Radius where the core traction is sampled; equal to `core_eps` unless
    /// deliberately perturbed.
    pub traction_radius: Option<f64>,
    pub traction_samples: usize,
    pub traction_tol: f64,
}

impl Default for KernelCheckSection {
    fn default() -> Self {
        Self {
            radii: vec![0.05, 0.1, 0.5],
            quad_n: 512,
            circulation_tol: 1e-8,
            divergence_points: 50,
            divergence_step: 1e-4,
            divergence_tol: 1e-5,
            core_eps: 1e-3,
            traction_radius: None,
            traction_samples: 256,
            traction_tol: 1e-8,
        }
    }
}

fn rect(v: [f64; 4]) -> Result<Rect> {
    Rect::new(v[0], v[1], v[2], v[3]).with_context(|| format!("invalid rectangle {v:?}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Checks the section required by `kind` and the numeric ranges.
    pub fn validate(&self) -> Result<()> {
        let present = match self.kind {
            ExperimentKind::Simulate => self.simulate.is_some() && self.loading.is_some(),
            ExperimentKind::Gamma => self.gamma.is_some(),
            ExperimentKind::Distance => self.distance.is_some(),
            ExperimentKind::KernelCheck => true,
        };
        ensure!(present, "experiment kind `{}` is missing its section", self.kind.name());
        self.material()?;
        self.geometry()?;
        self.schedule()?;
        self.quadrature().validate()?;
        self.solver().validate()?;
        if let Some(l) = &self.loading {
            ensure!(l.horizon > 0.0 && l.steps > 0, "loading horizon and steps must be positive");
            self.loading()?;
        }
        if let Some(g) = &self.gamma {
            ensure!(!g.ladder.is_empty() && g.ladder.iter().all(|&n| n > 0), "gamma ladder must hold positive counts");
            ensure!(g.cell_size > 0.0, "cell_size must be positive");
            ensure!(g.snap_gamma > -0.5 && g.snap_gamma <= 0.5, "snap_gamma must lie in (-1/2, 1/2]");
        }
        if let Some(d) = &self.distance {
            ensure!(d.eps.iter().all(|&e| e > 0.0), "eps values must be positive");
        }
        if let Some(k) = &self.kernel_check {
            ensure!(k.quad_n > 0 && k.traction_samples > 0, "sample counts must be positive");
            ensure!(k.radii.iter().all(|&r| r > 0.0) && k.core_eps > 0.0, "radii must be positive");
        }
        Ok(())
    }

    pub fn material(&self) -> Result<Material> {
        Ok(Material::new(self.material.lambda, self.material.mu)?)
    }

    pub fn geometry(&self) -> Result<Geometry> {
        let g = &self.geometry;
        let (omega, conf) = (rect(g.omega)?, rect(g.confinement)?);
        Ok(match (g.ell, g.ball) {
            (None, None) => Geometry::with_boxes(omega, conf)?,
            (ell, ball) => {
                let base = Geometry::with_boxes(omega, conf)?;
                let ell = ell.unwrap_or(base.ell);
                let ball = ball.map(|b| Disk { center: pt(b[0], b[1]), radius: b[2] }).unwrap_or(base.ball);
                Geometry::new(omega, conf, ell, ball)?
            }
        })
    }

    pub fn schedule(&self) -> Result<ScalingSchedule> {
        let s = &self.schedule;
        Ok(ScalingSchedule::new(s.r_coef, s.r_exp, s.eps_coef, s.eps_exp)?)
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        let q = &self.quadrature;
        QuadratureConfig {
            base_cells: q.base_cells,
            singular_refine_depth: q.singular_refine_depth,
            leaf_order: q.leaf_order,
            tol: q.tol,
            method: match q.method {
                MethodName::Boundary => VMethod::BoundaryIntegral,
                MethodName::Cells => VMethod::CellQuadrature,
            },
            boundary_order: q.boundary_order,
            boundary_panel: q.boundary_panel,
        }
    }

    pub fn mode(&self) -> InteractionMode {
        match self.solver.mode {
            ModeName::Bounded => InteractionMode::Bounded,
            ModeName::Freespace => InteractionMode::Freespace,
        }
    }

    pub fn basis(&self) -> Result<RitzBasis> {
        Ok(RitzBasis::new(self.solver.ritz_degree)?)
    }

    pub fn solver(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            sweep_tol: s.sweep_tol,
            max_sweeps: s.max_sweeps,
            restarts: s.restarts,
            line_grid: s.line_grid,
            seed: self.seed,
        }
    }

    pub fn loading(&self) -> Result<LoadingProgram> {
        let Some(l) = &self.loading else { bail!("no [loading] section") };
        let sigma = SigmaProfile::new(l.sigma.iter().map(|k| (k[0], k[1])).collect())?;
        Ok(LoadingProgram::uniform_shear(sigma, l.horizon))
    }

    /// Uniform grid `0, T/steps, …, T`.
    pub fn times(&self) -> Result<Vec<f64>> {
        let Some(l) = &self.loading else { bail!("no [loading] section") };
        Ok((0..=l.steps).map(|k| l.horizon * k as f64 / l.steps as f64).collect())
    }

    pub fn energy_context(&self) -> Result<EnergyContext> {
        Ok(EnergyContext::new(self.mode(), self.geometry()?, self.material()?, self.quadrature(), self.basis()?)?)
    }
}
