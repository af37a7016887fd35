//! Run configuration: a single strict JSON document. Unknown keys are
//! rejected so typos in experiment definitions surface immediately.

use std::path::{Path, PathBuf};

use majorant::bounds::conforming::MajorantConfig;
use majorant::fem::sparse::Preconditioner;
use majorant::fem::CgOptions;
use majorant::problem::Geometry;
use majorant::truncation::TailSolveOptions;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Ball,
    Cube,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub cg_rel_tol: Option<f64>,
    pub cg_max_iter_factor: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    pub stop_rel: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MajorantSection {
    pub beta_tol: Option<f64>,
    pub beta_max_iter: Option<usize>,
    pub beta_solve_floor: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryKind,
    pub radius: f64,
    /// `(n_radial, n_angular)` per ladder entry.
    pub ladder: Vec<(usize, usize)>,
    #[serde(default = "default_boundary_value")]
    pub boundary_value: f64,
    pub output_dir: Option<PathBuf>,
    pub solver: Option<SolverSection>,
    pub energy: Option<EnergySection>,
    pub majorant: Option<MajorantSection>,
    /// Weakened-bound parameters for the non-conforming runs.
    pub theta: Option<Vec<f64>>,
    /// Perturbation sizes for the fabricated non-conforming fluxes.
    pub delta: Option<Vec<f64>>,
    #[serde(default = "default_seed")]
    pub perturbation_seed: u64,
}

fn default_boundary_value() -> f64 {
    1.0
}

fn default_seed() -> u64 {
    7
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(|e| format!("invalid config: {e}"))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), String> {
        if self.ladder.is_empty() {
            return Err("ladder must not be empty".into());
        }
        if self.ladder.iter().any(|&(n, m)| n == 0 || m == 0) {
            return Err("ladder entries must be positive".into());
        }
        let min_radius = match self.geometry {
            GeometryKind::Ball => 1.0,
            GeometryKind::Cube => 3.0f64.sqrt(),
        };
        if !(self.radius > min_radius) {
            return Err(format!(
                "radius {} too small for the geometry (must exceed {min_radius})",
                self.radius
            ));
        }
        if let Some(thetas) = &self.theta {
            if thetas.iter().any(|&t| !(t > 0.0)) {
                return Err("theta values must be positive".into());
            }
        }
        if let Some(deltas) = &self.delta {
            if deltas.iter().any(|&d| d < 0.0) {
                return Err("delta values must be nonnegative".into());
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Geometry {
        match self.geometry {
            GeometryKind::Ball => Geometry::Ball,
            GeometryKind::Cube => Geometry::Cube,
        }
    }

    pub fn cg_options(&self) -> CgOptions<f64> {
        let mut opts = CgOptions::default();
        if let Some(s) = &self.solver {
            if let Some(t) = s.cg_rel_tol {
                opts.rel_tol = t;
            }
            if let Some(f) = s.cg_max_iter_factor {
                opts.max_iter_factor = f;
            }
        }
        opts
    }

    pub fn tail_options(&self) -> TailSolveOptions<f64> {
        let mut opts = TailSolveOptions { cg: self.cg_options(), ..Default::default() };
        if let Some(e) = &self.energy {
            if let Some(s) = e.stop_rel {
                opts.stop_rel = s;
            }
            if let Some(m) = e.max_iter {
                opts.max_iter = m;
            }
        }
        opts
    }

    pub fn majorant_config(&self) -> MajorantConfig<f64> {
        let mut config = MajorantConfig {
            cg: CgOptions {
                preconditioner: Preconditioner::IncompleteCholesky,
                ..self.cg_options()
            },
            ..MajorantConfig::default()
        };
        if let Some(m) = &self.majorant {
            if let Some(t) = m.beta_tol {
                config.beta_tol = t;
            }
            if let Some(k) = m.beta_max_iter {
                config.beta_max_iter = k;
            }
            if let Some(f) = m.beta_solve_floor {
                config.beta_solve_floor = f;
            }
        }
        config
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.theta.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0])
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.delta.clone().unwrap_or_else(|| vec![0.01, 0.1])
    }
}
