//! Scenario description: grid, initial density, velocity model, time
//! stepping and run controls, as parsed from a TOML file.
//!
//! The documented grammar lives in `docs/scenario-format.md`; unknown keys
//! are rejected and every numeric range is checked before a run starts.

use crate::error::ScenarioError;
use crate::grid::{DensityField, Grid, Rect};
use crate::vec2::Vec2;
use crate::velocity::{DesiredModel, InteractionKind, InteractionSpec, VelocityModel};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Cells per side.
    pub m: usize,
    #[serde(default)]
    pub obstacles: Vec<Rect>,
}

/// Support cutoff of the Gaussian bump, in units of its spread. Keeps the
/// initial density compactly supported so rigid-translation references can
/// verify that the support stays inside the domain.
pub const GAUSSIAN_CUTOFF_SIGMAS: f64 = 6.0;

/// Initial density; mass-bearing variants are rescaled to the requested
/// total mass after obstacle masking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDensity {
    /// Constant density over the walkable region.
    Uniform { mass: f64 },
    /// Gaussian bump exp(-|x-c|²/2σ²) sampled at cell centers, truncated
    /// to zero beyond 6σ.
    Gaussian { center: Vec2, spread: f64, mass: f64 },
    /// Explicit per-cell table; row i of the table is grid line i.
    Cells { values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimePolicy {
    /// Fixed dt; a CFL violation aborts the run.
    Fixed { dt: f64 },
    /// Start from dt0 each step and halve until the CFL bound holds.
    Adaptive { dt0: f64 },
}

impl TimePolicy {
    pub fn base_dt(&self) -> f64 {
        match self {
            TimePolicy::Fixed { dt } => *dt,
            TimePolicy::Adaptive { dt0 } => *dt0,
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, TimePolicy::Adaptive { .. })
    }
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub steps: usize,
    /// Snapshot every `stride` steps (the initial and final fields are
    /// always emitted).
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Seed for particle-oracle runs.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub grid: GridSpec,
    pub initial: InitialDensity,
    pub desired: DesiredModel,
    #[serde(default)]
    pub interaction: InteractionSpec,
    pub time: TimePolicy,
    pub run: RunSpec,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario, ScenarioError> {
        let sc: Scenario =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |msg: String| Err(ScenarioError::Validation(msg));
        if self.grid.m < 2 {
            return fail(format!("grid.m must be >= 2, got {}", self.grid.m));
        }
        let grid = self.build_grid()?;
        match &self.initial {
            InitialDensity::Uniform { mass } | InitialDensity::Gaussian { mass, .. }
                if *mass < 0.0 =>
            {
                return fail("initial mass must be nonnegative".into());
            }
            InitialDensity::Gaussian { spread, .. } if *spread <= 0.0 => {
                return fail("gaussian spread must be positive".into());
            }
            InitialDensity::Cells { values } => {
                if values.len() != self.grid.m || values.iter().any(|r| r.len() != self.grid.m) {
                    return fail(format!(
                        "cells table must be {m}x{m} for grid.m = {m}",
                        m = self.grid.m
                    ));
                }
                if values.iter().flatten().any(|v| *v < 0.0) {
                    return fail("initial density must be nonnegative".into());
                }
            }
            _ => {}
        }
        let check_point = |label: &str, p: Vec2| -> Result<(), ScenarioError> {
            if !(0.0..=1.0).contains(&p.x) || !(0.0..=1.0).contains(&p.y) {
                return Err(ScenarioError::Validation(format!(
                    "{label} ({}, {}) must lie in the closed unit square",
                    p.x, p.y
                )));
            }
            if grid.obstacles().iter().any(|r| r.contains_open(p)) {
                return Err(ScenarioError::Validation(format!(
                    "{label} ({}, {}) lies inside an obstacle",
                    p.x, p.y
                )));
            }
            Ok(())
        };
        match &self.desired {
            DesiredModel::Constant { .. } => {}
            DesiredModel::Direct { target, alpha } => {
                if *alpha < 0.0 {
                    return fail("alpha must be nonnegative".into());
                }
                check_point("target", *target)?;
            }
            DesiredModel::Waypoint { target, alpha, waypoints } => {
                if *alpha < 0.0 {
                    return fail("alpha must be nonnegative".into());
                }
                check_point("target", *target)?;
                for (k, w) in waypoints.iter().enumerate() {
                    check_point(&format!("waypoint {k}"), *w)?;
                }
            }
            DesiredModel::Potential { span, alpha, tol, .. } => {
                if *alpha < 0.0 {
                    return fail("alpha must be nonnegative".into());
                }
                if span[0] >= span[1] {
                    return fail("target edge span must have positive length".into());
                }
                if *tol <= 0.0 {
                    return fail("potential tolerance must be positive".into());
                }
            }
        }
        if self.interaction.beta < 0.0 {
            return fail("beta must be nonnegative".into());
        }
        if self.interaction.kind != InteractionKind::None {
            let r = self.interaction.radius;
            if !(r > 0.0 && r < 1.0) {
                return fail(format!("interaction radius must satisfy 0 < R < 1, got {r}"));
            }
            if self.interaction.density_scale <= 0.0 {
                return fail("density_scale must be positive".into());
            }
        }
        if self.time.base_dt() <= 0.0 {
            return fail("dt must be positive".into());
        }
        if self.run.stride < 1 {
            return fail("stride must be at least 1".into());
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>, ScenarioError> {
        Grid::new(self.grid.m, &self.grid.obstacles)
            .map(Arc::new)
            .map_err(|e| ScenarioError::Validation(e.to_string()))
    }

    /// Realize the initial density on a grid; mass-bearing variants are
    /// rescaled so the discrete mass matches the requested total exactly.
    pub fn initial_field(&self, grid: &Arc<Grid>) -> Result<DensityField, ScenarioError> {
        let raw = match &self.initial {
            InitialDensity::Uniform { .. } => DensityField::from_fn(grid.clone(), |_| 1.0),
            InitialDensity::Gaussian { center, spread, .. } => {
                let (c, s) = (*center, *spread);
                let cutoff_sq = (GAUSSIAN_CUTOFF_SIGMAS * s) * (GAUSSIAN_CUTOFF_SIGMAS * s);
                DensityField::from_fn(grid.clone(), move |p| {
                    let d2 = (p - c).norm_sq();
                    if d2 <= cutoff_sq {
                        (-d2 / (2.0 * s * s)).exp()
                    } else {
                        0.0
                    }
                })
            }
            InitialDensity::Cells { values } => {
                let mut rho = vec![0.0; grid.n_cells()];
                for (i, j) in grid.cells() {
                    rho[grid.idx(i, j)] = values[i - 1][j - 1];
                }
                return DensityField::new(grid.clone(), rho)
                    .map_err(|e| ScenarioError::Validation(e.to_string()));
            }
        }
        .map_err(|e| ScenarioError::Validation(e.to_string()))?;
        let want = match &self.initial {
            InitialDensity::Uniform { mass } | InitialDensity::Gaussian { mass, .. } => *mass,
            InitialDensity::Cells { .. } => unreachable!(),
        };
        let have = raw.mass();
        if have <= 0.0 {
            if want == 0.0 {
                return Ok(DensityField::zeros(grid.clone()));
            }
            return Err(ScenarioError::Validation(
                "initial density has no mass on the walkable region".into(),
            ));
        }
        let scale = want / have;
        let rho: Vec<f64> = raw.values().iter().map(|v| v * scale).collect();
        DensityField::new(grid.clone(), rho).map_err(|e| ScenarioError::Validation(e.to_string()))
    }

    pub fn velocity_model(&self) -> VelocityModel {
        VelocityModel { desired: self.desired.clone(), interaction: self.interaction.clone() }
    }

    /// Copy with a different resolution (used by refinement studies).
    pub fn with_m(&self, m: usize) -> Scenario {
        let mut sc = self.clone();
        sc.grid.m = m;
        sc
    }

    pub fn with_steps(&self, steps: usize) -> Scenario {
        let mut sc = self.clone();
        sc.run.steps = steps;
        sc
    }

    pub fn with_dt(&self, dt: f64) -> Scenario {
        let mut sc = self.clone();
        sc.time = match sc.time {
            TimePolicy::Fixed { .. } => TimePolicy::Fixed { dt },
            TimePolicy::Adaptive { .. } => TimePolicy::Adaptive { dt0: dt },
        };
        sc
    }

    pub fn with_stride(&self, stride: usize) -> Scenario {
        let mut sc = self.clone();
        sc.run.stride = stride;
        sc
    }
}
