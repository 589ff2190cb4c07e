//! Simulation driver: the nonlinear-flux loop.
//!
//! Each step rebuilds the velocity from the current density (v_n = v[ρ_n]),
//! clamps it against walls and obstacles, enforces the CFL bound, and pushes
//! the density forward. In adaptive mode the step restarts from the base dt
//! and halves it until the clamped field satisfies the CFL condition.

use crate::error::{Error, PushforwardError};
use crate::grid::{CellVelocityField, DensityField};
use crate::pushforward::{check_cfl, clamp_to_walkable, step, CflVerdict};
use crate::scenario::Scenario;
use serde::{Deserialize, Serialize};

pub const MAX_DT_HALVINGS: usize = 20;

/// Per-step record emitted into the diagnostics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    /// dt actually used (after adaptive halving).
    pub dt: f64,
    pub halvings: usize,
    pub clamped_cells: usize,
    pub mass: f64,
    /// |mass - initial mass| / initial mass.
    pub mass_drift_rel: f64,
    pub min_density: f64,
    pub max_density: f64,
    /// ‖ρ_{n+1}‖_∞ / ‖ρ_n‖_∞ (1 when both vanish).
    pub linf_ratio: f64,
    /// h - dt · max cell speed of the stepped field.
    pub cfl_margin: f64,
}

/// Snapshot of the density after `step` steps (step 0 is the initial field).
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub field: DensityField,
}

#[derive(Debug)]
pub struct RunResult {
    pub snapshots: Vec<Snapshot>,
    pub records: Vec<StepDiagnostics>,
    pub initial_mass: f64,
}

impl RunResult {
    pub fn final_field(&self) -> &DensityField {
        &self.snapshots.last().expect("at least the initial snapshot").field
    }
}

/// Pick the step size and clamped velocity for one step.
pub(crate) fn resolve_dt(
    u_raw: &CellVelocityField,
    base_dt: f64,
    adaptive: bool,
) -> Result<(CellVelocityField, f64, usize, usize), PushforwardError> {
    let h = u_raw.grid().h();
    let mut dt = base_dt;
    for halvings in 0..=MAX_DT_HALVINGS {
        let (u, clamped) = clamp_to_walkable(u_raw, dt);
        match check_cfl(&u, dt) {
            CflVerdict::Ok { .. } => return Ok((u, dt, halvings, clamped)),
            CflVerdict::Violation { max_speed } => {
                if !adaptive || halvings == MAX_DT_HALVINGS {
                    return Err(PushforwardError::CflViolation {
                        excess: max_speed * dt,
                        h,
                        dt,
                    });
                }
                dt *= 0.5;
            }
        }
    }
    unreachable!("loop returns or errors within the halving budget")
}

/// Run a scenario to completion, collecting snapshots at the configured
/// stride plus the initial and final fields.
pub fn run(scenario: &Scenario) -> Result<RunResult, Error> {
    scenario.validate()?;
    let grid = scenario.build_grid()?;
    let mut field = scenario.initial_field(&grid)?;
    let compiled = scenario.velocity_model().compile(&grid)?;
    let base_dt = scenario.time.base_dt();
    let adaptive = scenario.time.is_adaptive();
    let steps = scenario.run.steps;
    let stride = scenario.run.stride;

    let initial_mass = field.mass();
    let mut snapshots = vec![Snapshot { step: 0, field: field.clone() }];
    let mut records = Vec::with_capacity(steps);
    let mut prev_max = field.norms().linf;

    for n in 0..steps {
        let u_raw = compiled.evaluate(&field);
        let (u, dt, halvings, clamped_cells) = resolve_dt(&u_raw, base_dt, adaptive)?;
        let (next, report) = step(&field, &u, dt)?;
        let norms = next.norms();
        let linf_ratio = if prev_max == 0.0 {
            if norms.linf == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            norms.linf / prev_max
        };
        records.push(StepDiagnostics {
            step: n,
            dt,
            halvings,
            clamped_cells,
            mass: report.mass_after,
            mass_drift_rel: if initial_mass > 0.0 {
                (report.mass_after - initial_mass).abs() / initial_mass
            } else {
                report.mass_after.abs()
            },
            min_density: norms.min,
            max_density: norms.linf,
            linf_ratio,
            cfl_margin: report.cfl_margin,
        });
        prev_max = norms.linf;
        field = next;
        if (n + 1) % stride == 0 || n + 1 == steps {
            snapshots.push(Snapshot { step: n + 1, field: field.clone() });
        }
    }

    Ok(RunResult { snapshots, records, initial_mass })
}
