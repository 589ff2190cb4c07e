//! Per-step velocity construction.
//!
//! The velocity of the crowd at a point x splits into a desired part and a
//! nonlocal interaction part,
//!
//!   v[ρ](x) = v_d(x) + ν[ρ](x),
//!
//! where v_d is a pure field of the geometry (straight pull toward a target,
//! waypoint routing around obstacles, constant drift, or the gradient of a
//! harmonic potential) and ν averages the current density over the
//! neighborhood B_R(x) = {y ∈ Ω : ‖y − x‖ ≤ R}. Two interaction laws are
//! provided: repulsion from the local center of mass,
//!
//!   ν(x) = β (x − x*),   x* = ∫_{B_R(x)} y ρ dy / ∫_{B_R(x)} ρ dy,
//!
//! and deviation toward low crowding,
//!
//!   ν(x) = β ∫_{B_R(x)} (y − x) ω(ρ(y)) dy,   ω(s) = exp(−s/s̄),
//!
//! both discretized by midpoint quadrature over cell centers. Discretization
//! samples the total velocity pointwise at cell centers, u_ij = v(x_ij).

use crate::error::VelocityError;
use crate::grid::{CellVelocityField, DensityField, Grid, Rect};
use crate::potential::{solve_potential, PotentialField, Side, TargetEdge};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Norm defining the shape of the interaction neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallNorm {
    /// Closed disc of radius R.
    Euclidean,
    /// Square of half-side R.
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    None,
    ComRepulsion,
    LowCrowding,
}

/// Parameters of the nonlocal interaction term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InteractionSpec {
    pub kind: InteractionKind,
    /// Interaction intensity β ≥ 0.
    pub beta: f64,
    /// Neighborhood radius R, 0 < R < 1.
    pub radius: f64,
    pub norm: BallNorm,
    /// Density scale s̄ of the crowding weight ω(s) = exp(−s/s̄).
    pub density_scale: f64,
}

impl Default for InteractionSpec {
    fn default() -> Self {
        InteractionSpec {
            kind: InteractionKind::None,
            beta: 0.0,
            radius: 0.25,
            norm: BallNorm::Euclidean,
            density_scale: 1.0,
        }
    }
}

impl InteractionSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_active(&self) -> bool {
        self.kind != InteractionKind::None && self.beta != 0.0
    }
}

/// Crowding weight: nonnegative, nonincreasing, ω(0) = 1, Lipschitz with
/// constant 1/scale.
pub fn omega(s: f64, scale: f64) -> f64 {
    (-s / scale).exp()
}

#[inline]
fn in_ball(d: Vec2, r: f64, norm: BallNorm) -> bool {
    match norm {
        BallNorm::Euclidean => d.norm_sq() <= r * r,
        BallNorm::Infinity => d.norm_inf() <= r,
    }
}

/// Visit walkable cells whose center lies in B_R(x); boundary inclusive.
fn for_cells_in_ball(
    grid: &Grid,
    x: Vec2,
    r: f64,
    norm: BallNorm,
    mut visit: impl FnMut(usize, usize, Vec2),
) {
    let h = grid.h();
    let m = grid.m() as isize;
    let lo = |v: f64| (((v - r) / h + 0.5 - 1e-12).ceil().max(1.0)) as isize;
    let hi = |v: f64| (((v + r) / h + 0.5 + 1e-12).floor() as isize).min(m);
    for i in lo(x.x)..=hi(x.x) {
        for j in lo(x.y)..=hi(x.y) {
            let (i, j) = (i as usize, j as usize);
            if grid.is_blocked(i, j) {
                continue;
            }
            let c = grid.center(i, j);
            if in_ball(c - x, r, norm) {
                visit(i, j, c);
            }
        }
    }
}

/// Repulsion from the center of mass of the neighborhood; zero when the
/// neighborhood carries no mass.
pub fn interaction_com(field: &DensityField, x: Vec2, spec: &InteractionSpec) -> Vec2 {
    let grid = field.grid();
    let h2 = grid.h() * grid.h();
    let mut mass = 0.0;
    let mut moment = Vec2::ZERO;
    for_cells_in_ball(grid, x, spec.radius, spec.norm, |i, j, c| {
        let m = field.get(i, j) * h2;
        mass += m;
        moment += c * m;
    });
    if mass <= 0.0 {
        return Vec2::ZERO;
    }
    let com = moment * (1.0 / mass);
    (x - com) * spec.beta
}

/// Deviation toward uncrowded cells, weighted by ω(ρ); blocked cells are
/// excluded from the quadrature set entirely.
pub fn interaction_lowcrowd(field: &DensityField, x: Vec2, spec: &InteractionSpec) -> Vec2 {
    let grid = field.grid();
    let h2 = grid.h() * grid.h();
    let mut sum = Vec2::ZERO;
    for_cells_in_ball(grid, x, spec.radius, spec.norm, |i, j, c| {
        sum += (c - x) * omega(field.get(i, j), spec.density_scale);
    });
    // β multiplies last so that rescaling it rescales the result exactly.
    sum * h2 * spec.beta
}

pub fn interaction_velocity(field: &DensityField, x: Vec2, spec: &InteractionSpec) -> Vec2 {
    match spec.kind {
        InteractionKind::None => Vec2::ZERO,
        InteractionKind::ComRepulsion => interaction_com(field, x, spec),
        InteractionKind::LowCrowding => interaction_lowcrowd(field, x, spec),
    }
}

/// Desired-velocity law. `mode` tag matches the scenario file key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesiredModel {
    /// Uniform drift, v_d(x) = velocity.
    Constant { velocity: Vec2 },
    /// Straight pull toward the target, v_d(x) = α (x₀ − x).
    Direct { target: Vec2, alpha: f64 },
    /// Like `Direct`, but when the target is occluded by an obstacle the
    /// velocity points to the first visible waypoint in list order.
    Waypoint {
        target: Vec2,
        alpha: f64,
        waypoints: Vec<Vec2>,
    },
    /// Gradient of the harmonic potential attracted by a boundary edge.
    Potential {
        side: Side,
        #[serde(default = "full_span")]
        span: [f64; 2],
        alpha: f64,
        #[serde(default)]
        normalize: bool,
        #[serde(default = "default_tol")]
        tol: f64,
    },
}

fn default_tol() -> f64 {
    1e-10
}

fn full_span() -> [f64; 2] {
    [0.0, 1.0]
}

/// v_d(x) = α (x₀ − x); vanishes exactly at the target.
pub fn desired_direct(x: Vec2, target: Vec2, alpha: f64) -> Vec2 {
    (target - x) * alpha
}

/// True when the open segment a→b crosses the interior of any obstacle.
pub fn segment_blocked(grid: &Grid, a: Vec2, b: Vec2) -> bool {
    grid.obstacles().iter().any(|r| segment_hits_interior(r, a, b))
}

/// Liang-Barsky clip of the segment against the closed rectangle; a hit
/// counts only if the clipped portion has positive length and its midpoint
/// is strictly interior (grazing an edge or corner is not a hit).
fn segment_hits_interior(rect: &Rect, a: Vec2, b: Vec2) -> bool {
    let d = b - a;
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    let clips = [
        (-d.x, a.x - rect.x[0]),
        (d.x, rect.x[1] - a.x),
        (-d.y, a.y - rect.y[0]),
        (d.y, rect.y[1] - a.y),
    ];
    for (p, q) in clips {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    if t0 + 1e-12 >= t1 {
        return false;
    }
    let mid = a + d * (0.5 * (t0 + t1));
    rect.contains_open(mid)
}

/// Waypoint routing: straight to the target when visible, otherwise toward
/// the first waypoint visible from x, with magnitude α · distance.
pub fn desired_waypoint(
    grid: &Grid,
    x: Vec2,
    target: Vec2,
    alpha: f64,
    waypoints: &[Vec2],
) -> Result<Vec2, VelocityError> {
    if !segment_blocked(grid, x, target) {
        return Ok(desired_direct(x, target, alpha));
    }
    for &w in waypoints {
        if !segment_blocked(grid, x, w) {
            return Ok(desired_direct(x, w, alpha));
        }
    }
    Err(VelocityError::NoVisibleTarget)
}

/// A desired model together with an interaction law.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityModel {
    pub desired: DesiredModel,
    pub interaction: InteractionSpec,
}

/// Desired velocities precomputed at the cell centers (the desired part is a
/// pure field of the geometry, so it never changes between steps), plus the
/// solved potential when that mode is active.
pub struct CompiledVelocity {
    desired: CellVelocityField,
    interaction: InteractionSpec,
    potential: Option<PotentialField>,
}

impl VelocityModel {
    pub fn compile(&self, grid: &Arc<Grid>) -> Result<CompiledVelocity, VelocityError> {
        let (desired, potential) = desired_cells(grid, &self.desired)?;
        Ok(CompiledVelocity {
            desired,
            interaction: self.interaction.clone(),
            potential,
        })
    }
}

/// Evaluate the desired model at every walkable cell center.
pub fn desired_cells(
    grid: &Arc<Grid>,
    model: &DesiredModel,
) -> Result<(CellVelocityField, Option<PotentialField>), VelocityError> {
    match model {
        DesiredModel::Constant { velocity } => {
            Ok((CellVelocityField::from_fn(grid.clone(), |_| *velocity), None))
        }
        DesiredModel::Direct { target, alpha } => Ok((
            CellVelocityField::from_fn(grid.clone(), |x| desired_direct(x, *target, *alpha)),
            None,
        )),
        DesiredModel::Waypoint { target, alpha, waypoints } => {
            let mut field = CellVelocityField::zeros(grid.clone());
            for (i, j) in grid.cells() {
                if grid.is_blocked(i, j) {
                    continue;
                }
                let x = grid.cell_center(i, j).expect("index in range");
                field.set(i, j, desired_waypoint(grid, x, *target, *alpha, waypoints)?);
            }
            Ok((field, None))
        }
        DesiredModel::Potential { side, span, alpha, normalize, tol } => {
            let edge = TargetEdge { side: *side, span: *span };
            let potential = solve_potential(grid, &edge, *tol)?;
            let field = potential.gradient_field(*normalize, *alpha);
            Ok((field, Some(potential)))
        }
    }
}

impl CompiledVelocity {
    /// Total velocity u_ij = v_d(x_ij) + ν[ρ](x_ij) on walkable cells.
    pub fn evaluate(&self, field: &DensityField) -> CellVelocityField {
        let grid = field.grid();
        if !self.interaction.is_active() {
            return self.desired.clone();
        }
        let mut u = self.desired.clone();
        for (i, j) in grid.cells() {
            if grid.is_blocked(i, j) {
                continue;
            }
            let x = grid.center(i, j);
            let v = u.get(i, j) + interaction_velocity(field, x, &self.interaction);
            u.set(i, j, v);
        }
        u
    }

    pub fn desired(&self) -> &CellVelocityField {
        &self.desired
    }

    pub fn potential(&self) -> Option<&PotentialField> {
        self.potential.as_ref()
    }
}

/// One-shot construction of the total velocity field for a density.
pub fn total_velocity(
    field: &DensityField,
    model: &VelocityModel,
) -> Result<CellVelocityField, VelocityError> {
    Ok(model.compile(field.grid())?.evaluate(field))
}
