//! Harmonic path potential.
//!
//! Solves −Δu = 0 on the walkable part of Ω with Dirichlet data u = 1 on the
//! boundary edge containing the target and u = 0 on every other external
//! boundary and on obstacle cells, then uses v_d = ∇u as the desired
//! velocity. The Laplacian is the 5-point stencil at cell centers with
//! Dirichlet values imposed through ghost cells; the system is solved by
//! red-black SOR.

use crate::error::VelocityError;
use crate::grid::{CellVelocityField, Grid};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// A segment of the outer boundary: one side of the square plus a coordinate
/// interval along it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetEdge {
    pub side: Side,
    /// Interval along the side; the full side is [0, 1].
    pub span: [f64; 2],
}

impl TargetEdge {
    pub fn full(side: Side) -> Self {
        TargetEdge { side, span: [0.0, 1.0] }
    }
}

/// Solved potential with the residual actually achieved.
#[derive(Debug, Clone)]
pub struct PotentialField {
    grid: Arc<Grid>,
    u: Vec<f64>,
    residual: f64,
}

const RESIDUAL_CHECK_EVERY: usize = 4;

/// Solve the discrete Laplace problem; iterates until the relative residual
/// ‖b − A u‖₂ / ‖b‖₂ drops below `tol`, capped at 100·M² sweeps.
pub fn solve_potential(
    grid: &Arc<Grid>,
    edge: &TargetEdge,
    tol: f64,
) -> Result<PotentialField, VelocityError> {
    let m = grid.m();
    let n = grid.n_cells();

    // Ghost contributions: for each cell, the sum of Dirichlet values seen
    // across domain faces. Only the target edge carries g = 1.
    if edge.span[0] >= edge.span[1] {
        return Err(VelocityError::EmptyTargetEdge(format!(
            "span [{}, {}] has no positive length",
            edge.span[0], edge.span[1]
        )));
    }
    let mut b = vec![0.0; n];
    let mut hot_ghosts = 0usize;
    for (i, j) in grid.cells() {
        if grid.is_blocked(i, j) {
            continue;
        }
        let k = grid.idx(i, j);
        let c = grid.center(i, j);
        let mut add = |on_side: Side, along: f64| {
            if edge.side == on_side && along >= edge.span[0] - 1e-12 && along <= edge.span[1] + 1e-12
            {
                b[k] += 1.0;
                hot_ghosts += 1;
            }
        };
        if i == 1 {
            add(Side::Left, c.y);
        }
        if i == m {
            add(Side::Right, c.y);
        }
        if j == 1 {
            add(Side::Bottom, c.x);
        }
        if j == m {
            add(Side::Top, c.x);
        }
    }
    if hot_ghosts == 0 {
        return Err(VelocityError::EmptyTargetEdge(
            "span selects no boundary cells".to_string(),
        ));
    }
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();

    let mut u = vec![0.0; n];
    // Spectrally motivated relaxation factor for the unit-square Laplacian.
    let omega = 2.0 / (1.0 + (std::f64::consts::PI / m as f64).sin());
    let cap = 100 * m * m;

    let neighbor_sum = |u: &[f64], i: usize, j: usize| -> f64 {
        let mut s = 0.0;
        if i > 1 && !grid.is_blocked(i - 1, j) {
            s += u[grid.idx(i - 1, j)];
        }
        if i < m && !grid.is_blocked(i + 1, j) {
            s += u[grid.idx(i + 1, j)];
        }
        if j > 1 && !grid.is_blocked(i, j - 1) {
            s += u[grid.idx(i, j - 1)];
        }
        if j < m && !grid.is_blocked(i, j + 1) {
            s += u[grid.idx(i, j + 1)];
        }
        s
    };

    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < cap {
        for color in 0..2usize {
            for (i, j) in grid.cells() {
                if (i + j) % 2 != color || grid.is_blocked(i, j) {
                    continue;
                }
                let k = grid.idx(i, j);
                let gs = 0.25 * (neighbor_sum(&u, i, j) + b[k]);
                u[k] += omega * (gs - u[k]);
            }
        }
        sweeps += 1;
        if sweeps % RESIDUAL_CHECK_EVERY == 0 || sweeps == cap {
            let mut r2 = 0.0;
            for (i, j) in grid.cells() {
                if grid.is_blocked(i, j) {
                    continue;
                }
                let k = grid.idx(i, j);
                let r = neighbor_sum(&u, i, j) + b[k] - 4.0 * u[k];
                r2 += r * r;
            }
            residual = r2.sqrt() / b_norm;
            if residual <= tol {
                return Ok(PotentialField { grid: grid.clone(), u, residual });
            }
        }
    }
    Err(VelocityError::NonConvergence { tol, sweeps, residual })
}

impl PotentialField {
    #[cfg(test)]
    pub(crate) fn from_values(grid: Arc<Grid>, u: Vec<f64>, residual: f64) -> Self {
        assert_eq!(u.len(), grid.n_cells());
        PotentialField { grid, u, residual }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.u[self.grid.idx(i, j)]
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Central-difference gradient, one-sided next to walls and obstacles.
    /// With `normalize`, every nonzero vector is rescaled to speed `alpha`;
    /// otherwise the raw gradient is returned.
    pub fn gradient_field(&self, normalize: bool, alpha: f64) -> CellVelocityField {
        let grid = &self.grid;
        let m = grid.m();
        let h = grid.h();
        let mut u = CellVelocityField::zeros(grid.clone());
        for (i, j) in grid.cells() {
            if grid.is_blocked(i, j) {
                continue;
            }
            let uc = self.value(i, j);
            let diff = |lo: Option<f64>, hi: Option<f64>| -> f64 {
                match (lo, hi) {
                    (Some(a), Some(b)) => (b - a) / (2.0 * h),
                    (None, Some(b)) => (b - uc) / h,
                    (Some(a), None) => (uc - a) / h,
                    (None, None) => 0.0,
                }
            };
            let left = (i > 1 && !grid.is_blocked(i - 1, j)).then(|| self.value(i - 1, j));
            let right = (i < m && !grid.is_blocked(i + 1, j)).then(|| self.value(i + 1, j));
            let down = (j > 1 && !grid.is_blocked(i, j - 1)).then(|| self.value(i, j - 1));
            let up = (j < m && !grid.is_blocked(i, j + 1)).then(|| self.value(i, j + 1));
            let mut g = Vec2::new(diff(left, right), diff(down, up));
            if normalize {
                let n = g.norm();
                if n > 0.0 {
                    g = g * (alpha / n);
                }
            }
            u.set(i, j, g);
        }
        u
    }
}
