//! Uniform square grid over Ω = [0,1]² with axis-aligned obstacle blocks,
//! and the piecewise-constant fields that live on it.
//!
//! The domain is partitioned into M×M cells of edge length h = 1/M. Cell
//! (i, j) (1-based, i along x, j along y) spans [(i-1)h, ih] × [(j-1)h, jh]
//! and has center x_ij = ((2i-1)h/2, (2j-1)h/2). Obstacles are snapped
//! outward to cell edges so every cell is wholly walkable or wholly blocked.

use crate::error::GridError;
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Axis-aligned rectangle with `x = [x_lo, x_hi]`, `y = [y_lo, y_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Rect {
    pub fn new(x: [f64; 2], y: [f64; 2]) -> Self {
        Rect { x, y }
    }

    /// Closed-rectangle membership.
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x[0] && p.x <= self.x[1] && p.y >= self.y[0] && p.y <= self.y[1]
    }

    /// Strict-interior membership.
    pub fn contains_open(&self, p: Vec2) -> bool {
        p.x > self.x[0] && p.x < self.x[1] && p.y > self.y[0] && p.y < self.y[1]
    }
}

/// Snapping tolerance: coordinates within this of a cell edge are treated
/// as lying on it, so `0.3` with h = 0.1 snaps to edge 3 and not edge 2.
const SNAP_EPS: f64 = 1e-9;

/// Uniform grid with obstacle mask. Immutable after construction.
#[derive(Debug, PartialEq)]
pub struct Grid {
    m: usize,
    h: f64,
    obstacles: Vec<Rect>,
    mask: Vec<bool>,
    blocked: usize,
}

impl Grid {
    /// Build an M×M grid; obstacle rectangles are snapped outward to the
    /// nearest cell edges. A cell is blocked iff its center lies inside a
    /// snapped rectangle.
    pub fn new(m: usize, obstacles: &[Rect]) -> Result<Self, GridError> {
        if m < 2 {
            return Err(GridError::TooFewCells(m));
        }
        let h = 1.0 / m as f64;
        let mut mask = vec![false; m * m];
        let mut snapped = Vec::with_capacity(obstacles.len());
        for r in obstacles {
            for &(lo, hi) in &[(r.x[0], r.x[1]), (r.y[0], r.y[1])] {
                if lo > hi {
                    return Err(GridError::RectNegativeExtent(format!("{r:?}")));
                }
                if lo < -SNAP_EPS || hi > 1.0 + SNAP_EPS {
                    return Err(GridError::RectOutOfDomain(format!("{r:?}")));
                }
            }
            // Outward snap in index space: lo down, hi up.
            let i0 = ((r.x[0] * m as f64 + SNAP_EPS).floor().max(0.0)) as usize;
            let i1 = ((r.x[1] * m as f64 - SNAP_EPS).ceil().min(m as f64)) as usize;
            let j0 = ((r.y[0] * m as f64 + SNAP_EPS).floor().max(0.0)) as usize;
            let j1 = ((r.y[1] * m as f64 - SNAP_EPS).ceil().min(m as f64)) as usize;
            if i0 == 0 && j0 == 0 && i1 == m && j1 == m {
                return Err(GridError::RectCoversDomain);
            }
            snapped.push(Rect::new(
                [i0 as f64 * h, i1 as f64 * h],
                [j0 as f64 * h, j1 as f64 * h],
            ));
            for i in (i0 + 1)..=i1 {
                for j in (j0 + 1)..=j1 {
                    mask[(i - 1) * m + (j - 1)] = true;
                }
            }
        }
        let blocked = mask.iter().filter(|&&b| b).count();
        Ok(Grid { m, h, obstacles: snapped, mask, blocked })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_cells(&self) -> usize {
        self.m * self.m
    }

    pub fn walkable_cells(&self) -> usize {
        self.n_cells() - self.blocked
    }

    /// Snapped obstacle rectangles.
    pub fn obstacles(&self) -> &[Rect] {
        &self.obstacles
    }

    pub fn has_obstacles(&self) -> bool {
        !self.obstacles.is_empty()
    }

    /// Flat index of 1-based cell (i, j); i-major so a snapshot line i is a
    /// contiguous slice.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(self.in_range(i, j));
        (i - 1) * self.m + (j - 1)
    }

    #[inline]
    pub fn in_range(&self, i: usize, j: usize) -> bool {
        (1..=self.m).contains(&i) && (1..=self.m).contains(&j)
    }

    #[inline]
    pub fn is_blocked(&self, i: usize, j: usize) -> bool {
        self.mask[self.idx(i, j)]
    }

    /// Cell center x_ij = ((2i-1)h/2, (2j-1)h/2).
    pub fn cell_center(&self, i: usize, j: usize) -> Result<Vec2, GridError> {
        if !self.in_range(i, j) {
            return Err(GridError::IndexOutOfRange { i, j, m: self.m });
        }
        Ok(self.center(i, j))
    }

    #[inline]
    pub(crate) fn center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new((i as f64 - 0.5) * self.h, (j as f64 - 0.5) * self.h)
    }

    /// Lower-left corner of cell (i, j).
    #[inline]
    pub(crate) fn corner(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new((i - 1) as f64 * self.h, (j - 1) as f64 * self.h)
    }

    /// Cell containing a point of Ω; points on a shared edge belong to the
    /// higher-index cell, and the boundary faces x = 1, y = 1 to the last one.
    pub fn cell_of(&self, p: Vec2) -> (usize, usize) {
        let clamp = |v: f64| -> usize {
            let k = (v / self.h).floor() as isize;
            (k.clamp(0, self.m as isize - 1) + 1) as usize
        };
        (clamp(p.x), clamp(p.y))
    }

    /// Iterate all 1-based cell indices in row-major (i-major) order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let m = self.m;
        (1..=m).flat_map(move |i| (1..=m).map(move |j| (i, j)))
    }
}

/// Scalar norms of a density field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    /// h² Σ |ρ_ij| — equals the total mass for nonnegative fields.
    pub l1: f64,
    pub linf: f64,
    pub min: f64,
}

/// Nonnegative piecewise-constant density on a grid. Coefficients over
/// blocked cells are forced to zero at construction.
#[derive(Debug, Clone)]
pub struct DensityField {
    grid: Arc<Grid>,
    rho: Vec<f64>,
}

impl DensityField {
    pub fn new(grid: Arc<Grid>, mut rho: Vec<f64>) -> Result<Self, GridError> {
        if rho.len() != grid.n_cells() {
            return Err(GridError::LengthMismatch { got: rho.len(), want: grid.n_cells() });
        }
        for (i, j) in grid.cells() {
            let k = grid.idx(i, j);
            if grid.mask[k] {
                rho[k] = 0.0;
            } else if rho[k] < 0.0 {
                return Err(GridError::NegativeDensity { i, j, value: rho[k] });
            }
        }
        Ok(DensityField { grid, rho })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.n_cells();
        DensityField { grid, rho: vec![0.0; n] }
    }

    /// Sample a density function at cell centers.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(Vec2) -> f64) -> Result<Self, GridError> {
        let mut rho = vec![0.0; grid.n_cells()];
        for (i, j) in grid.cells() {
            rho[grid.idx(i, j)] = f(grid.center(i, j));
        }
        DensityField::new(grid, rho)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rho[self.grid.idx(i, j)]
    }

    pub fn values(&self) -> &[f64] {
        &self.rho
    }

    /// Total mass h² Σ ρ_ij = λ(Ω).
    pub fn mass(&self) -> f64 {
        let h2 = self.grid.h * self.grid.h;
        h2 * self.rho.iter().sum::<f64>()
    }

    /// Measure of a set of cells, h² Σ over the listed cells.
    pub fn measure_of(&self, cells: &[(usize, usize)]) -> Result<f64, GridError> {
        let h2 = self.grid.h * self.grid.h;
        let mut sum = 0.0;
        for &(i, j) in cells {
            if !self.grid.in_range(i, j) {
                return Err(GridError::IndexOutOfRange { i, j, m: self.grid.m });
            }
            sum += self.rho[self.grid.idx(i, j)];
        }
        Ok(h2 * sum)
    }

    /// Per-cell measures h² ρ_ij in flat index order.
    pub fn cell_measures(&self) -> Vec<f64> {
        let h2 = self.grid.h * self.grid.h;
        self.rho.iter().map(|r| h2 * r).collect()
    }

    pub fn norms(&self) -> Norms {
        let mut linf = f64::NEG_INFINITY;
        let mut min = f64::INFINITY;
        for &r in &self.rho {
            linf = linf.max(r);
            min = min.min(r);
        }
        Norms { l1: self.mass(), linf, min }
    }

    /// L¹ distance h² Σ |ρ_ij - σ_ij| between two fields on the same grid.
    pub fn l1_distance(&self, other: &DensityField) -> Result<f64, GridError> {
        same_grid(&self.grid, &other.grid)?;
        let h2 = self.grid.h * self.grid.h;
        Ok(h2
            * self
                .rho
                .iter()
                .zip(&other.rho)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }

    pub fn max_abs_diff(&self, other: &DensityField) -> Result<f64, GridError> {
        same_grid(&self.grid, &other.grid)?;
        Ok(self
            .rho
            .iter()
            .zip(&other.rho)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Per-cell constant velocity vectors; zero over blocked cells.
#[derive(Debug, Clone)]
pub struct CellVelocityField {
    grid: Arc<Grid>,
    u: Vec<Vec2>,
}

impl CellVelocityField {
    pub fn new(grid: Arc<Grid>, mut u: Vec<Vec2>) -> Result<Self, GridError> {
        if u.len() != grid.n_cells() {
            return Err(GridError::LengthMismatch { got: u.len(), want: grid.n_cells() });
        }
        for (v, blocked) in u.iter_mut().zip(&grid.mask) {
            if *blocked {
                *v = Vec2::ZERO;
            }
        }
        Ok(CellVelocityField { grid, u })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.n_cells();
        CellVelocityField { grid, u: vec![Vec2::ZERO; n] }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(Vec2) -> Vec2) -> Self {
        let mut u = vec![Vec2::ZERO; grid.n_cells()];
        for (i, j) in grid.cells() {
            let k = grid.idx(i, j);
            if !grid.mask[k] {
                u[k] = f(grid.center(i, j));
            }
        }
        CellVelocityField { grid, u }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Vec2 {
        self.u[self.grid.idx(i, j)]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, v: Vec2) {
        let k = self.grid.idx(i, j);
        self.u[k] = v;
    }

    pub fn values(&self) -> &[Vec2] {
        &self.u
    }

    /// Max-norm of the fastest cell, the speed entering the CFL check.
    pub fn max_speed_inf(&self) -> f64 {
        self.u.iter().map(|v| v.norm_inf()).fold(0.0, f64::max)
    }
}

/// Both fields must live on the same grid (shared or structurally equal).
pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<(), GridError> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(GridError::GridMismatch)
    }
}
