//! Independent references used by tests and convergence studies.
//!
//! Three routes to a "true" answer, none of which share code with the
//! overlap-stencil scheme:
//! - [`exact_translation`]: the closed-form solution ρ₀(x − a·t) for
//!   constant-velocity transport, averaged onto a grid by subcell
//!   quadrature;
//! - [`fine_pushforward`] / [`fine_pushforward_fn`]: quadrature realization
//!   of the exact push-forward of an arbitrary point map, depositing
//!   subcell masses at their mapped centers;
//! - [`particle_run`]: a Lagrangian cloud moved by the same per-cell
//!   clamped velocities as the grid scheme and binned back to cells.

use crate::engine::{resolve_dt, Snapshot};
use crate::error::{Error, OracleError};
use crate::grid::{DensityField, Grid};
use crate::scenario::Scenario;
use crate::vec2::Vec2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Subcell quadrature factor for `exact_translation`.
const TRANSLATION_QUAD: usize = 8;

fn sample_field(field: &DensityField, p: Vec2) -> f64 {
    if p.x < 0.0 || p.x > 1.0 || p.y < 0.0 || p.y > 1.0 {
        return 0.0;
    }
    let (i, j) = field.grid().cell_of(p);
    field.get(i, j)
}

/// Exact solution of constant-velocity transport: the input density rigidly
/// translated by a·t, cell-averaged onto `out_grid` with k×k midpoint
/// quadrature (k = 8). Obstacle grids are not supported, and the translated
/// support must stay inside the unit square.
pub fn exact_translation(
    field0: &DensityField,
    a: Vec2,
    t: f64,
    out_grid: &Arc<Grid>,
) -> Result<DensityField, OracleError> {
    if field0.grid().has_obstacles() || out_grid.has_obstacles() {
        return Err(OracleError::ObstaclesUnsupported);
    }
    let shift = a * t;
    // Bounding box of the loaded cells must remain inside Ω after the shift.
    let g0 = field0.grid();
    let h0 = g0.h();
    let mut bounds: Option<[f64; 4]> = None;
    for (i, j) in g0.cells() {
        if field0.get(i, j) > 0.0 {
            let lo = g0.corner(i, j);
            let b = bounds.get_or_insert([f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY]);
            b[0] = b[0].min(lo.x);
            b[1] = b[1].max(lo.x + h0);
            b[2] = b[2].min(lo.y);
            b[3] = b[3].max(lo.y + h0);
        }
    }
    if let Some(b) = bounds {
        let eps = 1e-12;
        if b[0] + shift.x < -eps
            || b[1] + shift.x > 1.0 + eps
            || b[2] + shift.y < -eps
            || b[3] + shift.y > 1.0 + eps
        {
            return Err(OracleError::SupportEscape);
        }
    }

    let k = TRANSLATION_QUAD;
    let h = out_grid.h();
    let sub = h / k as f64;
    let mut rho = vec![0.0; out_grid.n_cells()];
    for (i, j) in out_grid.cells() {
        let corner = out_grid.corner(i, j);
        let mut sum = 0.0;
        for si in 0..k {
            for sj in 0..k {
                let p = Vec2::new(
                    corner.x + (si as f64 + 0.5) * sub,
                    corner.y + (sj as f64 + 0.5) * sub,
                );
                sum += sample_field(field0, p - shift);
            }
        }
        rho[out_grid.idx(i, j)] = sum / (k * k) as f64;
    }
    DensityField::new(out_grid.clone(), rho).map_err(OracleError::from)
}

/// Quadrature push-forward of a density field under an arbitrary point map:
/// every cell is split k×k, each subcell's mass ρ·h²/k² moves with its
/// center and is deposited into the cell of `field`'s grid containing the
/// image. Total deposited mass equals the field mass by construction.
pub fn fine_pushforward(
    field: &DensityField,
    motion: impl Fn(Vec2) -> Vec2,
    k: usize,
) -> Result<Vec<f64>, OracleError> {
    let grid = field.grid();
    fine_pushforward_impl(grid, |i, j| field.get(i, j), motion, k)
}

/// Same quadrature push-forward, but with the source density sampled from a
/// closed-form function at subcell centers instead of a gridded field.
pub fn fine_pushforward_fn(
    grid: &Arc<Grid>,
    rho: impl Fn(Vec2) -> f64,
    motion: impl Fn(Vec2) -> Vec2,
    k: usize,
) -> Result<Vec<f64>, OracleError> {
    let h = grid.h();
    let sub = h / k as f64;
    let cell_area = sub * sub;
    let mut measures = vec![0.0; grid.n_cells()];
    for (i, j) in grid.cells() {
        if grid.is_blocked(i, j) {
            continue;
        }
        let corner = grid.corner(i, j);
        for si in 0..k {
            for sj in 0..k {
                let p = Vec2::new(
                    corner.x + (si as f64 + 0.5) * sub,
                    corner.y + (sj as f64 + 0.5) * sub,
                );
                let m = rho(p) * cell_area;
                if m == 0.0 {
                    continue;
                }
                let q = motion(p);
                if q.x < 0.0 || q.x > 1.0 || q.y < 0.0 || q.y > 1.0 {
                    return Err(OracleError::ImageOutsideDomain { x: q.x, y: q.y });
                }
                let (ti, tj) = grid.cell_of(q);
                measures[grid.idx(ti, tj)] += m;
            }
        }
    }
    Ok(measures)
}

fn fine_pushforward_impl(
    grid: &Arc<Grid>,
    cell_rho: impl Fn(usize, usize) -> f64,
    motion: impl Fn(Vec2) -> Vec2,
    k: usize,
) -> Result<Vec<f64>, OracleError> {
    let h = grid.h();
    let sub = h / k as f64;
    let sub_area = sub * sub;
    let mut measures = vec![0.0; grid.n_cells()];
    for (i, j) in grid.cells() {
        let rho = cell_rho(i, j);
        if rho == 0.0 {
            continue;
        }
        let m = rho * sub_area;
        let corner = grid.corner(i, j);
        for si in 0..k {
            for sj in 0..k {
                let p = Vec2::new(
                    corner.x + (si as f64 + 0.5) * sub,
                    corner.y + (sj as f64 + 0.5) * sub,
                );
                let q = motion(p);
                if q.x < 0.0 || q.x > 1.0 || q.y < 0.0 || q.y > 1.0 {
                    return Err(OracleError::ImageOutsideDomain { x: q.x, y: q.y });
                }
                let (ti, tj) = grid.cell_of(q);
                measures[grid.idx(ti, tj)] += m;
            }
        }
    }
    Ok(measures)
}

/// Cell-average projection of a closed-form density by k×k midpoint
/// quadrature; blocked cells are zeroed.
pub fn project_fn(grid: &Arc<Grid>, rho: impl Fn(Vec2) -> f64, k: usize) -> DensityField {
    let h = grid.h();
    let sub = h / k as f64;
    let mut values = vec![0.0; grid.n_cells()];
    for (i, j) in grid.cells() {
        if grid.is_blocked(i, j) {
            continue;
        }
        let corner = grid.corner(i, j);
        let mut sum = 0.0;
        for si in 0..k {
            for sj in 0..k {
                let p = Vec2::new(
                    corner.x + (si as f64 + 0.5) * sub,
                    corner.y + (sj as f64 + 0.5) * sub,
                );
                sum += rho(p);
            }
        }
        values[grid.idx(i, j)] = (sum / (k * k) as f64).max(0.0);
    }
    DensityField::new(grid.clone(), values).expect("projection is nonnegative")
}

/// Equal-weight particle ensemble.
#[derive(Debug, Clone)]
pub struct ParticleCloud {
    pub positions: Vec<Vec2>,
    /// Mass carried by each particle: total mass / particle count.
    pub weight: f64,
}

impl ParticleCloud {
    /// Bin the cloud onto a grid as a density field.
    pub fn bin(&self, grid: &Arc<Grid>) -> Result<DensityField, OracleError> {
        let h2 = grid.h() * grid.h();
        let mut counts = vec![0u64; grid.n_cells()];
        for &p in &self.positions {
            let (mut i, mut j) = grid.cell_of(p);
            if grid.is_blocked(i, j) {
                // A particle can round onto the shared face of a blocked
                // cell; reassign it to the walkable cell it came from.
                let h = grid.h();
                let on_left_face = p.x == (i - 1) as f64 * h;
                let on_bottom_face = p.y == (j - 1) as f64 * h;
                if on_left_face && i > 1 && !grid.is_blocked(i - 1, j) {
                    i -= 1;
                } else if on_bottom_face && j > 1 && !grid.is_blocked(i, j - 1) {
                    j -= 1;
                } else if on_left_face && on_bottom_face
                    && i > 1
                    && j > 1
                    && !grid.is_blocked(i - 1, j - 1)
                {
                    i -= 1;
                    j -= 1;
                } else {
                    return Err(OracleError::ParticleEscaped { x: p.x, y: p.y });
                }
            }
            counts[grid.idx(i, j)] += 1;
        }
        let rho: Vec<f64> = counts.iter().map(|&c| c as f64 * self.weight / h2).collect();
        DensityField::new(grid.clone(), rho).map_err(OracleError::from)
    }
}

#[derive(Debug)]
pub struct ParticleRunResult {
    /// (step, binned density) at the same stride as the grid run.
    pub snapshots: Vec<Snapshot>,
    pub cloud: ParticleCloud,
}

/// Stratified sampling of the initial density: ⌈N·m_c/m⌉ draws per loaded
/// cell placed on a jittered sub-lattice (one draw per sub-stratum, so the
/// within-cell distribution is nearly uniform by construction), then
/// shuffled and trimmed to exactly N.
fn sample_cloud(
    field: &DensityField,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ParticleCloud, OracleError> {
    let grid = field.grid();
    let h = grid.h();
    let total = field.mass();
    let h2 = h * h;
    let mut positions = Vec::with_capacity(n + grid.m());
    for (i, j) in grid.cells() {
        let m_c = field.get(i, j) * h2;
        if m_c <= 0.0 {
            continue;
        }
        let count = ((n as f64) * m_c / total).ceil() as usize;
        let g = (count as f64).sqrt().ceil() as usize;
        let sub = h / g as f64;
        let corner = grid.corner(i, j);
        for k in 0..count {
            let (si, sj) = (k / g, k % g);
            let p = Vec2::new(
                corner.x + (si as f64 + rng.gen_range(0.0..1.0)) * sub,
                corner.y + (sj as f64 + rng.gen_range(0.0..1.0)) * sub,
            );
            positions.push(p);
        }
    }
    positions.shuffle(rng);
    positions.truncate(n);
    Ok(ParticleCloud { positions, weight: total / n as f64 })
}

/// Lagrangian cross-check: move N particles with the per-cell clamped
/// velocity built from their own binned density — the particle realization
/// of the same motion map the grid scheme integrates. Deterministic for a
/// fixed (scenario, N, seed).
pub fn particle_run(scenario: &Scenario, n: usize, seed: u64) -> Result<ParticleRunResult, Error> {
    if n == 0 {
        return Err(crate::error::ScenarioError::Validation(
            "particle run needs at least one particle".into(),
        )
        .into());
    }
    scenario.validate()?;
    let grid = scenario.build_grid()?;
    let field0 = scenario.initial_field(&grid)?;
    let compiled = scenario.velocity_model().compile(&grid)?;
    let base_dt = scenario.time.base_dt();
    let adaptive = scenario.time.is_adaptive();
    let steps = scenario.run.steps;
    let stride = scenario.run.stride;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cloud = sample_cloud(&field0, n, &mut rng)?;

    let mut snapshots = vec![Snapshot { step: 0, field: cloud.bin(&grid)? }];
    for step_idx in 0..steps {
        let binned = cloud.bin(&grid)?;
        let u_raw = compiled.evaluate(&binned);
        let (u, dt, _halvings, _clamped) = resolve_dt(&u_raw, base_dt, adaptive)?;
        for p in &mut cloud.positions {
            let (i, j) = grid.cell_of(*p);
            let v = u.get(i, j);
            *p += v * dt;
        }
        if (step_idx + 1) % stride == 0 || step_idx + 1 == steps {
            snapshots.push(Snapshot { step: step_idx + 1, field: cloud.bin(&grid)? });
        }
    }
    Ok(ParticleRunResult { snapshots, cloud })
}
