//! Error measures and refinement studies.
//!
//! The central quantity is the localization error: the per-cell discrepancy
//! |μ(E_ij) − λ(E_ij)| between a reference measure and the measure carried
//! by a computed density field. Its maximum over cells and its total
//! variation (sum over cells) are what the scheme's stability statements
//! bound, so the convergence harness tracks them across grid refinements at
//! a fixed dt/h ratio.

use crate::engine::{run, RunResult};
use crate::error::{Error, GridError, ScenarioError};
use crate::grid::DensityField;
use crate::oracle::exact_translation;
use crate::scenario::Scenario;
use crate::vec2::Vec2;
use crate::velocity::DesiredModel;
use serde::{Deserialize, Serialize};

/// Per-cell |reference − computed| measures with aggregates.
#[derive(Debug, Clone)]
pub struct LocalizationError {
    pub per_cell: Vec<f64>,
    pub max: f64,
    pub total_variation: f64,
}

/// Compare reference per-cell measures against the measures h²ρ_ij of a
/// field on the same grid.
pub fn localization_error(
    ref_measures: &[f64],
    field: &DensityField,
) -> Result<LocalizationError, GridError> {
    if ref_measures.len() != field.grid().n_cells() {
        return Err(GridError::LengthMismatch {
            got: ref_measures.len(),
            want: field.grid().n_cells(),
        });
    }
    let h2 = field.grid().h() * field.grid().h();
    let mut per_cell = Vec::with_capacity(ref_measures.len());
    let mut max = 0.0f64;
    let mut tv = 0.0;
    for (r, rho) in ref_measures.iter().zip(field.values()) {
        let e = (r - h2 * rho).abs();
        per_cell.push(e);
        max = max.max(e);
        tv += e;
    }
    Ok(LocalizationError { per_cell, max, total_variation: tv })
}

/// Tolerances for the scheme invariants checked at runtime.
pub const MASS_DRIFT_TOL: f64 = 1e-12;
/// One translated square overlaps at most 4 cells under CFL, so the sup
/// norm can grow at most 4x per step; the epsilon absorbs roundoff.
pub const LINF_GROWTH_BOUND: f64 = 4.0 * (1.0 + 1e-12);

#[derive(Debug, Clone, Serialize)]
pub struct InvariantRow {
    pub step: usize,
    pub mass_drift_rel: f64,
    pub min_density: f64,
    pub linf_ratio: f64,
    pub cfl_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantReport {
    pub rows: Vec<InvariantRow>,
    pub violations: Vec<String>,
    pub ok: bool,
}

/// Check conservation, positivity, sup-norm growth and the CFL margin on
/// every recorded step of a run.
pub fn invariant_report(result: &RunResult) -> InvariantReport {
    let mut rows = Vec::with_capacity(result.records.len());
    let mut violations = Vec::new();
    for rec in &result.records {
        rows.push(InvariantRow {
            step: rec.step,
            mass_drift_rel: rec.mass_drift_rel,
            min_density: rec.min_density,
            linf_ratio: rec.linf_ratio,
            cfl_margin: rec.cfl_margin,
        });
        if rec.mass_drift_rel > MASS_DRIFT_TOL {
            violations.push(format!(
                "step {}: mass drift {} exceeds {}",
                rec.step, rec.mass_drift_rel, MASS_DRIFT_TOL
            ));
        }
        if rec.min_density < 0.0 {
            violations.push(format!("step {}: negative density {}", rec.step, rec.min_density));
        }
        if rec.linf_ratio > LINF_GROWTH_BOUND {
            violations.push(format!(
                "step {}: sup-norm ratio {} exceeds 4",
                rec.step, rec.linf_ratio
            ));
        }
        if rec.cfl_margin < 0.0 {
            violations.push(format!("step {}: negative CFL margin {}", rec.step, rec.cfl_margin));
        }
    }
    let ok = violations.is_empty();
    InvariantReport { rows, violations, ok }
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub m: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub loc_error_max: f64,
    pub loc_error_tv: f64,
    /// Filled when a closed-form solution exists (constant-velocity runs).
    pub l1_density_error: Option<f64>,
}

/// Constant drift velocity of a linear-flux scenario, when it is one.
fn constant_linear_velocity(base: &Scenario) -> Option<Vec2> {
    if base.interaction.is_active() {
        return None;
    }
    match &base.desired {
        DesiredModel::Constant { velocity } => Some(*velocity),
        _ => None,
    }
}

/// Run the scenario across grid levels at fixed dt/h and fixed physical
/// horizon. For linear constant-velocity flux, the reference at each level
/// is the exact rigid translation of that level's initial field; otherwise
/// the reference is a run at twice the finest level, conservatively
/// aggregated onto each grid (self-convergence, stated in the CSV by the
/// absent closed-form error column).
pub fn convergence_study(base: &Scenario, levels: &[usize]) -> Result<Vec<ConvergenceRow>, Error> {
    if levels.len() < 3 {
        return Err(ScenarioError::Validation(format!(
            "convergence study needs at least 3 levels, got {}",
            levels.len()
        ))
        .into());
    }
    // Rows are keyed by strictly decreasing h.
    let mut levels = levels.to_vec();
    levels.sort_unstable();
    levels.dedup();
    let levels = &levels[..];
    if levels.len() < 3 {
        return Err(ScenarioError::Validation(
            "convergence study needs at least 3 distinct levels".into(),
        )
        .into());
    }
    base.validate()?;
    let m0 = base.grid.m as f64;
    let dt0 = base.time.base_dt();
    let ratio = dt0 * m0; // dt / h
    let horizon = base.run.steps as f64 * dt0;

    let level_scenario = |m: usize| -> Scenario {
        let h = 1.0 / m as f64;
        let dt = ratio * h;
        let steps = (horizon / dt).round() as usize;
        base.with_m(m).with_dt(dt).with_steps(steps)
    };

    let drift = constant_linear_velocity(base);
    let mut reference_fine: Option<(usize, RunResult)> = None;
    if drift.is_none() {
        let m_ref = 2 * levels.iter().copied().max().unwrap();
        for &m in levels {
            if m_ref % m != 0 {
                return Err(ScenarioError::Validation(format!(
                    "reference level {m_ref} must be divisible by every level, got {m}"
                ))
                .into());
            }
        }
        reference_fine = Some((m_ref, run(&level_scenario(m_ref))?));
    }

    let mut rows = Vec::with_capacity(levels.len());
    for &m in levels {
        let sc = level_scenario(m);
        let out = run(&sc)?;
        let field = out.final_field();
        let grid = field.grid();
        let t_final = out.records.iter().map(|r| r.dt).sum::<f64>();

        let (ref_measures, l1err) = match drift {
            Some(a) => {
                let field0 = sc.initial_field(grid)?;
                let ref_field = exact_translation(&field0, a, t_final, grid)?;
                let l1 = field.l1_distance(&ref_field)?;
                (ref_field.cell_measures(), Some(l1))
            }
            None => {
                let (m_ref, fine) = reference_fine.as_ref().expect("reference run exists");
                (aggregate_measures(fine.final_field(), *m_ref, m), None)
            }
        };
        let loc = localization_error(&ref_measures, field)?;
        rows.push(ConvergenceRow {
            m,
            h: grid.h(),
            dt: sc.time.base_dt(),
            steps: sc.run.steps,
            loc_error_max: loc.max,
            loc_error_tv: loc.total_variation,
            l1_density_error: l1err,
        });
    }
    Ok(rows)
}

/// Sum fine-grid cell measures into the containing coarse cells (grids are
/// nested, f = m_fine / m_coarse cells per axis).
pub fn aggregate_measures(fine: &DensityField, m_fine: usize, m_coarse: usize) -> Vec<f64> {
    assert_eq!(m_fine % m_coarse, 0, "grids must nest");
    let f = m_fine / m_coarse;
    let fine_measures = fine.cell_measures();
    let fine_grid = fine.grid();
    let mut out = vec![0.0; m_coarse * m_coarse];
    for fi in 1..=m_fine {
        for fj in 1..=m_fine {
            let ci = (fi - 1) / f;
            let cj = (fj - 1) / f;
            out[ci * m_coarse + cj] += fine_measures[fine_grid.idx(fi, fj)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::sync::Arc;

    fn plain(m: usize) -> Arc<Grid> {
        Arc::new(Grid::new(m, &[]).unwrap())
    }

    #[test]
    fn field_against_itself_has_zero_error() {
        let g = plain(8);
        let f = DensityField::from_fn(g.clone(), |p| p.x * p.y + 0.1).unwrap();
        let loc = localization_error(&f.cell_measures(), &f).unwrap();
        assert_eq!(loc.max, 0.0);
        assert_eq!(loc.total_variation, 0.0);
        assert!(loc.per_cell.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn uniform_offset_gives_max_and_tv() {
        let g = plain(8);
        let f = DensityField::from_fn(g.clone(), |_| 1.0).unwrap();
        let eps = 1e-3;
        let shifted: Vec<f64> = f.cell_measures().iter().map(|m| m + eps).collect();
        let loc = localization_error(&shifted, &f).unwrap();
        assert!((loc.max - eps).abs() < 1e-15);
        assert!((loc.total_variation - 64.0 * eps).abs() < 1e-12);
    }

    #[test]
    fn max_never_exceeds_total_variation() {
        let g = plain(6);
        let f = DensityField::from_fn(g.clone(), |p| (p.x * 9.0).sin().abs()).unwrap();
        let reference = DensityField::from_fn(g.clone(), |p| (p.y * 7.0).cos().abs()).unwrap();
        let loc = localization_error(&reference.cell_measures(), &f).unwrap();
        assert!(loc.max <= loc.total_variation);
        assert!(loc.per_cell.iter().all(|&e| e >= 0.0));
    }

    #[test]
    fn grid_mismatch_rejected() {
        let g = plain(8);
        let f = DensityField::from_fn(g, |_| 1.0).unwrap();
        assert!(localization_error(&[0.0; 4], &f).is_err());
    }

    #[test]
    fn tv_is_subadditive_under_field_mixing() {
        // error(ref, (f+g)/2) <= (error(ref,f) + error(ref,g)) / 2 cellwise.
        let g = plain(8);
        let f1 = DensityField::from_fn(g.clone(), |p| (13.0 * p.x).sin().abs() + 0.2).unwrap();
        let f2 = DensityField::from_fn(g.clone(), |p| (7.0 * p.y).cos().abs() + 0.4).unwrap();
        let mixed: Vec<f64> = f1
            .values()
            .iter()
            .zip(f2.values())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let mixed = DensityField::new(g.clone(), mixed).unwrap();
        let reference = DensityField::from_fn(g.clone(), |p| p.x + p.y).unwrap();
        let rm = reference.cell_measures();
        let e_mixed = localization_error(&rm, &mixed).unwrap();
        let e1 = localization_error(&rm, &f1).unwrap();
        let e2 = localization_error(&rm, &f2).unwrap();
        for k in 0..e_mixed.per_cell.len() {
            assert!(e_mixed.per_cell[k] <= 0.5 * (e1.per_cell[k] + e2.per_cell[k]) + 1e-15);
        }
        assert!(e_mixed.total_variation <= 0.5 * (e1.total_variation + e2.total_variation) + 1e-12);
    }

    #[test]
    fn invariant_report_flags_static_run_as_clean() {
        let sc = Scenario::from_toml(
            r#"
            [grid]
            m = 8

            [initial]
            kind = "uniform"
            mass = 1.0

            [desired]
            mode = "constant"
            velocity = [0.0, 0.0]

            [time]
            policy = "fixed"
            dt = 0.05

            [run]
            steps = 5
        "#,
        )
        .unwrap();
        let out = run(&sc).unwrap();
        let report = invariant_report(&out);
        assert!(report.ok, "{:?}", report.violations);
        for row in &report.rows {
            assert_eq!(row.mass_drift_rel, 0.0);
            assert_eq!(row.linf_ratio, 1.0);
            assert!(row.min_density >= 0.0);
        }
    }

    #[test]
    fn aggregation_conserves_mass() {
        let g = plain(32);
        let f = DensityField::from_fn(g, |p| (p - Vec2::new(0.4, 0.6)).norm_sq().exp()).unwrap();
        let coarse = aggregate_measures(&f, 32, 8);
        let total: f64 = coarse.iter().sum();
        assert!((total - f.mass()).abs() < 1e-12 * f.mass());
    }
}
