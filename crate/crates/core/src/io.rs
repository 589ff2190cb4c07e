//! File formats: scenario configs (TOML), density snapshots (CSV matrices),
//! run manifests and diagnostics streams (JSON lines), convergence tables
//! (CSV).
//!
//! Snapshots print 17 significant digits so re-reading reproduces every
//! coefficient bit-exactly. A manifest's first line embeds the scenario, so
//! `parse_scenario` accepts either a TOML config or an emitted manifest.

use crate::diagnostics::ConvergenceRow;
use crate::engine::StepDiagnostics;
use crate::error::ScenarioError;
use crate::grid::{DensityField, Grid};
use crate::scenario::Scenario;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

/// Write a density snapshot: line i holds cells (i, 1..M) comma-separated.
pub fn write_snapshot(path: &Path, field: &DensityField) -> std::io::Result<()> {
    let grid = field.grid();
    let m = grid.m();
    let mut out = BufWriter::new(fs::File::create(path)?);
    for i in 1..=m {
        let mut line = String::with_capacity(m * 24);
        for j in 1..=m {
            if j > 1 {
                line.push(',');
            }
            line.push_str(&format!("{:.16e}", field.get(i, j)));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()
}

/// Read a snapshot back onto its grid; values round-trip exactly.
pub fn read_snapshot(path: &Path, grid: &Arc<Grid>) -> Result<DensityField, ScenarioError> {
    let text = fs::read_to_string(path)?;
    let m = grid.m();
    let mut rho = vec![0.0; grid.n_cells()];
    let mut lines = 0usize;
    for (li, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if li >= m {
            return Err(ScenarioError::Parse(format!(
                "snapshot has more than {m} rows"
            )));
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != m {
            return Err(ScenarioError::Parse(format!(
                "snapshot line {} has {} cells, expected {m}",
                li + 1,
                cells.len()
            )));
        }
        for (jj, cell) in cells.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|e| {
                ScenarioError::Parse(format!("snapshot line {}: {e}", li + 1))
            })?;
            rho[grid.idx(li + 1, jj + 1)] = v;
        }
        lines += 1;
    }
    if lines != m {
        return Err(ScenarioError::Parse(format!(
            "snapshot has {lines} rows, expected {m}"
        )));
    }
    DensityField::new(grid.clone(), rho).map_err(|e| ScenarioError::Parse(e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ManifestLine {
    Scenario { scenario: Scenario },
    Step { step: usize, dt: f64, halvings: usize, clamped_cells: usize },
    Summary { steps: usize, initial_mass: f64, final_mass: f64, ok: bool },
}

/// Run manifest: scenario parameters plus the effective dt of every step.
pub fn write_manifest(
    path: &Path,
    scenario: &Scenario,
    records: &[StepDiagnostics],
    initial_mass: f64,
    ok: bool,
) -> std::io::Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    let head = ManifestLine::Scenario { scenario: scenario.clone() };
    writeln!(out, "{}", serde_json::to_string(&head).expect("manifest serializes"))?;
    for rec in records {
        let line = ManifestLine::Step {
            step: rec.step,
            dt: rec.dt,
            halvings: rec.halvings,
            clamped_cells: rec.clamped_cells,
        };
        writeln!(out, "{}", serde_json::to_string(&line).expect("manifest serializes"))?;
    }
    let final_mass = records.last().map_or(initial_mass, |r| r.mass);
    let tail = ManifestLine::Summary { steps: records.len(), initial_mass, final_mass, ok };
    writeln!(out, "{}", serde_json::to_string(&tail).expect("manifest serializes"))?;
    out.flush()
}

/// One JSON object per step.
pub fn write_diagnostics(path: &Path, records: &[StepDiagnostics]) -> std::io::Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for rec in records {
        writeln!(out, "{}", serde_json::to_string(rec).expect("record serializes"))?;
    }
    out.flush()
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<StepDiagnostics>, ScenarioError> {
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        records.push(
            serde_json::from_str(line).map_err(|e| ScenarioError::Parse(e.to_string()))?,
        );
    }
    Ok(records)
}

/// Load a scenario from a TOML config or from the first line of an emitted
/// manifest (sniffed by the leading `{`).
pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        let first = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| ScenarioError::Parse("empty manifest".into()))?;
        let line: ManifestLine =
            serde_json::from_str(first).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        match line {
            ManifestLine::Scenario { scenario } => {
                scenario.validate()?;
                Ok(scenario)
            }
            _ => Err(ScenarioError::Parse(
                "manifest does not start with a scenario line".into(),
            )),
        }
    } else {
        Scenario::from_toml(&text)
    }
}

/// Convergence table as CSV.
pub fn write_convergence_csv(path: &Path, rows: &[ConvergenceRow]) -> std::io::Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "m,h,dt,steps,loc_error_max,loc_error_tv,l1_density_error")?;
    for r in rows {
        let l1 = r.l1_density_error.map_or(String::new(), |v| format!("{v:.16e}"));
        writeln!(
            out,
            "{},{:.16e},{:.16e},{},{:.16e},{:.16e},{}",
            r.m, r.h, r.dt, r.steps, r.loc_error_max, r.loc_error_tv, l1
        )?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec2::Vec2;

    #[test]
    fn snapshot_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.csv");
        let grid = Arc::new(Grid::new(9, &[]).unwrap());
        let f = DensityField::from_fn(grid.clone(), |p| {
            (p.x * 31.7).sin().abs() * 0.3 + (p - Vec2::new(0.3, 0.3)).norm_sq()
        })
        .unwrap();
        write_snapshot(&path, &f).unwrap();
        let back = read_snapshot(&path, &grid).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn snapshot_with_wrong_shape_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.csv");
        fs::write(&path, "1.0,2.0\n3.0,4.0\n").unwrap();
        let grid = Arc::new(Grid::new(3, &[]).unwrap());
        assert!(read_snapshot(&path, &grid).is_err());
    }

    #[test]
    fn manifest_round_trips_the_scenario() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        let sc = Scenario::from_toml(
            r#"
            [grid]
            m = 8
            obstacles = [{ x = [0.25, 0.5], y = [0.5, 0.75] }]

            [initial]
            kind = "gaussian"
            center = [0.3, 0.3]
            spread = 0.07
            mass = 1.5

            [desired]
            mode = "waypoint"
            target = [0.9, 0.9]
            alpha = 1.25
            waypoints = [[0.5, 0.25], [0.25, 0.8]]

            [interaction]
            kind = "com_repulsion"
            beta = 0.4
            radius = 0.2
            norm = "infinity"

            [time]
            policy = "adaptive"
            dt0 = 0.05

            [run]
            steps = 3
            stride = 2
            seed = 9
        "#,
        )
        .unwrap();
        let out = crate::engine::run(&sc).unwrap();
        write_manifest(&path, &sc, &out.records, out.initial_mass, true).unwrap();
        let back = parse_scenario(&path).unwrap();
        assert_eq!(sc, back);
    }

    #[test]
    fn diagnostics_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("diag.jsonl");
        let sc = Scenario::from_toml(
            r#"
            [grid]
            m = 8

            [initial]
            kind = "uniform"
            mass = 1.0

            [desired]
            mode = "constant"
            velocity = [0.0, 0.1]

            [time]
            policy = "fixed"
            dt = 0.05

            [run]
            steps = 4
        "#,
        )
        .unwrap();
        let out = crate::engine::run(&sc).unwrap();
        write_diagnostics(&path, &out.records).unwrap();
        let back = read_diagnostics(&path).unwrap();
        assert_eq!(out.records, back);
    }
}
