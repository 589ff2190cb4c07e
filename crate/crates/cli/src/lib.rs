//! Batch front-end commands. Each returns the process exit code:
//! 0 = success, 1 = validation or invariant failure, 2 = usage/parse error.

use crowdflow::diagnostics::{convergence_study, invariant_report};
use crowdflow::engine::run;
use crowdflow::error::{Error, ScenarioError};
use crowdflow::io::{
    parse_scenario, write_convergence_csv, write_diagnostics, write_manifest, write_snapshot,
};
use crowdflow::oracle::exact_translation;
use crowdflow::scenario::{Scenario, TimePolicy};
use crowdflow::velocity::DesiredModel;
use std::path::Path;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Steps actually run by `cmd_validate` (invariants are per-step, so a
/// shortened run checks the same properties at a fraction of the cost).
const VALIDATE_MAX_STEPS: usize = 100;

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Scenario(ScenarioError::Parse(_)) => EXIT_USAGE,
        Error::Io(_) | Error::Scenario(ScenarioError::Io(_)) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn load(path: &Path) -> Result<Scenario, (i32, String)> {
    parse_scenario(path).map_err(|e| {
        let code = match &e {
            ScenarioError::Parse(_) | ScenarioError::Io(_) => EXIT_USAGE,
            ScenarioError::Validation(_) => EXIT_FAILURE,
        };
        (code, e.to_string())
    })
}

/// Run a scenario and write snapshots, manifest and diagnostics into
/// `out_dir`. Nothing is written if the run aborts.
pub fn cmd_run(
    scenario_path: &Path,
    out_dir: &Path,
    stride: Option<usize>,
    adaptive_dt: bool,
) -> i32 {
    let mut scenario = match load(scenario_path) {
        Ok(sc) => sc,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return code;
        }
    };
    if let Some(s) = stride {
        scenario = scenario.with_stride(s);
    }
    if adaptive_dt {
        scenario.time = TimePolicy::Adaptive { dt0: scenario.time.base_dt() };
    }
    let result = match run(&scenario) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    let report = invariant_report(&result);

    if let Err(e) = std::fs::create_dir_all(out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_USAGE;
    }
    for snap in &result.snapshots {
        let path = out_dir.join(format!("snapshot_{:06}.csv", snap.step));
        if let Err(e) = write_snapshot(&path, &snap.field) {
            eprintln!("error: writing {}: {e}", path.display());
            return EXIT_USAGE;
        }
    }
    if let Err(e) = write_manifest(
        &out_dir.join("manifest.jsonl"),
        &scenario,
        &result.records,
        result.initial_mass,
        report.ok,
    ) {
        eprintln!("error: writing manifest: {e}");
        return EXIT_USAGE;
    }
    if let Err(e) = write_diagnostics(&out_dir.join("diagnostics.jsonl"), &result.records) {
        eprintln!("error: writing diagnostics: {e}");
        return EXIT_USAGE;
    }

    let max_drift = result
        .records
        .iter()
        .map(|r| r.mass_drift_rel)
        .fold(0.0, f64::max);
    println!(
        "run: {} steps, {} snapshots, mass {:.6} -> {:.6} (max drift {:.3e})",
        result.records.len(),
        result.snapshots.len(),
        result.initial_mass,
        result.records.last().map_or(result.initial_mass, |r| r.mass),
        max_drift
    );
    if report.ok {
        println!("invariants: ok");
        EXIT_OK
    } else {
        for v in &report.violations {
            println!("invariant violation: {v}");
        }
        EXIT_FAILURE
    }
}

/// Check the scheme invariants on a shortened run and cross-check against
/// the rigid-translation oracle when the flux is linear.
pub fn cmd_validate(scenario_path: &Path) -> i32 {
    let scenario = match load(scenario_path) {
        Ok(sc) => sc,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return code;
        }
    };
    let reduced = scenario
        .with_steps(scenario.run.steps.min(VALIDATE_MAX_STEPS))
        .with_stride(1);
    let result = match run(&reduced) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    let report = invariant_report(&result);

    let max_drift = result.records.iter().map(|r| r.mass_drift_rel).fold(0.0, f64::max);
    let min_density = result.records.iter().map(|r| r.min_density).fold(0.0, f64::min);
    let max_ratio = result.records.iter().map(|r| r.linf_ratio).fold(0.0, f64::max);
    let min_margin = result
        .records
        .iter()
        .map(|r| r.cfl_margin)
        .fold(f64::INFINITY, f64::min);
    let pass = |name: &str, ok: bool, detail: String| -> bool {
        println!("{}: {name} ({detail})", if ok { "pass" } else { "FAIL" });
        ok
    };
    let mut all = true;
    all &= pass(
        "mass conservation",
        max_drift <= 1e-12,
        format!("max relative drift {max_drift:.3e}"),
    );
    all &= pass("positivity", min_density >= 0.0, format!("min density {min_density:.3e}"));
    all &= pass(
        "sup-norm growth <= 4",
        max_ratio <= 4.0 * (1.0 + 1e-12),
        format!("max ratio {max_ratio:.6}"),
    );
    all &= pass(
        "cfl margin nonnegative",
        min_margin >= 0.0,
        format!("min margin {min_margin:.3e}"),
    );
    let confined = result.snapshots.iter().all(|snap| {
        let grid = snap.field.grid();
        grid.cells()
            .filter(|&(i, j)| grid.is_blocked(i, j))
            .all(|(i, j)| snap.field.get(i, j) == 0.0)
    });
    all &= pass("support confinement", confined, "no mass on blocked cells".to_string());

    // Oracle cross-check for linear constant-velocity flux.
    if !reduced.interaction.is_active() {
        if let DesiredModel::Constant { velocity } = &reduced.desired {
            let grid = result.final_field().grid();
            let t_final: f64 = result.records.iter().map(|r| r.dt).sum();
            match reduced
                .initial_field(grid)
                .map_err(Error::from)
                .and_then(|f0| exact_translation(&f0, *velocity, t_final, grid).map_err(Error::from))
            {
                Ok(reference) => {
                    let h = grid.h();
                    let err = result.final_field().max_abs_diff(&reference).unwrap_or(f64::NAN)
                        * h
                        * h;
                    println!("oracle: exact-translation max cell measure error {err:.3e}");
                }
                Err(e) => println!("oracle: exact-translation reference unavailable ({e})"),
            }
        }
    }

    if all {
        println!("all invariants pass");
        EXIT_OK
    } else {
        for v in &report.violations {
            println!("detail: {v}");
        }
        EXIT_FAILURE
    }
}

/// Refinement study across grid levels; writes `convergence.csv` and exits
/// 0 iff the max localization error is non-increasing as h decreases.
pub fn cmd_converge(scenario_path: &Path, levels: &[usize], out_dir: &Path) -> i32 {
    if levels.len() < 3 {
        eprintln!("error: need at least 3 levels, got {}", levels.len());
        return EXIT_USAGE;
    }
    let scenario = match load(scenario_path) {
        Ok(sc) => sc,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return code;
        }
    };
    let rows = match convergence_study(&scenario, levels) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_USAGE;
    }
    let csv = out_dir.join("convergence.csv");
    if let Err(e) = write_convergence_csv(&csv, &rows) {
        eprintln!("error: writing {}: {e}", csv.display());
        return EXIT_USAGE;
    }

    println!("m      h          dt         steps  loc_max      loc_tv       l1_density");
    for r in &rows {
        println!(
            "{:<6} {:<10.4e} {:<10.4e} {:<6} {:<12.5e} {:<12.5e} {}",
            r.m,
            r.h,
            r.dt,
            r.steps,
            r.loc_error_max,
            r.loc_error_tv,
            r.l1_density_error.map_or("-".to_string(), |v| format!("{v:.5e}")),
        );
    }
    let monotone = rows.windows(2).all(|w| w[1].loc_error_max <= w[0].loc_error_max + 1e-15);
    if monotone {
        println!("localization error is non-increasing under refinement");
        EXIT_OK
    } else {
        println!("localization error is NOT monotone under refinement");
        EXIT_FAILURE
    }
}
