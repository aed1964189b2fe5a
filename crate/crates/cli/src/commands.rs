//! The four subcommands. Each returns a process exit code.

use std::fs;
use std::path::Path;

use fsi_core::config::{parse_config, SimulationConfig};
use fsi_core::diagnostics::multiplier::{identity_suite, suite_table};
use fsi_core::metric::{
    certify_escape, disc_boundary_samples, disc_interior_grid, DerivativeMode, VectorFieldH,
    Verdict,
};
use fsi_core::mms::{coupled_time_convergence, mesh_levels, poisson_mms, stokes_mms, wave_mms};
use fsi_core::output::energies_csv;
use fsi_core::simulation::Simulation;
use fsi_core::FsiError;

use crate::exit;
use crate::summary::RunSummary;

/// Exit code for an error.
pub fn exit_code(e: &FsiError) -> i32 {
    match e {
        FsiError::MapDegenerate(_) | FsiError::DegenerateCoefficient { .. } => exit::MAP_DEGENERATE,
        FsiError::Parse(_)
        | FsiError::Validation(_)
        | FsiError::Io(_)
        | FsiError::UnknownTag(_)
        | FsiError::BadGeometry(_) => exit::INVALID_INPUT,
        _ => exit::SOLVER_FAILURE,
    }
}

fn load(path: &Path) -> Result<SimulationConfig, i32> {
    parse_config(path).map_err(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}

/// `fsi run`: writes `energies.csv`, `summary.txt` and `summary.json` to `out`.
pub fn cmd_run(config: &Path, out: &Path) -> i32 {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let started = std::time::Instant::now();
    let sim = match Simulation::new(&cfg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let result = sim.run(&cfg);
    let summary = RunSummary::new(&cfg, &result, sim.compatibility);
    let write = || -> std::io::Result<()> {
        fs::create_dir_all(out)?;
        fs::write(
            out.join("energies.csv"),
            energies_csv(result.strided(cfg.diagnostics.output_stride)),
        )?;
        fs::write(out.join("summary.txt"), summary.to_text())?;
        let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        json.push('\n');
        fs::write(out.join("summary.json"), json)
    };
    if let Err(e) = write() {
        eprintln!("error: writing {}: {e}", out.display());
        return exit::INVALID_INPUT;
    }
    print!("{}", summary.to_text());
    println!("wall_time_seconds = {:.3}", started.elapsed().as_secs_f64());
    match &result.error {
        None => exit::OK,
        Some(e) => {
            eprintln!("run aborted at step {}: {e}", result.steps_completed + 1);
            exit_code(e)
        }
    }
}

/// `fsi check-escape`: certifies the configured field on the elastic disc.
pub fn cmd_check_escape(config: &Path) -> i32 {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let metric = cfg.metric_field();
    let field = VectorFieldH::from_spec(2, cfg.escape.field.clone());
    if let Err(e) = field.validate() {
        eprintln!("error: escape.field: {e}");
        return exit::INVALID_INPUT;
    }
    let r0 = cfg.geometry.r0;
    let interior = disc_interior_grid(&[0.0, 0.0], r0, cfg.escape.grid_n);
    let boundary = disc_boundary_samples(&[0.0, 0.0], r0, cfg.escape.boundary_n);
    match certify_escape(
        &metric,
        &field,
        &interior,
        &boundary,
        cfg.escape.thresholds,
        DerivativeMode::Exact,
    ) {
        Ok(cert) => {
            print!("{}", cert.to_report());
            match cert.verdict {
                Verdict::Certified => exit::OK,
                Verdict::Refuted => exit::REFUTED,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit::REFUTED
        }
    }
}

/// `fsi verify-identities`: multiplier identities for the configured metric.
pub fn cmd_verify_identities(config: &Path) -> i32 {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let metric = cfg.metric_field();
    match identity_suite(&metric) {
        Ok(checks) => {
            let label = serde_json::to_string(&cfg.physics.metric).expect("metric serializes");
            print!("{}", suite_table(&label, &checks));
            if checks.iter().all(|c| c.passed) {
                exit::OK
            } else {
                exit::REFUTED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit::REFUTED
        }
    }
}

/// `fsi mms`: convergence studies over `levels` refinements.
pub fn cmd_mms(levels: usize) -> i32 {
    if levels < 2 {
        eprintln!("error: --levels must be at least 2");
        return exit::INVALID_INPUT;
    }
    let hs = mesh_levels(levels);
    let studies = (|| -> fsi_core::Result<Vec<fsi_core::mms::ConvergenceStudy>> {
        let (v, p) = stokes_mms(&hs)?;
        Ok(vec![
            wave_mms(&hs)?,
            v,
            p,
            poisson_mms(&hs)?,
            coupled_time_convergence(0.3, 0.02, 0.4, levels + 1)?,
        ])
    })();
    match studies {
        Ok(studies) => {
            for s in &studies {
                println!("{}", s.table());
            }
            if studies.iter().all(|s| s.passed) {
                exit::OK
            } else {
                exit::REFUTED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
