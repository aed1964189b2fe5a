//! Run summaries written next to `energies.csv`.

use serde::Serialize;
use sha2::{Digest, Sha256};

use fsi_core::compat::CompatibilityReport;
use fsi_core::config::{Mode, SimulationConfig};
use fsi_core::diagnostics::decay::{default_window, fit_decay_rate, DecayFit};
use fsi_core::diagnostics::energy::check_energy_inequality;
use fsi_core::output::format_f64;
use fsi_core::simulation::RunOutput;
use fsi_core::FsiError;

/// `sha256("blob <len>\0" + canonical config JSON)`, hex encoded.
pub fn config_hash(cfg: &SimulationConfig) -> String {
    let body = serde_json::to_string(cfg).expect("config serializes");
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(body.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value >= threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FinalValues {
    pub t: f64,
    pub e: f64,
    pub e1: f64,
    pub e2: f64,
    pub x: f64,
}

/// Everything in `summary.json`. Deterministic for a given config and build.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub config: SimulationConfig,
    pub config_hash: String,
    pub status: String,
    pub steps_completed: usize,
    pub steps_requested: usize,
    pub initial_energy: f64,
    pub final_values: FinalValues,
    pub decay_fit: Option<DecayFit>,
    pub decay_fit_error: Option<String>,
    pub compatibility: CompatibilityReport,
    pub checks: Vec<Check>,
}

impl RunSummary {
    pub fn new(
        cfg: &SimulationConfig,
        out: &RunOutput,
        compatibility: CompatibilityReport,
    ) -> Self {
        let e0 = out.initial_energy();
        let last = out.records.last().expect("at least one record");
        let t_end = last.t;
        let window = cfg
            .diagnostics
            .fit_window
            .unwrap_or_else(|| default_window(t_end));
        let (decay_fit, decay_fit_error) = match fit_decay_rate(&out.records, window) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let tol = cfg.tolerances.energy;
        let mut checks = Vec::new();
        if cfg.physics.mode == Mode::Frozen {
            checks.push(Check::at_most(
                "energy_identity",
                out.max_step_violation,
                tol * e0,
            ));
            checks.push(Check::at_most(
                "energy_inequality",
                check_energy_inequality(&out.records, 0).max_violation,
                10.0 * tol * e0,
            ));
            let rise = out
                .records
                .windows(2)
                .map(|w| w[1].e - w[0].e)
                .fold(f64::NEG_INFINITY, f64::max);
            checks.push(Check::at_most("monotonicity", rise.max(0.0), 1e-10 * e0));
        }
        let ell = out
            .records
            .iter()
            .map(|r| r.ellipticity_min)
            .fold(f64::INFINITY, f64::min);
        checks.push(Check::at_least(
            "ellipticity",
            ell,
            cfg.tolerances.ellipticity_floor,
        ));
        let iface = out
            .records
            .iter()
            .map(|r| r.interface_residual)
            .fold(0.0, f64::max);
        checks.push(Check {
            name: "interface_residual".into(),
            value: iface,
            threshold: cfg.tolerances.coupling,
            passed: !matches!(out.error, Some(FsiError::CouplingResidualExceeded { .. })),
        });
        if let Some(f) = &decay_fit {
            checks.push(Check::at_least("decay_rate_positive", f.rate, 0.0));
            checks.push(Check::at_least("decay_fit_r_squared", f.r_squared, 0.95));
        }
        Self {
            config: cfg.clone(),
            config_hash: config_hash(cfg),
            status: match &out.error {
                None => "completed".into(),
                Some(e) => format!("aborted: {e}"),
            },
            steps_completed: out.steps_completed,
            steps_requested: cfg.n_steps(),
            initial_energy: e0,
            final_values: FinalValues {
                t: last.t,
                e: last.e,
                e1: last.e1,
                e2: last.e2,
                x: last.x,
            },
            decay_fit,
            decay_fit_error,
            compatibility,
            checks,
        }
    }

    /// Flat `key = value` text form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        kv("config_hash", self.config_hash.clone());
        kv("status", self.status.clone());
        kv("steps_completed", self.steps_completed.to_string());
        kv("steps_requested", self.steps_requested.to_string());
        kv("initial_energy", format_f64(self.initial_energy));
        kv("final.t", format_f64(self.final_values.t));
        kv("final.E", format_f64(self.final_values.e));
        kv("final.E1", format_f64(self.final_values.e1));
        kv("final.E2", format_f64(self.final_values.e2));
        kv("final.X", format_f64(self.final_values.x));
        match &self.decay_fit {
            Some(f) => {
                kv(
                    "decay.window",
                    format!("[{}, {}]", format_f64(f.window[0]), format_f64(f.window[1])),
                );
                kv("decay.rate", format_f64(f.rate));
                kv("decay.amplitude", format_f64(f.amplitude));
                kv("decay.r_squared", format_f64(f.r_squared));
            }
            None => kv("decay", self.decay_fit_error.clone().unwrap_or_default()),
        }
        kv(
            "compat.transmission",
            format_f64(self.compatibility.transmission),
        );
        kv("compat.flux", format_f64(self.compatibility.flux));
        kv("compat.no_slip", format_f64(self.compatibility.no_slip));
        kv(
            "compat.wall_pressure",
            format_f64(self.compatibility.wall_pressure),
        );
        for c in &self.checks {
            kv(
                &format!("check.{}", c.name),
                format!(
                    "{} (value {}, threshold {})",
                    if c.passed { "pass" } else { "fail" },
                    format_f64(c.value),
                    format_f64(c.threshold)
                ),
            );
        }
        s
    }
}
