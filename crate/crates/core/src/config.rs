//! Simulation configuration: strict JSON with documented defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FsiError, Result};
use crate::metric::{EscapeThresholds, MetricField, MetricSpec, VectorFieldSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub geometry: Geometry,
    #[serde(default)]
    pub physics: Physics,
    pub time: TimeStepping,
    #[serde(default)]
    pub initial_data: InitialData,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub escape: EscapeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub r0: f64,
    pub r1: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `a ≡ I`: the linear Stokes–wave system.
    Frozen,
    /// `a = (∇η)^{-1}` lagged one step.
    Ale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    pub gamma: f64,
    pub beta: f64,
    pub viscosity: f64,
    pub metric: MetricSpec,
    pub mode: Mode,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            beta: 1.0,
            viscosity: 1.0,
            metric: MetricSpec::Identity,
            mode: Mode::Frozen,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeStepping {
    pub dt: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Smooth bump in `w₀` inside the elastic disc; `w₁ = 0`, `v₀ = 0`.
    ElasticPulse,
    /// Divergence-free swirl `v₀` vanishing on both circles; `w₀ = w₁ = 0`.
    Shear,
    Combined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialData {
    pub preset: Preset,
    pub amplitude: f64,
}

impl Default for InitialData {
    fn default() -> Self {
        Self {
            preset: Preset::ElasticPulse,
            amplitude: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    pub eps_hat1: f64,
    pub output_stride: usize,
    /// Decay-fit window `[t_a, t_b]`; defaults to the last 60% of the run.
    pub fit_window: Option<[f64; 2]>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            eps_hat1: 0.01,
            output_stride: 1,
            fit_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative interface residual accepted after a step.
    pub coupling: f64,
    pub det_floor: f64,
    pub ellipticity_floor: f64,
    /// Relative residual accepted from the linear solver.
    pub solver: f64,
    /// Energy identity tolerance relative to `E(0)`, used in run summaries.
    pub energy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            coupling: 1e-8,
            det_floor: 0.5,
            ellipticity_floor: 0.5,
            solver: 1e-9,
            energy: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EscapeConfig {
    pub field: VectorFieldSpec,
    /// Tensor grid resolution per axis over the elastic disc.
    pub grid_n: usize,
    pub boundary_n: usize,
    pub thresholds: EscapeThresholds,
}

impl Default for EscapeConfig {
    fn default() -> Self {
        Self {
            field: VectorFieldSpec::Radial {
                center: vec![0.0, 0.0],
            },
            grid_n: 101,
            boundary_n: 256,
            thresholds: EscapeThresholds::default(),
        }
    }
}

impl SimulationConfig {
    /// A minimal valid configuration with every optional section defaulted.
    pub fn new(r0: f64, r1: f64, h: f64, dt: f64, t_end: f64) -> Self {
        Self {
            geometry: Geometry { r0, r1, h },
            physics: Physics::default(),
            time: TimeStepping { dt, t_end },
            initial_data: InitialData::default(),
            diagnostics: DiagnosticsConfig::default(),
            tolerances: Tolerances::default(),
            escape: EscapeConfig::default(),
        }
    }

    pub fn metric_field(&self) -> MetricField {
        MetricField::from_spec(2, self.physics.metric.clone())
            .with_domain_diameter(2.0 * self.geometry.r0)
    }

    pub fn n_steps(&self) -> usize {
        (self.time.t_end / self.time.dt - 1e-9).ceil().max(0.0) as usize
    }

    /// Lists every violated invariant, keyed by its dotted config path.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut positive = |key: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("{key} must be positive and finite (got {v})"));
            }
        };
        positive("geometry.r0", self.geometry.r0);
        positive("geometry.r1", self.geometry.r1);
        positive("geometry.h", self.geometry.h);
        positive("physics.gamma", self.physics.gamma);
        positive("physics.beta", self.physics.beta);
        positive("physics.viscosity", self.physics.viscosity);
        positive("time.dt", self.time.dt);
        positive("diagnostics.eps_hat1", self.diagnostics.eps_hat1);
        positive("tolerances.coupling", self.tolerances.coupling);
        positive("tolerances.solver", self.tolerances.solver);
        positive("tolerances.energy", self.tolerances.energy);
        positive("tolerances.det_floor", self.tolerances.det_floor);
        positive(
            "tolerances.ellipticity_floor",
            self.tolerances.ellipticity_floor,
        );
        if !(self.initial_data.amplitude.is_finite()) {
            errs.push("initial_data.amplitude must be finite".into());
        }
        if !(self.geometry.r0 < self.geometry.r1) {
            errs.push(format!(
                "geometry.r0 must be smaller than geometry.r1 (got {} >= {})",
                self.geometry.r0, self.geometry.r1
            ));
        }
        if !(self.geometry.h < self.geometry.r0) {
            errs.push(format!(
                "geometry.h must be smaller than geometry.r0 (got {})",
                self.geometry.h
            ));
        }
        if !(self.time.t_end >= 0.0 && self.time.t_end.is_finite()) {
            errs.push(format!(
                "time.t_end must be nonnegative (got {})",
                self.time.t_end
            ));
        }
        if self.diagnostics.output_stride == 0 {
            errs.push("diagnostics.output_stride must be at least 1".into());
        }
        if let Some([a, b]) = self.diagnostics.fit_window {
            if !(a < b) {
                errs.push(format!(
                    "diagnostics.fit_window must satisfy t_a < t_b (got [{a}, {b}])"
                ));
            }
        }
        if let Err(e) = self.metric_field().validate() {
            errs.push(format!("physics.metric: {e}"));
        }
        if self.escape.grid_n < 2 {
            errs.push("escape.grid_n must be at least 2".into());
        }
        if self.escape.boundary_n == 0 {
            errs.push("escape.boundary_n must be at least 1".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(FsiError::Validation(errs))
        }
    }
}

/// Parses and validates a configuration string.
pub fn parse_config_str(text: &str) -> Result<SimulationConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: SimulationConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        FsiError::Parse(format!(
            "at `{path}` (line {}, column {}): {inner}",
            inner.line(),
            inner.column()
        ))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| FsiError::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        r#"{"geometry": {"r0": 1, "r1": 2, "h": 0.3}, "time": {"dt": 0.01, "t_end": 1}}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.physics.gamma, 1.0);
        assert_eq!(cfg.physics.beta, 1.0);
        assert_eq!(cfg.physics.mode, Mode::Frozen);
        assert_eq!(cfg.physics.metric, MetricSpec::Identity);
        assert_eq!(cfg.diagnostics.eps_hat1, 0.01);
        assert_eq!(cfg.n_steps(), 100);
    }

    #[test]
    fn negative_gamma_names_key() {
        let text = r#"{"geometry": {"r0": 1, "r1": 2, "h": 0.3}, "physics": {"gamma": -1},
                       "time": {"dt": 0.01, "t_end": 1}}"#;
        match parse_config_str(text) {
            Err(FsiError::Validation(v)) => assert!(v.iter().any(|m| m.contains("physics.gamma"))),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_a_parse_error() {
        let text = r#"{"geometry": {"r0": 1, "r1": 2, "h": 0.3}, "physics": {"viscocity": 2},
                       "time": {"dt": 0.01, "t_end": 1}}"#;
        match parse_config_str(text) {
            Err(FsiError::Parse(m)) => {
                assert!(m.contains("viscocity") && m.contains("physics"), "{m}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn all_violations_are_listed() {
        let text = r#"{"geometry": {"r0": 2, "r1": 1, "h": 0.3}, "physics": {"beta": 0},
                       "time": {"dt": -1, "t_end": 1}}"#;
        match parse_config_str(text) {
            Err(FsiError::Validation(v)) => {
                assert!(v.len() >= 3, "{v:?}");
                for key in ["geometry.r0", "physics.beta", "time.dt"] {
                    assert!(v.iter().any(|m| m.contains(key)), "{key} missing in {v:?}");
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
