//! Exponential decay-rate fits of the total functional.

use serde::{Deserialize, Serialize};

use crate::diagnostics::energy::EnergyRecord;
use crate::error::{FsiError, Result};

/// Values at or below this are excluded before taking logarithms.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

const MIN_POINTS: usize = 10;

/// `X(t) ≈ amplitude · exp(−rate · t)` on `window`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub window: [f64; 2],
    pub points: usize,
}

/// Least-squares line through `(t, ln y)` over samples with `y` above the
/// underflow floor.
pub fn fit_exponential(t: &[f64], y: &[f64], window: [f64; 2]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(t, y)| {
            **t >= window[0] && **t <= window[1] && y.is_finite() && **y > UNDERFLOW_FLOOR
        })
        .map(|(t, y)| (*t, y.ln()))
        .collect();
    if pts.len() < MIN_POINTS {
        return Err(FsiError::InsufficientData(format!(
            "{} usable points in [{}, {}], need {MIN_POINTS}",
            pts.len(),
            window[0],
            window[1]
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if stt == 0.0 {
        return Err(FsiError::InsufficientData("all samples at one time".into()));
    }
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(DecayFit {
        rate: -slope,
        amplitude: intercept.exp(),
        r_squared,
        window,
        points: pts.len(),
    })
}

/// Fits the decay of `X` over the records inside `window`.
pub fn fit_decay_rate(records: &[EnergyRecord], window: [f64; 2]) -> Result<DecayFit> {
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let x: Vec<f64> = records.iter().map(|r| r.x).collect();
    fit_exponential(&t, &x, window)
}

/// The last 60% of `[0, t_end]`.
pub fn default_window(t_end: f64) -> [f64; 2] {
    [0.4 * t_end, t_end]
}
