//! Energy functionals, the records of a run, and energy-inequality checks.

use serde::{Deserialize, Serialize};

use crate::coupled::CoupledState;
use crate::discretization::Discretization;
use crate::error::Result;
use crate::fem::{p2_gradients, p2_values};
use crate::fluid::{aat, fluid_weights, velocity_gradients};
use crate::metric::MetricField;
use crate::quadrature::compensated_sum;
use crate::wave::{coefficient_2x2, conormal_trace, trace_norm_sq};

/// One row of the diagnostics time series.
///
/// `d` is the dissipation rate of the step ending at `t` (the first step for
/// `t = 0`); `d1`, `d2` likewise for the differenced sequences. Higher-level
/// quantities are `NaN` when fewer than three time levels exist. The `int_*`
/// fields are running time integrals used by the inequality checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub step: usize,
    pub t: f64,
    pub e: f64,
    pub d: f64,
    pub e1: f64,
    pub d1: f64,
    pub e2: f64,
    pub d2: f64,
    pub x: f64,
    pub r1: f64,
    pub r2: f64,
    pub interface_residual: f64,
    pub det_deviation: f64,
    pub ellipticity_min: f64,
    pub grad_v_sq: f64,
    pub grad_vt_sq: f64,
    /// Time derivatives from centred differences (interior records).
    pub central: bool,
    pub int_d: f64,
    pub int_d_boundary: f64,
    pub int_d1: f64,
    pub int_d2: f64,
    pub int_r1: f64,
    pub int_r2: f64,
}

/// `X = E + E₁ + E₂ + ε̂₁(‖∇v‖² + ‖∇v_t‖²)`.
pub fn total_x(e: f64, e1: f64, e2: f64, grad_v_sq: f64, grad_vt_sq: f64, eps_hat1: f64) -> f64 {
    e + e1 + e2 + eps_hat1 * (grad_v_sq + grad_vt_sq)
}

/// `E` by direct quadrature of the fields (independent of the assembled
/// matrices).
pub fn energy_e(
    disc: &Discretization,
    metric: &MetricField,
    beta: f64,
    state: &CoupledState,
) -> Result<f64> {
    let rule = &disc.rule;
    let mut parts = Vec::new();
    for &c in &disc.fluid_cells {
        let el = disc.element(c);
        let loc = [
            disc.gather_p2(&disc.fluid, &state.v, 0, c),
            disc.gather_p2(&disc.fluid, &state.v, 1, c),
        ];
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let phi = p2_values(l);
            for comp in loc.iter() {
                let v: f64 = (0..6).map(|k| phi[k] * comp[k]).sum();
                parts.push(w * el.jac() * v * v);
            }
        }
    }
    for &c in &disc.elastic_cells {
        let el = disc.element(c);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let x = el.point(l);
            let g = coefficient_2x2(metric, x)?;
            let phi = p2_values(l);
            let grads = p2_gradients(&el, l);
            for comp in 0..2 {
                let lw = disc.gather_p2(&disc.elastic, &state.w, comp, c);
                let lt = disc.gather_p2(&disc.elastic, &state.wt, comp, c);
                let wv: f64 = (0..6).map(|k| phi[k] * lw[k]).sum();
                let tv: f64 = (0..6).map(|k| phi[k] * lt[k]).sum();
                let mut gw = [0.0; 2];
                for k in 0..6 {
                    gw[0] += grads[k][0] * lw[k];
                    gw[1] += grads[k][1] * lw[k];
                }
                let quad = gw[0] * (g[0][0] * gw[0] + g[0][1] * gw[1])
                    + gw[1] * (g[1][0] * gw[0] + g[1][1] * gw[1]);
                parts.push(w * el.jac() * (tv * tv + beta * wv * wv + quad));
            }
        }
    }
    Ok(0.5 * compensated_sum(parts))
}

/// `D = μ ∫ a^{jl}a^{kl}∂_k v^i ∂_j v^i + γ‖w_{ν_Λ}‖²_{L²(Γ_c)}` with the
/// conormal trace of the state's displacement.
pub fn dissipation_d(
    disc: &Discretization,
    metric: &MetricField,
    gamma: f64,
    viscosity: f64,
    state: &CoupledState,
) -> Result<f64> {
    let grads = velocity_gradients(disc, &disc.fluid, &state.v);
    let weights = fluid_weights(disc);
    let visc = compensated_sum(grads.iter().zip(&state.a.values).zip(&weights).map(
        |((g, a), w)| {
            let p = aat(a);
            let mut s = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        s += p[j][k] * g[i][k] * g[i][j];
                    }
                }
            }
            w * s
        },
    ));
    let trace = conormal_trace(disc, metric, &state.w)?;
    Ok(viscosity * visc + gamma * trace_norm_sq(&trace))
}

/// Outcome of [`check_energy_inequality`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub level: usize,
    /// `max_n [E_l(t_n) + ∫D_l − E_l(t_0) − ∫R_l]` (the `R` term for `l ≥ 1`).
    pub max_violation: f64,
    pub reference_energy: f64,
    pub cumulative_dissipation: f64,
    pub cumulative_boundary_dissipation: f64,
    pub records_checked: usize,
}

/// Checks the energy inequality of the given level along a series. Level 0
/// uses every record; levels 1 and 2 use the records with centred time
/// differences, starting from the first of them.
pub fn check_energy_inequality(series: &[EnergyRecord], level: usize) -> InequalityReport {
    let pick = |r: &EnergyRecord| match level {
        0 => (r.e, r.int_d, 0.0),
        1 => (r.e1, r.int_d1, r.int_r1),
        _ => (r.e2, r.int_d2, r.int_r2),
    };
    let usable: Vec<&EnergyRecord> = series
        .iter()
        .filter(|r| (level == 0 || r.central) && pick(r).0.is_finite())
        .collect();
    let Some(first) = usable.first() else {
        return InequalityReport {
            level,
            max_violation: 0.0,
            reference_energy: 0.0,
            cumulative_dissipation: 0.0,
            cumulative_boundary_dissipation: 0.0,
            records_checked: 0,
        };
    };
    let (e0, id0, ir0) = pick(first);
    let mut max_violation: f64 = 0.0;
    for r in &usable {
        let (e, id, ir) = pick(r);
        max_violation = max_violation.max(e + (id - id0) - e0 - (ir - ir0));
    }
    let last = usable.last().unwrap();
    InequalityReport {
        level,
        max_violation,
        reference_energy: e0,
        cumulative_dissipation: pick(last).1 - id0,
        cumulative_boundary_dissipation: if level == 0 {
            last.int_d_boundary - first.int_d_boundary
        } else {
            f64::NAN
        },
        records_checked: usable.len(),
    }
}

/// `max |E^{n+1} − E^n + dt D^{n+1/2}|` over consecutive records.
pub fn max_step_violation(series: &[EnergyRecord]) -> f64 {
    series
        .windows(2)
        .filter(|w| w[1].step == w[0].step + 1)
        .map(|w| (w[1].e - w[0].e + (w[1].int_d - w[0].int_d)).abs())
        .fold(0.0, f64::max)
}
