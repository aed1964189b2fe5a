//! Time-differenced state sequences and the perturbation integrands `R₁`, `R₂`.

use crate::coupled::{CoupledSolver, CoupledState};
use crate::discretization::Discretization;
use crate::error::{FsiError, Result};
use crate::fluid::{aat, fluid_weights, velocity_gradients, Mat2};
use crate::quadrature::compensated_sum;

/// Three-point weights for the value and the first two time derivatives at
/// one of three consecutive levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub value: [f64; 3],
    pub d1: [f64; 3],
    pub d2: [f64; 3],
    pub central: bool,
}

impl Stencil {
    pub fn central(dt: f64) -> Self {
        Self {
            value: [0.0, 1.0, 0.0],
            d1: [-0.5 / dt, 0.0, 0.5 / dt],
            d2: second(dt),
            central: true,
        }
    }

    pub fn forward(dt: f64) -> Self {
        Self {
            value: [1.0, 0.0, 0.0],
            d1: [-1.5 / dt, 2.0 / dt, -0.5 / dt],
            d2: second(dt),
            central: false,
        }
    }

    pub fn backward(dt: f64) -> Self {
        Self {
            value: [0.0, 0.0, 1.0],
            d1: [0.5 / dt, -2.0 / dt, 1.5 / dt],
            d2: second(dt),
            central: false,
        }
    }
}

fn second(dt: f64) -> [f64; 3] {
    let s = 1.0 / (dt * dt);
    [s, -2.0 * s, s]
}

/// `Σ_k c_k x_k` for weights summing to zero, written as
/// `c₀(x₀ − x₁) + c₂(x₂ − x₁)` so that constant sequences give exactly zero.
fn diff(c: &[f64; 3], x0: f64, x1: f64, x2: f64) -> f64 {
    c[0] * (x0 - x1) + c[2] * (x2 - x1)
}

fn value(c: &[f64; 3], x0: f64, x1: f64, x2: f64) -> f64 {
    c[0] * x0 + c[1] * x1 + c[2] * x2
}

/// Time difference of three equally long vectors with a derivative stencil.
pub fn difference3(c: &[f64; 3], x: [&[f64]; 3]) -> Vec<f64> {
    (0..x[0].len())
        .map(|i| diff(c, x[0][i], x[1][i], x[2][i]))
        .collect()
}

fn mat3(f: impl Fn(f64, f64, f64) -> f64, m: [&Mat2; 3]) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = f(m[0][i][j], m[1][i][j], m[2][i][j]);
        }
    }
    out
}

/// `v`, `w`, `w_t` of a differenced sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Differenced {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub wt: Vec<f64>,
}

/// First and second time differences of `(v, w, w_t)` at the stencil point.
pub fn difference_states(states: [&CoupledState; 3], st: &Stencil) -> (Differenced, Differenced) {
    let f = |c: &[f64; 3]| Differenced {
        v: difference3(c, [&states[0].v, &states[1].v, &states[2].v]),
        w: difference3(c, [&states[0].w, &states[1].w, &states[2].w]),
        wt: difference3(c, [&states[0].wt, &states[1].wt, &states[2].wt]),
    };
    (f(&st.d1), f(&st.d2))
}

/// Pressure at every fluid quadrature point.
fn pressure_at_points(disc: &Discretization, q: &[f64]) -> Vec<f64> {
    disc.fluid_cells
        .iter()
        .flat_map(|&c| {
            let loc = disc.gather_p1(&disc.pressure, q, c);
            disc.rule
                .points
                .iter()
                .map(move |l| l[0] * loc[0] + l[1] * loc[1] + l[2] * loc[2])
        })
        .collect()
}

/// `(R₁, v_t)` and `(R₂, v_tt)` at the stencil point:
///
/// `(R₁, v_t) = −∫∂_t(a^{jl}a^{kl})∂_k v^i ∂_j v_t^i + ∫∂_t a^{ki} q ∂_k v_t^i − ∫∂_t a^{ki} q_t ∂_k v^i`
///
/// `(R₂, v_tt) = −2∫∂_t(aa)∂v_t∂v_tt − ∫∂_tt(aa)∂v∂v_tt + ∫(a_tt q + 2a_t q_t)^{ki}∂_k v_tt^i
///              − ∫q_tt(2a_t^{ki}∂_k v_t^i + a_tt^{ki}∂_k v^i)`
///
/// Every term carries a time derivative of `a`.
pub fn perturbation_terms(
    disc: &Discretization,
    states: [&CoupledState; 3],
    st: &Stencil,
) -> (f64, f64) {
    let gv: Vec<Vec<Mat2>> = states
        .iter()
        .map(|s| velocity_gradients(disc, &disc.fluid, &s.v))
        .collect();
    let qs: Vec<Vec<f64>> = states
        .iter()
        .map(|s| pressure_at_points(disc, &s.q))
        .collect();
    let weights = fluid_weights(disc);
    let mut r1 = Vec::with_capacity(weights.len());
    let mut r2 = Vec::with_capacity(weights.len());
    for (p, w) in weights.iter().enumerate() {
        let a3 = [
            &states[0].a.values[p],
            &states[1].a.values[p],
            &states[2].a.values[p],
        ];
        let d1 = |a, b, c| diff(&st.d1, a, b, c);
        let d2 = |a, b, c| diff(&st.d2, a, b, c);
        let at = mat3(d1, a3);
        let att = mat3(d2, a3);
        let pm = [aat(a3[0]), aat(a3[1]), aat(a3[2])];
        let pt = mat3(d1, [&pm[0], &pm[1], &pm[2]]);
        let ptt = mat3(d2, [&pm[0], &pm[1], &pm[2]]);
        let g3 = [&gv[0][p], &gv[1][p], &gv[2][p]];
        let g = mat3(|a, b, c| value(&st.value, a, b, c), g3);
        let gt = mat3(d1, g3);
        let gtt = mat3(d2, g3);
        let q3 = [qs[0][p], qs[1][p], qs[2][p]];
        let q = value(&st.value, q3[0], q3[1], q3[2]);
        let qt = d1(q3[0], q3[1], q3[2]);
        let qtt = d2(q3[0], q3[1], q3[2]);

        // Σ_i Σ_jk P[j][k] ∂_k x^i ∂_j y^i
        let visc = |pm: &Mat2, x: &Mat2, y: &Mat2| {
            let mut s = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        s += pm[j][k] * x[i][k] * y[i][j];
                    }
                }
            }
            s
        };
        // Σ_ki m[k][i] ∂_k x^i
        let div = |m: &Mat2, x: &Mat2| {
            let mut s = 0.0;
            for i in 0..2 {
                for k in 0..2 {
                    s += m[k][i] * x[i][k];
                }
            }
            s
        };
        let v1 = -visc(&pt, &g, &gt) + q * div(&at, &gt) - qt * div(&at, &g);
        let mut coef = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                coef[i][j] = att[i][j] * q + 2.0 * at[i][j] * qt;
            }
        }
        let v2 = -2.0 * visc(&pt, &gt, &gtt) - visc(&ptt, &g, &gtt) + div(&coef, &gtt)
            - qtt * (2.0 * div(&at, &gt) + div(&att, &g));
        r1.push(w * v1);
        r2.push(w * v2);
    }
    (compensated_sum(r1), compensated_sum(r2))
}

/// `(R₁, v_t)` and `(R₂, v_tt)` at the middle of the last three states.
pub fn perturbation_r(
    disc: &Discretization,
    states: &[CoupledState],
    dt: f64,
) -> Result<(f64, f64)> {
    if states.len() < 3 {
        return Err(FsiError::InsufficientHistory {
            needed: 3,
            got: states.len(),
        });
    }
    let n = states.len();
    Ok(perturbation_terms(
        disc,
        [&states[n - 3], &states[n - 2], &states[n - 1]],
        &Stencil::central(dt),
    ))
}

/// `(E₁, E₂)` at the middle of the last three states, with time derivatives
/// from centred differences.
pub fn energy_levels(solver: &CoupledSolver, states: &[CoupledState]) -> Result<(f64, f64)> {
    if states.len() < 3 {
        return Err(FsiError::InsufficientHistory {
            needed: 3,
            got: states.len(),
        });
    }
    let n = states.len();
    let st = Stencil::central(solver.params.dt);
    let (d1, d2) = difference_states([&states[n - 3], &states[n - 2], &states[n - 1]], &st);
    Ok((
        solver.energy(&d1.v, &d1.w, &d1.wt),
        solver.energy(&d2.v, &d2.w, &d2.wt),
    ))
}
