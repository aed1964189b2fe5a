//! Monolithic Crank–Nicolson step of the coupled fluid–wave system.
//!
//! Unknowns per step are the midpoint velocities `v̄`, `w̄_t` and the pressure.
//! The interface flux is eliminated through the transmission law,
//! `w_{ν_Λ} = (v̄ − w̄_t)/γ`, which gives the symmetric dissipative block
//! `(1/γ) [[C, −C], [−C, C]]` between the two velocity traces.

use std::sync::Arc;

use crate::config::{Mode, Preset, SimulationConfig};
use crate::discretization::Discretization;
use crate::error::{FsiError, Result};
use crate::fields::{BumpField, SwirlField, VectorField, ZeroField};
use crate::fluid::{
    assemble_variable_stokes, fluid_mass, project_divergence_free, solve_initial_pressure,
    update_flow_map, AField, MapFloors, StokesOperators,
};
use crate::metric::MetricField;
use crate::sparse::{CsrMatrix, DirectSolver, SymbolicFactor, TripletBuilder};
use crate::wave::{assemble_wave_operators, interface_block, WaveOperators};

/// All unknowns at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub t: f64,
    pub step: usize,
    /// Fluid velocity on the fluid unknowns (zero on Γ_f by construction).
    pub v: Vec<f64>,
    /// Pressure; after a step it is the midpoint pressure of that step.
    pub q: Vec<f64>,
    pub w: Vec<f64>,
    pub wt: Vec<f64>,
    /// Flow-map displacement `η − x` on all fluid nodes.
    pub xi: Vec<f64>,
    pub a: AField,
}

impl CoupledState {
    pub fn zeros(disc: &Discretization) -> Self {
        Self {
            t: 0.0,
            step: 0,
            v: vec![0.0; 2 * disc.fluid.len()],
            q: vec![0.0; disc.pressure.len()],
            w: vec![0.0; 2 * disc.elastic.len()],
            wt: vec![0.0; 2 * disc.elastic.len()],
            xi: vec![0.0; 2 * disc.fluid_all.len()],
            a: AField::identity(disc),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.v
            .iter()
            .chain(&self.q)
            .chain(&self.w)
            .chain(&self.wt)
            .all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub dt: f64,
    pub gamma: f64,
    pub beta: f64,
    pub viscosity: f64,
    pub mode: Mode,
    pub floors: MapFloors,
    pub coupling_tolerance: f64,
    pub solver_tolerance: f64,
}

impl StepParams {
    pub fn from_config(cfg: &SimulationConfig) -> Self {
        Self {
            dt: cfg.time.dt,
            gamma: cfg.physics.gamma,
            beta: cfg.physics.beta,
            viscosity: cfg.physics.viscosity,
            mode: cfg.physics.mode,
            floors: MapFloors {
                det_floor: cfg.tolerances.det_floor,
                ellipticity_floor: cfg.tolerances.ellipticity_floor,
            },
            coupling_tolerance: cfg.tolerances.coupling,
            solver_tolerance: cfg.tolerances.solver,
        }
    }
}

/// Viscous and interface parts of a dissipation rate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dissipation {
    pub viscous: f64,
    pub boundary: f64,
}

impl Dissipation {
    pub fn total(&self) -> f64 {
        self.viscous + self.boundary
    }
}

/// Result of one accepted step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: CoupledState,
    pub v_mid: Vec<f64>,
    pub wt_mid: Vec<f64>,
    /// Viscous block used for this step.
    pub viscous: Arc<CsrMatrix>,
    pub dissipation: Dissipation,
    pub interface_residual: f64,
}

struct FrozenSystem {
    stokes: Arc<StokesOperators>,
    solver: DirectSolver,
}

pub struct CoupledSolver {
    pub disc: Discretization,
    pub metric: MetricField,
    pub params: StepParams,
    pub wave: WaveOperators,
    pub fluid_mass: CsrMatrix,
    /// `A(I)`: the scalar Laplacian stiffness on the fluid unknowns.
    pub laplacian: Arc<CsrMatrix>,
    c_ff: CsrMatrix,
    c_fe: CsrMatrix,
    c_ee: CsrMatrix,
    iface_solver: DirectSolver,
    identity_stokes: Arc<StokesOperators>,
    frozen: Option<FrozenSystem>,
    symbolic: Option<SymbolicFactor>,
}

impl CoupledSolver {
    pub fn new(disc: Discretization, metric: MetricField, params: StepParams) -> Result<Self> {
        if !(params.gamma > 0.0) {
            return Err(FsiError::Validation(vec![
                "physics.gamma must be positive".into()
            ]));
        }
        let wave = assemble_wave_operators(&disc, &metric, params.beta)?;
        let fluid_mass = fluid_mass(&disc, &disc.fluid);
        let nf = disc.fluid.len();
        let ne = disc.elastic.len();
        let c_ff = interface_block(&disc, &disc.iface_to_fluid, nf, &disc.iface_to_fluid, nf);
        let c_fe = interface_block(&disc, &disc.iface_to_fluid, nf, &disc.iface_to_elastic, ne);
        let c_ee = interface_block(
            &disc,
            &disc.iface_to_elastic,
            ne,
            &disc.iface_to_elastic,
            ne,
        );
        let iface_solver = DirectSolver::factor(&disc.interface_mass)?;
        let identity_stokes = Arc::new(assemble_variable_stokes(
            &disc,
            &AField::identity(&disc),
            0.0,
        )?);
        let laplacian = Arc::new(identity_stokes.viscous.clone());
        let mut solver = Self {
            disc,
            metric,
            params,
            wave,
            fluid_mass,
            laplacian,
            c_ff,
            c_fe,
            c_ee,
            iface_solver,
            identity_stokes,
            frozen: None,
            symbolic: None,
        };
        let matrix = solver.system_matrix(&solver.identity_stokes.clone());
        let symbolic = SymbolicFactor::analyze(&matrix)?;
        if params.mode == Mode::Frozen {
            let lu = DirectSolver::factor_with(&symbolic, &matrix)?
                .with_tolerance(params.solver_tolerance);
            solver.frozen = Some(FrozenSystem {
                stokes: solver.identity_stokes.clone(),
                solver: lu,
            });
        }
        solver.symbolic = Some(symbolic);
        Ok(solver)
    }

    pub fn from_config(cfg: &SimulationConfig) -> Result<Self> {
        let g = &cfg.geometry;
        let disc = Discretization::disc_annulus(g.r0, g.r1, g.h)?;
        Self::new(disc, cfg.metric_field(), StepParams::from_config(cfg))
    }

    pub fn n_fluid(&self) -> usize {
        self.disc.fluid.len()
    }

    pub fn n_elastic(&self) -> usize {
        self.disc.elastic.len()
    }

    pub fn identity_stokes(&self) -> &StokesOperators {
        &self.identity_stokes
    }

    fn system_matrix(&self, stokes: &StokesOperators) -> CsrMatrix {
        let p = &self.params;
        let nf = self.n_fluid();
        let ne = self.n_elastic();
        let np = self.disc.pressure.len();
        let off_q = 2 * nf;
        let off_w = 2 * nf + np;
        let n = off_w + 2 * ne;
        let ig = 1.0 / p.gamma;
        let mut t = TripletBuilder::new(n, n);
        for c in 0..2 {
            let (fv, ew) = (c * nf, off_w + c * ne);
            t.add_block(&self.fluid_mass, fv, fv, 2.0 / p.dt);
            t.add_block(&stokes.viscous, fv, fv, p.viscosity);
            t.add_block(&self.c_ff, fv, fv, ig);
            t.add_block(&self.c_fe, fv, ew, -ig);
            t.add_block_transposed(&self.c_fe, ew, fv, -ig);
            t.add_block(&self.wave.mass, ew, ew, 2.0 / p.dt);
            t.add_block(&self.wave.stiffness, ew, ew, 0.5 * p.dt);
            t.add_block(&self.c_ee, ew, ew, ig);
        }
        t.add_block_transposed(&stokes.divergence, 0, off_q, -1.0);
        t.add_block(&stokes.divergence, off_q, 0, -1.0);
        for i in 0..np {
            t.add(off_q + i, off_q + i, 0.0);
        }
        t.build()
    }

    /// Advances one step. In ALE mode the operators use the lagged `a` of
    /// `state` and the flow map is updated afterwards.
    pub fn step(&self, state: &CoupledState) -> Result<StepOutput> {
        let p = &self.params;
        let nf = self.n_fluid();
        let ne = self.n_elastic();
        let np = self.disc.pressure.len();
        let dt = p.dt;

        let owned;
        let (stokes, solver): (Arc<StokesOperators>, &DirectSolver) = match &self.frozen {
            Some(f) => (f.stokes.clone(), &f.solver),
            None => {
                let stokes = Arc::new(assemble_variable_stokes(
                    &self.disc,
                    &state.a,
                    p.floors.ellipticity_floor,
                )?);
                let matrix = self.system_matrix(&stokes);
                let symbolic = self.symbolic.as_ref().expect("symbolic analysis");
                owned = DirectSolver::factor_with(symbolic, &matrix)?
                    .with_tolerance(p.solver_tolerance);
                (stokes, &owned)
            }
        };

        let mut rhs = Vec::with_capacity(2 * nf + np + 2 * ne);
        for c in 0..2 {
            rhs.extend(
                self.fluid_mass
                    .mul_vec(&state.v[c * nf..(c + 1) * nf])
                    .into_iter()
                    .map(|x| 2.0 * x / dt),
            );
        }
        rhs.extend(
            stokes
                .divergence
                .mul_vec(&state.v)
                .into_iter()
                .map(|x| -0.5 * x),
        );
        for c in 0..2 {
            let r = c * ne..(c + 1) * ne;
            let mw = self.wave.mass.mul_vec(&state.wt[r.clone()]);
            let kw = self.wave.stiffness.mul_vec(&state.w[r]);
            rhs.extend(mw.iter().zip(&kw).map(|(m, k)| 2.0 * m / dt - k));
        }
        let sol = solver.solve(&rhs)?;
        let v_mid = sol[..2 * nf].to_vec();
        let q = sol[2 * nf..2 * nf + np].to_vec();
        let wt_mid = sol[2 * nf + np..].to_vec();

        let v: Vec<f64> = v_mid
            .iter()
            .zip(&state.v)
            .map(|(m, o)| 2.0 * m - o)
            .collect();
        let wt: Vec<f64> = wt_mid
            .iter()
            .zip(&state.wt)
            .map(|(m, o)| 2.0 * m - o)
            .collect();
        let w: Vec<f64> = state
            .w
            .iter()
            .zip(&wt_mid)
            .map(|(o, m)| o + dt * m)
            .collect();

        let interface_residual = self.interface_residual(state, &w, &wt, &v_mid, &wt_mid)?;
        let (xi, a) = match p.mode {
            Mode::Frozen => (state.xi.clone(), state.a.clone()),
            Mode::Ale => update_flow_map(&self.disc, &state.xi, &state.v, &v, dt, p.floors)?,
        };
        let viscous = Arc::new(stokes.viscous.clone());
        let dissipation = self.dissipation(&viscous, &v_mid, &wt_mid);
        let next = CoupledState {
            t: state.t + dt,
            step: state.step + 1,
            v,
            q,
            w,
            wt,
            xi,
            a,
        };
        if !next.is_finite() {
            return Err(FsiError::SolverFailure("non-finite state".into()));
        }
        Ok(StepOutput {
            state: next,
            v_mid,
            wt_mid,
            viscous,
            dissipation,
            interface_residual,
        })
    }

    /// `‖w̄_t − v̄ + γ λ‖_{L²(Γ_c)}` where `λ` is the interface flux recovered
    /// variationally from the wave rows of the interface nodes.
    fn interface_residual(
        &self,
        old: &CoupledState,
        w_new: &[f64],
        wt_new: &[f64],
        v_mid: &[f64],
        wt_mid: &[f64],
    ) -> Result<f64> {
        let ne = self.n_elastic();
        let nf = self.n_fluid();
        let dt = self.params.dt;
        let m = self.disc.interface.len();
        let mut residual = vec![0.0; 2 * m];
        let mut scale = 0.0;
        let vt = self.disc.trace(&self.disc.iface_to_fluid, nf, v_mid);
        let wtt = self.disc.trace(&self.disc.iface_to_elastic, ne, wt_mid);
        for c in 0..2 {
            let r = c * ne..(c + 1) * ne;
            let dwt: Vec<f64> = wt_new[r.clone()]
                .iter()
                .zip(&old.wt[r.clone()])
                .map(|(a, b)| (a - b) / dt)
                .collect();
            let wbar: Vec<f64> = w_new[r.clone()]
                .iter()
                .zip(&old.w[r])
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            let rows: Vec<f64> = self
                .wave
                .mass
                .mul_vec(&dwt)
                .iter()
                .zip(self.wave.stiffness.mul_vec(&wbar))
                .map(|(a, b)| a + b)
                .collect();
            let restricted: Vec<f64> = self
                .disc
                .iface_to_elastic
                .iter()
                .map(|&i| rows[i])
                .collect();
            let flux = self.iface_solver.solve(&restricted)?;
            for i in 0..m {
                residual[c * m + i] = wtt[c * m + i] - vt[c * m + i] + self.params.gamma * flux[i];
            }
        }
        let res = self.disc.interface_norm_sq(&residual).max(0.0).sqrt();
        scale += self.disc.interface_norm_sq(&vt).max(0.0).sqrt();
        scale += self.disc.interface_norm_sq(&wtt).max(0.0).sqrt();
        if res > self.params.coupling_tolerance * scale {
            return Err(FsiError::CouplingResidualExceeded {
                residual: res,
                tolerance: self.params.coupling_tolerance * scale,
            });
        }
        Ok(res)
    }

    /// `μ Σ_c v_cᵀ A v_c + (1/γ)‖P_f v − P_e w_t‖²_{Γ_c}`.
    pub fn dissipation(&self, viscous: &CsrMatrix, v: &[f64], wt: &[f64]) -> Dissipation {
        let nf = self.n_fluid();
        let ne = self.n_elastic();
        let visc = self.params.viscosity * WaveOperators::blocked_quadratic(viscous, v);
        let vt = self.disc.trace(&self.disc.iface_to_fluid, nf, v);
        let wtt = self.disc.trace(&self.disc.iface_to_elastic, ne, wt);
        let d: Vec<f64> = vt.iter().zip(&wtt).map(|(a, b)| a - b).collect();
        Dissipation {
            viscous: visc.max(0.0),
            boundary: (self.disc.interface_norm_sq(&d) / self.params.gamma).max(0.0),
        }
    }

    /// `E = ½(‖v‖² + ‖w_t‖² + β‖w‖² + ∫⟨G∇w,∇w⟩)`.
    pub fn energy(&self, v: &[f64], w: &[f64], wt: &[f64]) -> f64 {
        0.5 * (WaveOperators::blocked_quadratic(&self.fluid_mass, v)
            + WaveOperators::blocked_quadratic(&self.wave.mass, wt)
            + WaveOperators::blocked_quadratic(&self.wave.stiffness, w))
    }

    /// `‖∇v‖²_{L²(Ω_f)}`.
    pub fn grad_norm_sq(&self, v: &[f64]) -> f64 {
        WaveOperators::blocked_quadratic(&self.laplacian, v).max(0.0)
    }

    /// Builds the initial state for `fields`: `w₀`, `w₁` interpolated, `v₀`
    /// interpolated and projected onto discretely divergence-free fields, and
    /// `q₀` from the initial pressure problem.
    pub fn initial_state(&self, fields: &InitialFields) -> Result<CoupledState> {
        let disc = &self.disc;
        let mut s = CoupledState::zeros(disc);
        s.w = disc.interpolate(&disc.elastic, |x| fields.w0.value(x));
        s.wt = disc.interpolate(&disc.elastic, |x| fields.w1.value(x));
        let v = disc.interpolate(&disc.fluid, |x| fields.v0.value(x));
        if v.iter().any(|x| *x != 0.0) {
            s.v = project_divergence_free(disc, &self.fluid_mass, &self.identity_stokes, &v)?;
        }
        s.q = self.initial_pressure(fields)?;
        Ok(s)
    }

    pub fn initial_pressure(&self, fields: &InitialFields) -> Result<Vec<f64>> {
        let metric = &self.metric;
        let w0 = &fields.w0;
        let conormal = move |x: crate::mesh::Point, n: crate::mesh::Point| -> [f64; 2] {
            conormal_of(metric, w0.as_ref(), x, n)
        };
        solve_initial_pressure(&self.disc, fields.v0.as_ref(), &conormal)
    }
}

/// `(u^i)_{ν_Λ} = ν_j G_{jk} ∂_k u^i` for an analytic field.
pub fn conormal_of(
    metric: &MetricField,
    u: &dyn VectorField,
    x: crate::mesh::Point,
    n: crate::mesh::Point,
) -> [f64; 2] {
    let g = metric.coefficient(&x);
    let grad = u.gradient(x);
    let mut out = [0.0; 2];
    for (i, o) in out.iter_mut().enumerate() {
        for j in 0..2 {
            for k in 0..2 {
                *o += n[j] * g[(j, k)] * grad[i][k];
            }
        }
    }
    out
}

/// Analytic initial data `(v₀, w₀, w₁)`.
pub struct InitialFields {
    pub v0: Box<dyn VectorField>,
    pub w0: Box<dyn VectorField>,
    pub w1: Box<dyn VectorField>,
}

impl InitialFields {
    pub fn zero() -> Self {
        Self {
            v0: Box::new(ZeroField),
            w0: Box::new(ZeroField),
            w1: Box::new(ZeroField),
        }
    }

    pub fn preset(preset: Preset, amplitude: f64, r0: f64, r1: f64) -> Self {
        let pulse = || -> Box<dyn VectorField> {
            let d = [2.0 / 5f64.sqrt(), 1.0 / 5f64.sqrt()];
            Box::new(BumpField {
                center: [0.1 * r0, -0.05 * r0],
                radius: 0.5 * r0,
                amplitude,
                direction: d,
            })
        };
        let swirl = || -> Box<dyn VectorField> { Box::new(SwirlField { r0, r1, amplitude }) };
        match preset {
            Preset::ElasticPulse => Self {
                w0: pulse(),
                ..Self::zero()
            },
            Preset::Shear => Self {
                v0: swirl(),
                ..Self::zero()
            },
            Preset::Combined => Self {
                v0: swirl(),
                w0: pulse(),
                w1: Box::new(ZeroField),
            },
        }
    }

    pub fn from_config(cfg: &SimulationConfig) -> Self {
        Self::preset(
            cfg.initial_data.preset,
            cfg.initial_data.amplitude,
            cfg.geometry.r0,
            cfg.geometry.r1,
        )
    }
}
