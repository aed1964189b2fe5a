//! Full runs: time stepping plus the per-record diagnostics.
//!
//! Records lag the stepper by one step because the centred time differences
//! at `t_n` need the state at `t_{n+1}`. Record 0 uses one-sided forward
//! differences and the final record one-sided backward differences; runs
//! shorter than two steps have no higher-level quantities (`NaN`).

use std::collections::VecDeque;
use std::sync::Arc;

use crate::compat::{compatibility_report, CompatibilityReport};
use crate::config::SimulationConfig;
use crate::coupled::{CoupledSolver, CoupledState, Dissipation, InitialFields};
use crate::diagnostics::energy::{max_step_violation, total_x, EnergyRecord};
use crate::diagnostics::perturbation::{
    difference_states, perturbation_terms, Differenced, Stencil,
};
use crate::error::{FsiError, Result};
use crate::sparse::CsrMatrix;

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// One record per completed time level.
    pub records: Vec<EnergyRecord>,
    pub final_state: CoupledState,
    /// The step error that ended the run early, if any.
    pub error: Option<FsiError>,
    pub steps_completed: usize,
    pub max_step_violation: f64,
}

impl RunOutput {
    /// Records at every `stride`-th step.
    pub fn strided(&self, stride: usize) -> Vec<&EnergyRecord> {
        let stride = stride.max(1);
        self.records
            .iter()
            .filter(|r| r.step % stride == 0)
            .collect()
    }

    pub fn initial_energy(&self) -> f64 {
        self.records.first().map_or(0.0, |r| r.e)
    }
}

struct StepInfo {
    dissipation: Dissipation,
    interface_residual: f64,
    viscous: Arc<CsrMatrix>,
}

struct Recorder<'a> {
    solver: &'a CoupledSolver,
    eps_hat1: f64,
    records: Vec<EnergyRecord>,
    /// Differenced states of the previous record.
    previous: Option<(Differenced, Differenced)>,
    /// Step infos keyed by the step that ends at that time level.
    steps: VecDeque<(usize, StepInfo)>,
}

impl<'a> Recorder<'a> {
    fn info(&self, n: usize) -> &StepInfo {
        &self
            .steps
            .iter()
            .find(|(k, _)| *k == n)
            .expect("step info retained")
            .1
    }

    fn viscous(&self, n: usize) -> &CsrMatrix {
        if n == 0 {
            &self.solver.laplacian
        } else {
            &self.info(n).viscous
        }
    }

    fn base(&self, n: usize, state: &CoupledState) -> EnergyRecord {
        let s = self.solver;
        let dt = s.params.dt;
        let (d, d_boundary, iface) = if n == 0 {
            let dis = s.dissipation(&s.laplacian, &state.v, &state.wt);
            (dis.total(), 0.0, 0.0)
        } else {
            let info = self.info(n);
            (
                info.dissipation.total(),
                info.dissipation.boundary,
                info.interface_residual,
            )
        };
        let prev = self.records.last();
        let e = s.energy(&state.v, &state.w, &state.wt);
        let grad_v_sq = s.grad_norm_sq(&state.v);
        EnergyRecord {
            step: n,
            t: n as f64 * dt,
            e,
            d,
            e1: f64::NAN,
            d1: f64::NAN,
            e2: f64::NAN,
            d2: f64::NAN,
            x: f64::NAN,
            r1: f64::NAN,
            r2: f64::NAN,
            interface_residual: iface,
            det_deviation: state.a.max_det_deviation(),
            ellipticity_min: state.a.min_ellipticity(),
            grad_v_sq,
            grad_vt_sq: f64::NAN,
            central: false,
            int_d: prev.map_or(0.0, |p| p.int_d + dt * d),
            int_d_boundary: prev.map_or(0.0, |p| p.int_d_boundary + dt * d_boundary),
            int_d1: f64::NAN,
            int_d2: f64::NAN,
            int_r1: f64::NAN,
            int_r2: f64::NAN,
        }
    }

    /// A record without higher-level quantities.
    fn emit_plain(&mut self, n: usize, state: &CoupledState) {
        let r = self.base(n, state);
        self.records.push(r);
    }

    fn emit(&mut self, n: usize, window: [&CoupledState; 3], st: Stencil, centre: usize) {
        let s = self.solver;
        let dt = s.params.dt;
        let mut r = self.base(n, window[centre]);
        let (d1, d2) = difference_states(window, &st);
        r.e1 = s.energy(&d1.v, &d1.w, &d1.wt);
        r.e2 = s.energy(&d2.v, &d2.w, &d2.wt);
        r.grad_vt_sq = s.grad_norm_sq(&d1.v);
        r.x = total_x(r.e, r.e1, r.e2, r.grad_v_sq, r.grad_vt_sq, self.eps_hat1);
        let (r1, r2) = perturbation_terms(&s.disc, window, &st);
        r.r1 = r1;
        r.r2 = r2;
        r.central = st.central;
        let viscous = self.viscous(n);
        let level_dissipation = |cur: &Differenced, prev: Option<&Differenced>| -> f64 {
            match prev {
                Some(p) => {
                    let v: Vec<f64> = cur.v.iter().zip(&p.v).map(|(a, b)| 0.5 * (a + b)).collect();
                    let wt: Vec<f64> = cur
                        .wt
                        .iter()
                        .zip(&p.wt)
                        .map(|(a, b)| 0.5 * (a + b))
                        .collect();
                    s.dissipation(viscous, &v, &wt).total()
                }
                None => s.dissipation(viscous, &cur.v, &cur.wt).total(),
            }
        };
        let prev_diff = self.previous.as_ref();
        r.d1 = level_dissipation(&d1, prev_diff.map(|p| &p.0));
        r.d2 = level_dissipation(&d2, prev_diff.map(|p| &p.1));
        match self.records.last().filter(|p| p.e1.is_finite()) {
            Some(p) => {
                r.int_d1 = p.int_d1 + dt * r.d1;
                r.int_d2 = p.int_d2 + dt * r.d2;
                r.int_r1 = p.int_r1 + 0.5 * dt * (p.r1 + r.r1);
                r.int_r2 = p.int_r2 + 0.5 * dt * (p.r2 + r.r2);
            }
            None => {
                r.int_d1 = 0.0;
                r.int_d2 = 0.0;
                r.int_r1 = 0.0;
                r.int_r2 = 0.0;
            }
        }
        self.previous = Some((d1, d2));
        self.records.push(r);
    }
}

/// Steps `state0` forward `n_steps` times, recording diagnostics. A step
/// error ends the run; the records up to the last accepted state are kept.
pub fn run_from_state(
    solver: &CoupledSolver,
    state0: CoupledState,
    n_steps: usize,
    eps_hat1: f64,
) -> RunOutput {
    let dt = solver.params.dt;
    let mut rec = Recorder {
        solver,
        eps_hat1,
        records: Vec::with_capacity(n_steps + 1),
        previous: None,
        steps: VecDeque::new(),
    };
    let mut window: VecDeque<CoupledState> = VecDeque::with_capacity(3);
    window.push_back(state0);
    let mut error = None;
    let mut done = 0;
    for k in 1..=n_steps {
        let out = match solver.step(window.back().expect("state")) {
            Ok(o) => o,
            Err(e) => {
                error = Some(e);
                break;
            }
        };
        done = k;
        rec.steps.push_back((
            k,
            StepInfo {
                dissipation: out.dissipation,
                interface_residual: out.interface_residual,
                viscous: out.viscous,
            },
        ));
        if rec.steps.len() > 3 {
            rec.steps.pop_front();
        }
        let mut next = out.state;
        next.t = k as f64 * dt;
        window.push_back(next);
        if window.len() > 3 {
            window.pop_front();
        }
        if k >= 2 {
            let w = [&window[0], &window[1], &window[2]];
            if k == 2 {
                rec.emit(0, w, Stencil::forward(dt), 0);
            }
            rec.emit(k - 1, w, Stencil::central(dt), 1);
        }
    }
    if done >= 2 {
        let w = [&window[0], &window[1], &window[2]];
        rec.emit(done, w, Stencil::backward(dt), 2);
    } else {
        for (n, s) in window.iter().enumerate() {
            rec.emit_plain(n, s);
        }
    }
    let records = rec.records;
    RunOutput {
        max_step_violation: max_step_violation(&records),
        records,
        final_state: window.pop_back().expect("state"),
        error,
        steps_completed: done,
    }
}

/// A configured run with its setup products.
pub struct Simulation {
    pub solver: CoupledSolver,
    pub fields: InitialFields,
    pub initial_state: CoupledState,
    pub compatibility: CompatibilityReport,
}

impl Simulation {
    pub fn new(cfg: &SimulationConfig) -> Result<Self> {
        cfg.validate()?;
        let solver = CoupledSolver::from_config(cfg)?;
        let fields = InitialFields::from_config(cfg);
        let initial_state = solver.initial_state(&fields)?;
        let compatibility =
            compatibility_report(&solver.disc, &solver.metric, cfg.physics.gamma, &fields)?;
        Ok(Self {
            solver,
            fields,
            initial_state,
            compatibility,
        })
    }

    pub fn run(&self, cfg: &SimulationConfig) -> RunOutput {
        run_from_state(
            &self.solver,
            self.initial_state.clone(),
            cfg.n_steps(),
            cfg.diagnostics.eps_hat1,
        )
    }
}

/// Validates, sets up and runs `cfg`.
pub fn run_simulation(cfg: &SimulationConfig) -> Result<(Simulation, RunOutput)> {
    let sim = Simulation::new(cfg)?;
    let out = sim.run(cfg);
    Ok((sim, out))
}
