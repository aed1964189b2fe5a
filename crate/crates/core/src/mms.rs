//! Manufactured-solution convergence studies for the standalone solvers and
//! temporal self-convergence of the coupled scheme.

use serde::{Deserialize, Serialize};

use crate::config::SimulationConfig;
use crate::coupled::{CoupledSolver, InitialFields};
use crate::discretization::{assemble_vector, Discretization};
use crate::error::Result;
use crate::fem::p2_values;
use crate::fluid::{
    advance_flow_map, assemble_variable_stokes_on, solve_mixed_poisson, AField, MapFloors, Mat2,
};
use crate::mesh::{EdgeTag, Point};
use crate::metric::{MetricField, MetricSpec};
use crate::quadrature::{compensated_sum, QuadratureRule};
use crate::sparse::{DirectSolver, TripletBuilder};
use crate::wave::{assemble_wave_operators, ScalarWaveSolver, WaveBoundary};

/// Errors on a sequence of refinements and the observed orders between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub name: String,
    /// Mesh size (or time step) per level.
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
    pub required_order: f64,
    pub passed: bool,
}

impl ConvergenceStudy {
    pub fn new(name: &str, h: Vec<f64>, errors: Vec<f64>, required_order: f64) -> Self {
        let orders: Vec<f64> = h
            .windows(2)
            .zip(errors.windows(2))
            .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
            .collect();
        let passed = !orders.is_empty() && orders.iter().all(|o| *o >= required_order);
        Self {
            name: name.to_string(),
            h,
            errors,
            orders,
            required_order,
            passed,
        }
    }

    pub fn finest_order(&self) -> f64 {
        self.orders.last().copied().unwrap_or(f64::NAN)
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{} (required order {:.2})\n",
            self.name, self.required_order
        );
        s.push_str(&format!("{:>12} {:>14} {:>8}\n", "h", "error", "order"));
        for (k, (h, e)) in self.h.iter().zip(&self.errors).enumerate() {
            let o = if k == 0 {
                "-".to_string()
            } else {
                format!("{:.3}", self.orders[k - 1])
            };
            s.push_str(&format!("{h:>12.5e} {e:>14.6e} {o:>8}\n"));
        }
        s
    }
}

/// Nominal mesh sizes `0.4 · 2^{−k}`.
pub fn mesh_levels(levels: usize) -> Vec<f64> {
    (0..levels)
        .map(|k| 0.4 / f64::powi(2.0, k as i32))
        .collect()
}

const R0: f64 = 1.0;
const R1: f64 = 2.0;

/// Wave solution `w = cos(ωt) sin(a x₁ + c) cos(b x₂)` with `G = diag(g₁, g₂)`.
struct WaveSolution {
    omega: f64,
    a: f64,
    b: f64,
    c: f64,
    g: [f64; 2],
    beta: f64,
}

impl WaveSolution {
    fn phi(&self, x: Point) -> f64 {
        (self.a * x[0] + self.c).sin() * (self.b * x[1]).cos()
    }
    fn w(&self, x: Point, t: f64) -> f64 {
        (self.omega * t).cos() * self.phi(x)
    }
    fn wt(&self, x: Point, t: f64) -> f64 {
        -self.omega * (self.omega * t).sin() * self.phi(x)
    }
    /// `w_tt − div(G∇w) + βw`.
    fn forcing(&self, x: Point, t: f64) -> f64 {
        let k = -self.omega * self.omega
            + self.g[0] * self.a * self.a
            + self.g[1] * self.b * self.b
            + self.beta;
        k * self.w(x, t)
    }
}

/// L² error at `T = 0.5` of the standalone wave solver with Dirichlet data on
/// the disc boundary, for `dt ∝ h^{3/2}` so the time error shares the
/// spatial order.
pub fn wave_mms(levels: &[f64]) -> Result<ConvergenceStudy> {
    let sol = WaveSolution {
        omega: 1.3,
        a: 1.1,
        b: 0.8,
        c: 0.4,
        g: [1.5, 1.0],
        beta: 1.0,
    };
    let metric = MetricField::from_spec(
        2,
        MetricSpec::Diagonal {
            entries: sol.g.to_vec(),
        },
    );
    let t_end = 0.5;
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for &h in levels {
        let disc = Discretization::disc_annulus(R0, R1, h)?;
        let ops = assemble_wave_operators(&disc, &metric, sol.beta)?;
        let n_steps = (t_end / (0.5 * h.powf(1.5))).ceil() as usize;
        let dt = t_end / n_steps as f64;
        let solver = ScalarWaveSolver::new(&disc, &ops, dt, WaveBoundary::Dirichlet)?;
        let mut w = disc.interpolate_scalar(&disc.elastic, |x| sol.w(x, 0.0));
        let mut wt = disc.interpolate_scalar(&disc.elastic, |x| sol.wt(x, 0.0));
        let f = |x: Point, t: f64| sol.forcing(x, t);
        let g = |x: Point, t: f64| sol.w(x, t);
        let gt = |x: Point, t: f64| sol.wt(x, t);
        for k in 0..n_steps {
            (w, wt) = solver.step(&w, &wt, k as f64 * dt, Some(&f), Some((&g, &gt)))?;
        }
        let mut blocked = w.clone();
        blocked.extend(std::iter::repeat(0.0).take(w.len()));
        errs.push(
            disc.l2_error_p2(&disc.elastic_cells, &disc.elastic, &blocked, |x| {
                [sol.w(x, t_end), 0.0]
            }),
        );
        hs.push(disc.mesh.h_max);
    }
    Ok(ConvergenceStudy::new("wave displacement L2", hs, errs, 2.7))
}

/// Stokes solution: `u = curl ψ`, `ψ = sin(x₁ + 0.3) sin(0.7x₂ + 0.1)`,
/// `p = cos(0.8x₁) sin(0.6x₂) + 0.2x₁`, forcing `f = −Δu + ∇p`.
mod stokes_solution {
    use crate::mesh::Point;

    pub fn u(x: Point) -> [f64; 2] {
        let (s1, c1) = (x[0] + 0.3).sin_cos();
        let (s2, c2) = (0.7 * x[1] + 0.1).sin_cos();
        [0.7 * s1 * c2, -c1 * s2]
    }

    pub fn p(x: Point) -> f64 {
        (0.8 * x[0]).cos() * (0.6 * x[1]).sin() + 0.2 * x[0]
    }

    pub fn grad_p(x: Point) -> [f64; 2] {
        [
            -0.8 * (0.8 * x[0]).sin() * (0.6 * x[1]).sin() + 0.2,
            0.6 * (0.8 * x[0]).cos() * (0.6 * x[1]).cos(),
        ]
    }

    pub fn forcing(x: Point) -> [f64; 2] {
        // −Δu = 1.49 u
        let u = u(x);
        let g = grad_p(x);
        [1.49 * u[0] + g[0], 1.49 * u[1] + g[1]]
    }
}

/// Steady Stokes (`a = I`) on the fluid annulus with Dirichlet velocity on
/// both circles and the pressure mean fixed by a multiplier. Returns the
/// velocity and pressure studies.
pub fn stokes_mms(levels: &[f64]) -> Result<(ConvergenceStudy, ConvergenceStudy)> {
    use stokes_solution as s;
    let mut hs = Vec::new();
    let mut ev = Vec::new();
    let mut ep = Vec::new();
    for &h in levels {
        let disc = Discretization::disc_annulus(R0, R1, h)?;
        let vmap = &disc.fluid_all;
        let ops = assemble_variable_stokes_on(&disc, vmap, &AField::identity(&disc), 0.0)?;
        let nv = vmap.len();
        let np = disc.pressure.len();
        let n = 2 * nv + np + 1;
        let pmean = assemble_vector(&disc.fluid_cells, &disc.pressure, |c| {
            let el = disc.element(c);
            let vals = vec![el.area / 3.0; 3];
            (disc.mesh.cells[c].to_vec(), vals)
        });
        let mut t = TripletBuilder::new(n, n);
        t.add_block(&ops.viscous, 0, 0, 1.0);
        t.add_block(&ops.viscous, nv, nv, 1.0);
        t.add_block_transposed(&ops.divergence, 0, 2 * nv, -1.0);
        t.add_block(&ops.divergence, 2 * nv, 0, -1.0);
        for (i, m) in pmean.iter().enumerate() {
            t.add(2 * nv + i, n - 1, *m);
            t.add(n - 1, 2 * nv + i, *m);
        }
        t.add(n - 1, n - 1, 0.0);
        let k = t.build();

        let mut rhs = Vec::with_capacity(n);
        for comp in 0..2 {
            rhs.extend(assemble_vector(&disc.fluid_cells, vmap, |c| {
                let el = disc.element(c);
                let mut vals = vec![0.0; 6];
                for (l, w) in disc.rule.points.iter().zip(&disc.rule.weights) {
                    let f = s::forcing(el.point(l))[comp];
                    let phi = p2_values(l);
                    for i in 0..6 {
                        vals[i] += w * el.jac() * f * phi[i];
                    }
                }
                (disc.space.cell_dofs[c].to_vec(), vals)
            }));
        }
        rhs.extend(std::iter::repeat(0.0).take(np));
        let rule = QuadratureRule::dunavant6();
        rhs.push(compensated_sum(disc.fluid_cells.iter().map(|&c| {
            let el = disc.element(c);
            rule.points
                .iter()
                .zip(&rule.weights)
                .map(|(l, w)| w * el.jac() * s::p(el.point(l)))
                .sum::<f64>()
        })));

        let mut fixed_nodes: Vec<usize> = disc
            .space
            .boundary_nodes(&disc.mesh, EdgeTag::Outer)
            .into_iter()
            .chain(disc.space.boundary_nodes(&disc.mesh, EdgeTag::Interface))
            .map(|g| vmap.local(g).expect("fluid node"))
            .collect();
        fixed_nodes.sort_unstable();
        let mut is_fixed = vec![false; n];
        let mut values = vec![0.0; n];
        for &l in &fixed_nodes {
            let u = s::u(disc.space.coords[vmap.local_to_global[l]]);
            for comp in 0..2 {
                is_fixed[comp * nv + l] = true;
                values[comp * nv + l] = u[comp];
            }
        }
        let free: Vec<usize> = (0..n).filter(|&i| !is_fixed[i]).collect();
        let fixed: Vec<usize> = (0..n).filter(|&i| is_fixed[i]).collect();
        let g: Vec<f64> = fixed.iter().map(|&i| values[i]).collect();
        let kg = k.submatrix(&free, &fixed).mul_vec(&g);
        let rhs_free: Vec<f64> = free.iter().zip(&kg).map(|(&i, v)| rhs[i] - v).collect();
        let sol = DirectSolver::factor(&k.submatrix(&free, &free))?.solve(&rhs_free)?;
        for (j, &i) in free.iter().enumerate() {
            values[i] = sol[j];
        }
        ev.push(disc.l2_error_p2(&disc.fluid_cells, vmap, &values[..2 * nv], s::u));
        ep.push(disc.l2_error_p1(&disc.pressure, &values[2 * nv..2 * nv + np], s::p));
        hs.push(disc.mesh.h_max);
    }
    Ok((
        ConvergenceStudy::new("stokes velocity L2", hs.clone(), ev, 2.7),
        ConvergenceStudy::new("stokes pressure L2", hs, ep, 1.8),
    ))
}

/// The P1 mixed Poisson problem used for the initial pressure, with
/// `q = cos(x₁) exp(0.5x₂)`.
pub fn poisson_mms(levels: &[f64]) -> Result<ConvergenceStudy> {
    let q = |x: Point| x[0].cos() * (0.5 * x[1]).exp();
    let grad = |x: Point| {
        [
            -x[0].sin() * (0.5 * x[1]).exp(),
            0.5 * x[0].cos() * (0.5 * x[1]).exp(),
        ]
    };
    let lap = |x: Point| -0.75 * q(x);
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for &h in levels {
        let disc = Discretization::disc_annulus(R0, R1, h)?;
        let neumann = |x: Point, n: Point| {
            let g = grad(x);
            g[0] * n[0] + g[1] * n[1]
        };
        let dirichlet = |x: Point, _: Point| q(x);
        let sol = solve_mixed_poisson(&disc, &lap, &neumann, &dirichlet)?;
        errs.push(disc.l2_error_p1(&disc.pressure, &sol, q));
        hs.push(disc.mesh.h_max);
    }
    Ok(ConvergenceStudy::new("mixed poisson L2", hs, errs, 1.8))
}

/// Self-convergence in time of the coupled frozen scheme on the
/// elastic-pulse preset: differences of the final states for `dt`, `dt/2`,
/// `dt/4`, … measured in the energy norm.
pub fn coupled_time_convergence(
    h: f64,
    dt0: f64,
    t_end: f64,
    levels: usize,
) -> Result<ConvergenceStudy> {
    let mut finals = Vec::new();
    let mut dts = Vec::new();
    let mut energy_solver = None;
    for k in 0..levels {
        let dt = dt0 / f64::powi(2.0, k as i32);
        let mut cfg = SimulationConfig::new(R0, R1, h, dt, t_end);
        cfg.initial_data.amplitude = 1.0;
        let solver = CoupledSolver::from_config(&cfg)?;
        let mut state = solver.initial_state(&InitialFields::from_config(&cfg))?;
        for _ in 0..cfg.n_steps() {
            state = solver.step(&state)?.state;
        }
        finals.push(state);
        dts.push(dt);
        energy_solver.get_or_insert(solver);
    }
    let s = energy_solver.expect("at least one level");
    let sub = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    let errs: Vec<f64> = finals
        .windows(2)
        .map(|p| {
            (2.0 * s.energy(
                &sub(&p[0].v, &p[1].v),
                &sub(&p[0].w, &p[1].w),
                &sub(&p[0].wt, &p[1].wt),
            ))
            .sqrt()
        })
        .collect();
    Ok(ConvergenceStudy::new(
        "coupled time self-convergence",
        dts[..dts.len() - 1].to_vec(),
        errs,
        1.8,
    ))
}

/// Area-preserving linear flow map `η(x, t) = S(t) R(t) x` with a shear
/// `S = [[1, s], [0, 1]]`, `s = 0.3 sin t`, and a rotation by `θ = t + t²`.
fn manufactured_map(t: f64) -> (Mat2, Mat2) {
    let (th, dth) = (t + t * t, 1.0 + 2.0 * t);
    let (s, ds) = (0.3 * t.sin(), 0.3 * t.cos());
    let (sn, cs) = th.sin_cos();
    let r = [[cs, -sn], [sn, cs]];
    let dr = [[-sn * dth, -cs * dth], [cs * dth, -sn * dth]];
    let sh = [[1.0, s], [0.0, 1.0]];
    let dsh = [[0.0, ds], [0.0, 0.0]];
    let mul = crate::fluid::mat_mul;
    let b = mul(&sh, &r);
    let db = mul(&dsh, &r);
    let db2 = mul(&sh, &dr);
    let mut v = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            v[i][j] = db[i][j] + db2[i][j];
        }
    }
    (b, v)
}

/// Largest `|det ∇η − 1|` over `[0, t_end]` when the flow map is advanced
/// with the Lagrangian velocity of [`manufactured_map`] at each step size.
/// The map is linear, so the error is purely temporal.
pub fn flow_map_convergence(h: f64, dts: &[f64], t_end: f64) -> Result<ConvergenceStudy> {
    let disc = Discretization::disc_annulus(R0, R1, h)?;
    let floors = MapFloors::default();
    let velocity = |t: f64| {
        let (_, v) = manufactured_map(t);
        disc.interpolate(&disc.fluid_all, |x| {
            [
                v[0][0] * x[0] + v[0][1] * x[1],
                v[1][0] * x[0] + v[1][1] * x[1],
            ]
        })
    };
    let mut errors = Vec::with_capacity(dts.len());
    for &dt in dts {
        let n = (t_end / dt).round() as usize;
        let mut xi = vec![0.0; 2 * disc.fluid_all.len()];
        let mut v_old = velocity(0.0);
        let mut worst: f64 = 0.0;
        for k in 1..=n {
            let v_new = velocity(k as f64 * dt);
            let (next, a) = advance_flow_map(&disc, &xi, &v_old, &v_new, dt, floors)?;
            worst = worst.max(a.max_det_deviation());
            xi = next;
            v_old = v_new;
        }
        errors.push(worst);
    }
    Ok(ConvergenceStudy::new(
        "flow map det(grad eta) - 1",
        dts.to_vec(),
        errors,
        1.8,
    ))
}
