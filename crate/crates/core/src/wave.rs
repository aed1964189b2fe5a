//! Variable-coefficient wave equation `w_tt − div(G∇w) + βw = 0` on the
//! elastic domain, discretized with P2 elements per displacement component.

use crate::discretization::{p2_mass, p2_stiffness, sym2_min_eigenvalue, Discretization};
use crate::error::{FsiError, Result};
use crate::fem::p2_values;
use crate::mesh::Point;
use crate::metric::{MetricField, PD_FLOOR};
use crate::sparse::{CsrMatrix, DirectSolver, TripletBuilder};

/// Displacement and velocity, component-blocked over the elastic nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub w: Vec<f64>,
    pub wt: Vec<f64>,
}

impl WaveState {
    pub fn zeros(n_nodes: usize) -> Self {
        Self {
            w: vec![0.0; 2 * n_nodes],
            wt: vec![0.0; 2 * n_nodes],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.wt).all(|v| v.is_finite())
    }
}

/// Scalar operators; each displacement component uses the same blocks.
#[derive(Debug, Clone)]
pub struct WaveOperators {
    pub mass: CsrMatrix,
    /// `∫ ⟨G∇φ_j, ∇φ_i⟩`.
    pub stiffness_g: CsrMatrix,
    /// `K = K_G + β M`.
    pub stiffness: CsrMatrix,
    pub beta: f64,
}

/// `G(x)` as a 2×2 array after a positive-definiteness check.
pub(crate) fn coefficient_2x2(metric: &MetricField, x: Point) -> Result<[[f64; 2]; 2]> {
    let g = metric.coefficient(&x);
    let m = [[g[(0, 0)], g[(0, 1)]], [g[(1, 0)], g[(1, 1)]]];
    let min_eigenvalue = sym2_min_eigenvalue(&m);
    if !(min_eigenvalue > PD_FLOOR) {
        return Err(FsiError::NotPositiveDefinite { min_eigenvalue });
    }
    Ok(m)
}

pub fn assemble_wave_operators(
    disc: &Discretization,
    metric: &MetricField,
    beta: f64,
) -> Result<WaveOperators> {
    let mass = p2_mass(disc, &disc.elastic_cells, &disc.elastic);
    let stiffness_g = p2_stiffness(disc, &disc.elastic_cells, &disc.elastic, |_, _, x| {
        coefficient_2x2(metric, x)
    })?;
    let stiffness = stiffness_g.combine(1.0, &mass, beta);
    Ok(WaveOperators {
        mass,
        stiffness_g,
        stiffness,
        beta,
    })
}

impl WaveOperators {
    pub fn n(&self) -> usize {
        self.mass.n_rows
    }

    /// `Σ_c u_cᵀ A u_c` over the two components.
    pub fn blocked_quadratic(a: &CsrMatrix, u: &[f64]) -> f64 {
        let n = a.n_rows;
        (0..2).map(|c| a.quadratic(&u[c * n..(c + 1) * n])).sum()
    }

    pub fn blocked_mul(a: &CsrMatrix, u: &[f64]) -> Vec<f64> {
        let n = a.n_rows;
        let mut out = a.mul_vec(&u[..n]);
        out.extend(a.mul_vec(&u[n..2 * n]));
        out
    }

    /// `½(‖w_t‖² + β‖w‖² + ∫⟨G∇w,∇w⟩)`.
    pub fn energy(&self, state: &WaveState) -> f64 {
        0.5 * (Self::blocked_quadratic(&self.mass, &state.wt)
            + Self::blocked_quadratic(&self.stiffness, &state.w))
    }
}

/// Conormal derivative at one interface quadrature point.
#[derive(Debug, Clone, Copy)]
pub struct TraceSample {
    pub x: Point,
    pub normal: Point,
    pub weight: f64,
    pub value: [f64; 2],
}

/// `(w^i)_{ν_Λ} = ν_j G_{jk} ∂_k w^i` at every interface quadrature point,
/// from the elastic side.
pub fn conormal_trace(
    disc: &Discretization,
    metric: &MetricField,
    w: &[f64],
) -> Result<Vec<TraceSample>> {
    disc.interface_points
        .iter()
        .map(|ip| {
            let el = disc.element(ip.elastic_cell);
            let l = el.barycentric(ip.x);
            let g = coefficient_2x2(metric, ip.x)?;
            let mut value = [0.0; 2];
            for (comp, v) in value.iter_mut().enumerate() {
                let grad = disc.p2_gradient_at(&disc.elastic, w, comp, ip.elastic_cell, &l);
                let gg = [
                    g[0][0] * grad[0] + g[0][1] * grad[1],
                    g[1][0] * grad[0] + g[1][1] * grad[1],
                ];
                *v = ip.normal[0] * gg[0] + ip.normal[1] * gg[1];
            }
            Ok(TraceSample {
                x: ip.x,
                normal: ip.normal,
                weight: ip.weight,
                value,
            })
        })
        .collect()
}

/// `∫_{Γ_c} |f|²` for a sampled interface field.
pub fn trace_norm_sq(samples: &[TraceSample]) -> f64 {
    crate::quadrature::compensated_sum(
        samples
            .iter()
            .map(|s| s.weight * (s.value[0] * s.value[0] + s.value[1] * s.value[1])),
    )
}

/// Boundary treatment for the standalone scalar wave solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveBoundary {
    /// Homogeneous conormal flux on the interface circle.
    Natural,
    /// Prescribed displacement at the interface nodes.
    Dirichlet,
}

pub type SpaceTimeFn<'a> = &'a (dyn Fn(Point, f64) -> f64 + Sync);

/// Midpoint-rule solver for a single scalar component of the wave equation on
/// the elastic disc, used for manufactured solutions and conservation checks.
pub struct ScalarWaveSolver<'a> {
    disc: &'a Discretization,
    ops: &'a WaveOperators,
    dt: f64,
    free: Vec<usize>,
    fixed: Vec<usize>,
    solver: DirectSolver,
    coupling: CsrMatrix,
}

impl<'a> ScalarWaveSolver<'a> {
    pub fn new(
        disc: &'a Discretization,
        ops: &'a WaveOperators,
        dt: f64,
        boundary: WaveBoundary,
    ) -> Result<Self> {
        let n = ops.n();
        let fixed: Vec<usize> = match boundary {
            WaveBoundary::Natural => Vec::new(),
            WaveBoundary::Dirichlet => {
                let mut v = disc.iface_to_elastic.clone();
                v.sort_unstable();
                v
            }
        };
        let mut is_fixed = vec![false; n];
        for &i in &fixed {
            is_fixed[i] = true;
        }
        let free: Vec<usize> = (0..n).filter(|&i| !is_fixed[i]).collect();
        // S = 2M/dt + (dt/2) K
        let s = ops.mass.combine(2.0 / dt, &ops.stiffness, 0.5 * dt);
        let solver = DirectSolver::factor(&s.submatrix(&free, &free))?;
        let coupling = s.submatrix(&free, &fixed);
        Ok(Self {
            disc,
            ops,
            dt,
            free,
            fixed,
            solver,
            coupling,
        })
    }

    fn load(&self, f: SpaceTimeFn<'_>, t: f64) -> Vec<f64> {
        let disc = self.disc;
        crate::discretization::assemble_vector(&disc.elastic_cells, &disc.elastic, |c| {
            let el = disc.element(c);
            let mut vals = vec![0.0; 6];
            for (l, w) in disc.rule.points.iter().zip(&disc.rule.weights) {
                let phi = p2_values(l);
                let fx = f(el.point(l), t);
                for i in 0..6 {
                    vals[i] += w * el.jac() * fx * phi[i];
                }
            }
            (disc.space.cell_dofs[c].to_vec(), vals)
        })
    }

    /// Advances `(w, w_t)` from `t` to `t + dt`. `forcing` is evaluated at the
    /// midpoint; `dirichlet = (g, g_t)` supplies boundary values.
    pub fn step(
        &self,
        w: &[f64],
        wt: &[f64],
        t: f64,
        forcing: Option<SpaceTimeFn<'_>>,
        dirichlet: Option<(SpaceTimeFn<'_>, SpaceTimeFn<'_>)>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let dt = self.dt;
        let mw = self.ops.mass.mul_vec(wt);
        let kw = self.ops.stiffness.mul_vec(w);
        let mut rhs: Vec<f64> = mw.iter().zip(&kw).map(|(a, b)| 2.0 * a / dt - b).collect();
        if let Some(f) = forcing {
            let l = self.load(f, t + 0.5 * dt);
            for (r, v) in rhs.iter_mut().zip(&l) {
                *r += v;
            }
        }
        // midpoint velocity at fixed nodes: (g(t+dt) − w)/dt
        let mut wbar_fixed = vec![0.0; self.fixed.len()];
        if let Some((g, _)) = dirichlet {
            for (k, &i) in self.fixed.iter().enumerate() {
                let x = self.disc.space.coords[self.disc.elastic.local_to_global[i]];
                wbar_fixed[k] = (g(x, t + dt) - w[i]) / dt;
            }
        }
        let cf = self.coupling.mul_vec(&wbar_fixed);
        let rhs_free: Vec<f64> = self
            .free
            .iter()
            .zip(&cf)
            .map(|(&i, c)| rhs[i] - c)
            .collect();
        let sol = self.solver.solve(&rhs_free)?;
        let n = self.ops.n();
        let mut wbar = vec![0.0; n];
        for (k, &i) in self.free.iter().enumerate() {
            wbar[i] = sol[k];
        }
        for (k, &i) in self.fixed.iter().enumerate() {
            wbar[i] = wbar_fixed[k];
        }
        let w_new: Vec<f64> = w.iter().zip(&wbar).map(|(a, b)| a + dt * b).collect();
        let mut wt_new: Vec<f64> = wt.iter().zip(&wbar).map(|(a, b)| 2.0 * b - a).collect();
        if let Some((_, gt)) = dirichlet {
            for &i in &self.fixed {
                let x = self.disc.space.coords[self.disc.elastic.local_to_global[i]];
                wt_new[i] = gt(x, t + dt);
            }
        }
        Ok((w_new, wt_new))
    }

    /// `½(wtᵀ M wt + wᵀ K w)` for one component.
    pub fn energy(&self, w: &[f64], wt: &[f64]) -> f64 {
        0.5 * (self.ops.mass.quadratic(wt) + self.ops.stiffness.quadratic(w))
    }
}

/// Interface coupling blocks `P_aᵀ C P_b` between subdomain node sets.
pub fn interface_block(
    disc: &Discretization,
    rows: &[usize],
    n_rows: usize,
    cols: &[usize],
    n_cols: usize,
) -> CsrMatrix {
    let c = &disc.interface_mass;
    let mut t = TripletBuilder::new(n_rows, n_cols);
    for r in 0..c.n_rows {
        for k in c.row_ptr[r]..c.row_ptr[r + 1] {
            t.add(rows[r], cols[c.col_idx[k]], c.values[k]);
        }
    }
    t.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricSpec;

    #[test]
    fn constants_lie_in_kernel_without_beta() {
        let disc = Discretization::disc_annulus(1.0, 2.0, 0.3).unwrap();
        let ops = assemble_wave_operators(&disc, &MetricField::identity(2), 0.0).unwrap();
        let k1 = ops.stiffness.mul_vec(&vec![1.0; ops.n()]);
        assert!(k1.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn indefinite_metric_is_rejected() {
        let disc = Discretization::disc_annulus(1.0, 2.0, 0.5).unwrap();
        let m = MetricField::from_spec(
            2,
            MetricSpec::Diagonal {
                entries: vec![1.0, -1.0],
            },
        );
        assert!(matches!(
            assemble_wave_operators(&disc, &m, 1.0),
            Err(FsiError::NotPositiveDefinite { .. })
        ));
    }
}
