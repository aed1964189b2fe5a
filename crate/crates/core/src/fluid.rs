//! Lagrangian incompressible fluid on the reference annulus: variable
//! coefficient Stokes operators, flow map, and the initial pressure problem.

use rayon::prelude::*;

use crate::discretization::{
    assemble_matrix, assemble_vector, p2_mass, sym2_min_eigenvalue, Discretization, LocalMatrix,
};
use crate::error::{FsiError, Result};
use crate::fem::{p2_gradients, DofMap};
use crate::fields::VectorField;
use crate::mesh::{EdgeTag, Point};
use crate::quadrature::compensated_sum;
use crate::sparse::{CsrMatrix, DirectSolver, TripletBuilder};

pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

pub fn det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn inverse(a: &Mat2) -> Mat2 {
    let d = det(a);
    [[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]]
}

/// `a a ᵀ`.
pub fn aat(a: &Mat2) -> Mat2 {
    mat_mul(a, &transpose(a))
}

/// Coefficient matrix `a` at every fluid quadrature point, ordered by
/// `Discretization::fluid_cells` then by quadrature point.
#[derive(Debug, Clone, PartialEq)]
pub struct AField {
    pub values: Vec<Mat2>,
    pub n_qp: usize,
}

impl AField {
    pub fn identity(disc: &Discretization) -> Self {
        Self {
            values: vec![IDENTITY; disc.fluid_cells.len() * disc.rule.len()],
            n_qp: disc.rule.len(),
        }
    }

    pub fn get(&self, cell_pos: usize, q: usize) -> &Mat2 {
        &self.values[cell_pos * self.n_qp + q]
    }

    /// Smallest eigenvalue of `a aᵀ` over all points.
    pub fn min_ellipticity(&self) -> f64 {
        self.values
            .iter()
            .map(|a| sym2_min_eigenvalue(&aat(a)))
            .fold(f64::INFINITY, f64::min)
    }

    /// `max |det(a)^{-1} − 1|`, i.e. the deviation of `det ∇η` from 1.
    pub fn max_det_deviation(&self) -> f64 {
        self.values
            .iter()
            .map(|a| (1.0 / det(a) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_deviation_from_identity(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|a| {
                (0..2).flat_map(move |i| (0..2).map(move |j| (a[i][j] - IDENTITY[i][j]).abs()))
            })
            .fold(0.0, f64::max)
    }
}

/// Viscous block (scalar, applied per component) and divergence block.
#[derive(Debug, Clone)]
pub struct StokesOperators {
    /// `∫ (a aᵀ)_{jk} ∂_k φ_m ∂_j φ_n`.
    pub viscous: CsrMatrix,
    /// `B[p, (i, m)] = ∫ ψ_p a^{ki} ∂_k φ_m^i`; shape `n_p × 2 n_v`.
    pub divergence: CsrMatrix,
}

/// Fluid velocity mass matrix.
pub fn fluid_mass(disc: &Discretization, vmap: &DofMap) -> CsrMatrix {
    p2_mass(disc, &disc.fluid_cells, vmap)
}

pub fn assemble_variable_stokes(
    disc: &Discretization,
    a: &AField,
    ellipticity_floor: f64,
) -> Result<StokesOperators> {
    assemble_variable_stokes_on(disc, &disc.fluid, a, ellipticity_floor)
}

/// As [`assemble_variable_stokes`] with an explicit velocity node set.
pub fn assemble_variable_stokes_on(
    disc: &Discretization,
    vmap: &DofMap,
    a: &AField,
    ellipticity_floor: f64,
) -> Result<StokesOperators> {
    let positions: Vec<usize> = (0..disc.fluid_cells.len()).collect();
    let cell_of = |pos: usize| disc.fluid_cells[pos];

    let min_ell = a.min_ellipticity();
    if min_ell < ellipticity_floor {
        return Err(FsiError::DegenerateCoefficient {
            value: min_ell,
            floor: ellipticity_floor,
        });
    }

    // Assemble over positions and map them to cells inside the kernel; the
    // row/col ids are global nodes so the cell index itself is irrelevant.
    let viscous = assemble_matrix(&positions, vmap, vmap, |pos| {
        let c = cell_of(pos);
        let el = disc.element(c);
        let mut values = vec![0.0; 36];
        for (q, (l, w)) in disc.rule.points.iter().zip(&disc.rule.weights).enumerate() {
            let g = p2_gradients(&el, l);
            let k = aat(a.get(pos, q));
            for i in 0..6 {
                for j in 0..6 {
                    let kg = [
                        k[0][0] * g[j][0] + k[0][1] * g[j][1],
                        k[1][0] * g[j][0] + k[1][1] * g[j][1],
                    ];
                    values[i * 6 + j] += w * el.jac() * (kg[0] * g[i][0] + kg[1] * g[i][1]);
                }
            }
        }
        let dofs = disc.space.cell_dofs[c].to_vec();
        Ok(LocalMatrix {
            rows: dofs.clone(),
            cols: dofs,
            values,
        })
    })?;

    let nv = vmap.len();
    let np = disc.pressure.len();
    let locals: Vec<(usize, Vec<f64>)> = positions
        .par_iter()
        .map(|&pos| {
            let c = cell_of(pos);
            let el = disc.element(c);
            // values[(comp * 3 + p) * 6 + m]
            let mut values = vec![0.0; 36];
            for (q, (l, w)) in disc.rule.points.iter().zip(&disc.rule.weights).enumerate() {
                let g = p2_gradients(&el, l);
                let am = a.get(pos, q);
                for comp in 0..2 {
                    for p in 0..3 {
                        for m in 0..6 {
                            let d = am[0][comp] * g[m][0] + am[1][comp] * g[m][1];
                            values[(comp * 3 + p) * 6 + m] += w * el.jac() * l[p] * d;
                        }
                    }
                }
            }
            (c, values)
        })
        .collect();
    let mut t = TripletBuilder::new(np, 2 * nv);
    for (c, values) in &locals {
        let vdofs = &disc.space.cell_dofs[*c];
        let pdofs = &disc.mesh.cells[*c];
        for comp in 0..2 {
            for p in 0..3 {
                let Some(pr) = disc.pressure.local(pdofs[p]) else {
                    continue;
                };
                for m in 0..6 {
                    if let Some(vc) = vmap.local(vdofs[m]) {
                        t.add(pr, comp * nv + vc, values[(comp * 3 + p) * 6 + m]);
                    }
                }
            }
        }
    }
    Ok(StokesOperators {
        viscous,
        divergence: t.build(),
    })
}

/// Velocity gradients `∂_k v^i` at every fluid quadrature point.
pub fn velocity_gradients(disc: &Discretization, vmap: &DofMap, v: &[f64]) -> Vec<Mat2> {
    disc.fluid_cells
        .par_iter()
        .flat_map_iter(|&c| {
            let el = disc.element(c);
            let loc = [disc.gather_p2(vmap, v, 0, c), disc.gather_p2(vmap, v, 1, c)];
            disc.rule
                .points
                .iter()
                .map(|l| {
                    let g = p2_gradients(&el, l);
                    let mut m = [[0.0; 2]; 2];
                    for i in 0..2 {
                        for k in 0..6 {
                            m[i][0] += loc[i][k] * g[k][0];
                            m[i][1] += loc[i][k] * g[k][1];
                        }
                    }
                    m
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Quadrature weights (times Jacobian) aligned with [`velocity_gradients`].
pub fn fluid_weights(disc: &Discretization) -> Vec<f64> {
    disc.fluid_cells
        .iter()
        .flat_map(|&c| {
            let jac = disc.element(c).jac();
            disc.rule.weights.iter().map(move |w| w * jac)
        })
        .collect()
}

/// `‖a^{ki} ∂_k v^i‖_{L²(Ω_f)}`.
pub fn divergence_residual(disc: &Discretization, v: &[f64], a: &AField) -> f64 {
    divergence_residual_on(disc, &disc.fluid, v, a)
}

/// As [`divergence_residual`] with an explicit velocity node set.
pub fn divergence_residual_on(disc: &Discretization, vmap: &DofMap, v: &[f64], a: &AField) -> f64 {
    let grads = velocity_gradients(disc, vmap, v);
    let weights = fluid_weights(disc);
    let s = compensated_sum(
        grads
            .iter()
            .zip(&a.values)
            .zip(&weights)
            .map(|((g, am), w)| {
                let mut d = 0.0;
                for i in 0..2 {
                    for k in 0..2 {
                        d += am[k][i] * g[i][k];
                    }
                }
                w * d * d
            }),
    );
    s.sqrt()
}

/// Solves `Δq = f` in Ω_f with `∂q/∂n = g_N` on Γ_f and `q = g_D` on Γ_c
/// using P1 elements. Boundary data receive the point and the unit normal
/// (on Γ_c, the normal pointing into the fluid, averaged at vertices).
pub fn solve_mixed_poisson(
    disc: &Discretization,
    f: &(dyn Fn(Point) -> f64 + Sync),
    neumann: &(dyn Fn(Point, Point) -> f64 + Sync),
    dirichlet: &(dyn Fn(Point, Point) -> f64 + Sync),
) -> Result<Vec<f64>> {
    let pmap = &disc.pressure;
    let np = pmap.len();
    let mesh = &disc.mesh;
    let stiff = assemble_matrix(&disc.fluid_cells, pmap, pmap, |c| {
        let el = disc.element(c);
        let g = &el.grad_bary;
        let mut values = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                values[i * 3 + j] = el.area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
        let dofs = mesh.cells[c].to_vec();
        Ok(LocalMatrix {
            rows: dofs.clone(),
            cols: dofs,
            values,
        })
    })?;
    // ∫∇q·∇ψ = −∫fψ + ∫_{Γ_f} g_N ψ
    let mut rhs = assemble_vector(&disc.fluid_cells, pmap, |c| {
        let el = disc.element(c);
        let mut vals = vec![0.0; 3];
        for (l, w) in disc.rule.points.iter().zip(&disc.rule.weights) {
            let fx = f(el.point(l));
            for i in 0..3 {
                vals[i] -= w * el.jac() * fx * l[i];
            }
        }
        (mesh.cells[c].to_vec(), vals)
    });
    for e in mesh.edges_with_tag(EdgeTag::Outer) {
        let be = &mesh.boundary_edges[e];
        let (a, b) = (mesh.nodes[be.nodes[0]], mesh.nodes[be.nodes[1]]);
        for (s, w) in disc.edge_rule.points.iter().zip(&disc.edge_rule.weights) {
            let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let g = neumann(x, be.normal);
            for (k, phi) in [1.0 - s, *s].into_iter().enumerate() {
                if let Some(l) = pmap.local(be.nodes[k]) {
                    rhs[l] += w * be.length * g * phi;
                }
            }
        }
    }
    // Dirichlet vertices with averaged normals
    let mut normal_sum = vec![[0.0f64; 2]; mesh.nodes.len()];
    for e in mesh.edges_with_tag(EdgeTag::Interface) {
        let be = &mesh.boundary_edges[e];
        for &n in &be.nodes {
            normal_sum[n][0] += be.normal[0];
            normal_sum[n][1] += be.normal[1];
        }
    }
    let mut fixed_value = vec![None; np];
    for n in mesh.boundary_nodes(EdgeTag::Interface) {
        let s = normal_sum[n];
        let len = (s[0] * s[0] + s[1] * s[1]).sqrt();
        let nu = [s[0] / len, s[1] / len];
        fixed_value[pmap.local(n).unwrap()] = Some(dirichlet(mesh.nodes[n], nu));
    }
    let free: Vec<usize> = (0..np).filter(|&i| fixed_value[i].is_none()).collect();
    let fixed: Vec<usize> = (0..np).filter(|&i| fixed_value[i].is_some()).collect();
    let gd: Vec<f64> = fixed.iter().map(|&i| fixed_value[i].unwrap()).collect();
    let kfd = stiff.submatrix(&free, &fixed).mul_vec(&gd);
    let rhs_free: Vec<f64> = free.iter().zip(&kfd).map(|(&i, k)| rhs[i] - k).collect();
    let solver = DirectSolver::factor(&stiff.submatrix(&free, &free))?;
    let sol = solver.solve(&rhs_free)?;
    let mut q = vec![0.0; np];
    for (k, &i) in free.iter().enumerate() {
        q[i] = sol[k];
    }
    for (k, &i) in fixed.iter().enumerate() {
        q[i] = gd[k];
    }
    Ok(q)
}

/// Initial pressure: `Δq₀ = −∂_i v₀^k ∂_k v₀^i`, `∂q₀/∂ν = Δv₀·ν` on Γ_f,
/// `q₀ = ∂_j v₀^i ν_j ν_i − (w₀)_{ν_Λ}·ν` on Γ_c. `w0_conormal(x, ν)` returns
/// the conormal derivative of the initial displacement.
pub fn solve_initial_pressure(
    disc: &Discretization,
    v0: &dyn VectorField,
    w0_conormal: &(dyn Fn(Point, Point) -> [f64; 2] + Sync),
) -> Result<Vec<f64>> {
    let f = |x: Point| {
        let g = v0.gradient(x);
        let mut s = 0.0;
        for i in 0..2 {
            for k in 0..2 {
                s += g[k][i] * g[i][k];
            }
        }
        -s
    };
    let neumann = |x: Point, n: Point| {
        let l = v0.laplacian(x);
        l[0] * n[0] + l[1] * n[1]
    };
    let dirichlet = |x: Point, n: Point| {
        let g = v0.gradient(x);
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += g[i][j] * n[j] * n[i];
            }
        }
        let t = w0_conormal(x, n);
        s - (t[0] * n[0] + t[1] * n[1])
    };
    solve_mixed_poisson(disc, &f, &neumann, &dirichlet)
}

/// Thresholds that define the small-data regime of the flow map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapFloors {
    pub det_floor: f64,
    pub ellipticity_floor: f64,
}

impl Default for MapFloors {
    fn default() -> Self {
        Self {
            det_floor: 0.5,
            ellipticity_floor: 0.5,
        }
    }
}

/// Nodal values of the identity map `η(x) = x` on all fluid nodes.
pub fn identity_flow_map(disc: &Discretization) -> Vec<f64> {
    disc.interpolate(&disc.fluid_all, |x| x)
}

/// Extends a velocity on the fluid unknowns by zero to all fluid nodes.
pub fn extend_velocity(disc: &Discretization, v: &[f64]) -> Vec<f64> {
    let nv = disc.fluid.len();
    let na = disc.fluid_all.len();
    let mut out = vec![0.0; 2 * na];
    for (i, &g) in disc.fluid_all.local_to_global.iter().enumerate() {
        if let Some(l) = disc.fluid.local(g) {
            out[i] = v[l];
            out[na + i] = v[nv + l];
        }
    }
    out
}

/// `a = (∇η)^{-1}` at every fluid quadrature point, with `det ∇η` checked.
/// The flow map is passed as its displacement `ξ = η − x`, so that `ξ = 0`
/// yields `a = I` exactly.
pub fn a_from_flow_map(disc: &Discretization, xi: &[f64], floors: MapFloors) -> Result<AField> {
    let grads = velocity_gradients(disc, &disc.fluid_all, xi);
    let mut values = Vec::with_capacity(grads.len());
    for dxi in &grads {
        let g = [[1.0 + dxi[0][0], dxi[0][1]], [dxi[1][0], 1.0 + dxi[1][1]]];
        let g = &g;
        let d = det(g);
        if !(d >= floors.det_floor) {
            return Err(FsiError::MapDegenerate(format!(
                "det(∇η) = {d:.6e} below floor {:.3e}",
                floors.det_floor
            )));
        }
        values.push(inverse(g));
    }
    let a = AField {
        values,
        n_qp: disc.rule.len(),
    };
    let ell = a.min_ellipticity();
    if !(ell >= floors.ellipticity_floor) {
        return Err(FsiError::MapDegenerate(format!(
            "ellipticity of a aᵀ = {ell:.6e} below floor {:.3e}",
            floors.ellipticity_floor
        )));
    }
    Ok(a)
}

/// Trapezoidal update of the flow-map displacement `ξ = η − x` followed by
/// `a = (∇η)^{-1}`. Velocities are given on the fluid unknowns.
pub fn update_flow_map(
    disc: &Discretization,
    xi: &[f64],
    v_old: &[f64],
    v_new: &[f64],
    dt: f64,
    floors: MapFloors,
) -> Result<(Vec<f64>, AField)> {
    let vo = extend_velocity(disc, v_old);
    let vn = extend_velocity(disc, v_new);
    advance_flow_map(disc, xi, &vo, &vn, dt, floors)
}

/// [`update_flow_map`] with velocities given on all fluid nodes.
pub fn advance_flow_map(
    disc: &Discretization,
    xi: &[f64],
    v_old: &[f64],
    v_new: &[f64],
    dt: f64,
    floors: MapFloors,
) -> Result<(Vec<f64>, AField)> {
    let xi_new: Vec<f64> = xi
        .iter()
        .zip(v_old.iter().zip(v_new))
        .map(|(e, (a, b))| e + 0.5 * dt * (a + b))
        .collect();
    let a = a_from_flow_map(disc, &xi_new, floors)?;
    Ok((xi_new, a))
}

/// One Heun step of `a_t = −a (∇v) a` at every quadrature point; the
/// cross-check for the directly computed `a`.
pub fn a_ode_step(a: &AField, grad_old: &[Mat2], grad_new: &[Mat2], dt: f64) -> AField {
    let values = a
        .values
        .iter()
        .zip(grad_old.iter().zip(grad_new))
        .map(|(am, (g0, g1))| {
            let k1 = mat_mul(&mat_mul(am, g0), am);
            let mut pred = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    pred[i][j] = am[i][j] - dt * k1[i][j];
                }
            }
            let k2 = mat_mul(&mat_mul(&pred, g1), &pred);
            let mut out = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] = am[i][j] - 0.5 * dt * (k1[i][j] + k2[i][j]);
                }
            }
            out
        })
        .collect();
    AField {
        values,
        n_qp: a.n_qp,
    }
}

/// L² projection of `v` onto discretely divergence-free fields (for `a`).
pub fn project_divergence_free(
    disc: &Discretization,
    mass: &CsrMatrix,
    ops: &StokesOperators,
    v: &[f64],
) -> Result<Vec<f64>> {
    let nv = disc.fluid.len();
    let np = disc.pressure.len();
    let mut t = TripletBuilder::new(2 * nv + np, 2 * nv + np);
    t.add_block(mass, 0, 0, 1.0);
    t.add_block(mass, nv, nv, 1.0);
    t.add_block_transposed(&ops.divergence, 0, 2 * nv, -1.0);
    t.add_block(&ops.divergence, 2 * nv, 0, -1.0);
    for p in 0..np {
        t.add(2 * nv + p, 2 * nv + p, 0.0);
    }
    let mut rhs = mass.mul_vec(&v[..nv]);
    rhs.extend(mass.mul_vec(&v[nv..]));
    rhs.extend(std::iter::repeat(0.0).take(np));
    let sol = DirectSolver::factor(&t.build())?.solve(&rhs)?;
    Ok(sol[..2 * nv].to_vec())
}
