//! Finite element spaces on the two subdomains and shared assembly helpers.
//!
//! Vector-valued coefficient vectors are stored component-blocked: entry
//! `c * n + i` is component `c` at local node `i`.

use rayon::prelude::*;

use crate::error::Result;
use crate::fem::{
    p1_dofs, p2_dofs, p2_edge_values, p2_gradients, p2_values, DofMap, Element, P2Space,
};
use crate::mesh::{build_disc_annulus, CellTag, EdgeTag, Mesh, Point};
use crate::quadrature::{compensated_sum, EdgeRule, QuadratureRule};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// One quadrature point on the interface, located in both adjacent cells.
#[derive(Debug, Clone, Copy)]
pub struct InterfacePoint {
    pub x: Point,
    /// Unit normal pointing from the elastic into the fluid domain.
    pub normal: Point,
    pub weight: f64,
    pub elastic_cell: usize,
    pub fluid_cell: usize,
}

#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub space: P2Space,
    /// P2 displacement nodes on the elastic cells.
    pub elastic: DofMap,
    /// P2 velocity unknowns: fluid nodes minus the outer wall.
    pub fluid: DofMap,
    /// All P2 fluid nodes (flow map).
    pub fluid_all: DofMap,
    /// P1 pressure nodes.
    pub pressure: DofMap,
    /// P2 nodes on the interface.
    pub interface: DofMap,
    pub iface_to_fluid: Vec<usize>,
    pub iface_to_elastic: Vec<usize>,
    pub fluid_cells: Vec<usize>,
    pub elastic_cells: Vec<usize>,
    pub interface_edges: Vec<usize>,
    pub interface_points: Vec<InterfacePoint>,
    /// Interface mass matrix on the interface nodes.
    pub interface_mass: CsrMatrix,
    pub rule: QuadratureRule,
    pub edge_rule: EdgeRule,
}

impl Discretization {
    pub fn new(mesh: Mesh) -> Self {
        let space = P2Space::new(&mesh);
        let n = space.n_nodes();
        let outer = space.boundary_nodes(&mesh, EdgeTag::Outer);
        let iface_nodes = space.boundary_nodes(&mesh, EdgeTag::Interface);
        let elastic = p2_dofs(&space, &mesh, CellTag::Elastic, &[]);
        let fluid = p2_dofs(&space, &mesh, CellTag::Fluid, &outer);
        let fluid_all = p2_dofs(&space, &mesh, CellTag::Fluid, &[]);
        let pressure = p1_dofs(&mesh, CellTag::Fluid);
        let interface = DofMap::from_sorted(n, iface_nodes);
        let iface_to_fluid = interface
            .local_to_global
            .iter()
            .map(|&g| fluid.local(g).expect("interface node is a fluid unknown"))
            .collect();
        let iface_to_elastic = interface
            .local_to_global
            .iter()
            .map(|&g| elastic.local(g).expect("interface node is an elastic node"))
            .collect();
        let fluid_cells = mesh.cells_with_tag(CellTag::Fluid).collect();
        let elastic_cells = mesh.cells_with_tag(CellTag::Elastic).collect();
        let interface_edges: Vec<usize> = mesh.edges_with_tag(EdgeTag::Interface).collect();
        let edge_rule = EdgeRule::gauss3();

        let mut interface_points = Vec::new();
        for pair in &mesh.interface_pairs {
            let be = &mesh.boundary_edges[pair.edge];
            let (a, b) = (mesh.nodes[be.nodes[0]], mesh.nodes[be.nodes[1]]);
            for (s, w) in edge_rule.points.iter().zip(&edge_rule.weights) {
                interface_points.push(InterfacePoint {
                    x: [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])],
                    normal: be.normal,
                    weight: w * be.length,
                    elastic_cell: pair.elastic_cell,
                    fluid_cell: pair.fluid_cell,
                });
            }
        }

        let mut t = TripletBuilder::new(interface.len(), interface.len());
        for &e in &interface_edges {
            let dofs = space.boundary_edge_dofs(&mesh, e);
            let len = mesh.boundary_edges[e].length;
            let local: Vec<usize> = dofs.iter().map(|&g| interface.local(g).unwrap()).collect();
            for (s, w) in edge_rule.points.iter().zip(&edge_rule.weights) {
                let phi = p2_edge_values(*s);
                for i in 0..3 {
                    for j in 0..3 {
                        t.add(local[i], local[j], w * len * phi[i] * phi[j]);
                    }
                }
            }
        }
        let interface_mass = t.build();

        Self {
            mesh,
            space,
            elastic,
            fluid,
            fluid_all,
            pressure,
            interface,
            iface_to_fluid,
            iface_to_elastic,
            fluid_cells,
            elastic_cells,
            interface_edges,
            interface_points,
            interface_mass,
            rule: QuadratureRule::dunavant4(),
            edge_rule,
        }
    }

    pub fn disc_annulus(r0: f64, r1: f64, h: f64) -> Result<Self> {
        Ok(Self::new(build_disc_annulus(r0, r1, h)?))
    }

    pub fn element(&self, c: usize) -> Element {
        Element::new(self.mesh.cell_points(c))
    }

    /// Nodal interpolation of a vector field onto the nodes of `map`.
    pub fn interpolate(&self, map: &DofMap, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
        let n = map.len();
        let mut out = vec![0.0; 2 * n];
        for (i, &g) in map.local_to_global.iter().enumerate() {
            let v = f(self.space.coords[g]);
            out[i] = v[0];
            out[n + i] = v[1];
        }
        out
    }

    /// Nodal interpolation of a scalar field onto the nodes of `map`.
    pub fn interpolate_scalar(&self, map: &DofMap, f: impl Fn(Point) -> f64) -> Vec<f64> {
        map.local_to_global
            .iter()
            .map(|&g| f(self.space.coords[g]))
            .collect()
    }

    /// Restricts a component-blocked fluid/elastic vector to the interface nodes.
    pub fn trace(&self, map_from_iface: &[usize], n_sub: usize, u: &[f64]) -> Vec<f64> {
        let m = map_from_iface.len();
        let mut out = vec![0.0; 2 * m];
        for c in 0..2 {
            for (i, &l) in map_from_iface.iter().enumerate() {
                out[c * m + i] = u[c * n_sub + l];
            }
        }
        out
    }

    /// `uᵀ (C ⊗ I₂) u` for an interface vector.
    pub fn interface_norm_sq(&self, u: &[f64]) -> f64 {
        let m = self.interface.len();
        (0..2)
            .map(|c| self.interface_mass.quadratic(&u[c * m..(c + 1) * m]))
            .sum()
    }

    /// Local P2 coefficients of component `comp` of a blocked vector on cell `c`;
    /// nodes outside `map` contribute zero.
    pub fn gather_p2(&self, map: &DofMap, u: &[f64], comp: usize, c: usize) -> [f64; 6] {
        let n = map.len();
        let mut out = [0.0; 6];
        for (k, &g) in self.space.cell_dofs[c].iter().enumerate() {
            if let Some(l) = map.local(g) {
                out[k] = u[comp * n + l];
            }
        }
        out
    }

    /// Local P1 coefficients of a scalar pressure-type vector on cell `c`.
    pub fn gather_p1(&self, map: &DofMap, u: &[f64], c: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, &g) in self.mesh.cells[c].iter().enumerate() {
            if let Some(l) = map.local(g) {
                out[k] = u[l];
            }
        }
        out
    }

    /// `‖u_h − u‖_{L²}` over `cells` for a blocked P2 vector field, using a
    /// degree-6 rule.
    pub fn l2_error_p2(
        &self,
        cells: &[usize],
        map: &DofMap,
        u: &[f64],
        exact: impl Fn(Point) -> [f64; 2] + Sync,
    ) -> f64 {
        let rule = QuadratureRule::dunavant6();
        let parts: Vec<f64> = cells
            .par_iter()
            .map(|&c| {
                let el = self.element(c);
                let loc = [self.gather_p2(map, u, 0, c), self.gather_p2(map, u, 1, c)];
                let mut s = 0.0;
                for (l, w) in rule.points.iter().zip(&rule.weights) {
                    let phi = p2_values(l);
                    let ex = exact(el.point(l));
                    for comp in 0..2 {
                        let uh: f64 = (0..6).map(|k| phi[k] * loc[comp][k]).sum();
                        s += w * el.jac() * (uh - ex[comp]).powi(2);
                    }
                }
                s
            })
            .collect();
        compensated_sum(parts).sqrt()
    }

    /// `‖p_h − p‖_{L²}` over the fluid cells for a P1 field on `map`.
    pub fn l2_error_p1(&self, map: &DofMap, p: &[f64], exact: impl Fn(Point) -> f64 + Sync) -> f64 {
        let rule = QuadratureRule::dunavant6();
        let parts: Vec<f64> = self
            .fluid_cells
            .par_iter()
            .map(|&c| {
                let el = self.element(c);
                let loc = self.gather_p1(map, p, c);
                rule.points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(l, w)| {
                        let ph: f64 = (0..3).map(|k| l[k] * loc[k]).sum();
                        w * el.jac() * (ph - exact(el.point(l))).powi(2)
                    })
                    .sum::<f64>()
            })
            .collect();
        compensated_sum(parts).sqrt()
    }

    /// Gradient of component `comp` of a blocked P2 field at barycentric `l` in cell `c`.
    pub fn p2_gradient_at(
        &self,
        map: &DofMap,
        u: &[f64],
        comp: usize,
        c: usize,
        l: &[f64; 3],
    ) -> [f64; 2] {
        let el = self.element(c);
        let grads = p2_gradients(&el, l);
        let loc = self.gather_p2(map, u, comp, c);
        let mut g = [0.0; 2];
        for k in 0..6 {
            g[0] += grads[k][0] * loc[k];
            g[1] += grads[k][1] * loc[k];
        }
        g
    }
}

/// Dense local matrix produced by a cell kernel: global row/column node ids
/// and row-major values.
pub struct LocalMatrix {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: Vec<f64>,
}

/// Assembles cell contributions. Kernels run in parallel; the scatter is
/// sequential in cell order, so the result does not depend on thread count.
pub fn assemble_matrix<F>(
    cells: &[usize],
    rows: &DofMap,
    cols: &DofMap,
    kernel: F,
) -> Result<CsrMatrix>
where
    F: Fn(usize) -> Result<LocalMatrix> + Sync,
{
    let locals: Vec<LocalMatrix> = cells
        .par_iter()
        .map(|&c| kernel(c))
        .collect::<Result<_>>()?;
    let mut t = TripletBuilder::new(rows.len(), cols.len());
    for lm in &locals {
        let nc = lm.cols.len();
        for (i, &gr) in lm.rows.iter().enumerate() {
            let Some(r) = rows.local(gr) else { continue };
            for (j, &gc) in lm.cols.iter().enumerate() {
                if let Some(cc) = cols.local(gc) {
                    t.add(r, cc, lm.values[i * nc + j]);
                }
            }
        }
    }
    Ok(t.build())
}

/// Assembles a load vector from per-cell `(global nodes, values)`.
pub fn assemble_vector<F>(cells: &[usize], map: &DofMap, kernel: F) -> Vec<f64>
where
    F: Fn(usize) -> (Vec<usize>, Vec<f64>) + Sync,
{
    let locals: Vec<(Vec<usize>, Vec<f64>)> = cells.par_iter().map(|&c| kernel(c)).collect();
    let mut out = vec![0.0; map.len()];
    for (nodes, vals) in &locals {
        for (g, v) in nodes.iter().zip(vals) {
            if let Some(l) = map.local(*g) {
                out[l] += v;
            }
        }
    }
    out
}

/// P2 mass matrix on `cells`.
pub fn p2_mass(disc: &Discretization, cells: &[usize], map: &DofMap) -> CsrMatrix {
    assemble_matrix(cells, map, map, |c| {
        let el = disc.element(c);
        let mut values = vec![0.0; 36];
        for (l, w) in disc.rule.points.iter().zip(&disc.rule.weights) {
            let phi = p2_values(l);
            for i in 0..6 {
                for j in 0..6 {
                    values[i * 6 + j] += w * el.jac() * phi[i] * phi[j];
                }
            }
        }
        let dofs = disc.space.cell_dofs[c].to_vec();
        Ok(LocalMatrix {
            rows: dofs.clone(),
            cols: dofs,
            values,
        })
    })
    .expect("mass kernel is infallible")
}

/// P2 stiffness `∫ ⟨C(x) ∇φ_j, ∇φ_i⟩` for a symmetric coefficient evaluated at
/// quadrature points (`coef(cell, qp index, x)`).
pub fn p2_stiffness<F>(
    disc: &Discretization,
    cells: &[usize],
    map: &DofMap,
    coef: F,
) -> Result<CsrMatrix>
where
    F: Fn(usize, usize, Point) -> Result<[[f64; 2]; 2]> + Sync,
{
    assemble_matrix(cells, map, map, |c| {
        let el = disc.element(c);
        let mut values = vec![0.0; 36];
        for (q, (l, w)) in disc.rule.points.iter().zip(&disc.rule.weights).enumerate() {
            let g = p2_gradients(&el, l);
            let k = coef(c, q, el.point(l))?;
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
    })
}

/// Smallest eigenvalue of a symmetric 2×2 matrix.
pub fn sym2_min_eigenvalue(m: &[[f64; 2]; 2]) -> f64 {
    let tr = m[0][0] + m[1][1];
    let b = 0.5 * (m[0][1] + m[1][0]);
    let d = ((m[0][0] - m[1][1]).powi(2) + 4.0 * b * b).sqrt();
    0.5 * (tr - d)
}
