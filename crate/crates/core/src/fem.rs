//! Lagrange P1/P2 elements on triangles and subdomain degree-of-freedom maps.

use std::collections::BTreeMap;

use crate::mesh::{CellTag, EdgeTag, Mesh, Point};

/// Global P2 node numbering: mesh vertices first, then one node per edge.
#[derive(Debug, Clone)]
pub struct P2Space {
    pub n_vertices: usize,
    pub coords: Vec<Point>,
    /// Local order: three vertices, then edges (0,1), (1,2), (2,0).
    pub cell_dofs: Vec<[usize; 6]>,
    edge_node: BTreeMap<(usize, usize), usize>,
}

impl P2Space {
    pub fn new(mesh: &Mesh) -> Self {
        let n_vertices = mesh.nodes.len();
        let mut coords = mesh.nodes.clone();
        let mut edge_node = BTreeMap::new();
        let mut cell_dofs = Vec::with_capacity(mesh.cells.len());
        for tri in &mesh.cells {
            let mut dofs = [tri[0], tri[1], tri[2], 0, 0, 0];
            for (slot, (a, b)) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]
                .into_iter()
                .enumerate()
            {
                let key = (a.min(b), a.max(b));
                let id = *edge_node.entry(key).or_insert_with(|| {
                    let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
                    coords.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                    coords.len() - 1
                });
                dofs[3 + slot] = id;
            }
            cell_dofs.push(dofs);
        }
        Self {
            n_vertices,
            coords,
            cell_dofs,
            edge_node,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn edge_midpoint(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_node.get(&(a.min(b), a.max(b))).copied()
    }

    /// P2 nodes of boundary facet `e`: `[start, end, midpoint]`.
    pub fn boundary_edge_dofs(&self, mesh: &Mesh, e: usize) -> [usize; 3] {
        let [a, b] = mesh.boundary_edges[e].nodes;
        [
            a,
            b,
            self.edge_midpoint(a, b)
                .expect("boundary edge belongs to a cell"),
        ]
    }

    /// Sorted P2 nodes on facets with the given tag.
    pub fn boundary_nodes(&self, mesh: &Mesh, tag: EdgeTag) -> Vec<usize> {
        let mut v: Vec<usize> = mesh
            .edges_with_tag(tag)
            .flat_map(|e| self.boundary_edge_dofs(mesh, e))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Map between global node ids and a compact local numbering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    pub local_to_global: Vec<usize>,
    pub global_to_local: Vec<Option<usize>>,
}

impl DofMap {
    pub fn from_sorted(n_global: usize, nodes: Vec<usize>) -> Self {
        let mut global_to_local = vec![None; n_global];
        for (i, &g) in nodes.iter().enumerate() {
            global_to_local[g] = Some(i);
        }
        Self {
            local_to_global: nodes,
            global_to_local,
        }
    }

    pub fn len(&self) -> usize {
        self.local_to_global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local_to_global.is_empty()
    }

    pub fn local(&self, global: usize) -> Option<usize> {
        self.global_to_local[global]
    }
}

/// P2 nodes touching cells with `tag`, excluding `excluded` nodes.
pub fn p2_dofs(space: &P2Space, mesh: &Mesh, tag: CellTag, excluded: &[usize]) -> DofMap {
    let mut mark = vec![false; space.n_nodes()];
    for c in mesh.cells_with_tag(tag) {
        for &d in &space.cell_dofs[c] {
            mark[d] = true;
        }
    }
    for &e in excluded {
        mark[e] = false;
    }
    let nodes = (0..space.n_nodes()).filter(|&i| mark[i]).collect();
    DofMap::from_sorted(space.n_nodes(), nodes)
}

/// Vertices of cells with `tag` (P1 nodes).
pub fn p1_dofs(mesh: &Mesh, tag: CellTag) -> DofMap {
    let mut mark = vec![false; mesh.nodes.len()];
    for c in mesh.cells_with_tag(tag) {
        for &v in &mesh.cells[c] {
            mark[v] = true;
        }
    }
    let nodes = (0..mesh.nodes.len()).filter(|&i| mark[i]).collect();
    DofMap::from_sorted(mesh.nodes.len(), nodes)
}

/// Affine triangle geometry.
#[derive(Debug, Clone, Copy)]
pub struct Element {
    pub pts: [Point; 3],
    pub area: f64,
    /// Physical gradients of the barycentric coordinates.
    pub grad_bary: [[f64; 2]; 3],
}

impl Element {
    pub fn new(pts: [Point; 3]) -> Self {
        let j = [
            [pts[1][0] - pts[0][0], pts[2][0] - pts[0][0]],
            [pts[1][1] - pts[0][1], pts[2][1] - pts[0][1]],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        // rows of J^{-1}
        let g1 = [j[1][1] / det, -j[0][1] / det];
        let g2 = [-j[1][0] / det, j[0][0] / det];
        let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
        Self {
            pts,
            area: 0.5 * det,
            grad_bary: [g0, g1, g2],
        }
    }

    pub fn point(&self, l: &[f64; 3]) -> Point {
        crate::mesh::barycentric_point(&self.pts, l)
    }

    /// Jacobian determinant of the reference map (twice the area).
    pub fn jac(&self) -> f64 {
        2.0 * self.area
    }

    pub fn barycentric(&self, p: Point) -> [f64; 3] {
        let d = [p[0] - self.pts[0][0], p[1] - self.pts[0][1]];
        let g = &self.grad_bary;
        let l1 = g[1][0] * d[0] + g[1][1] * d[1];
        let l2 = g[2][0] * d[0] + g[2][1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }
}

pub fn p2_values(l: &[f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

pub fn p2_gradients(el: &Element, l: &[f64; 3]) -> [[f64; 2]; 6] {
    let g = &el.grad_bary;
    let mut out = [[0.0; 2]; 6];
    for i in 0..3 {
        let s = 4.0 * l[i] - 1.0;
        out[i] = [s * g[i][0], s * g[i][1]];
    }
    for (slot, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
        out[3 + slot] = [
            4.0 * (l[a] * g[b][0] + l[b] * g[a][0]),
            4.0 * (l[a] * g[b][1] + l[b] * g[a][1]),
        ];
    }
    out
}

/// Constant second derivatives `∂_r ∂_s φ_i` of the P2 basis on a cell.
pub fn p2_hessians(el: &Element) -> [[[f64; 2]; 2]; 6] {
    let g = &el.grad_bary;
    let mut out = [[[0.0; 2]; 2]; 6];
    for i in 0..3 {
        for r in 0..2 {
            for s in 0..2 {
                out[i][r][s] = 4.0 * g[i][r] * g[i][s];
            }
        }
    }
    for (slot, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
        for r in 0..2 {
            for s in 0..2 {
                out[3 + slot][r][s] = 4.0 * (g[a][r] * g[b][s] + g[b][r] * g[a][s]);
            }
        }
    }
    out
}

/// P2 basis restricted to an edge parametrized by `s ∈ [0, 1]`:
/// values at `[start, end, midpoint]`.
pub fn p2_edge_values(s: f64) -> [f64; 3] {
    [
        (1.0 - s) * (1.0 - 2.0 * s),
        s * (2.0 * s - 1.0),
        4.0 * s * (1.0 - s),
    ]
}

/// Evaluates a P2 field on a cell.
pub fn p2_eval(coeffs: &[f64], dofs: &[usize; 6], l: &[f64; 3]) -> f64 {
    let phi = p2_values(l);
    (0..6).map(|i| phi[i] * coeffs[dofs[i]]).sum()
}

pub fn p2_eval_grad(coeffs: &[f64], dofs: &[usize; 6], grads: &[[f64; 2]; 6]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for i in 0..6 {
        g[0] += grads[i][0] * coeffs[dofs[i]];
        g[1] += grads[i][1] * coeffs[dofs[i]];
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disc_annulus;

    #[test]
    fn p2_basis_is_nodal_and_reproduces_quadratics() {
        let el = Element::new([[0.1, 0.2], [1.3, 0.4], [0.5, 1.1]]);
        let nodes_bary = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
        ];
        for (i, l) in nodes_bary.iter().enumerate() {
            let v = p2_values(l);
            for (j, vj) in v.iter().enumerate() {
                assert!((vj - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        // f = x^2 - 3xy + y, interpolated at nodes, gradient exact at any point
        let f = |p: Point| p[0] * p[0] - 3.0 * p[0] * p[1] + p[1];
        let df = |p: Point| [2.0 * p[0] - 3.0 * p[1], -3.0 * p[0] + 1.0];
        let coeffs: Vec<f64> = nodes_bary.iter().map(|l| f(el.point(l))).collect();
        let dofs = [0, 1, 2, 3, 4, 5];
        let l = [0.2, 0.3, 0.5];
        let grads = p2_gradients(&el, &l);
        let p = el.point(&l);
        assert!((p2_eval(&coeffs, &dofs, &l) - f(p)).abs() < 1e-13);
        let g = p2_eval_grad(&coeffs, &dofs, &grads);
        assert!((g[0] - df(p)[0]).abs() < 1e-12 && (g[1] - df(p)[1]).abs() < 1e-12);
        let hs = p2_hessians(&el);
        let mut hess = [[0.0; 2]; 2];
        for i in 0..6 {
            for r in 0..2 {
                for s in 0..2 {
                    hess[r][s] += hs[i][r][s] * coeffs[i];
                }
            }
        }
        assert!((hess[0][0] - 2.0).abs() < 1e-11);
        assert!((hess[0][1] + 3.0).abs() < 1e-11);
        assert!(hess[1][1].abs() < 1e-11);
    }

    #[test]
    fn dof_maps_partition_interface() {
        let mesh = build_disc_annulus(1.0, 2.0, 0.4).unwrap();
        let space = P2Space::new(&mesh);
        let outer = space.boundary_nodes(&mesh, EdgeTag::Outer);
        let iface = space.boundary_nodes(&mesh, EdgeTag::Interface);
        let fluid = p2_dofs(&space, &mesh, CellTag::Fluid, &outer);
        let elastic = p2_dofs(&space, &mesh, CellTag::Elastic, &[]);
        for &n in &iface {
            assert!(fluid.local(n).is_some() && elastic.local(n).is_some());
        }
        for &n in &outer {
            assert!(fluid.local(n).is_none());
        }
        // the two subdomains share exactly the interface nodes
        let shared = (0..space.n_nodes())
            .filter(|&n| fluid.local(n).is_some() && elastic.local(n).is_some())
            .count();
        assert_eq!(shared, iface.len());
        assert_eq!(
            space.n_nodes(),
            mesh.nodes.len() + mesh.cells.len() + mesh.nodes.len() - 1,
            "Euler: edges = cells + vertices - 1 for a disc"
        );
    }
}
