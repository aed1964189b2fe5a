//! Structured polar mesh of an elastic disc inside a fluid annulus.
//!
//! Rings of nodes are joined by a deterministic "zipper" triangulation. The
//! interface ring is shared by both subdomains, so the interface is conforming
//! by construction.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{FsiError, Result};
use crate::quadrature::{compensated_sum, EdgeRule, QuadratureRule};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellTag {
    Fluid,
    Elastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeTag {
    Interface,
    Outer,
}

impl FromStr for CellTag {
    type Err = FsiError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fluid" => Ok(CellTag::Fluid),
            "elastic" => Ok(CellTag::Elastic),
            other => Err(FsiError::UnknownTag(other.to_string())),
        }
    }
}

impl FromStr for EdgeTag {
    type Err = FsiError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interface" => Ok(EdgeTag::Interface),
            "outer" => Ok(EdgeTag::Outer),
            other => Err(FsiError::UnknownTag(other.to_string())),
        }
    }
}

impl CellTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellTag::Fluid => "fluid",
            CellTag::Elastic => "elastic",
        }
    }
}

impl EdgeTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeTag::Interface => "interface",
            EdgeTag::Outer => "outer",
        }
    }
}

/// A tagged boundary facet. `normal` is the outward unit normal of the
/// elastic disc on the interface and of the fluid annulus on the outer ring.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: EdgeTag,
    pub normal: Point,
    pub length: f64,
}

/// An interface facet with the two cells sharing it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterfacePair {
    pub edge: usize,
    pub elastic_cell: usize,
    pub fluid_cell: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    pub r0: f64,
    pub r1: f64,
    pub nodes: Vec<Point>,
    pub cells: Vec<[usize; 3]>,
    pub cell_tags: Vec<CellTag>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub interface_pairs: Vec<InterfacePair>,
    pub h_max: f64,
}

fn ring(radius: f64, n: usize) -> Vec<Point> {
    (0..n)
        .map(|i| {
            let th = 2.0 * PI * i as f64 / n as f64;
            let (s, c) = th.sin_cos();
            [radius * c, radius * s]
        })
        .collect()
}

/// Triangulates the strip between an inner ring (`a`, `na` nodes starting at
/// `a0`) and an outer ring (`b`, `nb` nodes starting at `b0`).
fn zipper(a0: usize, na: usize, b0: usize, nb: usize, out: &mut Vec<[usize; 3]>) {
    let (mut i, mut j) = (0usize, 0usize);
    while i < na || j < nb {
        let advance_a = if i == na {
            false
        } else if j == nb {
            true
        } else {
            // compare next angles (i+1)/na vs (j+1)/nb exactly in integers
            (i + 1) * nb <= (j + 1) * na
        };
        let ai = a0 + i % na;
        let bj = b0 + j % nb;
        if advance_a {
            out.push([ai, bj, a0 + (i + 1) % na]);
            i += 1;
        } else {
            out.push([ai, bj, b0 + (j + 1) % nb]);
            j += 1;
        }
    }
}

pub fn signed_area(p: Point, q: Point, r: Point) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
}

/// Builds the disc (radius `r0`) in annulus (`r0 < r < r1`) mesh with target
/// size `h`.
pub fn build_disc_annulus(r0: f64, r1: f64, h: f64) -> Result<Mesh> {
    if !(r0 > 0.0 && r1 > r0 && h > 0.0 && h < r0)
        || !(r0.is_finite() && r1.is_finite() && h.is_finite())
    {
        return Err(FsiError::BadGeometry(format!(
            "need 0 < r0 < r1 and 0 < h < r0 (got r0={r0}, r1={r1}, h={h})"
        )));
    }
    let n_e = (r0 / h).ceil() as usize;
    let n_f = ((r1 - r0) / h).ceil() as usize;
    let arc = 2.0 * PI * r0 / (6 * n_e) as f64;

    let mut nodes: Vec<Point> = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    let mut ring_len = vec![1usize];
    let mut radii = vec![0.0];
    for k in 1..=n_e {
        let r = r0 * k as f64 / n_e as f64;
        let n = 6 * k;
        ring_start.push(nodes.len());
        ring_len.push(n);
        radii.push(r);
        nodes.extend(ring(if k == n_e { r0 } else { r }, n));
    }
    let interface_ring = n_e;
    let mut prev = 6 * n_e;
    for k in 1..=n_f {
        let r = if k == n_f {
            r1
        } else {
            r0 + (r1 - r0) * k as f64 / n_f as f64
        };
        let n = (6 * ((2.0 * PI * r / arc / 6.0).round() as usize)).max(prev);
        prev = n;
        ring_start.push(nodes.len());
        ring_len.push(n);
        radii.push(r);
        nodes.extend(ring(r, n));
    }

    let mut cells = Vec::new();
    let mut cell_tags = Vec::new();
    for i in 0..6 {
        cells.push([0, 1 + i, 1 + (i + 1) % 6]);
        cell_tags.push(CellTag::Elastic);
    }
    for k in 1..ring_len.len() - 1 {
        let before = cells.len();
        zipper(
            ring_start[k],
            ring_len[k],
            ring_start[k + 1],
            ring_len[k + 1],
            &mut cells,
        );
        let tag = if k < interface_ring {
            CellTag::Elastic
        } else {
            CellTag::Fluid
        };
        cell_tags.extend(std::iter::repeat(tag).take(cells.len() - before));
    }

    // edge -> adjacent cells
    let mut edge_cells: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    let mut h_max: f64 = 0.0;
    for (c, tri) in cells.iter().enumerate() {
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            edge_cells.entry((a.min(b), a.max(b))).or_default().push(c);
            let d =
                ((nodes[a][0] - nodes[b][0]).powi(2) + (nodes[a][1] - nodes[b][1]).powi(2)).sqrt();
            h_max = h_max.max(d);
        }
    }

    let mut boundary_edges = Vec::new();
    let mut interface_pairs = Vec::new();
    for (k, tag) in [
        (interface_ring, EdgeTag::Interface),
        (ring_len.len() - 1, EdgeTag::Outer),
    ] {
        let (s, n) = (ring_start[k], ring_len[k]);
        for i in 0..n {
            let (a, b) = (s + i, s + (i + 1) % n);
            let t = [nodes[b][0] - nodes[a][0], nodes[b][1] - nodes[a][1]];
            let length = (t[0] * t[0] + t[1] * t[1]).sqrt();
            let normal = [t[1] / length, -t[0] / length];
            let edge = boundary_edges.len();
            boundary_edges.push(BoundaryEdge {
                nodes: [a, b],
                tag,
                normal,
                length,
            });
            if tag == EdgeTag::Interface {
                let adj = &edge_cells[&(a.min(b), a.max(b))];
                let elastic_cell = *adj
                    .iter()
                    .find(|&&c| cell_tags[c] == CellTag::Elastic)
                    .expect("elastic side");
                let fluid_cell = *adj
                    .iter()
                    .find(|&&c| cell_tags[c] == CellTag::Fluid)
                    .expect("fluid side");
                interface_pairs.push(InterfacePair {
                    edge,
                    elastic_cell,
                    fluid_cell,
                });
            }
        }
    }

    let mesh = Mesh {
        dim: 2,
        r0,
        r1,
        nodes,
        cells,
        cell_tags,
        boundary_edges,
        interface_pairs,
        h_max,
    };
    debug_assert!(mesh.min_signed_area() > 0.0);
    Ok(mesh)
}

impl Mesh {
    pub fn cell_points(&self, c: usize) -> [Point; 3] {
        let t = self.cells[c];
        [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]]
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        let [p, q, r] = self.cell_points(c);
        signed_area(p, q, r)
    }

    pub fn min_signed_area(&self) -> f64 {
        (0..self.cells.len())
            .map(|c| self.cell_area(c))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn cells_with_tag(&self, tag: CellTag) -> impl Iterator<Item = usize> + '_ {
        (0..self.cells.len()).filter(move |&c| self.cell_tags[c] == tag)
    }

    pub fn edges_with_tag(&self, tag: EdgeTag) -> impl Iterator<Item = usize> + '_ {
        (0..self.boundary_edges.len()).filter(move |&e| self.boundary_edges[e].tag == tag)
    }

    /// Node indices lying on boundary facets with the given tag, ascending.
    pub fn boundary_nodes(&self, tag: EdgeTag) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .edges_with_tag(tag)
            .flat_map(|e| self.boundary_edges[e].nodes)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Plain-text dump: `node i x y`, `cell i n1 n2 n3 tag`, `edge i n1 n2 tag`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "node {i} {:.17e} {:.17e}", p[0], p[1]);
        }
        for (i, (c, t)) in self.cells.iter().zip(&self.cell_tags).enumerate() {
            let _ = writeln!(s, "cell {i} {} {} {} {}", c[0], c[1], c[2], t.as_str());
        }
        for (i, e) in self.boundary_edges.iter().enumerate() {
            let _ = writeln!(
                s,
                "edge {i} {} {} {}",
                e.nodes[0],
                e.nodes[1],
                e.tag.as_str()
            );
        }
        s
    }
}

/// Maps barycentric coordinates on cell `c` to a physical point.
pub fn barycentric_point(pts: &[Point; 3], l: &[f64; 3]) -> Point {
    [
        l[0] * pts[0][0] + l[1] * pts[1][0] + l[2] * pts[2][0],
        l[0] * pts[0][1] + l[1] * pts[1][1] + l[2] * pts[2][1],
    ]
}

/// `∫_{Ω_tag} f` by composite quadrature.
pub fn integrate_domain<F>(mesh: &Mesh, tag: CellTag, integrand: F, rule: &QuadratureRule) -> f64
where
    F: Fn(Point) -> f64 + Sync,
{
    let cells: Vec<usize> = mesh.cells_with_tag(tag).collect();
    let parts: Vec<f64> = cells
        .par_iter()
        .map(|&c| {
            let pts = mesh.cell_points(c);
            let jac = 2.0 * signed_area(pts[0], pts[1], pts[2]);
            jac * rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(l, w)| w * integrand(barycentric_point(&pts, l)))
                .sum::<f64>()
        })
        .collect();
    compensated_sum(parts)
}

/// `∫_{Γ_tag} f(x, ν) dσ` by composite Gauss quadrature on the facets.
pub fn integrate_boundary<F>(mesh: &Mesh, tag: EdgeTag, integrand: F, rule: &EdgeRule) -> f64
where
    F: Fn(Point, Point) -> f64 + Sync,
{
    let edges: Vec<usize> = mesh.edges_with_tag(tag).collect();
    let parts: Vec<f64> = edges
        .par_iter()
        .map(|&e| {
            let be = &mesh.boundary_edges[e];
            let (a, b) = (mesh.nodes[be.nodes[0]], mesh.nodes[be.nodes[1]]);
            be.length
                * rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(s, w)| {
                        let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                        w * integrand(x, be.normal)
                    })
                    .sum::<f64>()
        })
        .collect();
    compensated_sum(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_geometry() {
        for (r0, r1, h) in [
            (1.0, 0.5, 0.1),
            (0.0, 1.0, 0.1),
            (1.0, 2.0, 1.5),
            (1.0, 2.0, -0.1),
        ] {
            assert!(matches!(
                build_disc_annulus(r0, r1, h),
                Err(FsiError::BadGeometry(_))
            ));
        }
    }

    #[test]
    fn construction_properties() {
        let h = 0.5;
        let m = build_disc_annulus(1.0, 2.0, h).unwrap();
        assert!(m.min_signed_area() > 0.0);
        for p in &m.nodes {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!(r <= 2.0 + h);
        }
        for n in m.boundary_nodes(EdgeTag::Interface) {
            let p = m.nodes[n];
            assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() <= 1e-12);
        }
        let finer = build_disc_annulus(1.0, 2.0, 0.25).unwrap();
        assert!(finer.cells.len() > m.cells.len());
    }

    #[test]
    fn interface_is_conforming() {
        let m = build_disc_annulus(1.0, 2.0, 0.3).unwrap();
        let n_iface = m.edges_with_tag(EdgeTag::Interface).count();
        assert_eq!(m.interface_pairs.len(), n_iface);
        for pair in &m.interface_pairs {
            let e = &m.boundary_edges[pair.edge];
            for cell in [pair.elastic_cell, pair.fluid_cell] {
                let tri = m.cells[cell];
                assert!(e.nodes.iter().all(|n| tri.contains(n)));
            }
            assert_eq!(m.cell_tags[pair.elastic_cell], CellTag::Elastic);
            assert_eq!(m.cell_tags[pair.fluid_cell], CellTag::Fluid);
            // normal points away from the disc centre
            let a = m.nodes[e.nodes[0]];
            assert!(a[0] * e.normal[0] + a[1] * e.normal[1] > 0.0);
        }
        // every edge is shared by at most two cells, exactly one per side on Γ_c
        let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for tri in &m.cells {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        assert!(count.values().all(|&c| c <= 2));
        let boundary_count = count.values().filter(|&&c| c == 1).count();
        assert_eq!(boundary_count, m.edges_with_tag(EdgeTag::Outer).count());
    }

    #[test]
    fn mesh_is_deterministic() {
        let a = build_disc_annulus(1.0, 2.0, 0.2).unwrap();
        let b = build_disc_annulus(1.0, 2.0, 0.2).unwrap();
        assert_eq!(a.dump(), b.dump());
    }

    #[test]
    fn unknown_tags_are_rejected() {
        assert!(matches!(
            "solid".parse::<CellTag>(),
            Err(FsiError::UnknownTag(_))
        ));
        assert!(matches!(
            "inner".parse::<EdgeTag>(),
            Err(FsiError::UnknownTag(_))
        ));
        assert_eq!("fluid".parse::<CellTag>().unwrap(), CellTag::Fluid);
        assert_eq!("outer".parse::<EdgeTag>().unwrap(), EdgeTag::Outer);
    }

    #[test]
    fn zero_integrand_is_exactly_zero() {
        let m = build_disc_annulus(1.0, 2.0, 0.3).unwrap();
        assert_eq!(
            integrate_domain(&m, CellTag::Fluid, |_| 0.0, &QuadratureRule::default()),
            0.0
        );
        assert_eq!(
            integrate_boundary(&m, EdgeTag::Interface, |_, _| 0.0, &EdgeRule::default()),
            0.0
        );
    }
}
