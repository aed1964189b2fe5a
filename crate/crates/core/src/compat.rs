//! Residuals of the zeroth and first order compatibility conditions of the
//! initial data. They are reported, never enforced.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::coupled::{conormal_of, InitialFields};
use crate::discretization::Discretization;
use crate::error::Result;
use crate::fields::VectorField;
use crate::fluid::solve_initial_pressure;
use crate::mesh::{integrate_boundary, EdgeTag, Point};
use crate::metric::MetricField;

/// `L²` boundary residuals of the compatibility conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    /// `w₁ − v₀ + γ (w₀)_{ν_Λ}` on Γ_c.
    pub transmission: f64,
    /// `(w₀)_{ν_Λ} − ∂v₀/∂ν` on Γ_c.
    pub flux: f64,
    /// `v₀` on Γ_f.
    pub no_slip: f64,
    /// `Δv₀ − ∇q₀` on Γ_f.
    pub wall_pressure: f64,
}

impl CompatibilityReport {
    pub fn max(&self) -> f64 {
        self.transmission
            .max(self.flux)
            .max(self.no_slip)
            .max(self.wall_pressure)
    }
}

fn norm_sq(v: [f64; 2]) -> f64 {
    v[0] * v[0] + v[1] * v[1]
}

fn normal_derivative(u: &dyn VectorField, x: Point, n: Point) -> [f64; 2] {
    let g = u.gradient(x);
    [
        g[0][0] * n[0] + g[0][1] * n[1],
        g[1][0] * n[0] + g[1][1] * n[1],
    ]
}

pub fn compatibility_report(
    disc: &Discretization,
    metric: &MetricField,
    gamma: f64,
    fields: &InitialFields,
) -> Result<CompatibilityReport> {
    let mesh = &disc.mesh;
    let rule = &disc.edge_rule;
    let (v0, w0, w1) = (fields.v0.as_ref(), fields.w0.as_ref(), fields.w1.as_ref());

    let transmission = integrate_boundary(
        mesh,
        EdgeTag::Interface,
        |x, n| {
            let (a, b, c) = (w1.value(x), v0.value(x), conormal_of(metric, w0, x, n));
            norm_sq([a[0] - b[0] + gamma * c[0], a[1] - b[1] + gamma * c[1]])
        },
        rule,
    )
    .sqrt();
    let flux = integrate_boundary(
        mesh,
        EdgeTag::Interface,
        |x, n| {
            let (c, d) = (conormal_of(metric, w0, x, n), normal_derivative(v0, x, n));
            norm_sq([c[0] - d[0], c[1] - d[1]])
        },
        rule,
    )
    .sqrt();
    let no_slip =
        integrate_boundary(mesh, EdgeTag::Outer, |x, _| norm_sq(v0.value(x)), rule).sqrt();

    // ∇q₀ is piecewise constant; locate the fluid cell of each wall facet.
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    for &c in &disc.fluid_cells {
        let t = mesh.cells[c];
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            owner.insert((a.min(b), a.max(b)), c);
        }
    }
    let conormal = |x: Point, n: Point| conormal_of(metric, w0, x, n);
    let q0 = solve_initial_pressure(disc, v0, &conormal)?;
    let mut wall = Vec::new();
    for e in mesh.edges_with_tag(EdgeTag::Outer) {
        let be = &mesh.boundary_edges[e];
        let key = (be.nodes[0].min(be.nodes[1]), be.nodes[0].max(be.nodes[1]));
        let c = owner[&key];
        let el = disc.element(c);
        let loc = disc.gather_p1(&disc.pressure, &q0, c);
        let mut gq = [0.0; 2];
        for k in 0..3 {
            gq[0] += loc[k] * el.grad_bary[k][0];
            gq[1] += loc[k] * el.grad_bary[k][1];
        }
        let (a, b) = (mesh.nodes[be.nodes[0]], mesh.nodes[be.nodes[1]]);
        for (s, w) in rule.points.iter().zip(&rule.weights) {
            let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let l = v0.laplacian(x);
            wall.push(w * be.length * norm_sq([l[0] - gq[0], l[1] - gq[1]]));
        }
    }
    let wall_pressure = crate::quadrature::compensated_sum(wall).sqrt();

    Ok(CompatibilityReport {
        transmission,
        flux,
        no_slip,
        wall_pressure,
    })
}
