use std::f64::consts::PI;

use fsi_core::coupled::CoupledState;
use fsi_core::diagnostics::energy_e;
use fsi_core::discretization::{p2_stiffness, Discretization};
use fsi_core::fluid::{
    a_from_flow_map, assemble_variable_stokes, divergence_residual, divergence_residual_on,
    solve_initial_pressure, AField, MapFloors,
};
use fsi_core::mesh::Point;
use fsi_core::metric::{MetricField, MetricSpec};
use fsi_core::wave::{assemble_wave_operators, conormal_trace, WaveOperators};

fn disc(h: f64) -> Discretization {
    Discretization::disc_annulus(1.0, 2.0, h).unwrap()
}

fn diag21() -> MetricField {
    MetricField::from_spec(
        2,
        MetricSpec::Diagonal {
            entries: vec![2.0, 1.0],
        },
    )
}

/// Deterministic pseudo-random vector.
fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed;
    (0..n)
        .map(|_| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect()
}

#[test]
fn stiffness_with_beta_is_sum_of_laplacian_and_mass() {
    let d = disc(0.3);
    let ops = assemble_wave_operators(&d, &MetricField::identity(2), 1.0).unwrap();
    let x = noise(ops.n(), 7);
    let lhs = ops.stiffness.quadratic(&x);
    let rhs = ops.stiffness_g.quadratic(&x) + ops.mass.quadratic(&x);
    assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
}

#[test]
fn anisotropic_gradient_energy_of_linear_displacement() {
    let m = diag21();
    for h in [0.3, 0.15] {
        let d = disc(h);
        let mut s = CoupledState::zeros(&d);
        s.w = d.interpolate(&d.elastic, |x| [x[0], 0.0]);
        let e = energy_e(&d, &m, 0.0, &s).unwrap();
        // Polygonal disc: area error is O(h²).
        assert!((e - PI).abs() < 2.0 * h * h, "h={h}: {e}");
    }
    // The same quantity through the assembled stiffness.
    let d = disc(0.15);
    let ops = assemble_wave_operators(&d, &m, 0.0).unwrap();
    let w = d.interpolate(&d.elastic, |x| [x[0], 0.0]);
    let e = 0.5 * WaveOperators::blocked_quadratic(&ops.stiffness_g, &w);
    let mut s = CoupledState::zeros(&d);
    s.w = w;
    assert!((e - energy_e(&d, &m, 0.0, &s).unwrap()).abs() < 1e-12);
}

#[test]
fn conormal_trace_examples() {
    let d = disc(0.2);
    let c = d.interpolate(&d.elastic, |_| [3.0, -1.5]);
    for t in conormal_trace(&d, &MetricField::identity(2), &c).unwrap() {
        assert!(t.value[0].abs() < 1e-12 && t.value[1].abs() < 1e-12);
    }
    let w = d.interpolate(&d.elastic, |x| [x[0], 0.0]);
    for (metric, scale) in [(MetricField::identity(2), 1.0), (diag21(), 2.0)] {
        for t in conormal_trace(&d, &metric, &w).unwrap() {
            assert!((t.value[0] - scale * t.normal[0]).abs() < 1e-10);
            assert!(t.value[1].abs() < 1e-12);
        }
    }
}

#[test]
fn identity_coefficient_gives_vector_laplacian() {
    let d = disc(0.2);
    let ops = assemble_variable_stokes(&d, &AField::identity(&d), 0.0).unwrap();
    let lap = p2_stiffness(&d, &d.fluid_cells, &d.fluid, |_, _, _| {
        Ok([[1.0, 0.0], [0.0, 1.0]])
    })
    .unwrap();
    assert!(ops.viscous.max_abs_diff(&lap) <= 1e-12);
}

#[test]
fn curl_fields_are_discretely_divergence_free() {
    let d = disc(0.2);
    let a = AField::identity(&d);
    let zero = vec![0.0; 2 * d.fluid.len()];
    assert_eq!(divergence_residual(&d, &zero, &a), 0.0);
    let rot = d.interpolate(&d.fluid_all, |x| [x[1], -x[0]]);
    assert!(divergence_residual_on(&d, &d.fluid_all, &rot, &a) <= 1e-12);
    // ψ = x₁²x₂ − x₂³/3 + x₁x₂: v = (∂₂ψ, −∂₁ψ) is quadratic, so P2-exact.
    let curl = d.interpolate(&d.fluid_all, |x| {
        [
            x[0] * x[0] - x[1] * x[1] + x[0],
            -(2.0 * x[0] * x[1] + x[1]),
        ]
    });
    assert!(divergence_residual_on(&d, &d.fluid_all, &curl, &a) <= 1e-10);
}

#[test]
fn viscous_block_is_lipschitz_in_the_coefficient() {
    let d = disc(0.3);
    let base = assemble_variable_stokes(&d, &AField::identity(&d), 0.0).unwrap();
    let n = noise(4 * AField::identity(&d).values.len(), 3);
    let perturbed = |eps: f64| {
        let mut a = AField::identity(&d);
        for (k, m) in a.values.iter_mut().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += eps * n[4 * k + 2 * i + j];
                }
            }
        }
        assemble_variable_stokes(&d, &a, 0.0)
            .unwrap()
            .viscous
            .max_abs_diff(&base.viscous)
    };
    let (e1, e2) = (perturbed(1e-3), perturbed(5e-4));
    let ratio = e1 / e2;
    assert!(e1 > 0.0 && (ratio - 2.0).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn homogeneous_initial_pressure_vanishes() {
    let d = disc(0.2);
    let q = solve_initial_pressure(&d, &fsi_core::fields::ZeroField, &|_: Point, _: Point| {
        [0.0, 0.0]
    })
    .unwrap();
    assert!(q.iter().all(|x| x.abs() < 1e-14));
}

#[test]
fn initial_pressure_with_unit_normal_flux() {
    // q = −1 on r = 1, ∂q/∂r = 0 on r = 2: the annulus solution is q ≡ −1.
    let d = disc(0.2);
    let q =
        solve_initial_pressure(&d, &fsi_core::fields::ZeroField, &|_: Point, n: Point| n).unwrap();
    let err = d.l2_error_p1(&d.pressure, &q, |_| -1.0);
    assert!(err < 1e-10, "{err}");
}

#[test]
fn rigid_rotation_step_preserves_volume() {
    let d = disc(0.2);
    let (omega, dt) = (1.0, 1e-6);
    let xi = d.interpolate(&d.fluid_all, |x| [dt * omega * x[1], -dt * omega * x[0]]);
    let a = a_from_flow_map(&d, &xi, MapFloors::default()).unwrap();
    assert!(a.max_det_deviation() <= 1e-10);
    // The discrete map reproduces the closed-form one-step map exactly.
    let eta = d.interpolate(&d.fluid_all, |x| {
        [x[0] + dt * omega * x[1], x[1] - dt * omega * x[0]]
    });
    let id = d.interpolate(&d.fluid_all, |x| x);
    for i in 0..xi.len() {
        assert!((id[i] + xi[i] - eta[i]).abs() < 1e-15);
    }
}
