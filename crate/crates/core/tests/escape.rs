use fsi_core::metric::{
    certify_escape, disc_boundary_samples, disc_interior_grid, DerivativeMode, EscapeThresholds,
    MetricField, MetricSpec, PerturbationTerm, VectorFieldH, Verdict,
};

fn perturbed_metric() -> MetricField {
    let term = |k: usize, powers: Vec<u32>| PerturbationTerm {
        row: k,
        col: k,
        coef: 0.1,
        powers,
    };
    MetricField::from_spec(
        2,
        MetricSpec::PolynomialPerturbation {
            terms: vec![term(0, vec![2, 0]), term(1, vec![0, 2])],
        },
    )
}

#[test]
fn flat_radial_field_on_unit_disc() {
    let interior = disc_interior_grid(&[0.0, 0.0], 1.0, 101);
    let boundary = disc_boundary_samples(&[0.0, 0.0], 1.0, 256);
    let m = MetricField::identity(2);
    let h = VectorFieldH::radial(&[0.0, 0.0]);
    let c = certify_escape(
        &m,
        &h,
        &interior,
        &boundary,
        EscapeThresholds::default(),
        DerivativeMode::Exact,
    )
    .unwrap();
    assert_eq!(c.verdict, Verdict::Certified);
    assert!((1.0 - 1e-9..=1.0).contains(&c.rho0), "{}", c.rho0);
    assert!((1.0 - 1e-9..=1.0).contains(&c.gamma0), "{}", c.gamma0);
    let neg = h.scaled(-1.0);
    let c = certify_escape(
        &m,
        &neg,
        &interior,
        &boundary,
        EscapeThresholds::default(),
        DerivativeMode::Exact,
    )
    .unwrap();
    assert_eq!(c.verdict, Verdict::Refuted);
    assert!((c.min_interior_eigenvalue + 1.0).abs() < 1e-12);
}

#[test]
fn diagonal_polynomial_metric_matches_brute_force() {
    // g = diag(1/(1+0.1x₁²), 1/(1+0.1x₂²)) depends on one variable per entry,
    // so ∇H is diagonal with generalized eigenvalues 1/(1+0.1x_k²).
    let interior = disc_interior_grid(&[0.0, 0.0], 1.0, 200);
    let boundary = disc_boundary_samples(&[0.0, 0.0], 1.0, 256);
    let brute = interior
        .iter()
        .flat_map(|x| {
            x.iter()
                .map(|&c| 1.0 / (1.0 + 0.1 * c * c))
                .collect::<Vec<_>>()
        })
        .fold(f64::INFINITY, f64::min);
    let h = VectorFieldH::radial(&[0.0, 0.0]);
    let m = perturbed_metric();
    let exact = certify_escape(
        &m,
        &h,
        &interior,
        &boundary,
        EscapeThresholds::default(),
        DerivativeMode::Exact,
    )
    .unwrap();
    assert!((exact.rho0 - brute).abs() < 1e-12, "{} {brute}", exact.rho0);
    // The grid misses (±1, 0), where the continuous minimum 1/1.1 sits.
    assert!(
        exact.rho0 >= 1.0 / 1.1 && exact.rho0 < 1.0 / 1.1 + 5e-3,
        "{}",
        exact.rho0
    );
    assert_eq!(exact.verdict, Verdict::Certified);
    let fd = certify_escape(
        &m,
        &h,
        &interior,
        &boundary,
        EscapeThresholds::default(),
        DerivativeMode::Central { step: 1e-4 },
    )
    .unwrap();
    assert!((fd.rho0 - brute).abs() < 1e-6);
}
