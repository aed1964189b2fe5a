use std::sync::OnceLock;

use proptest::prelude::*;

use fsi_core::config::{parse_config_str, Mode, Preset, SimulationConfig};
use fsi_core::coupled::{CoupledSolver, CoupledState};
use fsi_core::diagnostics::{dissipation_d, energy_e, fit_exponential, total_x, EnergyRecord};
use fsi_core::metric::{
    certify_escape, disc_boundary_samples, disc_interior_grid, DerivativeMode, EscapeThresholds,
    MetricField, VectorFieldH, Verdict,
};
use fsi_core::output::{csv_row, energies_csv, parse_energies_csv};
use fsi_core::simulation::run_simulation;
use fsi_core::FsiError;

fn solver() -> &'static CoupledSolver {
    static S: OnceLock<CoupledSolver> = OnceLock::new();
    S.get_or_init(|| {
        CoupledSolver::from_config(&SimulationConfig::new(1.0, 2.0, 0.3, 0.01, 1.0)).unwrap()
    })
}

fn record(vals: [f64; 13], step: usize) -> EnergyRecord {
    EnergyRecord {
        step,
        t: vals[0],
        e: vals[1],
        d: vals[2],
        e1: vals[3],
        d1: vals[4],
        e2: vals[5],
        d2: vals[6],
        x: vals[7],
        r1: vals[8],
        r2: vals[9],
        interface_residual: vals[10],
        det_deviation: vals[11],
        ellipticity_min: vals[12],
        grad_v_sq: 0.0,
        grad_vt_sq: 0.0,
        central: true,
        int_d: 0.0,
        int_d_boundary: 0.0,
        int_d1: 0.0,
        int_d2: 0.0,
        int_r1: 0.0,
        int_r2: 0.0,
    }
}

fn any_finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
        -1e3..1e3f64,
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_json_round_trips(
        r0 in 0.5..2.0f64,
        gap in 0.2..2.0f64,
        gamma in 1e-3..1e3f64,
        beta in 1e-3..10.0f64,
        dt in 1e-4..0.1f64,
        t_end in 0.0..20.0f64,
        amp in -1.0..1.0f64,
        ale in any::<bool>(),
        preset in prop_oneof![Just(Preset::ElasticPulse), Just(Preset::Shear), Just(Preset::Combined)],
    ) {
        let mut cfg = SimulationConfig::new(r0, r0 + gap, 0.3 * r0, dt, t_end);
        cfg.physics.gamma = gamma;
        cfg.physics.beta = beta;
        cfg.physics.mode = if ale { Mode::Ale } else { Mode::Frozen };
        cfg.initial_data.preset = preset;
        cfg.initial_data.amplitude = amp;
        let text = serde_json::to_string(&cfg).unwrap();
        prop_assert_eq!(parse_config_str(&text).unwrap(), cfg);
    }

    #[test]
    fn nonpositive_gamma_is_rejected_by_key(gamma in -10.0..=0.0f64) {
        let text = format!(
            r#"{{"geometry":{{"r0":1,"r1":2,"h":0.2}},"time":{{"dt":0.01,"t_end":1}},"physics":{{"gamma":{gamma}}}}}"#
        );
        match parse_config_str(&text) {
            Err(FsiError::Validation(errs)) => prop_assert!(errs.iter().any(|e| e.contains("physics.gamma"))),
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }

    #[test]
    fn csv_is_round_trip_exact(rows in prop::collection::vec(prop::array::uniform13(any_finite()), 1..8)) {
        let records: Vec<EnergyRecord> = rows.iter().enumerate().map(|(k, v)| record(*v, k)).collect();
        let text = energies_csv(&records);
        prop_assert!(!text.contains('\r'));
        let parsed = parse_energies_csv(&text).unwrap();
        for (p, r) in parsed.iter().zip(&records) {
            let want = csv_row(r);
            for k in 0..13 {
                prop_assert_eq!(p[k].to_bits(), want[k].to_bits());
            }
        }
    }

    #[test]
    fn x_is_affine_in_the_gradient_weight(
        e in 0.0..1.0f64, e1 in 0.0..1.0f64, e2 in 0.0..1.0f64,
        gv in 0.0..1.0f64, gvt in 0.0..1.0f64, eps in 0.0..1.0f64,
    ) {
        prop_assert_eq!(total_x(e, e1, e2, gv, gvt, 0.0), e + e1 + e2);
        let diff = total_x(e, e1, e2, gv, gvt, 2.0 * eps) - total_x(e, e1, e2, gv, gvt, eps);
        prop_assert!((diff - eps * (gv + gvt)).abs() <= 1e-15 * (1.0 + e + e1 + e2 + gv + gvt));
    }

    #[test]
    fn exponential_fit_recovers_parameters(rate in 0.01..5.0f64, amp in 1e-6..1e6f64) {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| amp * (-rate * t).exp()).collect();
        let f = fit_exponential(&t, &y, [0.0, 5.0]).unwrap();
        prop_assert!((f.rate - rate).abs() <= 1e-9 * rate.max(1.0));
        prop_assert!((f.amplitude / amp - 1.0).abs() <= 1e-9);
        prop_assert!(f.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn scaled_radial_field_certificate(alpha in prop_oneof![-3.0..-0.1f64, 0.1..3.0f64]) {
        let interior = disc_interior_grid(&[0.0, 0.0], 1.0, 21);
        let boundary = disc_boundary_samples(&[0.0, 0.0], 1.0, 32);
        let h = VectorFieldH::radial(&[0.0, 0.0]).scaled(alpha);
        let c = certify_escape(
            &MetricField::identity(2), &h, &interior, &boundary,
            EscapeThresholds::default(), DerivativeMode::Exact,
        ).unwrap();
        prop_assert!((c.rho0 - alpha).abs() <= 1e-12 * alpha.abs().max(1.0));
        prop_assert_eq!(c.verdict, if alpha > 0.0 { Verdict::Certified } else { Verdict::Refuted });
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_and_dissipation_are_nonnegative(seed in any::<u64>(), gamma in 1e-3..1e3f64, scale in 1e-6..1e3f64) {
        let s = solver();
        let d = &s.disc;
        let mut st = CoupledState::zeros(d);
        let mut x = seed;
        let mut fill = |v: &mut Vec<f64>| for e in v.iter_mut() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *e = scale * (((x >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0);
        };
        fill(&mut st.v);
        fill(&mut st.w);
        fill(&mut st.wt);
        let m = MetricField::identity(2);
        prop_assert!(energy_e(d, &m, 1.0, &st).unwrap() >= 0.0);
        prop_assert!(s.energy(&st.v, &st.w, &st.wt) >= 0.0);
        prop_assert!(dissipation_d(d, &m, gamma, 1.0, &st).unwrap() >= 0.0);
        let dis = s.dissipation(&s.laplacian, &st.v, &st.wt);
        prop_assert!(dis.viscous >= 0.0 && dis.boundary >= 0.0);
        prop_assert!(s.grad_norm_sq(&st.v) >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn frozen_step_identity_holds_for_any_small_data(
        amp in 1e-4..1.0f64,
        gamma in 0.1..10.0f64,
        preset in prop_oneof![Just(Preset::ElasticPulse), Just(Preset::Shear), Just(Preset::Combined)],
    ) {
        let mut cfg = SimulationConfig::new(1.0, 2.0, 0.3, 0.02, 0.3);
        cfg.physics.gamma = gamma;
        cfg.initial_data.preset = preset;
        cfg.initial_data.amplitude = amp;
        let (_, out) = run_simulation(&cfg).unwrap();
        let e0 = out.initial_energy();
        prop_assert!(out.max_step_violation <= 1e-8 * e0);
        for r in &out.records {
            prop_assert!(r.e >= 0.0 && r.d >= 0.0);
            prop_assert!(r.e1 >= 0.0 && r.e2 >= 0.0 && r.x >= 0.0);
            prop_assert!(r.d1 >= 0.0 && r.d2 >= 0.0);
            prop_assert!(r.r1 == 0.0 && r.r2 == 0.0);
        }
    }
}
