use hardylab_core::extremizers::*;
use hardylab_core::functionals::*;
use hardylab_core::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn taylor_invariants_hold_on_dense_grid(p in 1.05..5.0f64, delta in prop_oneof![-3.0..-0.1, 0.1..3.0f64], k in 1usize..6) {
        let params = HardyParams::new(p, p * delta - k as f64, k).unwrap();
        let tc = taylor_threshold(&params).unwrap();
        prop_assert!(tc.frak_t > 0.0 && tc.frak_t <= T_CAP);
        prop_assert!(tc.cal_t > 1.0);
        let f = TaylorFunction { p, delta: params.delta, a: tc.a };
        for i in 0..=1000 {
            let t = tc.frak_t * i as f64 / 1000.0;
            prop_assert!(f.q(t) > 0.0);
            prop_assert!(f.f_third(t) > -1e-9 * f.f_third(0.0).abs());
            prop_assert!(f.f_minus_one(t) >= f.quadratic_floor(t) - 1e-12 * (1.0 + f.quadratic_floor(t)));
        }
    }

    #[test]
    fn v_epsilon_quotient_is_sandwiched(eps in 0.01..0.3f64, ln_s in -3.0..-0.5f64) {
        let model = ModelSpace::cylinder_axis(1).unwrap();
        let params = HardyParams::for_model(&model, 2.0, -2.0).unwrap();
        let fam = VEpsilonFamily::distance_ln(&params, eps, ln_s, model.r_max).unwrap();
        let u = truncated_v_epsilon(&fam).unwrap();
        let q = hardy_quotient(&model, &params, &u, &QuadratureSpec::default()).unwrap();
        prop_assert!(q > sharp_constant(&params));
        prop_assert!(q < fam.envelope(params.p), "q={q} envelope={}", fam.envelope(params.p));
    }
}

#[test]
fn envelope_of_reference_family() {
    let params = HardyParams::new(2.0, -2.0, 1).unwrap();
    let c = c_of(&params, 0.1);
    assert!((c - 0.55).abs() < 1e-15);
}

#[test]
fn j_alpha_is_bounded_below_minus_one() {
    let model = ModelSpace::torus_subtorus(2, 1, 1.0).unwrap();
    let spec = QuadratureSpec::default();
    let vals: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&e| j_alpha(&model, -2.0, e, 2.0, 2.0, CutoffSpec { eta: 1.0 }, &spec).unwrap().value)
        .collect();
    assert!(vals[0] < vals[1] && vals[1] < vals[2], "{vals:?}");
    assert!(vals[2] - vals[1] < 0.2 * (vals[1] - vals[0]), "{vals:?}");
    assert!(vals.iter().all(|v| v.is_finite() && *v > 0.0));
}

#[test]
fn u_epsilon_needs_admissible_theta() {
    let params = HardyParams::new(2.0, -2.0, 1).unwrap();
    assert!(UEpsilonFamily::new(params, 0.1, 0.4, 10.0, CutoffSpec { eta: 1.0 }).is_err());
    assert!(UEpsilonFamily::new(params, 0.1, 0.75, 10.0, CutoffSpec { eta: 1.0 }).is_ok());
}
