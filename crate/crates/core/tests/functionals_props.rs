use hardylab_core::functionals::*;
use hardylab_core::sharpness::checks::random_bumps;
use hardylab_core::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn models() -> Vec<ModelSpace> {
    vec![
        ModelSpace::cylinder_axis(1).unwrap(),
        ModelSpace::cylinder_axis(3).unwrap(),
        ModelSpace::hemisphere(2).unwrap(),
        ModelSpace::torus_subtorus(2, 1, 1.0).unwrap(),
        ModelSpace::torus_subtorus(4, 1, 1.0).unwrap(),
        ModelSpace::euclidean_point(3).unwrap().with_radius(2.0).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quotient_is_scale_invariant(seed in any::<u64>(), c in prop_oneof![-1e3..-1e-3, 1e-3..1e3f64], mi in 0usize..6) {
        let model = models()[mi];
        let params = HardyParams::for_model(&model, 2.0, -(model.k() as f64) - 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = RadialProfile::bumps(&random_bumps(&mut rng, model.r_max).parts).unwrap();
        let spec = QuadratureSpec::default();
        let q = hardy_quotient(&model, &params, &u, &spec).unwrap();
        let qc = hardy_quotient(&model, &params, &u.scaled(c), &spec).unwrap();
        prop_assert!((q - qc).abs() <= 1e-12 * q.abs(), "{q} vs {qc}");
    }

    #[test]
    fn quotient_stays_above_sharp_constant(
        seed in any::<u64>(),
        p in 1.2..4.0f64,
        delta in -2.0..-0.1f64,
        mi in 0usize..6,
    ) {
        let model = models()[mi];
        let k = model.k() as f64;
        let params = HardyParams::for_model(&model, p, p * delta - k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = RadialProfile::bumps(&random_bumps(&mut rng, model.r_max).parts).unwrap();
        let spec = QuadratureSpec::default();
        let parts = hardy_parts(&model, &params, &u, &spec).unwrap();
        let q = parts.quotient().unwrap();
        prop_assert!(q > sharp_constant(&params) - 1e-8 - parts.quotient_error(), "q={q} sharp={}", sharp_constant(&params));
    }

    #[test]
    fn improved_bound_on_random_bumps(seed in any::<u64>(), p in 1.5..3.5f64, delta in -1.5..-0.3f64) {
        let model = ModelSpace::cylinder_axis(1).unwrap();
        let params = HardyParams::for_model(&model, p, p * delta - 1.0).unwrap();
        let d = hardylab_core::extremizers::taylor_threshold(&params).unwrap().cal_t * model.r_max;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = RadialProfile::bumps(&random_bumps(&mut rng, model.r_max).parts).unwrap();
        let parts = improved_functional(&model, &params, &u, d, &QuadratureSpec::default()).unwrap();
        let c = remainder_constant(&params).unwrap();
        let slack = parts.functional.value - c * parts.remainder.value
            + parts.functional.error_estimate + c * parts.remainder.error_estimate + 1e-9;
        prop_assert!(slack >= 0.0, "slack={slack}");
    }
}

#[test]
fn constants_of_reference_cases() {
    let params = HardyParams::new(2.0, -2.0, 1).unwrap();
    assert_eq!(sharp_constant(&params), 0.25);
    assert_eq!(remainder_constant(&params).unwrap(), 0.25);
    let params = HardyParams::new(3.0, -4.0, 1).unwrap();
    assert!((remainder_constant(&params).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(log_hardy_constant(2.0, 0.0, 1.0).abs().powi(2), 0.25);
}

#[test]
fn p_at_most_one_names_the_precondition() {
    let err = HardyParams::new(1.0, -2.0, 1).unwrap_err();
    assert!(err.to_string().contains("p>1"));
}

#[test]
fn zero_profile_is_refused_for_quotient() {
    let model = ModelSpace::cylinder_axis(1).unwrap();
    let params = HardyParams::for_model(&model, 2.0, -2.0).unwrap();
    assert!(hardy_quotient(&model, &params, &RadialProfile::zero(), &QuadratureSpec::default()).is_err());
}
