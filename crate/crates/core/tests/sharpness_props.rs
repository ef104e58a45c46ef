use hardylab_core::functionals::*;
use hardylab_core::sharpness::*;
use hardylab_core::*;

#[test]
fn rayleigh_gap_shrinks_with_grid() {
    let model = ModelSpace::torus_subtorus(2, 1, 1.0).unwrap();
    let params = HardyParams::for_model(&model, 2.0, -2.0).unwrap();
    let spec = QuadratureSpec::default();
    let coarse = rayleigh_descent(&model, &params, 256, &spec).unwrap();
    let fine = rayleigh_descent(&model, &params, 1024, &spec).unwrap();
    for r in [&coarse, &fine] {
        assert!(r.inf_estimate >= 0.25);
        assert!(r.certified_quotient >= 0.25 - r.certified_error);
    }
    assert!(fine.inf_estimate - 0.25 <= coarse.inf_estimate - 0.25 + 1e-3);
    assert!(fine.inf_estimate <= 0.25 * 1.03);
}

#[test]
fn rayleigh_is_scale_invariant() {
    let model = ModelSpace::torus_subtorus(2, 1, 1.0).unwrap();
    let params = HardyParams::for_model(&model, 2.0, -2.0).unwrap();
    let spec = QuadratureSpec::default();
    let opts = RayleighOptions { grid_size: 256, ..Default::default() };
    let u0: Vec<f64> = (0..=256).map(|i| (i as f64 * (256 - i) as f64).sqrt()).collect();
    let scaled: Vec<f64> = u0.iter().map(|v| 37.5 * v).collect();
    let a = rayleigh_descent_with(&model, &params, &opts, Some(&u0), &spec).unwrap();
    let b = rayleigh_descent_with(&model, &params, &opts, Some(&scaled), &spec).unwrap();
    assert!((a.inf_estimate - b.inf_estimate).abs() < 1e-9 * a.inf_estimate);
}

#[test]
fn flat_case_below_codimension() {
    let spec = QuadratureSpec::default();
    for model in [
        ModelSpace::euclidean_point(3).unwrap().with_radius(1.0).unwrap(),
        ModelSpace::torus_subtorus(3, 1, 1.0).unwrap(),
    ] {
        let params = HardyParams::for_model(&model, 1.5, -1.5).unwrap();
        let sharp = sharp_constant(&params);
        let r = rayleigh_descent(&model, &params, 1024, &spec).unwrap();
        assert!(r.inf_estimate >= sharp * 0.97 && r.inf_estimate <= sharp * 1.03, "{}", r.inf_estimate);
        let s = sweep_sharp_constant(&model, &params, &default_eps_ladder(), &spec).unwrap();
        assert!(s.verdicts.all_confirmed(), "{:?}", s.verdicts);
        assert!(s.rows.iter().all(|row| row.quotient > sharp));
    }
}

#[test]
fn sharp_sweep_pinches_between_envelope_and_constant() {
    let model = ModelSpace::torus_subtorus(2, 1, 1.0).unwrap();
    let params = HardyParams::for_model(&model, 2.0, -2.0).unwrap();
    let rep = sweep_sharp_constant(&model, &params, &default_eps_ladder(), &QuadratureSpec::default()).unwrap();
    for row in &rep.rows {
        assert!(row.quotient > 0.25);
        let c = (1.0 + row.epsilon) / 2.0;
        assert!(row.quotient < c * c);
        assert_eq!(row.envelope, Some(c * c));
    }
    assert!(rep.min_quotient > 0.25);
}

#[test]
fn sequential_and_parallel_sweeps_agree() {
    let model = ModelSpace::cylinder_section(1).unwrap();
    let params = HardyParams::for_model(&model, 2.0, -2.0).unwrap();
    let spec = QuadratureSpec::default();
    let run = |policy| {
        sweep_sharp_constant_with(&model, &params, &default_eps_ladder(), &spec, &SweepOptions { policy, ..Default::default() }).unwrap()
    };
    assert_eq!(run(ExecPolicy::Sequential), run(ExecPolicy::Parallel));
}

#[test]
fn remainder_sweep_needs_large_tube_scale() {
    let model = ModelSpace::cylinder_axis(1).unwrap();
    let params = HardyParams::for_model(&model, 2.0, -2.0).unwrap();
    let err = sweep_remainder(&model, &params, 1.0, &default_theta_ladder(2.0), &deep_eps_ladder(), &QuadratureSpec::default(), ExecPolicy::Sequential);
    assert!(err.is_err());
}

#[test]
fn gamma_below_two_collapses() {
    let model = ModelSpace::cylinder_axis(1).unwrap();
    let params = HardyParams::for_model(&model, 2.0, -2.0).unwrap();
    let d = 2.0 * hardylab_core::extremizers::taylor_threshold(&params).unwrap().cal_t * model.r_max;
    let g = gamma_test(&model, &params, d, 0.75, 1.5, &[1e-3, 1e-4, 1e-5, 1e-6], &QuadratureSpec::default(), ExecPolicy::Sequential).unwrap();
    assert!(g.confirmed, "{}", g.decrease_factor);
}
