use hardylab_core::sharpness::checks::laplacian_check;
use hardylab_core::*;
use proptest::prelude::*;

fn models() -> Vec<ModelSpace> {
    vec![
        ModelSpace::euclidean_point(3).unwrap(),
        ModelSpace::euclidean_subspace(4, 2).unwrap(),
        ModelSpace::cylinder_section(2).unwrap(),
        ModelSpace::cylinder_axis(1).unwrap(),
        ModelSpace::cylinder_axis(4).unwrap(),
        ModelSpace::hemisphere(2).unwrap(),
        ModelSpace::hemisphere(5).unwrap(),
        ModelSpace::torus_subtorus(2, 1, 1.0).unwrap(),
        ModelSpace::torus_subtorus(3, 1, 2.0).unwrap(),
        ModelSpace::torus_subtorus(5, 2, 1.5).unwrap(),
    ]
}

proptest! {
    #[test]
    fn laplacian_is_log_derivative_of_density(mi in 0usize..10, frac in 0.05..0.95f64) {
        let model = models()[mi];
        let hi = if model.r_max.is_finite() { model.r_max } else { 5.0 };
        let t = frac * hi;
        let h = 1e-5 * hi;
        let fd = (model.density(t + h).unwrap().ln() - model.density(t - h).unwrap().ln()) / (2.0 * h);
        let lap = model.laplacian_r(t).unwrap();
        prop_assert!((fd - lap).abs() <= 1e-5 * (1.0 + lap.abs()), "fd={fd} lap={lap}");
    }

    #[test]
    fn density_is_positive_and_bounded_by_flat(mi in 0usize..10, frac in 0.01..0.99f64) {
        let model = models()[mi];
        let hi = if model.r_max.is_finite() { model.r_max } else { 5.0 };
        let t = frac * hi;
        let d = model.density(t).unwrap();
        prop_assert!(d > 0.0);
        prop_assert!(d <= t.powi(model.k() as i32 - 1) * (1.0 + 1e-12));
    }
}

#[test]
fn closed_form_examples() {
    let torus = ModelSpace::torus_subtorus(2, 1, 1.0).unwrap();
    assert_eq!(torus.density(0.5).unwrap(), 1.0);
    assert_eq!(ModelSpace::cylinder_axis(1).unwrap().density(0.3).unwrap(), 1.0);
    let h = ModelSpace::hemisphere(2).unwrap();
    assert!((h.density(std::f64::consts::FRAC_PI_3).unwrap() - 0.5).abs() < 1e-15);
    assert!(h.density(2.0).is_err());
}

#[test]
fn laplacian_bounds_on_all_models() {
    for m in models() {
        let c = laplacian_check(&m, 1000).unwrap();
        assert!(c.passed, "{}: {}", c.model_id, c.max_excess);
    }
}
