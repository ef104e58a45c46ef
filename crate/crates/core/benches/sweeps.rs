use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hardylab_core::extremizers::taylor_threshold;
use hardylab_core::functionals::HardyParams;
use hardylab_core::sharpness::{
    deep_eps_ladder, default_eps_ladder, default_theta_ladder, sweep_remainder, sweep_sharp_constant_with, SweepOptions,
};
use hardylab_core::{ExecPolicy, ModelSpace, QuadratureSpec};

fn policies() -> [(&'static str, ExecPolicy); 2] {
    [("sequential", ExecPolicy::Sequential), ("parallel", ExecPolicy::Parallel)]
}

fn sharp_sweep(c: &mut Criterion) {
    let model = ModelSpace::torus_subtorus(2, 1, 1.0).unwrap();
    let params = HardyParams::for_model(&model, 2.0, -2.0).unwrap();
    let spec = QuadratureSpec::default();
    let ladder = default_eps_ladder();
    let mut group = c.benchmark_group("sweep_sharp_constant");
    for (name, policy) in policies() {
        let opts = SweepOptions { policy, ..Default::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sweep_sharp_constant_with(&model, &params, &ladder, &spec, &opts).unwrap())
        });
    }
    group.finish();
}

fn remainder_sweep(c: &mut Criterion) {
    let model = ModelSpace::cylinder_axis(1).unwrap();
    let params = HardyParams::for_model(&model, 2.0, -2.0).unwrap();
    let d = 2.0 * taylor_threshold(&params).unwrap().cal_t * model.r_max;
    let spec = QuadratureSpec::default();
    let thetas = default_theta_ladder(2.0);
    let eps = deep_eps_ladder();
    let mut group = c.benchmark_group("sweep_remainder");
    group.sample_size(20);
    for (name, policy) in policies() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sweep_remainder(&model, &params, d, &thetas, &eps, &spec, policy).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sharp_sweep, remainder_sweep);
criterion_main!(benches);
