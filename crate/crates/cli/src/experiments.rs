//! The individual experiments behind each subcommand.

use hardylab_core::extremizers::taylor_threshold;
use hardylab_core::functionals::{log_hardy_constant, remainder_constant, sharp_constant, HardyParams};
use hardylab_core::jacobi::{dominance_trials, newton_trials};
use hardylab_core::sharpness::checks::{
    improved_bump_trials, laplacian_check, log_integral_trials, pointwise_trials, taylor_trials, RNG_ALGORITHM,
};
use hardylab_core::sharpness::{
    deep_eps_ladder, default_eps_ladder, default_theta_ladder, gamma_test, rayleigh_descent, sweep_remainder,
    sweep_sharp_constant_with, GammaReport, RemainderReport, SweepOptions, SweepReport, SHARP_REL_TOL,
};
use hardylab_core::{ExecPolicy, HardyError, ModelSpace, QuadratureSpec};

use crate::config::{Experiment, RunConfig};
use crate::report::{fmt_f64, fmt_human, fmt_opt, Outcome, Table};
use crate::RunError;

pub const JACOBI_TRIALS: usize = 500;
pub const JACOBI_CURVATURES: [f64; 3] = [0.0, 0.5, 1.0];
pub const NEWTON_TRIALS: usize = 10_000;
pub const BUMP_TRIALS: usize = 200;
pub const TAYLOR_TRIALS: usize = 20;
pub const TAYLOR_GRID: usize = 1000;
pub const LAPLACIAN_GRID: usize = 1000;
pub const RAYLEIGH_TOL: f64 = 0.03;
pub const GAMMA: f64 = 1.5;
pub const GAMMA_LADDER: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];

pub fn policy(cfg: &RunConfig) -> ExecPolicy {
    if cfg.sequential {
        ExecPolicy::Sequential
    } else {
        ExecPolicy::Parallel
    }
}

/// Per-experiment seed derived from the run seed.
pub fn sub_seed(seed: u64, salt: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(salt)
}

fn model_and_params(cfg: &RunConfig) -> Result<(ModelSpace, HardyParams), RunError> {
    let model = cfg.model_space().ok_or_else(|| RunError::Config("this experiment needs --model".into()))?;
    let params = cfg.hardy_params().ok_or_else(|| RunError::Config("this experiment needs --p and --beta".into()))?;
    Ok((model, params))
}

/// `2 𝒯 r_max`, the default log base of the improved inequality.
pub fn default_d(model: &ModelSpace, params: &HardyParams) -> Result<f64, RunError> {
    if !model.r_max.is_finite() {
        return Err(RunError::Config("unbounded model: give --D explicitly".into()));
    }
    Ok(2.0 * taylor_threshold(params)?.cal_t * model.r_max)
}

pub fn sweep_table(name: &str, rep: &SweepReport) -> Table {
    let mut t = Table::new(name, &["epsilon", "quotient", "envelope", "constant", "gap"]);
    for r in &rep.rows {
        t.push(vec![fmt_f64(r.epsilon), fmt_f64(r.quotient), fmt_opt(r.envelope), fmt_f64(r.constant), fmt_f64(r.gap)]);
    }
    t
}

pub fn remainder_table(name: &str, rep: &RemainderReport) -> Table {
    let mut t = Table::new(name, &["theta", "epsilon", "functional", "remainder", "ratio", "constant", "gap"]);
    for r in &rep.rows {
        t.push(vec![
            fmt_f64(r.theta),
            fmt_f64(r.epsilon),
            fmt_f64(r.functional),
            fmt_f64(r.remainder),
            fmt_f64(r.ratio),
            fmt_f64(rep.predicted),
            fmt_f64(r.ratio - rep.predicted),
        ]);
    }
    t
}

pub fn gamma_table(name: &str, rep: &GammaReport) -> Table {
    let mut t = Table::new(name, &["epsilon", "functional", "remainder_gamma", "ratio"]);
    for r in &rep.rows {
        t.push(vec![fmt_f64(r.epsilon), fmt_f64(r.functional), fmt_f64(r.remainder), fmt_f64(r.ratio)]);
    }
    t
}

pub fn run_experiment(cfg: &RunConfig) -> Result<Outcome, RunError> {
    match cfg.experiment {
        Experiment::Constants => constants(cfg),
        Experiment::SweepSharp => sweep_sharp(cfg),
        Experiment::SweepRemainder => sweep_remainder_cmd(cfg),
        Experiment::Rayleigh => rayleigh(cfg),
        Experiment::CompareJacobi => compare_jacobi(cfg),
        Experiment::CheckInequalities => check_inequalities(cfg),
        Experiment::VerifyAll => crate::verify::verify_all(cfg),
    }
}

fn constants(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let params = cfg.hardy_params().ok_or_else(|| RunError::Config("constants needs --p, --beta and --k".into()))?;
    let mut out = Outcome::default();
    let sharp = sharp_constant(&params);
    out.line(format!("p={} beta={} k={} delta={}", params.p, params.beta, params.k, params.delta));
    out.line(format!("sharp={sharp}"));
    let mut table = Table::new("constants.csv", &["name", "value"]);
    table.push(vec!["sharp".into(), fmt_f64(sharp)]);
    let mut data = serde_json::Map::new();
    data.insert("params".into(), serde_json::to_value(params).unwrap());
    data.insert("sharp".into(), sharp.into());
    match remainder_constant(&params) {
        Ok(r) => {
            out.line(format!("remainder={r}"));
            table.push(vec!["remainder".into(), fmt_f64(r)]);
            data.insert("remainder".into(), r.into());
        }
        Err(e) => out.line(format!("remainder: {e}")),
    }
    match taylor_threshold(&params) {
        Ok(tc) => {
            out.line(format!("a={} frak_T={} T={}", tc.a, tc.frak_t, tc.cal_t));
            for (n, v) in [("a", tc.a), ("frak_T", tc.frak_t), ("cal_T", tc.cal_t)] {
                table.push(vec![n.into(), fmt_f64(v)]);
            }
            data.insert("taylor".into(), serde_json::to_value(tc).unwrap());
        }
        Err(e) => out.line(format!("taylor constants: {e}")),
    }
    if let Some(alpha) = cfg.alpha {
        let theta = log_hardy_constant(params.p, params.beta, alpha);
        let bound = theta.abs().powf(params.p);
        out.line(format!("log_hardy_theta={theta} log_hardy_constant={bound}"));
        table.push(vec!["log_hardy_constant".into(), fmt_f64(bound)]);
        data.insert("log_hardy_constant".into(), bound.into());
    }
    out.result("constants", &data);
    out.tables.push(table);
    Ok(out)
}

/// Records a sharp sweep under `name` with its verdicts.
pub fn record_sweep(out: &mut Outcome, name: &str, rep: &SweepReport) {
    let v = &rep.verdicts;
    out.line(format!(
        "{name}: {} family={} limit={} predicted={} min_quotient={} (upper bound on the infimum; proven lower bound {})",
        rep.model_id,
        rep.family.name(),
        rep.fitted_limit,
        rep.predicted,
        rep.min_quotient,
        rep.predicted
    ));
    out.verdict(
        &format!("{name}.sharp_constant"),
        v.sharp_constant_confirmed == Some(true) && !v.inconclusive,
        format!(
            "fitted limit {} vs {} (rel tol {}){}",
            rep.fitted_limit,
            rep.predicted,
            rep.rel_tol,
            if v.inconclusive { ", inconclusive: non-monotone ladder" } else { "" }
        ),
    );
    out.verdict(
        &format!("{name}.strictness"),
        v.strictness_confirmed == Some(true),
        format!("min quotient {} > {}", rep.min_quotient, rep.predicted),
    );
    if let Some(env) = v.envelope_confirmed {
        out.verdict(&format!("{name}.envelope"), env, "every quotient below c(eps)^p");
    }
    out.result(name, rep);
}

fn sweep_sharp(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let (model, params) = model_and_params(cfg)?;
    let ladder = cfg.eps_ladder.clone().unwrap_or_else(default_eps_ladder);
    let opts = SweepOptions {
        family: None,
        rel_tol: cfg.tol.unwrap_or(SHARP_REL_TOL),
        policy: policy(cfg),
    };
    let rep = sweep_sharp_constant_with(&model, &params, &ladder, &QuadratureSpec::default(), &opts)?;
    let mut out = Outcome::default();
    record_sweep(&mut out, "sweep_sharp", &rep);
    out.tables.push(sweep_table("sweep_sharp.csv", &rep));
    Ok(out)
}

pub fn record_remainder(out: &mut Outcome, name: &str, rep: &RemainderReport) {
    out.line(format!(
        "{name}: {} D={} extrapolated={} predicted={} theta fits={:?}",
        rep.model_id,
        rep.d,
        rep.extrapolated,
        rep.predicted,
        rep.theta_fits.iter().map(|f| (f.theta, f.limit)).collect::<Vec<_>>()
    ));
    out.verdict(
        &format!("{name}.remainder_constant"),
        rep.verdicts.remainder_confirmed == Some(true),
        format!("extrapolated {} vs {} (rel tol {})", rep.extrapolated, rep.predicted, rep.rel_tol),
    );
    out.verdict(
        &format!("{name}.lower_bound"),
        rep.lower_bound_holds,
        format!("all ratios >= {} - tol", rep.predicted),
    );
    out.result(name, rep);
}

pub fn record_gamma(out: &mut Outcome, name: &str, rep: &GammaReport) {
    out.verdict(
        name,
        rep.confirmed,
        format!(
            "gamma={}: ratio fell {}x over {} decades (need {}x)",
            rep.gamma, rep.decrease_factor, rep.decades, rep.required_factor
        ),
    );
    out.result(name, rep);
}

fn sweep_remainder_cmd(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let (model, params) = model_and_params(cfg)?;
    let d = match cfg.d {
        Some(d) => d,
        None => default_d(&model, &params)?,
    };
    let thetas = cfg.theta.clone().unwrap_or_else(|| default_theta_ladder(params.p));
    let eps = cfg.eps_ladder.clone().unwrap_or_else(deep_eps_ladder);
    let spec = QuadratureSpec::default();
    let rep = sweep_remainder(&model, &params, d, &thetas, &eps, &spec, policy(cfg))?;
    let g = gamma_test(&model, &params, d, 1.5 / params.p, GAMMA, &GAMMA_LADDER, &spec, policy(cfg))?;
    let mut out = Outcome::default();
    record_remainder(&mut out, "sweep_remainder", &rep);
    record_gamma(&mut out, "gamma_test", &g);
    out.tables.push(remainder_table("sweep_remainder.csv", &rep));
    out.tables.push(gamma_table("gamma_test.csv", &g));
    Ok(out)
}

fn rayleigh(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let (model, params) = model_and_params(cfg)?;
    let grid = cfg.grid.unwrap_or(1024);
    let tol = cfg.tol.unwrap_or(RAYLEIGH_TOL);
    let r = rayleigh_descent(&model, &params, grid, &QuadratureSpec::default())?;
    let sharp = sharp_constant(&params);
    let mut out = Outcome::default();
    out.line(format!(
        "rayleigh: {} grid={grid} window={} inf_estimate={} certified={} (+-{}) sharp={sharp} iterations={} converged={}",
        model.id(),
        r.window,
        r.inf_estimate,
        r.certified_quotient,
        fmt_human(r.certified_error),
        r.iterations,
        r.converged
    ));
    out.verdict(
        "rayleigh.lower_bound",
        r.inf_estimate >= sharp * (1.0 - tol),
        format!("inf {} >= {} - {}%", r.inf_estimate, sharp, 100.0 * tol),
    );
    out.verdict(
        "rayleigh.approach",
        r.inf_estimate <= sharp * (1.0 + tol),
        format!("inf {} within {}% above {}", r.inf_estimate, 100.0 * tol, sharp),
    );
    if !r.converged {
        out.verdict("rayleigh.converged", false, "iteration budget exhausted");
    }
    let mut t = Table::new("rayleigh_profile.csv", &["ln_r", "g"]);
    let h = r.window / grid as f64;
    for (i, g) in r.g.iter().enumerate() {
        t.push(vec![fmt_f64(r.ln_outer - r.window + i as f64 * h), fmt_f64(*g)]);
    }
    out.tables.push(t);
    out.result(
        "rayleigh",
        &serde_json::json!({
            "model_id": model.id(),
            "grid_size": r.grid_size,
            "window": r.window,
            "ln_outer": r.ln_outer,
            "inf_estimate": r.inf_estimate,
            "certified_quotient": r.certified_quotient,
            "certified_error": r.certified_error,
            "iterations": r.iterations,
            "converged": r.converged,
            "sharp_constant": sharp,
        }),
    );
    Ok(out)
}

pub fn jacobi_outcome(out: &mut Outcome, seed: u64, policy: ExecPolicy) -> Result<(), RunError> {
    let dom = dominance_trials(sub_seed(seed, 7), JACOBI_TRIALS, &JACOBI_CURVATURES, policy)?;
    let newton = newton_trials(sub_seed(seed, 8), NEWTON_TRIALS)?;
    out.verdict(
        "jacobi.dominance",
        dom.violations == 0 && dom.min_slack >= dom.slack_floor,
        format!("{} trials, {} violations, min slack {}", dom.trials, dom.violations, fmt_human(dom.min_slack)),
    );
    out.verdict(
        "jacobi.newton_chain",
        newton.violations == 0,
        format!("{} vectors, {} violations", newton.trials, newton.violations),
    );
    let mut t = Table::new("jacobi_dominance.csv", &["trial", "m", "n", "curvature", "perturbed", "min_slack", "focal_time"]);
    for (i, o) in dom.outcomes.iter().enumerate() {
        t.push(vec![
            i.to_string(),
            o.case.m.to_string(),
            o.case.n.to_string(),
            fmt_f64(o.case.k_curv),
            o.case.perturbed.to_string(),
            fmt_f64(o.min_slack),
            fmt_opt(o.focal_time),
        ]);
    }
    out.tables.push(t);
    out.result(
        "jacobi",
        &serde_json::json!({
            "rng": RNG_ALGORITHM,
            "trials": dom.trials,
            "violations": dom.violations,
            "min_slack": dom.min_slack,
            "slack_floor": dom.slack_floor,
            "newton": newton,
        }),
    );
    Ok(())
}

fn compare_jacobi(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    jacobi_outcome(&mut out, cfg.seed, policy(cfg))?;
    Ok(out)
}

fn check_inequalities(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let model = match cfg.model_space() {
        Some(m) => m,
        None => ModelSpace::cylinder_axis(1)?,
    };
    let params = match cfg.hardy_params() {
        Some(p) => p,
        None => HardyParams::for_model(&model, 2.0, -(model.k() as f64) - 1.0)?,
    };
    let spec = QuadratureSpec::default();
    let pol = policy(cfg);
    let mut out = Outcome::default();
    let d = match cfg.d {
        Some(d) => d,
        None => default_d(&model, &params)?,
    };
    if params.delta < 0.0 {
        let rep = improved_bump_trials(&model, &params, d, sub_seed(cfg.seed, 3), BUMP_TRIALS, &spec, pol)?;
        out.verdict(
            "improved_inequality",
            rep.violations == 0,
            format!("{} bumps on {}, {} violations, min slack {}", rep.trials.len(), rep.model_id, rep.violations, rep.min_slack),
        );
        out.result("improved_inequality", &rep);
    } else {
        out.line("improved_inequality: skipped (needs delta < 0)");
    }
    let pw = pointwise_trials(sub_seed(cfg.seed, 4), 1000)?;
    out.verdict("pointwise_inequality", pw.violations == 0, format!("{} points, {} violations", pw.trials, pw.violations));
    out.result("pointwise_inequality", &pw);
    let ld = d.max(model.r_max.min(d));
    let li = log_integral_trials(&model, params.p, params.p, ld, sub_seed(cfg.seed, 5), 50, &spec, pol)?;
    out.verdict(
        "log_integral_inequality",
        li.violations == 0,
        format!("{} bumps, {} violations, min slack {}", li.trials, li.violations, li.min_slack),
    );
    out.result("log_integral_inequality", &li);
    let tt = taylor_trials(sub_seed(cfg.seed, 6), TAYLOR_TRIALS, TAYLOR_GRID)?;
    out.verdict("taylor_constants", tt.violations == 0, format!("{} parameter sets, {} violations", tt.trials.len(), tt.violations));
    out.result("taylor_constants", &tt);
    let lc = laplacian_check(&model, LAPLACIAN_GRID)?;
    out.verdict("laplacian_bound", lc.passed, format!("{}: max excess {}", lc.model_id, lc.max_excess));
    out.result("laplacian_bound", &lc);
    let mut t = Table::new("improved_trials.csv", &["check", "violations"]);
    for v in &out.verdicts {
        t.push(vec![v.name.clone(), (!v.passed as u8).to_string()]);
    }
    out.tables.push(t);
    Ok(out)
}

impl From<HardyError> for RunError {
    fn from(e: HardyError) -> Self {
        match e {
            HardyError::InvalidParameter(_) | HardyError::Domain(_) | HardyError::Refused(_) => RunError::Config(e.to_string()),
            other => RunError::Numeric(other),
        }
    }
}
