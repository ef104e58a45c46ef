//! The acceptance suite behind `verify-all`.

use hardylab_core::extremizers::{taylor_threshold, CutoffSpec};
use hardylab_core::functionals::{sharp_constant, HardyParams};
use hardylab_core::sharpness::checks::{improved_bump_trials, laplacian_check, taylor_trials};
use hardylab_core::sharpness::{
    deep_eps_ladder, default_eps_ladder, default_theta_ladder, gamma_test, j_alpha_sweep, rayleigh_descent,
    sweep_log_hardy, sweep_remainder, sweep_sharp_constant_with, SweepOptions, SHARP_REL_TOL,
};
use hardylab_core::{ExecPolicy, ModelSpace, QuadratureSpec};

use crate::config::RunConfig;
use crate::experiments::{
    gamma_table, jacobi_outcome, policy, record_gamma, record_remainder, record_sweep, remainder_table, sub_seed,
    sweep_table, BUMP_TRIALS, GAMMA, GAMMA_LADDER, LAPLACIAN_GRID, TAYLOR_GRID, TAYLOR_TRIALS,
};
use crate::report::{fmt_f64, fmt_human, ErrorRecord, Outcome, Table};
use crate::RunError;

/// Summary of one acceptance criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub metric: String,
    pub value: f64,
    pub threshold: String,
    /// Verdicts, tables and results produced on the way.
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy)]
pub struct Ctx {
    pub seed: u64,
    pub policy: ExecPolicy,
}

type CriterionFn = fn(&Ctx) -> Result<CriterionResult, RunError>;

pub fn criteria() -> Vec<(u8, &'static str, CriterionFn)> {
    vec![
        (1, "sharp-constant sweep", c1_sharp),
        (2, "envelope pinch", c2_envelope),
        (3, "improved inequality", c3_improved),
        (4, "remainder-constant sharpness", c4_remainder),
        (5, "gamma trichotomy", c5_gamma),
        (6, "J_alpha asymptotics", c6_j_alpha),
        (7, "comparison dominance", c7_jacobi),
        (8, "laplacian bounds", c8_laplacian),
        (9, "flat case p<k", c9_flat),
        (10, "log-Hardy", c10_log_hardy),
        (11, "Taylor constants", c11_taylor),
        (12, "determinism", c12_determinism),
    ]
}

fn finish(id: u8, name: &'static str, metric: &str, value: f64, threshold: String, outcome: Outcome) -> CriterionResult {
    CriterionResult {
        id,
        name,
        passed: outcome.all_passed(),
        metric: metric.into(),
        value,
        threshold,
        outcome,
    }
}

fn spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn sharp_models() -> Result<Vec<(&'static str, ModelSpace)>, RunError> {
    Ok(vec![
        ("cylinder_section", ModelSpace::cylinder_section(1)?),
        ("torus", ModelSpace::torus_subtorus(2, 1, 1.0)?),
    ])
}

fn c1_sharp(ctx: &Ctx) -> Result<CriterionResult, RunError> {
    let mut out = Outcome::default();
    let mut worst = 0.0f64;
    for (tag, model) in sharp_models()? {
        let params = HardyParams::for_model(&model, 2.0, -2.0)?;
        let opts = SweepOptions { family: None, rel_tol: SHARP_REL_TOL, policy: ctx.policy };
        let rep = sweep_sharp_constant_with(&model, &params, &default_eps_ladder(), &spec(), &opts)?;
        worst = worst.max((rep.fitted_limit - rep.predicted).abs() / rep.predicted);
        let all_above = rep.rows.iter().all(|r| r.quotient > 0.25);
        out.verdict(&format!("c1.{tag}.strictly_above"), all_above, format!("min quotient {}", rep.min_quotient));
        record_sweep(&mut out, &format!("c1.{tag}"), &rep);
        out.tables.push(sweep_table(&format!("c1_{tag}.csv"), &rep));
    }
    Ok(finish(1, "sharp-constant sweep", "max_rel_error_of_limit", worst, format!("{SHARP_REL_TOL}"), out))
}

fn c2_envelope(ctx: &Ctx) -> Result<CriterionResult, RunError> {
    let mut out = Outcome::default();
    let mut min_margin = f64::INFINITY;
    for (tag, model) in sharp_models()? {
        let params = HardyParams::for_model(&model, 2.0, -2.0)?;
        let opts = SweepOptions { family: None, rel_tol: SHARP_REL_TOL, policy: ctx.policy };
        let rep = sweep_sharp_constant_with(&model, &params, &default_eps_ladder(), &spec(), &opts)?;
        let mut ok = true;
        for r in &rep.rows {
            let c = (1.0 + r.epsilon) / 2.0;
            let env = c * c;
            ok &= r.envelope == Some(env) && r.quotient < env;
            min_margin = min_margin.min(env - r.quotient);
        }
        out.verdict(&format!("c2.{tag}"), ok, format!("{} points strictly below ((1+eps)/2)^2", rep.rows.len()));
    }
    Ok(finish(2, "envelope pinch", "min_envelope_margin", min_margin, "> 0".into(), out))
}

fn cylinder_axis_d(params: &HardyParams) -> Result<(ModelSpace, f64), RunError> {
    let model = ModelSpace::cylinder_axis(1)?;
    let d = 2.0 * taylor_threshold(params)?.cal_t * model.r_max;
    Ok((model, d))
}

fn c3_improved(ctx: &Ctx) -> Result<CriterionResult, RunError> {
    let params = HardyParams::new(2.0, -2.0, 1)?;
    let (model, d) = cylinder_axis_d(&params)?;
    let rep = improved_bump_trials(&model, &params, d, sub_seed(ctx.seed, 3), BUMP_TRIALS, &spec(), ctx.policy)?;
    let mut out = Outcome::default();
    out.verdict(
        "c3.bumps",
        rep.violations == 0,
        format!("{} bumps, {} violations, min slack {}", rep.trials.len(), rep.violations, rep.min_slack),
    );
    let mut t = Table::new("c3_improved.csv", &["trial", "functional", "remainder", "slack"]);
    for (i, tr) in rep.trials.iter().enumerate() {
        t.push(vec![i.to_string(), fmt_f64(tr.functional), fmt_f64(tr.remainder), fmt_f64(tr.slack)]);
    }
    out.tables.push(t);
    out.result("c3", &rep);
    Ok(finish(3, "improved inequality", "violations", rep.violations as f64, "0".into(), out))
}

const REMAINDER_CASES: [(f64, f64, &str); 2] = [(2.0, -2.0, "p2"), (3.0, -4.0, "p3")];

fn c4_remainder(ctx: &Ctx) -> Result<CriterionResult, RunError> {
    let mut out = Outcome::default();
    let mut worst = 0.0f64;
    for (p, beta, tag) in REMAINDER_CASES {
        let params = HardyParams::new(p, beta, 1)?;
        let (model, d) = cylinder_axis_d(&params)?;
        let rep = sweep_remainder(&model, &params, d, &default_theta_ladder(p), &deep_eps_ladder(), &spec(), ctx.policy)?;
        worst = worst.max((rep.extrapolated - rep.predicted).abs() / rep.predicted);
        record_remainder(&mut out, &format!("c4.{tag}"), &rep);
        out.tables.push(remainder_table(&format!("c4_{tag}.csv"), &rep));
    }
    Ok(finish(4, "remainder-constant sharpness", "max_rel_error", worst, "0.05".into(), out))
}

fn c5_gamma(ctx: &Ctx) -> Result<CriterionResult, RunError> {
    let mut out = Outcome::default();
    let mut least = f64::INFINITY;
    for (p, beta, tag) in REMAINDER_CASES {
        let params = HardyParams::new(p, beta, 1)?;
        let (model, d) = cylinder_axis_d(&params)?;
        let rep = gamma_test(&model, &params, d, 1.5 / p, GAMMA, &GAMMA_LADDER, &spec(), ctx.policy)?;
        least = least.min(rep.decrease_factor);
        record_gamma(&mut out, &format!("c5.{tag}"), &rep);
        out.tables.push(gamma_table(&format!("c5_{tag}.csv"), &rep));
    }
    Ok(finish(5, "gamma trichotomy", "min_decrease_factor", least, ">= 10".into(), out))
}

fn c6_j_alpha(ctx: &Ctx) -> Result<CriterionResult, RunError> {
    let model = ModelSpace::torus_subtorus(2, 1, 1.0)?;
    let mut out = Outcome::default();
    let mut worst = 0.0f64;
    let mut t = Table::new("c6_j_alpha.csv", &["alpha", "epsilon", "value"]);
    for alpha in [0.0, 0.5, 1.0, -2.0] {
        let rep = j_alpha_sweep(&model, alpha, 2.0, 2.0, CutoffSpec { eta: 1.0 }, &default_eps_ladder(), &spec(), ctx.policy)?;
        let detail = match rep.predicted_slope {
            Some(s) => {
                let err = (rep.fitted_slope - s).abs() / s.abs();
                worst = worst.max(err);
                format!("slope {} vs {s} (rel err {err})", rep.fitted_slope)
            }
            None => format!("last successive ratio {}", rep.last_ratio),
        };
        out.verdict(&format!("c6.alpha={alpha}"), rep.confirmed == Some(true), detail);
        for r in &rep.rows {
            t.push(vec![fmt_f64(alpha), fmt_f64(r.epsilon), fmt_f64(r.value)]);
        }
        out.result(&format!("c6.alpha={alpha}"), &rep);
    }
    out.tables.push(t);
    Ok(finish(6, "J_alpha asymptotics", "max_rel_slope_error", worst, "0.02".into(), out))
}

fn c7_jacobi(ctx: &Ctx) -> Result<CriterionResult, RunError> {
    let mut out = Outcome::default();
    jacobi_outcome(&mut out, ctx.seed, ctx.policy)?;
    let value = out.results[0].1["min_slack"].as_f64().unwrap_or(f64::NAN);
    for t in &mut out.tables {
        t.file_name = format!("c7_{}", t.file_name);
    }
    Ok(finish(7, "comparison dominance", "min_slack", value, ">= -1e-6".into(), out))
}

/// The models satisfying the curvature and convexity hypotheses.
pub fn condition_c_models() -> Result<Vec<ModelSpace>, RunError> {
    Ok(vec![
        ModelSpace::euclidean_point(2)?,
        ModelSpace::euclidean_point(3)?,
        ModelSpace::euclidean_subspace(3, 1)?,
        ModelSpace::euclidean_subspace(4, 2)?,
        ModelSpace::cylinder_section(1)?,
        ModelSpace::cylinder_section(2)?,
        ModelSpace::cylinder_axis(1)?,
        ModelSpace::cylinder_axis(2)?,
        ModelSpace::hemisphere(2)?,
        ModelSpace::hemisphere(3)?,
        ModelSpace::torus_subtorus(2, 1, 1.0)?,
        ModelSpace::torus_subtorus(3, 1, 1.0)?,
        ModelSpace::torus_subtorus(3, 2, 1.0)?,
    ])
}

fn c8_laplacian(_: &Ctx) -> Result<CriterionResult, RunError> {
    let mut out = Outcome::default();
    let mut worst = f64::NEG_INFINITY;
    let mut t = Table::new("c8_laplacian.csv", &["model", "max_excess", "passed"]);
    for model in condition_c_models()? {
        let lc = laplacian_check(&model, LAPLACIAN_GRID)?;
        worst = worst.max(lc.max_excess);
        out.verdict(&format!("c8.{}", lc.model_id), lc.passed, format!("max excess {}", lc.max_excess));
        t.push(vec![lc.model_id.clone(), fmt_f64(lc.max_excess), lc.passed.to_string()]);
    }
    out.tables.push(t);
    Ok(finish(8, "laplacian bounds", "max_excess", worst, "<= 0".into(), out))
}

const FLAT_TOL: f64 = 0.03;

fn c9_flat(ctx: &Ctx) -> Result<CriterionResult, RunError> {
    let mut out = Outcome::default();
    let mut worst = 0.0f64;
    let models = [
        ("euclidean_point", ModelSpace::euclidean_point(3)?.with_radius(1.0)?),
        ("torus", ModelSpace::torus_subtorus(3, 1, 1.0)?),
    ];
    for (tag, model) in models {
        let params = HardyParams::for_model(&model, 1.5, -1.5)?;
        let sharp = sharp_constant(&params);
        let r = rayleigh_descent(&model, &params, 1024, &spec())?;
        out.verdict(
            &format!("c9.{tag}.rayleigh"),
            r.inf_estimate >= sharp * (1.0 - FLAT_TOL),
            format!("inf {} vs {sharp}", r.inf_estimate),
        );
        let opts = SweepOptions { family: None, rel_tol: FLAT_TOL, policy: ctx.policy };
        let rep = sweep_sharp_constant_with(&model, &params, &default_eps_ladder(), &spec(), &opts)?;
        worst = worst.max((rep.fitted_limit - sharp).abs() / sharp);
        out.verdict(
            &format!("c9.{tag}.ladder"),
            rep.verdicts.sharp_constant_confirmed == Some(true),
            format!("limit {} vs {sharp}", rep.fitted_limit),
        );
        out.result(&format!("c9.{tag}.rayleigh_inf"), &r.inf_estimate);
        out.result(&format!("c9.{tag}"), &rep);
        out.tables.push(sweep_table(&format!("c9_{tag}.csv"), &rep));
    }
    Ok(finish(9, "flat case p<k", "max_rel_error_of_limit", worst, format!("{FLAT_TOL}"), out))
}

fn c10_log_hardy(ctx: &Ctx) -> Result<CriterionResult, RunError> {
    let model = ModelSpace::torus_subtorus(3, 1, 2.0)?;
    let rep = sweep_log_hardy(&model, 2.0, 0.0, 1.0, model.r_max, &default_eps_ladder(), &spec(), ctx.policy)?;
    let mut out = Outcome::default();
    out.verdict("c10.above_bound", rep.all_above_bound, format!("bound {}", rep.bound));
    out.verdict(
        "c10.approach",
        rep.confirmed,
        format!("closest relative gap {} (tol {})", rep.closest_rel_gap, rep.rel_tol),
    );
    let mut t = Table::new("c10_log_hardy.csv", &["epsilon", "quotient", "bound"]);
    for r in &rep.rows {
        t.push(vec![fmt_f64(r.epsilon), fmt_f64(r.quotient), fmt_f64(rep.bound)]);
    }
    out.tables.push(t);
    out.result("c10", &rep);
    Ok(finish(10, "log-Hardy", "closest_rel_gap", rep.closest_rel_gap, format!("{}", rep.rel_tol), out))
}

fn c11_taylor(ctx: &Ctx) -> Result<CriterionResult, RunError> {
    let rep = taylor_trials(sub_seed(ctx.seed, 11), TAYLOR_TRIALS, TAYLOR_GRID)?;
    let mut out = Outcome::default();
    out.verdict("c11.taylor", rep.violations == 0, format!("{} parameter sets, {} violations", rep.trials.len(), rep.violations));
    let mut t = Table::new("c11_taylor.csv", &["p", "beta", "k", "a", "frak_T", "cal_T", "min_slack"]);
    for tr in &rep.trials {
        t.push(vec![
            fmt_f64(tr.p),
            fmt_f64(tr.beta),
            tr.k.to_string(),
            fmt_f64(tr.a),
            fmt_f64(tr.frak_t),
            fmt_f64(tr.cal_t),
            fmt_f64(tr.min_slack),
        ]);
    }
    out.tables.push(t);
    out.result("c11", &rep);
    Ok(finish(11, "Taylor constants", "violations", rep.violations as f64, "0".into(), out))
}

/// CSV bytes of criteria 1 to 11, concatenated in a fixed order.
fn csv_bytes(ctx: &Ctx) -> Result<Vec<(String, Vec<u8>)>, RunError> {
    let mut all = Vec::new();
    for (id, _, f) in criteria() {
        if id == 12 {
            continue;
        }
        for t in f(ctx)?.outcome.tables {
            all.push((t.file_name.clone(), t.to_csv()));
        }
    }
    Ok(all)
}

/// Two in-process runs: the configured policy and the sequential one.
fn c12_determinism(ctx: &Ctx) -> Result<CriterionResult, RunError> {
    let a = csv_bytes(ctx)?;
    let b = csv_bytes(&Ctx { seed: ctx.seed, policy: ExecPolicy::Sequential })?;
    let differing = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.clone())
        .collect::<Vec<_>>();
    let same = a.len() == b.len() && differing.is_empty();
    let mut out = Outcome::default();
    out.verdict(
        "c12.byte_identical",
        same,
        if same { format!("{} tables identical", a.len()) } else { format!("differs: {differing:?}") },
    );
    Ok(finish(12, "determinism", "differing_tables", differing.len() as f64, "0".into(), out))
}

/// Runs one criterion, turning an error into a failed result.
pub fn run_criterion(id: u8, ctx: &Ctx) -> CriterionResult {
    let (_, name, f) = criteria().into_iter().find(|c| c.0 == id).expect("criterion id in 1..=12");
    match f(ctx) {
        Ok(r) => r,
        Err(e) => {
            let mut out = Outcome::default();
            out.errors.push(e.record());
            out.verdict(&format!("c{id}.error"), false, e.to_string());
            CriterionResult { id, name, passed: false, metric: "error".into(), value: f64::NAN, threshold: String::new(), outcome: out }
        }
    }
}

pub fn summary_line(r: &CriterionResult) -> String {
    format!(
        "criterion {:>2} {} {}: {}={} (threshold {})",
        r.id,
        if r.passed { "PASS" } else { "FAIL" },
        r.name,
        r.metric,
        fmt_human(r.value),
        r.threshold
    )
}

fn model_sweep(cfg: &RunConfig, out: &mut Outcome) -> Result<(), RunError> {
    let Some(model) = cfg.model_space() else { return Ok(()) };
    let params = match cfg.hardy_params() {
        Some(p) => p,
        None => HardyParams::for_model(&model, 2.0, -(model.k() as f64) - 1.0)?,
    };
    let ladder = cfg.eps_ladder.clone().unwrap_or_else(default_eps_ladder);
    let opts = SweepOptions { family: None, rel_tol: cfg.tol.unwrap_or(SHARP_REL_TOL), policy: policy(cfg) };
    let rep = sweep_sharp_constant_with(&model, &params, &ladder, &spec(), &opts)?;
    record_sweep(out, "model", &rep);
    out.tables.push(sweep_table("model_sweep.csv", &rep));
    let lc = laplacian_check(&model, LAPLACIAN_GRID)?;
    out.verdict("model.laplacian", lc.passed, format!("max excess {}", lc.max_excess));
    Ok(())
}

pub fn verify_all(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let ctx = Ctx { seed: cfg.seed, policy: policy(cfg) };
    let mut out = Outcome::default();
    let mut summary = Table::new("verify_all.csv", &["criterion", "name", "passed", "metric", "value", "threshold"]);
    for (id, _, _) in criteria() {
        let r = run_criterion(id, &ctx);
        summary.push(vec![
            r.id.to_string(),
            r.name.into(),
            r.passed.to_string(),
            r.metric.clone(),
            fmt_f64(r.value),
            r.threshold.clone(),
        ]);
        out.lines.extend(r.outcome.lines.iter().cloned());
        out.verdict(&format!("criterion_{id}"), r.passed, summary_line(&r));
        for (name, v) in r.outcome.results {
            out.results.push((name, v));
        }
        out.errors.extend(r.outcome.errors);
        out.tables.extend(r.outcome.tables);
    }
    if let Err(e) = model_sweep(cfg, &mut out) {
        out.errors.push(e.record());
        out.verdict("model.error", false, e.to_string());
    }
    out.tables.insert(0, summary);
    Ok(out)
}

impl RunError {
    pub fn record(&self) -> ErrorRecord {
        let kind = match self {
            RunError::Config(_) => "config",
            RunError::Numeric(_) => "numeric",
        };
        ErrorRecord { kind: kind.into(), message: self.to_string() }
    }
}
