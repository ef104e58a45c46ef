//! ε-sweeps of the near-extremal families and the fits that read off the
//! sharp constants, plus a discrete Rayleigh minimizer as an independent check.

pub mod checks;
pub mod fit;
pub mod rayleigh;

use serde::{Deserialize, Serialize};

use crate::error::{HardyError, Result};
use crate::exec::{par_map, ExecPolicy};
use crate::extremizers::{
    j_alpha, truncated_v_epsilon, u_epsilon_profile, v_epsilon_profile, CutoffSpec, UEpsilonFamily, VEpsilonFamily,
};
use crate::functionals::{
    hardy_parts, improved_functional, log_hardy_constant, log_hardy_parts, remainder_constant, remainder_integral,
    sharp_constant, HardyParams, RadialProfile,
};
use crate::geometry::ModelSpace;
use crate::quadrature::QuadratureSpec;

pub use fit::{linear_fit, log_log_slope, poly_fit};
pub use rayleigh::{rayleigh_descent, rayleigh_descent_with, RayleighOptions, RayleighResult};

/// Relative tolerance on the fitted sharp constant.
pub const SHARP_REL_TOL: f64 = 0.01;
/// Relative tolerance on the extrapolated remainder constant.
pub const REMAINDER_REL_TOL: f64 = 0.05;
/// Number of trailing ladder points in the sharp-constant fit.
pub const SHARP_FIT_POINTS: usize = 4;
/// Number of trailing ladder points in the `J_α` slope fit.
pub const J_FIT_POINTS: usize = 5;

/// `ε_j = 2^-j`, `j = 3..=12`.
pub fn default_eps_ladder() -> Vec<f64> {
    (3..=12).map(|j| 2f64.powi(-j)).collect()
}

/// `ε_k = 10^(-4k)`, `k = 1..=16`, for the slowly converging remainder ratios.
pub fn deep_eps_ladder() -> Vec<f64> {
    (1..=16).map(|k| 10f64.powi(-4 * k)).collect()
}

/// `θ_j = (1 + 2^-j)/p`, `j = 1..=3`.
pub fn default_theta_ladder(p: f64) -> Vec<f64> {
    (1..=3).map(|j| (1.0 + 2f64.powi(-j)) / p).collect()
}

/// Near-extremal family used by a sharp-constant sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SweepFamily {
    /// Truncated two-piece power profile.
    VEpsilon,
    /// `φ r^(-δ+ε)` with cutoff radius `eta`.
    Concentrating { eta: f64 },
}

impl SweepFamily {
    /// `VEpsilon` for `δ < 0` or unbounded models, otherwise the concentrating family.
    pub fn auto(model: &ModelSpace, params: &HardyParams) -> Self {
        if params.delta < 0.0 || !model.r_max.is_finite() {
            SweepFamily::VEpsilon
        } else {
            SweepFamily::Concentrating { eta: model.r_max }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepFamily::VEpsilon => "v_eps_truncated",
            SweepFamily::Concentrating { .. } => "phi_r_pow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub quotient: f64,
    /// Exact upper envelope `c(ε)^p`, when the family has one.
    pub envelope: Option<f64>,
    pub constant: f64,
    pub gap: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Verdicts {
    pub sharp_constant_confirmed: Option<bool>,
    pub remainder_confirmed: Option<bool>,
    pub strictness_confirmed: Option<bool>,
    pub envelope_confirmed: Option<bool>,
    pub monotone: Option<bool>,
    pub inconclusive: bool,
}

impl Verdicts {
    /// True when every verdict that was evaluated holds.
    pub fn all_confirmed(&self) -> bool {
        !self.inconclusive
            && [
                self.sharp_constant_confirmed,
                self.remainder_confirmed,
                self.strictness_confirmed,
                self.envelope_confirmed,
            ]
            .iter()
            .all(|v| v.unwrap_or(true))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub model_id: String,
    pub params: HardyParams,
    pub family: SweepFamily,
    pub rows: Vec<SweepRow>,
    pub predicted: f64,
    pub fitted_limit: f64,
    pub fitted_slope: f64,
    pub rel_tol: f64,
    /// Largest `A` with every quotient `>= A`; an upper bound on the infimum.
    pub min_quotient: f64,
    pub verdicts: Verdicts,
}

/// Sweep options beyond the model, parameters and ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub family: Option<SweepFamily>,
    pub rel_tol: f64,
    pub policy: ExecPolicy,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            family: None,
            rel_tol: SHARP_REL_TOL,
            policy: ExecPolicy::default(),
        }
    }
}

/// Ladder sorted by decreasing `ε`, duplicates removed.
fn sorted_ladder(ladder: &[f64]) -> Result<Vec<f64>> {
    if ladder.is_empty() || ladder.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(HardyError::InvalidParameter("epsilon ladder needs positive finite values".into()));
    }
    let mut v = ladder.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.dedup();
    Ok(v)
}

/// Profile of the sweep family at `ε`, scaled to unit size near its peak.
pub fn sweep_profile(model: &ModelSpace, params: &HardyParams, family: SweepFamily, epsilon: f64) -> Result<(RadialProfile, Option<f64>)> {
    match family {
        SweepFamily::VEpsilon => {
            let fam = VEpsilonFamily::for_sweep(params, epsilon, model.r_max)?;
            let u = truncated_v_epsilon(&fam)?;
            let bk = params.beta + params.k as f64;
            Ok((u.scaled_ln(-bk / params.p * fam.ln_s), Some(fam.envelope(params.p))))
        }
        SweepFamily::Concentrating { eta } => {
            let fam = UEpsilonFamily::unchecked(*params, epsilon, 0.0, 2.0 * eta, CutoffSpec { eta })?;
            Ok((u_epsilon_profile(&fam, model)?, None))
        }
    }
}

fn relative_gap(value: f64, target: f64) -> f64 {
    if target == 0.0 {
        value.abs()
    } else {
        (value - target).abs() / target.abs()
    }
}

/// Hardy quotients of the sweep family over the ladder, with a linear fit of the last points.
pub fn sweep_sharp_constant(model: &ModelSpace, params: &HardyParams, ladder: &[f64], spec: &QuadratureSpec) -> Result<SweepReport> {
    sweep_sharp_constant_with(model, params, ladder, spec, &SweepOptions::default())
}

pub fn sweep_sharp_constant_with(
    model: &ModelSpace,
    params: &HardyParams,
    ladder: &[f64],
    spec: &QuadratureSpec,
    opts: &SweepOptions,
) -> Result<SweepReport> {
    let ladder = sorted_ladder(ladder)?;
    let family = opts.family.unwrap_or_else(|| SweepFamily::auto(model, params));
    let constant = sharp_constant(params);
    let rows: Vec<Result<SweepRow>> = par_map(opts.policy, &ladder, |&eps| {
        let (u, envelope) = sweep_profile(model, params, family, eps)?;
        let parts = hardy_parts(model, params, &u, spec)?;
        let q = parts.quotient()?;
        Ok(SweepRow {
            epsilon: eps,
            quotient: q,
            envelope,
            constant,
            gap: q - constant,
            error_estimate: parts.quotient_error(),
        })
    });
    let rows: Vec<SweepRow> = rows.into_iter().collect::<Result<_>>()?;
    let tail = &rows[rows.len().saturating_sub(SHARP_FIT_POINTS)..];
    let (mut limit, slope) = if tail.len() >= 2 {
        let xs: Vec<f64> = tail.iter().map(|r| r.epsilon).collect();
        let ys: Vec<f64> = tail.iter().map(|r| r.quotient).collect();
        linear_fit(&xs, &ys)?
    } else {
        (rows[0].quotient, 0.0)
    };
    if let Some(env) = rows.iter().filter_map(|r| r.envelope).reduce(f64::min) {
        limit = limit.min(env);
    }
    let monotone = rows.windows(2).all(|w| w[1].quotient <= w[0].quotient + w[0].error_estimate + w[1].error_estimate);
    let strict = rows.iter().all(|r| r.quotient > constant);
    let envelope = if rows.iter().all(|r| r.envelope.is_some()) {
        Some(rows.iter().all(|r| r.quotient < r.envelope.unwrap()))
    } else {
        None
    };
    let confirmed = monotone && relative_gap(limit, constant) <= opts.rel_tol;
    let min_quotient = rows.iter().map(|r| r.quotient).fold(f64::INFINITY, f64::min);
    Ok(SweepReport {
        model_id: model.id(),
        params: *params,
        family,
        rows,
        predicted: constant,
        fitted_limit: limit,
        fitted_slope: slope,
        rel_tol: opts.rel_tol,
        min_quotient,
        verdicts: Verdicts {
            sharp_constant_confirmed: Some(confirmed),
            remainder_confirmed: None,
            strictness_confirmed: Some(strict),
            envelope_confirmed: envelope,
            monotone: Some(monotone),
            inconclusive: !monotone,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemainderRow {
    pub theta: f64,
    pub epsilon: f64,
    pub functional: f64,
    pub remainder: f64,
    pub ratio: f64,
    pub error_estimate: f64,
}

/// Fit `ratio ≈ B + c_1 X + c_2 X²` in `X = ε^(pθ-1)` at one `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaFit {
    pub theta: f64,
    pub limit: f64,
    pub coefficients: Vec<f64>,
    /// `θ (p-1)/2 |δ|^(p-2)`.
    pub expected: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderReport {
    pub model_id: String,
    pub params: HardyParams,
    pub d: f64,
    pub eta: f64,
    pub rows: Vec<RemainderRow>,
    pub theta_fits: Vec<ThetaFit>,
    pub extrapolated: f64,
    pub predicted: f64,
    pub rel_tol: f64,
    /// Every grid ratio is at least the predicted constant, up to the quadrature error.
    pub lower_bound_holds: bool,
    pub verdicts: Verdicts,
}

/// Largest `X` kept in the per-`θ` fit.
const X_FIT_MAX: f64 = 0.1;

/// Default cutoff radius for the `u_ε` sweeps.
pub fn default_eta(model: &ModelSpace) -> f64 {
    if model.r_max.is_finite() {
        0.5 * model.r_max
    } else {
        1.0
    }
}

fn check_remainder_d(model: &ModelSpace, params: &HardyParams, d: f64) -> Result<()> {
    let tc = crate::extremizers::taylor_threshold(params)?;
    if model.r_max.is_finite() && d < tc.cal_t * model.r_max * (1.0 - 1e-12) {
        return Err(HardyError::Domain(format!(
            "D={d} is below T*r_max={} with T={}",
            tc.cal_t * model.r_max,
            tc.cal_t
        )));
    }
    Ok(())
}

/// `𝓘[u_ε]/R₂[u_ε]` over a `(θ, ε)` grid, extrapolated to `θ = 1/p`.
pub fn sweep_remainder(
    model: &ModelSpace,
    params: &HardyParams,
    d: f64,
    theta_ladder: &[f64],
    eps_ladder: &[f64],
    spec: &QuadratureSpec,
    policy: ExecPolicy,
) -> Result<RemainderReport> {
    check_remainder_d(model, params, d)?;
    let eps = sorted_ladder(eps_ladder)?;
    if theta_ladder.len() < 2 {
        return Err(HardyError::InvalidParameter("theta ladder needs at least two values".into()));
    }
    let (p, delta) = (params.p, params.delta);
    let predicted = remainder_constant(params)?;
    let eta = default_eta(model);
    let grid: Vec<(f64, f64)> = theta_ladder.iter().flat_map(|&t| eps.iter().map(move |&e| (t, e))).collect();
    let rows: Vec<Result<RemainderRow>> = par_map(policy, &grid, |&(theta, e)| {
        let fam = UEpsilonFamily::new(*params, e, theta, d, CutoffSpec { eta })?;
        let u = u_epsilon_profile(&fam, model)?;
        let parts = improved_functional(model, params, &u, d, spec)?;
        let ratio = parts.functional.value / parts.remainder.value;
        Ok(RemainderRow {
            theta,
            epsilon: e,
            functional: parts.functional.value,
            remainder: parts.remainder.value,
            ratio,
            error_estimate: (parts.functional.error_estimate + ratio.abs() * parts.remainder.error_estimate)
                / parts.remainder.value,
        })
    });
    let rows: Vec<RemainderRow> = rows.into_iter().collect::<Result<_>>()?;
    let mut theta_fits = Vec::new();
    for &theta in theta_ladder {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.theta == theta)
            .map(|r| (r.epsilon.powf(p * theta - 1.0), r.ratio))
            .filter(|(x, _)| *x <= X_FIT_MAX)
            .collect();
        if pts.len() < 3 {
            return Err(HardyError::InvalidParameter(format!(
                "theta={theta}: fewer than three ladder points with eps^(p theta - 1) <= {X_FIT_MAX}"
            )));
        }
        let xs: Vec<f64> = pts.iter().map(|v| v.0).collect();
        let ys: Vec<f64> = pts.iter().map(|v| v.1).collect();
        let c = poly_fit(&xs, &ys, 2)?;
        theta_fits.push(ThetaFit {
            theta,
            limit: c[0],
            coefficients: c,
            expected: theta * (p - 1.0) / 2.0 * delta.abs().powf(p - 2.0),
            points: pts.len(),
        });
    }
    let ts: Vec<f64> = theta_fits.iter().map(|f| f.theta).collect();
    let bs: Vec<f64> = theta_fits.iter().map(|f| f.limit).collect();
    let (a0, a1) = linear_fit(&ts, &bs)?;
    let extrapolated = a0 + a1 / p;
    let lower_bound_holds = rows.iter().all(|r| r.ratio >= predicted - 1e-9 - r.error_estimate);
    let confirmed = relative_gap(extrapolated, predicted) <= REMAINDER_REL_TOL;
    Ok(RemainderReport {
        model_id: model.id(),
        params: *params,
        d,
        eta,
        rows,
        theta_fits,
        extrapolated,
        predicted,
        rel_tol: REMAINDER_REL_TOL,
        lower_bound_holds,
        verdicts: Verdicts {
            remainder_confirmed: Some(confirmed && lower_bound_holds),
            strictness_confirmed: Some(lower_bound_holds),
            ..Default::default()
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub epsilon: f64,
    pub functional: f64,
    pub remainder: f64,
    pub ratio: f64,
}

/// `𝓘[u_ε]/R_γ[u_ε]` along an ε-ladder; for `γ < 2` it must fall off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub gamma: f64,
    pub theta: f64,
    pub rows: Vec<GammaRow>,
    /// First ratio over last ratio.
    pub decrease_factor: f64,
    pub decades: f64,
    pub required_factor: f64,
    pub confirmed: bool,
}

pub fn gamma_test(
    model: &ModelSpace,
    params: &HardyParams,
    d: f64,
    theta: f64,
    gamma: f64,
    eps_ladder: &[f64],
    spec: &QuadratureSpec,
    policy: ExecPolicy,
) -> Result<GammaReport> {
    check_remainder_d(model, params, d)?;
    let eps = sorted_ladder(eps_ladder)?;
    if eps.len() < 2 {
        return Err(HardyError::InvalidParameter("gamma test needs at least two ladder points".into()));
    }
    let eta = default_eta(model);
    let rows: Vec<Result<GammaRow>> = par_map(policy, &eps, |&e| {
        let fam = UEpsilonFamily::new(*params, e, theta, d, CutoffSpec { eta })?;
        let u = u_epsilon_profile(&fam, model)?;
        let i = improved_functional(model, params, &u, d, spec)?.functional.value;
        let r = remainder_integral(model, params, &u, d, gamma, spec)?.value;
        Ok(GammaRow {
            epsilon: e,
            functional: i,
            remainder: r,
            ratio: i / r,
        })
    });
    let rows: Vec<GammaRow> = rows.into_iter().collect::<Result<_>>()?;
    let first = rows.first().unwrap();
    let last = rows.last().unwrap();
    let decrease_factor = first.ratio / last.ratio;
    let required_factor = 10.0;
    Ok(GammaReport {
        gamma,
        theta,
        decades: (first.epsilon / last.epsilon).log10(),
        decrease_factor,
        required_factor,
        confirmed: decrease_factor >= required_factor,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JRow {
    pub epsilon: f64,
    pub value: f64,
    pub error_estimate: f64,
}

/// `J_α(ε)` along a ladder, with the log-log slope of the last points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JReport {
    pub alpha: f64,
    pub rows: Vec<JRow>,
    pub fitted_slope: f64,
    /// `-1 - α` for `α > -1`.
    pub predicted_slope: Option<f64>,
    /// `J(ε_last)/J(ε_prev)`.
    pub last_ratio: f64,
    pub confirmed: Option<bool>,
}

pub fn j_alpha_sweep(
    model: &ModelSpace,
    alpha: f64,
    p: f64,
    d: f64,
    cutoff: CutoffSpec,
    eps_ladder: &[f64],
    spec: &QuadratureSpec,
    policy: ExecPolicy,
) -> Result<JReport> {
    let eps = sorted_ladder(eps_ladder)?;
    if eps.len() < 2 {
        return Err(HardyError::InvalidParameter("J sweep needs at least two ladder points".into()));
    }
    let rows: Vec<Result<JRow>> = par_map(policy, &eps, |&e| {
        let j = j_alpha(model, alpha, e, p, d, cutoff, spec)?;
        Ok(JRow {
            epsilon: e,
            value: j.value,
            error_estimate: j.error_estimate,
        })
    });
    let rows: Vec<JRow> = rows.into_iter().collect::<Result<_>>()?;
    let tail = &rows[rows.len().saturating_sub(J_FIT_POINTS)..];
    let xs: Vec<f64> = tail.iter().map(|r| r.epsilon).collect();
    let ys: Vec<f64> = tail.iter().map(|r| r.value).collect();
    let fitted_slope = log_log_slope(&xs, &ys)?;
    let n = rows.len();
    let last_ratio = rows[n - 1].value / rows[n - 2].value;
    let predicted_slope = (alpha > -1.0).then_some(-1.0 - alpha);
    let confirmed = if let Some(s) = predicted_slope {
        Some((fitted_slope - s).abs() <= 0.02 * s.abs())
    } else if alpha < -1.0 {
        Some((last_ratio - 1.0).abs() <= 0.05)
    } else {
        None
    };
    Ok(JReport {
        alpha,
        rows,
        fitted_slope,
        predicted_slope,
        last_ratio,
        confirmed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epsilon: f64,
    pub quotient: f64,
    pub error_estimate: f64,
}

/// Log-weighted quotient of the log-distance family along a ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSweepReport {
    pub model_id: String,
    pub p: f64,
    pub beta: f64,
    pub alpha: f64,
    pub d: f64,
    pub rows: Vec<LogRow>,
    /// `ϑ^p`.
    pub bound: f64,
    pub all_above_bound: bool,
    pub closest_rel_gap: f64,
    pub rel_tol: f64,
    pub confirmed: bool,
}

pub fn sweep_log_hardy(
    model: &ModelSpace,
    p: f64,
    beta: f64,
    alpha: f64,
    d: f64,
    eps_ladder: &[f64],
    spec: &QuadratureSpec,
    policy: ExecPolicy,
) -> Result<LogSweepReport> {
    let eps = sorted_ladder(eps_ladder)?;
    let theta = log_hardy_constant(p, beta, alpha);
    let bound = theta.abs().powf(p);
    let rows: Vec<Result<LogRow>> = par_map(policy, &eps, |&e| {
        let fam = VEpsilonFamily::log_distance(p, beta, alpha, e, d)?;
        let u = v_epsilon_profile(&fam)?;
        let parts = log_hardy_parts(model, p, beta, alpha, d, &u, spec)?;
        Ok(LogRow {
            epsilon: e,
            quotient: parts.quotient()?,
            error_estimate: parts.quotient_error(),
        })
    });
    let rows: Vec<LogRow> = rows.into_iter().collect::<Result<_>>()?;
    let all_above_bound = rows.iter().all(|r| r.quotient >= bound - 1e-9 - r.error_estimate);
    let closest_rel_gap = rows.iter().map(|r| relative_gap(r.quotient, bound)).fold(f64::INFINITY, f64::min);
    let rel_tol = 0.10;
    Ok(LogSweepReport {
        model_id: model.id(),
        p,
        beta,
        alpha,
        d,
        rows,
        bound,
        all_above_bound,
        closest_rel_gap,
        rel_tol,
        confirmed: all_above_bound && closest_rel_gap <= rel_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladders() {
        let l = default_eps_ladder();
        assert_eq!(l.len(), 10);
        assert_eq!(l[0], 0.125);
        assert_eq!(default_theta_ladder(2.0), vec![0.75, 0.625, 0.5625]);
        assert!(sorted_ladder(&[0.1, -1.0]).is_err());
        assert_eq!(sorted_ladder(&[0.01, 0.1, 0.01]).unwrap(), vec![0.1, 0.01]);
    }

    #[test]
    fn sharp_sweep_on_cylinder() {
        let model = ModelSpace::cylinder_section(1).unwrap();
        let params = HardyParams::for_model(&model, 2.0, -2.0).unwrap();
        let rep = sweep_sharp_constant(&model, &params, &default_eps_ladder(), &QuadratureSpec::default()).unwrap();
        assert!(rep.verdicts.all_confirmed(), "{rep:?}");
        assert!((rep.fitted_limit - 0.25).abs() < 2.5e-3);
    }
}
