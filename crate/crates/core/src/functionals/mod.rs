//! Weighted Hardy functionals of radial profiles.
//!
//! Every integral is assembled in log space: for each profile piece the
//! integrand `Φ(r) dvol` is written as `exp(ℓ)` in the piece's chart, with the
//! net power of `r` collected exactly before it meets `ln r`.

pub mod inequalities;
pub mod profile;

use serde::{Deserialize, Serialize};

use crate::error::{HardyError, Result};
use crate::geometry::ModelSpace;
use crate::quadrature::{integrate_with_breaks, QuadratureResult, QuadratureSpec};

pub use inequalities::{log_integral_inequality_check, pointwise_inequality_check, pointwise_sides, LogIntegralCheck, PointwiseData};
pub use profile::{Chart, ChartPoint, Cutoff, Piece, ProfilePoint, RadialProfile, Term};

pub(crate) use profile::{mul0, signed_lse};

/// Exponents of a weighted Hardy inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyParams {
    pub p: f64,
    pub beta: f64,
    pub k: usize,
    pub delta: f64,
}

impl HardyParams {
    pub fn new(p: f64, beta: f64, k: usize) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(HardyError::InvalidParameter(format!("p>1 is required (got p={p})")));
        }
        if !beta.is_finite() {
            return Err(HardyError::InvalidParameter("beta must be finite".into()));
        }
        if k == 0 {
            return Err(HardyError::InvalidParameter("codimension k must be at least 1".into()));
        }
        Ok(Self {
            p,
            beta,
            k,
            delta: (k as f64 + beta) / p,
        })
    }

    pub fn for_model(model: &ModelSpace, p: f64, beta: f64) -> Result<Self> {
        Self::new(p, beta, model.k())
    }

    pub fn p_ne_k(&self) -> bool {
        self.p != self.k as f64
    }

    pub fn beta_lt_minus_k(&self) -> bool {
        self.beta < -(self.k as f64)
    }

    pub fn p_plus_beta_gt_minus_k(&self) -> bool {
        self.p + self.beta > -(self.k as f64)
    }
}

/// `|(β+k)/p|^p`.
pub fn sharp_constant(params: &HardyParams) -> f64 {
    params.delta.abs().powf(params.p)
}

/// `(p-1)/(2p) |δ|^(p-2)`.
pub fn remainder_constant(params: &HardyParams) -> Result<f64> {
    let (p, d) = (params.p, params.delta);
    if d == 0.0 && p < 2.0 {
        return Err(HardyError::Domain(
            "remainder constant needs delta != 0 when p < 2".into(),
        ));
    }
    let pow = if p == 2.0 { 1.0 } else { d.abs().powf(p - 2.0) };
    Ok((p - 1.0) / (2.0 * p) * pow)
}

/// `[β+1-(α-1)(p-1)]/p`.
pub fn log_hardy_constant(p: f64, beta: f64, alpha: f64) -> f64 {
    (beta + 1.0 - (alpha - 1.0) * (p - 1.0)) / p
}

/// `|1-t|^p - 1 + p t`, accurate near `t = 0`.
pub fn h_p(p: f64, t: f64) -> f64 {
    if t.abs() < 1e-3 {
        let mut coeff = p * (p - 1.0) / 2.0;
        let mut tj = t * t;
        let mut sum = 0.0;
        for j in 2..12 {
            sum += coeff * tj;
            coeff *= -(p - j as f64) / (j as f64 + 1.0);
            tj *= t;
        }
        sum
    } else {
        (1.0 - t).abs().powf(p) - 1.0 + p * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Quantity {
    /// `|u|^p`.
    Value,
    /// `|r u'|^p`.
    Gradient,
    /// `|r u'|^p - |δ u|^p` in ground-state form, without boundary terms.
    GroundState { delta: f64 },
    /// Same integrand for a profile whose derivative slot holds `g = r u' + δ u`.
    GroundStateShifted { delta: f64 },
    /// `|u|^p (r Δr + 1 - k)`, or its absolute value.
    ValueSlope { abs: bool },
}

/// `transverse_mass * Σ_pieces ∫ Φ r^r_pow log(D/r)^log_pow dens(r) dr`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Weighting {
    pub r_pow: f64,
    pub log_pow: f64,
    pub log_base: Option<f64>,
}

#[derive(Clone, Copy)]
enum End {
    RZero,
    RInf,
    RhoZero,
}

fn dominant(terms: &[Term], end: &End) -> Option<Term> {
    let mut it = terms.iter().copied();
    let first = it.next()?;
    Some(it.fold(first, |best, t| {
        let better = match end {
            End::RZero => {
                let c = (t.a, t.a_eps).partial_cmp(&(best.a, best.a_eps));
                c == Some(std::cmp::Ordering::Less) || (c == Some(std::cmp::Ordering::Equal) && t.b > best.b)
            }
            End::RInf => {
                let c = (t.a, t.a_eps).partial_cmp(&(best.a, best.a_eps));
                t.lambda > best.lambda
                    || (t.lambda == best.lambda
                        && (c == Some(std::cmp::Ordering::Greater) || (c == Some(std::cmp::Ordering::Equal) && t.b > best.b)))
            }
            End::RhoZero => t.b < best.b,
        };
        if better {
            t
        } else {
            best
        }
    }))
}

/// Refuse pieces whose integral is predicted divergent at an unbounded chart end.
fn screen(piece: &Piece, end: End, p: f64, k: f64, w: &Weighting, use_du: bool) -> Result<()> {
    let terms = if use_du { &piece.dterms } else { &piece.terms };
    let Some(t) = dominant(terms, &end) else {
        return Ok(());
    };
    let what = if use_du { "gradient" } else { "value" };
    let e_main = p * t.a + w.r_pow + k;
    let e = e_main + p * t.a_eps;
    let b = p * t.b + w.log_pow;
    // Exponents within 1e-12 of critical are decided by the small part first.
    let e_sign = if e_main.abs() > 1e-12 {
        e_main.signum()
    } else if t.a_eps != 0.0 {
        t.a_eps.signum()
    } else {
        0.0
    };
    let ok = match end {
        End::RZero => e_sign > 0.0 || (e_sign == 0.0 && b < -1.0),
        End::RInf => {
            if terms.iter().any(|t| t.b != 0.0) || w.log_pow != 0.0 {
                return Err(HardyError::Refused(
                    "log terms are undefined beyond r = D".into(),
                ));
            }
            t.lambda < 0.0 || (t.lambda == 0.0 && e_sign < 0.0)
        }
        End::RhoZero => b > -1.0,
    };
    if ok {
        Ok(())
    } else {
        let place = match end {
            End::RZero => "r -> 0",
            End::RInf => "r -> infinity",
            End::RhoZero => "r -> D",
        };
        Err(HardyError::Divergent(format!(
            "{what} integral diverges at {place} (r-exponent {e}, log-exponent {b})"
        )))
    }
}

fn check_log_base(u: &RadialProfile, d: Option<f64>) -> Result<Option<f64>> {
    match (u.log_base(), d) {
        (Some(pd), Some(fd)) if u.uses_logs() && ((pd - fd).abs() > 1e-12 * fd) => {
            Err(HardyError::Refused(format!(
                "profile log base {pd} differs from functional log base {fd}"
            )))
        }
        (Some(pd), None) => Ok(Some(pd)),
        (_, fd) => Ok(fd),
    }
}

struct PieceSetup {
    chart: Chart,
    lo: f64,
    hi: f64,
    breaks: Vec<f64>,
}

fn piece_setup(model: &ModelSpace, u: &RadialProfile, i: usize, ln_d: Option<f64>, need_logs: bool) -> Result<Option<PieceSetup>> {
    let (chart, mut lo, mut hi) = u.piece_bounds(i);
    let mut r_cap = model.r_max;
    let cutoff = match u {
        RadialProfile::PowerLog(p) => p.cutoff,
        RadialProfile::Grid(_) => None,
    };
    if let Some(c) = cutoff {
        r_cap = r_cap.min(c.eta);
    }
    if need_logs {
        let d = ln_d.unwrap().exp();
        let r_top = match chart {
            Chart::LogLog => d,
            Chart::Linear => hi,
            Chart::LogRadius => hi.exp(),
        }
        .min(r_cap);
        if r_top > d * (1.0 + 1e-12) {
            return Err(HardyError::Domain(format!(
                "support reaches r={r_top} beyond the log base D={d}"
            )));
        }
        r_cap = r_cap.min(d);
    }
    if r_cap.is_finite() {
        let c = chart.coord(r_cap, ln_d);
        if chart.increasing() {
            hi = hi.min(c);
        } else {
            lo = lo.max(c);
        }
    } else if chart == Chart::LogLog {
        return Err(HardyError::Refused("log-log pieces need a finite log base".into()));
    }
    if !(lo < hi) {
        return Ok(None);
    }
    let mut breaks = vec![lo];
    if let Some(c) = cutoff {
        let x = chart.coord(0.5 * c.eta, ln_d);
        if x > lo && x < hi {
            breaks.push(x);
        }
    }
    if let RadialProfile::Grid(g) = u {
        let stride = (g.y.len() / 512).max(1);
        for (j, &y) in g.y.iter().enumerate() {
            if j % stride == 0 && y > lo && y < hi {
                breaks.push(y);
            }
        }
    }
    if lo.is_infinite() && breaks.len() == 1 {
        // Anchor infinite ends so the tails start from a finite point.
        let anchor = if hi.is_finite() { hi - 1.0 } else { 0.0 };
        breaks.push(anchor);
    }
    if chart != Chart::Linear {
        // Geometric breaks toward both ends of long log-chart intervals.
        let mut step = 1.0;
        while lo.is_finite() && hi.is_finite() && step < 0.5 * (hi - lo) {
            breaks.push(lo + step);
            breaks.push(hi - step);
            step *= 2.0;
        }
    }
    breaks.push(hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    if hi.is_infinite() && lo.is_finite() && breaks.len() == 2 {
        breaks.insert(1, lo + 1.0);
    }
    Ok(Some(PieceSetup { chart, lo, hi, breaks }))
}

fn ln_total(
    model: &ModelSpace,
    chart: Chart,
    pt: &ChartPoint,
    r_exponent: f64,
    r_eps: f64,
    log_pow: f64,
) -> f64 {
    let chart_r = if chart == Chart::Linear { -1.0 } else { 0.0 };
    let jac_log = if chart == Chart::LogLog { pt.ln_rho } else { 0.0 };
    // Rounding residue of an exactly cancelling power would be amplified by huge |ln r|.
    let e = r_exponent + chart_r;
    let e = if e.abs() < 1e-13 { 0.0 } else { e };
    mul0(e, pt.ln_r) + mul0(r_eps, pt.ln_r) + mul0(log_pow, pt.ln_rho) + jac_log + model.ln_density_ratio(pt.ln_r.exp())
}

fn integrand_value(model: &ModelSpace, q: Quantity, p: f64, k: f64, w: &Weighting, chart: Chart, pp: &ProfilePoint, pt: &ChartPoint) -> f64 {
    let base = w.r_pow + k;
    match q {
        Quantity::Value | Quantity::ValueSlope { .. } => {
            if pp.u_sign == 0.0 {
                return 0.0;
            }
            let ln = p * pp.u_rest + ln_total(model, chart, pt, p * pp.u_shift + base, p * pp.u_shift_eps, w.log_pow);
            let mut v = ln.exp();
            if let Quantity::ValueSlope { abs } = q {
                let s = model.ratio_log_slope(pt.ln_r.exp());
                v *= if abs { s.abs() } else { s };
            }
            v
        }
        Quantity::Gradient => {
            if pp.du_sign == 0.0 {
                return 0.0;
            }
            (p * pp.du_rest + ln_total(model, chart, pt, p * pp.du_shift + base, p * pp.du_shift_eps, w.log_pow)).exp()
        }
        Quantity::GroundStateShifted { delta } => {
            let ad = delta.abs();
            let ln_w_common = ln_total(model, chart, pt, 0.0, 0.0, w.log_pow);
            let ln_g = p * pp.du_rest + mul0(p * pp.du_shift + base, pt.ln_r) + mul0(p * pp.du_shift_eps, pt.ln_r) + ln_w_common;
            if pp.u_sign == 0.0 {
                // r u' = g where u vanishes.
                return if pp.du_sign == 0.0 { 0.0 } else { ln_g.exp() };
            }
            let ln_val = p * pp.u_rest + mul0(p * pp.u_shift + base, pt.ln_r) + mul0(p * pp.u_shift_eps, pt.ln_r) + ln_w_common;
            // t = g / (δ u)
            let t = if pp.du_sign == 0.0 {
                0.0
            } else {
                let lr = mul0(pp.du_shift - pp.u_shift, pt.ln_r) + mul0(pp.du_shift_eps - pp.u_shift_eps, pt.ln_r) + pp.du_rest - pp.u_rest;
                pp.du_sign * pp.u_sign * delta.signum() * (lr - ad.ln()).exp()
            };
            let ln_h = if t.abs() <= 1e3 {
                h_p(p, t).max(0.0).ln()
            } else {
                let l1 = (1.0 - t).abs().ln();
                p * l1 + ((p * t - 1.0) * (-p * l1).exp()).ln_1p()
            };
            let ground = (p * ad.ln() + ln_val + ln_h).exp();
            let slope = model.ratio_log_slope(pt.ln_r.exp());
            let corr = if slope == 0.0 {
                0.0
            } else {
                ad.powf(p - 2.0) * delta * slope * ln_val.exp()
            };
            ground + corr
        }
        Quantity::GroundState { delta } => {
            let grad = |pp: &ProfilePoint| {
                if pp.du_sign == 0.0 {
                    0.0
                } else {
                    (p * pp.du_rest + ln_total(model, chart, pt, p * pp.du_shift + base, p * pp.du_shift_eps, w.log_pow)).exp()
                }
            };
            if pp.u_sign == 0.0 {
                return grad(pp);
            }
            let ad = delta.abs();
            let ln_w_common = ln_total(model, chart, pt, 0.0, 0.0, w.log_pow);
            let ln_val = p * pp.u_rest + mul0(p * pp.u_shift + base, pt.ln_r) + mul0(p * pp.u_shift_eps, pt.ln_r) + ln_w_common;
            let w_ratio = if pp.du_sign == 0.0 {
                0.0
            } else {
                pp.du_sign * pp.u_sign * (mul0(pp.du_shift - pp.u_shift, pt.ln_r) + mul0(pp.du_shift_eps - pp.u_shift_eps, pt.ln_r) + pp.du_rest - pp.u_rest).exp()
            };
            let t = 1.0 + w_ratio / delta;
            let ground = if t.abs() < 1e-3 {
                (p * ad.ln() + ln_val).exp() * h_p(p, t)
            } else {
                // |ru'|^p + (p-1)|δu|^p + p|δ|^(p-2)δ |u|^(p-2) u (ru')
                let mut items = vec![(1.0, (p - 1.0).ln() + p * ad.ln() + ln_val)];
                if pp.du_sign != 0.0 {
                    let ln_grad = p * pp.du_rest + mul0(p * pp.du_shift + base, pt.ln_r) + mul0(p * pp.du_shift_eps, pt.ln_r) + ln_w_common;
                    items.push((1.0, ln_grad));
                    let ln_cross = (p - 1.0) * pp.u_rest
                        + pp.du_rest
                        + mul0((p - 1.0) * pp.u_shift + pp.du_shift + base, pt.ln_r)
                        + mul0((p - 1.0) * pp.u_shift_eps + pp.du_shift_eps, pt.ln_r)
                        + ln_w_common;
                    let sign = delta.signum() * pp.u_sign * pp.du_sign;
                    items.push((sign, p.ln() + (p - 1.0) * ad.ln() + ln_cross));
                }
                let (s, l) = signed_lse(&items);
                (s * l.exp()).max(0.0)
            };
            let slope = model.ratio_log_slope(pt.ln_r.exp());
            let corr = if slope == 0.0 {
                0.0
            } else {
                ad.powf(p - 2.0) * delta * slope * ln_val.exp()
            };
            ground + corr
        }
    }
}

/// Weighted integral of a profile quantity over a model.
pub(crate) fn integrate_quantity(
    model: &ModelSpace,
    u: &RadialProfile,
    p: f64,
    q: Quantity,
    w: Weighting,
    spec: &QuadratureSpec,
) -> Result<QuadratureResult> {
    spec.validate()?;
    let log_base = check_log_base(u, w.log_base)?;
    let w = Weighting { log_base, ..w };
    let ln_d = log_base.map(f64::ln);
    let need_logs = w.log_pow != 0.0 || u.uses_logs();
    if need_logs && ln_d.is_none() {
        return Err(HardyError::InvalidParameter("log weight requires a log base D".into()));
    }
    let k = model.k() as f64;
    let shifted = match q {
        Quantity::GroundState { delta } => u.derivative_plus_view(delta),
        _ => None,
    };
    let (eval_u, q) = match (&shifted, q) {
        (Some(v), Quantity::GroundState { delta }) => (v, Quantity::GroundStateShifted { delta }),
        _ => (u, q),
    };
    let mut total = QuadratureResult::zero();
    for i in 0..u.num_pieces() {
        let Some(setup) = piece_setup(model, u, i, ln_d, need_logs)? else {
            continue;
        };
        if let RadialProfile::PowerLog(pl) = u {
            let piece = &pl.pieces[i];
            let ends: Vec<End> = match setup.chart {
                Chart::LogLog => {
                    let mut v = Vec::new();
                    if setup.hi.is_infinite() {
                        v.push(End::RZero);
                    }
                    if setup.lo.is_infinite() {
                        v.push(End::RhoZero);
                    }
                    v
                }
                _ => {
                    let mut v = Vec::new();
                    if setup.lo == f64::NEG_INFINITY || (setup.chart == Chart::Linear && setup.lo <= 0.0) {
                        v.push(End::RZero);
                    }
                    if setup.hi == f64::INFINITY {
                        v.push(End::RInf);
                    }
                    v
                }
            };
            for end in ends {
                let (val, grad) = match q {
                    Quantity::Value | Quantity::ValueSlope { .. } => (true, false),
                    Quantity::Gradient => (false, true),
                    Quantity::GroundState { .. } | Quantity::GroundStateShifted { .. } => (true, true),
                };
                if val {
                    screen(piece, end, p, k, &w, false)?;
                }
                if grad {
                    screen(piece, end, p, k, &w, true)?;
                }
            }
        }
        let chart = setup.chart;
        let f = |x: f64| {
            let pt = chart.point(x, ln_d);
            let pp = eval_u.eval_piece(i, &pt);
            integrand_value(model, q, p, k, &w, chart, &pp, &pt)
        };
        let res = integrate_with_breaks(&f, &setup.breaks, spec);
        total = total + res;
    }
    Ok(total.scale(model.transverse_mass))
}

/// `-|δ|^(p-2) δ Σ_pieces [dens_ratio |u|^p r^(β+k)]` across piece ends.
fn ground_state_boundary(model: &ModelSpace, u: &RadialProfile, params: &HardyParams, ln_d: Option<f64>) -> Result<f64> {
    let (p, delta) = (params.p, params.delta);
    let base = params.beta + params.k as f64;
    let need_logs = u.uses_logs();
    let mut acc = 0.0;
    for i in 0..u.num_pieces() {
        let Some(setup) = piece_setup(model, u, i, ln_d, need_logs)? else {
            continue;
        };
        let chart = setup.chart;
        let b = |x: f64| -> f64 {
            if x.is_infinite() {
                return 0.0;
            }
            let pt = chart.point(x, ln_d);
            let pp = u.eval_piece(i, &pt);
            if pp.u_sign == 0.0 {
                return 0.0;
            }
            let ln = p * pp.u_rest + mul0(p * pp.u_shift + base, pt.ln_r) + mul0(p * pp.u_shift_eps, pt.ln_r) + model.ln_density_ratio(pt.ln_r.exp());
            ln.exp()
        };
        let (at_lo, at_hi) = (b(setup.lo), b(setup.hi));
        let diff = if chart.increasing() { at_hi - at_lo } else { at_lo - at_hi };
        acc += diff;
    }
    if !acc.is_finite() {
        return Err(HardyError::Divergent("boundary term is not finite".into()));
    }
    let pow = if p == 2.0 { 1.0 } else { delta.abs().powf(p - 2.0) };
    Ok(-pow * delta * acc * model.transverse_mass)
}

/// Numerator and denominator of the Hardy quotient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuotientParts {
    pub numerator: QuadratureResult,
    pub denominator: QuadratureResult,
}

impl QuotientParts {
    pub fn quotient(&self) -> Result<f64> {
        if !(self.denominator.value > 0.0) {
            return Err(HardyError::ZeroDenominator("denominator vanishes".into()));
        }
        Ok(self.numerator.value / self.denominator.value)
    }

    /// Error bound on the quotient from both quadrature estimates.
    pub fn quotient_error(&self) -> f64 {
        let q = self.numerator.value / self.denominator.value;
        (self.numerator.error_estimate + q.abs() * self.denominator.error_estimate) / self.denominator.value
    }
}

fn check_params(model: &ModelSpace, params: &HardyParams) -> Result<()> {
    if params.k != model.k() {
        return Err(HardyError::InvalidParameter(format!(
            "params k={} do not match model codimension {}",
            params.k,
            model.k()
        )));
    }
    Ok(())
}

/// `∫|u'|^p r^(p+β) dvol` and `∫|u|^p r^β dvol`.
pub fn hardy_parts(model: &ModelSpace, params: &HardyParams, u: &RadialProfile, spec: &QuadratureSpec) -> Result<QuotientParts> {
    check_params(model, params)?;
    let w = Weighting {
        r_pow: params.beta,
        log_pow: 0.0,
        log_base: None,
    };
    let numerator = integrate_quantity(model, u, params.p, Quantity::Gradient, w, spec)?.finite("gradient integral")?;
    let denominator = integrate_quantity(model, u, params.p, Quantity::Value, w, spec)?.finite("weighted L^p integral")?;
    Ok(QuotientParts { numerator, denominator })
}

/// Hardy quotient; `u` is normalized first so the result is exactly scale invariant.
pub fn hardy_quotient(model: &ModelSpace, params: &HardyParams, u: &RadialProfile, spec: &QuadratureSpec) -> Result<f64> {
    hardy_parts(model, params, &u.normalized(), spec)?.quotient()
}

/// `𝓘[u]` and the log remainder integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovedParts {
    pub functional: QuadratureResult,
    pub remainder: QuadratureResult,
}

/// `𝓘[u] = ∫|u'|^p r^(p+β) - |δ|^p ∫|u|^p r^β`, evaluated without cancellation.
pub fn improved_value(model: &ModelSpace, params: &HardyParams, u: &RadialProfile, d: f64, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    check_params(model, params)?;
    if u.is_zero() {
        return Ok(QuadratureResult::zero());
    }
    let w = Weighting {
        r_pow: params.beta,
        log_pow: 0.0,
        log_base: Some(d),
    };
    let log_base = check_log_base(u, Some(d))?;
    let ln_d = log_base.map(f64::ln);
    let bulk = if params.delta == 0.0 {
        integrate_quantity(model, u, params.p, Quantity::Gradient, w, spec)?
    } else {
        integrate_quantity(model, u, params.p, Quantity::GroundState { delta: params.delta }, w, spec)?
    };
    let bulk = bulk.finite("improved functional")?;
    let boundary = if params.delta == 0.0 {
        0.0
    } else {
        ground_state_boundary(model, u, params, ln_d)?
    };
    Ok(QuadratureResult {
        value: bulk.value + boundary,
        error_estimate: bulk.error_estimate + 1e-15 * boundary.abs(),
        ..bulk
    })
}

/// `R_γ[u] = ∫|u|^p r^β log^(-γ)(D/r) dvol`.
pub fn remainder_integral(model: &ModelSpace, params: &HardyParams, u: &RadialProfile, d: f64, gamma: f64, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    check_params(model, params)?;
    let w = Weighting {
        r_pow: params.beta,
        log_pow: -gamma,
        log_base: Some(d),
    };
    integrate_quantity(model, u, params.p, Quantity::Value, w, spec)?.finite("remainder integral")
}

/// `(𝓘[u], R_2[u])`.
pub fn improved_functional(model: &ModelSpace, params: &HardyParams, u: &RadialProfile, d: f64, spec: &QuadratureSpec) -> Result<ImprovedParts> {
    if u.is_zero() {
        return Ok(ImprovedParts {
            functional: QuadratureResult::zero(),
            remainder: QuadratureResult::zero(),
        });
    }
    Ok(ImprovedParts {
        functional: improved_value(model, params, u, d, spec)?,
        remainder: remainder_integral(model, params, u, d, 2.0, spec)?,
    })
}

/// Check the log-Hardy hypotheses for support radius `sup_r`.
pub fn log_hardy_hypotheses(k: usize, p: f64, beta: f64, alpha: f64, d: f64, sup_r: f64) -> Result<()> {
    let kf = k as f64;
    if !(sup_r <= d) {
        return Err(HardyError::Refused(format!("sup r <= D fails (sup r={sup_r}, D={d})")));
    }
    if !(p >= kf && kf > 1.0) {
        return Err(HardyError::Refused(format!("p >= k > 1 fails (p={p}, k={k})")));
    }
    let lhs = (d / sup_r).ln() * (kf - p);
    let mid = (alpha - 1.0) * (p - 1.0);
    if !(lhs <= mid) {
        return Err(HardyError::Refused(format!(
            "log(D/sup r)(k-p) <= (alpha-1)(p-1) fails ({lhs} > {mid})"
        )));
    }
    if !(mid < beta + 1.0) {
        return Err(HardyError::Refused(format!(
            "(alpha-1)(p-1) < beta+1 fails ({mid} >= {})",
            beta + 1.0
        )));
    }
    Ok(())
}

/// Largest radius in the support of a profile on a model.
pub fn support_sup(model: &ModelSpace, u: &RadialProfile) -> f64 {
    let ln_d = u.log_base().map(f64::ln);
    let mut sup: f64 = 0.0;
    for i in 0..u.num_pieces() {
        let (chart, lo, hi) = u.piece_bounds(i);
        let r = match chart {
            Chart::Linear => hi,
            Chart::LogRadius => hi.exp(),
            Chart::LogLog => chart.point(lo, ln_d).ln_r.exp(),
        };
        sup = sup.max(r);
    }
    if let RadialProfile::PowerLog(p) = u {
        if let Some(c) = p.cutoff {
            sup = sup.min(c.eta);
        }
    }
    sup.min(model.r_max)
}

/// Numerator and denominator of the log-weighted Hardy quotient.
pub fn log_hardy_parts(model: &ModelSpace, p: f64, beta: f64, alpha: f64, d: f64, u: &RadialProfile, spec: &QuadratureSpec) -> Result<QuotientParts> {
    if !(p > 1.0) {
        return Err(HardyError::InvalidParameter(format!("p>1 is required (got p={p})")));
    }
    log_hardy_hypotheses(model.k(), p, beta, alpha, d, support_sup(model, u))?;
    let num = Weighting {
        r_pow: -p,
        log_pow: p + beta,
        log_base: Some(d),
    };
    let den = Weighting {
        r_pow: -p,
        log_pow: beta,
        log_base: Some(d),
    };
    let numerator = integrate_quantity(model, u, p, Quantity::Gradient, num, spec)?.finite("log-weighted gradient integral")?;
    let denominator = integrate_quantity(model, u, p, Quantity::Value, den, spec)?.finite("log-weighted L^p integral")?;
    Ok(QuotientParts { numerator, denominator })
}

pub fn log_hardy_quotient(model: &ModelSpace, p: f64, beta: f64, alpha: f64, d: f64, u: &RadialProfile, spec: &QuadratureSpec) -> Result<f64> {
    log_hardy_parts(model, p, beta, alpha, d, &u.normalized(), spec)?.quotient()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn constants_match_examples() {
        let a = HardyParams::new(2.0, -2.0, 1).unwrap();
        assert_eq!(sharp_constant(&a), 0.25);
        assert_eq!(remainder_constant(&a).unwrap(), 0.25);
        let b = HardyParams::new(3.0, -4.0, 1).unwrap();
        assert_relative_eq!(sharp_constant(&b), 1.0, epsilon = 1e-15);
        assert_relative_eq!(remainder_constant(&b).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        let c = HardyParams::new(2.0, -2.0, 2).unwrap();
        assert_eq!(sharp_constant(&c), 0.0);
        let e = HardyParams::new(2.0, -3.0, 1).unwrap();
        assert_eq!(remainder_constant(&e).unwrap(), 0.25);
        let z = HardyParams::new(1.5, -1.0, 1).unwrap();
        assert!(remainder_constant(&z).is_err());
        assert!(HardyParams::new(1.0, 0.0, 1).unwrap_err().to_string().contains("p>1"));
        assert_eq!(log_hardy_constant(2.0, 0.0, 1.0), 0.5);
    }

    #[test]
    fn h_p_series_matches_direct() {
        for &p in &[1.3, 2.0, 3.7] {
            for &t in &[-9e-4f64, 5e-4, 9.99e-4] {
                let direct = (1.0 - t).abs().powf(p) - 1.0 + p * t;
                let ser = h_p(p, t);
                assert!((ser - direct).abs() < 1e-8 * direct.abs(), "{p} {t}");
            }
        }
    }

    #[test]
    fn quotient_of_r_exp_minus_r() {
        let model = ModelSpace::cylinder_section(1).unwrap();
        let params = HardyParams::for_model(&model, 2.0, -2.0).unwrap();
        let u = RadialProfile::power_exp(1.0, 1.0, -1.0, 0.0, f64::INFINITY).unwrap();
        let q = hardy_quotient(&model, &params, &u, &spec()).unwrap();
        assert_relative_eq!(q, 0.5, epsilon = 1e-8);
        let q2 = hardy_quotient(&model, &params, &u.scaled(-3.5), &spec()).unwrap();
        assert_relative_eq!(q, q2, max_relative = 1e-12);
    }

    #[test]
    fn critical_power_is_refused() {
        let model = ModelSpace::cylinder_section(1).unwrap();
        let params = HardyParams::for_model(&model, 2.0, -2.0).unwrap();
        let u = RadialProfile::power_exp(1.0, -params.delta, 0.0, 0.0, 1.0).unwrap();
        let err = hardy_quotient(&model, &params, &u, &spec()).unwrap_err();
        assert!(matches!(err, HardyError::Divergent(_)), "{err}");
    }

    #[test]
    fn zero_profile_improved_functional() {
        let model = ModelSpace::cylinder_axis(1).unwrap();
        let params = HardyParams::for_model(&model, 2.0, -2.0).unwrap();
        let out = improved_functional(&model, &params, &RadialProfile::zero(), 4.0, &spec()).unwrap();
        assert_eq!(out.functional.value, 0.0);
        assert_eq!(out.remainder.value, 0.0);
        assert!(hardy_quotient(&model, &params, &RadialProfile::zero(), &spec()).is_err());
    }

    #[test]
    fn ground_state_form_equals_difference() {
        for &(p, beta) in &[(2.0, -2.0), (3.0, -4.0), (1.5, -2.5)] {
            let model = ModelSpace::cylinder_axis(2).unwrap();
            let params = HardyParams::for_model(&model, p, beta).unwrap();
            let u = RadialProfile::bump(0.2, 2.5, 3, 1.0).unwrap();
            let parts = hardy_parts(&model, &params, &u, &spec()).unwrap();
            let direct = parts.numerator.value - sharp_constant(&params) * parts.denominator.value;
            let gs = improved_value(&model, &params, &u, 8.0, &spec()).unwrap().value;
            assert_relative_eq!(gs, direct, max_relative = 1e-7);
        }
    }

    #[test]
    fn bump_on_axis_satisfies_improved_bound() {
        let model = ModelSpace::cylinder_axis(1).unwrap();
        let params = HardyParams::for_model(&model, 2.0, -2.0).unwrap();
        let u = RadialProfile::bump(0.1, 3.0, 3, 1.0).unwrap();
        let out = improved_functional(&model, &params, &u, 4.0, &spec()).unwrap();
        assert!(out.functional.value >= 0.25 * out.remainder.value);
    }

    #[test]
    fn log_hardy_refusals_and_value() {
        let model = ModelSpace::torus_subtorus(3, 1, 1.0).unwrap();
        let d = 1.0;
        let u = RadialProfile::power_log(1.0, 0.0, 0.5, d, 0.0, 0.5).unwrap();
        let err = log_hardy_quotient(&model, 2.0, 0.0, 2.5, d, &u, &spec()).unwrap_err();
        assert!(err.to_string().contains("(alpha-1)(p-1) < beta+1"));
        let bump = RadialProfile::bump(0.1, 0.9, 3, 1.0).unwrap();
        let q = log_hardy_quotient(&model, 2.0, 0.0, 1.0, d, &bump, &spec()).unwrap();
        assert!(q >= 0.25);
    }

    #[test]
    fn log_base_mismatch_is_refused() {
        let model = ModelSpace::cylinder_axis(1).unwrap();
        let params = HardyParams::for_model(&model, 2.0, -2.0).unwrap();
        let u = RadialProfile::power_log(1.0, 1.0, 1.0, 5.0, 0.5, 1.0).unwrap();
        let err = remainder_integral(&model, &params, &u, 4.0, 2.0, &spec()).unwrap_err();
        assert!(matches!(err, HardyError::Refused(_)));
    }
}
