//! Near-extremal families, the integrals `J_α(ε)`, and the Taylor constants
//! behind the improved inequality.

use serde::{Deserialize, Serialize};

use crate::error::{HardyError, Result};
use crate::functionals::{
    integrate_quantity, Chart, HardyParams, Piece, Quantity, RadialProfile, Term, Weighting,
};
use crate::geometry::ModelSpace;
use crate::quadrature::{QuadratureResult, QuadratureSpec};

pub use crate::functionals::Cutoff as CutoffSpec;

/// Upper end of the search interval for `𝔗`.
pub const T_CAP: f64 = 1.0;

fn log_term(ln_coeff: f64, a: f64, b: f64) -> Term {
    log_term_eps(ln_coeff, a, 0.0, b)
}

/// Term with power `a + a_eps` kept in two parts.
fn log_term_eps(ln_coeff: f64, a: f64, a_eps: f64, b: f64) -> Term {
    Term {
        sign: 1.0,
        ln_coeff,
        a,
        a_eps,
        b,
        lambda: 0.0,
    }
}

/// Variable in which the two-piece family is a pure power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FamilyVariable {
    /// `X = r`.
    Distance,
    /// `X = log(D/r)`.
    LogDistance { d: f64 },
}

/// `v_ε = (X/s)^c(ε)` for `X <= s` and `(X/s)^-c(ε/2)` beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VEpsilonFamily {
    pub ln_s: f64,
    pub epsilon: f64,
    pub c_eps: f64,
    pub c_eps_half: f64,
    pub variable: FamilyVariable,
    /// Upper radius of the ambient model.
    pub r_max: f64,
}

/// `(|k+β| + ε) / p`.
pub fn c_of(params: &HardyParams, epsilon: f64) -> f64 {
    ((params.k as f64 + params.beta).abs() + epsilon) / params.p
}

/// Exponent `L(ε)` of the truncation level `ι = e^(-c L)`.
pub fn truncation_depth(epsilon: f64) -> f64 {
    (2.0 * (1.0 / epsilon).ln() + 20.0) / epsilon
}

impl VEpsilonFamily {
    /// Distance family with split radius `s`.
    pub fn distance(params: &HardyParams, epsilon: f64, s: f64, r_max: f64) -> Result<Self> {
        Self::distance_ln(params, epsilon, s.ln(), r_max)
    }

    pub fn distance_ln(params: &HardyParams, epsilon: f64, ln_s: f64, r_max: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(HardyError::InvalidParameter("epsilon must be positive".into()));
        }
        if !(ln_s < r_max.ln()) {
            return Err(HardyError::Domain("split radius must satisfy 0 < s < r_max".into()));
        }
        Ok(Self {
            ln_s,
            epsilon,
            c_eps: c_of(params, epsilon),
            c_eps_half: c_of(params, 0.5 * epsilon),
            variable: FamilyVariable::Distance,
            r_max,
        })
    }

    /// Distance family whose `ι(ε)`-truncation is compactly supported in `(0, r_max)`.
    pub fn for_sweep(params: &HardyParams, epsilon: f64, r_max: f64) -> Result<Self> {
        let c = c_of(params, epsilon);
        let c2 = c_of(params, 0.5 * epsilon);
        let ln_s = if r_max.is_finite() {
            r_max.ln() - (c / c2) * truncation_depth(epsilon) - 1.0
        } else {
            0.0
        };
        Self::distance_ln(params, epsilon, ln_s, r_max)
    }

    /// Log-distance family with `c(ε) = (|(α-1)(p-1)-β-1| + ε)/p` and `s = ln 2`.
    pub fn log_distance(p: f64, beta: f64, alpha: f64, epsilon: f64, d: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !(p > 1.0) || !(d > 0.0) {
            return Err(HardyError::InvalidParameter(
                "log family needs epsilon > 0, p > 1, D > 0".into(),
            ));
        }
        let base = ((alpha - 1.0) * (p - 1.0) - beta - 1.0).abs();
        Ok(Self {
            ln_s: 2f64.ln().ln(),
            epsilon,
            c_eps: (base + epsilon) / p,
            c_eps_half: (base + 0.5 * epsilon) / p,
            variable: FamilyVariable::LogDistance { d },
            r_max: d,
        })
    }

    /// `c(ε)^p`, the strict upper envelope of the family's quotient.
    pub fn envelope(&self, p: f64) -> f64 {
        self.c_eps.powf(p)
    }

    /// `ln ι(ε)`.
    pub fn ln_iota(&self) -> f64 {
        -self.c_eps * truncation_depth(self.epsilon)
    }
}

pub fn v_epsilon_profile(fam: &VEpsilonFamily) -> Result<RadialProfile> {
    let (c, c2) = (fam.c_eps, fam.c_eps_half);
    match fam.variable {
        FamilyVariable::Distance => {
            let ln_s = fam.ln_s;
            let inner = Piece::new(Chart::LogRadius, f64::NEG_INFINITY, ln_s, vec![log_term(-c * ln_s, c, 0.0)]);
            let outer = Piece::new(Chart::LogRadius, ln_s, fam.r_max.ln(), vec![log_term(c2 * ln_s, -c2, 0.0)]);
            RadialProfile::from_pieces(vec![inner, outer], None)
        }
        FamilyVariable::LogDistance { d } => {
            // z = ln ρ; ρ <= s is the region near r = D.
            let ln_s = fam.ln_s;
            let inner = Piece::new(Chart::LogLog, f64::NEG_INFINITY, ln_s, vec![log_term(-c * ln_s, 0.0, c)]);
            let outer = Piece::new(Chart::LogLog, ln_s, f64::INFINITY, vec![log_term(c2 * ln_s, 0.0, -c2)]);
            RadialProfile::from_pieces(vec![inner, outer], Some(d))
        }
    }
}

/// `v_{ε,ι(ε)}`.
pub fn truncated_v_epsilon(fam: &VEpsilonFamily) -> Result<RadialProfile> {
    v_epsilon_profile(fam)?.truncate_ln(fam.ln_iota())
}

pub fn truncate(profile: &RadialProfile, iota: f64) -> Result<RadialProfile> {
    profile.truncate(iota)
}

/// `u_ε = φ r^(-δ+ε) log(D/r)^θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UEpsilonFamily {
    pub epsilon: f64,
    pub theta: f64,
    pub d: f64,
    pub params: HardyParams,
    pub cutoff: CutoffSpec,
}

impl UEpsilonFamily {
    pub fn new(params: HardyParams, epsilon: f64, theta: f64, d: f64, cutoff: CutoffSpec) -> Result<Self> {
        let p = params.p;
        if !(theta > 1.0 / p && theta < 2.0 / p) {
            return Err(HardyError::InvalidParameter(format!(
                "theta must lie in (1/p, 2/p) (got {theta})"
            )));
        }
        Self::unchecked(params, epsilon, theta, d, cutoff)
    }

    /// Same family without the range check on `θ`; `θ = 0` gives `φ r^(-δ+ε)`.
    pub fn unchecked(params: HardyParams, epsilon: f64, theta: f64, d: f64, cutoff: CutoffSpec) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(HardyError::InvalidParameter("epsilon must be positive".into()));
        }
        if !(cutoff.eta > 0.0 && cutoff.eta <= d) {
            return Err(HardyError::InvalidParameter("cutoff radius must lie in (0, D]".into()));
        }
        Ok(Self {
            epsilon,
            theta,
            d,
            params,
            cutoff,
        })
    }
}

/// Profile `φ r^a log(D/r)^b` in the log-log chart, split near the mass peak.
fn cutoff_power_log(a: f64, a_eps: f64, b: f64, d: f64, eta: f64, peak_rho: f64) -> Result<RadialProfile> {
    let z_lo = (d / eta).ln().ln();
    let term = log_term_eps(0.0, a, a_eps, b);
    let z_peak = peak_rho.ln();
    let pieces = if z_peak.is_finite() && z_peak > z_lo + 1.0 {
        vec![
            Piece::new(Chart::LogLog, z_lo, z_peak, vec![term]),
            Piece::new(Chart::LogLog, z_peak, f64::INFINITY, vec![term]),
        ]
    } else {
        vec![Piece::new(Chart::LogLog, z_lo, f64::INFINITY, vec![term])]
    };
    RadialProfile::from_pieces(pieces, Some(d))?.with_cutoff(eta)
}

pub fn u_epsilon_profile(fam: &UEpsilonFamily, model: &ModelSpace) -> Result<RadialProfile> {
    if fam.d < model.r_max.min(fam.cutoff.eta) || fam.cutoff.eta > model.r_max {
        return Err(HardyError::Domain("u_eps needs eta <= r_max and D >= eta".into()));
    }
    let x = fam.params.p * fam.epsilon;
    let peak = (fam.params.p * fam.theta + 1.0).max(1.0) / x;
    cutoff_power_log(-fam.params.delta, fam.epsilon, fam.theta, fam.d, fam.cutoff.eta, peak)
}

/// `J_α(ε) = ∫ φ^p r^(-k+εp) log^α(D/r) dvol`.
pub fn j_alpha(
    model: &ModelSpace,
    alpha: f64,
    epsilon: f64,
    p: f64,
    d: f64,
    cutoff: CutoffSpec,
    spec: &QuadratureSpec,
) -> Result<QuadratureResult> {
    if !(epsilon > 0.0) || !(p > 1.0) {
        return Err(HardyError::InvalidParameter("J_alpha needs epsilon > 0 and p > 1".into()));
    }
    if cutoff.eta > model.r_max || cutoff.eta > d {
        return Err(HardyError::Domain("J_alpha needs eta <= min(r_max, D)".into()));
    }
    let x = p * epsilon;
    let u = cutoff_power_log(0.0, epsilon, 0.0, d, cutoff.eta, (alpha + 1.0).max(1.0) / x)?;
    let w = Weighting {
        r_pow: -(model.k() as f64),
        log_pow: alpha,
        log_base: Some(d),
    };
    integrate_quantity(model, &u, p, Quantity::Value, w, spec)?.finite("J_alpha")
}

/// Constants `a`, `𝔗` and `𝒯 = e^(1/𝔗)` of the improved inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorConstants {
    pub a: f64,
    pub frak_t: f64,
    pub cal_t: f64,
}

/// `f`, `f - 1` and `f'''` for fixed `(p, δ, a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorFunction {
    pub p: f64,
    pub delta: f64,
    pub a: f64,
}

impl TaylorFunction {
    fn b(&self) -> f64 {
        (self.p - 1.0) / (self.p * self.delta)
    }

    fn kappa(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// `1 + b t + a t²`.
    pub fn q(&self, t: f64) -> f64 {
        1.0 + self.b() * t + self.a * t * t
    }

    pub fn f(&self, t: f64) -> f64 {
        1.0 + self.f_minus_one(t)
    }

    /// `f(t) - 1` without the cancellation of the constant term.
    pub fn f_minus_one(&self, t: f64) -> f64 {
        let (p, b, a) = (self.p, self.b(), self.a);
        let e = b * t + a * t * t;
        p * e + t * t / self.delta * (b + 2.0 * a * t) - (p - 1.0) * (self.kappa() * e.ln_1p()).exp_m1()
    }

    pub fn f_second_at_zero(&self) -> f64 {
        (self.p - 1.0) / (self.p * self.delta * self.delta)
    }

    pub fn f_third(&self, t: f64) -> f64 {
        let (p, a, k) = (self.p, self.a, self.kappa());
        let q = self.q(t);
        let dq = self.b() + 2.0 * a * t;
        12.0 * a / self.delta
            - (p - 1.0)
                * (k * (k - 1.0) * (k - 2.0) * q.powf(k - 3.0) * dq.powi(3) + 6.0 * a * k * (k - 1.0) * q.powf(k - 2.0) * dq)
    }

    /// `(p-1)/(2pδ²) t²`.
    pub fn quadratic_floor(&self, t: f64) -> f64 {
        0.5 * self.f_second_at_zero() * t * t
    }
}

/// `(2-p)(p-1)/(6p²δ²)`.
pub fn a_bound(p: f64, delta: f64) -> f64 {
    (2.0 - p) * (p - 1.0) / (6.0 * p * p * delta * delta)
}

/// Admissible `a` for `(p, δ)`.
pub fn choose_a(p: f64, delta: f64) -> f64 {
    let bound = a_bound(p, delta);
    if delta > 0.0 {
        bound + 1.0
    } else if p < 2.0 {
        0.5 * bound
    } else {
        bound - 1.0
    }
}

pub fn taylor_threshold(params: &HardyParams) -> Result<TaylorConstants> {
    let delta = params.delta;
    if delta == 0.0 {
        return Err(HardyError::Domain("Taylor constants need delta != 0".into()));
    }
    let a = choose_a(params.p, delta);
    let f = TaylorFunction { p: params.p, delta, a };
    let good = |t: f64| f.q(t) > 0.0 && f.f_third(t) > 0.0;
    if !good(0.0) {
        return Err(HardyError::NonConvergence("f''' is not positive at t=0".into()));
    }
    let n = 4096;
    let mut last_good = 0.0;
    let mut first_bad = None;
    for i in 1..=n {
        let t = T_CAP * i as f64 / n as f64;
        if good(t) {
            last_good = t;
        } else {
            first_bad = Some(t);
            break;
        }
    }
    let frak_t = match first_bad {
        None => T_CAP,
        Some(mut bad) => {
            let mut ok = last_good;
            for _ in 0..200 {
                let mid = 0.5 * (ok + bad);
                if mid == ok || mid == bad {
                    break;
                }
                if good(mid) {
                    ok = mid;
                } else {
                    bad = mid;
                }
            }
            ok
        }
    };
    if !(frak_t > 0.0) {
        return Err(HardyError::NonConvergence("no positive threshold found".into()));
    }
    Ok(TaylorConstants {
        a,
        frak_t,
        cal_t: (1.0 / frak_t).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn taylor_reference_case() {
        let params = HardyParams::new(2.0, -2.0, 1).unwrap();
        let tc = taylor_threshold(&params).unwrap();
        assert_eq!(tc.a, -1.0);
        assert_relative_eq!(tc.frak_t, 0.5, epsilon = 1e-12);
        assert_relative_eq!(tc.cal_t, 2f64.exp(), max_relative = 1e-10);
        let f = TaylorFunction { p: 2.0, delta: -0.5, a: -1.0 };
        assert_eq!(f.f(0.0), 1.0);
        for i in 0..=1000 {
            let t = tc.frak_t * i as f64 / 1000.0;
            assert!(f.f_minus_one(t) >= f.quadratic_floor(t) - 1e-13);
            assert_relative_eq!(f.f_third(t), 12.0 - 24.0 * t, epsilon = 1e-9);
        }
    }

    #[test]
    fn f_derivatives_at_zero() {
        for &(p, beta, k) in &[(1.5, -3.0, 1usize), (3.0, -5.0, 2), (2.5, 1.0, 3)] {
            let params = HardyParams::new(p, beta, k).unwrap();
            let f = TaylorFunction { p, delta: params.delta, a: choose_a(p, params.delta) };
            let h = 1e-4;
            let d1 = (f.f_minus_one(h) - f.f_minus_one(-h)) / (2.0 * h);
            let d2 = (f.f_minus_one(h) + f.f_minus_one(-h)) / (h * h);
            assert!(d1.abs() < 1e-6, "{d1}");
            assert_relative_eq!(d2, f.f_second_at_zero(), max_relative = 1e-5);
            let d3 = (f.f(2.0 * h) - 2.0 * f.f(h) + 2.0 * f.f(-h) - f.f(-2.0 * h)) / (2.0 * h * h * h);
            assert_relative_eq!(d3, f.f_third(0.0), max_relative = 1e-3);
        }
    }

    #[test]
    fn v_epsilon_is_one_at_split() {
        let params = HardyParams::new(2.0, -2.0, 1).unwrap();
        let fam = VEpsilonFamily::distance(&params, 0.1, 0.5, f64::INFINITY).unwrap();
        let v = v_epsilon_profile(&fam).unwrap();
        let pt = Chart::LogRadius.point(0.5f64.ln(), None);
        assert_relative_eq!(v.eval_piece(0, &pt).u(pt.ln_r), 1.0, epsilon = 1e-15);
        assert_relative_eq!(v.eval_piece(1, &pt).u(pt.ln_r), 1.0, epsilon = 1e-15);
        assert_relative_eq!(c_of(&params, 1e-12), 0.5, epsilon = 1e-12);
        // Cutting at the peak value leaves only the inner piece, which is < 1 too.
        assert!(matches!(v.truncate(1.0), Err(HardyError::EmptySupport(_))));
        let t = v.truncate(0.9).unwrap();
        assert!(t.eval(0.48).0 > 0.0);
        assert_eq!(t.eval(10.0).0, 0.0);
    }

    #[test]
    fn u_epsilon_plateau_value() {
        let model = ModelSpace::cylinder_axis(1).unwrap();
        let params = HardyParams::for_model(&model, 2.0, -2.0).unwrap();
        let fam = UEpsilonFamily::new(params, 0.01, 0.75, 20.0, CutoffSpec { eta: 1.0 }).unwrap();
        let u = u_epsilon_profile(&fam, &model).unwrap();
        let r: f64 = 0.3;
        let (v, dv) = u.eval(r);
        let rho = (20.0 / r).ln();
        let expect = r.powf(0.5 + 0.01) * rho.powf(0.75);
        assert_relative_eq!(v, expect, max_relative = 1e-13);
        let dexpect = r.powf(0.5 + 0.01 - 1.0) * rho.powf(0.75) * (0.5 + 0.01 - 0.75 / rho);
        assert_relative_eq!(dv, dexpect, max_relative = 1e-12);
        assert_eq!(u.eval(1.2).0, 0.0);
    }

    #[test]
    fn j_alpha_closed_form_without_cutoff_transition() {
        // For α = 0, J = ∫ φ^p r^(εp-1) dr; compare the plateau part by direct quadrature.
        let model = ModelSpace::cylinder_axis(1).unwrap();
        let eps = 0.05;
        let j = j_alpha(&model, 0.0, eps, 2.0, 10.0, CutoffSpec { eta: 2.0 }, &QuadratureSpec::default()).unwrap();
        let phi = CutoffSpec { eta: 2.0 };
        let tail = crate::quadrature::integrate(&|r: f64| phi.eval(r).0.powi(2) * r.powf(0.1 - 1.0), 1.0, 2.0, &QuadratureSpec::default());
        assert_relative_eq!(j.value, 1.0 / 0.1 + tail.value, max_relative = 1e-8);
    }
}
