//! Randomized and grid property trials: the improved inequality on bump
//! profiles, the Taylor-constant floor, and the Laplacian comparison bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HardyError, Result};
use crate::exec::{par_map, ExecPolicy};
use crate::extremizers::{choose_a, taylor_threshold, TaylorFunction};
use crate::functionals::{
    improved_functional, log_integral_inequality_check, pointwise_sides, remainder_constant, HardyParams, PointwiseData,
    RadialProfile,
};
use crate::geometry::ModelSpace;
use crate::quadrature::QuadratureSpec;

/// Generator used by every randomized trial.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng";

/// Absolute slack of the inequality checks, on top of the quadrature errors.
pub const CHECK_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    /// `(a, b, q, amplitude)` per bump.
    pub parts: Vec<(f64, f64, u32, f64)>,
}

/// One to three disjoint bumps inside `(0, r_max)` with peak values in `±[0.1, 2)`.
///
/// Bump `i` lives in the slot `[R 4^-(i+1), R 4^-i]`, so `b/a >= 2` and the
/// power expansion of `(r-a)^q (b-r)^q` stays well conditioned.
pub fn random_bumps(rng: &mut ChaCha8Rng, r_max: f64) -> BumpSpec {
    let hi = if r_max.is_finite() { r_max } else { 10.0 };
    let count = rng.random_range(1..=3usize);
    let parts = (0..count)
        .map(|i| {
            let slot_hi = hi * 0.25f64.powi(i as i32);
            let a = 0.25 * slot_hi * rng.random_range(1.0..1.5);
            let b = slot_hi * rng.random_range(0.8..0.99);
            let q = rng.random_range(2..=4u32);
            let peak = rng.random_range(0.1..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (a, b, q, peak / (0.5 * (b - a)).powi(2 * q as i32))
        })
        .collect();
    BumpSpec { parts }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovedTrial {
    pub functional: f64,
    pub remainder: f64,
    /// `𝓘 - C R₂ + errors`; negative means a violation.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovedTrialReport {
    pub model_id: String,
    pub d: f64,
    pub constant: f64,
    pub seed: u64,
    pub rng: String,
    pub trials: Vec<ImprovedTrial>,
    pub violations: usize,
    pub min_slack: f64,
}

/// `𝓘[u] >= C R₂[u] - errors` on random bump profiles.
pub fn improved_bump_trials(
    model: &ModelSpace,
    params: &HardyParams,
    d: f64,
    seed: u64,
    trials: usize,
    spec: &QuadratureSpec,
    policy: ExecPolicy,
) -> Result<ImprovedTrialReport> {
    let constant = remainder_constant(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<BumpSpec> = (0..trials).map(|_| random_bumps(&mut rng, model.r_max)).collect();
    let results: Vec<Result<ImprovedTrial>> = par_map(policy, &specs, |b| {
        let u = RadialProfile::bumps(&b.parts)?;
        let parts = improved_functional(model, params, &u, d, spec)?;
        let (f, r) = (parts.functional, parts.remainder);
        Ok(ImprovedTrial {
            functional: f.value,
            remainder: r.value,
            slack: f.value - constant * r.value + f.error_estimate + constant * r.error_estimate + CHECK_SLACK,
        })
    });
    let trials: Vec<ImprovedTrial> = results.into_iter().collect::<Result<_>>()?;
    Ok(ImprovedTrialReport {
        model_id: model.id(),
        d,
        constant,
        seed,
        rng: RNG_ALGORITHM.into(),
        violations: trials.iter().filter(|t| t.slack < 0.0).count(),
        min_slack: trials.iter().map(|t| t.slack).fold(f64::INFINITY, f64::min),
        trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorTrial {
    pub p: f64,
    pub beta: f64,
    pub k: usize,
    pub a: f64,
    pub frak_t: f64,
    pub cal_t: f64,
    /// `min (f(t) - 1 - (p-1)/(2pδ²) t²)` over the grid.
    pub min_slack: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorTrialReport {
    pub seed: u64,
    pub rng: String,
    pub grid_points: usize,
    pub trials: Vec<TaylorTrial>,
    pub violations: usize,
}

/// Floor check of `f` on `grid_points` points of `[0, 𝔗]` for one parameter set.
pub fn taylor_floor_check(params: &HardyParams, grid_points: usize) -> Result<TaylorTrial> {
    let tc = taylor_threshold(params)?;
    let f = TaylorFunction {
        p: params.p,
        delta: params.delta,
        a: choose_a(params.p, params.delta),
    };
    let mut min_slack = f64::INFINITY;
    let mut violations = 0;
    for i in 0..grid_points {
        let t = tc.frak_t * i as f64 / (grid_points - 1).max(1) as f64;
        let floor = f.quadratic_floor(t);
        let slack = f.f_minus_one(t) - floor;
        min_slack = min_slack.min(slack);
        if slack < -1e-12 * (1.0 + floor.abs()) || f.q(t) <= 0.0 {
            violations += 1;
        }
    }
    Ok(TaylorTrial {
        p: params.p,
        beta: params.beta,
        k: params.k,
        a: tc.a,
        frak_t: tc.frak_t,
        cal_t: tc.cal_t,
        min_slack,
        violations,
    })
}

/// Random `(p, β, k)` with `δ` bounded away from 0.
pub fn taylor_trials(seed: u64, trials: usize, grid_points: usize) -> Result<TaylorTrialReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let p = rng.random_range(1.1..4.0);
        let k = rng.random_range(1..=4usize);
        let delta = rng.random_range(0.2..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let params = HardyParams::new(p, p * delta - k as f64, k)?;
        out.push(taylor_floor_check(&params, grid_points)?);
    }
    Ok(TaylorTrialReport {
        seed,
        rng: RNG_ALGORITHM.into(),
        grid_points,
        violations: out.iter().map(|t| t.violations).sum(),
        trials: out,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplacianCheck {
    pub model_id: String,
    pub points: usize,
    /// `max (Δr - bound)` over the grid.
    pub max_excess: f64,
    pub passed: bool,
}

/// `Δr(t) <= (k-1)/t` (or `<= 0` on the hemisphere) on an interior grid.
pub fn laplacian_check(model: &ModelSpace, points: usize) -> Result<LaplacianCheck> {
    if points < 2 {
        return Err(HardyError::InvalidParameter("need at least two grid points".into()));
    }
    let hi = if model.r_max.is_finite() { model.r_max } else { 10.0 };
    let mut max_excess = f64::NEG_INFINITY;
    let mut passed = true;
    for i in 1..=points {
        let t = hi * i as f64 / (points + 1) as f64;
        let lap = model.laplacian_r(t)?;
        let bound = model.laplacian_bound(t);
        let excess = lap - bound;
        max_excess = max_excess.max(excess);
        if excess > 1e-12 * (1.0 + bound.abs()) {
            passed = false;
        }
    }
    Ok(LaplacianCheck {
        model_id: model.id(),
        points,
        max_excess,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseTrialReport {
    pub seed: u64,
    pub rng: String,
    pub trials: usize,
    pub violations: usize,
    /// `min (LHS - RHS) / (1 + |RHS|)`.
    pub min_rel_slack: f64,
}

/// The pointwise gradient inequality at random points, `p ∈ [2, 4]`, dimensions 1 to 4.
pub fn pointwise_trials(seed: u64, trials: usize) -> Result<PointwiseTrialReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut min_rel_slack = f64::INFINITY;
    for _ in 0..trials {
        let dim = rng.random_range(1..=4usize);
        let alpha = rng.random_range(0.2..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let vec = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect() };
        let d = PointwiseData {
            p: rng.random_range(2.0..4.0),
            alpha,
            rho: rng.random_range(0.05..3.0),
            grad_rho: vec(&mut rng),
            u: rng.random_range(-2.0..2.0),
            grad_u: vec(&mut rng),
        };
        let (lhs, rhs) = pointwise_sides(&d)?;
        let rel = (lhs - rhs) / (1.0 + rhs.abs());
        min_rel_slack = min_rel_slack.min(rel);
        if rel < -CHECK_SLACK {
            violations += 1;
        }
    }
    Ok(PointwiseTrialReport {
        seed,
        rng: RNG_ALGORITHM.into(),
        trials,
        violations,
        min_rel_slack,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogIntegralTrialReport {
    pub model_id: String,
    pub p: f64,
    pub s: f64,
    pub d: f64,
    pub seed: u64,
    pub rng: String,
    pub trials: usize,
    pub violations: usize,
    /// `min (LHS - RHS + error)`.
    pub min_slack: f64,
}

/// The log-weighted integral inequality on random bump profiles.
pub fn log_integral_trials(
    model: &ModelSpace,
    p: f64,
    s: f64,
    d: f64,
    seed: u64,
    trials: usize,
    spec: &QuadratureSpec,
    policy: ExecPolicy,
) -> Result<LogIntegralTrialReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<BumpSpec> = (0..trials).map(|_| random_bumps(&mut rng, model.r_max.min(d))).collect();
    let checks: Vec<Result<(bool, f64)>> = par_map(policy, &specs, |b| {
        let f = RadialProfile::bumps(&b.parts)?;
        let c = log_integral_inequality_check(model, p, s, d, &f, spec)?;
        Ok((c.passed, c.lhs - c.rhs + c.error))
    });
    let checks: Vec<(bool, f64)> = checks.into_iter().collect::<Result<_>>()?;
    Ok(LogIntegralTrialReport {
        model_id: model.id(),
        p,
        s,
        d,
        seed,
        rng: RNG_ALGORITHM.into(),
        trials,
        violations: checks.iter().filter(|c| !c.0).count(),
        min_slack: checks.iter().map(|c| c.1).fold(f64::INFINITY, f64::min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bumps_stay_inside_and_disjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let b = random_bumps(&mut rng, std::f64::consts::PI);
            for w in b.parts.windows(2) {
                assert!(w[1].1 < w[0].0);
            }
            for &(a, bb, _, _) in &b.parts {
                assert!(a > 0.0 && bb > a && bb < std::f64::consts::PI);
            }
            assert!(RadialProfile::bumps(&b.parts).is_ok());
        }
    }

    #[test]
    fn taylor_floor_reference() {
        let params = HardyParams::new(2.0, -2.0, 1).unwrap();
        let t = taylor_floor_check(&params, 1000).unwrap();
        assert_eq!(t.violations, 0);
        assert!((t.frak_t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pointwise_and_log_integral_trials_pass() {
        assert_eq!(pointwise_trials(1, 2000).unwrap().violations, 0);
        let m = ModelSpace::torus_subtorus(3, 1, 1.0).unwrap();
        let rep = log_integral_trials(&m, 2.0, 2.0, 1.0, 2, 20, &QuadratureSpec::default(), ExecPolicy::Sequential).unwrap();
        assert_eq!(rep.violations, 0, "{rep:?}");
    }

    #[test]
    fn laplacian_bounds_on_models() {
        for m in [
            ModelSpace::cylinder_axis(3).unwrap(),
            ModelSpace::hemisphere(3).unwrap(),
            ModelSpace::torus_subtorus(3, 1, 1.0).unwrap(),
        ] {
            assert!(laplacian_check(&m, 1000).unwrap().passed);
        }
    }
}
