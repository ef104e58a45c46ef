//! Matrix Jacobi equation along normal geodesics and the comparison envelopes.
//!
//! `𝒜'' + ℛ(t) 𝒜 = 0` on the normal complement, with `𝒜(0) = id ⊕ 0` and
//! `𝒜'(0) = -𝔄 ⊕ id` (tangent block first).

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HardyError, Result};
use crate::exec::{par_map, ExecPolicy};
use crate::geometry::s_k;

/// Relative change of `det 𝒜(t_end)` accepted between successive step halvings.
pub const HALVING_TOL: f64 = 1e-8;
const MAX_HALVINGS: usize = 14;

/// Radial curvature operator `t ↦ ℛ(t)`.
#[derive(Clone)]
pub enum Curvature {
    Constant(DMatrix<f64>),
    Radial(Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>),
}

impl Curvature {
    pub fn at(&self, t: f64) -> DMatrix<f64> {
        match self {
            Curvature::Constant(m) => m.clone(),
            Curvature::Radial(f) => f(t),
        }
    }
}

impl std::fmt::Debug for Curvature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Curvature::Constant(m) => write!(f, "Constant({m:?})"),
            Curvature::Radial(_) => write!(f, "Radial(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct JacobiSystem {
    /// `m - 1`.
    pub dim: usize,
    /// `n`.
    pub tangent_dim: usize,
    pub curvature: Curvature,
    /// Symmetric `n × n`.
    pub weingarten: DMatrix<f64>,
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= 1e-12 * scale
}

impl JacobiSystem {
    pub fn new(dim: usize, tangent_dim: usize, curvature: Curvature, weingarten: DMatrix<f64>) -> Result<Self> {
        if dim == 0 || tangent_dim > dim {
            return Err(HardyError::InvalidParameter(format!(
                "need 0 <= tangent_dim <= dim and dim >= 1 (got dim={dim}, tangent_dim={tangent_dim})"
            )));
        }
        if weingarten.nrows() != tangent_dim || weingarten.ncols() != tangent_dim || !is_symmetric(&weingarten) {
            return Err(HardyError::InvalidParameter("weingarten map must be a symmetric n x n matrix".into()));
        }
        let r0 = curvature.at(0.0);
        if r0.nrows() != dim || r0.ncols() != dim || !is_symmetric(&r0) {
            return Err(HardyError::InvalidParameter("curvature must be a symmetric (m-1) x (m-1) matrix".into()));
        }
        Ok(Self {
            dim,
            tangent_dim,
            curvature,
            weingarten,
        })
    }

    /// `ℛ ≡ K id`.
    pub fn constant_curvature(k_curv: f64, dim: usize, weingarten: DMatrix<f64>) -> Result<Self> {
        let n = weingarten.nrows();
        Self::new(dim, n, Curvature::Constant(DMatrix::identity(dim, dim) * k_curv), weingarten)
    }

    /// Codimension `k = dim + 1 - n`.
    pub fn codim(&self) -> usize {
        self.dim + 1 - self.tangent_dim
    }

    fn initial(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let (d, n) = (self.dim, self.tangent_dim);
        let mut a = DMatrix::zeros(d, d);
        let mut da = DMatrix::zeros(d, d);
        for i in 0..n {
            a[(i, i)] = 1.0;
        }
        da.view_mut((0, 0), (n, n)).copy_from(&(-&self.weingarten));
        for i in n..d {
            da[(i, i)] = 1.0;
        }
        (a, da)
    }
}

/// `det 𝒜` and its logarithmic derivative on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiSolution {
    pub t: Vec<f64>,
    pub det: Vec<f64>,
    /// `tr(𝒜' 𝒜⁻¹)`; `NaN` where `𝒜` is singular.
    pub log_derivative: Vec<f64>,
    /// First zero of `det 𝒜` for `t > 0`, linearly interpolated.
    pub focal_time: Option<f64>,
    pub step: f64,
    pub converged: bool,
}

impl JacobiSolution {
    /// Grid indices strictly before the focal time.
    pub fn before_focal(&self) -> usize {
        match self.focal_time {
            Some(tf) => self.t.iter().take_while(|&&t| t < tf).count(),
            None => self.t.len(),
        }
    }
}

fn rk4(sys: &JacobiSystem, t_end: f64, steps: usize) -> (Vec<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let h = t_end / steps as f64;
    let (mut a, mut da) = sys.initial();
    let mut ts = Vec::with_capacity(steps + 1);
    let mut aa = Vec::with_capacity(steps + 1);
    let mut dd = Vec::with_capacity(steps + 1);
    ts.push(0.0);
    aa.push(a.clone());
    dd.push(da.clone());
    let constant = matches!(sys.curvature, Curvature::Constant(_));
    let r_const = sys.curvature.at(0.0);
    let curv = |t: f64| if constant { r_const.clone() } else { sys.curvature.at(t) };
    for i in 0..steps {
        let t = i as f64 * h;
        let (r0, r1, r2) = (curv(t), curv(t + 0.5 * h), curv(t + h));
        let k1a = da.clone();
        let k1d = -(&r0 * &a);
        let a2 = &a + &k1a * (0.5 * h);
        let k2a = &da + &k1d * (0.5 * h);
        let k2d = -(&r1 * &a2);
        let a3 = &a + &k2a * (0.5 * h);
        let k3a = &da + &k2d * (0.5 * h);
        let k3d = -(&r1 * &a3);
        let a4 = &a + &k3a * h;
        let k4a = &da + &k3d * h;
        let k4d = -(&r2 * &a4);
        a += (&k1a + &k2a * 2.0 + &k3a * 2.0 + &k4a) * (h / 6.0);
        da += (&k1d + &k2d * 2.0 + &k3d * 2.0 + &k4d) * (h / 6.0);
        ts.push((i + 1) as f64 * h);
        aa.push(a.clone());
        dd.push(da.clone());
    }
    (ts, aa, dd)
}

/// Integrates the Jacobi equation, halving `step` until `det 𝒜(t_end)` is stable.
pub fn integrate_jacobi(sys: &JacobiSystem, t_end: f64, step: f64) -> Result<JacobiSolution> {
    if !(t_end > 0.0) || !(step > 0.0) {
        return Err(HardyError::InvalidParameter("integrate_jacobi needs t_end > 0 and step > 0".into()));
    }
    let mut steps = ((t_end / step).ceil() as usize).max(1);
    let mut prev = rk4(sys, t_end, steps);
    let mut converged = false;
    for _ in 0..MAX_HALVINGS {
        let next = rk4(sys, t_end, 2 * steps);
        let d0 = prev.1.last().unwrap().determinant();
        let d1 = next.1.last().unwrap().determinant();
        // Relative to the largest |det| on the grid, so a zero at t_end is not penalized.
        let scale = next.1.iter().map(|a| a.determinant().abs()).fold(0.0, f64::max);
        steps *= 2;
        prev = next;
        if (d1 - d0).abs() <= HALVING_TOL * scale {
            converged = true;
            break;
        }
    }
    let (ts, aa, dd) = prev;
    let det: Vec<f64> = aa.iter().map(|a| a.determinant()).collect();
    let log_derivative = aa
        .iter()
        .zip(&dd)
        .map(|(a, da)| match a.clone().try_inverse() {
            Some(inv) => (da * inv).trace(),
            None => f64::NAN,
        })
        .collect();
    let focal_time = first_zero(&ts, &det);
    Ok(JacobiSolution {
        t: ts,
        det,
        log_derivative,
        focal_time,
        step: t_end / steps as f64,
        converged,
    })
}

/// First crossing to `<= 0` after the initial point.
fn first_zero(ts: &[f64], vals: &[f64]) -> Option<f64> {
    for i in 1..vals.len() {
        if vals[i] <= 0.0 && vals[i - 1] > 0.0 {
            let (t0, t1, v0, v1) = (ts[i - 1], ts[i], vals[i - 1], vals[i]);
            return Some(t0 + (t1 - t0) * v0 / (v0 - v1));
        }
        if vals[i] <= 0.0 && i > 1 && vals[i - 1] <= 0.0 && vals[i - 2] > 0.0 {
            return Some(ts[i - 1]);
        }
    }
    None
}

/// `𝔰_K(t)^(k-1) ∏ (𝔰'_K(t) - λ_α 𝔰_K(t))`.
pub fn heintze_karcher_envelope(k_curv: f64, lambdas: &[f64], k: usize, t: f64) -> f64 {
    let (s, ds) = s_k(k_curv, t);
    let base = if k <= 1 { 1.0 } else { s.powi(k as i32 - 1) };
    lambdas.iter().fold(base, |acc, l| acc * (ds - l * s))
}

/// Upper bound `(m-1)(𝔰''_K - λ 𝔰'_K)/(𝔰'_K - λ 𝔰_K)` on the log-derivative of a hypersurface density.
pub fn hypersurface_bound(k_curv: f64, lambda: f64, m: usize, t: f64) -> f64 {
    let (s, ds) = s_k(k_curv, t);
    let dds = -k_curv * s;
    (m as f64 - 1.0) * (dds - lambda * ds) / (ds - lambda * s)
}

/// Elementary symmetric functions `σ_0..σ_n`.
pub fn elementary_symmetric(lambdas: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; lambdas.len() + 1];
    e[0] = 1.0;
    for (j, &x) in lambdas.iter().enumerate() {
        for s in (1..=j + 1).rev() {
            e[s] += x * e[s - 1];
        }
    }
    e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonChain {
    /// `c(n,s) σ_(s-1)/σ_s` for `s = n, …, 1`.
    pub ratios: Vec<f64>,
    pub monotone: bool,
    pub equality: bool,
}

/// Newton chain of a positive vector, with `c(n,s) = n(n-s+1)/s`.
pub fn newton_chain(lambdas: &[f64]) -> Result<NewtonChain> {
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(HardyError::Domain("newton_chain needs a non-empty vector of positive entries".into()));
    }
    let n = lambdas.len();
    let sig = elementary_symmetric(lambdas);
    let ratios: Vec<f64> = (1..=n)
        .rev()
        .map(|s| (n * (n - s + 1)) as f64 / s as f64 * sig[s - 1] / sig[s])
        .collect();
    let tol = 1e-12;
    let monotone = ratios.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol));
    let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let equality = hi - lo <= tol * hi;
    Ok(NewtonChain { ratios, monotone, equality })
}

/// Random orthogonal matrix from the QR factor of a Gaussian-like matrix.
fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    g.qr().q()
}

/// One randomized dominance instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceCase {
    pub m: usize,
    pub n: usize,
    pub k_curv: f64,
    pub lambdas: Vec<f64>,
    /// Whether a positive semidefinite perturbation was added to `K id`.
    pub perturbed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceOutcome {
    pub case: DominanceCase,
    /// `min (envelope - det)` over the compared grid points.
    pub min_slack: f64,
    pub points: usize,
    pub focal_time: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub trials: usize,
    pub violations: usize,
    pub min_slack: f64,
    pub slack_floor: f64,
    pub outcomes: Vec<DominanceOutcome>,
}

/// Largest comparison time: before the first zero of the envelope, capped at 2.
fn envelope_horizon(k_curv: f64, lambdas: &[f64], k: usize) -> f64 {
    let mut t_end = 2.0;
    let n = 2000;
    for i in 1..=n {
        let t = 2.0 * i as f64 / n as f64;
        if heintze_karcher_envelope(k_curv, lambdas, k, t) <= 0.0 {
            t_end = 2.0 * (i - 1) as f64 / n as f64;
            break;
        }
    }
    0.95 * t_end
}

fn run_case(rng_seed: u64, case: DominanceCase) -> Result<DominanceOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let dim = case.m - 1;
    let n = case.n;
    let q = random_orthogonal(&mut rng, n);
    let w = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(case.lambdas.clone())) * q.transpose();
    let w = (&w + w.transpose()) * 0.5;
    let mut r = DMatrix::identity(dim, dim) * case.k_curv;
    if case.perturbed {
        let b = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-0.5..0.5));
        r += &b * b.transpose();
    }
    let sys = JacobiSystem::new(dim, n, Curvature::Constant(r), w)?;
    let k = sys.codim();
    let t_end = envelope_horizon(case.k_curv, &case.lambdas, k);
    if !(t_end > 0.0) {
        return Err(HardyError::Domain("envelope vanishes immediately".into()));
    }
    let sol = integrate_jacobi(&sys, t_end, t_end / 200.0)?;
    let upto = sol.before_focal();
    let mut min_slack = f64::INFINITY;
    for i in 0..upto {
        let env = heintze_karcher_envelope(case.k_curv, &case.lambdas, k, sol.t[i]);
        min_slack = min_slack.min(env - sol.det[i]);
    }
    Ok(DominanceOutcome {
        case,
        min_slack,
        points: upto,
        focal_time: sol.focal_time,
        converged: sol.converged,
    })
}

/// Randomized Jacobi systems with `ℛ >= K id`, `tr 𝔄 = 0`, compared against the envelope.
pub fn dominance_trials(seed: u64, trials: usize, curvatures: &[f64], policy: ExecPolicy) -> Result<DominanceReport> {
    if curvatures.is_empty() {
        return Err(HardyError::InvalidParameter("need at least one curvature value".into()));
    }
    let slack_floor = -1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(trials);
    for i in 0..trials {
        let m = rng.random_range(2..=5usize);
        let n = rng.random_range(1..m);
        let k_curv = curvatures[i % curvatures.len()];
        let mut lambdas: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = lambdas.iter().sum::<f64>() / n as f64;
        for l in &mut lambdas {
            *l -= mean;
        }
        let perturbed = rng.random_bool(0.5);
        let case_seed: u64 = rng.random();
        cases.push((case_seed, DominanceCase { m, n, k_curv, lambdas, perturbed }));
    }
    let outcomes: Vec<Result<DominanceOutcome>> = par_map(policy, &cases, |(s, c)| run_case(*s, c.clone()));
    let outcomes: Vec<DominanceOutcome> = outcomes.into_iter().collect::<Result<_>>()?;
    let violations = outcomes.iter().filter(|o| o.min_slack < slack_floor).count();
    let min_slack = outcomes.iter().map(|o| o.min_slack).fold(f64::INFINITY, f64::min);
    Ok(DominanceReport {
        trials,
        violations,
        min_slack,
        slack_floor,
        outcomes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub trials: usize,
    pub violations: usize,
}

/// Newton chain monotonicity on random positive vectors of length 1..=6.
pub fn newton_trials(seed: u64, trials: usize) -> Result<NewtonReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for _ in 0..trials {
        let n = rng.random_range(1..=6usize);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(1e-3..10.0)).collect();
        if !newton_chain(&v)?.monotone {
            violations += 1;
        }
    }
    Ok(NewtonReport { trials, violations })
}

/// Pointwise check of the hypersurface bound for `ℛ >= K id` and `tr 𝔄 >= (m-1)λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypersurfaceCheck {
    pub points: usize,
    pub max_excess: f64,
    pub passed: bool,
}

pub fn hypersurface_check(sys: &JacobiSystem, k_curv: f64, lambda: f64, t_end: f64) -> Result<HypersurfaceCheck> {
    if sys.codim() != 1 {
        return Err(HardyError::InvalidParameter("hypersurface check needs n = m - 1".into()));
    }
    let m = sys.dim + 1;
    if sys.weingarten.trace() < (m as f64 - 1.0) * lambda - 1e-12 {
        return Err(HardyError::InvalidParameter("need tr(A) >= (m-1) lambda".into()));
    }
    let sol = integrate_jacobi(sys, t_end, t_end / 200.0)?;
    let upto = sol.before_focal();
    let mut max_excess = f64::NEG_INFINITY;
    let mut points = 0;
    for i in 1..upto {
        let t = sol.t[i];
        let (s, ds) = s_k(k_curv, t);
        if ds - lambda * s <= 0.0 {
            break;
        }
        let ld = sol.log_derivative[i];
        if ld.is_finite() {
            max_excess = max_excess.max(ld - hypersurface_bound(k_curv, lambda, m, t));
            points += 1;
        }
    }
    Ok(HypersurfaceCheck {
        points,
        max_excess,
        passed: max_excess <= 1e-6,
    })
}

/// Residual `(det 𝒜)'/det 𝒜 - (k-1)/t + tr 𝔄` near `t = 0` and its fitted slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortTimeExpansion {
    pub t: Vec<f64>,
    pub residual: Vec<f64>,
    pub slope: f64,
}

pub fn short_time_expansion(sys: &JacobiSystem, t_max: f64) -> Result<ShortTimeExpansion> {
    let sol = integrate_jacobi(sys, t_max, t_max / 400.0)?;
    let k = sys.codim() as f64;
    let tr = sys.weingarten.trace();
    let mut t = Vec::new();
    let mut residual = Vec::new();
    for i in 1..sol.t.len() {
        let ld = sol.log_derivative[i];
        if ld.is_finite() {
            t.push(sol.t[i]);
            residual.push(ld - (k - 1.0) / sol.t[i] + tr);
        }
    }
    if t.len() < 2 {
        return Err(HardyError::NonConvergence("too few regular points near t = 0".into()));
    }
    // Least-squares slope through the origin.
    let num: f64 = t.iter().zip(&residual).map(|(a, b)| a * b).sum();
    let den: f64 = t.iter().map(|a| a * a).sum();
    Ok(ShortTimeExpansion {
        t,
        residual,
        slope: num / den,
    })
}

/// Largest deviation of `det 𝒜` from `t^(k-1)` for `ℛ ≡ 0`, `𝔄 = 0`.
pub fn flat_exactness(dim: usize, tangent_dim: usize, t_end: f64) -> Result<f64> {
    let sys = JacobiSystem::new(
        dim,
        tangent_dim,
        Curvature::Constant(DMatrix::zeros(dim, dim)),
        DMatrix::zeros(tangent_dim, tangent_dim),
    )?;
    let sol = integrate_jacobi(&sys, t_end, t_end / 100.0)?;
    let k = sys.codim() as i32;
    Ok(sol
        .t
        .iter()
        .zip(&sol.det)
        .map(|(t, d)| (d - t.powi(k - 1)).abs())
        .fold(0.0, f64::max))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn flat_block_gives_power() {
        assert!(flat_exactness(2, 1, 2.0).unwrap() < 1e-8);
        assert!(flat_exactness(1, 0, 1.0).unwrap() < 1e-12);
        assert!(flat_exactness(4, 1, 1.5).unwrap() < 1e-8);
    }

    #[test]
    fn unit_curvature_product() {
        let sys = JacobiSystem::constant_curvature(1.0, 2, DMatrix::zeros(1, 1)).unwrap();
        let sol = integrate_jacobi(&sys, 1.0, 0.01).unwrap();
        assert_relative_eq!(*sol.det.last().unwrap(), 1f64.cos() * 1f64.sin(), epsilon = 1e-8);
        assert!(sol.converged);
    }

    #[test]
    fn focal_time_of_sphere() {
        // cos t vanishes at π/2 for a totally geodesic hypersurface of the unit sphere.
        let sys = JacobiSystem::constant_curvature(1.0, 1, DMatrix::zeros(1, 1)).unwrap();
        let sol = integrate_jacobi(&sys, 2.0, 0.01).unwrap();
        assert_relative_eq!(sol.focal_time.unwrap(), std::f64::consts::FRAC_PI_2, epsilon = 1e-4);
    }

    #[test]
    fn envelope_examples() {
        assert_eq!(heintze_karcher_envelope(0.0, &[1.0], 1, 0.5), 0.5);
        assert_relative_eq!(heintze_karcher_envelope(1.0, &[0.0], 2, std::f64::consts::FRAC_PI_4), 0.5, epsilon = 1e-15);
        assert_relative_eq!(heintze_karcher_envelope(0.0, &[0.0, 0.0], 3, 1.7), 1.7 * 1.7, epsilon = 1e-15);
    }

    #[test]
    fn newton_examples() {
        let c = newton_chain(&[1.0, 1.0]).unwrap();
        assert_eq!(c.ratios, vec![2.0, 2.0]);
        assert!(c.equality && c.monotone);
        let c = newton_chain(&[1.0, 2.0]).unwrap();
        assert_relative_eq!(c.ratios[0], 1.5);
        assert_relative_eq!(c.ratios[1], 4.0 / 3.0);
        assert!(!c.equality && c.monotone);
        let c = newton_chain(&[2.0, 2.0, 2.0]).unwrap();
        assert!(c.equality);
        assert!(newton_chain(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn short_time_slope_is_finite() {
        let w = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, -0.5]);
        let sys = JacobiSystem::constant_curvature(0.5, 3, w).unwrap();
        let e = short_time_expansion(&sys, 0.01).unwrap();
        // Leading slope -(tr A² + K n + K (k-1)/3).
        let expect = -(0.36 + 0.5 * 2.0 + 0.5 / 3.0);
        assert_relative_eq!(e.slope, expect, max_relative = 0.02);
    }
}
