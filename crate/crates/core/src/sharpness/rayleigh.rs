//! Discrete minimization of the Hardy quotient over radial grid profiles.
//!
//! In `y = ln r` write `u = e^(-δ y) g`. The quotient becomes
//! `Σ w |g' - δ g|^p / Σ w |g|^p` on `[ln R - Λ, ln R]` with `g = 0` at both ends,
//! where `w` is the density ratio. Its infimum over the window tends to `|δ|^p`
//! as `Λ` grows.

use serde::{Deserialize, Serialize};

use crate::error::{HardyError, Result};
use crate::functionals::{hardy_parts, HardyParams, RadialProfile};
use crate::geometry::ModelSpace;
use crate::quadrature::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayleighOptions {
    pub grid_size: usize,
    /// Window length `Λ` in `ln r`; `2 sqrt(grid_size)` when absent.
    pub window: Option<f64>,
    /// Outer radius `R`; `r_max` when finite, otherwise 1.
    pub outer_radius: Option<f64>,
    pub max_iter: usize,
    /// Relative decrease below which an iteration counts as stalled.
    pub tol: f64,
}

impl Default for RayleighOptions {
    fn default() -> Self {
        Self {
            grid_size: 1024,
            window: None,
            outer_radius: None,
            max_iter: 500,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayleighResult {
    /// Smallest discrete quotient reached.
    pub inf_estimate: f64,
    /// Quotient of the Hermite interpolant of the minimizer, by quadrature.
    pub certified_quotient: f64,
    pub certified_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grid_size: usize,
    pub window: f64,
    pub ln_outer: f64,
    /// `g` at the grid nodes, endpoints included.
    pub g: Vec<f64>,
    pub history: Vec<f64>,
    pub profile: RadialProfile,
}

struct Discrete {
    n: usize,
    h: f64,
    delta: f64,
    p: f64,
    /// Density-ratio weight per cell, times `h`.
    w: Vec<f64>,
}

impl Discrete {
    fn slope(&self, g: &[f64], i: usize) -> f64 {
        (g[i + 1] - g[i]) / self.h - self.delta * 0.5 * (g[i] + g[i + 1])
    }

    fn mid(g: &[f64], i: usize) -> f64 {
        0.5 * (g[i] + g[i + 1])
    }

    fn quotient(&self, g: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.n {
            num += self.w[i] * self.slope(g, i).abs().powf(self.p);
            den += self.w[i] * Self::mid(g, i).abs().powf(self.p);
        }
        num / den
    }

    /// Tridiagonal `K` and `M` on the interior nodes with weights frozen at `g`.
    fn frozen_forms(&self, g: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n;
        let p = self.p;
        let smax = (0..n).map(|i| self.slope(g, i).abs()).fold(0.0, f64::max);
        let mmax = (0..n).map(|i| Self::mid(g, i).abs()).fold(0.0, f64::max);
        let reg = |x: f64, scale: f64| {
            if p == 2.0 {
                1.0
            } else {
                x.abs().max(1e-8 * scale).powf(p - 2.0)
            }
        };
        let al = 1.0 / self.h - 0.5 * self.delta;
        let be = 1.0 / self.h + 0.5 * self.delta;
        // Interior unknowns are nodes 1..n-1, stored at index node-1.
        let m = n - 1;
        let (mut kd, mut ko, mut md, mut mo) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        for i in 0..n {
            let a = self.w[i] * reg(self.slope(g, i), smax);
            let b = self.w[i] * reg(Self::mid(g, i), mmax) * 0.25;
            // s_i = al g_{i+1} - be g_i
            if i >= 1 {
                kd[i - 1] += a * be * be;
                md[i - 1] += b;
            }
            if i < m {
                kd[i] += a * al * al;
                md[i] += b;
            }
            if i >= 1 && i < m {
                ko[i - 1] += -a * al * be;
                mo[i - 1] += b;
            }
        }
        (kd, ko, md, mo)
    }
}

/// Solves a symmetric tridiagonal system by `LDLᵀ`; `None` unless all pivots are positive.
fn solve_spd_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut d = vec![0.0; n];
    let mut l = vec![0.0; n];
    d[0] = diag[0];
    if !(d[0] > 0.0) {
        return None;
    }
    for i in 1..n {
        l[i] = off[i - 1] / d[i - 1];
        d[i] = diag[i] - l[i] * off[i - 1];
        if !(d[i] > 0.0) {
            return None;
        }
    }
    let mut z = rhs.to_vec();
    for i in 1..n {
        z[i] -= l[i] * z[i - 1];
    }
    for i in 0..n {
        z[i] /= d[i];
    }
    for i in (0..n - 1).rev() {
        z[i] -= l[i + 1] * z[i + 1];
    }
    Some(z)
}

fn normalize(g: &mut [f64]) {
    let m = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m > 0.0 {
        for v in g.iter_mut() {
            *v /= m;
        }
    }
}

/// Minimizes the discrete quotient with default options.
pub fn rayleigh_descent(model: &ModelSpace, params: &HardyParams, grid_size: usize, spec: &QuadratureSpec) -> Result<RayleighResult> {
    rayleigh_descent_with(
        model,
        params,
        &RayleighOptions {
            grid_size,
            ..Default::default()
        },
        None,
        spec,
    )
}

/// Minimizes the discrete quotient from `initial` (values of `g` at all nodes) or a sine start.
pub fn rayleigh_descent_with(
    model: &ModelSpace,
    params: &HardyParams,
    opts: &RayleighOptions,
    initial: Option<&[f64]>,
    spec: &QuadratureSpec,
) -> Result<RayleighResult> {
    let n = opts.grid_size;
    if n < 64 {
        return Err(HardyError::InvalidParameter(format!("grid_size must be >= 64 (got {n})")));
    }
    let window = opts.window.unwrap_or(2.0 * (n as f64).sqrt());
    if !(window > 0.0) {
        return Err(HardyError::InvalidParameter("window must be positive".into()));
    }
    let outer = match opts.outer_radius {
        Some(r) => r,
        None if model.r_max.is_finite() => model.r_max,
        None => 1.0,
    };
    if !(outer > 0.0 && outer <= model.r_max) {
        return Err(HardyError::Domain(format!("outer radius {outer} must lie in (0, r_max]")));
    }
    let ln_outer = outer.ln();
    let h = window / n as f64;
    let ys: Vec<f64> = (0..=n).map(|i| ln_outer - window + i as f64 * h).collect();
    let w: Vec<f64> = (0..n)
        .map(|i| h * model.ln_density_ratio((0.5 * (ys[i] + ys[i + 1])).exp()).exp())
        .collect();
    let disc = Discrete {
        n,
        h,
        delta: params.delta,
        p: params.p,
        w,
    };
    let mut g: Vec<f64> = match initial {
        Some(v) => {
            if v.len() != n + 1 {
                return Err(HardyError::InvalidParameter(format!("initial profile needs {} values", n + 1)));
            }
            let mut v = v.to_vec();
            v[0] = 0.0;
            v[n] = 0.0;
            v
        }
        None => (0..=n).map(|i| (std::f64::consts::PI * i as f64 / n as f64).sin()).collect(),
    };
    normalize(&mut g);
    let mut q = disc.quotient(&g);
    if !q.is_finite() {
        return Err(HardyError::ZeroDenominator("initial grid profile vanishes".into()));
    }
    let mut history = vec![q];
    let mut converged = false;
    let mut stalls = 0;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let (kd, ko, md, mo) = disc.frozen_forms(&g);
        let interior = &g[1..n];
        // M g on the interior.
        let mg: Vec<f64> = (0..n - 1)
            .map(|j| {
                let mut v = md[j] * interior[j];
                if j > 0 {
                    v += mo[j - 1] * interior[j - 1];
                }
                if j + 1 < n - 1 {
                    v += mo[j] * interior[j + 1];
                }
                v
            })
            .collect();
        // Shifted inverse iteration with a shift kept below the frozen spectrum.
        let mut sigma = 0.98 * q;
        let mut x = None;
        for _ in 0..60 {
            let pd: Vec<f64> = kd.iter().zip(&md).map(|(k, m)| k - sigma * m).collect();
            let po: Vec<f64> = ko.iter().zip(&mo).map(|(k, m)| k - sigma * m).collect();
            if let Some(sol) = solve_spd_tridiagonal(&pd, &po[..n.saturating_sub(2)], &mg) {
                x = Some(sol);
                break;
            }
            sigma = if sigma > 0.0 { 0.5 * sigma } else { sigma - 1.0 };
        }
        let Some(x) = x else {
            return Err(HardyError::NonConvergence("no positive-definite shift found".into()));
        };
        let mut cand = vec![0.0; n + 1];
        cand[1..n].copy_from_slice(&x);
        let dot: f64 = cand.iter().zip(&g).map(|(a, b)| a * b).sum();
        if dot < 0.0 {
            for v in cand.iter_mut() {
                *v = -*v;
            }
        }
        normalize(&mut cand);
        let mut tau = 1.0;
        let mut accepted = None;
        while tau > 1e-6 {
            let trial: Vec<f64> = g.iter().zip(&cand).map(|(a, b)| a + tau * (b - a)).collect();
            let qt = disc.quotient(&trial);
            if qt.is_finite() && qt < q {
                accepted = Some((trial, qt));
                break;
            }
            tau *= 0.5;
        }
        let Some((mut next, qn)) = accepted else {
            converged = true;
            break;
        };
        normalize(&mut next);
        let rel = (q - qn) / q.abs().max(f64::MIN_POSITIVE);
        g = next;
        q = qn;
        history.push(q);
        if rel < opts.tol {
            stalls += 1;
            if stalls >= 3 {
                converged = true;
                break;
            }
        } else {
            stalls = 0;
        }
    }
    let (profile, cert, cert_err) = certify(model, params, &ys, &g, spec)?;
    let inf_estimate = history.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(RayleighResult {
        inf_estimate,
        certified_quotient: cert,
        certified_error: cert_err,
        iterations,
        converged,
        grid_size: n,
        window,
        ln_outer,
        g,
        history,
        profile,
    })
}

/// Continuous quotient of `u = e^(-δ y) g` interpolated on the grid.
fn certify(model: &ModelSpace, params: &HardyParams, ys: &[f64], g: &[f64], spec: &QuadratureSpec) -> Result<(RadialProfile, f64, f64)> {
    let n = ys.len() - 1;
    let h = ys[1] - ys[0];
    let delta = params.delta;
    let dg: Vec<f64> = (0..=n)
        .map(|i| match i {
            0 => (g[1] - g[0]) / h,
            i if i == n => (g[n] - g[n - 1]) / h,
            _ => (g[i + 1] - g[i - 1]) / (2.0 * h),
        })
        .collect();
    let u: Vec<f64> = (0..=n).map(|i| (-delta * ys[i]).exp() * g[i]).collect();
    let du: Vec<f64> = (0..=n).map(|i| (-delta * ys[i]).exp() * (dg[i] - delta * g[i])).collect();
    let profile = RadialProfile::grid(ys.to_vec(), u, du)?;
    let parts = hardy_parts(model, params, &profile, spec)?;
    Ok((profile.clone(), parts.quotient()?, parts.quotient_error()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solver() {
        let x = solve_spd_tridiagonal(&[2.0, 2.0, 2.0], &[-1.0, -1.0], &[1.0, 0.0, 1.0]).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
        assert!(solve_spd_tridiagonal(&[1.0, -1.0], &[0.0], &[1.0, 1.0]).is_none());
    }
}
