//! Adaptive composite Gauss–Legendre quadrature for singular radial integrals.
//!
//! Finite intervals are refined globally (largest error first). Infinite ends
//! are covered by panels of doubling width until the contribution is
//! negligible. Integrals touching `t = 0` are evaluated in `y = ln t`, which
//! is the limit of a geometrically graded mesh toward the singular endpoint.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{HardyError, Result};
use crate::geometry::ModelSpace;

/// Points per Gauss–Legendre panel.
pub const GAUSS_ORDER: usize = 10;
/// A tail sum exceeding this multiple of the first panel is declared divergent.
pub const DIVERGENCE_FACTOR: f64 = 1e12;
/// Tail panels below this fraction of the running total end the extension.
pub const TAIL_CUTOFF: f64 = 1e-16;
const MAX_TAIL_PANELS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Budget of panel bisections per finite interval.
    pub max_refinements: usize,
    /// Ratio of the geometric mesh toward a singular endpoint (first tail panel spans
    /// `ln(endpoint_grading)` in the log variable).
    pub endpoint_grading: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_refinements: 4000,
            endpoint_grading: 8.0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(HardyError::InvalidParameter(
                "quadrature tolerances must be strictly positive".into(),
            ));
        }
        if !(self.endpoint_grading > 1.0) {
            return Err(HardyError::InvalidParameter(
                "endpoint_grading must exceed 1".into(),
            ));
        }
        Ok(())
    }

    pub fn with_tolerances(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
    pub nodes_used: usize,
    pub diverged: bool,
}

/// Sum of two independent results.
impl std::ops::Add for QuadratureResult {
    type Output = Self;

    fn add(self, other: Self) -> Self {
        Self {
            value: self.value + other.value,
            error_estimate: self.error_estimate + other.error_estimate,
            converged: self.converged && other.converged,
            nodes_used: self.nodes_used + other.nodes_used,
            diverged: self.diverged || other.diverged,
        }
    }
}

impl QuadratureResult {
    pub fn zero() -> Self {
        Self {
            value: 0.0,
            error_estimate: 0.0,
            converged: true,
            nodes_used: 0,
            diverged: false,
        }
    }

    fn diverged(nodes_used: usize) -> Self {
        Self {
            value: f64::INFINITY,
            error_estimate: f64::INFINITY,
            converged: false,
            nodes_used,
            diverged: true,
        }
    }

    pub fn scale(self, c: f64) -> Self {
        Self {
            value: self.value * c,
            error_estimate: self.error_estimate * c.abs(),
            ..self
        }
    }

    /// Turn a divergence flag into an error.
    pub fn finite(self, what: &str) -> Result<Self> {
        if self.diverged || !self.value.is_finite() {
            Err(HardyError::Divergent(format!("{what} does not converge")))
        } else {
            Ok(self)
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GAUSS_ORDER))
}

fn gauss_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        s += wi * f(mid + half * xi);
    }
    s * half
}

struct Panel {
    a: f64,
    b: f64,
    coarse: f64,
    value: f64,
    err: f64,
    left: f64,
    right: f64,
}

impl Panel {
    fn new<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, coarse: f64) -> Self {
        let m = 0.5 * (a + b);
        let left = gauss_panel(f, a, m);
        let right = gauss_panel(f, m, b);
        let value = left + right;
        Self {
            a,
            b,
            coarse,
            value,
            err: (coarse - value).abs(),
            left,
            right,
        }
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Globally adaptive quadrature over the finite partition `breaks` (sorted, at least 2 points).
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_refinements: usize,
) -> QuadratureResult {
    let per_panel = 3 * GAUSS_ORDER;
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Panel> = Vec::new();
    let mut nodes = 0usize;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let coarse = gauss_panel(f, a, b);
        let p = Panel::new(f, a, b, coarse);
        nodes += per_panel;
        if !p.value.is_finite() || !p.coarse.is_finite() {
            return QuadratureResult::diverged(nodes);
        }
        heap.push(p);
    }
    let mut refinements = 0usize;
    let mut converged = false;
    let mut total: f64 = heap.iter().map(|p| p.value).sum();
    let mut err: f64 = heap.iter().map(|p| p.err).sum();
    loop {
        if err <= abs_tol.max(rel_tol * total.abs()) {
            converged = true;
            break;
        }
        if refinements >= max_refinements {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a && m < worst.b) || (worst.b - worst.a) <= 1e-14 * worst.a.abs().max(worst.b.abs()) {
            frozen.push(worst);
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let l = Panel::new(f, worst.a, m, worst.left);
        let r = Panel::new(f, m, worst.b, worst.right);
        nodes += 4 * GAUSS_ORDER;
        if !l.value.is_finite() || !r.value.is_finite() {
            return QuadratureResult::diverged(nodes);
        }
        total += l.value + r.value - worst.value;
        err += l.err + r.err - worst.err;
        heap.push(l);
        heap.push(r);
        refinements += 1;
        if refinements.is_multiple_of(256) {
            total = heap.iter().chain(frozen.iter()).map(|p| p.value).sum();
            err = heap.iter().chain(frozen.iter()).map(|p| p.err).sum();
        }
    }
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.extend(frozen);
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value: f64 = panels.iter().map(|p| p.value).sum();
    let error_estimate: f64 = panels.iter().map(|p| p.err).sum();
    QuadratureResult {
        value,
        error_estimate,
        converged: converged && error_estimate <= abs_tol.max(rel_tol * value.abs()),
        nodes_used: nodes,
        diverged: false,
    }
}

/// Integrate over `[start, start + dir*∞)` with doubling panel widths.
fn tail<F: Fn(f64) -> f64>(f: &F, start: f64, dir: f64, first_width: f64, spec: &QuadratureSpec) -> QuadratureResult {
    let mut out = QuadratureResult::zero();
    let mut x = start;
    let mut width = first_width;
    let mut first_nonzero: Option<f64> = None;
    let mut zero_run = 0usize;
    let mut done = false;
    for _ in 0..MAX_TAIL_PANELS {
        let next = x + dir * width;
        let (a, b) = if dir > 0.0 { (x, next) } else { (next, x) };
        let panel = adaptive(
            f,
            &[a, b],
            spec.abs_tol / 64.0,
            0.5 * spec.rel_tol,
            spec.max_refinements,
        );
        if panel.diverged {
            return QuadratureResult::diverged(out.nodes_used + panel.nodes_used);
        }
        out = out + panel;
        if first_nonzero.is_none() && panel.value != 0.0 {
            first_nonzero = Some(panel.value.abs());
        }
        if let Some(first) = first_nonzero {
            if out.value.abs() > DIVERGENCE_FACTOR * first || !out.value.is_finite() {
                return QuadratureResult::diverged(out.nodes_used);
            }
        }
        if panel.value == 0.0 {
            zero_run += 1;
            if zero_run >= 6 {
                done = true;
                break;
            }
        } else {
            zero_run = 0;
            if panel.value.abs() <= TAIL_CUTOFF * out.value.abs() {
                done = true;
                break;
            }
        }
        x = next;
        width *= 2.0;
        if !x.is_finite() {
            break;
        }
    }
    out.converged = out.converged && done;
    out
}

/// `∫_a^b f`, where either end may be infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, spec: &QuadratureSpec) -> QuadratureResult {
    integrate_with_breaks(f, &[a, b], spec)
}

/// Like [`integrate`] with interior breakpoints; only the outer entries may be infinite.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: &F,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> QuadratureResult {
    assert!(breaks.len() >= 2);
    let a = breaks[0];
    let b = *breaks.last().unwrap();
    if !(b > a) {
        return QuadratureResult::zero();
    }
    let first_width = spec.endpoint_grading.ln();
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adaptive(f, breaks, spec.abs_tol, spec.rel_tol, spec.max_refinements),
        (false, true) => {
            let inner = &breaks[1..];
            let lo = inner[0];
            let body = if inner.len() >= 2 {
                adaptive(f, inner, spec.abs_tol / 2.0, spec.rel_tol / 2.0, spec.max_refinements)
            } else {
                QuadratureResult::zero()
            };
            body + tail(f, lo, -1.0, first_width, spec)
        }
        (true, false) => {
            let inner = &breaks[..breaks.len() - 1];
            let hi = *inner.last().unwrap();
            let body = if inner.len() >= 2 {
                adaptive(f, inner, spec.abs_tol / 2.0, spec.rel_tol / 2.0, spec.max_refinements)
            } else {
                QuadratureResult::zero()
            };
            body + tail(f, hi, 1.0, first_width, spec)
        }
        (false, false) => {
            let inner = &breaks[1..breaks.len() - 1];
            let (lo, hi) = if inner.is_empty() {
                (0.0, 0.0)
            } else {
                (inner[0], *inner.last().unwrap())
            };
            let body = if inner.len() >= 2 {
                adaptive(f, inner, spec.abs_tol / 2.0, spec.rel_tol / 2.0, spec.max_refinements)
            } else {
                QuadratureResult::zero()
            };
            body + tail(f, lo, -1.0, first_width, spec) + tail(f, hi, 1.0, first_width, spec)
        }
    }
}

/// `transverse_mass * ∫_a^b F(t) density(t) dt` over a model.
pub fn integrate_radial<F: Fn(f64) -> f64>(
    model: &ModelSpace,
    f: F,
    spec: &QuadratureSpec,
    interval: (f64, f64),
) -> Result<QuadratureResult> {
    spec.validate()?;
    let (a, b) = interval;
    if !(a >= 0.0 && b > a && b <= model.r_max) {
        return Err(HardyError::Domain(format!(
            "interval ({a}, {b}) must satisfy 0 <= a < b <= r_max = {}",
            model.r_max
        )));
    }
    let km1 = model.k() as f64 - 1.0;
    let res = if a == 0.0 || b.is_infinite() {
        let g = |y: f64| {
            let t = y.exp();
            let ln_w = km1 * y + model.ln_density_ratio(t) + y;
            let v = f(t);
            if v == 0.0 {
                0.0
            } else {
                v * ln_w.exp()
            }
        };
        let lo = if a == 0.0 { f64::NEG_INFINITY } else { a.ln() };
        integrate(&g, lo, b.ln(), spec)
    } else {
        let g = |t: f64| {
            let v = f(t);
            if v == 0.0 {
                0.0
            } else {
                v * (km1 * t.ln() + model.ln_density_ratio(t)).exp()
            }
        };
        integrate(&g, a, b, spec)
    };
    Ok(res.scale(model.transverse_mass))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HTables {
    pub h1: Result<QuadratureResult>,
    pub h2: Result<QuadratureResult>,
}

/// Well-definedness of `H1(s1, s2) = ∫_0^L log(D/t)^s1 t^s2 dt`.
pub fn h1_condition(s1: f64, s2: f64) -> std::result::Result<(), String> {
    if s2 > -1.0 || (s1 < -1.0 && s2 == -1.0) {
        Ok(())
    } else {
        Err(format!(
            "H1 requires s2 > -1, or s1 < -1 with s2 = -1 (got s1={s1}, s2={s2})"
        ))
    }
}

/// Well-definedness of `H2(l, s1, s2) = ∫_L^l log(D/t)^s1 t^s2 dt`.
pub fn h2_condition(d: f64, s1: f64, l: f64) -> std::result::Result<(), String> {
    if l < d || (s1 > -1.0 && l == d) {
        Ok(())
    } else {
        Err(format!(
            "H2 requires l < D, or s1 > -1 with l = D (got l={l}, D={d}, s1={s1})"
        ))
    }
}

/// The elementary log-power integrals `(H1, H2)`.
pub fn h_tables(d: f64, l_small: f64, s1: f64, s2: f64, l: f64, spec: &QuadratureSpec) -> Result<HTables> {
    spec.validate()?;
    if !(l_small > 0.0 && l_small < d && l > l_small && l <= d) {
        return Err(HardyError::InvalidParameter(format!(
            "need 0 < L < D and L < l <= D (got D={d}, L={l_small}, l={l})"
        )));
    }
    let ln_d = d.ln();
    let h1 = match h1_condition(s1, s2) {
        Err(msg) => Err(HardyError::Refused(msg)),
        Ok(()) => {
            let rho_l = (d / l_small).ln();
            let r = if s2 == -1.0 {
                // ∫_{ρ_L}^∞ ρ^s1 dρ in z = ln ρ.
                let g = |z: f64| ((s1 + 1.0) * z).exp();
                integrate(&g, rho_l.ln(), f64::INFINITY, spec)
            } else {
                let g = |y: f64| {
                    let rho = ln_d - y;
                    (s1 * rho.ln() + (s2 + 1.0) * y).exp()
                };
                integrate(&g, f64::NEG_INFINITY, l_small.ln(), spec)
            };
            r.finite("H1")
        }
    };
    let h2 = match h2_condition(d, s1, l) {
        Err(msg) => Err(HardyError::Refused(msg)),
        Ok(()) => {
            let rho_big = (d / l_small).ln();
            let r = if l == d {
                let g = |z: f64| {
                    let rho = z.exp();
                    ((s1 + 1.0) * z + (s2 + 1.0) * (ln_d - rho)).exp()
                };
                integrate(&g, f64::NEG_INFINITY, rho_big.ln(), spec)
            } else {
                let g = |y: f64| {
                    let rho = ln_d - y;
                    (s1 * rho.ln() + (s2 + 1.0) * y).exp()
                };
                integrate(&g, l_small.ln(), l.ln(), spec)
            };
            r.finite("H2")
        }
    };
    Ok(HTables { h1, h2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{E, PI};

    #[test]
    fn gauss_rule_is_exact_on_polynomials() {
        let (x, w) = gauss_legendre(GAUSS_ORDER);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
        for deg in 0..(2 * GAUSS_ORDER) {
            let s: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((s - exact).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn radial_examples() {
        let spec = QuadratureSpec::default();
        let e2 = ModelSpace::euclidean_point(2).unwrap();
        let r = integrate_radial(&e2, |_| 1.0, &spec, (0.0, 1.0)).unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.value, 0.5, epsilon = 1e-10);
        let axis = ModelSpace::cylinder_axis(2).unwrap();
        let r = integrate_radial(&axis, |_| 1.0, &spec, (0.0, PI)).unwrap();
        assert_relative_eq!(r.value, 2.0, epsilon = 1e-8);
        let scaled = axis.with_transverse_mass(3.0).unwrap();
        let r = integrate_radial(&scaled, |_| 1.0, &spec, (0.0, PI)).unwrap();
        assert_relative_eq!(r.value, 6.0, epsilon = 1e-8);
    }

    #[test]
    fn integrability_threshold() {
        let spec = QuadratureSpec::default();
        let torus = ModelSpace::torus_subtorus(2, 1, 1.0).unwrap();
        let ok = integrate_radial(&torus, |t| t.powf(-0.5), &spec, (0.0, 1.0)).unwrap();
        assert!(!ok.diverged && ok.converged);
        assert_relative_eq!(ok.value, 2.0, epsilon = 1e-8);
        for l in [1.0, 1.5] {
            let bad = integrate_radial(&torus, |t| t.powf(-l), &spec, (0.0, 1.0)).unwrap();
            assert!(bad.diverged, "l={l}");
        }
    }

    #[test]
    fn semi_infinite_and_breaks() {
        let spec = QuadratureSpec::default();
        let r = integrate(&|x: f64| (-x).exp(), 0.0, f64::INFINITY, &spec);
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-10);
        let r = integrate(&|x: f64| (-x * x).exp(), f64::NEG_INFINITY, f64::INFINITY, &spec);
        assert_relative_eq!(r.value, PI.sqrt(), epsilon = 1e-10);
        let r = integrate_with_breaks(&|x: f64| x.abs().sqrt(), &[-1.0, 0.0, 1.0], &spec);
        assert_relative_eq!(r.value, 4.0 / 3.0, max_relative = 1e-8);
        // Slowly decaying tail: ∫_0^∞ e^{-εy} dy = 1/ε.
        let eps = 2f64.powi(-20);
        let r = integrate(&|y: f64| (-eps * y).exp(), 0.0, f64::INFINITY, &spec);
        assert_relative_eq!(r.value, 1.0 / eps, max_relative = 1e-8);
    }

    #[test]
    fn tolerance_halving_is_consistent() {
        let f = |x: f64| x.sqrt() * (3.0 * x).sin();
        let coarse = QuadratureSpec::default();
        let fine = coarse.with_tolerances(coarse.abs_tol / 2.0, coarse.rel_tol / 2.0);
        let a = integrate(&f, 0.0, 2.0, &coarse);
        let b = integrate(&f, 0.0, 2.0, &fine);
        assert!(a.converged && b.converged);
        assert!((a.value - b.value).abs() <= a.error_estimate + 1e-15);
    }

    #[test]
    fn h_table_examples() {
        let spec = QuadratureSpec::default();
        let t = h_tables(2.0, 1.0, 0.0, 0.0, 2.0, &spec).unwrap();
        assert_relative_eq!(t.h1.unwrap().value, 1.0, epsilon = 1e-10);
        let t = h_tables(E, 1.0, -2.0, -1.0, E, &spec).unwrap();
        assert_relative_eq!(t.h1.unwrap().value, 1.0, epsilon = 1e-9);
        let t = h_tables(E, 1.0, 0.0, -1.0, 2.0, &spec).unwrap();
        assert!(matches!(t.h1, Err(HardyError::Refused(_))));
        // H2 with l = D: ∫_1^e log(e/t)^{-1/2} t^{-1} dt = ∫_0^1 ρ^{-1/2} dρ = 2.
        let t = h_tables(E, 1.0, -0.5, -1.0, E, &spec).unwrap();
        assert_relative_eq!(t.h2.unwrap().value, 2.0, epsilon = 1e-8);
        let t = h_tables(E, 1.0, -1.0, -1.0, E, &spec).unwrap();
        assert!(matches!(t.h2, Err(HardyError::Refused(_))));
        assert!(h_tables(1.0, 2.0, 0.0, 0.0, 2.0, &spec).is_err());
    }
}
