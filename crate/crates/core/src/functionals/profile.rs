//! Radial test functions `u(r)`.
//!
//! A power-log piece is a finite sum of terms `± e^c r^a log(D/r)^b e^(λ r)`
//! living on an interval expressed in one of three integration charts. All
//! evaluation happens in log space: a profile point reports `ln|u|` and
//! `ln|r u'|` with the pure power of `r` held apart, so profiles concentrated
//! at `r ~ e^-100000` neither underflow nor lose their `r`-power bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{HardyError, Result};

/// Integration coordinate of a piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    /// `x = r`.
    Linear,
    /// `y = ln r`.
    LogRadius,
    /// `z = ln ln(D/r)`; `r` decreases as `z` increases.
    LogLog,
}

/// Logarithmic coordinates of a radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint {
    pub ln_r: f64,
    /// `ln log(D/r)`, NaN without a log base.
    pub ln_rho: f64,
}

impl Chart {
    pub fn point(self, x: f64, ln_d: Option<f64>) -> ChartPoint {
        match self {
            Chart::Linear | Chart::LogRadius => {
                let ln_r = if self == Chart::Linear { x.ln() } else { x };
                let ln_rho = ln_d.map_or(f64::NAN, |ld| (ld - ln_r).ln());
                ChartPoint { ln_r, ln_rho }
            }
            Chart::LogLog => {
                let ld = ln_d.expect("log-log chart needs a log base");
                ChartPoint {
                    ln_r: ld - x.exp(),
                    ln_rho: x,
                }
            }
        }
    }

    /// `ln( (|dr|/r) / dx )`.
    pub fn ln_jacobian(self, pt: &ChartPoint) -> f64 {
        match self {
            Chart::Linear => -pt.ln_r,
            Chart::LogRadius => 0.0,
            Chart::LogLog => pt.ln_rho,
        }
    }

    /// Chart coordinate of the radius `r` (possibly infinite).
    pub fn coord(self, r: f64, ln_d: Option<f64>) -> f64 {
        match self {
            Chart::Linear => r,
            Chart::LogRadius => r.ln(),
            Chart::LogLog => {
                let ld = ln_d.expect("log-log chart needs a log base");
                (ld - r.ln()).ln()
            }
        }
    }

    /// Whether the coordinate increases with `r`.
    pub fn increasing(self) -> bool {
        self != Chart::LogLog
    }

    /// Natural chart for a radial interval.
    pub fn auto(r0: f64, r1: f64) -> Chart {
        if r0 > 0.0 && r1.is_finite() && r1 / r0 < 1e3 {
            Chart::Linear
        } else {
            Chart::LogRadius
        }
    }
}

/// `x * y` with the convention `0 * ∞ = 0`.
#[inline]
pub(crate) fn mul0(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y
    }
}

/// `sign * e^ln_coeff * r^a * log(D/r)^b * e^(lambda r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub sign: f64,
    pub ln_coeff: f64,
    pub a: f64,
    /// Small correction to `a`, kept apart so that `a + a_eps` loses nothing.
    #[serde(default)]
    pub a_eps: f64,
    pub b: f64,
    pub lambda: f64,
}

impl Term {
    pub fn new(coeff: f64, a: f64, b: f64) -> Self {
        Self {
            sign: coeff.signum(),
            ln_coeff: coeff.abs().ln(),
            a,
            a_eps: 0.0,
            b,
            lambda: 0.0,
        }
    }

    pub fn with_exp(coeff: f64, a: f64, lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::new(coeff, a, 0.0)
        }
    }

    fn is_zero(&self) -> bool {
        self.ln_coeff == f64::NEG_INFINITY
    }

    /// Terms of `r d/dr` applied to this term.
    fn r_derivative(&self) -> Vec<Term> {
        self.r_derivative_plus(0.0)
    }

    /// Terms of `(r d/dr + c)` applied to this term; `a + c` is formed before adding `a_eps`.
    fn r_derivative_plus(&self, c: f64) -> Vec<Term> {
        let mut out = Vec::new();
        let a = (self.a + c) + self.a_eps;
        if a != 0.0 {
            out.push(Term {
                sign: self.sign * a.signum(),
                ln_coeff: self.ln_coeff + a.abs().ln(),
                ..*self
            });
        }
        if self.b != 0.0 {
            out.push(Term {
                sign: -self.sign * self.b.signum(),
                ln_coeff: self.ln_coeff + self.b.abs().ln(),
                b: self.b - 1.0,
                ..*self
            });
        }
        if self.lambda != 0.0 {
            out.push(Term {
                sign: self.sign * self.lambda.signum(),
                ln_coeff: self.ln_coeff + self.lambda.abs().ln(),
                a: self.a + 1.0,
                ..*self
            });
        }
        out
    }
}

fn merge_terms(terms: Vec<Term>) -> Vec<Term> {
    let mut out: Vec<Term> = Vec::new();
    for t in terms.into_iter().filter(|t| !t.is_zero()) {
        if let Some(e) = out
            .iter_mut()
            .find(|e| e.a == t.a && e.a_eps == t.a_eps && e.b == t.b && e.lambda == t.lambda)
        {
            let s = e.sign * e.ln_coeff.exp() + t.sign * t.ln_coeff.exp();
            e.sign = s.signum();
            e.ln_coeff = s.abs().ln();
        } else {
            out.push(t);
        }
    }
    out.retain(|t| !t.is_zero());
    out
}

/// Signed log-sum-exp: returns `(sign, ln|Σ|)`.
pub(crate) fn signed_lse(items: &[(f64, f64)]) -> (f64, f64) {
    let max = items.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return (0.0, f64::NEG_INFINITY);
    }
    if max == f64::INFINITY {
        return (items.iter().find(|x| x.1 == f64::INFINITY).unwrap().0, f64::INFINITY);
    }
    let s: f64 = items.iter().map(|(sg, l)| sg * (l - max).exp()).sum();
    if s == 0.0 {
        (0.0, f64::NEG_INFINITY)
    } else {
        (s.signum(), max + s.abs().ln())
    }
}

/// One interval of a power-log profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub chart: Chart,
    /// Bounds in chart coordinates, `lo < hi`; either may be infinite.
    pub lo: f64,
    pub hi: f64,
    pub terms: Vec<Term>,
    /// Terms of `r u'`.
    pub dterms: Vec<Term>,
    pub shift: (f64, f64),
    pub dshift: (f64, f64),
}

/// Smallest power `(a, a_eps)` among the terms.
fn common_shift(terms: &[Term]) -> (f64, f64) {
    terms
        .iter()
        .map(|t| (t.a, t.a_eps))
        .min_by(|x, y| (x.0 + x.1).total_cmp(&(y.0 + y.1)))
        .unwrap_or((0.0, 0.0))
}

impl Piece {
    pub fn new(chart: Chart, lo: f64, hi: f64, terms: Vec<Term>) -> Self {
        let terms = merge_terms(terms);
        let dterms = merge_terms(terms.iter().flat_map(|t| t.r_derivative()).collect());
        let shift = common_shift(&terms);
        let dshift = common_shift(&dterms);
        Self {
            chart,
            lo,
            hi,
            terms,
            dterms,
            shift,
            dshift,
        }
    }

    /// Same piece with `dterms` holding `r u' + c u`.
    fn with_derivative_plus(&self, c: f64) -> Self {
        let dterms = merge_terms(self.terms.iter().flat_map(|t| t.r_derivative_plus(c)).collect());
        let dshift = common_shift(&dterms);
        Self {
            dterms,
            dshift,
            ..self.clone()
        }
    }

    /// Piece on the radial interval `(r0, r1)` with an automatically chosen chart.
    pub fn on_radii(r0: f64, r1: f64, terms: Vec<Term>) -> Self {
        let chart = Chart::auto(r0, r1);
        Self::new(chart, chart.coord(r0, None), chart.coord(r1, None), terms)
    }

    fn eval_terms(terms: &[Term], shift: (f64, f64), pt: &ChartPoint, r: f64) -> (f64, f64) {
        let mut buf: Vec<(f64, f64)> = Vec::with_capacity(terms.len());
        for t in terms {
            let ln = t.ln_coeff
                + mul0(t.a - shift.0, pt.ln_r)
                + mul0(t.a_eps - shift.1, pt.ln_r)
                + mul0(t.b, pt.ln_rho)
                + mul0(t.lambda, r);
            buf.push((t.sign, ln));
        }
        signed_lse(&buf)
    }

    /// Radius range `(r_lo, r_hi)` of the piece.
    pub fn radii(&self, ln_d: Option<f64>) -> (f64, f64) {
        let a = self.chart.point(self.lo, ln_d).ln_r.exp();
        let b = self.chart.point(self.hi, ln_d).ln_r.exp();
        let (a, b) = match self.chart {
            Chart::Linear => (self.lo, self.hi),
            _ => (a, b),
        };
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

/// `u = u_sign r^u_shift e^u_rest` and `r u' = du_sign r^du_shift e^du_rest`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub u_sign: f64,
    pub u_shift: f64,
    pub u_shift_eps: f64,
    pub u_rest: f64,
    pub du_sign: f64,
    pub du_shift: f64,
    pub du_shift_eps: f64,
    pub du_rest: f64,
}

impl ProfilePoint {
    pub const ZERO: ProfilePoint = ProfilePoint {
        u_sign: 0.0,
        u_shift: 0.0,
        u_shift_eps: 0.0,
        u_rest: f64::NEG_INFINITY,
        du_sign: 0.0,
        du_shift: 0.0,
        du_shift_eps: 0.0,
        du_rest: f64::NEG_INFINITY,
    };

    pub fn ln_u(&self, ln_r: f64) -> f64 {
        mul0(self.u_shift, ln_r) + mul0(self.u_shift_eps, ln_r) + self.u_rest
    }

    pub fn ln_du(&self, ln_r: f64) -> f64 {
        mul0(self.du_shift, ln_r) + mul0(self.du_shift_eps, ln_r) + self.du_rest
    }

    pub fn u(&self, ln_r: f64) -> f64 {
        if self.u_sign == 0.0 {
            0.0
        } else {
            self.u_sign * self.ln_u(ln_r).exp()
        }
    }

    pub fn du(&self, ln_r: f64) -> f64 {
        if self.du_sign == 0.0 {
            0.0
        } else {
            self.du_sign * self.ln_du(ln_r).exp()
        }
    }
}

/// Quintic smoothstep cutoff: 1 on `[0, η/2]`, 0 on `[η, ∞)`, `C²` in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub eta: f64,
}

impl Cutoff {
    /// `(φ(r), r φ'(r))`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let h = 0.5 * self.eta;
        if r <= h {
            return (1.0, 0.0);
        }
        if r >= self.eta {
            return (0.0, 0.0);
        }
        let s = (r - h) / h;
        let step = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
        let dstep = 30.0 * s * s * (s - 1.0) * (s - 1.0);
        (1.0 - step, -r * dstep / h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLogProfile {
    pub pieces: Vec<Piece>,
    pub log_base: Option<f64>,
    pub cutoff: Option<Cutoff>,
    pub ln_iota: Option<f64>,
    /// Common factor `e^ln_scale`, applied after the term sums.
    #[serde(default)]
    pub ln_scale: f64,
}

/// Cubic Hermite interpolant in `y = ln r`; zero outside `[y_0, y_N]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridProfile {
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    /// `du/dy = r u'`.
    pub du: Vec<f64>,
}

impl GridProfile {
    fn cell(&self, y: f64) -> Option<usize> {
        let n = self.y.len();
        if !(y >= self.y[0] && y <= self.y[n - 1]) {
            return None;
        }
        let i = self.y.partition_point(|&v| v <= y);
        Some(i.clamp(1, n - 1) - 1)
    }

    /// `(u, du/dy)` at `y`.
    pub fn eval(&self, y: f64) -> (f64, f64) {
        let Some(i) = self.cell(y) else {
            return (0.0, 0.0);
        };
        let h = self.y[i + 1] - self.y[i];
        let s = (y - self.y[i]) / h;
        let (u0, u1, d0, d1) = (self.u[i], self.u[i + 1], self.du[i] * h, self.du[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let u = h00 * u0 + h10 * d0 + h01 * u1 + h11 * d1;
        let g00 = 6.0 * s2 - 6.0 * s;
        let g10 = 3.0 * s2 - 4.0 * s + 1.0;
        let g01 = -6.0 * s2 + 6.0 * s;
        let g11 = 3.0 * s2 - 2.0 * s;
        let du = (g00 * u0 + g10 * d0 + g01 * u1 + g11 * d1) / h;
        (u, du)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RadialProfile {
    PowerLog(PowerLogProfile),
    Grid(GridProfile),
}

fn point_from_values(u: f64, du: f64) -> ProfilePoint {
    ProfilePoint {
        u_sign: if u == 0.0 { 0.0 } else { u.signum() },
        u_shift: 0.0,
        u_shift_eps: 0.0,
        u_rest: u.abs().ln(),
        du_sign: if du == 0.0 { 0.0 } else { du.signum() },
        du_shift: 0.0,
        du_shift_eps: 0.0,
        du_rest: du.abs().ln(),
    }
}

/// Coefficients of `(r-a)^q (b-r)^q` in powers of `r`.
fn bump_coefficients(a: f64, b: f64, q: u32) -> Vec<f64> {
    let q = q as usize;
    let mut left = vec![0.0; q + 1];
    let mut right = vec![0.0; q + 1];
    let mut binom = vec![1.0f64; q + 1];
    for i in 1..=q {
        binom[i] = binom[i - 1] * (q + 1 - i) as f64 / i as f64;
    }
    for i in 0..=q {
        left[i] = binom[i] * (-a).powi((q - i) as i32);
        right[i] = binom[i] * b.powi((q - i) as i32) * if i % 2 == 1 { -1.0 } else { 1.0 };
    }
    let mut out = vec![0.0; 2 * q + 1];
    for i in 0..=q {
        for j in 0..=q {
            out[i + j] += left[i] * right[j];
        }
    }
    out
}

impl RadialProfile {
    pub fn zero() -> Self {
        RadialProfile::PowerLog(PowerLogProfile {
            pieces: Vec::new(),
            log_base: None,
            cutoff: None,
            ln_iota: None,
            ln_scale: 0.0,
        })
    }

    pub fn from_pieces(pieces: Vec<Piece>, log_base: Option<f64>) -> Result<Self> {
        for p in &pieces {
            if !(p.lo < p.hi) {
                return Err(HardyError::InvalidParameter(format!(
                    "piece bounds must satisfy lo < hi (got {} .. {})",
                    p.lo, p.hi
                )));
            }
            let uses_log = p.terms.iter().any(|t| t.b != 0.0) || p.chart == Chart::LogLog;
            if uses_log && log_base.is_none() {
                return Err(HardyError::InvalidParameter(
                    "log terms require a log base D".into(),
                ));
            }
        }
        if let Some(d) = log_base {
            if !(d > 0.0) {
                return Err(HardyError::InvalidParameter("log base must be positive".into()));
            }
        }
        Ok(RadialProfile::PowerLog(PowerLogProfile {
            pieces,
            log_base,
            cutoff: None,
            ln_iota: None,
            ln_scale: 0.0,
        }))
    }

    /// `coeff * r^a * e^(lambda r)` on the radial interval `(r0, r1)`.
    pub fn power_exp(coeff: f64, a: f64, lambda: f64, r0: f64, r1: f64) -> Result<Self> {
        Self::from_pieces(vec![Piece::on_radii(r0, r1, vec![Term::with_exp(coeff, a, lambda)])], None)
    }

    /// `coeff * r^a * log(D/r)^b` on `(r0, r1)`.
    pub fn power_log(coeff: f64, a: f64, b: f64, d: f64, r0: f64, r1: f64) -> Result<Self> {
        let piece = Piece::on_radii(r0, r1, vec![Term::new(coeff, a, b)]);
        Self::from_pieces(vec![piece], Some(d))
    }

    /// `amplitude * (r-a)^q (b-r)^q` on `(a, b)`, zero elsewhere.
    pub fn bump(a: f64, b: f64, q: u32, amplitude: f64) -> Result<Self> {
        if !(a > 0.0 && b > a) || q < 2 {
            return Err(HardyError::InvalidParameter(
                "bump needs 0 < a < b and q >= 2".into(),
            ));
        }
        let coeffs = bump_coefficients(a, b, q);
        let terms = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, c)| Term::new(amplitude * c, j as f64, 0.0))
            .collect();
        Self::from_pieces(vec![Piece::new(Chart::Linear, a, b, terms)], None)
    }

    /// Sum of bumps with disjoint supports.
    pub fn bumps(parts: &[(f64, f64, u32, f64)]) -> Result<Self> {
        let mut pieces = Vec::new();
        for &(a, b, q, amp) in parts {
            if let RadialProfile::PowerLog(p) = Self::bump(a, b, q, amp)? {
                pieces.extend(p.pieces);
            }
        }
        pieces.sort_by(|x, y| x.lo.total_cmp(&y.lo));
        for w in pieces.windows(2) {
            if w[1].lo < w[0].hi {
                return Err(HardyError::InvalidParameter("bump supports overlap".into()));
            }
        }
        Self::from_pieces(pieces, None)
    }

    /// Grid profile with explicit `du/dy`.
    pub fn grid(y: Vec<f64>, u: Vec<f64>, du: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if n < 2 || u.len() != n || du.len() != n {
            return Err(HardyError::InvalidParameter(
                "grid profile needs at least two nodes and matching lengths".into(),
            ));
        }
        if y.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(HardyError::InvalidParameter(
                "grid nodes must be strictly increasing".into(),
            ));
        }
        Ok(RadialProfile::Grid(GridProfile { y, u, du }))
    }

    /// Grid profile whose slopes are centered differences (one-sided at the ends).
    pub fn grid_from_values(y: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if n < 3 || u.len() != n {
            return Err(HardyError::InvalidParameter(
                "grid profile needs at least three nodes".into(),
            ));
        }
        let mut du = vec![0.0; n];
        for i in 1..n - 1 {
            let (h0, h1) = (y[i] - y[i - 1], y[i + 1] - y[i]);
            du[i] = (u[i + 1] - u[i]) * h0 / (h1 * (h0 + h1)) + (u[i] - u[i - 1]) * h1 / (h0 * (h0 + h1));
        }
        du[0] = (u[1] - u[0]) / (y[1] - y[0]);
        du[n - 1] = (u[n - 1] - u[n - 2]) / (y[n - 1] - y[n - 2]);
        Self::grid(y, u, du)
    }

    pub fn log_base(&self) -> Option<f64> {
        match self {
            RadialProfile::PowerLog(p) => p.log_base,
            RadialProfile::Grid(_) => None,
        }
    }

    pub fn uses_logs(&self) -> bool {
        match self {
            RadialProfile::PowerLog(p) => p
                .pieces
                .iter()
                .any(|pc| pc.chart == Chart::LogLog || pc.terms.iter().any(|t| t.b != 0.0)),
            RadialProfile::Grid(_) => false,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            RadialProfile::PowerLog(p) => p.pieces.iter().all(|pc| pc.terms.is_empty()),
            RadialProfile::Grid(g) => g.u.iter().all(|v| *v == 0.0),
        }
    }

    /// Multiply by the cutoff `φ` with parameter `eta`.
    pub fn with_cutoff(self, eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(HardyError::InvalidParameter("cutoff radius must be positive".into()));
        }
        match self {
            RadialProfile::PowerLog(mut p) => {
                p.cutoff = Some(Cutoff { eta });
                Ok(RadialProfile::PowerLog(p))
            }
            RadialProfile::Grid(_) => Err(HardyError::InvalidParameter(
                "cutoffs apply to power-log profiles only".into(),
            )),
        }
    }

    /// `c * u`.
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            RadialProfile::PowerLog(p) if c == 0.0 => {
                let mut p = p.clone();
                p.pieces.clear();
                RadialProfile::PowerLog(p)
            }
            RadialProfile::PowerLog(_) => self.scaled_signed_ln(c.signum(), c.abs().ln()),
            RadialProfile::Grid(g) => RadialProfile::Grid(GridProfile {
                y: g.y.clone(),
                u: g.u.iter().map(|v| v * c).collect(),
                du: g.du.iter().map(|v| v * c).collect(),
            }),
        }
    }

    /// Copy whose derivative slot holds `r u' + c u`, when that can be formed term by term.
    ///
    /// Cancellation in `r u' + c u` then happens in the exponents, where it is exact.
    pub(crate) fn derivative_plus_view(&self, c: f64) -> Option<RadialProfile> {
        match self {
            RadialProfile::PowerLog(p) if p.ln_iota.is_none() => {
                let mut p = p.clone();
                p.pieces = p.pieces.iter().map(|pc| pc.with_derivative_plus(c)).collect();
                Some(RadialProfile::PowerLog(p))
            }
            _ => None,
        }
    }

    /// Multiply by `e^ln_c`, for factors outside the `f64` range.
    pub fn scaled_ln(&self, ln_c: f64) -> Self {
        self.scaled_signed_ln(1.0, ln_c)
    }

    fn scaled_signed_ln(&self, sign: f64, lc: f64) -> Self {
        match self {
            RadialProfile::PowerLog(p) => {
                let mut p = p.clone();
                if sign < 0.0 {
                    for pc in &mut p.pieces {
                        for t in pc.terms.iter_mut().chain(pc.dterms.iter_mut()) {
                            t.sign = -t.sign;
                        }
                    }
                }
                p.ln_scale += lc;
                if let Some(li) = p.ln_iota.as_mut() {
                    *li += lc;
                }
                RadialProfile::PowerLog(p)
            }
            RadialProfile::Grid(g) => {
                let c = sign * lc.exp();
                RadialProfile::Grid(GridProfile {
                    y: g.y.clone(),
                    u: g.u.iter().map(|v| v * c).collect(),
                    du: g.du.iter().map(|v| v * c).collect(),
                })
            }
        }
    }

    /// Largest `ln|u|` over a fixed sample of each piece; `None` when nothing nonzero is seen.
    pub fn ln_sample_peak(&self) -> Option<f64> {
        let ln_d = self.log_base().map(f64::ln);
        let mut best = f64::NEG_INFINITY;
        for i in 0..self.num_pieces() {
            let (chart, lo, hi) = self.piece_bounds(i);
            let (lo, hi) = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => (lo, hi),
                (true, false) => (lo, lo + 50.0),
                (false, true) => (hi - 50.0, hi),
                (false, false) => (-25.0, 25.0),
            };
            for j in 0..=32 {
                let x = lo + (hi - lo) * j as f64 / 32.0;
                let pt = chart.point(x, ln_d);
                let pp = self.eval_piece(i, &pt);
                if pp.u_sign != 0.0 {
                    let l = pp.ln_u(pt.ln_r);
                    if l.is_finite() {
                        best = best.max(l);
                    }
                }
            }
        }
        best.is_finite().then_some(best)
    }

    /// Copy scaled so the sampled peak of `|u|` is 1.
    pub fn normalized(&self) -> Self {
        match self.ln_sample_peak() {
            Some(l) => self.scaled_ln(-l),
            None => self.clone(),
        }
    }

    pub fn num_pieces(&self) -> usize {
        match self {
            RadialProfile::PowerLog(p) => p.pieces.len(),
            RadialProfile::Grid(_) => 1,
        }
    }

    /// Chart and chart-coordinate bounds of piece `i`.
    pub fn piece_bounds(&self, i: usize) -> (Chart, f64, f64) {
        match self {
            RadialProfile::PowerLog(p) => {
                let pc = &p.pieces[i];
                (pc.chart, pc.lo, pc.hi)
            }
            RadialProfile::Grid(g) => (Chart::LogRadius, g.y[0], *g.y.last().unwrap()),
        }
    }

    /// Evaluate piece `i` at a chart point.
    pub fn eval_piece(&self, i: usize, pt: &ChartPoint) -> ProfilePoint {
        match self {
            RadialProfile::Grid(g) => {
                let (u, du) = g.eval(pt.ln_r);
                point_from_values(u, du)
            }
            RadialProfile::PowerLog(p) => {
                let pc = &p.pieces[i];
                let r = pt.ln_r.exp();
                let (us, ur) = Piece::eval_terms(&pc.terms, pc.shift, pt, r);
                let (ds, dr) = Piece::eval_terms(&pc.dterms, pc.dshift, pt, r);
                let mut out = ProfilePoint {
                    u_sign: us,
                    u_shift: pc.shift.0,
                    u_shift_eps: pc.shift.1,
                    u_rest: ur + p.ln_scale,
                    du_sign: ds,
                    du_shift: pc.dshift.0,
                    du_shift_eps: pc.dshift.1,
                    du_rest: dr + p.ln_scale,
                };
                if let Some(li) = p.ln_iota {
                    let full = out.ln_u(pt.ln_r);
                    if out.u_sign <= 0.0 || full <= li {
                        return ProfilePoint::ZERO;
                    }
                    out.u_rest += (-(li - full).exp_m1()).ln();
                }
                if let Some(c) = p.cutoff {
                    let (phi, rphi) = c.eval(r);
                    if phi == 0.0 {
                        return ProfilePoint::ZERO;
                    }
                    if rphi != 0.0 {
                        let u = out.u(pt.ln_r);
                        let du = out.du(pt.ln_r);
                        return point_from_values(phi * u, phi * du + rphi * u);
                    }
                }
                out
            }
        }
    }

    /// Index of a piece containing the radius `r`.
    fn locate(&self, r: f64) -> Option<(usize, ChartPoint)> {
        let ln_d = self.log_base().map(f64::ln);
        for i in 0..self.num_pieces() {
            let (chart, lo, hi) = self.piece_bounds(i);
            if chart == Chart::LogLog && r >= self.log_base().unwrap() {
                continue;
            }
            let x = chart.coord(r, ln_d);
            if x >= lo && x <= hi {
                return Some((i, chart.point(x, ln_d)));
            }
        }
        None
    }

    /// `(u(r), u'(r))`, zero off the support.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        if !(r > 0.0) {
            return (0.0, 0.0);
        }
        match self.locate(r) {
            None => (0.0, 0.0),
            Some((i, pt)) => {
                let pp = self.eval_piece(i, &pt);
                (pp.u(pt.ln_r), pp.du(pt.ln_r) / r)
            }
        }
    }

    /// `max(u - iota, 0)`. Only positive single-term pieces or finite pieces can be cut.
    pub fn truncate(&self, iota: f64) -> Result<Self> {
        if !(iota >= 0.0) {
            return Err(HardyError::InvalidParameter("iota must be nonnegative".into()));
        }
        if iota == 0.0 {
            return Ok(self.clone());
        }
        self.truncate_ln(iota.ln())
    }

    /// [`RadialProfile::truncate`] with `ln iota`, for levels below the f64 range.
    pub fn truncate_ln(&self, ln_iota: f64) -> Result<Self> {
        let RadialProfile::PowerLog(p) = self else {
            return Err(HardyError::InvalidParameter(
                "truncation applies to power-log profiles".into(),
            ));
        };
        if ln_iota == f64::NEG_INFINITY {
            return Ok(self.clone());
        }
        if p.ln_iota.is_some() {
            return Err(HardyError::InvalidParameter("profile is already truncated".into()));
        }
        let mut p = p.clone();
        let ln_d = p.log_base.map(f64::ln);
        let mut kept = Vec::new();
        for pc in &p.pieces {
            if let Some((lo, hi)) = truncation_window(pc, ln_iota - p.ln_scale, ln_d)? {
                let mut q = pc.clone();
                q.lo = lo;
                q.hi = hi;
                kept.push(q);
            }
        }
        if kept.is_empty() {
            return Err(HardyError::EmptySupport(format!(
                "iota=exp({ln_iota}) is not below the profile maximum"
            )));
        }
        p.pieces = kept;
        p.ln_iota = Some(ln_iota);
        Ok(RadialProfile::PowerLog(p))
    }
}

/// Chart window where the piece exceeds `e^ln_iota`, if any.
fn truncation_window(pc: &Piece, ln_iota: f64, ln_d: Option<f64>) -> Result<Option<(f64, f64)>> {
    let ln_u = |x: f64| -> f64 {
        let pt = pc.chart.point(x, ln_d);
        let (s, rest) = Piece::eval_terms(&pc.terms, pc.shift, &pt, pt.ln_r.exp());
        if s <= 0.0 {
            f64::NEG_INFINITY
        } else {
            mul0(pc.shift.0, pt.ln_r) + mul0(pc.shift.1, pt.ln_r) + rest
        }
    };
    if pc.terms.len() == 1 && pc.terms[0].sign > 0.0 && pc.terms[0].lambda == 0.0 {
        let t = pc.terms[0];
        // ln u is affine in the chart coordinate for pure powers in y and pure logs in z.
        let slope = match pc.chart {
            Chart::LogRadius if t.b == 0.0 => Some(t.a + t.a_eps),
            Chart::LogLog if t.a == 0.0 && t.a_eps == 0.0 => Some(t.b),
            _ => None,
        };
        if let Some(slope) = slope {
            if slope == 0.0 {
                return Ok(if t.ln_coeff > ln_iota { Some((pc.lo, pc.hi)) } else { None });
            }
            let x0 = (ln_iota - t.ln_coeff) / slope;
            let (lo, hi) = if slope > 0.0 {
                (pc.lo.max(x0), pc.hi)
            } else {
                (pc.lo, pc.hi.min(x0))
            };
            let slack = 8.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0);
            return Ok(if hi - lo > slack { Some((lo, hi)) } else { None });
        }
    }
    if !(pc.lo.is_finite() && pc.hi.is_finite()) {
        return Err(HardyError::InvalidParameter(
            "truncation of unbounded pieces needs a single power or log term".into(),
        ));
    }
    let n = 4096;
    let xs: Vec<f64> = (0..=n)
        .map(|i| pc.lo + (pc.hi - pc.lo) * i as f64 / n as f64)
        .collect();
    let above: Vec<bool> = xs.iter().map(|&x| ln_u(x) > ln_iota).collect();
    let Some(first) = above.iter().position(|&b| b) else {
        return Ok(None);
    };
    let last = above.iter().rposition(|&b| b).unwrap();
    if above[first..=last].iter().any(|b| !b) {
        return Err(HardyError::InvalidParameter(
            "truncation level set is not an interval".into(),
        ));
    }
    let refine = |mut inside: f64, mut outside: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if ln_u(mid) > ln_iota {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    let lo = if first == 0 { pc.lo } else { refine(xs[first], xs[first - 1]) };
    let hi = if last == n { pc.hi } else { refine(xs[last], xs[last + 1]) };
    Ok(if lo < hi { Some((lo, hi)) } else { None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn power_log_values_and_derivative() {
        let d = 5.0;
        let u = RadialProfile::power_log(2.0, 1.5, 0.7, d, 0.0, 1.0).unwrap();
        let r: f64 = 0.3;
        let (v, dv) = u.eval(r);
        let rho = (d / r).ln();
        assert_relative_eq!(v, 2.0 * r.powf(1.5) * rho.powf(0.7), epsilon = 1e-14);
        let exact = 2.0 * (1.5 * r.powf(0.5) * rho.powf(0.7) - 0.7 * r.powf(0.5) * rho.powf(-0.3));
        assert_relative_eq!(dv, exact, epsilon = 1e-13);
    }

    #[test]
    fn bump_matches_factored_form() {
        let u = RadialProfile::bump(0.5, 2.0, 3, 1.5).unwrap();
        for &r in &[0.6, 1.0, 1.7, 1.99] {
            let (v, dv) = u.eval(r);
            let f = 1.5 * ((r - 0.5) * (2.0 - r)).powi(3);
            let df = 1.5 * 3.0 * ((r - 0.5) * (2.0 - r)).powi(2) * ((2.0 - r) - (r - 0.5));
            assert!((v - f).abs() < 1e-12);
            assert!((dv - df).abs() < 1e-11);
        }
        assert_eq!(u.eval(0.4), (0.0, 0.0));
        assert_eq!(u.eval(2.5), (0.0, 0.0));
    }

    #[test]
    fn cutoff_is_c2_quintic() {
        let c = Cutoff { eta: 2.0 };
        assert_eq!(c.eval(0.5), (1.0, 0.0));
        assert_eq!(c.eval(2.5), (0.0, 0.0));
        let (v, _) = c.eval(1.5);
        assert_relative_eq!(v, 0.5, epsilon = 1e-15);
        let h = 1e-6;
        let r = 1.3;
        let fd = (c.eval(r + h).0 - c.eval(r - h).0) / (2.0 * h);
        assert_relative_eq!(c.eval(r).1, r * fd, epsilon = 1e-8);
    }

    #[test]
    fn truncation_of_powers() {
        let u = RadialProfile::power_exp(1.0, 2.0, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(u.truncate(0.0).unwrap(), u);
        let t = u.truncate(0.25).unwrap();
        assert_eq!(t.eval(0.4).0, 0.0);
        assert_relative_eq!(t.eval(0.8).0, 0.64 - 0.25, epsilon = 1e-14);
        assert_relative_eq!(t.eval(0.8).1, 1.6, epsilon = 1e-14);
        assert!(matches!(u.truncate(1.5), Err(HardyError::EmptySupport(_))));
        let b = RadialProfile::bump(0.5, 1.5, 2, 16.0).unwrap();
        let tb = b.truncate(0.5).unwrap();
        assert_relative_eq!(tb.eval(1.0).0, 0.5, epsilon = 1e-12);
        assert_eq!(tb.eval(0.55).0, 0.0);
    }

    #[test]
    fn grid_profile_reproduces_cubics() {
        let y: Vec<f64> = (0..=20).map(|i| -2.0 + 0.1 * i as f64).collect();
        let f = |y: f64| y * y * y - y;
        let df = |y: f64| 3.0 * y * y - 1.0;
        let g = RadialProfile::grid(y.clone(), y.iter().map(|&v| f(v)).collect(), y.iter().map(|&v| df(v)).collect()).unwrap();
        let r = (-1.234f64).exp();
        let (v, dv) = g.eval(r);
        assert_relative_eq!(v, f(-1.234), epsilon = 1e-12);
        assert_relative_eq!(dv * r, df(-1.234), epsilon = 1e-11);
        let h = RadialProfile::grid_from_values(y.clone(), y.iter().map(|v| v.sin()).collect()).unwrap();
        if let RadialProfile::Grid(gp) = &h {
            for (i, yi) in y.iter().enumerate().take(y.len() - 1).skip(1) {
                assert!((gp.du[i] - yi.cos()).abs() < 2e-3);
            }
        }
    }

    #[test]
    fn extreme_radii_do_not_underflow() {
        // u = r^0.5 on (0, 1): evaluate at ln r = -1e5 through the chart.
        let u = RadialProfile::power_exp(1.0, 0.5, 0.0, 0.0, 1.0).unwrap();
        let pt = Chart::LogRadius.point(-1e5, None);
        let pp = u.eval_piece(0, &pt);
        assert_relative_eq!(pp.ln_u(pt.ln_r), -0.5e5, epsilon = 1e-9);
        assert_relative_eq!(pp.ln_du(pt.ln_r), 0.5f64.ln() - 0.5e5, epsilon = 1e-9);
    }
}
