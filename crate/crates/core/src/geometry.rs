//! Closed-form model manifolds.
//!
//! Every model is described through the distance `r` to its submanifold `N`:
//! the Fermi density `det A(t)`, the Laplacian of `r`, and the supremum of `r`
//! over the working domain. Radial integrals over the manifold then reduce to
//! `transverse_mass * ∫ F(t) density(t) dt`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{HardyError, Result};

/// Density values are floored here near focal points.
pub const DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// `R^m` around a point.
    EuclideanPoint { m: usize },
    /// `R^m` around a linear `R^n`.
    EuclideanSubspace { m: usize, n: usize },
    /// `R x S^n` around the slice `{s0} x S^n`.
    CylinderSection { n: usize },
    /// `R x S^n` around the line `R x {w0}`.
    CylinderAxis { n: usize },
    /// Upper hemisphere of `S^n` with the equator as `N`.
    Hemisphere { n: usize },
    /// Flat torus `T^m` around a flat subtorus `T^n`, on the tube of radius `eta`.
    TorusSubtorus { m: usize, n: usize, eta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpace {
    pub kind: ModelKind,
    pub m: usize,
    pub n: usize,
    pub r_max: f64,
    pub transverse_mass: f64,
}

/// `(s_K(t), s_K'(t))` for the solution of `s'' + K s = 0`, `s(0) = 0`, `s'(0) = 1`.
pub fn s_k(k: f64, t: f64) -> (f64, f64) {
    if k == 0.0 {
        (t, 1.0)
    } else if k > 0.0 {
        let q = k.sqrt();
        ((q * t).sin() / q, (q * t).cos())
    } else {
        let q = (-k).sqrt();
        ((q * t).sinh() / q, (q * t).cosh())
    }
}

fn check_dims(m: usize, n: usize) -> Result<()> {
    if m < 2 {
        return Err(HardyError::InvalidParameter(format!(
            "ambient dimension m={m} must be at least 2"
        )));
    }
    if n >= m {
        return Err(HardyError::InvalidParameter(format!(
            "submanifold dimension n={n} must satisfy n <= m-1 (m={m})"
        )));
    }
    Ok(())
}

/// Largest tube radius supported for a torus of codimension `k`.
pub fn torus_eta_limit(k: usize) -> f64 {
    match k {
        2 | 3 => PI * SQRT_2,
        _ => PI,
    }
}

impl ModelSpace {
    fn build(kind: ModelKind, m: usize, n: usize, r_max: f64) -> Result<Self> {
        check_dims(m, n)?;
        Ok(Self {
            kind,
            m,
            n,
            r_max,
            transverse_mass: 1.0,
        })
    }

    pub fn euclidean_point(m: usize) -> Result<Self> {
        Self::build(ModelKind::EuclideanPoint { m }, m, 0, f64::INFINITY)
    }

    pub fn euclidean_subspace(m: usize, n: usize) -> Result<Self> {
        Self::build(ModelKind::EuclideanSubspace { m, n }, m, n, f64::INFINITY)
    }

    pub fn cylinder_section(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(HardyError::InvalidParameter("cylinder needs n >= 1".into()));
        }
        Self::build(ModelKind::CylinderSection { n }, n + 1, n, f64::INFINITY)
    }

    pub fn cylinder_axis(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(HardyError::InvalidParameter("cylinder needs n >= 1".into()));
        }
        Self::build(ModelKind::CylinderAxis { n }, n + 1, 1, PI)
    }

    pub fn hemisphere(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(HardyError::InvalidParameter(
                "hemisphere needs n >= 2".into(),
            ));
        }
        Self::build(ModelKind::Hemisphere { n }, n, n - 1, PI / 2.0)
    }

    pub fn torus_subtorus(m: usize, n: usize, eta: f64) -> Result<Self> {
        check_dims(m, n)?;
        let k = m - n;
        let limit = torus_eta_limit(k);
        if !(eta > 0.0 && eta <= limit * (1.0 + 1e-15)) {
            return Err(HardyError::InvalidParameter(format!(
                "torus tube radius eta={eta} must lie in (0, {limit}] for codimension {k}"
            )));
        }
        Self::build(ModelKind::TorusSubtorus { m, n, eta }, m, n, eta.min(limit))
    }

    /// Restrict a Euclidean model to the tube `r < radius`.
    pub fn with_radius(mut self, radius: f64) -> Result<Self> {
        match self.kind {
            ModelKind::EuclideanPoint { .. } | ModelKind::EuclideanSubspace { .. } => {}
            _ => {
                return Err(HardyError::InvalidParameter(
                    "only Euclidean models accept a custom radius".into(),
                ))
            }
        }
        if !(radius > 0.0) {
            return Err(HardyError::InvalidParameter("radius must be positive".into()));
        }
        self.r_max = radius;
        Ok(self)
    }

    pub fn with_transverse_mass(mut self, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(HardyError::InvalidParameter(
                "transverse_mass must be a positive real".into(),
            ));
        }
        self.transverse_mass = mass;
        Ok(self)
    }

    /// Codimension `k = m - n`.
    pub fn k(&self) -> usize {
        self.m - self.n
    }

    pub fn id(&self) -> String {
        match self.kind {
            ModelKind::EuclideanPoint { m } => format!("euclidean_point(m={m})"),
            ModelKind::EuclideanSubspace { m, n } => format!("euclidean_subspace(m={m},n={n})"),
            ModelKind::CylinderSection { n } => format!("cylinder_section(n={n})"),
            ModelKind::CylinderAxis { n } => format!("cylinder_axis(n={n})"),
            ModelKind::Hemisphere { n } => format!("hemisphere(n={n})"),
            ModelKind::TorusSubtorus { m, n, eta } => {
                format!("torus_subtorus(m={m},n={n},eta={eta})")
            }
        }
    }

    /// Every model here satisfies the curvature/convexity regime of the comparison estimates.
    pub fn condition_c(&self) -> bool {
        true
    }

    pub fn is_flat(&self) -> bool {
        match self.kind {
            ModelKind::EuclideanPoint { .. }
            | ModelKind::EuclideanSubspace { .. }
            | ModelKind::TorusSubtorus { .. } => true,
            ModelKind::CylinderSection { n } | ModelKind::CylinderAxis { n } => n == 1,
            ModelKind::Hemisphere { .. } => false,
        }
    }

    /// The normal exponential map has trivial Weingarten data (totally geodesic `N`).
    pub fn trivial_weingarten(&self) -> bool {
        true
    }

    fn check_radius(&self, t: f64) -> Result<()> {
        if t > 0.0 && t < self.r_max {
            Ok(())
        } else {
            Err(HardyError::Domain(format!(
                "radius t={t} outside (0, {}) for {}",
                self.r_max,
                self.id()
            )))
        }
    }

    /// True where the density has been floored near a focal point.
    pub fn near_focal(&self, t: f64) -> bool {
        self.raw_density(t) < DENSITY_FLOOR
    }

    fn raw_density(&self, t: f64) -> f64 {
        let k = self.k() as f64;
        t.powf(k - 1.0) * self.ln_density_ratio(t).exp()
    }

    /// Fermi density `det A(t)`.
    pub fn density(&self, t: f64) -> Result<f64> {
        self.check_radius(t)?;
        Ok(self.raw_density(t).max(DENSITY_FLOOR))
    }

    /// `ln(density(t) / t^(k-1))`; tends to 0 as `t -> 0` and is 0 at `t = 0`.
    pub fn ln_density_ratio(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self.kind {
            ModelKind::EuclideanPoint { .. }
            | ModelKind::EuclideanSubspace { .. }
            | ModelKind::CylinderSection { .. } => 0.0,
            ModelKind::CylinderAxis { n } => {
                if n == 1 {
                    return 0.0;
                }
                let c = (n - 1) as f64;
                if t < 1e-4 {
                    c * (-t * t / 6.0 - t.powi(4) / 180.0)
                } else {
                    c * (t.sin().max(DENSITY_FLOOR) / t).ln()
                }
            }
            ModelKind::Hemisphere { n } => {
                let c = (n - 1) as f64;
                c * t.cos().max(DENSITY_FLOOR).ln()
            }
            ModelKind::TorusSubtorus { .. } => torus_fraction(self.k(), t).max(DENSITY_FLOOR).ln(),
        }
    }

    /// `t * d/dt ln_density_ratio(t) = t Δr - (k - 1)`.
    pub fn ratio_log_slope(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self.kind {
            ModelKind::EuclideanPoint { .. }
            | ModelKind::EuclideanSubspace { .. }
            | ModelKind::CylinderSection { .. } => 0.0,
            ModelKind::CylinderAxis { n } => {
                let c = (n - 1) as f64;
                if t < 1e-4 {
                    c * (-t * t / 3.0 - t.powi(4) / 45.0)
                } else {
                    c * (t / t.tan() - 1.0)
                }
            }
            ModelKind::Hemisphere { n } => -((n - 1) as f64) * t * t.tan(),
            ModelKind::TorusSubtorus { .. } => t * torus_fraction_log_derivative(self.k(), t),
        }
    }

    /// `Δr` at radius `t`; equals the logarithmic derivative of the density.
    pub fn laplacian_r(&self, t: f64) -> Result<f64> {
        self.check_radius(t)?;
        let k = self.k() as f64;
        Ok(match self.kind {
            ModelKind::EuclideanPoint { .. }
            | ModelKind::EuclideanSubspace { .. }
            | ModelKind::CylinderSection { .. } => (k - 1.0) / t,
            ModelKind::CylinderAxis { n } => (n - 1) as f64 / t.tan(),
            ModelKind::Hemisphere { n } => -((n - 1) as f64) * t.tan(),
            ModelKind::TorusSubtorus { .. } => {
                (k - 1.0) / t + torus_fraction_log_derivative(self.k(), t)
            }
        })
    }

    /// Comparison bound for `Δr`: `(k-1)/t` around minimal `N`, `0` on a mean-convex boundary.
    pub fn laplacian_bound(&self, t: f64) -> f64 {
        match self.kind {
            ModelKind::Hemisphere { .. } => 0.0,
            _ => (self.k() as f64 - 1.0) / t,
        }
    }
}

/// Fraction of the sphere of radius `t` in `R^k` lying inside the cube `[-π, π]^k`.
fn torus_fraction(k: usize, t: f64) -> f64 {
    if t <= PI {
        return 1.0;
    }
    match k {
        2 => (2.0 * PI - 8.0 * (PI / t).acos()) / (2.0 * PI),
        3 => 3.0 * PI / t - 2.0,
        _ => 1.0,
    }
}

fn torus_fraction_log_derivative(k: usize, t: f64) -> f64 {
    if t <= PI {
        return 0.0;
    }
    match k {
        2 => {
            let arc = 2.0 * PI - 8.0 * (PI / t).acos();
            -8.0 * PI / (t * (t * t - PI * PI).sqrt() * arc)
        }
        3 => -3.0 * PI / (t * (3.0 * PI - 2.0 * t)),
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn all_models() -> Vec<ModelSpace> {
        vec![
            ModelSpace::euclidean_point(3).unwrap(),
            ModelSpace::euclidean_subspace(4, 1).unwrap(),
            ModelSpace::cylinder_section(2).unwrap(),
            ModelSpace::cylinder_axis(1).unwrap(),
            ModelSpace::cylinder_axis(3).unwrap(),
            ModelSpace::hemisphere(2).unwrap(),
            ModelSpace::hemisphere(4).unwrap(),
            ModelSpace::torus_subtorus(2, 1, PI).unwrap(),
            ModelSpace::torus_subtorus(3, 1, 4.0).unwrap(),
            ModelSpace::torus_subtorus(4, 1, 4.2).unwrap(),
        ]
    }

    #[test]
    fn density_examples() {
        let torus = ModelSpace::torus_subtorus(2, 1, 1.0).unwrap();
        assert_eq!(torus.density(0.5).unwrap(), 1.0);
        let axis = ModelSpace::cylinder_axis(1).unwrap();
        assert_eq!(axis.density(0.3).unwrap(), 1.0);
        let hemi = ModelSpace::hemisphere(2).unwrap();
        assert_relative_eq!(hemi.density(PI / 3.0).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn laplacian_examples() {
        let cyl = ModelSpace::cylinder_section(2).unwrap();
        assert_eq!(cyl.laplacian_r(1.0).unwrap(), 0.0);
        let hemi = ModelSpace::hemisphere(2).unwrap();
        assert_relative_eq!(hemi.laplacian_r(PI / 4.0).unwrap(), -1.0, epsilon = 1e-14);
        let torus = ModelSpace::torus_subtorus(3, 1, 1.0).unwrap();
        assert_relative_eq!(torus.laplacian_r(0.25).unwrap(), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn s_k_examples() {
        assert_eq!(s_k(0.0, 2.5), (2.5, 1.0));
        let (s, c) = s_k(1.0, PI / 2.0);
        assert_relative_eq!(s, 1.0, epsilon = 1e-15);
        assert!(c.abs() < 1e-15);
        // Taylor oracle for sinh/cosh at 1.
        let (mut sh, mut ch, mut term) = (0.0, 0.0, 1.0);
        for j in 0..30 {
            if j % 2 == 0 {
                ch += term;
            } else {
                sh += term;
            }
            term /= (j + 1) as f64;
        }
        let (s, c) = s_k(-1.0, 1.0);
        assert_relative_eq!(s, sh, epsilon = 1e-12);
        assert_relative_eq!(c, ch, epsilon = 1e-12);
        assert_relative_eq!(s, 1.1752011936438014, epsilon = 1e-12);
        assert_relative_eq!(c, 1.5430806348152437, epsilon = 1e-12);
    }

    #[test]
    fn hemisphere_log_derivative_matches_finite_difference() {
        let hemi = ModelSpace::hemisphere(2).unwrap();
        let t = PI / 3.0;
        let h = 1e-5;
        let fd = (hemi.density(t + h).unwrap().ln() - hemi.density(t - h).unwrap().ln()) / (2.0 * h);
        assert_relative_eq!(fd, -t.tan(), epsilon = 1e-8);
    }

    #[test]
    fn log_density_derivative_is_laplacian() {
        for model in all_models() {
            let r_max = if model.r_max.is_finite() { model.r_max } else { 5.0 };
            for i in 1..40 {
                let t = r_max * i as f64 / 40.0;
                if (t - PI).abs() < 1e-3 || (t - r_max).abs() < 1e-3 {
                    continue;
                }
                let h = 1e-5 * t.max(0.1);
                let fd = (model.density(t + h).unwrap().ln() - model.density(t - h).unwrap().ln())
                    / (2.0 * h);
                let lap = model.laplacian_r(t).unwrap();
                assert!(
                    (fd - lap).abs() < 1e-6 * (1.0 + lap.abs()),
                    "{} t={t}: fd={fd} lap={lap}",
                    model.id()
                );
                let slope = model.ratio_log_slope(t);
                let k = model.k() as f64;
                assert!((slope - (t * lap - (k - 1.0))).abs() < 1e-9 * (1.0 + lap.abs() * t));
            }
        }
    }

    #[test]
    fn density_normalised_near_zero() {
        for model in all_models() {
            let t: f64 = 1e-4;
            let ratio = model.density(t).unwrap() / t.powi(model.k() as i32 - 1);
            assert!((ratio - 1.0).abs() < 1e-6, "{}", model.id());
        }
    }

    #[test]
    fn laplacian_comparison_bounds() {
        for model in all_models() {
            let r_max = if model.r_max.is_finite() { model.r_max } else { 10.0 };
            for i in 1..1000 {
                let t = r_max * i as f64 / 1000.0;
                let lap = model.laplacian_r(t).unwrap();
                assert!(lap <= model.laplacian_bound(t) + 1e-12, "{} t={t}", model.id());
            }
        }
    }

    #[test]
    fn domain_errors_and_floor() {
        let axis = ModelSpace::cylinder_axis(3).unwrap();
        assert!(axis.density(0.0).is_err());
        assert!(axis.density(PI).is_err());
        assert!(axis.laplacian_r(-1.0).is_err());
        let hemi = ModelSpace::hemisphere(200).unwrap();
        let t = PI / 2.0 - 1e-10;
        let d = hemi.density(t).unwrap();
        assert_eq!(d, DENSITY_FLOOR);
        assert!(hemi.near_focal(t));
        assert!(!axis.near_focal(1.0));
        assert!(ModelSpace::torus_subtorus(2, 1, 4.0).is_err());
        assert!(ModelSpace::euclidean_point(1).is_err());
        assert!(ModelSpace::euclidean_subspace(3, 3).is_err());
    }

    #[test]
    fn torus_wrap_density_is_continuous() {
        for (m, n) in [(3, 1), (4, 1)] {
            let model = ModelSpace::torus_subtorus(m, n, 4.2).unwrap();
            let below = model.density(PI - 1e-9).unwrap();
            let above = model.density(PI + 1e-9).unwrap();
            assert!((below - above).abs() < 1e-3 * below);
        }
    }
}
