//! Small least-squares fits used by the sweeps.

use nalgebra::{DMatrix, DVector};

use crate::error::{HardyError, Result};

/// Coefficients `c_0..c_deg` of the least-squares polynomial `Σ c_j x^j`.
pub fn poly_fit(xs: &[f64], ys: &[f64], degree: usize) -> Result<Vec<f64>> {
    if xs.len() != ys.len() || xs.len() < degree + 1 {
        return Err(HardyError::InvalidParameter(format!(
            "polynomial fit of degree {degree} needs at least {} points",
            degree + 1
        )));
    }
    let a = DMatrix::from_fn(xs.len(), degree + 1, |i, j| xs[i].powi(j as i32));
    let b = DVector::from_column_slice(ys);
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| HardyError::NonConvergence(format!("least squares failed: {e}")))?;
    Ok(sol.iter().copied().collect())
}

/// `(intercept, slope)` of the least-squares line.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let c = poly_fit(xs, ys, 1)?;
    Ok((c[0], c[1]))
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(HardyError::InvalidParameter("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    Ok(linear_fit(&lx, &ly)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_polynomials() {
        let xs = [0.0, 0.5, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 2.0 * x + 0.5 * x * x).collect();
        let c = poly_fit(&xs, &ys, 2).unwrap();
        assert_relative_eq!(c[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(c[1], -2.0, epsilon = 1e-12);
        assert_relative_eq!(c[2], 0.5, epsilon = 1e-12);
        let s = log_log_slope(&[1.0, 2.0, 4.0], &[3.0, 12.0, 48.0]).unwrap();
        assert_relative_eq!(s, 2.0, epsilon = 1e-12);
        assert!(poly_fit(&[1.0], &[1.0], 1).is_err());
    }
}
