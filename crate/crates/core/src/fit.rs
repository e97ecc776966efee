//! Small least-squares helpers for convergence orders.

use crate::error::{Error, Result};

/// Ordinary least-squares line `y ≈ a + b x`; returns `(a, b)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientLevels {
            need: 2,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}

/// Order `p` in `ℏ = 1/k` of residuals behaving like `C k^{-p}`.
///
/// When every residual sits below `floor` the identity holds to roundoff
/// and the order is reported as `+∞`.
pub fn order_in_hbar(ks: &[usize], residuals: &[f64], floor: f64) -> Result<f64> {
    if residuals.iter().all(|r| r.abs() <= floor) {
        return Ok(f64::INFINITY);
    }
    if residuals.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::DegenerateFit(
            "residuals must be positive to fit an order".into(),
        ));
    }
    let xs: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    let (_, slope) = linear_fit(&xs, &ys)?;
    Ok(-slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let ks = [8, 16, 32, 64];
        let r: Vec<f64> = ks.iter().map(|&k| 3.0 / (k as f64).powi(2)).collect();
        assert!((order_in_hbar(&ks, &r, 0.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn roundoff_is_exact() {
        assert_eq!(order_in_hbar(&[2, 4], &[1e-16, 0.0], 1e-13).unwrap(), f64::INFINITY);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(linear_fit(&[1.0], &[2.0]).is_err());
        assert!(linear_fit(&[1.0, 1.0], &[2.0, 3.0]).is_err());
        assert!(order_in_hbar(&[2, 4], &[1.0, -1.0], 0.0).is_err());
    }
}
