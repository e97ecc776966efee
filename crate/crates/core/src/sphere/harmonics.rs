//! Normalized associated Legendre functions.
//!
//! `Nbar(l, m, x) = sqrt((2l+1) (l-m)!/(l+m)!) P_l^m(x)` without the
//! Condon-Shortley phase, so that `∫ Nbar(l,m,x)^2 dx/2 = 1`. Real spherical
//! harmonics orthonormal for the normalized area measure are
//! `Y_{l0} = Nbar(l,0)`, `Y_{lm} = √2 Nbar(l,m) cos(mφ)` and
//! `Y_{l,-m} = √2 Nbar(l,m) sin(mφ)` for `m > 0`.

/// Index of `(l, m)` with `0 <= m <= l` in a triangular table.
#[inline]
pub fn tri_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Number of entries of a triangular table up to band `band`.
#[inline]
pub fn tri_len(band: usize) -> usize {
    (band + 1) * (band + 2) / 2
}

/// Fills a triangular table of `Nbar(l, m, cos θ)` for `l <= band`.
///
/// `sin_theta` is passed separately so that callers holding `θ` avoid the
/// cancellation in `sqrt(1 - x^2)` near the poles.
pub fn legendre_table(x: f64, sin_theta: f64, band: usize) -> Vec<f64> {
    let mut out = vec![0.0; tri_len(band)];
    out[0] = 1.0;
    let mut diag = 1.0;
    for m in 0..=band {
        if m > 0 {
            diag *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * sin_theta;
            out[tri_index(m, m)] = diag;
        }
        if m + 1 > band {
            break;
        }
        out[tri_index(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * x * diag;
        for l in (m + 2)..=band {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            out[tri_index(l, m)] = a * (x * out[tri_index(l - 1, m)] - b * out[tri_index(l - 2, m)]);
        }
    }
    out
}

/// `sin θ · d/dθ Nbar(l, m, cos θ)` from a table produced by [`legendre_table`].
#[inline]
pub fn sin_dtheta(table: &[f64], x: f64, l: usize, m: usize) -> f64 {
    let lf = l as f64;
    let own = lf * x * table[tri_index(l, m)];
    if l == m {
        return own;
    }
    let mf = m as f64;
    let c = ((2.0 * lf + 1.0) * (lf * lf - mf * mf) / (2.0 * lf - 1.0)).sqrt();
    own - c * table[tri_index(l - 1, m)]
}

/// Legendre polynomial `P_n(x)` by the three-term recurrence.
pub fn legendre_p(n: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return p0;
    }
    for j in 1..n {
        let jf = j as f64;
        let p2 = ((2.0 * jf + 1.0) * x * p1 - jf * p0) / (jf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_order_closed_forms() {
        let theta: f64 = 0.7;
        let (x, s) = (theta.cos(), theta.sin());
        let t = legendre_table(x, s, 3);
        assert!((t[tri_index(0, 0)] - 1.0).abs() < 1e-15);
        assert!((t[tri_index(1, 0)] - 3f64.sqrt() * x).abs() < 1e-15);
        assert!((t[tri_index(1, 1)] - (1.5f64).sqrt() * s).abs() < 1e-15);
        let p2 = 0.5 * (3.0 * x * x - 1.0);
        assert!((t[tri_index(2, 0)] - 5f64.sqrt() * p2).abs() < 1e-14);
        // P_2^2 = 3 sin^2, normalization sqrt(5 * 0!/4!)
        assert!((t[tri_index(2, 2)] - (5.0f64 / 24.0).sqrt() * 3.0 * s * s).abs() < 1e-14);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let band = 12;
        let theta: f64 = 1.1;
        let h = 1e-6;
        let t0 = legendre_table(theta.cos(), theta.sin(), band);
        let tp = legendre_table((theta + h).cos(), (theta + h).sin(), band);
        let tm = legendre_table((theta - h).cos(), (theta - h).sin(), band);
        for l in 0..=band {
            for m in 0..=l {
                let fd = (tp[tri_index(l, m)] - tm[tri_index(l, m)]) / (2.0 * h);
                let an = sin_dtheta(&t0, theta.cos(), l, m) / theta.sin();
                assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "l={l} m={m}");
            }
        }
    }

    #[test]
    fn recurrence_p2_at_zero() {
        assert!((legendre_p(2, 0.0) + 0.5).abs() < 1e-15);
        assert!((legendre_p(40, 1.0) - 1.0).abs() < 1e-13);
    }
}
