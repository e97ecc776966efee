use std::f64::consts::{PI, SQRT_2};
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use rand_distr::StandardNormal;

use super::grid::{QuadratureGrid, Ring};
use super::harmonics::{legendre_table, sin_dtheta, tri_index};
use super::{cross, dot, NormalizationConvention, SpherePoint};
use crate::error::{Error, Result};
use crate::par;

/// A band-limited real function on the sphere, stored as coefficients over
/// real spherical harmonics orthonormal for the normalized area measure `σ`.
///
/// Coefficient `(l, m)` lives at index `l² + l + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereFunction {
    band: usize,
    coeffs: Vec<f64>,
}

impl SphereFunction {
    #[inline]
    fn index(l: usize, m: i64) -> usize {
        debug_assert!(m.unsigned_abs() as usize <= l);
        ((l * l + l) as i64 + m) as usize
    }

    pub fn zero(band: usize) -> Self {
        Self {
            band,
            coeffs: vec![0.0; (band + 1) * (band + 1)],
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            band: 0,
            coeffs: vec![c],
        }
    }

    /// Coefficients in `(l, m)` order, `(band + 1)²` of them.
    pub fn from_coeffs(band: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != (band + 1) * (band + 1) {
            return Err(Error::DimensionMismatch {
                left: coeffs.len(),
                right: (band + 1) * (band + 1),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        Ok(Self { band, coeffs })
    }

    /// A single real harmonic `Y_{l,m}`.
    pub fn harmonic(l: usize, m: i64) -> Self {
        assert!(m.unsigned_abs() as usize <= l, "|m| must not exceed l");
        let mut f = Self::zero(l);
        f.coeffs[Self::index(l, m)] = 1.0;
        f
    }

    /// Ambient coordinate function `x`, `y` or `z` (axis 0, 1, 2).
    pub fn coordinate(axis: usize) -> Self {
        let s = 1.0 / 3f64.sqrt();
        match axis {
            0 => Self::harmonic(1, 1) * s,
            1 => Self::harmonic(1, -1) * s,
            2 => Self::harmonic(1, 0) * s,
            _ => panic!("axis {axis} out of range"),
        }
    }

    pub fn x() -> Self {
        Self::coordinate(0)
    }

    pub fn y() -> Self {
        Self::coordinate(1)
    }

    pub fn z() -> Self {
        Self::coordinate(2)
    }

    /// Legendre polynomial `P_n(z)`; its only component sits at `(n, 0)`.
    pub fn legendre(n: usize) -> Self {
        Self::harmonic(n, 0) * (1.0 / ((2 * n + 1) as f64).sqrt())
    }

    /// Random band-limited function with unit `L²(σ)` norm.
    pub fn random<R: Rng + ?Sized>(band: usize, rng: &mut R) -> Self {
        let mut coeffs: Vec<f64> = (0..(band + 1) * (band + 1))
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let n = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        coeffs.iter_mut().for_each(|c| *c /= n);
        Self { band, coeffs }
    }

    /// Projects a pointwise-defined function onto band `band` with an exact grid.
    pub fn from_fn<F>(band: usize, f: F) -> Self
    where
        F: Fn(&SpherePoint) -> f64 + Sync + Send,
    {
        let grid = QuadratureGrid::build(2 * band);
        let samples = par::map_range(grid.len(), |i| f(&grid.node(i)));
        Self::project(&samples, &grid, band).expect("grid built for this band")
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, l: usize, m: i64) -> f64 {
        if l > self.band {
            0.0
        } else {
            self.coeffs[Self::index(l, m)]
        }
    }

    pub fn set_coeff(&mut self, l: usize, m: i64, value: f64) {
        assert!(l <= self.band, "degree {l} above band {}", self.band);
        self.coeffs[Self::index(l, m)] = value;
    }

    /// Lowest band that holds every nonzero coefficient.
    pub fn effective_band(&self, tol: f64) -> usize {
        (0..=self.band)
            .rev()
            .find(|&l| (-(l as i64)..=l as i64).any(|m| self.coeffs[Self::index(l, m)].abs() > tol))
            .unwrap_or(0)
    }

    /// Explicit truncation (or zero padding) to a new band.
    pub fn truncate(&self, band: usize) -> Self {
        let mut out = Self::zero(band);
        let n = (band.min(self.band) + 1).pow(2);
        out.coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        out
    }

    /// Restricts to the degree-`l` component.
    pub fn component(&self, l: usize) -> Self {
        let mut out = Self::zero(l);
        if l <= self.band {
            for m in -(l as i64)..=l as i64 {
                out.coeffs[Self::index(l, m)] = self.coeffs[Self::index(l, m)];
            }
        }
        out
    }

    /// `∫ f dσ`.
    pub fn mean(&self) -> f64 {
        self.coeffs[0]
    }

    /// `∫ f² dσ` by Parseval.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Applies `c_l ↦ m(l) c_l` on each degree.
    pub fn map_degrees<F: Fn(usize) -> f64>(&self, multiplier: F) -> Self {
        let mut out = self.clone();
        for l in 0..=self.band {
            let s = multiplier(l);
            for m in -(l as i64)..=l as i64 {
                out.coeffs[Self::index(l, m)] *= s;
            }
        }
        out
    }

    /// Real and imaginary parts of the trigonometric series of `f` on the
    /// latitude circle described by `table`: `f = a₀ + Σ aₘ cos mφ + bₘ sin mφ`.
    pub(crate) fn ring_series(&self, table: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut a = vec![0.0; self.band + 1];
        let mut b = vec![0.0; self.band + 1];
        for l in 0..=self.band {
            a[0] += self.coeffs[Self::index(l, 0)] * table[tri_index(l, 0)];
            for m in 1..=l {
                let n = SQRT_2 * table[tri_index(l, m)];
                a[m] += n * self.coeffs[Self::index(l, m as i64)];
                b[m] += n * self.coeffs[Self::index(l, -(m as i64))];
            }
        }
        (a, b)
    }

    pub fn evaluate(&self, p: &SpherePoint) -> f64 {
        let table = legendre_table(p.theta.cos(), p.theta.sin(), self.band);
        let (a, b) = self.ring_series(&table);
        synthesize(&a, &b, p.phi)
    }

    /// Values at every node of `grid`, ring-major.
    pub fn evaluate_on(&self, grid: &QuadratureGrid) -> Vec<f64> {
        let n_phi = grid.n_phi();
        let rows = par::map_slice(grid.rings(), |ring| {
            let table = legendre_table(ring.cos_theta, ring.sin_theta, self.band);
            let (a, b) = self.ring_series(&table);
            (0..n_phi).map(|j| synthesize(&a, &b, grid.phi(j))).collect::<Vec<_>>()
        });
        rows.concat()
    }

    /// Coefficients `⟨samples, Y_{l,m}⟩_σ` for `l <= band`.
    pub fn project(samples: &[f64], grid: &QuadratureGrid, band: usize) -> Result<Self> {
        if grid.exact_degree() < 2 * band {
            return Err(Error::GridTooCoarse {
                have: grid.exact_degree(),
                need: 2 * band,
            });
        }
        if samples.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                left: samples.len(),
                right: grid.len(),
            });
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter("non-finite sample".into()));
        }
        let n_phi = grid.n_phi();
        let series: Vec<(Vec<f64>, Vec<f64>)> = par::map_range(grid.rings().len(), |r| {
            let row = &samples[r * n_phi..(r + 1) * n_phi];
            ring_dft(row, band, |j| grid.phi(j))
        });
        let (cos, sin): (Vec<_>, Vec<_>) = series.into_iter().unzip();
        Ok(project_ring_series(grid.rings(), None, &cos, &sin, band))
    }

    /// Pointwise product. The band grows to `L_f + L_g`.
    pub fn multiply(&self, other: &SphereFunction) -> SphereFunction {
        let band = self.band + other.band;
        let grid = QuadratureGrid::build(2 * band);
        let a = self.evaluate_on(&grid);
        let b = other.evaluate_on(&grid);
        let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Self::project(&prod, &grid, band).expect("grid built for this band")
    }

    /// Positive Laplace-Beltrami operator of the working metric.
    pub fn laplacian(&self) -> SphereFunction {
        self.map_degrees(NormalizationConvention::laplace_eigenvalue)
    }

    /// `e^{-sΔ} f`.
    pub fn heat_flow(&self, s: f64) -> Result<SphereFunction> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!("heat time {s} must be >= 0")));
        }
        Ok(self.map_degrees(|l| (-NormalizationConvention::laplace_eigenvalue(l) * s).exp()))
    }

    /// Gradient pairing `(∇f, ∇g)` of the working metric, through
    /// `½(fΔg + gΔf − Δ(fg))`.
    pub fn grad_pairing(&self, other: &SphereFunction) -> SphereFunction {
        let a = self.multiply(&other.laplacian());
        let b = other.multiply(&self.laplacian());
        let c = self.multiply(other).laplacian();
        (&(&a + &b) - &c) * 0.5
    }

    /// Poisson bracket for `ω = ½ dA`: `{f, g} = 2 p·(∇f × ∇g)` with round gradients.
    pub fn poisson_bracket(&self, other: &SphereFunction) -> SphereFunction {
        let band = (self.band + other.band).saturating_sub(1);
        let grid = QuadratureGrid::build(2 * (self.band + other.band));
        let df = self.derivatives_on(&grid);
        let dg = other.derivatives_on(&grid);
        let samples: Vec<f64> = df
            .iter()
            .zip(&dg)
            .map(|(f, g)| 2.0 * (f.1 * g.2 - f.2 * g.1))
            .collect();
        Self::project(&samples, &grid, band).expect("grid built for this band")
    }

    /// Value, `∂_θ f` and `(1/sin θ) ∂_φ f` at a point off the poles.
    pub fn derivatives_at(&self, p: &SpherePoint) -> (f64, f64, f64) {
        let (s, c) = nudged_sin_cos(p.theta);
        let table = legendre_table(c, s, self.band);
        self.derivatives_from_table(&table, c, s, p.phi)
    }

    fn derivatives_from_table(&self, table: &[f64], x: f64, s: f64, phi: f64) -> (f64, f64, f64) {
        let (mut v, mut dt, mut dp) = (0.0, 0.0, 0.0);
        for l in 0..=self.band {
            let c0 = self.coeffs[Self::index(l, 0)];
            v += c0 * table[tri_index(l, 0)];
            dt += c0 * sin_dtheta(table, x, l, 0) / s;
            for m in 1..=l {
                let (sm, cm) = (m as f64 * phi).sin_cos();
                let a = self.coeffs[Self::index(l, m as i64)];
                let b = self.coeffs[Self::index(l, -(m as i64))];
                let n = SQRT_2 * table[tri_index(l, m)];
                let dn = SQRT_2 * sin_dtheta(table, x, l, m) / s;
                v += n * (a * cm + b * sm);
                dt += dn * (a * cm + b * sm);
                dp += n / s * m as f64 * (b * cm - a * sm);
            }
        }
        (v, dt, dp)
    }

    /// `(f, ∂_θ f, (1/sin θ) ∂_φ f)` at every node of `grid`.
    pub fn derivatives_on(&self, grid: &QuadratureGrid) -> Vec<(f64, f64, f64)> {
        let n_phi = grid.n_phi();
        let rows = par::map_slice(grid.rings(), |ring: &Ring| {
            let table = legendre_table(ring.cos_theta, ring.sin_theta, self.band);
            (0..n_phi)
                .map(|j| self.derivatives_from_table(&table, ring.cos_theta, ring.sin_theta, grid.phi(j)))
                .collect::<Vec<_>>()
        });
        rows.concat()
    }

    /// Round-metric gradient as an ambient tangent vector.
    pub fn round_gradient_at(&self, p: &SpherePoint) -> [f64; 3] {
        let (_, dt, dp) = self.derivatives_at(p);
        let (et, ep) = p.frame();
        [
            dt * et[0] + dp * ep[0],
            dt * et[1] + dp * ep[1],
            dt * et[2] + dp * ep[2],
        ]
    }

    /// Derivative along the rotation field `p ↦ axis × p`.
    pub fn rotation_derivative(&self, axis: [f64; 3]) -> SphereFunction {
        let grid = QuadratureGrid::build(2 * self.band);
        let nodes = grid.nodes();
        let d = self.derivatives_on(&grid);
        let samples: Vec<f64> = nodes
            .iter()
            .zip(&d)
            .map(|(p, &(_, dt, dp))| {
                let v = cross(axis, p.to_cartesian());
                let (et, ep) = p.frame();
                dt * dot(v, et) + dp * dot(v, ep)
            })
            .collect();
        Self::project(&samples, &grid, self.band).expect("grid built for this band")
    }

    /// `f ∘ R⁻¹` for a rotation matrix `R` (rows are images of the basis covectors).
    pub fn rotate(&self, rotation: &[[f64; 3]; 3]) -> SphereFunction {
        let inv = transpose(rotation);
        Self::from_fn(self.band, |p| {
            let q = mat_vec(&inv, p.to_cartesian());
            self.evaluate(&SpherePoint::from_cartesian(q))
        })
    }

    /// Minimum and maximum over the sphere: dense sampling with the poles,
    /// then local pattern-search refinement of the best candidates.
    pub fn extrema(&self) -> (f64, f64) {
        let grid = QuadratureGrid::build((4 * self.band).max(24));
        let mut points = grid.nodes();
        points.push(SpherePoint::north());
        points.push(SpherePoint::south());
        let mut values = self.evaluate_on(&grid);
        values.push(self.evaluate(&SpherePoint::north()));
        values.push(self.evaluate(&SpherePoint::south()));
        let refine = |sign: f64| -> f64 {
            let mut order: Vec<usize> = (0..points.len()).collect();
            order.sort_by(|&a, &b| (sign * values[b]).total_cmp(&(sign * values[a])));
            let step0 = PI / grid.rings().len() as f64;
            order
                .iter()
                .take(6)
                .map(|&i| sign * self.pattern_search(points[i], sign, step0))
                .fold(f64::NEG_INFINITY, f64::max)
                * sign
        };
        (refine(-1.0), refine(1.0))
    }

    fn pattern_search(&self, start: SpherePoint, sign: f64, step0: f64) -> f64 {
        let mut p = start;
        let mut best = sign * self.evaluate(&p);
        let mut h = step0;
        // flat directions (zonal ridges) would otherwise drift on roundoff gains
        let mut budget = 2000;
        while h > 1e-10 && budget > 0 {
            budget -= 1;
            let mut improved = false;
            for d in 0..8 {
                let a = d as f64 * PI / 4.0;
                let q = p.exp_round(h * a.cos(), h * a.sin());
                let v = sign * self.evaluate(&q);
                if v > best + 1e-14 * (1.0 + best.abs()) {
                    best = v;
                    p = q;
                    improved = true;
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        best
    }

    /// `max |f|`.
    pub fn sup_norm(&self) -> f64 {
        let (lo, hi) = self.extrema();
        lo.abs().max(hi.abs())
    }

    /// `max |f − g|` over the nodes of `grid`.
    pub fn max_abs_diff_on(&self, other: &SphereFunction, grid: &QuadratureGrid) -> f64 {
        let a = self.evaluate_on(grid);
        let b = other.evaluate_on(grid);
        a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn combine(&self, other: &SphereFunction, sign: f64) -> SphereFunction {
        let band = self.band.max(other.band);
        let mut out = self.truncate(band);
        for (i, c) in other.coeffs.iter().enumerate() {
            out.coeffs[i] += sign * c;
        }
        out
    }
}

impl Default for SphereFunction {
    fn default() -> Self {
        Self::zero(0)
    }
}

impl Add for &SphereFunction {
    type Output = SphereFunction;
    fn add(self, rhs: &SphereFunction) -> SphereFunction {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &SphereFunction {
    type Output = SphereFunction;
    fn sub(self, rhs: &SphereFunction) -> SphereFunction {
        self.combine(rhs, -1.0)
    }
}

impl Add for SphereFunction {
    type Output = SphereFunction;
    fn add(self, rhs: SphereFunction) -> SphereFunction {
        self.combine(&rhs, 1.0)
    }
}

impl Sub for SphereFunction {
    type Output = SphereFunction;
    fn sub(self, rhs: SphereFunction) -> SphereFunction {
        self.combine(&rhs, -1.0)
    }
}

impl Mul<f64> for SphereFunction {
    type Output = SphereFunction;
    fn mul(mut self, rhs: f64) -> SphereFunction {
        self.coeffs.iter_mut().for_each(|c| *c *= rhs);
        self
    }
}

impl Mul<f64> for &SphereFunction {
    type Output = SphereFunction;
    fn mul(self, rhs: f64) -> SphereFunction {
        self.clone() * rhs
    }
}

impl Neg for SphereFunction {
    type Output = SphereFunction;
    fn neg(self) -> SphereFunction {
        self * -1.0
    }
}

/// A complex-valued function stored as two real parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexFunction {
    pub re: SphereFunction,
    pub im: SphereFunction,
}

impl ComplexFunction {
    pub fn new(re: SphereFunction, im: SphereFunction) -> Self {
        Self { re, im }
    }

    pub fn real(re: SphereFunction) -> Self {
        Self {
            re,
            im: SphereFunction::zero(0),
        }
    }

    pub fn band(&self) -> usize {
        self.re.band().max(self.im.band())
    }

    pub fn evaluate(&self, p: &SpherePoint) -> (f64, f64) {
        (self.re.evaluate(p), self.im.evaluate(p))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(&self.re * s, &self.im * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(&self.re + &other.re, &self.im + &other.im)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(&self.re - &other.re, &self.im - &other.im)
    }

    /// Product with a real function.
    pub fn times_real(&self, f: &SphereFunction) -> Self {
        Self::new(self.re.multiply(f), self.im.multiply(f))
    }
}

#[inline]
fn synthesize(a: &[f64], b: &[f64], phi: f64) -> f64 {
    let mut v = a[0];
    for m in 1..a.len() {
        let (s, c) = (m as f64 * phi).sin_cos();
        v += a[m] * c + b[m] * s;
    }
    v
}

/// Trigonometric coefficients of equispaced ring samples up to order `band`.
pub(crate) fn ring_dft<F: Fn(usize) -> f64>(row: &[f64], band: usize, phi: F) -> (Vec<f64>, Vec<f64>) {
    let n = row.len() as f64;
    let mut a = vec![0.0; band + 1];
    let mut b = vec![0.0; band + 1];
    for (j, &v) in row.iter().enumerate() {
        let ph = phi(j);
        a[0] += v;
        for m in 1..=band {
            let (s, c) = (m as f64 * ph).sin_cos();
            a[m] += v * c;
            b[m] += v * s;
        }
    }
    a[0] /= n;
    for m in 1..=band {
        a[m] *= 2.0 / n;
        b[m] *= 2.0 / n;
    }
    (a, b)
}

/// Projects per-ring trigonometric series `a₀ + Σ aₘ cos mφ + bₘ sin mφ`
/// onto spherical harmonics of degree `<= band` with the rings' Gauss weights.
/// `tables`, when given, must hold per-ring Legendre tables of band `>= band`.
pub(crate) fn project_ring_series(
    rings: &[Ring],
    tables: Option<&[Vec<f64>]>,
    cos: &[Vec<f64>],
    sin: &[Vec<f64>],
    band: usize,
) -> SphereFunction {
    let partials = par::map_range(rings.len(), |r| {
        let ring = &rings[r];
        let owned;
        let table: &[f64] = match tables {
            Some(t) => &t[r],
            None => {
                owned = legendre_table(ring.cos_theta, ring.sin_theta, band);
                &owned
            }
        };
        let mut out = vec![0.0; (band + 1) * (band + 1)];
        let (a, b) = (&cos[r], &sin[r]);
        for l in 0..=band {
            out[SphereFunction::index(l, 0)] = ring.weight * table[tri_index(l, 0)] * a.first().copied().unwrap_or(0.0);
            for m in 1..=l.min(a.len().saturating_sub(1)) {
                let w = ring.weight * table[tri_index(l, m)] / SQRT_2;
                out[SphereFunction::index(l, m as i64)] = w * a[m];
                out[SphereFunction::index(l, -(m as i64))] = w * b[m];
            }
        }
        out
    });
    let mut coeffs = vec![0.0; (band + 1) * (band + 1)];
    for p in partials {
        for (c, v) in coeffs.iter_mut().zip(p) {
            *c += v;
        }
    }
    SphereFunction { band, coeffs }
}

fn nudged_sin_cos(theta: f64) -> (f64, f64) {
    // Derivatives in the (θ, φ) chart are singular at the poles; the
    // gradient itself is not, so evaluate an ulp-scale distance away.
    let t = theta.clamp(1e-9, PI - 1e-9);
    t.sin_cos()
}

pub(crate) fn transpose(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = m[j][i];
        }
    }
    t
}

pub(crate) fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}
