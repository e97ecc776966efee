//! The first-order deviation from multiplicativity and the metric it defines.
//!
//! For a quantizer `Q` at level `k`, `k(Q(f)Q(g) − Q(fg))` dequantizes to a
//! complex function whose real (Jordan) part is the unsharpness cocycle
//! `c₊(f, g)` and whose imaginary part approaches `½{f, g}`.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par;
use crate::quantization::Quantizer;
use crate::sphere::{ComplexFunction, QuadratureGrid, SphereFunction, SpherePoint};

/// Symplectic form in the orthonormal frame `(e_θ, e_φ)` of the working metric.
pub const OMEGA: [[f64; 2]; 2] = [[0.0, 1.0], [-1.0, 0.0]];

pub type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct CocycleEstimate {
    /// Level of the estimate; for an extrapolated estimate, the finer level.
    pub k: usize,
    pub extrapolated: bool,
    pub c_plus: SphereFunction,
    pub c_minus: SphereFunction,
}

impl CocycleEstimate {
    /// `c₊ + i c₋`.
    pub fn full(&self) -> ComplexFunction {
        ComplexFunction::new(self.c_plus.clone(), self.c_minus.clone())
    }
}

/// Raw estimate `k · tr((Q(f)Q(g) − Q(fg)) F_x)`.
///
/// Dequantization sends rank-`l` tensor operators to degree-`l` harmonics, so
/// the estimate lives exactly in band `L_f + L_g` and is stored there.
pub fn cocycle_estimate<Q: Quantizer + ?Sized>(
    q: &Q,
    f: &SphereFunction,
    g: &SphereFunction,
) -> Result<CocycleEstimate> {
    let k = q.level() as f64;
    let band = f.band() + g.band();
    let tf = q.quantize(f)?;
    let tg = q.quantize(g)?;
    let tfg = q.quantize(&f.multiply(g))?;
    let base = q.base();
    let jordan = &tf.jordan_product(&tg)? - &tfg;
    let c_plus = (base.dequantize(&jordan)? * k).truncate(band);
    // Q(f)Q(g) − Q(g)Q(f) = iH, so the skew part of the product is H/2.
    let skew = tf.commutator(&tg)?;
    let c_minus = (base.dequantize(&skew)? * (0.5 * k)).truncate(band);
    Ok(CocycleEstimate {
        k: q.level(),
        extrapolated: false,
        c_plus,
        c_minus,
    })
}

/// Richardson step `2 c_{2k} − c_k`.
pub fn richardson(coarse: &CocycleEstimate, fine: &CocycleEstimate) -> Result<CocycleEstimate> {
    if fine.k != 2 * coarse.k || coarse.extrapolated || fine.extrapolated {
        return Err(Error::LevelMismatch {
            coarse: coarse.k,
            fine: fine.k,
        });
    }
    Ok(CocycleEstimate {
        k: fine.k,
        extrapolated: true,
        c_plus: &(&fine.c_plus * 2.0) - &coarse.c_plus,
        c_minus: &(&fine.c_minus * 2.0) - &coarse.c_minus,
    })
}

/// Estimates at levels `k` and `2k`, combined by [`richardson`].
pub fn cocycle_extrapolate<Q: Quantizer + ?Sized>(
    coarse: &Q,
    fine: &Q,
    f: &SphereFunction,
    g: &SphereFunction,
) -> Result<CocycleEstimate> {
    if fine.level() != 2 * coarse.level() {
        return Err(Error::LevelMismatch {
            coarse: coarse.level(),
            fine: fine.level(),
        });
    }
    richardson(&cocycle_estimate(coarse, f, g)?, &cocycle_estimate(fine, f, g)?)
}

/// Limit `ℏ → 0` of the raw estimates over several levels, by polynomial
/// (Neville) extrapolation in `ℏ` of the harmonic coefficients.
///
/// The raw estimates are rational in `k`, so with enough levels this
/// converges far past the two-level [`richardson`] step. The sign of the
/// limit survives, which the two-level step does not guarantee near zeros.
pub fn cocycle_limit<Q: Quantizer>(family: &[Q], f: &SphereFunction, g: &SphereFunction) -> Result<CocycleEstimate> {
    let mut ks: Vec<usize> = family.iter().map(Quantizer::level).collect();
    ks.sort_unstable();
    ks.dedup();
    if ks.len() != family.len() || ks.len() < 2 {
        return Err(Error::InsufficientLevels {
            need: 2,
            got: ks.len(),
        });
    }
    let estimates = par::map_slice(family, |q| cocycle_estimate(q, f, g))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let hs: Vec<f64> = family.iter().map(Quantizer::hbar).collect();
    let band = f.band() + g.band();
    let plus: Vec<&[f64]> = estimates.iter().map(|e| e.c_plus.coeffs()).collect();
    let minus: Vec<&[f64]> = estimates.iter().map(|e| e.c_minus.coeffs()).collect();
    Ok(CocycleEstimate {
        k: *ks.last().expect("at least two levels"),
        extrapolated: true,
        c_plus: SphereFunction::from_coeffs(band, neville_at_zero(&hs, &plus))?,
        c_minus: SphereFunction::from_coeffs(band, neville_at_zero(&hs, &minus))?,
    })
}

/// Value at `0` of the interpolating polynomial through `(h_i, v_i)`, per component.
fn neville_at_zero(hs: &[f64], values: &[&[f64]]) -> Vec<f64> {
    let mut p: Vec<Vec<f64>> = values.iter().map(|v| v.to_vec()).collect();
    let n = hs.len();
    for m in 1..n {
        for i in 0..n - m {
            let (hi, hj) = (hs[i], hs[i + m]);
            let next = std::mem::take(&mut p[i + 1]);
            p[i] = p[i].iter().zip(&next).map(|(a, b)| (hj * a - hi * b) / (hj - hi)).collect();
            p[i + 1] = next;
        }
    }
    p.swap_remove(0)
}

/// `max |h|` for a complex function, sampled densely enough to resolve it.
pub fn complex_sup(h: &ComplexFunction) -> f64 {
    let grid = QuadratureGrid::build((4 * h.band()).max(24));
    let re = h.re.evaluate_on(&grid);
    let im = h.im.evaluate_on(&grid);
    re.iter().zip(&im).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max)
}

/// Sup-norm of `f₁c(f₂,f₃) − c(f₁f₂,f₃) + c(f₁,f₂f₃) − c(f₁,f₂)f₃`.
pub fn hochschild_residual<C>(c: C, f1: &SphereFunction, f2: &SphereFunction, f3: &SphereFunction) -> Result<f64>
where
    C: Fn(&SphereFunction, &SphereFunction) -> Result<ComplexFunction>,
{
    let a = c(f2, f3)?.times_real(f1);
    let b = c(&f1.multiply(f2), f3)?;
    let d = c(f1, &f2.multiply(f3))?;
    let e = c(f1, f2)?.times_real(f3);
    Ok(complex_sup(&a.sub(&b).add(&d).sub(&e)))
}

/// Sup-norm of `c₊(fg, h) − f c₊(g, h) − g c₊(f, h)`.
pub fn leibniz_residual<C>(c_plus: C, f: &SphereFunction, g: &SphereFunction, h: &SphereFunction) -> Result<f64>
where
    C: Fn(&SphereFunction, &SphereFunction) -> Result<SphereFunction>,
{
    let lhs = c_plus(&f.multiply(g), h)?;
    let rhs = &f.multiply(&c_plus(g, h)?) + &g.multiply(&c_plus(f, h)?);
    Ok((&lhs - &rhs).sup_norm())
}

/// A symmetric 2×2 form per point, in the orthonormal frame `(e_θ, e_φ)` of
/// the working metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    pub points: Vec<SpherePoint>,
    /// Quadrature weights (sum to one) for integrals over the field.
    pub weights: Vec<f64>,
    pub forms: Vec<Mat2>,
}

/// Rows `sgrad u(p)` for the linear probe `u = a·p`, in the orthonormal frame.
fn sgrad_linear(axis: [f64; 3], p: &SpherePoint) -> [f64; 2] {
    let (et, ep) = p.frame();
    let dt = crate::sphere::dot(axis, et);
    let dp = crate::sphere::dot(axis, ep);
    [-SQRT_2 * dp, SQRT_2 * dt]
}

/// Least-squares tangent form from the 3×3 Gram matrix `M_ij = G(v_i, v_j)`
/// of three probe gradients `v_i`. Those rows satisfy `VᵀV = 2I`, so the
/// minimizer of `‖V G Vᵀ − M‖_F` is `¼ Vᵀ M V`.
pub fn fit_tangent_form(gram: &[[f64; 3]; 3], rows: &[[f64; 2]; 3]) -> Mat2 {
    let mut g = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += rows[i][a] * gram[i][j] * rows[j][b];
                }
            }
            g[a][b] = 0.25 * s;
        }
    }
    let off = 0.5 * (g[0][1] + g[1][0]);
    g[0][1] = off;
    g[1][0] = off;
    g
}

/// Metric from the symmetric-part estimates `c₊(u_i, u_j)` of the linear
/// probes `u_i = axes[i]·p`, via `c₊(f,g) = −½ G(sgrad f, sgrad g)`.
pub fn metric_from_cocycles(c_plus: &[[SphereFunction; 3]; 3], axes: &[[f64; 3]; 3], grid: &QuadratureGrid) -> MetricField {
    let values: Vec<Vec<Vec<f64>>> = c_plus
        .iter()
        .map(|row| row.iter().map(|c| c.evaluate_on(grid)).collect())
        .collect();
    let points = grid.nodes();
    let forms = par::map_range(points.len(), |q| {
        let p = &points[q];
        let mut gram = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                gram[i][j] = -2.0 * values[i][j][q];
            }
        }
        let rows = [sgrad_linear(axes[0], p), sgrad_linear(axes[1], p), sgrad_linear(axes[2], p)];
        fit_tangent_form(&gram, &rows)
    });
    MetricField {
        weights: grid.weights(),
        points,
        forms,
    }
}

pub const STANDARD_AXES: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Extrapolated unsharpness metric at the nodes of `grid`, from quantizers at
/// levels `k` and `2k`. `axes` are the three orthonormal probe directions
/// (rows of a rotation); the standard basis by default.
pub fn metric_reconstruct<Q: Quantizer + ?Sized>(
    coarse: &Q,
    fine: &Q,
    grid: &QuadratureGrid,
    axes: Option<[[f64; 3]; 3]>,
) -> Result<MetricField> {
    let axes = axes.unwrap_or(STANDARD_AXES);
    let probes: Vec<SphereFunction> = axes.iter().map(|a| linear_function(*a)).collect();
    let pairs: Vec<(usize, usize)> = (0..3).flat_map(|i| (i..3).map(move |j| (i, j))).collect();
    let estimates = par::map_slice(&pairs, |&(i, j)| {
        cocycle_extrapolate(coarse, fine, &probes[i], &probes[j]).map(|c| c.c_plus)
    });
    let mut table: [[SphereFunction; 3]; 3] = Default::default();
    for (&(i, j), c) in pairs.iter().zip(estimates) {
        let c = c?;
        table[i][j] = c.clone();
        table[j][i] = c;
    }
    Ok(metric_from_cocycles(&table, &axes, grid))
}

/// `a·p` as a band-1 function.
pub fn linear_function(a: [f64; 3]) -> SphereFunction {
    &(&(SphereFunction::x() * a[0]) + &(SphereFunction::y() * a[1])) + &(SphereFunction::z() * a[2])
}

/// `G = ω(·, J·) + ρ` at each point, with `J` compatible with `ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricDecomposition {
    pub j: Vec<Mat2>,
    pub rho: Vec<Mat2>,
    /// The eigenvalue modulus of `K` with `G = ω(·, K·)`: `sqrt(det G)`.
    pub alpha: Vec<f64>,
}

impl MetricDecomposition {
    /// Smallest eigenvalue of `ρ` over all points.
    pub fn min_rho_eigenvalue(&self) -> f64 {
        self.rho.iter().map(|r| sym_eigenvalues(r).0).fold(f64::INFINITY, f64::min)
    }
}

pub fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn mat_mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// Ascending eigenvalues of a symmetric 2×2 matrix.
pub fn sym_eigenvalues(m: &Mat2) -> (f64, f64) {
    let tr = m[0][0] + m[1][1];
    let half_gap = (0.25 * (m[0][0] - m[1][1]).powi(2) + m[0][1] * m[1][0]).max(0.0).sqrt();
    (0.5 * tr - half_gap, 0.5 * tr + half_gap)
}

/// Splits each form as `ω(·,J·) + ρ` with `J = K / sqrt(det K)` and
/// `K = −Ω G`; errors at the first non-positive `G`.
pub fn metric_decompose(field: &MetricField) -> Result<MetricDecomposition> {
    let mut j = Vec::with_capacity(field.forms.len());
    let mut rho = Vec::with_capacity(field.forms.len());
    let mut alpha = Vec::with_capacity(field.forms.len());
    for (i, g) in field.forms.iter().enumerate() {
        let (lo, _) = sym_eigenvalues(g);
        if !(lo > 0.0) {
            let p = field.points[i];
            return Err(Error::NonPositiveMetric {
                index: i,
                theta: p.theta,
                phi: p.phi,
            });
        }
        let root = det2(g).sqrt();
        let neg_omega = [[-OMEGA[0][0], -OMEGA[0][1]], [-OMEGA[1][0], -OMEGA[1][1]]];
        let k = mat_mul2(&neg_omega, g);
        let jm = [[k[0][0] / root, k[0][1] / root], [k[1][0] / root, k[1][1] / root]];
        // ω(·, J·) = Ω J = G / sqrt(det G)
        let compat = mat_mul2(&OMEGA, &jm);
        let r = [
            [g[0][0] - compat[0][0], 0.5 * ((g[0][1] - compat[0][1]) + (g[1][0] - compat[1][0]))],
            [0.0, g[1][1] - compat[1][1]],
        ];
        let r = [[r[0][0], r[0][1]], [r[0][1], r[1][1]]];
        j.push(jm);
        rho.push(r);
        alpha.push(root);
    }
    Ok(MetricDecomposition { j, rho, alpha })
}

/// Volume of the sphere in the metric `G`: `2π Σ_q w_q sqrt(det G_q)`.
pub fn total_unsharpness(field: &MetricField) -> f64 {
    let s: f64 = field
        .forms
        .iter()
        .zip(&field.weights)
        .map(|(g, w)| w * det2(g).max(0.0).sqrt())
        .sum();
    2.0 * PI * s
}

/// Largest pointwise deviation `max |G − expected|` (entrywise) over the field.
pub fn max_form_deviation<F: Fn(&SpherePoint) -> Mat2>(field: &MetricField, expected: F) -> f64 {
    field
        .forms
        .iter()
        .zip(&field.points)
        .map(|(g, p)| {
            let e = expected(p);
            let mut d = 0.0f64;
            for a in 0..2 {
                for b in 0..2 {
                    d = d.max((g[a][b] - e[a][b]).abs());
                }
            }
            d
        })
        .fold(0.0, f64::max)
}

pub const METRIC_CSV_HEADER: &str =
    "theta,phi,G11,G12,G22,J11,J12,J21,J22,rho11,rho12,rho22,sqrt_detG";

/// Writes one row per point at 17 significant digits.
pub fn write_metric_csv<W: Write>(mut w: W, field: &MetricField, dec: &MetricDecomposition) -> std::io::Result<()> {
    writeln!(w, "{METRIC_CSV_HEADER}")?;
    for i in 0..field.forms.len() {
        let p = field.points[i];
        let g = field.forms[i];
        let j = dec.j[i];
        let r = dec.rho[i];
        let vals = [
            p.theta, p.phi, g[0][0], g[0][1], g[1][1], j[0][0], j[0][1], j[1][0], j[1][1], r[0][0], r[0][1],
            r[1][1], dec.alpha[i],
        ];
        let line: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Cauchy-Schwarz slack `c₊(u,u) c₊(v,v) − ¼{u,v}²` at the nodes of `grid`.
pub fn cauchy_schwarz_slack(
    c_uu: &SphereFunction,
    c_vv: &SphereFunction,
    bracket: &SphereFunction,
    grid: &QuadratureGrid,
) -> Vec<f64> {
    let a = c_uu.evaluate_on(grid);
    let b = c_vv.evaluate_on(grid);
    let c = bracket.evaluate_on(grid);
    (0..grid.len()).map(|i| a[i] * b[i] - 0.25 * c[i] * c[i]).collect()
}

/// Complex evaluation helper for reporting.
pub fn evaluate_complex(c: &ComplexFunction, p: &SpherePoint) -> Complex64 {
    let (re, im) = c.evaluate(p);
    Complex64::new(re, im)
}
