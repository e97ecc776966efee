//! Level-k Berezin-Toeplitz quantization of the sphere in the spin basis.
//!
//! Basis vector `e_m` (`m = 0..=k`) carries `J_z = k/2 − m`, so `e_0` is the
//! coherent state at the north pole. All integrals over `φ` are done
//! analytically ring by ring; Gauss rules in `cos θ` do the rest.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fit::order_in_hbar;
use crate::operator::{CMatrix, CVector, DensityState, HermitianOperator};
use crate::par;
use crate::sphere::function::{project_ring_series, ring_dft};
use crate::sphere::harmonics::legendre_table;
use crate::sphere::{ComplexFunction, QuadratureGrid, SpherePoint};
use crate::sphere::SphereFunction;

/// Anything that maps band-limited functions to operators on `C^{k+1}`.
pub trait Quantizer: Send + Sync {
    fn level(&self) -> usize;

    fn quantize(&self, f: &SphereFunction) -> Result<HermitianOperator>;

    /// The standard quantizer sharing this Hilbert space and coherent states.
    fn base(&self) -> &ToeplitzQuantizer;

    /// Whether `f >= 0` implies `Q(f) >= 0`.
    fn is_povm(&self) -> bool {
        true
    }

    fn label(&self) -> String;

    fn hbar(&self) -> f64 {
        1.0 / self.level() as f64
    }

    fn dim(&self) -> usize {
        self.level() + 1
    }

    /// Largest band `quantize` accepts.
    fn symbol_band(&self) -> usize {
        self.base().symbol_band()
    }
}

fn ln_binomial(k: usize, m: usize) -> f64 {
    ln_factorial(k) - ln_factorial(m) - ln_factorial(k - m)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Real amplitudes `sqrt(C(k,m)) cos^{k−m}(θ/2) sin^m(θ/2)`.
pub fn coherent_amplitudes(k: usize, theta: f64) -> Vec<f64> {
    let (s, c) = (0.5 * theta).sin_cos();
    let (ls, lc) = (s.abs().ln(), c.abs().ln());
    (0..=k)
        .map(|m| {
            let ps = if m == 0 { 0.0 } else { m as f64 * ls };
            let pc = if m == k { 0.0 } else { (k - m) as f64 * lc };
            (0.5 * ln_binomial(k, m) + ps + pc).exp()
        })
        .collect()
}

/// Spin coherent state at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentState {
    level: usize,
    amplitudes: CVector,
}

impl CoherentState {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn vector(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn overlap(&self, other: &CoherentState) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// The state `|x⟩⟨x|`.
    pub fn density(&self) -> DensityState {
        DensityState::pure(&self.amplitudes).expect("coherent states are unit vectors")
    }
}

/// Component `m` equals `sqrt(C(k,m)) cos^{k−m}(θ/2) (sin(θ/2) e^{iφ})^m`.
pub fn coherent_state(k: usize, p: &SpherePoint) -> CoherentState {
    assert!(k >= 1, "level must be at least 1");
    let a = coherent_amplitudes(k, p.theta);
    let amplitudes = CVector::from_iterator(
        k + 1,
        a.iter()
            .enumerate()
            .map(|(m, &r)| Complex64::from_polar(r, m as f64 * p.phi)),
    );
    CoherentState { level: k, amplitudes }
}

/// The standard Toeplitz quantizer `T_k`.
#[derive(Debug, Clone)]
pub struct ToeplitzQuantizer {
    k: usize,
    symbol_band: usize,
    grid: QuadratureGrid,
    amplitudes: Vec<Vec<f64>>,
    tables: Vec<Vec<f64>>,
}

impl ToeplitzQuantizer {
    /// Quantizer at level `k` for symbols of band at most `symbol_band`.
    pub fn new(k: usize, symbol_band: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParameter("level k must be >= 1".into()));
        }
        let grid = QuadratureGrid::build((k + 2 * symbol_band).max(2 * k));
        let table_band = symbol_band.max(k);
        let (amplitudes, tables): (Vec<_>, Vec<_>) = par::map_slice(grid.rings(), |r| {
            (
                coherent_amplitudes(k, r.theta),
                legendre_table(r.cos_theta, r.sin_theta, table_band),
            )
        })
        .into_iter()
        .unzip();
        Ok(Self {
            k,
            symbol_band,
            grid,
            amplitudes,
            tables,
        })
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn symbol_band(&self) -> usize {
        self.symbol_band
    }

    /// Coherent state at grid node `i`.
    pub fn coherent_at(&self, i: usize) -> CoherentState {
        coherent_state(self.k, &self.grid.node(i))
    }

    /// `(k+1) Σ_q w_q f(x_q) |x_q⟩⟨x_q|` for a band-limited `f`.
    pub fn toeplitz(&self, f: &SphereFunction) -> Result<HermitianOperator> {
        if f.band() > self.symbol_band {
            return Err(Error::BandOverflow {
                band: f.band(),
                max: self.symbol_band,
            });
        }
        let (cos, sin): (Vec<_>, Vec<_>) = self
            .tables
            .iter()
            .map(|t| f.ring_series(t))
            .unzip();
        Ok(self.assemble(&cos, &sin))
    }

    /// Toeplitz operator of a function known only by its values on the
    /// quantizer grid. Exact when the samples come from a function of band
    /// at most `symbol_band`.
    pub fn toeplitz_from_samples(&self, samples: &[f64]) -> Result<HermitianOperator> {
        if samples.len() != self.grid.len() {
            return Err(Error::DimensionMismatch {
                left: samples.len(),
                right: self.grid.len(),
            });
        }
        let n_phi = self.grid.n_phi();
        let order = self.k.min((n_phi - 1) / 2);
        let (cos, sin): (Vec<_>, Vec<_>) = (0..self.grid.rings().len())
            .map(|r| ring_dft(&samples[r * n_phi..(r + 1) * n_phi], order, |j| self.grid.phi(j)))
            .unzip();
        Ok(self.assemble(&cos, &sin))
    }

    /// `T_mn = (k+1) Σ_r w_r a_m a_n F_r(m − n)` with `F_r` the Fourier
    /// coefficients of the symbol on ring `r`.
    fn assemble(&self, cos: &[Vec<f64>], sin: &[Vec<f64>]) -> HermitianOperator {
        let k = self.k;
        let rings = self.grid.rings();
        let band = cos.first().map_or(0, |c| c.len() - 1).min(k);
        let scale = (k + 1) as f64;
        let rows = par::map_range(k + 1, |m| {
            let mut row = vec![Complex64::new(0.0, 0.0); k + 1];
            let lo = m.saturating_sub(band);
            let hi = (m + band).min(k);
            for (r, ring) in rings.iter().enumerate() {
                let a = &self.amplitudes[r];
                let wm = scale * ring.weight * a[m];
                if wm == 0.0 {
                    continue;
                }
                for n in lo..=hi {
                    let f = if n == m {
                        Complex64::new(cos[r][0], 0.0)
                    } else {
                        let d = m.abs_diff(n);
                        let sign = if m > n { 1.0 } else { -1.0 };
                        Complex64::new(0.5 * cos[r][d], 0.5 * sign * sin[r][d])
                    };
                    row[n] += f * (wm * a[n]);
                }
            }
            row
        });
        let m = CMatrix::from_fn(k + 1, k + 1, |i, j| rows[i][j]);
        HermitianOperator::from_exact(m)
    }

    /// `x ↦ ⟨x|A|x⟩` as a band-`k` function.
    pub fn dequantize(&self, a: &HermitianOperator) -> Result<SphereFunction> {
        self.check_dim(a.dim())?;
        Ok(self.dequantize_matrix(a.matrix()))
    }

    /// Same for an arbitrary matrix, split into Hermitian and skew parts.
    pub fn dequantize_complex(&self, a: &CMatrix) -> Result<ComplexFunction> {
        self.check_dim(a.nrows())?;
        let adj = a.adjoint();
        let h = (a + &adj) * Complex64::new(0.5, 0.0);
        let s = (a - &adj) * Complex64::new(0.0, -0.5);
        Ok(ComplexFunction::new(self.dequantize_matrix(&h), self.dequantize_matrix(&s)))
    }

    /// `(k+1) ⟨x|A|x⟩`, the dual map with the dimension factor.
    pub fn dual(&self, a: &HermitianOperator) -> Result<SphereFunction> {
        Ok(self.dequantize(a)? * (self.k + 1) as f64)
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.k + 1 {
            return Err(Error::DimensionMismatch {
                left: d,
                right: self.k + 1,
            });
        }
        Ok(())
    }

    fn dequantize_matrix(&self, a: &CMatrix) -> SphereFunction {
        let k = self.k;
        let series = par::map_range(self.grid.rings().len(), |r| {
            let amp = &self.amplitudes[r];
            let mut cos = vec![0.0; k + 1];
            let mut sin = vec![0.0; k + 1];
            for d in 0..=k {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 0..=(k - d) {
                    acc += a[(m, m + d)] * (amp[m] * amp[m + d]);
                }
                if d == 0 {
                    cos[0] = acc.re;
                } else {
                    cos[d] = 2.0 * acc.re;
                    sin[d] = -2.0 * acc.im;
                }
            }
            (cos, sin)
        });
        let (cos, sin): (Vec<_>, Vec<_>) = series.into_iter().unzip();
        project_ring_series(self.grid.rings(), Some(&self.tables), &cos, &sin, k)
    }

    /// Berezin transform `x ↦ tr(T(f) F_x)`.
    pub fn berezin(&self, f: &SphereFunction) -> Result<SphereFunction> {
        self.dequantize(&self.toeplitz(f)?)
    }

    /// `‖Σ_q F_q − I‖_op` for the grid POVM.
    pub fn resolution_residual(&self) -> f64 {
        let one = self.toeplitz(&SphereFunction::constant(1.0)).expect("constant fits");
        (&one - &HermitianOperator::identity(self.k + 1)).operator_norm()
    }
}

impl Quantizer for ToeplitzQuantizer {
    fn level(&self) -> usize {
        self.k
    }

    fn quantize(&self, f: &SphereFunction) -> Result<HermitianOperator> {
        self.toeplitz(f)
    }

    fn base(&self) -> &ToeplitzQuantizer {
        self
    }

    fn label(&self) -> String {
        "standard".into()
    }

    fn symbol_band(&self) -> usize {
        self.symbol_band
    }
}

/// `tr(Q(f) θ)`, the mean of `f` under the Husimi measure of `θ`.
pub fn husimi_moment<Q: Quantizer + ?Sized>(q: &Q, f: &SphereFunction, state: &DensityState) -> Result<f64> {
    q.quantize(f)?.expectation(state)
}

/// `Q(f²) − Q(f)²`.
pub fn noise_operator<Q: Quantizer + ?Sized>(q: &Q, f: &SphereFunction) -> Result<HermitianOperator> {
    let tf = q.quantize(f)?;
    let tf2 = q.quantize(&f.multiply(f))?;
    Ok(&tf2 - &tf.square())
}

/// The Rawnsley density `R` of a quantizer, read off from
/// `tr Q(f) = k ∫ f R dσ`, plus the first-order correction `r = (R − 1)k`.
#[derive(Debug, Clone)]
pub struct RawnsleyReport {
    pub density: SphereFunction,
    pub correction: SphereFunction,
    pub mean_correction: f64,
}

/// All real harmonics up to `band`, the default probe set.
pub fn harmonic_probes(band: usize) -> Vec<SphereFunction> {
    (0..=band)
        .flat_map(|l| (-(l as i64)..=l as i64).map(move |m| SphereFunction::harmonic(l, m)))
        .collect()
}

/// Least-squares fit of the Rawnsley density of band `band` over `probes`.
pub fn rawnsley_function<Q: Quantizer + ?Sized>(
    q: &Q,
    probes: &[SphereFunction],
    band: usize,
) -> Result<RawnsleyReport> {
    let n = (band + 1) * (band + 1);
    if probes.len() < n {
        return Err(Error::IllConditioned(format!(
            "{} probes cannot determine {n} coefficients",
            probes.len()
        )));
    }
    let k = q.level() as f64;
    let design = DMatrix::from_fn(probes.len(), n, |i, j| {
        probes[i].coeffs().get(j).copied().unwrap_or(0.0)
    });
    let traces: Vec<f64> = par::map_slice(probes, |f| q.quantize(f).map(|t| t.trace() / k))
        .into_iter()
        .collect::<Result<_>>()?;
    let rhs = nalgebra::DVector::from_vec(traces);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::IllConditioned(format!(
            "probe design has condition number {:e}",
            smax / smin
        )));
    }
    let sol = svd
        .solve(&rhs, 1e-14 * smax)
        .map_err(|e| Error::IllConditioned(e.to_string()))?;
    let density = SphereFunction::from_coeffs(band, sol.iter().copied().collect())?;
    let correction = (&density - &SphereFunction::constant(1.0)) * k;
    let mean_correction = correction.mean();
    Ok(RawnsleyReport {
        density,
        correction,
        mean_correction,
    })
}

/// Residuals of the five quantization axioms over a family of levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub ks: Vec<usize>,
    /// Per level: norm, bracket, product, trace, reversibility residuals.
    pub residuals: Vec<[f64; 5]>,
    /// Fitted orders in `ℏ`; `+∞` marks an identity that holds to roundoff.
    pub orders: [f64; 5],
}

pub const AXIOM_NAMES: [&str; 5] = ["norm", "bracket", "product", "trace", "reversibility"];

/// Norm of an arbitrary complex matrix (largest singular value).
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

fn quantize_complex<Q: Quantizer + ?Sized>(q: &Q, c: &ComplexFunction) -> Result<CMatrix> {
    let re = q.quantize(&c.re)?;
    let im = q.quantize(&c.im)?;
    Ok(re.matrix() + im.matrix() * Complex64::new(0.0, 1.0))
}

/// Axiom residuals at one level; `cocycle` is the candidate `c(f, g)`.
pub fn axiom_residuals<Q: Quantizer + ?Sized>(
    q: &Q,
    f: &SphereFunction,
    g: &SphereFunction,
    cocycle: &ComplexFunction,
    f_sup: f64,
) -> Result<[f64; 5]> {
    let k = q.level() as f64;
    let tf = q.quantize(f)?;
    let tg = q.quantize(g)?;
    let r1 = (f_sup - tf.operator_norm()).max(0.0);
    let bracket = q.quantize(&f.poisson_bracket(g))?;
    let r2 = (&(tf.commutator(&tg)? * k) - &bracket).operator_norm();
    let prod = tf.product(&tg)? - q.quantize(&f.multiply(g))?.matrix() - quantize_complex(q, cocycle)? / Complex64::new(k, 0.0);
    let r3 = spectral_norm(&prod);
    let r4 = (tf.trace() / k - f.mean()).abs();
    let b = q.base().dequantize(&tf)?;
    let r5 = (&b - f).sup_norm();
    Ok([r1, r2, r3, r4, r5])
}

/// Residual floor below which an axiom is treated as an exact identity.
pub const EXACT_FLOOR: f64 = 1e-12;

/// Runs [`axiom_residuals`] over every quantizer in `family` and fits orders.
pub fn axiom_report<Q: Quantizer>(
    family: &[Q],
    f: &SphereFunction,
    g: &SphereFunction,
    cocycle: &ComplexFunction,
) -> Result<ConvergenceRecord> {
    if family.len() < 3 {
        return Err(Error::InsufficientLevels {
            need: 3,
            got: family.len(),
        });
    }
    let f_sup = f.sup_norm();
    let residuals = family
        .iter()
        .map(|q| axiom_residuals(q, f, g, cocycle, f_sup))
        .collect::<Result<Vec<_>>>()?;
    let ks: Vec<usize> = family.iter().map(Quantizer::level).collect();
    let scale = 1.0 + f_sup * g.sup_norm();
    let mut orders = [0.0; 5];
    for (i, o) in orders.iter_mut().enumerate() {
        let col: Vec<f64> = residuals.iter().map(|r| r[i]).collect();
        *o = order_in_hbar(&ks, &col, EXACT_FLOOR * scale).unwrap_or(f64::NAN);
    }
    Ok(ConvergenceRecord { ks, residuals, orders })
}

/// Spin generators `(J_x, J_y, J_z)` of the level-`k` representation.
pub fn spin_generators(k: usize) -> [HermitianOperator; 3] {
    let n = k + 1;
    let mut jp = CMatrix::zeros(n, n);
    for m in 1..=k {
        jp[(m - 1, m)] = Complex64::new(((m * (k - m + 1)) as f64).sqrt(), 0.0);
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm) * Complex64::new(0.5, 0.0);
    let jy = (&jp - &jm) * Complex64::new(0.0, -0.5);
    let jz = HermitianOperator::from_real_diagonal(
        &(0..=k).map(|m| k as f64 / 2.0 - m as f64).collect::<Vec<_>>(),
    );
    [
        HermitianOperator::from_exact(jx),
        HermitianOperator::from_exact(jy),
        jz,
    ]
}

/// `exp(−i angle (axis·J))`, the representation of the rotation by `angle`
/// about the unit vector `axis`.
pub fn rotation_operator(k: usize, axis: [f64; 3], angle: f64) -> CMatrix {
    let [jx, jy, jz] = spin_generators(k);
    let gen = &(&(&jx * axis[0]) + &(&jy * axis[1])) + &(&jz * axis[2]);
    let sp = gen.eigen();
    let phases = CVector::from_iterator(
        k + 1,
        sp.values.iter().map(|&l| Complex64::from_polar(1.0, -angle * l)),
    );
    &sp.vectors * CMatrix::from_diagonal(&phases) * sp.vectors.adjoint()
}

/// Rotation matrix for `angle` about the unit vector `axis` (Rodrigues).
pub fn rotation_matrix(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let n = crate::sphere::norm(axis);
    let [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
        [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
        [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
    ]
}

/// Writes `dim k` then one line per row of `re im` pairs at full precision.
pub fn write_operator<W: Write>(mut w: W, k: usize, a: &HermitianOperator) -> std::io::Result<()> {
    writeln!(w, "{} {}", a.dim(), k)?;
    for i in 0..a.dim() {
        let row: Vec<String> = (0..a.dim())
            .map(|j| {
                let z = a.matrix()[(i, j)];
                format!("{:.16e} {:.16e}", z.re, z.im)
            })
            .collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

/// Inverse of [`write_operator`]; returns the level and the operator.
pub fn read_operator<R: BufRead>(r: R) -> Result<(usize, HermitianOperator)> {
    let mut lines = r.lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Parse("unexpected end of operator dump".into()))?
            .map_err(|e| Error::Parse(e.to_string()))
    };
    let header = next()?;
    let nums: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header `{header}`"))))
        .collect::<Result<_>>()?;
    let [dim, k] = nums[..] else {
        return Err(Error::Parse(format!("bad header `{header}`")));
    };
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        let line = next()?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad number `{t}` in row {i}"))))
            .collect::<Result<_>>()?;
        if vals.len() != 2 * dim {
            return Err(Error::Parse(format!("row {i} has {} numbers, want {}", vals.len(), 2 * dim)));
        }
        for j in 0..dim {
            m[(i, j)] = Complex64::new(vals[2 * j], vals[2 * j + 1]);
        }
    }
    Ok((k, HermitianOperator::from_matrix(m)?))
}

/// Closed-form cocycle of the standard quantizer:
/// `c(f, g) = −½ (∇f, ∇g) + (i/2) {f, g}` in the working metric.
pub fn standard_cocycle(f: &SphereFunction, g: &SphereFunction) -> ComplexFunction {
    ComplexFunction::new(f.grad_pairing(g) * -0.5, f.poisson_bracket(g) * 0.5)
}
