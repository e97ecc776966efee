//! Rotation-equivariant quantizations as degree multipliers on top of the
//! standard one, and their classification against the heat family.

use std::fmt;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fit::order_in_hbar;
use crate::operator::HermitianOperator;
use crate::par;
use crate::quantization::{spin_generators, Quantizer, ToeplitzQuantizer};
use crate::smearing::heat_quantizer;
use crate::sphere::{parse_function, SphereFunction};

/// Relative tolerance of the generator check.
pub const EQUIVARIANCE_TOL: f64 = 1e-8;

/// `Q = m_l T` on degree-`l` harmonics, for `l` up to `multipliers.len() − 1`.
#[derive(Debug, Clone)]
pub struct EquivariantQuantization {
    base: ToeplitzQuantizer,
    multipliers: Vec<f64>,
}

impl EquivariantQuantization {
    /// Multipliers for `l = 0..=L`; `L` is capped at `k` (higher degrees
    /// quantize to zero anyway).
    pub fn new(k: usize, multipliers: Vec<f64>) -> Result<Self> {
        if multipliers.is_empty() {
            return Err(Error::InvalidParameter("need at least the degree-0 multiplier".into()));
        }
        if let Some(i) = multipliers.iter().position(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter(format!("multiplier at l = {i} is not finite")));
        }
        if (multipliers[0] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "degree-0 multiplier must be 1, got {}",
                multipliers[0]
            )));
        }
        let mut multipliers = multipliers;
        multipliers.truncate(k + 1);
        let band = multipliers.len() - 1;
        Ok(Self {
            base: ToeplitzQuantizer::new(k, band)?,
            multipliers,
        })
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    /// `m_l − 1`.
    pub fn alpha(&self, l: usize) -> f64 {
        self.multipliers[l] - 1.0
    }
}

impl Quantizer for EquivariantQuantization {
    fn level(&self) -> usize {
        self.base.level()
    }

    fn quantize(&self, f: &SphereFunction) -> Result<HermitianOperator> {
        if f.band() >= self.multipliers.len() {
            return Err(Error::BandOverflow {
                band: f.band(),
                max: self.multipliers.len() - 1,
            });
        }
        self.base.toeplitz(&f.map_degrees(|l| self.multipliers[l]))
    }

    fn base(&self) -> &ToeplitzQuantizer {
        &self.base
    }

    fn label(&self) -> String {
        format!("equivariant(k={})", self.level())
    }
}

/// Extracted multipliers with the per-degree Schur residual
/// `max_m ‖Q(Y_lm) − m_l T(Y_lm)‖ / ‖T(Y_lm)‖`.
#[derive(Debug, Clone)]
pub struct MultiplierExtraction {
    pub quantization: EquivariantQuantization,
    pub schur_residuals: Vec<f64>,
    /// Largest relative generator-check residual.
    pub equivariance_residual: f64,
}

/// Relative residual of `i[J_n, Q(f)] = Q(∂_n f)` over the three rotation
/// generators, maximized over the given probes.
pub fn equivariance_residual<Q: Quantizer + ?Sized>(q: &Q, probes: &[SphereFunction]) -> Result<f64> {
    let gens = spin_generators(q.level());
    let mut worst = 0.0f64;
    for f in probes {
        let qf = q.quantize(f)?;
        let scale = qf.operator_norm().max(1e-300);
        for (axis, j) in gens.iter().enumerate() {
            let mut n = [0.0; 3];
            n[axis] = 1.0;
            let lhs = q.quantize(&f.rotation_derivative(n))?;
            // i[J, Q] = i·(iH) = −H
            let rhs = j.commutator(&qf)? * -1.0;
            worst = worst.max((&lhs - &rhs).operator_norm() / scale);
        }
    }
    Ok(worst)
}

/// Multipliers `m_l = ⟨Q(Y_l0), T(Y_l0)⟩ / ⟨T(Y_l0), T(Y_l0)⟩` for
/// `l ≤ max_degree`, after certifying equivariance on the generators.
pub fn extract_multipliers<Q: Quantizer + ?Sized>(q: &Q, max_degree: usize) -> Result<MultiplierExtraction> {
    let k = q.level();
    let top = max_degree.min(k).min(q.symbol_band());
    // the degree-1 and a mixed top-degree probe see every generator
    let mut probes = vec![SphereFunction::x() + SphereFunction::z()];
    if top >= 2 {
        probes.push(SphereFunction::harmonic(top, 1) + SphereFunction::harmonic(top, -(top as i64)));
    }
    let residual = equivariance_residual(q, &probes)?;
    if residual > EQUIVARIANCE_TOL {
        return Err(Error::NotEquivariant { residual });
    }
    let base = q.base();
    let rows = par::map_range(top + 1, |l| -> Result<(f64, f64)> {
        let t0 = base.toeplitz(&SphereFunction::harmonic(l, 0))?;
        let q0 = q.quantize(&SphereFunction::harmonic(l, 0))?;
        let m = q0.hs_inner(&t0) / t0.hs_inner(&t0);
        let mut worst = 0.0f64;
        for mm in -(l as i64)..=l as i64 {
            let y = SphereFunction::harmonic(l, mm);
            let t = base.toeplitz(&y)?;
            let d = &q.quantize(&y)? - &(&t * m);
            worst = worst.max(d.operator_norm() / t.operator_norm());
        }
        Ok((m, worst))
    });
    let mut multipliers = Vec::with_capacity(top + 1);
    let mut schur = Vec::with_capacity(top + 1);
    for r in rows {
        let (m, s) = r?;
        multipliers.push(m);
        schur.push(s);
    }
    // unitality holds to roundoff for any quantizer built on the same POVM
    multipliers[0] = 1.0;
    Ok(MultiplierExtraction {
        quantization: EquivariantQuantization::new(k, multipliers)?,
        schur_residuals: schur,
        equivariance_residual: residual,
    })
}

/// Recurrence coefficients `(q_n, r_n, s_n)` with
/// `P₁P_n = q_n P_{n+1} + r_n P_{n−1}` and
/// `(∇P₁, ∇P_n) = s_n(P_{n−1} − P_{n+1})`.
pub fn legendre_coefficients(n: usize) -> (f64, f64, f64) {
    let n = n as f64;
    let q = (n + 1.0) / (2.0 * n + 1.0);
    (q, 1.0 - q, 2.0 * n * (n + 1.0) / (2.0 * n + 1.0))
}

/// Sup-norm residuals of the product and gradient recurrences at degree `n`.
pub fn legendre_identity_check(n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidParameter("degree must be at least 1".into()));
    }
    let (q, r, s) = legendre_coefficients(n);
    let p1 = SphereFunction::legendre(1);
    let pn = SphereFunction::legendre(n);
    let up = SphereFunction::legendre(n + 1);
    let down = SphereFunction::legendre(n - 1);
    let product = &(&p1.multiply(&pn) - &(&up * q)) - &(&down * r);
    let gradient = &p1.grad_pairing(&pn) - &(&(&down - &up) * s);
    Ok((product.sup_norm(), gradient.sup_norm()))
}

/// Result of fitting `log m_l = −l(l+1)(μ−1)/(2k) + β_l/k²`.
#[derive(Debug, Clone, PartialEq)]
pub struct MuFit {
    pub mu: f64,
    /// Levels used for the fit.
    pub levels: Vec<usize>,
    /// `|α_{n−1} − α_n − α_1 − (n+1)(μ−1)/k|` at the finest level, `n = 1..`.
    pub recursion_residuals: Vec<f64>,
    /// Weighted fit residuals, one per `(k, l)` row.
    pub fit_residuals: Vec<f64>,
}

/// Least-squares `μ` from the two finest levels, using degrees `1..=max_degree`.
///
/// The log of the multiplier is linear in `ℏ` for the heat family, and the
/// per-degree `β_l` absorbs second-order terms of anything else. Low degrees
/// dominate the weighted fit.
pub fn fit_mu(family: &[EquivariantQuantization], max_degree: usize) -> Result<MuFit> {
    let mut sorted: Vec<&EquivariantQuantization> = family.iter().collect();
    sorted.sort_by_key(|q| q.level());
    sorted.dedup_by_key(|q| q.level());
    if sorted.len() < 2 {
        return Err(Error::InsufficientLevels {
            need: 2,
            got: sorted.len(),
        });
    }
    let used = &sorted[sorted.len() - 2..];
    let n = used.iter().map(|q| q.multipliers().len() - 1).min().unwrap_or(0).min(max_degree);
    if n == 0 {
        return Err(Error::DegenerateFit("no nonconstant degrees available".into()));
    }
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for q in used {
        let k = q.level() as f64;
        for l in 1..=n {
            let m = q.multipliers()[l];
            if !(m > 0.0) {
                return Err(Error::DegenerateFit(format!("multiplier m_{l} = {m} at k = {k} is not positive")));
            }
            // each row is rescaled to estimate μ − 1 directly and weighted by
            // 1/(l(l+1)), since the higher-order terms grow with the degree
            let x = (l * (l + 1)) as f64;
            let scale = -2.0 * k / (x * x);
            let mut row = vec![0.0; n + 1];
            row[0] = 1.0 / x;
            row[l] = scale / (k * k);
            rows.push(row);
            rhs.push(scale * m.ln());
        }
    }
    let a = DMatrix::from_fn(rows.len(), n + 1, |i, j| rows[i][j]);
    let b = DVector::from_vec(rhs);
    let svd = a.clone().svd(true, true);
    let smin = svd.singular_values.min();
    let smax = svd.singular_values.max();
    if !(smin > 1e-12 * smax) {
        return Err(Error::DegenerateFit("multiplier fit is rank deficient".into()));
    }
    let x = svd
        .solve(&b, 1e-14 * smax)
        .map_err(|e| Error::DegenerateFit(e.to_string()))?;
    let fit_residuals = (&a * &x - &b).iter().map(|r| r.abs()).collect();
    let mu = 1.0 + x[0];
    let finest = used[1];
    let hbar = finest.hbar();
    let recursion_residuals = (1..=n)
        .map(|j| {
            (finest.alpha(j - 1) - finest.alpha(j) - finest.alpha(1) - (j + 1) as f64 * (mu - 1.0) * hbar).abs()
        })
        .collect();
    Ok(MuFit {
        mu,
        levels: used.iter().map(|q| q.level()).collect(),
        recursion_residuals,
        fit_residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    EquivalentToStandard,
    /// Equivalent to the heat-smoothed quantization with this `t`.
    EquivalentToHeat(f64),
    /// `μ < 1`: cannot come from a POVM.
    NonPovm,
    /// Positive `μ`, but residuals against the heat family do not decay at
    /// second order.
    NotEquivalent,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EquivalentToStandard => write!(f, "equivalent-to-standard"),
            Self::EquivalentToHeat(t) => write!(f, "equivalent-to-heat(t={t})"),
            Self::NonPovm => write!(f, "non-POVM"),
            Self::NotEquivalent => write!(f, "not-equivalent"),
        }
    }
}

/// Tolerances of [`classify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub max_degree: usize,
    /// `μ < 1 − mu_tol` is declared non-POVM.
    pub mu_tol: f64,
    /// `|μ − 1| ≤ standard_tol` is declared the standard quantization.
    pub standard_tol: f64,
    /// Smallest equivalence exponent accepted.
    pub min_exponent: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            max_degree: 6,
            mu_tol: 0.05,
            standard_tol: 1e-6,
            min_exponent: 1.8,
        }
    }
}

/// Equivalence residuals `‖Q(f) − T^{(t)}(f)‖` for one test function.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceRow {
    pub function: String,
    pub levels: Vec<usize>,
    pub residuals: Vec<f64>,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub mu: f64,
    /// `(μ − 1)/4`; absent for non-POVM input.
    pub t: Option<f64>,
    /// Smallest exponent over the test functions; `+∞` when residuals are
    /// at roundoff, NaN when not computed.
    pub exponent: f64,
    pub recursion_residuals: Vec<f64>,
    pub equivalence: Vec<EquivalenceRow>,
    pub verdict: Verdict,
}

impl ClassificationReport {
    /// `key = value` lines with fixed field names.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "mu = {:.17e}", self.mu)?;
        match self.t {
            Some(t) => writeln!(w, "t = {t:.17e}")?,
            None => writeln!(w, "t = none")?,
        }
        writeln!(w, "exponent = {}", self.exponent)?;
        writeln!(w, "verdict = {}", self.verdict)?;
        let rec: Vec<String> = self.recursion_residuals.iter().map(|r| format!("{r:.6e}")).collect();
        writeln!(w, "recursion_residuals = {}", rec.join(","))?;
        for row in &self.equivalence {
            let r: Vec<String> = row
                .levels
                .iter()
                .zip(&row.residuals)
                .map(|(k, r)| format!("{k}:{r:.6e}"))
                .collect();
            writeln!(w, "equivalence[{}] = {} exponent {}", row.function, r.join(","), row.exponent)?;
        }
        Ok(())
    }
}

/// Test functions of the equivalence check.
pub const EQUIVALENCE_PROBES: [&str; 4] = ["z", "P2", "P3", "x*y"];

/// Order in `ℏ` of the residuals, with roundoff-level entries lifted to the floor.
fn equivalence_exponent(levels: &[usize], residuals: &[f64], floors: &[f64]) -> Result<f64> {
    if residuals.iter().zip(floors).all(|(r, f)| r <= f) {
        return Ok(f64::INFINITY);
    }
    let lifted: Vec<f64> = residuals.iter().zip(floors).map(|(r, f)| r.max(*f)).collect();
    order_in_hbar(levels, &lifted, 0.0)
}

/// Fits `μ`, then compares every level against `T^{(t)}` with `t = (μ−1)/4`.
pub fn classify(family: &[EquivariantQuantization], opts: &ClassifyOptions) -> Result<ClassificationReport> {
    let fit = fit_mu(family, opts.max_degree)?;
    let mu = fit.mu;
    if mu < 1.0 - opts.mu_tol {
        return Ok(ClassificationReport {
            mu,
            t: None,
            exponent: f64::NAN,
            recursion_residuals: fit.recursion_residuals,
            equivalence: Vec::new(),
            verdict: Verdict::NonPovm,
        });
    }
    let t = ((mu - 1.0) / 4.0).max(0.0);
    let mut levels: Vec<&EquivariantQuantization> = family.iter().collect();
    levels.sort_by_key(|q| q.level());
    levels.dedup_by_key(|q| q.level());
    let ks: Vec<usize> = levels.iter().map(|q| q.level()).collect();
    let mut equivalence = Vec::new();
    for name in EQUIVALENCE_PROBES {
        let f = parse_function(name)?;
        let mut residuals = Vec::new();
        let mut floors = Vec::new();
        for q in &levels {
            if f.band() >= q.multipliers().len() {
                return Err(Error::BandOverflow {
                    band: f.band(),
                    max: q.multipliers().len() - 1,
                });
            }
            let heat = heat_quantizer(q.level(), f.band(), t)?;
            let a = q.quantize(&f)?;
            let b = heat.quantize(&f)?;
            residuals.push((&a - &b).operator_norm());
            floors.push(1e-13 * b.operator_norm().max(1.0));
        }
        let exponent = if ks.len() >= 2 {
            equivalence_exponent(&ks, &residuals, &floors)?
        } else {
            f64::NAN
        };
        equivalence.push(EquivalenceRow {
            function: name.to_string(),
            levels: ks.clone(),
            residuals,
            exponent,
        });
    }
    let exponent = equivalence.iter().map(|r| r.exponent).fold(f64::INFINITY, f64::min);
    let verdict = if !(exponent >= opts.min_exponent) {
        Verdict::NotEquivalent
    } else if (mu - 1.0).abs() <= opts.standard_tol {
        Verdict::EquivalentToStandard
    } else {
        Verdict::EquivalentToHeat(t)
    };
    Ok(ClassificationReport {
        mu,
        t: Some(t),
        exponent,
        recursion_residuals: fit.recursion_residuals,
        equivalence,
        verdict,
    })
}

/// Extracts multipliers at each level and classifies the family.
pub fn classify_quantizers<Q: Quantizer>(family: &[Q], opts: &ClassifyOptions) -> Result<ClassificationReport> {
    let extracted = family
        .iter()
        .map(|q| extract_multipliers(q, opts.max_degree).map(|e| e.quantization))
        .collect::<Result<Vec<_>>>()?;
    classify(&extracted, opts)
}

pub const MULTIPLIER_CSV_HEADER: &str = "k,l,m_l,alpha_l";

pub fn write_multipliers_csv<W: Write>(mut w: W, family: &[EquivariantQuantization]) -> std::io::Result<()> {
    writeln!(w, "{MULTIPLIER_CSV_HEADER}")?;
    for q in family {
        for (l, m) in q.multipliers().iter().enumerate() {
            writeln!(w, "{},{l},{m:.17e},{:.17e}", q.level(), m - 1.0)?;
        }
    }
    Ok(())
}

/// Reads the multiplier table back; rows of one level must list `l = 0, 1, …`
/// in order.
pub fn read_multipliers_csv<R: BufRead>(r: R) -> Result<Vec<EquivariantQuantization>> {
    let mut table: Vec<(usize, Vec<f64>)> = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with('k')) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 4 {
            return Err(Error::Parse(format!("line {}: want 4 columns, got {}", n + 1, cols.len())));
        }
        let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", n + 1));
        let k: usize = cols[0].parse().map_err(|_| bad("k"))?;
        let l: usize = cols[1].parse().map_err(|_| bad("l"))?;
        let m: f64 = cols[2].parse().map_err(|_| bad("m_l"))?;
        let entry = match table.iter_mut().find(|(kk, _)| *kk == k) {
            Some(e) => e,
            None => {
                table.push((k, Vec::new()));
                table.last_mut().expect("just pushed")
            }
        };
        if l != entry.1.len() {
            return Err(Error::Parse(format!(
                "line {}: expected l = {} for k = {k}, got {l}",
                n + 1,
                entry.1.len()
            )));
        }
        entry.1.push(m);
    }
    if table.is_empty() {
        return Err(Error::Parse("multiplier table is empty".into()));
    }
    table.into_iter().map(|(k, m)| EquivariantQuantization::new(k, m)).collect()
}
