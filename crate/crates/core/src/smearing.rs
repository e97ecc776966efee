//! Quantizers obtained by pre-composing the standard one with a map on
//! symbols: heat smoothing, the metaplectic correction, a short flow along a
//! vector field, and the anisotropic Gaussian Markov kernel.

use std::f64::consts::{PI, SQRT_2};
use std::io::BufRead;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};

use crate::error::{Error, Result};
use crate::operator::HermitianOperator;
use crate::par;
use crate::quantization::{rotation_matrix, Quantizer, ToeplitzQuantizer};
use crate::sphere::{cross, norm, parse_function, QuadratureGrid, SphereFunction, SpherePoint};
use crate::unsharpness::Mat2;

type RhoFn = Arc<dyn Fn(&SpherePoint) -> Mat2 + Send + Sync>;

/// A non-negative symmetric form per point, in the orthonormal frame
/// `(e_θ, e_φ)` of the working metric.
#[derive(Clone)]
pub enum RhoField {
    /// `s · g`.
    Isotropic(f64),
    /// `s · dz ⊗ dz` restricted to the tangent plane.
    ZzRankOne(f64),
    /// Values at scattered points, looked up by nearest neighbour.
    Sampled { points: Vec<SpherePoint>, forms: Vec<Mat2> },
    Custom(RhoFn),
}

impl std::fmt::Debug for RhoField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Isotropic(s) => write!(f, "Isotropic({s})"),
            Self::ZzRankOne(s) => write!(f, "ZzRankOne({s})"),
            Self::Sampled { points, .. } => write!(f, "Sampled({} points)", points.len()),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl RhoField {
    pub fn zero() -> Self {
        Self::Isotropic(0.0)
    }

    pub fn at(&self, p: &SpherePoint) -> Mat2 {
        match self {
            Self::Isotropic(s) => [[*s, 0.0], [0.0, *s]],
            Self::ZzRankOne(s) => {
                // dz(√2 e_θ) = −√2 sin θ, dz(√2 e_φ) = 0
                let a = 2.0 * s * p.theta.sin().powi(2);
                [[a, 0.0], [0.0, 0.0]]
            }
            Self::Sampled { points, forms } => {
                let c = p.to_cartesian();
                let i = points
                    .iter()
                    .map(|q| {
                        let d = q.to_cartesian();
                        (c[0] - d[0]).powi(2) + (c[1] - d[1]).powi(2) + (c[2] - d[2]).powi(2)
                    })
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map_or(0, |(i, _)| i);
                forms[i]
            }
            Self::Custom(f) => f(p),
        }
    }

    /// `iso:<s>`, `zz:<s>`, or a path to a CSV with columns
    /// `theta, phi, r11, r12, r22`.
    pub fn parse(spec: &str) -> Result<Self> {
        let num = |s: &str| -> Result<f64> {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad number `{s}` in rho spec")))?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("rho scale {v} must be >= 0")));
            }
            Ok(v)
        };
        if let Some(s) = spec.strip_prefix("iso:") {
            return Ok(Self::Isotropic(num(s)?));
        }
        if let Some(s) = spec.strip_prefix("zz:") {
            return Ok(Self::ZzRankOne(num(s)?));
        }
        let file = std::fs::File::open(spec).map_err(|e| Error::Parse(format!("rho file `{spec}`: {e}")))?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut points = Vec::new();
        let mut forms = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || (n == 0 && line.starts_with("theta")) {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| Error::Parse(format!("line {}: bad number `{t}`", n + 1))))
                .collect::<Result<_>>()?;
            if v.len() != 5 {
                return Err(Error::Parse(format!("line {}: want 5 columns, got {}", n + 1, v.len())));
            }
            if !(0.0..=PI).contains(&v[0]) {
                return Err(Error::Parse(format!("line {}: theta {} out of range", n + 1, v[0])));
            }
            points.push(SpherePoint::new(v[0], v[1]));
            forms.push([[v[2], v[3]], [v[3], v[4]]]);
        }
        if points.is_empty() {
            return Err(Error::Parse("rho file has no rows".into()));
        }
        let field = Self::Sampled { points, forms };
        field.validate_samples()?;
        Ok(field)
    }

    fn validate_samples(&self) -> Result<()> {
        if let Self::Sampled { points, forms } = self {
            for (i, f) in forms.iter().enumerate() {
                check_psd(f, &points[i])?;
            }
        }
        Ok(())
    }
}

fn check_psd(m: &Mat2, p: &SpherePoint) -> Result<()> {
    let (lo, _) = crate::unsharpness::sym_eigenvalues(m);
    if lo < -1e-12 || !lo.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "rho is not positive semidefinite at (θ={:.4}, φ={:.4}): eigenvalue {lo:e}",
            p.theta, p.phi
        )));
    }
    Ok(())
}

/// Gauss-Hermite nodes and weights for the weight `e^{−u²}` (Golub-Welsch).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], PI.sqrt() * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Smooth bump equal to 1 on `[0, ε/2]` and 0 on `[ε, ∞)`.
pub fn cutoff(d: f64, eps: f64) -> f64 {
    if d <= 0.5 * eps {
        return 1.0;
    }
    if d >= eps {
        return 0.0;
    }
    let s = (d - 0.5 * eps) / (0.5 * eps);
    let psi = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    psi(1.0 - s) / (psi(1.0 - s) + psi(s))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovOptions {
    /// Cutoff radius in round distance.
    pub epsilon: f64,
    /// Gauss-Hermite order per direction.
    pub order: usize,
    /// Bands added when projecting the smeared function.
    pub extra_band: usize,
}

impl Default for MarkovOptions {
    fn default() -> Self {
        Self {
            epsilon: PI / 4.0,
            order: 20,
            extra_band: 6,
        }
    }
}

/// Gaussian-kernel smoothing `K_t^ρ f`, projected to band `L_f + extra_band`.
///
/// At each point the covariance endomorphism is `A_t = t(−π J ρ J + t)` in
/// normal coordinates of the working metric; the kernel is
/// `e^{−π⟨A_t⁻¹Z, Z⟩}` times the cutoff, normalized so that `K_t 1 = 1`.
pub fn markov_smear_apply(f: &SphereFunction, rho: &RhoField, t: f64, opts: &MarkovOptions) -> Result<SphereFunction> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("smoothing time {t} must be > 0")));
    }
    if !(opts.epsilon > 0.0 && opts.epsilon < PI) {
        return Err(Error::InvalidParameter(format!(
            "cutoff radius {} must lie in (0, π)",
            opts.epsilon
        )));
    }
    if opts.order == 0 {
        return Err(Error::InvalidParameter("quadrature order must be positive".into()));
    }
    let band = f.band() + opts.extra_band;
    let grid = QuadratureGrid::build(2 * band);
    let (u, w) = gauss_hermite(opts.order);
    let nodes = grid.nodes();
    let values = par::map_slice(&nodes, |x0| -> Result<f64> {
        let r = rho.at(x0);
        check_psd(&r, x0)?;
        // −J ρ J with J = [[0, −1], [1, 0]] swaps the diagonal and negates the corner
        let m = Matrix2::new(PI * r[1][1] + t, -PI * r[0][1], -PI * r[1][0], PI * r[0][0] + t) * t;
        let eig = m.symmetric_eigen();
        let scale = [
            (eig.eigenvalues[0].max(0.0) / PI).sqrt(),
            (eig.eigenvalues[1].max(0.0) / PI).sqrt(),
        ];
        let (mut num, mut den) = (0.0, 0.0);
        for (i, &ui) in u.iter().enumerate() {
            for (j, &uj) in u.iter().enumerate() {
                let a = ui * scale[0];
                let b = uj * scale[1];
                let z1 = a * eig.eigenvectors[(0, 0)] + b * eig.eigenvectors[(0, 1)];
                let z2 = a * eig.eigenvectors[(1, 0)] + b * eig.eigenvectors[(1, 1)];
                // metric is half the round one: round displacement is √2 Z
                let (r1, r2) = (SQRT_2 * z1, SQRT_2 * z2);
                let phi = cutoff(r1.hypot(r2), opts.epsilon);
                if phi == 0.0 {
                    continue;
                }
                let wt = w[i] * w[j] * phi;
                num += wt * f.evaluate(&x0.exp_round(r1, r2));
                den += wt;
            }
        }
        Ok(num / den)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    SphereFunction::project(&values, &grid, band)
}

/// `v = ω × p + ∇h`, a rotation field plus an optional gradient field (the
/// gradient of the working metric, twice the round one).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub rotation: [f64; 3],
    pub gradient: Option<SphereFunction>,
}

impl VectorField {
    pub fn rotation(axis: [f64; 3]) -> Self {
        Self {
            rotation: axis,
            gradient: None,
        }
    }

    pub fn gradient_of(h: SphereFunction) -> Self {
        Self {
            rotation: [0.0; 3],
            gradient: Some(h),
        }
    }

    /// `rot:<a>,<b>,<c>`, `grad:<function>`, or both separated by `;`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut v = Self {
            rotation: [0.0; 3],
            gradient: None,
        };
        for part in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            if let Some(r) = part.strip_prefix("rot:") {
                let c: Vec<f64> = r
                    .split(',')
                    .map(|t| t.trim().parse().map_err(|_| Error::Parse(format!("bad rotation component `{t}`"))))
                    .collect::<Result<_>>()?;
                let [a, b, c] = c[..] else {
                    return Err(Error::Parse(format!("rotation needs three components, got `{r}`")));
                };
                v.rotation = [a, b, c];
            } else if let Some(h) = part.strip_prefix("grad:") {
                v.gradient = Some(parse_function(h)?);
            } else {
                return Err(Error::Parse(format!("unrecognized vector field `{part}`")));
            }
        }
        Ok(v)
    }

    /// Ambient velocity at `p`.
    pub fn velocity(&self, p: [f64; 3]) -> [f64; 3] {
        let mut v = cross(self.rotation, p);
        if let Some(h) = &self.gradient {
            let g = h.round_gradient_at(&SpherePoint::from_cartesian(p));
            for i in 0..3 {
                v[i] += 2.0 * g[i];
            }
        }
        v
    }

    /// Divergence for the area measure; rotations are divergence-free and
    /// `div ∇h = −Δh`.
    pub fn divergence(&self) -> SphereFunction {
        match &self.gradient {
            Some(h) => h.laplacian() * -1.0,
            None => SphereFunction::zero(0),
        }
    }

    /// Position after flowing for time `s`: closed form for rotations,
    /// otherwise RK4 with eight steps and projection back to the sphere.
    pub fn flow(&self, p: &SpherePoint, s: f64) -> SpherePoint {
        let mut x = p.to_cartesian();
        let n = 8;
        let h = s / n as f64;
        let add = |a: [f64; 3], b: [f64; 3], c: f64| [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]];
        for _ in 0..n {
            let k1 = self.velocity(x);
            let k2 = self.velocity(add(x, k1, 0.5 * h));
            let k3 = self.velocity(add(x, k2, 0.5 * h));
            let k4 = self.velocity(add(x, k3, h));
            for i in 0..3 {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            let r = norm(x);
            x.iter_mut().for_each(|c| *c /= r);
        }
        SpherePoint::from_cartesian(x)
    }
}

/// The symbol map that defines a smeared quantizer.
#[derive(Debug, Clone)]
pub enum SmearKind {
    /// `f ↦ e^{−tℏΔ} f`.
    Heat { t: f64 },
    /// `f ↦ f + (ℏ/4) Δf`.
    Metaplectic,
    /// `f ↦ f ∘ φ_{−ℏ}` for the flow `φ` of `v`.
    Twist { field: VectorField },
    /// `f ↦ K_ℏ^ρ f`.
    Markov { rho: RhoField, options: MarkovOptions },
}

/// Standard quantizer composed with a symbol map.
#[derive(Debug, Clone)]
pub struct SmearedQuantizer {
    base: ToeplitzQuantizer,
    kind: SmearKind,
}

impl SmearedQuantizer {
    pub fn kind(&self) -> &SmearKind {
        &self.kind
    }

    /// Bands the symbol map adds.
    fn extra_band(&self) -> usize {
        match &self.kind {
            SmearKind::Heat { .. } | SmearKind::Metaplectic => 0,
            SmearKind::Twist { field } if field.gradient.is_none() => 0,
            SmearKind::Twist { .. } => TWIST_EXTRA_BAND,
            SmearKind::Markov { options, .. } => options.extra_band,
        }
    }

    /// The symbol actually handed to the standard quantizer.
    pub fn premap(&self, f: &SphereFunction) -> Result<SphereFunction> {
        let hbar = self.hbar();
        match &self.kind {
            SmearKind::Heat { t } => f.heat_flow(t * hbar),
            SmearKind::Metaplectic => Ok(f + &(f.laplacian() * (0.25 * hbar))),
            SmearKind::Twist { field } => {
                if field.gradient.is_none() {
                    let w = norm(field.rotation);
                    if w == 0.0 {
                        return Ok(f.clone());
                    }
                    let axis = [field.rotation[0] / w, field.rotation[1] / w, field.rotation[2] / w];
                    // f ∘ φ_{−ℏ} = f ∘ R⁻¹ with R the rotation by ℏ|ω|
                    return Ok(f.rotate(&rotation_matrix(axis, hbar * w)));
                }
                let band = f.band() + TWIST_EXTRA_BAND;
                Ok(SphereFunction::from_fn(band, |p| f.evaluate(&field.flow(p, -hbar))))
            }
            SmearKind::Markov { rho, options } => markov_smear_apply(f, rho, hbar, options),
        }
    }
}

const TWIST_EXTRA_BAND: usize = 6;

impl Quantizer for SmearedQuantizer {
    fn level(&self) -> usize {
        self.base.level()
    }

    fn quantize(&self, f: &SphereFunction) -> Result<HermitianOperator> {
        if f.band() > self.symbol_band() {
            return Err(Error::BandOverflow {
                band: f.band(),
                max: self.symbol_band(),
            });
        }
        self.base.toeplitz(&self.premap(f)?)
    }

    fn base(&self) -> &ToeplitzQuantizer {
        &self.base
    }

    fn is_povm(&self) -> bool {
        !matches!(self.kind, SmearKind::Metaplectic)
    }

    fn label(&self) -> String {
        match &self.kind {
            SmearKind::Heat { t } => format!("heat:{t}"),
            SmearKind::Metaplectic => "metaplectic".into(),
            SmearKind::Twist { .. } => "twist".into(),
            SmearKind::Markov { rho, .. } => format!("markov:{rho:?}"),
        }
    }

    fn symbol_band(&self) -> usize {
        self.base.symbol_band().saturating_sub(self.extra_band())
    }
}

fn with_base(k: usize, symbol_band: usize, kind: SmearKind) -> Result<SmearedQuantizer> {
    let mut q = SmearedQuantizer {
        base: ToeplitzQuantizer::new(k, symbol_band)?,
        kind,
    };
    let extra = q.extra_band();
    if extra > 0 {
        q.base = ToeplitzQuantizer::new(k, symbol_band + extra)?;
    }
    Ok(q)
}

/// `T(e^{−tℏΔ} f)`.
pub fn heat_quantizer(k: usize, symbol_band: usize, t: f64) -> Result<SmearedQuantizer> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("heat parameter {t} must be >= 0")));
    }
    with_base(k, symbol_band, SmearKind::Heat { t })
}

/// `T(f + (ℏ/4)Δf)`; not positivity preserving.
pub fn metaplectic_quantizer(k: usize, symbol_band: usize) -> Result<SmearedQuantizer> {
    with_base(k, symbol_band, SmearKind::Metaplectic)
}

/// `T(f ∘ φ_{−ℏ})`.
pub fn vector_twist_quantizer(k: usize, symbol_band: usize, field: VectorField) -> Result<SmearedQuantizer> {
    with_base(k, symbol_band, SmearKind::Twist { field })
}

/// `T(K_ℏ^ρ f)`.
pub fn rho_quantizer(k: usize, symbol_band: usize, rho: RhoField, options: MarkovOptions) -> Result<SmearedQuantizer> {
    if let RhoField::Isotropic(s) | RhoField::ZzRankOne(s) = rho {
        if !(s >= 0.0) {
            return Err(Error::InvalidParameter(format!("rho scale {s} must be >= 0")));
        }
    }
    rho.validate_samples()?;
    with_base(k, symbol_band, SmearKind::Markov { rho, options })
}

/// The unsharpness metric each construction should produce, in the
/// orthonormal frame of the working metric.
pub fn expected_metric(kind: &SmearKind, p: &SpherePoint) -> Mat2 {
    match kind {
        SmearKind::Heat { t } => [[1.0 + 4.0 * t, 0.0], [0.0, 1.0 + 4.0 * t]],
        SmearKind::Metaplectic => [[0.0; 2]; 2],
        SmearKind::Twist { .. } => [[1.0, 0.0], [0.0, 1.0]],
        SmearKind::Markov { rho, .. } => {
            let r = rho.at(p);
            [[1.0 + r[0][0], r[0][1]], [r[1][0], 1.0 + r[1][1]]]
        }
    }
}

/// `2π ∫ sqrt(det G) dσ` for a metric given pointwise.
pub fn expected_total_unsharpness<F: Fn(&SpherePoint) -> Mat2 + Sync>(metric: F) -> f64 {
    let grid = QuadratureGrid::build(64);
    let vals: Vec<f64> = par::map_range(grid.len(), |i| {
        crate::unsharpness::det2(&metric(&grid.node(i))).max(0.0).sqrt()
    });
    2.0 * PI * grid.integrate(&vals)
}

/// `−½ G(sgrad f, sgrad g)` for a metric given pointwise, projected to
/// band `band`.
pub fn expected_c_plus<F>(f: &SphereFunction, g: &SphereFunction, metric: F, band: usize) -> SphereFunction
where
    F: Fn(&SpherePoint) -> Mat2 + Sync + Send,
{
    SphereFunction::from_fn(band, |p| {
        let (_, ft, fp) = f.derivatives_at(p);
        let (_, gt, gp) = g.derivatives_at(p);
        let a = [-SQRT_2 * fp, SQRT_2 * ft];
        let b = [-SQRT_2 * gp, SQRT_2 * gt];
        let m = metric(p);
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += a[i] * m[i][j] * b[j];
            }
        }
        -0.5 * s
    })
}

/// A non-negative symbol whose metaplectic quantization has a negative
/// eigenvalue.
#[derive(Debug, Clone)]
pub struct NegativityWitness {
    pub label: String,
    pub k: usize,
    pub min_symbol: f64,
    pub min_eigenvalue: f64,
}

/// Searches squares and shifted low harmonics at each level for a
/// non-negative symbol `f` with `min spec Q(f) < 0`; returns the most
/// negative case found.
pub fn metaplectic_negativity_witness(levels: &[usize], max_degree: usize) -> Result<Option<NegativityWitness>> {
    let mut candidates: Vec<(String, SphereFunction)> = Vec::new();
    for n in 1..=max_degree {
        let p = SphereFunction::legendre(n);
        candidates.push((format!("1+P{n}"), &SphereFunction::constant(1.0) + &p));
        candidates.push((format!("1-P{n}"), &SphereFunction::constant(1.0) - &p));
        candidates.push((format!("P{n}^2"), p.multiply(&p)));
    }
    for c in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let s = &SphereFunction::z() - &SphereFunction::constant(c);
        candidates.push((format!("(z-{c})^2"), s.multiply(&s)));
    }
    for l in 1..=max_degree / 2 {
        for m in 0..=l as i64 {
            let y = SphereFunction::harmonic(l, m);
            candidates.push((format!("Y{l}_{m}^2"), y.multiply(&y)));
        }
    }
    let band = candidates.iter().map(|(_, f)| f.band()).max().unwrap_or(0);
    let mut best: Option<NegativityWitness> = None;
    for &k in levels {
        let q = metaplectic_quantizer(k, band)?;
        let results = par::map_slice(&candidates, |(label, f)| -> Result<NegativityWitness> {
            let (lo, _) = f.extrema();
            let e = q.quantize(f)?.min_eigenvalue();
            Ok(NegativityWitness {
                label: label.clone(),
                k,
                min_symbol: lo,
                min_eigenvalue: e,
            })
        });
        for r in results {
            let r = r?;
            if r.min_symbol >= -1e-12 && r.min_eigenvalue < -1e-12 && best.as_ref().is_none_or(|b| r.min_eigenvalue < b.min_eigenvalue) {
                best = Some(r);
            }
        }
    }
    Ok(best)
}
