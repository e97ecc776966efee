//! Finite POVMs, their Naimark dilation and the noise inequality.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::operator::{CMatrix, CVector, DensityState, HermitianOperator};
use crate::par;
use crate::quantization::{Quantizer, ToeplitzQuantizer};
use crate::sphere::{SphereFunction, SpherePoint};

/// Eigenvalues in `[−NEGATIVE_CLAMP, 0)` are treated as zero when taking roots.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

/// A finite family of positive operators summing to the identity.
#[derive(Debug, Clone)]
pub struct DiscretePOVM {
    dim: usize,
    elements: Vec<HermitianOperator>,
    /// Outcome points when the POVM comes from the sphere; empty otherwise.
    points: Vec<SpherePoint>,
}

impl DiscretePOVM {
    /// Validates positivity (to `1e−12`) and completeness (to `1e−10`).
    pub fn new(elements: Vec<HermitianOperator>, points: Vec<SpherePoint>) -> Result<Self> {
        let dim = elements
            .first()
            .map(HermitianOperator::dim)
            .ok_or_else(|| Error::InvalidParameter("a POVM needs at least one element".into()))?;
        if !points.is_empty() && points.len() != elements.len() {
            return Err(Error::DimensionMismatch {
                left: points.len(),
                right: elements.len(),
            });
        }
        let mut sum = HermitianOperator::zero(dim);
        for (i, e) in elements.iter().enumerate() {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: e.dim(),
                    right: dim,
                });
            }
            let lo = e.min_eigenvalue();
            if lo < -NEGATIVE_CLAMP {
                return Err(Error::NegativeElement { index: i, value: lo });
            }
            sum = &sum + e;
        }
        let defect = (&sum - &HermitianOperator::identity(dim)).operator_norm();
        if defect > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "elements sum to the identity only up to {defect:e}"
            )));
        }
        Ok(Self { dim, elements, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn points(&self) -> &[SpherePoint] {
        &self.points
    }

    fn check_outcomes(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.len() {
            return Err(Error::DimensionMismatch {
                left: u.len(),
                right: self.len(),
            });
        }
        Ok(())
    }

    /// `Σ_q u_q F_q`.
    pub fn integrate(&self, u: &[f64]) -> Result<HermitianOperator> {
        self.check_outcomes(u)?;
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (e, &x) in self.elements.iter().zip(u) {
            m += e.matrix() * Complex64::new(x, 0.0);
        }
        HermitianOperator::from_matrix(m)
    }

    /// `Δ_F(u) = ∫u² dF − (∫u dF)²`.
    pub fn noise_operator(&self, u: &[f64]) -> Result<HermitianOperator> {
        let sq: Vec<f64> = u.iter().map(|x| x * x).collect();
        Ok(&self.integrate(&sq)? - &self.integrate(u)?.square())
    }

    /// Outcome values of a function at the POVM's points.
    pub fn sample(&self, f: &SphereFunction) -> Result<Vec<f64>> {
        if self.points.is_empty() {
            return Err(Error::InvalidParameter("POVM has no outcome points".into()));
        }
        Ok(par::map_slice(&self.points, |p| f.evaluate(p)))
    }
}

/// The rank-one POVM `F_q = (k+1) w_q |x_q⟩⟨x_q|` of a quantizer's grid.
pub fn discretize_povm(q: &ToeplitzQuantizer) -> DiscretePOVM {
    let grid = q.grid();
    let k1 = (q.level() + 1) as f64;
    let elements = par::map_range(grid.len(), |i| {
        HermitianOperator::projector(q.coherent_at(i).vector(), k1 * grid.weight(i))
    });
    DiscretePOVM::new(elements, grid.nodes()).expect("grid POVM resolves the identity")
}

/// Positive square root with clamping of tiny negative eigenvalues.
pub fn psd_sqrt(a: &HermitianOperator, index: usize) -> Result<CMatrix> {
    let sp = a.eigen();
    if let Some(&lo) = sp.values.first() {
        if lo < -NEGATIVE_CLAMP {
            return Err(Error::NegativeElement { index, value: lo });
        }
    }
    let d = CVector::from_iterator(
        sp.values.len(),
        sp.values.iter().map(|&l| Complex64::new(l.max(0.0).sqrt(), 0.0)),
    );
    Ok(&sp.vectors * CMatrix::from_diagonal(&d) * sp.vectors.adjoint())
}

/// Isometry `V: H → H ⊗ C^Q` stacking the blocks `F_q^{1/2}`. The dilated
/// projector `P_q` is the identity on block `q`, and `V† P_q V = F_q`.
#[derive(Debug, Clone)]
pub struct NaimarkDilation {
    dim: usize,
    blocks: Vec<CMatrix>,
}

pub fn naimark_dilate(povm: &DiscretePOVM) -> Result<NaimarkDilation> {
    let blocks = par::map_range(povm.len(), |i| psd_sqrt(&povm.elements[i], i))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(NaimarkDilation { dim: povm.dim, blocks })
}

impl NaimarkDilation {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> usize {
        self.blocks.len()
    }

    /// Dimension of the dilated space.
    pub fn dilated_dim(&self) -> usize {
        self.dim * self.blocks.len()
    }

    /// The stacked `(dim·Q) × dim` isometry.
    pub fn isometry(&self) -> CMatrix {
        let n = self.dim;
        let mut v = CMatrix::zeros(n * self.blocks.len(), n);
        for (q, b) in self.blocks.iter().enumerate() {
            v.view_mut((q * n, 0), (n, n)).copy_from(b);
        }
        v
    }

    /// `‖V†V − I‖`.
    pub fn isometry_defect(&self) -> f64 {
        let mut s = CMatrix::zeros(self.dim, self.dim);
        for b in &self.blocks {
            s += b.adjoint() * b;
        }
        crate::quantization::spectral_norm(&(s - CMatrix::identity(self.dim, self.dim)))
    }

    /// `Π P_q Π*`.
    pub fn compressed_projector(&self, q: usize) -> CMatrix {
        self.blocks[q].adjoint() * &self.blocks[q]
    }

    /// `Π S Π*` for the diagonal observable `S = Σ s_q P_q`.
    pub fn compress(&self, s: &[f64]) -> Result<CMatrix> {
        self.check(s)?;
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (b, &x) in self.blocks.iter().zip(s) {
            m += b.adjoint() * b * Complex64::new(x, 0.0);
        }
        Ok(m)
    }

    fn check(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.blocks.len() {
            return Err(Error::DimensionMismatch {
                left: s.len(),
                right: self.blocks.len(),
            });
        }
        Ok(())
    }

    /// `q(S, T) = Π S (1 − Π*Π) T Π*` for diagonal dilated observables.
    pub fn q_pairing(&self, s: &[f64], t: &[f64]) -> Result<CMatrix> {
        self.check(t)?;
        let st: Vec<f64> = s.iter().zip(t).map(|(a, b)| a * b).collect();
        Ok(self.compress(&st)? - self.compress(s)? * self.compress(t)?)
    }

    /// Same pairing for arbitrary dense operators on the dilated space.
    pub fn q_pairing_dense(&self, s: &CMatrix, t: &CMatrix) -> Result<CMatrix> {
        let n = self.dilated_dim();
        if s.shape() != (n, n) || t.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                left: s.nrows(),
                right: n,
            });
        }
        let v = self.isometry();
        let vd = v.adjoint();
        let complement = CMatrix::identity(n, n) - &v * &vd;
        Ok(&vd * s * complement * t * &v)
    }
}

/// Cauchy-Schwarz slack of the pairing in a state:
/// `tr(q(S,S)θ) tr(q(T,T)θ) − |tr(q(S,T)θ)|²`.
pub fn q_pairing_slack(dilation: &NaimarkDilation, s: &[f64], t: &[f64], state: &DensityState) -> Result<f64> {
    if state.dim() != dilation.dim() {
        return Err(Error::InvalidState(format!(
            "state of dimension {} for a dilation of dimension {}",
            state.dim(),
            dilation.dim()
        )));
    }
    let rho = state.matrix();
    let pair = |a: &[f64], b: &[f64]| -> Result<Complex64> { Ok((dilation.q_pairing(a, b)? * rho).trace()) };
    let ss = pair(s, s)?;
    let tt = pair(t, t)?;
    let st = pair(s, t)?;
    Ok(ss.re * tt.re - st.norm_sqr())
}

/// One randomized check of the noise inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseTrial {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// `tr(Δ_F(u)θ) tr(Δ_F(v)θ) − ¼|tr([U,V]θ)|²` with `U = ∫u dF`, `V = ∫v dF`.
pub fn verify_noise_inequality(povm: &DiscretePOVM, u: &[f64], v: &[f64], state: &DensityState) -> Result<NoiseTrial> {
    if state.dim() != povm.dim() {
        return Err(Error::InvalidState(format!(
            "state of dimension {} for a POVM on dimension {}",
            state.dim(),
            povm.dim()
        )));
    }
    let du = povm.noise_operator(u)?.expectation(state)?;
    let dv = povm.noise_operator(v)?.expectation(state)?;
    let uu = povm.integrate(u)?;
    let vv = povm.integrate(v)?;
    // [U, V] = iH, so |tr([U,V]θ)| = |tr(Hθ)|
    let h = uu.commutator(&vv)?.expectation(state)?;
    let lhs = du * dv;
    let rhs = 0.25 * h * h;
    Ok(NoiseTrial {
        lhs,
        rhs,
        slack: lhs - rhs,
    })
}

/// `|Var(f, μ_θ) − Var(T(f), θ) − tr(Δ(f)θ)|`, with the Husimi variance
/// computed from `tr(T(f²)θ) − tr(T(f)θ)²`.
pub fn variance_identity_check<Q: Quantizer + ?Sized>(q: &Q, f: &SphereFunction, state: &DensityState) -> Result<f64> {
    let tf = q.quantize(f)?;
    let tf2 = q.quantize(&f.multiply(f))?;
    let mean = tf.expectation(state)?;
    let husimi_var = tf2.expectation(state)? - mean * mean;
    let quantum_var = state.variance(&tf)?;
    let noise = (&tf2 - &tf.square()).expectation(state)?;
    Ok((husimi_var - quantum_var - noise).abs())
}

/// Record of a batch of randomized noise-inequality trials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub k: usize,
    pub result: NoiseTrial,
}

/// Random outcome vectors and states for each level, seeded.
pub fn run_noise_trials(levels: &[usize], trials_per_level: usize, seed: u64) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for (li, &k) in levels.iter().enumerate() {
        let q = ToeplitzQuantizer::new(k, 0)?;
        let povm = discretize_povm(&q);
        let n = povm.len();
        let batch = par::map_range(trials_per_level, |t| {
            let s = seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add((li * trials_per_level + t) as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let u: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let state = DensityState::random(k + 1, rng.random());
            verify_noise_inequality(&povm, &u, &v, &state)
        });
        for (t, r) in batch.into_iter().enumerate() {
            out.push(TrialRecord {
                trial: out.len(),
                k,
                result: r.map_err(|e| Error::InvalidState(format!("trial {t}: {e}")))?,
            });
        }
    }
    Ok(out)
}

pub const TRIAL_CSV_HEADER: &str = "trial,k,slack,lhs,rhs";

pub fn write_trials_csv<W: Write>(mut w: W, trials: &[TrialRecord]) -> std::io::Result<()> {
    writeln!(w, "{TRIAL_CSV_HEADER}")?;
    for t in trials {
        writeln!(
            w,
            "{},{},{:.16e},{:.16e},{:.16e}",
            t.trial, t.k, t.result.slack, t.result.lhs, t.result.rhs
        )?;
    }
    Ok(())
}
