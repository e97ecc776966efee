//! Dense Hermitian operators on the level-k Hilbert space and density states.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Drift from Hermiticity tolerated (relative to the entry scale) before
/// symmetrization is refused.
pub const HERMITIAN_DRIFT_TOL: f64 = 1e-10;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    m: CMatrix,
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

fn hermitian_drift(m: &CMatrix) -> f64 {
    let scale = m.iter().fold(1.0f64, |s, z| s.max(z.norm()));
    let mut drift = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j {
            drift = drift.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    drift / scale
}

fn symmetrize(mut m: CMatrix) -> CMatrix {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)] = Complex64::new(m[(j, j)].re, 0.0);
        for i in 0..j {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
    m
}

impl HermitianOperator {
    /// Validates Hermiticity up to [`HERMITIAN_DRIFT_TOL`] and symmetrizes.
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite operator entry".into()));
        }
        let drift = hermitian_drift(&m);
        if drift > HERMITIAN_DRIFT_TOL {
            return Err(Error::NotHermitian { drift });
        }
        Ok(Self { m: symmetrize(m) })
    }

    /// For results that are Hermitian in exact arithmetic; still checked.
    pub(crate) fn from_exact(m: CMatrix) -> Self {
        Self::from_matrix(m).expect("arithmetic result should be Hermitian")
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let m = CMatrix::from_diagonal(&CVector::from_iterator(
            d.len(),
            d.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        Self { m }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim, dim),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            m: CMatrix::zeros(dim, dim),
        }
    }

    /// Rank-one projector `|v⟩⟨v|` scaled by `weight`.
    pub fn projector(v: &CVector, weight: f64) -> Self {
        Self {
            m: symmetrize(v * v.adjoint() * Complex64::new(weight, 0.0)),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    /// `A B` (not Hermitian in general).
    pub fn product(&self, other: &Self) -> Result<CMatrix> {
        self.check_dim(other)?;
        Ok(&self.m * &other.m)
    }

    /// `½(AB + BA)`.
    pub fn jordan_product(&self, other: &Self) -> Result<Self> {
        let ab = self.product(other)?;
        let m = (&ab + ab.adjoint()) * Complex64::new(0.5, 0.0);
        Ok(Self { m: symmetrize(m) })
    }

    /// Returns `H` with `AB − BA = iH`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let ab = self.product(other)?;
        let m = (&ab - ab.adjoint()) * (-I);
        Ok(Self { m: symmetrize(m) })
    }

    pub fn square(&self) -> Self {
        Self {
            m: symmetrize(&self.m * &self.m),
        }
    }

    /// `U A U†`.
    pub fn conjugate(&self, u: &CMatrix) -> Result<Self> {
        if u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: u.ncols(),
                right: self.dim(),
            });
        }
        Ok(Self {
            m: symmetrize(u * &self.m * u.adjoint()),
        })
    }

    pub fn eigen(&self) -> Spectrum {
        let eig = self.m.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(self.dim(), self.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
        Spectrum { values, vectors }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.m.clone().symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    /// Spectral norm from a full eigendecomposition.
    pub fn operator_norm(&self) -> f64 {
        let v = self.eigenvalues();
        match (v.first(), v.last()) {
            (Some(a), Some(b)) => a.abs().max(b.abs()),
            _ => 0.0,
        }
    }

    pub fn trace(&self) -> f64 {
        self.m.diagonal().iter().map(|z| z.re).sum()
    }

    /// Hilbert-Schmidt pairing `tr(AB)`.
    pub fn hs_inner(&self, other: &Self) -> f64 {
        self.m
            .iter()
            .zip(other.m.transpose().iter())
            .map(|(a, b)| (a * b).re)
            .sum()
    }

    pub fn hs_norm(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨v|A|v⟩`.
    pub fn expectation_vector(&self, v: &CVector) -> f64 {
        v.dotc(&(&self.m * v)).re
    }

    /// `tr(A θ)`.
    pub fn expectation(&self, state: &DensityState) -> Result<f64> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: state.dim(),
            });
        }
        Ok(self.hs_inner(&state.op))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m: &self.m * Complex64::new(s, 0.0) }
    }
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: &HermitianOperator) -> HermitianOperator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        HermitianOperator { m: &self.m + &rhs.m }
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: &HermitianOperator) -> HermitianOperator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        HermitianOperator { m: &self.m - &rhs.m }
    }
}

impl Mul<f64> for HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, rhs: f64) -> HermitianOperator {
        self.scale(rhs)
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, rhs: f64) -> HermitianOperator {
        self.scale(rhs)
    }
}

/// Non-negative trace-one Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    op: HermitianOperator,
}

impl DensityState {
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        let op = HermitianOperator::from_matrix(m)?;
        let tr = op.trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let lo = op.min_eigenvalue();
        if lo < -1e-12 {
            return Err(Error::InvalidState(format!("negative eigenvalue {lo:e}")));
        }
        Ok(Self { op })
    }

    /// Pure state `|v⟩⟨v|` for a nonzero vector (normalized here).
    pub fn pure(v: &CVector) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0) {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Ok(Self {
            op: HermitianOperator::projector(&(v / Complex64::new(n, 0.0)), 1.0),
        })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            op: HermitianOperator::identity(dim).scale(1.0 / dim as f64),
        }
    }

    /// Seeded Wishart-type state `G G† / tr(G G†)` with complex Gaussian `G`.
    pub fn random(dim: usize, seed: u64) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let w = &g * g.adjoint();
        let tr: f64 = w.diagonal().iter().map(|z| z.re).sum();
        Self {
            op: HermitianOperator {
                m: symmetrize(w / Complex64::new(tr, 0.0)),
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn as_operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    /// `tr(A²θ) − tr(Aθ)²`.
    pub fn variance(&self, a: &HermitianOperator) -> Result<f64> {
        let mean = a.expectation(self)?;
        Ok(a.square().expectation(self)? - mean * mean)
    }
}

/// Seeded random Hermitian matrix with Gaussian entries, for tests and benches.
pub fn random_hermitian(dim: usize, seed: u64) -> HermitianOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    HermitianOperator {
        m: symmetrize((&g + g.adjoint()) * Complex64::new(0.5, 0.0)),
    }
}
