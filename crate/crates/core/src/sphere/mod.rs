//! Function algebra on the two-sphere.
//!
//! The sphere carries the symplectic form `ω = ½·dA` (outward orientation),
//! so its total symplectic area is `2π`, and the metric `g = ½·(round metric)`.
//! With these conventions the positive Laplacian has eigenvalue `2l(l+1)` on
//! degree-`l` harmonics, `{x, y} = 2z` cyclically and `|∇z|² = 2(1 - z²)`.

pub(crate) mod function;
mod grid;
pub mod harmonics;
mod spec;

pub use function::{ComplexFunction, SphereFunction};
pub use grid::{gauss_legendre, QuadratureGrid, Ring};
pub use spec::parse_function;

use std::f64::consts::PI;

/// Normalization ledger shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NormalizationConvention;

impl NormalizationConvention {
    /// Symplectic volume `Vol(S², ω)`.
    pub const TOTAL_AREA: f64 = 2.0 * PI;
    /// Ratio between the working metric and the round metric.
    pub const METRIC_SCALE: f64 = 0.5;

    /// Eigenvalue of the positive Laplace-Beltrami operator on degree `l`.
    pub fn laplace_eigenvalue(l: usize) -> f64 {
        2.0 * (l * (l + 1)) as f64
    }

    /// Converts a round-sphere geodesic distance into working-metric units.
    pub fn metric_distance(round: f64) -> f64 {
        round * Self::METRIC_SCALE.sqrt()
    }
}

/// A point of the unit sphere in colatitude/longitude coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    pub theta: f64,
    pub phi: f64,
}

impl SpherePoint {
    /// Builds a point, wrapping `phi` into `[0, 2π)`. `theta` must lie in `[0, π]`.
    pub fn new(theta: f64, phi: f64) -> Self {
        assert!(
            (0.0..=PI).contains(&theta),
            "colatitude {theta} outside [0, π]"
        );
        let mut phi = phi.rem_euclid(2.0 * PI);
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        Self { theta, phi }
    }

    pub fn north() -> Self {
        Self { theta: 0.0, phi: 0.0 }
    }

    pub fn south() -> Self {
        Self { theta: PI, phi: 0.0 }
    }

    /// Projects a nonzero ambient vector onto the sphere.
    pub fn from_cartesian(v: [f64; 3]) -> Self {
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let z = (v[2] / r).clamp(-1.0, 1.0);
        let rho = (v[0] * v[0] + v[1] * v[1]).sqrt() / r;
        let theta = rho.atan2(z);
        let phi = if rho == 0.0 { 0.0 } else { v[1].atan2(v[0]) };
        Self::new(theta, phi)
    }

    pub fn to_cartesian(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Round-metric unit vectors `(ê_θ, ê_φ)`; `ê_θ × ê_φ` is the outward normal.
    pub fn frame(&self) -> ([f64; 3], [f64; 3]) {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        ([ct * cp, ct * sp, -st], [-sp, cp, 0.0])
    }

    /// Round geodesic distance.
    pub fn distance(&self, other: &SpherePoint) -> f64 {
        let a = self.to_cartesian();
        let b = other.to_cartesian();
        let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let c = cross(a, b);
        norm(c).atan2(dot)
    }

    /// Round exponential map: moves along `v = a·ê_θ + b·ê_φ` by its length.
    pub fn exp_round(&self, a: f64, b: f64) -> SpherePoint {
        let len = (a * a + b * b).sqrt();
        if len == 0.0 {
            return *self;
        }
        let p = self.to_cartesian();
        let (et, ep) = self.frame();
        let (s, c) = len.sin_cos();
        let mut q = [0.0; 3];
        for i in 0..3 {
            q[i] = c * p[i] + s * (a * et[i] + b * ep[i]) / len;
        }
        SpherePoint::from_cartesian(q)
    }
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}
