use std::f64::consts::PI;

use super::SpherePoint;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes in decreasing order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 1..n {
        let jf = j as f64;
        let p2 = ((2.0 * jf + 1.0) * x * p1 - jf * p0) / (jf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// One latitude ring of a product grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ring {
    pub theta: f64,
    pub cos_theta: f64,
    pub sin_theta: f64,
    /// Gauss weight divided by two: the rings' weights sum to one.
    pub weight: f64,
}

/// Product rule: Gauss-Legendre in `cos θ` times equispaced `φ`.
///
/// Integrates every spherical harmonic of degree `<= exact_degree` exactly
/// against the normalized area measure. Nodes are stored ring-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    exact_degree: usize,
    rings: Vec<Ring>,
    n_phi: usize,
}

impl QuadratureGrid {
    pub fn build(min_exact_degree: usize) -> Self {
        let d = min_exact_degree;
        let n_theta = (d + 2) / 2;
        let (x, w) = gauss_legendre(n_theta);
        let rings = x
            .iter()
            .zip(&w)
            .map(|(&c, &wt)| {
                let theta = c.clamp(-1.0, 1.0).acos();
                Ring {
                    theta,
                    cos_theta: c,
                    sin_theta: (1.0 - c * c).max(0.0).sqrt(),
                    weight: 0.5 * wt,
                }
            })
            .collect();
        Self {
            exact_degree: d,
            rings,
            n_phi: d + 1,
        }
    }

    pub fn exact_degree(&self) -> usize {
        self.exact_degree
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn len(&self) -> usize {
        self.rings.len() * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn phi(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_phi as f64
    }

    pub fn node(&self, index: usize) -> SpherePoint {
        let ring = &self.rings[index / self.n_phi];
        SpherePoint {
            theta: ring.theta,
            phi: self.phi(index % self.n_phi),
        }
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.rings[index / self.n_phi].weight / self.n_phi as f64
    }

    pub fn nodes(&self) -> Vec<SpherePoint> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// `∫ f dσ` from samples at the nodes.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        assert_eq!(samples.len(), self.len(), "sample count does not match grid");
        samples
            .chunks(self.n_phi)
            .zip(&self.rings)
            .map(|(row, ring)| ring.weight * row.iter().sum::<f64>() / self.n_phi as f64)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_monomials() {
        let (x, w) = gauss_legendre(6);
        for p in 0..12 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "degree {p}: {q} vs {exact}");
        }
    }

    #[test]
    fn weights_sum_to_one() {
        for d in [0, 1, 5, 17, 64] {
            let g = QuadratureGrid::build(d);
            assert!(g.exact_degree() >= d);
            let s: f64 = g.weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-13);
            assert!(g.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn fourth_moment_of_z() {
        // ∫ z^4 dσ = ∫_0^1 (1-2u)^4 du = 1/5
        let g = QuadratureGrid::build(4);
        let samples: Vec<f64> = g.nodes().iter().map(|p| p.theta.cos().powi(4)).collect();
        assert!((g.integrate(&samples) - 0.2).abs() < 1e-13);
    }

    #[test]
    fn build_is_deterministic() {
        assert_eq!(QuadratureGrid::build(23), QuadratureGrid::build(23));
    }
}
