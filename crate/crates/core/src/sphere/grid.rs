//! Gauss–Legendre collocation grid for circle-invariant functions on the
//! unit round sphere.
//!
//! A circle-invariant function is a function of `μ = cos θ` only. Area
//! integrals reduce to `2π ∫ f(μ) dμ`, so the quadrature weights below carry
//! the azimuthal factor and sum to the sphere area `4π`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Smallest admissible node count.
pub const MIN_NODES: usize = 8;

/// Total area of the unit sphere.
pub const SPHERE_AREA: f64 = 4.0 * PI;

#[derive(Debug, Clone)]
pub struct SphereGrid {
    node_count: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    max_degree: usize,
    // P_l(μ_i), rows = nodes, cols = degrees
    synthesis: DMatrix<f64>,
    // (2l+1)/2 · w_i · P_l(μ_i), rows = degrees, cols = nodes
    analysis: DMatrix<f64>,
    // P_l'(μ_i)
    derivative: DMatrix<f64>,
}

impl SphereGrid {
    /// Builds an `n`-node grid with `L = n - 1`.
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::Config(format!(
                "grid needs at least {MIN_NODES} nodes, got {n}"
            )));
        }
        let (nodes, gl_weights) = gauss_legendre(n);
        let max_degree = n - 1;

        let mut synthesis = DMatrix::zeros(n, n);
        let mut derivative = DMatrix::zeros(n, n);
        for (i, &mu) in nodes.iter().enumerate() {
            let (p, dp) = legendre_table(max_degree, mu);
            for l in 0..n {
                synthesis[(i, l)] = p[l];
                derivative[(i, l)] = dp[l];
            }
        }
        let mut analysis = DMatrix::zeros(n, n);
        for l in 0..n {
            let norm = (2 * l + 1) as f64 / 2.0;
            for i in 0..n {
                analysis[(l, i)] = norm * gl_weights[i] * synthesis[(i, l)];
            }
        }
        let weights = gl_weights.iter().map(|w| 2.0 * PI * w).collect();

        Ok(SphereGrid {
            node_count: n,
            nodes,
            weights,
            max_degree,
            synthesis,
            analysis,
            derivative,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Quadrature weights in units of area.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn area(&self) -> f64 {
        SPHERE_AREA
    }

    /// `∫ f dA` over the sphere.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.node_count);
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// `(1/V) ∫ f dA`.
    pub fn mean(&self, values: &[f64]) -> f64 {
        self.integrate(values) / SPHERE_AREA
    }

    /// `(1/V) ∫ f g dA`.
    pub fn mean_product(&self, f: &[f64], g: &[f64]) -> f64 {
        let s: f64 = self
            .weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| w * a * b)
            .sum();
        s / SPHERE_AREA
    }

    /// Node values to Legendre coefficients.
    pub fn analyze(&self, values: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(values);
        (&self.analysis * v).as_slice().to_vec()
    }

    /// Legendre coefficients to node values.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let c = DVector::from_column_slice(coeffs);
        (&self.synthesis * c).as_slice().to_vec()
    }

    /// `d/dμ` of the series at the nodes.
    pub fn derivative_values(&self, coeffs: &[f64]) -> Vec<f64> {
        let c = DVector::from_column_slice(coeffs);
        (&self.derivative * c).as_slice().to_vec()
    }

    /// `P_l(μ_i)`.
    pub fn legendre(&self, node: usize, degree: usize) -> f64 {
        self.synthesis[(node, degree)]
    }

    /// Index of the node mirrored through the equator.
    pub fn mirror(&self, node: usize) -> usize {
        self.node_count - 1 - node
    }

    /// Eigenvalue of the complex Laplacian on `P_l`.
    pub fn laplacian_eigenvalue(degree: usize) -> f64 {
        let l = degree as f64;
        -l * (l + 1.0) / 2.0
    }
}

/// Evaluates a Legendre series at an arbitrary `μ` (Clenshaw recurrence).
pub fn eval_series(coeffs: &[f64], mu: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for l in (1..coeffs.len()).rev() {
        let lf = l as f64;
        let alpha = (2.0 * lf + 1.0) / (lf + 1.0) * mu;
        let beta = -(lf + 1.0) / (lf + 2.0);
        let b0 = coeffs[l] + alpha * b1 + beta * b2;
        b2 = b1;
        b1 = b0;
    }
    match coeffs.first() {
        Some(&c0) => c0 + mu * b1 - 0.5 * b2,
        None => 0.0,
    }
}

/// `P_0..P_L` and their derivatives at `mu` (|mu| < 1).
pub fn legendre_table(max_degree: usize, mu: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; max_degree + 1];
    let mut dp = vec![0.0; max_degree + 1];
    p[0] = 1.0;
    if max_degree >= 1 {
        p[1] = mu;
        dp[1] = 1.0;
    }
    for l in 1..max_degree {
        let lf = l as f64;
        p[l + 1] = ((2.0 * lf + 1.0) * mu * p[l] - lf * p[l - 1]) / (lf + 1.0);
        // P'_{l+1} = P'_{l-1} + (2l+1) P_l
        dp[l + 1] = dp[l - 1] + (2.0 * lf + 1.0) * p[l];
    }
    (p, dp)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`.
///
/// The positive half is computed by Newton iteration and mirrored, so
/// `nodes[n-1-i] == -nodes[i]` and the weights are symmetric bit for bit.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n / 2;
    for k in 0..half {
        // k-th largest root
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - k] = x;
        nodes[k] = -x;
        weights[n - 1 - k] = w;
        weights[k] = w;
    }
    if n % 2 == 1 {
        let (_, dp) = legendre_with_derivative(n, 0.0);
        nodes[half] = 0.0;
        weights[half] = 2.0 / (dp * dp);
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(l: usize, mu: f64) -> f64 {
        legendre_table(l, mu).0[l]
    }

    #[test]
    fn rejects_small_grids() {
        assert!(matches!(SphereGrid::new(7), Err(Error::Config(_))));
        assert!(SphereGrid::new(8).is_ok());
    }

    #[test]
    fn weights_sum_to_sphere_area() {
        for n in [8, 9, 64, 128, 257] {
            let g = SphereGrid::new(n).unwrap();
            let s: f64 = g.weights().iter().sum();
            assert!((s - SPHERE_AREA).abs() / SPHERE_AREA < 1e-12, "n={n}: {s}");
            assert_eq!(g.max_degree(), n - 1);
        }
    }

    #[test]
    fn polynomial_moments_are_exact() {
        let g = SphereGrid::new(64).unwrap();
        let mu2: Vec<f64> = g.nodes().iter().map(|m| m * m).collect();
        assert!((g.integrate(&mu2) - 4.0 * PI / 3.0).abs() < 1e-12);

        let p35: Vec<f64> = g.nodes().iter().map(|&m| p(3, m) * p(5, m)).collect();
        assert!(g.integrate(&p35).abs() < 1e-12);

        // degree 2N-2 = 126 is still integrated exactly
        let high: Vec<f64> = g.nodes().iter().map(|m| m.powi(126)).collect();
        let exact = 2.0 * PI * 2.0 / 127.0;
        assert!((g.integrate(&high) - exact).abs() / exact < 1e-12);
    }

    #[test]
    fn nodes_are_mirror_symmetric() {
        let g = SphereGrid::new(33).unwrap();
        for i in 0..g.node_count() {
            assert_eq!(g.nodes()[i], -g.nodes()[g.mirror(i)]);
            assert_eq!(g.weights()[i], g.weights()[g.mirror(i)]);
        }
        assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn clenshaw_matches_recurrence() {
        let coeffs = [0.3, -1.0, 0.25, 0.0, 2.0, -0.7];
        for &mu in &[-0.99, -0.3, 0.0, 0.41, 1.0] {
            let table = legendre_table(5, mu).0;
            let direct: f64 = coeffs.iter().zip(&table).map(|(c, pl)| c * pl).sum();
            assert!((eval_series(&coeffs, mu) - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn transform_round_trip() {
        let g = SphereGrid::new(40).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|m| (3.0 * m).sin() + m.exp()).collect();
        let back = g.synthesize(&g.analyze(&vals));
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        }
    }
}
