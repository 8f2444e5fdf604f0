//! Dense collocation solves for operators of the form `a(μ)·Δ + b(μ)`.
//!
//! Unknowns are Legendre coefficients of the active parity sector; equations
//! are imposed at the matching collocation nodes (the nodes with `μ ≥ 0` in
//! the even sector, all nodes otherwise).

use nalgebra::{DMatrix, DVector};

use crate::sphere::{Parity, SphereGrid};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sector {
    degrees: Vec<usize>,
    nodes: Vec<usize>,
    even: bool,
}

impl Sector {
    pub fn full(grid: &SphereGrid) -> Self {
        let n = grid.node_count();
        Sector {
            degrees: (0..n).collect(),
            nodes: (0..n).collect(),
            even: false,
        }
    }

    pub fn even(grid: &SphereGrid) -> Self {
        let n = grid.node_count();
        Sector {
            degrees: (0..n).step_by(2).collect(),
            nodes: (n / 2..n).collect(),
            even: true,
        }
    }

    pub fn for_parity(grid: &SphereGrid, parity: Parity) -> Self {
        match parity {
            Parity::Even => Self::even(grid),
            _ => Self::full(grid),
        }
    }

    pub fn is_even(&self) -> bool {
        self.even
    }

    pub fn size(&self) -> usize {
        self.degrees.len()
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }
}

/// Result of a collocation solve.
#[derive(Debug, Clone)]
pub struct LinearSolve {
    /// Full-length Legendre coefficients of the solution.
    pub coeffs: Vec<f64>,
    /// 2-norm condition number, when requested. `INFINITY` for an exactly
    /// singular matrix.
    pub condition: Option<f64>,
}

pub fn assemble(grid: &SphereGrid, sector: &Sector, a: &[f64], b: &[f64]) -> DMatrix<f64> {
    let m = sector.size();
    DMatrix::from_fn(m, m, |r, c| {
        let i = sector.nodes[r];
        let l = sector.degrees[c];
        grid.legendre(i, l) * (a[i] * SphereGrid::laplacian_eigenvalue(l) + b[i])
    })
}

/// Solves `(a Δ + b) x = rhs` at the sector's nodes. Returns `None` when LU
/// factorization breaks down.
pub fn solve_pointwise(
    grid: &SphereGrid,
    sector: &Sector,
    a: &[f64],
    b: &[f64],
    rhs: &[f64],
    with_condition: bool,
) -> Option<LinearSolve> {
    let matrix = assemble(grid, sector, a, b);
    let condition = with_condition.then(|| condition_number(&matrix));
    let r = DVector::from_iterator(sector.size(), sector.nodes.iter().map(|&i| rhs[i]));
    let x = matrix.lu().solve(&r)?;
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut coeffs = vec![0.0; grid.node_count()];
    for (k, &l) in sector.degrees.iter().enumerate() {
        coeffs[l] = x[k];
    }
    Some(LinearSolve { coeffs, condition })
}

pub fn condition_number(matrix: &DMatrix<f64>) -> f64 {
    let sv = matrix.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
