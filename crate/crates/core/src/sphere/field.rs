use std::io::Write;

use serde::{Deserialize, Serialize};

use super::grid::SphereGrid;
use crate::error::{Error, Result};

/// Reflection symmetry `μ ↦ -μ` of a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

impl Parity {
    fn sum(self, other: Parity) -> Parity {
        if self == other {
            self
        } else {
            Parity::Mixed
        }
    }

    fn product(self, other: Parity) -> Parity {
        match (self, other) {
            (Parity::Mixed, _) | (_, Parity::Mixed) => Parity::Mixed,
            (a, b) if a == b => Parity::Even,
            _ => Parity::Odd,
        }
    }
}

/// A circle-invariant scalar field on the sphere, stored both as values at
/// the collocation nodes and as Legendre coefficients `c_0..c_L`.
///
/// The two representations are kept in sync: the field is always the
/// degree-`L` interpolant of its node values.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    values: Vec<f64>,
    coeffs: Vec<f64>,
    parity: Parity,
}

impl PotentialField {
    pub fn zero(grid: &SphereGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &SphereGrid, c: f64) -> Self {
        let n = grid.node_count();
        let mut coeffs = vec![0.0; n];
        coeffs[0] = c;
        PotentialField {
            values: vec![c; n],
            coeffs,
            parity: Parity::Even,
        }
    }

    /// Builds a field from node values. Exactly mirror-symmetric
    /// (antisymmetric) data is tagged even (odd) and the opposite-parity
    /// coefficients are set to zero.
    pub fn from_values(grid: &SphereGrid, values: Vec<f64>) -> Result<Self> {
        check_len(grid, values.len())?;
        let n = values.len();
        let even = (0..n).all(|i| values[i] == values[grid.mirror(i)]);
        let odd = !even && (0..n).all(|i| values[i] == -values[grid.mirror(i)]);
        let mut coeffs = grid.analyze(&values);
        let parity = if even {
            Parity::Even
        } else if odd {
            Parity::Odd
        } else {
            Parity::Mixed
        };
        zero_opposite(&mut coeffs, parity);
        Ok(PotentialField {
            values,
            coeffs,
            parity,
        })
    }

    /// Builds a field from Legendre coefficients; shorter vectors are
    /// zero-padded up to degree `L`.
    pub fn from_coeffs(grid: &SphereGrid, coeffs: Vec<f64>) -> Result<Self> {
        let n = grid.node_count();
        if coeffs.len() > n && coeffs[n..].iter().any(|&c| c != 0.0) {
            return Err(Error::Config(format!(
                "field of degree {} does not fit a grid of max degree {}",
                coeffs.len() - 1,
                grid.max_degree()
            )));
        }
        let mut coeffs = coeffs;
        coeffs.resize(n, 0.0);
        let odd_zero = coeffs.iter().skip(1).step_by(2).all(|&c| c == 0.0);
        let even_zero = coeffs.iter().step_by(2).all(|&c| c == 0.0);
        let parity = if odd_zero {
            Parity::Even
        } else if even_zero {
            Parity::Odd
        } else {
            Parity::Mixed
        };
        let values = grid.synthesize(&coeffs);
        Ok(PotentialField {
            values,
            coeffs,
            parity,
        })
    }

    pub fn from_fn(grid: &SphereGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&m| f(m)).collect();
        Self::from_values(grid, values).expect("length matches grid by construction")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Applies `f` pointwise at the nodes and re-projects.
    pub fn map(&self, grid: &SphereGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self::from_values(grid, values).expect("same grid")
    }

    /// Pointwise product, re-projected onto degree `L`.
    pub fn mul(&self, grid: &SphereGrid, other: &Self) -> Self {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        let mut out = Self::from_values(grid, values).expect("same grid");
        if out.parity == Parity::Mixed {
            out.parity = self.parity.product(other.parity);
            zero_opposite(&mut out.coeffs, out.parity);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, 1.0, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, 1.0, -1.0)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, other: &Self, a: f64, b: f64) -> Self {
        assert_eq!(self.len(), other.len(), "fields live on different grids");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| a * x + b * y)
            .collect();
        let parity = if a == 0.0 {
            other.parity
        } else if b == 0.0 {
            self.parity
        } else {
            self.parity.sum(other.parity)
        };
        PotentialField {
            values,
            coeffs,
            parity,
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        PotentialField {
            values: self.values.iter().map(|v| a * v).collect(),
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
            parity: self.parity,
        }
    }

    pub fn add_constant(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v += c);
        out.coeffs[0] += c;
        if out.parity == Parity::Odd && c != 0.0 {
            out.parity = Parity::Mixed;
        }
        out
    }

    /// Projection onto the even sector (`μ ↦ -μ` symmetric part).
    pub fn project_even(&self, grid: &SphereGrid) -> Self {
        let mut coeffs = self.coeffs.clone();
        zero_opposite(&mut coeffs, Parity::Even);
        Self::from_coeffs(grid, coeffs).expect("same grid")
    }

    /// Transfers the field to another grid by padding or truncating the
    /// Legendre coefficients.
    pub fn resample(&self, target: &SphereGrid) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(target.node_count(), 0.0);
        let mut out = Self::from_coeffs(target, coeffs).expect("resized to grid");
        if self.parity == Parity::Even {
            out.parity = Parity::Even;
        }
        out
    }

    /// Values at the poles `μ = 1` and `μ = -1`, where `P_l = 1` and
    /// `P_l = (-1)^l`. Gauss nodes miss the poles, and pole-concentrated
    /// fields take their extrema there.
    pub fn pole_values(&self) -> [f64; 2] {
        let north = self.coeffs.iter().sum();
        let south = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(l, c)| if l % 2 == 0 { *c } else { -c })
            .sum();
        [north, south]
    }

    /// Largest of `sign * f` over the nodes and poles, then refined by a
    /// golden-section search of the series around the best node.
    fn extremum(&self, sign: f64) -> f64 {
        let [north, south] = self.pole_values();
        let (best, node_best) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if sign * v > acc.1 { (i, sign * v) } else { acc });
        let poles = (sign * north).max(sign * south);
        if poles >= node_best || self.values.is_empty() {
            return sign * poles;
        }
        // Node i sits at μ = -cos ψ with (i+½)π/(n+½) < ψ < (i+1)π/(n+½),
        // so this bracket covers both neighbours.
        let step = std::f64::consts::PI / (self.values.len() as f64 + 0.5);
        let mut lo = ((best as f64 - 0.5) * step).max(0.0);
        let mut hi = ((best as f64 + 2.0) * step).min(std::f64::consts::PI);
        let at = |psi: f64| sign * super::grid::eval_series(&self.coeffs, -psi.cos());
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut a = hi - ratio * (hi - lo);
        let mut b = lo + ratio * (hi - lo);
        let (mut fa, mut fb) = (at(a), at(b));
        for _ in 0..48 {
            if fa > fb {
                hi = b;
                (b, fb) = (a, fa);
                a = hi - ratio * (hi - lo);
                fa = at(a);
            } else {
                lo = a;
                (a, fa) = (b, fb);
                b = lo + ratio * (hi - lo);
                fb = at(b);
            }
        }
        sign * node_best.max(fa).max(fb).max(poles)
    }

    /// Max over the sphere: nodes and poles, refined between nodes.
    pub fn max(&self) -> f64 {
        self.extremum(1.0)
    }

    pub fn min(&self) -> f64 {
        self.extremum(-1.0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.max().abs().max(self.min().abs())
    }

    /// Max of `|f|` over the nodes and poles only. Cheap, for step control.
    pub fn nodal_sup_norm(&self) -> f64 {
        let [north, south] = self.pole_values();
        self.values.iter().fold(north.abs().max(south.abs()), |m, v| m.max(v.abs()))
    }

    pub fn osc(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn mean(&self, grid: &SphereGrid) -> f64 {
        grid.mean(&self.values)
    }

    pub fn to_record(&self, grid: &SphereGrid) -> FieldRecord {
        FieldRecord {
            n: grid.node_count(),
            l: grid.max_degree(),
            parity: self.parity,
            coefficients: self.coeffs.clone(),
        }
    }

    pub fn from_record(grid: &SphereGrid, record: &FieldRecord) -> Result<Self> {
        let mut field = Self::from_coeffs(grid, record.coefficients.clone())?;
        if record.parity == Parity::Even && field.parity != Parity::Even {
            field = field.project_even(grid);
        }
        Ok(field)
    }

    /// Node-value dump with columns `mu,value`.
    pub fn write_csv<W: Write>(&self, grid: &SphereGrid, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["mu", "value"])?;
        for (mu, v) in grid.nodes().iter().zip(&self.values) {
            w.write_record([format!("{mu:.17e}"), format!("{v:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Flat serialized form of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub parity: Parity,
    pub coefficients: Vec<f64>,
}

fn check_len(grid: &SphereGrid, len: usize) -> Result<()> {
    if len != grid.node_count() {
        return Err(Error::GridMismatch {
            expected: grid.node_count(),
            got: len,
        });
    }
    Ok(())
}

fn zero_opposite(coeffs: &mut [f64], parity: Parity) {
    match parity {
        Parity::Even => coeffs.iter_mut().skip(1).step_by(2).for_each(|c| *c = 0.0),
        Parity::Odd => coeffs.iter_mut().step_by(2).for_each(|c| *c = 0.0),
        Parity::Mixed => {}
    }
}

/// Complex (∂̄-) Laplacian of the round metric: `c_l ↦ -l(l+1)/2 · c_l`.
///
/// This is half the Laplace–Beltrami operator, so `-Δ` has eigenvalue 1 on
/// the degree-one harmonics.
pub fn laplacian(field: &PotentialField, grid: &SphereGrid) -> PotentialField {
    let coeffs: Vec<f64> = field
        .coeffs
        .iter()
        .enumerate()
        .map(|(l, c)| SphereGrid::laplacian_eigenvalue(l) * c)
        .collect();
    let mut out = PotentialField::from_coeffs(grid, coeffs).expect("same grid");
    if field.parity != Parity::Mixed {
        out.parity = field.parity;
    }
    out
}

/// Solves `Δφ = f` on the mean-zero sector; the mean of `f` is discarded
/// and the result has zero mean.
pub fn inverse_laplacian(field: &PotentialField, grid: &SphereGrid) -> PotentialField {
    let coeffs: Vec<f64> = field
        .coeffs
        .iter()
        .enumerate()
        .map(|(l, c)| {
            if l == 0 {
                0.0
            } else {
                c / SphereGrid::laplacian_eigenvalue(l)
            }
        })
        .collect();
    let mut out = PotentialField::from_coeffs(grid, coeffs).expect("same grid");
    if field.parity != Parity::Mixed {
        out.parity = field.parity;
    }
    out
}

/// `|∇f|²` with respect to the metric `ρ·ω_KE`.
///
/// With `ρ ≡ 1` this is `½(1-μ²) f'(μ)²`, normalized so that
/// `(1/V)∫|∇f|² dA = (1/V)∫ f(-Δf) dA`.
pub fn gradient_norm_sq(
    f: &PotentialField,
    rho: &PotentialField,
    grid: &SphereGrid,
) -> Result<PotentialField> {
    check_len(grid, f.len())?;
    check_len(grid, rho.len())?;
    if let Some((node, &min_value)) = rho
        .values()
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
    {
        if min_value <= 0.0 {
            return Err(Error::NotInKahlerCone { min_value, node });
        }
    }
    let df = grid.derivative_values(f.coeffs());
    let values = grid
        .nodes()
        .iter()
        .zip(df.iter().zip(rho.values()))
        .map(|(mu, (d, r))| 0.5 * (1.0 - mu * mu) * d * d / r)
        .collect();
    PotentialField::from_values(grid, values)
}
