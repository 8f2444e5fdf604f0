//! The energies `I`, `J`, `F⁰`, `F` relative to a background metric in the
//! class of the round metric.
//!
//! In complex dimension one the mixed wedge sums collapse: both
//! `I_ω(φ)` and `2J_ω(φ)` equal the Dirichlet energy
//! `E(φ) = (1/V)∫ φ(-Δφ) dA`, independent of the background `ω`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sphere::metric::{check_positive, log_mean_exp};
use crate::sphere::{laplacian, metric_from_potential, MetricState, PotentialField, SphereGrid};
use crate::DIM;

/// All functional values of one potential against one background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub i: f64,
    pub j: f64,
    pub f: f64,
    pub f0: f64,
    /// `(1/V) ∫ φ ω^n`
    pub mean_term: f64,
    /// `log((1/V) ∫ e^{h-φ} ω^n)`
    pub log_term: f64,
    pub osc: f64,
}

impl FunctionalReport {
    pub const CSV_HEADER: [&'static str; 8] =
        ["tag", "I", "J", "F", "F0", "mean_term", "log_term", "osc"];

    pub fn csv_record(&self, tag: &str) -> [String; 8] {
        [
            tag.to_string(),
            format!("{:.15e}", self.i),
            format!("{:.15e}", self.j),
            format!("{:.15e}", self.f),
            format!("{:.15e}", self.f0),
            format!("{:.15e}", self.mean_term),
            format!("{:.15e}", self.log_term),
            format!("{:.15e}", self.osc),
        ]
    }

    /// `|I - 2J| / max(1, I)`; zero up to rounding in dimension one.
    pub fn sandwich_defect(&self) -> f64 {
        (self.i - 2.0 * self.j).abs() / self.i.max(1.0)
    }
}

/// `E(φ) = (1/V) Σ w_i φ_i (-Δφ)_i`.
pub fn dirichlet(phi: &PotentialField, grid: &SphereGrid) -> f64 {
    let lap = laplacian(phi, grid);
    -grid.mean_product(phi.values(), lap.values())
}

/// Spectral form of the Dirichlet energy, `Σ c_l² · l(l+1)/2 / (2l+1)`.
pub fn dirichlet_spectral(phi: &PotentialField) -> f64 {
    phi.coeffs()
        .iter()
        .enumerate()
        .map(|(l, c)| {
            let lf = l as f64;
            c * c * lf * (lf + 1.0) / 2.0 / (2.0 * lf + 1.0)
        })
        .sum()
}

pub fn osc(phi: &PotentialField) -> f64 {
    phi.osc()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IJ {
    pub i: f64,
    pub j: f64,
    /// `|I - (1/V)∫φ(ρ_ω - ρ_{ω_φ})dA|`.
    pub cross_check: f64,
}

fn shifted_metric(
    phi: &PotentialField,
    background: &MetricState,
    grid: &SphereGrid,
) -> Result<MetricState> {
    metric_from_potential(&background.potential.add(phi), grid)
}

/// `(I_ω(φ), J_ω(φ))` with the wedge-form cross-check of `I`.
pub fn compute_i_j(
    phi: &PotentialField,
    background: &MetricState,
    grid: &SphereGrid,
) -> Result<IJ> {
    let shifted = shifted_metric(phi, background, grid)?;
    let e = dirichlet(phi, grid);
    let drho = background.volume_ratio.sub(&shifted.volume_ratio);
    let wedge = grid.mean_product(phi.values(), drho.values());
    Ok(IJ {
        i: e,
        j: 0.5 * e,
        cross_check: (e - wedge).abs(),
    })
}

/// Full functional report of `φ` against `background`.
pub fn compute_f(
    phi: &PotentialField,
    background: &MetricState,
    grid: &SphereGrid,
) -> Result<FunctionalReport> {
    let shifted_rho = background.volume_ratio.add(&laplacian(phi, grid));
    check_positive(shifted_rho.values())?;

    let i = dirichlet(phi, grid);
    let j = 0.5 * i;
    let rho = background.volume_ratio.values();
    let mean_term = grid.mean_product(phi.values(), rho);
    let exponent: Vec<f64> = background
        .ricci_potential
        .values()
        .iter()
        .zip(phi.values())
        .map(|(h, p)| h - p)
        .collect();
    let log_term = log_mean_exp(grid, &exponent, rho);
    let f0 = j - mean_term;
    Ok(FunctionalReport {
        i,
        j,
        f: f0 - log_term,
        f0,
        mean_term,
        log_term,
        osc: phi.osc(),
    })
}

/// Residuals of the cocycle identities
/// `F_ω(φ₁+φ₂) = F_ω(φ₁) + F_{ω_{φ₁}}(φ₂)` and the same for `F⁰`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CocycleResidual {
    pub f: f64,
    pub f0: f64,
}

pub fn cocycle_residual(
    phi1: &PotentialField,
    phi2: &PotentialField,
    background: &MetricState,
    grid: &SphereGrid,
) -> Result<CocycleResidual> {
    let total = compute_f(&phi1.add(phi2), background, grid)?;
    let first = compute_f(phi1, background, grid)?;
    let mid = shifted_metric(phi1, background, grid)?;
    let second = compute_f(phi2, &mid, grid)?;
    Ok(CocycleResidual {
        f: (total.f - first.f - second.f).abs(),
        f0: (total.f0 - first.f0 - second.f0).abs(),
    })
}

/// Left and right hand sides of the continuity bounds
/// `|ΔJ| ≤ osc(φ₁-φ₀)` and `|Δ(I-J)| ≤ n·osc(φ₁-φ₀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationBounds {
    pub lhs_j: f64,
    pub lhs_ij: f64,
    pub rhs: f64,
}

impl OscillationBounds {
    pub fn margin_j(&self) -> f64 {
        self.rhs - self.lhs_j
    }

    pub fn margin_ij(&self) -> f64 {
        DIM as f64 * self.rhs - self.lhs_ij
    }
}

pub fn oscillation_bounds_check(
    phi0: &PotentialField,
    phi1: &PotentialField,
    background: &MetricState,
    grid: &SphereGrid,
) -> Result<OscillationBounds> {
    let a = compute_i_j(phi0, background, grid)?;
    let b = compute_i_j(phi1, background, grid)?;
    Ok(OscillationBounds {
        lhs_j: (b.j - a.j).abs(),
        lhs_ij: ((b.i - b.j) - (a.i - a.j)).abs(),
        rhs: phi1.sub(phi0).osc(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2(mu: f64) -> f64 {
        1.5 * mu * mu - 0.5
    }

    #[test]
    fn dirichlet_closed_forms() {
        let g = SphereGrid::new(32).unwrap();
        assert_eq!(dirichlet(&PotentialField::constant(&g, 2.0), &g), 0.0);
        let eps = 0.3;
        let mu = PotentialField::from_fn(&g, |m| eps * m);
        assert!((dirichlet(&mu, &g) - eps * eps / 3.0).abs() < 1e-15);
        let q = PotentialField::from_fn(&g, |m| eps * p2(m));
        assert!((dirichlet(&q, &g) - 3.0 * eps * eps / 5.0).abs() < 1e-15);
        assert!((dirichlet_spectral(&q) - 3.0 * eps * eps / 5.0).abs() < 1e-15);
    }

    #[test]
    fn constants_have_zero_energy() {
        let g = SphereGrid::new(16).unwrap();
        let round = MetricState::round(&g);
        let c = PotentialField::constant(&g, 0.7);
        let ij = compute_i_j(&c, &round, &g).unwrap();
        assert_eq!((ij.i, ij.j), (0.0, 0.0));
        let rep = compute_f(&c, &round, &g).unwrap();
        assert!(rep.f.abs() < 1e-15);
    }

    #[test]
    fn f_of_linear_potential() {
        let g = SphereGrid::new(64).unwrap();
        let round = MetricState::round(&g);
        for eps in [0.1, 0.5, 1.0] {
            let phi = PotentialField::from_fn(&g, |m| eps * m);
            let rep = compute_f(&phi, &round, &g).unwrap();
            let exact = eps * eps / 6.0 - (eps.sinh() / eps).ln();
            assert!((rep.f - exact).abs() < 1e-14, "{} vs {}", rep.f, exact);
            assert!((rep.j - eps * eps / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn wedge_cross_check() {
        let g = SphereGrid::new(64).unwrap();
        let bg = metric_from_potential(&PotentialField::from_fn(&g, |m| 0.1 * p2(m)), &g).unwrap();
        let phi = PotentialField::from_fn(&g, |m| 0.05 * (3.0 * m).sin() + 0.02 * m * m);
        let ij = compute_i_j(&phi, &bg, &g).unwrap();
        assert!(ij.cross_check < 1e-14);
    }

    #[test]
    fn cocycle_trivial_cases() {
        let g = SphereGrid::new(32).unwrap();
        let round = MetricState::round(&g);
        let phi = PotentialField::from_fn(&g, |m| 0.1 * m + 0.05 * p2(m));
        let zero = PotentialField::zero(&g);
        let r = cocycle_residual(&phi, &zero, &round, &g).unwrap();
        assert!(r.f < 1e-15 && r.f0 < 1e-15);
        let a = PotentialField::constant(&g, 0.3);
        let b = PotentialField::constant(&g, -1.1);
        let r = cocycle_residual(&a, &b, &round, &g).unwrap();
        assert!(r.f < 1e-15 && r.f0 < 1e-15);
    }

    #[test]
    fn oscillation_examples() {
        let g = SphereGrid::new(64).unwrap();
        let round = MetricState::round(&g);
        let eps = 0.2;
        let phi = PotentialField::from_fn(&g, |m| eps * m);
        let zero = PotentialField::zero(&g);
        let b = oscillation_bounds_check(&zero, &phi, &round, &g).unwrap();
        assert!((b.lhs_j - eps * eps / 6.0).abs() < 1e-15);
        assert!((b.lhs_ij - eps * eps / 6.0).abs() < 1e-15);
        // extrema at the poles
        assert!((b.rhs - 2.0 * eps).abs() < 1e-13);
        assert!(b.margin_j() > 0.0 && b.margin_ij() > 0.0);
        let same = oscillation_bounds_check(&phi, &phi, &round, &g).unwrap();
        assert_eq!((same.lhs_j, same.lhs_ij, same.rhs), (0.0, 0.0, 0.0));

        let q = PotentialField::from_fn(&g, |m| eps * p2(m));
        // max 1 at the poles, min -1/2 at the equator, which no even-count
        // Gauss grid contains
        assert!((osc(&q) - 1.5 * eps).abs() < 1e-13);
    }

    #[test]
    fn csv_row_layout() {
        let g = SphereGrid::new(16).unwrap();
        let rep = compute_f(&PotentialField::zero(&g), &MetricState::round(&g), &g).unwrap();
        let row = rep.csv_record("zero");
        assert_eq!(row.len(), FunctionalReport::CSV_HEADER.len());
        assert_eq!(row[0], "zero");
    }
}
