use super::field::{laplacian, PotentialField};
use super::grid::SphereGrid;
use crate::error::{Error, Result};

/// A Kähler metric `ω_φ = ω_KE + (i/2)∂∂̄φ` in the class of the round
/// metric, described through its potential.
#[derive(Debug, Clone)]
pub struct MetricState {
    /// Potential relative to the round metric.
    pub potential: PotentialField,
    /// `ω_φ / ω_KE = 1 + Δφ`.
    pub volume_ratio: PotentialField,
    /// Ricci potential, `Ric(ω_φ) - ω_φ = (i/2)∂∂̄h`, `∫e^h ω_φ = V`.
    pub ricci_potential: PotentialField,
    /// Constant `c` in `h = -log ρ - φ + c`.
    pub normalization_constant: f64,
}

impl MetricState {
    /// The round metric itself.
    pub fn round(grid: &SphereGrid) -> Self {
        MetricState {
            potential: PotentialField::zero(grid),
            volume_ratio: PotentialField::constant(grid, 1.0),
            ricci_potential: PotentialField::zero(grid),
            normalization_constant: 0.0,
        }
    }

    /// `(1/V) ∫ ρ dA`, which must be one.
    pub fn volume_defect(&self, grid: &SphereGrid) -> f64 {
        self.volume_ratio.mean(grid) - 1.0
    }

    /// `(1/V) ∫ e^h ρ dA - 1`.
    pub fn normalization_defect(&self, grid: &SphereGrid) -> f64 {
        let e: Vec<f64> = self
            .ricci_potential
            .values()
            .iter()
            .zip(self.volume_ratio.values())
            .map(|(h, r)| h.exp() * r)
            .collect();
        grid.mean(&e) - 1.0
    }
}

/// Returns `Err(NotInKahlerCone)` unless every node value is positive.
pub fn check_positive(rho: &[f64]) -> Result<()> {
    let (node, min_value) = rho
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, 1.0));
    if min_value > 0.0 {
        Ok(())
    } else {
        Err(Error::NotInKahlerCone { min_value, node })
    }
}

/// `log((1/V) ∫ e^{f} ρ dA)` evaluated with the maximum of `f` factored out.
pub fn log_mean_exp(grid: &SphereGrid, f: &[f64], rho: &[f64]) -> f64 {
    let m = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = grid
        .weights()
        .iter()
        .zip(f.iter().zip(rho))
        .map(|(w, (x, r))| w * (x - m).exp() * r)
        .sum();
    m + (s / grid.area()).ln()
}

/// Volume ratio and normalized Ricci potential of `ω_φ`.
pub fn metric_from_potential(phi: &PotentialField, grid: &SphereGrid) -> Result<MetricState> {
    let lap = laplacian(phi, grid);
    let volume_ratio = lap.add_constant(1.0);
    check_positive(volume_ratio.values())?;

    // e^h ρ = e^{-φ + c}
    let neg_phi: Vec<f64> = phi.values().iter().map(|v| -v).collect();
    let ones = vec![1.0; grid.node_count()];
    let c = -log_mean_exp(grid, &neg_phi, &ones);
    let h = volume_ratio.map(grid, |r| -r.ln()).sub(phi).add_constant(c);
    Ok(MetricState {
        potential: phi.clone(),
        volume_ratio,
        ricci_potential: h,
        normalization_constant: c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::field::inverse_laplacian;

    fn p2(mu: f64) -> f64 {
        1.5 * mu * mu - 0.5
    }

    #[test]
    fn round_metric_is_einstein() {
        let g = SphereGrid::new(16).unwrap();
        let m = metric_from_potential(&PotentialField::zero(&g), &g).unwrap();
        assert!(m.volume_ratio.values().iter().all(|&r| r == 1.0));
        assert!(m.ricci_potential.sup_norm() == 0.0);
        assert_eq!(m.normalization_constant, 0.0);
    }

    #[test]
    fn first_order_ricci_potential() {
        let g = SphereGrid::new(48).unwrap();
        let eps = 1e-3;
        let phi = PotentialField::from_fn(&g, |m| eps * p2(m));
        let m = metric_from_potential(&phi, &g).unwrap();
        // h ≈ -φ - Δφ = 2εP₂
        let expected = PotentialField::from_fn(&g, |m| 2.0 * eps * p2(m));
        let diff = m.ricci_potential.sub(&expected);
        let coeff_norm = diff.coeffs().iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!(coeff_norm < 10.0 * eps * eps, "{coeff_norm}");
        assert!(m.volume_defect(&g).abs() < 1e-12);
        assert!(m.normalization_defect(&g).abs() < 1e-12);
    }

    #[test]
    fn detects_cone_violation() {
        let g = SphereGrid::new(32).unwrap();
        // 1 + Δ(aP₂) = 1 - 3aP₂, min at μ=±1 is 1 - 3a
        let phi = PotentialField::from_fn(&g, |m| (1.1 / 3.0) * p2(m));
        match metric_from_potential(&phi, &g) {
            Err(Error::NotInKahlerCone { min_value, .. }) => {
                assert!(min_value < -0.09 && min_value > -0.1);
            }
            other => panic!("expected cone violation, got {other:?}"),
        }
    }

    #[test]
    fn potential_recovered_from_volume_ratio() {
        let g = SphereGrid::new(40).unwrap();
        let phi = PotentialField::from_fn(&g, |m| 0.1 * (2.0 * m).cos() + 0.05 * m.powi(3));
        let m = metric_from_potential(&phi, &g).unwrap();
        let back = inverse_laplacian(&m.volume_ratio.add_constant(-1.0), &g);
        let diff = phi.sub(&back);
        assert!(diff.osc() < 1e-8 * phi.sup_norm());
    }
}
