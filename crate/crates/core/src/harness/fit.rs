//! Fitting the empirical constants from sweep reports.

use super::constants::VerificationConstants;
use super::sweep::SweepReport;
use crate::error::{Error, Result};
use crate::DIM;

/// Headroom applied to every fitted upper bound.
pub const SAFETY: f64 = 1.05;

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

/// Constants fitted from a certified even-family sweep and a dilation
/// sweep, starting from `base` for everything that is not fitted.
///
/// Upper bounds get [`SAFETY`] headroom. `C₂` is the largest value that
/// keeps every row's bound `F ≥ C₂ J/(2 osc φ + 2)^α - (2/n)C₁` valid,
/// shrunk by the same factor.
pub fn fit_constants(
    even: &SweepReport,
    mobius: Option<&SweepReport>,
    base: &VerificationConstants,
) -> Result<VerificationConstants> {
    if even.samples.is_empty() {
        return Err(Error::Config("even sweep has no flow samples to fit from".into()));
    }
    let gamma = base.gamma();
    let alpha = base.alpha();
    let n = DIM as f64;
    let mut c = base.clone();
    c.grid = even.config.grid;

    c.c_lemma5 = SAFETY * max_of(even.samples.iter().map(|s| s.lemma5_ratio));
    c.b2_hat = SAFETY * max_of(even.samples.iter().map(|s| s.h1_holder / (1.0 - s.t).powf(gamma)));
    c.c_hat = SAFETY
        * max_of(even.samples.iter().filter_map(|s| {
            let data = s.h1_sup + s.h1_holder;
            (data > 0.0).then(|| s.lemma3_proxy / data)
        }));
    c.c1 = SAFETY * max_of(even.rows.iter().filter_map(|r| r.c1_row));
    c.k_bound = SAFETY * max_of(even.rows.iter().filter_map(|r| r.k_max));
    let c2 = even
        .rows
        .iter()
        .filter_map(|r| {
            let (f, j, osc) = (r.f?, r.j?, r.osc?);
            (j > 0.0).then(|| (f + 2.0 * c.c1 / n) * (2.0 * osc + 2.0).powf(alpha) / j)
        })
        .fold(f64::INFINITY, f64::min);
    c.c2 = if c2.is_finite() { c2.max(0.0) / SAFETY } else { 0.0 };

    if let Some(fit) = &even.fit {
        c.a_fit = fit.a.unwrap_or(0.0);
        c.b_fit = fit.b;
    }
    if let Some(summary) = mobius.and_then(|m| m.mobius.as_ref()) {
        c.mobius_j = summary.points.iter().map(|p| (p.0, p.1)).collect();
    }
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowOptions;
    use crate::harness::families::FamilySpec;
    use crate::harness::sweep::{run_sweep, SweepConfig};

    #[test]
    fn fitted_constants_validate_their_own_sweep() {
        let config = SweepConfig {
            grid: 32,
            t_points: 17,
            flow_samples: vec![0.5, 0.9],
            flow: FlowOptions { tol: 1e-6, ..FlowOptions::default() },
            holder_pairs: 200,
            ..SweepConfig::default()
        };
        let base = VerificationConstants::default();
        let spec = FamilySpec::even_legendre(11, 4, (0.01, 0.05));
        let report = run_sweep(&spec, &config, &base).unwrap();
        let fitted = fit_constants(&report, None, &base).unwrap();
        assert!(fitted.c2 > 0.0);
        let again = run_sweep(&spec, &config, &fitted).unwrap();
        for row in &again.rows {
            assert!(row.mt_margin.unwrap() >= 0.0, "{row:?}");
            assert!(row.k_max.unwrap() <= fitted.k_bound);
            assert!(row.lemma5_ratio.unwrap() <= fitted.c_lemma5);
        }
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let config = SweepConfig { grid: 16, certificates: false, ..SweepConfig::default() };
        let spec = FamilySpec::even_legendre(1, 1, (0.001, 0.001));
        let report = run_sweep(&spec, &config, &VerificationConstants::default()).unwrap();
        assert!(fit_constants(&report, None, &VerificationConstants::default()).is_err());
    }
}
