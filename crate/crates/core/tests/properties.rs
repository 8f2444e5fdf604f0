//! Randomized invariants across the discretization, the functionals, the
//! continuity path, the flow and the harness.

use mtlab::flow::{flow, h_along_flow, lemma4_check, FlowOptions};
use mtlab::functionals::{compute_f, cocycle_residual, oscillation_bounds_check};
use mtlab::harness::families::{gen_even_legendre_row, gen_mobius, FamilySpec, CONE_FLOOR};
use mtlab::harness::sweep::fit_envelope;
use mtlab::harness::VerificationConstants;
use mtlab::path::{chebyshev_t_grid, ding_identity_check, path_normalization_check, trace_path, PathConfig};
use mtlab::sphere::{laplacian, metric_from_potential, MetricState, PotentialField, SphereGrid};
use proptest::prelude::*;

const DEGREE: usize = 8;

/// Random coefficients for degrees `1..=DEGREE`.
fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, DEGREE)
}

/// A band-limited field with `|Δφ| ≤ reach`, so `1 + Δφ ≥ 1 - reach`.
fn field(grid: &SphereGrid, raw: &[f64], even_only: bool, reach: f64) -> PotentialField {
    let mut c = vec![0.0; grid.node_count()];
    let mut size = 0.0;
    for (k, &v) in raw.iter().enumerate() {
        let l = k + 1;
        if even_only && l % 2 == 1 {
            continue;
        }
        c[l] = v;
        size += v.abs() * (l * (l + 1)) as f64 / 2.0;
    }
    if size > 0.0 {
        for v in &mut c {
            *v *= reach / size;
        }
    }
    PotentialField::from_coeffs(grid, c).unwrap()
}

fn grid(n: usize) -> SphereGrid {
    SphereGrid::new(n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transform_round_trip(raw in coeffs(), reach in 0.01..0.9f64) {
        let g = grid(24);
        let f = field(&g, &raw, false, reach);
        let back = PotentialField::from_values(&g, f.values().to_vec()).unwrap();
        let scale = f.coeffs().iter().fold(1e-300f64, |m, c| m.max(c.abs()));
        for (a, b) in f.coeffs().iter().zip(back.coeffs()) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn laplacian_is_symmetric_and_mean_free(a in coeffs(), b in coeffs()) {
        let g = grid(24);
        let f = field(&g, &a, false, 0.5);
        let h = field(&g, &b, false, 0.5);
        let lf = laplacian(&f, &g);
        let lh = laplacian(&h, &g);
        let fh = g.mean_product(f.values(), lh.values());
        let hf = g.mean_product(h.values(), lf.values());
        prop_assert!((fh - hf).abs() < 1e-10);
        prop_assert!(g.mean(lf.values()).abs() < 1e-10);
        let sum = laplacian(&f.add(&h), &g);
        let parts = lf.add(&lh);
        prop_assert!(sum.sub(&parts).nodal_sup_norm() < 1e-12);
    }

    #[test]
    fn metric_is_normalized(raw in coeffs(), reach in 0.01..0.9f64) {
        let g = grid(24);
        let phi = field(&g, &raw, false, reach);
        let m = metric_from_potential(&phi, &g).unwrap();
        prop_assert!(m.volume_ratio.values().iter().all(|&r| r > 0.0));
        prop_assert!(m.volume_defect(&g).abs() < 1e-10);
        prop_assert!(m.normalization_defect(&g).abs() < 1e-10);
    }

    #[test]
    fn functional_identities(raw in coeffs(), reach in 0.01..0.9f64, shift in -5.0..5.0f64) {
        let g = grid(32);
        let round = MetricState::round(&g);
        let phi = field(&g, &raw, false, reach);
        let r = compute_f(&phi, &round, &g).unwrap();
        prop_assert!(r.i >= 0.0 && r.j >= 0.0);
        prop_assert!(r.sandwich_defect() <= 1e-12);
        prop_assert_eq!(r.f, r.j - r.mean_term - r.log_term);
        // Onofri
        prop_assert!(r.f >= -1e-12, "F = {}", r.f);
        let shifted = compute_f(&phi.add_constant(shift), &round, &g).unwrap();
        prop_assert!((shifted.f - r.f).abs() < 1e-10);
    }

    #[test]
    fn cocycle_holds(a in coeffs(), b in coeffs()) {
        let g = grid(32);
        let round = MetricState::round(&g);
        let p1 = field(&g, &a, false, 0.4);
        let p2 = field(&g, &b, false, 0.4);
        let res = cocycle_residual(&p1, &p2, &round, &g).unwrap();
        prop_assert!(res.f < 1e-8 && res.f0 < 1e-8, "{res:?}");
    }

    #[test]
    fn oscillation_bounds(a in coeffs(), b in coeffs(), ra in 0.01..0.9f64, rb in 0.01..0.9f64) {
        let g = grid(32);
        let round = MetricState::round(&g);
        let p0 = field(&g, &a, false, ra);
        let p1 = field(&g, &b, false, rb);
        let bounds = oscillation_bounds_check(&p0, &p1, &round, &g).unwrap();
        prop_assert!(bounds.margin_j() >= -1e-12);
        prop_assert!(bounds.margin_ij() >= -1e-12);
    }

    #[test]
    fn envelope_lies_below_every_point(points in prop::collection::vec((0.0..10.0f64, -5.0..20.0f64), 1..40)) {
        let points: Vec<_> = points.into_iter().enumerate().map(|(k, (j, f))| (k, j, f)).collect();
        let fit = fit_envelope(&points, 10.0).unwrap();
        prop_assert!(fit.min_slack >= -1e-12);
        for &(_, j, f) in &points {
            prop_assert!(f - (fit.a.unwrap_or(0.0) * j - fit.b) >= -1e-12);
        }
        if points.iter().any(|p| p.1 > 0.0) {
            prop_assert!(fit.active_constraints >= 2);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn even_generator_is_deterministic_and_in_the_cone(seed in 0u64..1000, row in 0usize..6) {
        let g = grid(64);
        let spec = FamilySpec::even_legendre(seed, 6, (0.02, 0.06));
        let a = gen_even_legendre_row(&spec, row, &g).unwrap();
        let b = gen_even_legendre_row(&spec, row, &g).unwrap();
        prop_assert_eq!(a.coeffs(), b.coeffs());
        prop_assert!(a.coeffs().iter().skip(1).step_by(2).all(|&c| c == 0.0));
        prop_assert!(a.coeffs()[0] == 0.0);
        let rho = metric_from_potential(&a, &g).unwrap().volume_ratio;
        prop_assert!(rho.min() >= CONE_FLOOR - 1e-12);
    }

    #[test]
    fn dilations_sit_on_the_floor(a in 1.05..3.0f64) {
        let g = grid(64);
        let phi = gen_mobius(a, &g).unwrap();
        let r = compute_f(&phi, &MetricState::round(&g), &g).unwrap();
        prop_assert!(r.f.abs() < 1e-8, "F = {}", r.f);
        prop_assert!(r.j > 0.0);
    }

    #[test]
    fn even_paths_reach_zero_monotonically(raw in coeffs(), reach in 0.05..0.6f64) {
        let g = grid(32);
        let phi = field(&g, &raw, true, reach);
        let holder = VerificationConstants::default().holder().unwrap();
        let trace = trace_path(&phi, &g, &PathConfig::new(chebyshev_t_grid(17), holder)).map_err(|e| e.error).unwrap();
        prop_assert!(trace.reaches_zero());
        prop_assert!(trace.min_monotonicity_increment() >= -1e-8);
        prop_assert!(trace.max_residual() <= 1e-10);
        let ding = ding_identity_check(&trace, &g).unwrap();
        prop_assert!(ding.residual <= 1e-5 * ding.f.max(1.0), "{ding:?}");
        for row in path_normalization_check(&trace, &g).unwrap() {
            prop_assert!(row.changes_sign(1e-12));
            prop_assert!(row.h_margin() >= -1e-8);
        }
    }

    #[test]
    fn flow_velocity_is_bounded(raw in coeffs(), reach in 0.05..0.6f64) {
        let g = grid(32);
        let phi = field(&g, &raw, true, reach);
        let bg = metric_from_potential(&phi, &g).unwrap();
        let trace = h_along_flow(flow(&bg, &g, &FlowOptions::default()).unwrap(), &g);
        prop_assert_eq!(trace.u[0].nodal_sup_norm(), 0.0);
        for row in lemma4_check(&trace, &g).unwrap() {
            prop_assert!(row.margin_a() >= -1e-4 * row.bound_a, "{row:?}");
        }
        for k in 0..trace.s.len() {
            prop_assert!(trace.normalization_defect(k, &g).abs() < 1e-8);
        }
    }
}
