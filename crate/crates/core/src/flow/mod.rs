//! Normalized Kähler–Ricci flow `u̇ = log((η₀ + i/2 ∂∂̄u)/η₀) + u - h₀`
//! started at `u = 0` from a background metric `η₀`, integrated for unit
//! time and used to smooth path potentials.

mod checks;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_pointwise, Sector};
use crate::sphere::metric::log_mean_exp;
use crate::sphere::{laplacian, MetricState, PotentialField, SphereGrid};

pub use checks::{
    holder_quotient, lemma3_diagnostic, lemma4_check, lemma5_check, meridian_distances,
    smooth_path_state, Lemma3Norms, Lemma4Row, Lemma5Report, SmoothedState, SmoothedSummary,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub s_end: f64,
    /// Local error allowed per unit of flow time.
    pub tol: f64,
    pub max_step: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            s_end: 1.0,
            tol: 1e-8,
            max_step: 0.1,
            initial_step: 0.02,
            min_step: 1e-12,
            max_steps: 100_000,
        }
    }
}

/// Accepted flow states. `h` and `c` are empty until [`h_along_flow`] runs.
#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub s: Vec<f64>,
    pub u: Vec<PotentialField>,
    /// `u̇` evaluated from the flow equation at each accepted state.
    pub hdot: Vec<PotentialField>,
    pub h: Vec<PotentialField>,
    pub c: Vec<f64>,
    pub rho0: PotentialField,
    pub h0: PotentialField,
    /// Attempted steps, including rejected ones.
    pub attempts: usize,
}

impl FlowTrace {
    pub fn last_u(&self) -> &PotentialField {
        &self.u[self.u.len() - 1]
    }

    /// `η₀ + (i/2)∂∂̄u_k` as a volume ratio against the round metric.
    pub fn volume_ratio(&self, k: usize, grid: &SphereGrid) -> PotentialField {
        self.rho0.add(&laplacian(&self.u[k], grid))
    }

    /// `(1/V)∫ e^{h_k} ρ_k dA - 1`.
    pub fn normalization_defect(&self, k: usize, grid: &SphereGrid) -> f64 {
        let rho = self.volume_ratio(k, grid);
        log_mean_exp(grid, self.h[k].values(), rho.values()).exp_m1()
    }
}

fn rhs(u: &PotentialField, rho0: &PotentialField, h0: &PotentialField, grid: &SphereGrid) -> Option<(Vec<f64>, Vec<f64>)> {
    let lap = laplacian(u, grid);
    let mut f = Vec::with_capacity(grid.node_count());
    let mut rho = Vec::with_capacity(grid.node_count());
    for i in 0..grid.node_count() {
        let r = rho0.values()[i] + lap.values()[i];
        if !(r > 0.0) {
            return None;
        }
        f.push((r / rho0.values()[i]).ln() + u.values()[i] - h0.values()[i]);
        rho.push(r);
    }
    Some((f, rho))
}

/// `u̇` at `u`, or `None` outside the cone.
pub fn flow_velocity(u: &PotentialField, rho0: &PotentialField, h0: &PotentialField, grid: &SphereGrid) -> Option<PotentialField> {
    let (f, _) = rhs(u, rho0, h0, grid)?;
    PotentialField::from_values(grid, f).ok()
}

struct Stepper<'a> {
    grid: &'a SphereGrid,
    sector: Sector,
    rho0: &'a PotentialField,
    h0: &'a PotentialField,
}

impl Stepper<'_> {
    /// One implicit-midpoint step: the midpoint `m` solves
    /// `m - u - (dt/2) f(m) = 0`, then `u' = 2m - u`.
    fn step(&self, u: &PotentialField, dt: f64) -> Option<PotentialField> {
        let g = self.grid;
        let half = 0.5 * dt;
        let (f0, _) = rhs(u, self.rho0, self.h0, g)?;
        let mut m = u.combine(&PotentialField::from_values(g, f0).ok()?, 1.0, half);
        let eval = |m: &PotentialField| -> Option<(Vec<f64>, Vec<f64>, f64)> {
            let (f, rho) = rhs(m, self.rho0, self.h0, g)?;
            let res: Vec<f64> = (0..g.node_count())
                .map(|i| m.values()[i] - u.values()[i] - half * f[i])
                .collect();
            let sup = res.iter().fold(0.0f64, |a, r| a.max(r.abs()));
            Some((res, rho, sup))
        };
        let (mut res, mut rho, mut sup) = match eval(&m) {
            Some(v) => v,
            None => {
                m = u.clone();
                eval(&m)?
            }
        };
        let scale = 1.0 + u.nodal_sup_norm();
        for _ in 0..20 {
            if sup <= 1e-14 * scale {
                return Some(m.combine(u, 2.0, -1.0));
            }
            let a: Vec<f64> = rho.iter().map(|r| -half / r).collect();
            let b = vec![1.0 - half; g.node_count()];
            let neg: Vec<f64> = res.iter().map(|r| -r).collect();
            let sol = solve_pointwise(g, &self.sector, &a, &b, &neg, false)?;
            let delta = PotentialField::from_coeffs(g, sol.coeffs).ok()?;
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..12 {
                let cand = m.combine(&delta, 1.0, lambda);
                if let Some(next) = eval(&cand) {
                    if next.2 < sup || delta.nodal_sup_norm() * lambda < 1e-15 * scale {
                        accepted = Some((cand, next));
                        break;
                    }
                }
                lambda *= 0.5;
            }
            let (cand, next) = accepted?;
            let stalled = next.2 >= sup;
            m = cand;
            (res, rho, sup) = next;
            if stalled {
                return (sup <= 1e-11 * scale).then(|| m.combine(u, 2.0, -1.0));
            }
        }
        None
    }
}

/// Integrates the flow from `u = 0` to `s = opts.s_end` with adaptive
/// step doubling.
pub fn flow(background: &MetricState, grid: &SphereGrid, opts: &FlowOptions) -> Result<FlowTrace> {
    if !(opts.s_end > 0.0 && opts.max_step > 0.0 && opts.tol > 0.0) {
        return Err(Error::Config("flow needs positive s_end, max_step and tol".into()));
    }
    let stepper = Stepper {
        grid,
        sector: Sector::for_parity(grid, background.potential.parity()),
        rho0: &background.volume_ratio,
        h0: &background.ricci_potential,
    };
    let zero = PotentialField::zero(grid);
    let mut trace = FlowTrace {
        s: vec![0.0],
        hdot: vec![flow_velocity(&zero, stepper.rho0, stepper.h0, grid).ok_or(
            Error::PositivityCollapse { s: 0.0, step: 0.0 },
        )?],
        u: vec![zero],
        h: Vec::new(),
        c: Vec::new(),
        rho0: background.volume_ratio.clone(),
        h0: background.ricci_potential.clone(),
        attempts: 0,
    };
    let mut s = 0.0;
    let mut dt = opts.initial_step.min(opts.max_step);
    while s < opts.s_end {
        if trace.attempts >= opts.max_steps {
            return Err(Error::StiffnessBailout { s, max_steps: opts.max_steps });
        }
        trace.attempts += 1;
        let remaining = opts.s_end - s;
        let last_step = dt >= remaining;
        let h = if last_step { remaining } else { dt };
        let u = trace.last_u();
        let full = stepper.step(u, h);
        let halves = stepper
            .step(u, 0.5 * h)
            .and_then(|mid| stepper.step(&mid, 0.5 * h));
        let (full, fine) = match (full, halves) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                dt = 0.5 * h;
                if dt < opts.min_step {
                    return Err(Error::PositivityCollapse { s, step: dt });
                }
                continue;
            }
        };
        // second order: the two-half-step result is off by about (fine - full)/3
        let err = fine.sub(&full).nodal_sup_norm() / 3.0;
        let allowed = opts.tol * h;
        if err > allowed && h > opts.min_step {
            dt = h * (0.9 * (allowed / err).sqrt()).clamp(0.1, 0.5);
            continue;
        }
        let velocity = flow_velocity(&fine, stepper.rho0, stepper.h0, grid);
        let Some(velocity) = velocity else {
            dt = 0.5 * h;
            continue;
        };
        s = if last_step { opts.s_end } else { s + h };
        trace.s.push(s);
        trace.u.push(fine);
        trace.hdot.push(velocity);
        let grow = if err > 0.0 {
            (0.9 * (allowed / err).sqrt()).clamp(0.2, 2.0)
        } else {
            2.0
        };
        dt = (h * grow).min(opts.max_step);
    }
    Ok(trace)
}

/// Fills `h_s = -u̇_s + c_s` with `c_s = -log (1/V)∫ e^{h₀ - u_s} η₀`.
pub fn h_along_flow(mut trace: FlowTrace, grid: &SphereGrid) -> FlowTrace {
    trace.h.clear();
    trace.c.clear();
    for k in 0..trace.s.len() {
        let exponent: Vec<f64> = trace
            .h0
            .values()
            .iter()
            .zip(trace.u[k].values())
            .map(|(h, u)| h - u)
            .collect();
        let c = -log_mean_exp(grid, &exponent, trace.rho0.values());
        trace.h.push(trace.hdot[k].scale(-1.0).add_constant(c));
        trace.c.push(c);
    }
    trace
}

pub const FLOW_CSV_HEADER: [&str; 7] = ["t", "s", "sup_u", "sup_hdot", "margin_a", "margin_b", "margin_c"];

/// Writes one row per accepted flow state; `t` labels the path state the
/// flow started from.
pub fn write_flow_csv<W: Write>(t: f64, trace: &FlowTrace, rows: &[Lemma4Row], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(FLOW_CSV_HEADER)?;
    for (k, row) in rows.iter().enumerate() {
        let rec = [
            t,
            row.s,
            trace.u[k].sup_norm(),
            row.hdot_sup,
            row.margin_a(),
            row.margin_b(),
            row.margin_c,
        ];
        w.write_record(rec.iter().map(|v| format!("{v:.15e}")))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{metric_from_potential, SphereGrid};

    fn p2(mu: f64) -> f64 {
        1.5 * mu * mu - 0.5
    }

    #[test]
    fn einstein_background_is_stationary() {
        let g = SphereGrid::new(32).unwrap();
        let trace = flow(&MetricState::round(&g), &g, &FlowOptions::default()).unwrap();
        assert_eq!(*trace.s.last().unwrap(), 1.0);
        assert!(trace.u.iter().all(|u| u.sup_norm() < 1e-10));
        let trace = h_along_flow(trace, &g);
        assert!(trace.h.iter().all(|h| h.sup_norm() < 1e-10));
        assert!(trace.c.iter().all(|c| c.abs() < 1e-10));
    }

    /// Linearized flow `u̇ = (Δ + 1)u - h₀` solved mode by mode.
    fn linearized(h0: &PotentialField, s: f64, g: &SphereGrid) -> PotentialField {
        let coeffs = h0
            .coeffs()
            .iter()
            .enumerate()
            .map(|(l, c)| {
                let lam = SphereGrid::laplacian_eigenvalue(l) + 1.0;
                let factor = if lam.abs() < 1e-14 { s } else { (s * lam).exp_m1() / lam };
                -factor * c
            })
            .collect();
        PotentialField::from_coeffs(g, coeffs).unwrap()
    }

    #[test]
    fn small_background_follows_linearized_flow() {
        let g = SphereGrid::new(48).unwrap();
        let eps = 5e-4;
        let bg = metric_from_potential(&PotentialField::from_fn(&g, |m| eps * p2(m)), &g).unwrap();
        let h0 = bg.ricci_potential.sup_norm();
        assert!((h0 - 1e-3).abs() < 1e-4, "{h0}");
        let trace = flow(&bg, &g, &FlowOptions::default()).unwrap();
        let oracle = linearized(&bg.ricci_potential, 1.0, &g);
        assert!(trace.last_u().sub(&oracle).sup_norm() < 1e-5);
    }

    #[test]
    fn halving_the_step_is_stable() {
        let g = SphereGrid::new(32).unwrap();
        let bg = metric_from_potential(&PotentialField::from_fn(&g, |m| 0.2 * p2(m) + 0.05 * m.powi(4)), &g).unwrap();
        let coarse = flow(&bg, &g, &FlowOptions::default()).unwrap();
        let opts = FlowOptions {
            max_step: 0.05,
            initial_step: 0.01,
            ..FlowOptions::default()
        };
        let fine = flow(&bg, &g, &opts).unwrap();
        assert!(coarse.last_u().sub(fine.last_u()).sup_norm() < 1e-7);
    }

    #[test]
    fn normalization_of_h_along_flow() {
        let g = SphereGrid::new(32).unwrap();
        let bg = metric_from_potential(&PotentialField::from_fn(&g, |m| 0.25 * p2(m)), &g).unwrap();
        let trace = h_along_flow(flow(&bg, &g, &FlowOptions::default()).unwrap(), &g);
        assert!(trace.c[0].abs() < 1e-10);
        let h0 = bg.ricci_potential.sup_norm();
        for k in 0..trace.s.len() {
            assert!(trace.normalization_defect(k, &g).abs() < 1e-8);
            assert!(trace.c[k].abs() <= trace.s[k].exp() * h0 + 1e-8);
        }
    }

    #[test]
    fn rejects_bad_options() {
        let g = SphereGrid::new(16).unwrap();
        let opts = FlowOptions { max_step: 0.0, ..FlowOptions::default() };
        assert!(matches!(flow(&MetricState::round(&g), &g, &opts), Err(Error::Config(_))));
    }
}
