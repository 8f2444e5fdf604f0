//! Identities and certificates evaluated on a traced path.

use serde::{Deserialize, Serialize};

use super::{HolderParams, PathTrace};
use crate::error::{Error, Result};
use crate::functionals::{compute_f, dirichlet};
use crate::quadrature::{bisect, cumulative, interp_linear, simpson};
use crate::sphere::{metric_from_potential, MetricState, SphereGrid};
use crate::DIM;

fn require_zero(trace: &PathTrace) -> Result<()> {
    if trace.reaches_zero() {
        Ok(())
    } else {
        Err(Error::IncompleteTrace { missing: 0.0 })
    }
}

/// Ascending copies of `t` and of a per-state quantity.
fn ascending(trace: &PathTrace, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut t = trace.ts();
    let mut v = values.to_vec();
    t.reverse();
    v.reverse();
    (t, v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DingCheck {
    /// `F_{ω_KE}(φ)`.
    pub f: f64,
    /// `∫₀¹ (I-J)(φ_t) dt`.
    pub integral: f64,
    pub residual: f64,
    /// `(t, |lhs - rhs|)` of the averaged identity
    /// `-(1/V)∫φ_t ω_{φ_t} = (I-J)(φ_t) - (1/t)∫₀ᵗ (I-J)` at interior states.
    pub averaged: Vec<(f64, f64)>,
}

impl DingCheck {
    pub fn max_averaged_residual(&self) -> f64 {
        self.averaged.iter().map(|r| r.1).fold(0.0, f64::max)
    }

    /// Averaged-identity residual at the state closest to `t`.
    pub fn averaged_near(&self, t: f64) -> Option<(f64, f64)> {
        self.averaged
            .iter()
            .copied()
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
    }
}

/// Compares `F_{ω_KE}(φ)` with the integral of `I - J` along the path.
pub fn ding_identity_check(trace: &PathTrace, grid: &SphereGrid) -> Result<DingCheck> {
    require_zero(trace)?;
    let f = compute_f(trace.potential(), &MetricState::round(grid), grid)?.f;
    let (t, ij) = ascending(trace, &trace.iminusj);
    let integral = simpson(&t, &ij);
    let running = cumulative(&t, &ij);

    let mut averaged = Vec::new();
    let last = trace.states.len() - 1;
    for (k, state) in trace.states.iter().enumerate() {
        if k == 0 || k == last {
            continue;
        }
        let rho = state.volume_ratio(&trace.omega, grid);
        let lhs = -grid.mean_product(state.phi_t.values(), rho.values());
        let j = last - k;
        let rhs = trace.iminusj[k] - running[j] / t[j];
        averaged.push((state.t, (lhs - rhs).abs()));
    }
    Ok(DingCheck {
        f,
        integral,
        residual: (f - integral).abs(),
        averaged,
    })
}

/// `(t, (1/V)∫(tφ̇_t + φ_t) ω_{φ_t})` at interior states, with `φ̇_t` from
/// the three-point nonuniform difference.
pub fn normalization_derivative_residuals(trace: &PathTrace, grid: &SphereGrid) -> Vec<(f64, f64)> {
    let s = &trace.states;
    let mut out = Vec::new();
    for k in 1..s.len().saturating_sub(1) {
        let (t0, t1, t2) = (s[k - 1].t, s[k].t, s[k + 1].t);
        let h0 = t1 - t0;
        let h1 = t2 - t1;
        // derivative at t1 of the quadratic through the three states
        let a = -h1 / (h0 * (h0 + h1));
        let b = (h1 - h0) / (h0 * h1);
        let c = h0 / (h1 * (h0 + h1));
        let dot = s[k - 1]
            .phi_t
            .combine(&s[k].phi_t, a, b)
            .combine(&s[k + 1].phi_t, 1.0, c);
        let integrand = dot.combine(&s[k].phi_t, t1, 1.0);
        let rho = s[k].volume_ratio(&trace.omega, grid);
        out.push((t1, grid.mean_product(integrand.values(), rho.values())));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRow {
    pub t: f64,
    pub min: f64,
    pub max: f64,
    /// `‖h_{ω_{φ_t}}‖_{C⁰}`
    pub h_sup: f64,
    /// `2(1-t)‖φ_t‖_{C⁰}`
    pub h_bound: f64,
}

impl NormalizationRow {
    pub fn changes_sign(&self, tol: f64) -> bool {
        self.min < tol && self.max > -tol
    }

    pub fn h_margin(&self) -> f64 {
        self.h_bound - self.h_sup
    }
}

/// Sign change of `φ_t` and the Ricci-potential bound along the path.
pub fn path_normalization_check(trace: &PathTrace, grid: &SphereGrid) -> Result<Vec<NormalizationRow>> {
    trace
        .states
        .iter()
        .zip(&trace.sup_norms)
        .map(|(s, &sup)| {
            let metric = metric_from_potential(&trace.potential().add(&s.phi_t), grid)?;
            Ok(NormalizationRow {
                t: s.t,
                min: s.phi_t.min(),
                max: s.phi_t.max(),
                h_sup: metric.ricci_potential.sup_norm(),
                h_bound: 2.0 * (1.0 - s.t) * sup,
            })
        })
        .collect()
}

fn t0_profile(holder: &HolderParams, t: f64, sup: f64) -> f64 {
    let a = holder.alpha;
    let s = (1.0 - t).max(0.0);
    s.powf(1.0 - a) * (1.0 + 2.0 * s * sup).powf(a)
}

/// Largest `t` with `(1-t)^{1-α}(1 + 2(1-t)‖φ_t‖)^α = D`, searched from
/// `t = 1` downward over the trace grid. `None` if the profile stays
/// below `D` on the traced range.
pub fn compute_t0(trace: &PathTrace, holder: &HolderParams) -> Option<f64> {
    let (t, sup) = ascending(trace, &trace.sup_norms);
    let g = |x: f64| t0_profile(holder, x, interp_linear(&t, &sup, x)) - holder.d;
    let states = &trace.states;
    for w in states.windows(2) {
        let (hi, lo) = (w[0].t, w[1].t);
        if g(lo) >= 0.0 {
            return Some(bisect(lo, hi, g, 1e-14));
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Row {
    pub t: f64,
    /// `‖φ₁ - φ_t‖`
    pub lhs: f64,
    /// `100(1-t)‖φ_t‖ + 1`
    pub rhs: f64,
}

impl Lemma1Row {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// The `C⁰` estimate of `φ₁ - φ_t` at every state with `t ≥ t₀`; without a
/// crossing the whole traced range qualifies.
pub fn lemma1_check(trace: &PathTrace, t0: Option<f64>) -> Vec<Lemma1Row> {
    let from = t0.unwrap_or(0.0);
    trace
        .states
        .iter()
        .zip(&trace.sup_norms)
        .filter(|(s, _)| s.t >= from)
        .map(|(s, &sup)| Lemma1Row {
            t: s.t,
            lhs: trace.phi1().sub(&s.phi_t).sup_norm(),
            rhs: 100.0 * (1.0 - s.t) * sup + 1.0,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step1Report {
    pub f: f64,
    pub j: f64,
    pub osc_phi: f64,
    /// `t₀`, or `1/2` when the path has no crossing.
    pub t_star: f64,
    pub used_fallback: bool,
    /// `F - (1/n)(1-t)(J - osc(φ_t - φ₁))` at `t_star`.
    pub margin_stepping_stone: f64,
    /// Same quantity minimized over the trace grid.
    pub min_margin_stepping_stone: f64,
    pub mt_lhs: f64,
    /// `C₂ J / (2 osc φ + 2)^α - (2/n) C₁`
    pub mt_rhs: f64,
    pub mt_margin: f64,
    /// `(1-t)‖φ₁ - φ_t‖` at `t_star`; the smallest admissible `C₁` for this row.
    pub c1_row: f64,
    /// `(1-t)‖φ_t‖^α` at `t_star`; `C₂` may not exceed this for this row.
    pub c2_row: f64,
}

fn stepping_stone(f: f64, j: f64, t: f64, osc_diff: f64) -> f64 {
    f - (1.0 - t) * (j - osc_diff) / DIM as f64
}

/// Both sides of the stepping-stone inequality at `t₀` and of the resulting
/// Moser–Trudinger type bound with constants `(c1, c2)`.
pub fn step1_certificate(
    trace: &PathTrace,
    grid: &SphereGrid,
    c1: f64,
    c2: f64,
) -> Result<Step1Report> {
    require_zero(trace)?;
    let n = DIM as f64;
    let phi = trace.potential();
    let f = compute_f(phi, &MetricState::round(grid), grid)?.f;
    let j = 0.5 * dirichlet(phi, grid);
    let osc_phi = phi.osc();
    let phi1 = trace.phi1();

    let min_margin = trace
        .states
        .iter()
        .map(|s| stepping_stone(f, j, s.t, s.phi_t.sub(phi1).osc()))
        .fold(f64::INFINITY, f64::min);

    let (t_star, used_fallback) = match trace.t0 {
        Some(t0) => (t0, false),
        None => (0.5, true),
    };
    let phi_star = trace.interpolate(t_star);
    let margin = stepping_stone(f, j, t_star, phi_star.sub(phi1).osc());
    let alpha = trace.holder.alpha;
    let mt_rhs = c2 * j / (2.0 * osc_phi + 2.0).powf(alpha) - 2.0 / n * c1;
    Ok(Step1Report {
        f,
        j,
        osc_phi,
        t_star,
        used_fallback,
        margin_stepping_stone: margin,
        min_margin_stepping_stone: min_margin,
        mt_lhs: f,
        mt_rhs,
        mt_margin: f - mt_rhs,
        c1_row: (1.0 - t_star) * phi1.sub(&phi_star).sup_norm(),
        c2_row: (1.0 - t_star) * phi_star.sup_norm().powf(alpha),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step2Row {
    pub t: f64,
    /// `osc(φ_t - φ₁)`
    pub osc: f64,
    /// `J_{ω_KE}(φ_t - φ₁)`
    pub j: f64,
    /// `F_{ω_KE}(φ_t - φ₁)`
    pub f: f64,
    /// `osc / (J + 1)`
    pub k: f64,
    /// `n(1-t) osc - F`
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step2Report {
    pub rows: Vec<Step2Row>,
    pub k_max: f64,
    pub min_margin: f64,
    /// Crossing `t'` of `nK(1-t)J^{1-γ} = A_γ/2`, if any.
    pub t_prime: Option<f64>,
    /// `J(φ_{t'} - φ₁)` (interpolated), or at `t = 1/2` without a crossing.
    pub j_at_t_prime: f64,
    /// `(2(n(1-t')K + B_γ)/A_γ)^{1/γ}`
    pub j_bound: f64,
}

/// The second-step quantities on `[1/2, 1]` with a given bound `k_est` on
/// `osc / (J + 1)` and constants `(a_gamma, b_gamma, gamma)` of the
/// intermediate inequality `F ≥ A_γ J^γ - B_γ`.
pub fn step2_certificate(
    trace: &PathTrace,
    grid: &SphereGrid,
    k_est: f64,
    a_gamma: f64,
    b_gamma: f64,
    gamma: f64,
) -> Result<Step2Report> {
    if trace.states.last().is_none_or(|s| s.t > 0.5) {
        return Err(Error::IncompleteTrace { missing: 0.5 });
    }
    let n = DIM as f64;
    let round = MetricState::round(grid);
    let phi1 = trace.phi1();
    let mut rows = Vec::new();
    for s in trace.states.iter().filter(|s| s.t >= 0.5) {
        let diff = s.phi_t.sub(phi1);
        let osc = diff.osc();
        let f = compute_f(&diff, &round, grid)?.f;
        let j = 0.5 * dirichlet(&diff, grid);
        rows.push(Step2Row {
            t: s.t,
            osc,
            j,
            f,
            k: osc / (j + 1.0),
            margin: n * (1.0 - s.t) * osc - f,
        });
    }
    let k_max = rows.iter().map(|r| r.k).fold(0.0, f64::max);
    let min_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);

    // rows are descending in t; interpolate J on ascending copies
    let ts: Vec<f64> = rows.iter().rev().map(|r| r.t).collect();
    let js: Vec<f64> = rows.iter().rev().map(|r| r.j).collect();
    let j_at = |t: f64| interp_linear(&ts, &js, t).max(0.0);
    let q = |t: f64| n * k_est * (1.0 - t) * j_at(t).powf(1.0 - gamma) - 0.5 * a_gamma;
    let mut t_prime = None;
    for w in rows.windows(2) {
        if q(w[1].t) >= 0.0 {
            t_prime = Some(bisect(w[1].t, w[0].t, q, 1e-14));
            break;
        }
    }
    let t_eval = t_prime.unwrap_or(0.5);
    let j_bound = (2.0 * (n * (1.0 - t_eval) * k_est + b_gamma) / a_gamma).powf(1.0 / gamma);
    Ok(Step2Report {
        rows,
        k_max,
        min_margin,
        t_prime,
        j_at_t_prime: j_at(t_eval),
        j_bound,
    })
}
