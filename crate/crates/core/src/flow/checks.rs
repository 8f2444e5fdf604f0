//! Estimates along the flow and for the smoothed path potentials.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use super::{flow, h_along_flow, FlowOptions, FlowTrace};
use crate::error::Result;
use crate::path::PathState;
use crate::sphere::grid::{eval_series, gauss_legendre};
use crate::sphere::metric::check_positive;
use crate::sphere::{gradient_norm_sq, laplacian, metric_from_potential, PotentialField, SphereGrid};
use crate::DIM;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma4Row {
    pub s: f64,
    /// `‖u̇_s‖`
    pub hdot_sup: f64,
    /// `e^s ‖h₀‖`
    pub bound_a: f64,
    /// `sup(|h_s|² + s|∇h_s|²_s)`
    pub lhs_b: f64,
    /// `4e^{2s}‖h₀‖²`
    pub bound_b: f64,
    /// `min e^{-s}Δ_s h_s - min Δ₀h₀`
    pub margin_c: f64,
    /// `min over nodes of (e^{-s}Δ_s h_s - Δ₀h₀)`; logged only.
    pub pointwise_c: f64,
}

impl Lemma4Row {
    pub fn margin_a(&self) -> f64 {
        self.bound_a - self.hdot_sup
    }

    pub fn margin_b(&self) -> f64 {
        self.bound_b - self.lhs_b
    }
}

fn metric_laplacian(f: &PotentialField, rho: &PotentialField, grid: &SphereGrid) -> Vec<f64> {
    laplacian(f, grid)
        .values()
        .iter()
        .zip(rho.values())
        .map(|(l, r)| l / r)
        .collect()
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Per-state margins of the three flow estimates. Needs `h` filled in.
pub fn lemma4_check(trace: &FlowTrace, grid: &SphereGrid) -> Result<Vec<Lemma4Row>> {
    let h0 = trace.h0.sup_norm();
    let lap0 = metric_laplacian(&trace.h0, &trace.rho0, grid);
    let min0 = min_of(&lap0);
    let mut rows = Vec::with_capacity(trace.s.len());
    for k in 0..trace.s.len() {
        let s = trace.s[k];
        let rho = trace.volume_ratio(k, grid);
        let h = &trace.h[k];
        let grad = gradient_norm_sq(h, &rho, grid)?;
        let lhs_b = h
            .values()
            .iter()
            .zip(grad.values())
            .map(|(v, g)| v * v + s * g)
            .fold(0.0, f64::max);
        let lap: Vec<f64> = metric_laplacian(h, &rho, grid)
            .iter()
            .map(|v| (-s).exp() * v)
            .collect();
        let pointwise = min_of(
            &lap.iter().zip(&lap0).map(|(a, b)| a - b).collect::<Vec<_>>(),
        );
        rows.push(Lemma4Row {
            s,
            hdot_sup: trace.hdot[k].sup_norm(),
            bound_a: s.exp() * h0,
            lhs_b,
            bound_b: 4.0 * (2.0 * s).exp() * h0 * h0,
            margin_c: min_of(&lap) - min0,
            pointwise_c: pointwise,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma5Report {
    pub t: f64,
    /// `‖h₁ - mean‖`
    pub v_sup: f64,
    pub h0_sup: f64,
    /// `‖v‖ / (‖h₀‖^{(p-2)/(p-1)} (1-t)^{1/(p-1)})`
    pub ratio: f64,
    /// `(1/V)∫|∇v|²_1 η₁`
    pub gradient_lhs: f64,
    /// `2ne‖v‖(1-t)`
    pub gradient_rhs: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// The end metric is not `A`-equivalent to the round one.
    pub equivalence_violated: bool,
}

impl Lemma5Report {
    pub fn gradient_margin(&self) -> f64 {
        self.gradient_rhs - self.gradient_lhs
    }
}

/// The end-of-flow oscillation estimate for a flow started at the path
/// metric of parameter `t`.
pub fn lemma5_check(
    trace: &FlowTrace,
    t: f64,
    p: f64,
    equivalence: f64,
    grid: &SphereGrid,
) -> Result<Lemma5Report> {
    let k = trace.s.len() - 1;
    let rho = trace.volume_ratio(k, grid);
    let h = &trace.h[k];
    let mean = grid.mean_product(h.values(), rho.values()) / rho.mean(grid);
    let v = h.add_constant(-mean);
    let v_sup = v.sup_norm();
    let h0_sup = trace.h0.sup_norm();
    let denom = h0_sup.powf((p - 2.0) / (p - 1.0)) * (1.0 - t).powf(1.0 / (p - 1.0));
    let ratio = if v_sup == 0.0 { 0.0 } else { v_sup / denom };
    let grad = gradient_norm_sq(&v, &rho, grid)?;
    let (rho_min, rho_max) = (rho.min(), rho.max());
    Ok(Lemma5Report {
        t,
        v_sup,
        h0_sup,
        ratio,
        gradient_lhs: grid.mean_product(grad.values(), rho.values()),
        gradient_rhs: 2.0 * DIM as f64 * E * v_sup * (1.0 - t),
        rho_min,
        rho_max,
        equivalence_violated: rho_min < 1.0 / equivalence || rho_max > equivalence,
    })
}

/// A path potential after unit-time smoothing by the flow.
#[derive(Debug, Clone)]
pub struct SmoothedState {
    pub t: f64,
    /// End point of the flow started at `ω_{φ_t}`.
    pub u_t: PotentialField,
    pub a_t: f64,
    /// `φ₁ - φ_t - u_t - a_t`
    pub psi: PotentialField,
    /// Ricci potential of `ω_{φ_t + u_t}`.
    pub h_smoothed: PotentialField,
    /// `‖h_{ω_{φ_t}}‖`
    pub h0_sup: f64,
    pub phi_t_sup: f64,
    /// `sup |log(ρ_KE / ρ_{KE-ψ}) + ψ - h_smoothed|`
    pub ma3_residual: f64,
    /// `(1/V)∫e^ψ dA - 1`
    pub exp_mean_defect: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothedSummary {
    pub t: f64,
    pub u_sup: f64,
    pub a_t: f64,
    pub psi_sup: f64,
    pub h_smoothed_sup: f64,
    pub h0_sup: f64,
    pub margin_u: f64,
    pub margin_a: f64,
    pub ma3_residual: f64,
    pub exp_mean_defect: f64,
}

impl SmoothedState {
    /// `3‖h₀‖ - ‖u_t‖`
    pub fn margin_u(&self) -> f64 {
        3.0 * self.h0_sup - self.u_t.sup_norm()
    }

    /// `7(1-t)‖φ_t‖ - |a_t|`
    pub fn margin_a(&self) -> f64 {
        7.0 * (1.0 - self.t) * self.phi_t_sup - self.a_t.abs()
    }

    pub fn summary(&self) -> SmoothedSummary {
        SmoothedSummary {
            t: self.t,
            u_sup: self.u_t.sup_norm(),
            a_t: self.a_t,
            psi_sup: self.psi.sup_norm(),
            h_smoothed_sup: self.h_smoothed.sup_norm(),
            h0_sup: self.h0_sup,
            margin_u: self.margin_u(),
            margin_a: self.margin_a(),
            ma3_residual: self.ma3_residual,
            exp_mean_defect: self.exp_mean_defect,
        }
    }
}

/// Runs the flow from `ω_{φ+φ_t}` and builds `ψ_t`. Also returns the flow
/// trace with `h` filled in.
pub fn smooth_path_state(
    phi: &PotentialField,
    state: &PathState,
    phi1: &PotentialField,
    grid: &SphereGrid,
    opts: &FlowOptions,
) -> Result<(SmoothedState, FlowTrace)> {
    let background = metric_from_potential(&phi.add(&state.phi_t), grid)?;
    let trace = h_along_flow(flow(&background, grid, opts)?, grid);
    let u_t = trace.last_u().clone();

    let base = phi1.sub(&state.phi_t).sub(&u_t);
    let ones = vec![1.0; grid.node_count()];
    let a_t = crate::sphere::metric::log_mean_exp(grid, base.values(), &ones);
    let psi = base.add_constant(-a_t);
    let smoothed = metric_from_potential(&phi.add(&state.phi_t).add(&u_t), grid)?;
    let h_smoothed = smoothed.ricci_potential;

    let lap = laplacian(&psi, grid);
    let mut ma3: f64 = 0.0;
    for i in 0..grid.node_count() {
        let r = 1.0 - lap.values()[i];
        let v = -r.ln() + psi.values()[i] - h_smoothed.values()[i];
        ma3 = ma3.max(v.abs());
    }
    let exp_psi: Vec<f64> = psi.values().iter().map(|v| v.exp()).collect();
    let state = SmoothedState {
        t: state.t,
        u_t,
        a_t,
        exp_mean_defect: grid.mean(&exp_psi) - 1.0,
        psi,
        h_smoothed,
        h0_sup: background.ricci_potential.sup_norm(),
        phi_t_sup: state.phi_t.sup_norm(),
        ma3_residual: ma3,
    };
    Ok((state, trace))
}

const ARC_NODES: usize = 8;

/// Distance of every node from the south pole along a meridian of the metric
/// `ρ·ω_KE`, `∫ √ρ dθ`.
pub fn meridian_distances(rho: &PotentialField, grid: &SphereGrid) -> Result<Vec<f64>> {
    check_positive(rho.values())?;
    let (xs, ws) = gauss_legendre(ARC_NODES);
    let theta: Vec<f64> = grid.nodes().iter().map(|m| m.acos()).collect();
    let sqrt_rho = |th: f64| eval_series(rho.coeffs(), th.cos()).max(0.0).sqrt();
    let segment = |a: f64, b: f64| {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * xs
            .iter()
            .zip(&ws)
            .map(|(x, w)| w * sqrt_rho(mid + half * x))
            .sum::<f64>()
    };
    let mut out = Vec::with_capacity(theta.len());
    let mut acc = segment(theta[0], std::f64::consts::PI);
    out.push(acc);
    for i in 1..theta.len() {
        acc += segment(theta[i], theta[i - 1]);
        out.push(acc);
    }
    Ok(out)
}

/// Deterministic node pairs: every adjacent pair, then pairs spread over
/// all separations, `count` in total (or every pair when there are fewer).
fn sample_pairs(n: usize, count: usize) -> Vec<(usize, usize)> {
    let total = n * (n - 1) / 2;
    if total <= count {
        return (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
    }
    let mut pairs: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    let mut k = 0usize;
    while pairs.len() < count {
        let gap = 2 + k % (n - 2);
        let i = (k.wrapping_mul(7919) + k / (n - 2)) % (n - gap);
        pairs.push((i, i + gap));
        k += 1;
    }
    pairs
}

/// Largest `|f(x) - f(y)| / d(x, y)^κ` over `pairs` deterministic node
/// pairs, with `d` the meridian distance of `ρ·ω_KE`.
pub fn holder_quotient(
    f: &PotentialField,
    rho: &PotentialField,
    kappa: f64,
    grid: &SphereGrid,
    pairs: usize,
) -> Result<f64> {
    let d = meridian_distances(rho, grid)?;
    let v = f.values();
    Ok(sample_pairs(grid.node_count(), pairs)
        .into_iter()
        .map(|(i, j)| (v[i] - v[j]).abs() / (d[j] - d[i]).abs().powf(kappa))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma3Norms {
    pub c0: f64,
    pub laplacian_c0: f64,
    pub laplacian_holder: f64,
    /// Sum of the three, standing in for `‖ψ_t‖_{C^{2,κ}}`.
    pub proxy: f64,
}

pub fn lemma3_diagnostic(smoothed: &SmoothedState, kappa: f64, grid: &SphereGrid) -> Result<Lemma3Norms> {
    let lap = laplacian(&smoothed.psi, grid);
    let ones = PotentialField::constant(grid, 1.0);
    let c0 = smoothed.psi.sup_norm();
    let laplacian_c0 = lap.sup_norm();
    let laplacian_holder = holder_quotient(&lap, &ones, kappa, grid, 1000)?;
    Ok(Lemma3Norms {
        c0,
        laplacian_c0,
        laplacian_holder,
        proxy: c0 + laplacian_c0 + laplacian_holder,
    })
}
