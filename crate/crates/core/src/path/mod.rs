//! The continuity path `(ω + i/2 ∂∂̄φ_t) = e^{h_ω - tφ_t} ω`, traced from
//! the known endpoint at `t = 1` down to `t = 0`, and its diagnostics.

mod diagnostics;
mod solver;

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::dirichlet;
use crate::sphere::metric::check_positive;
use crate::sphere::{laplacian, metric_from_potential, MetricState, PotentialField, SphereGrid};

pub use diagnostics::{
    compute_t0, ding_identity_check, lemma1_check, normalization_derivative_residuals,
    path_normalization_check, step1_certificate, step2_certificate, DingCheck, Lemma1Row,
    NormalizationRow, Step1Report, Step2Report, Step2Row,
};
pub use solver::{endpoint_t1, path_residual, solve_at_t, PathState, SolverOptions};

/// Exponents of the Hölder stepping stone together with the threshold `D`
/// that defines `t₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderParams {
    pub p: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub d: f64,
}

impl HolderParams {
    pub fn new(p: f64, kappa: f64, d: f64) -> Result<Self> {
        let n = crate::DIM as f64;
        if !(p > 2.0 * n) {
            return Err(Error::Config(format!("Hölder exponent p = {p} must exceed 2n")));
        }
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::Config(format!("κ = {kappa} must lie in (0, 1)")));
        }
        if !(p > 3.0 - 2.0 * kappa) {
            return Err(Error::Config(format!("need p > 3 - 2κ, got p = {p}, κ = {kappa}")));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Config(format!("threshold D = {d} must be positive")));
        }
        Ok(HolderParams {
            p,
            kappa,
            alpha: (p + kappa - 2.0) / (p - 1.0),
            d,
        })
    }

    /// `1 - α`, the exponent in the resulting inequality.
    pub fn gamma(&self) -> f64 {
        1.0 - self.alpha
    }
}

/// `count` points `cos(kπ / (2(count-1)))`, descending from 1 to 0 and
/// clustered at `t = 1`.
pub fn chebyshev_t_grid(count: usize) -> Vec<f64> {
    assert!(count >= 2, "a t-grid needs both endpoints");
    let m = (count - 1) as f64;
    let mut grid: Vec<f64> = (0..count)
        .map(|k| (k as f64 * PI / (2.0 * m)).cos())
        .collect();
    grid[0] = 1.0;
    grid[count - 1] = 0.0;
    grid
}

#[derive(Debug, Clone)]
pub struct PathConfig {
    /// Descending from 1; need not reach 0.
    pub t_grid: Vec<f64>,
    pub solver: SolverOptions,
    pub holder: HolderParams,
    /// How many times a failed continuation step may be split in half.
    pub max_subdivisions: usize,
}

impl PathConfig {
    pub fn new(t_grid: Vec<f64>, holder: HolderParams) -> Self {
        PathConfig {
            t_grid,
            solver: SolverOptions::default(),
            holder,
            max_subdivisions: 6,
        }
    }

    fn validate(&self) -> Result<()> {
        let g = &self.t_grid;
        if g.first() != Some(&1.0) {
            return Err(Error::Config("t-grid must start at t = 1".into()));
        }
        if g.windows(2).any(|w| !(w[1] < w[0])) || g.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Config(
                "t-grid must be strictly descending inside [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// A traced path. States are ordered by descending `t`.
#[derive(Debug, Clone)]
pub struct PathTrace {
    pub omega: MetricState,
    pub states: Vec<PathState>,
    /// `(I - J)_ω(φ_t)` per state.
    pub iminusj: Vec<f64>,
    /// `‖φ_t‖_{C⁰}` per state.
    pub sup_norms: Vec<f64>,
    pub t0: Option<f64>,
    pub holder: HolderParams,
}

impl PathTrace {
    fn new(omega: MetricState, holder: HolderParams) -> Self {
        PathTrace {
            omega,
            states: Vec::new(),
            iminusj: Vec::new(),
            sup_norms: Vec::new(),
            t0: None,
            holder,
        }
    }

    fn push(&mut self, state: PathState, grid: &SphereGrid) {
        self.iminusj.push(0.5 * dirichlet(&state.phi_t, grid));
        self.sup_norms.push(state.phi_t.sup_norm());
        self.states.push(state);
    }

    pub fn potential(&self) -> &PotentialField {
        &self.omega.potential
    }

    pub fn ts(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn phi1(&self) -> &PotentialField {
        &self.states[0].phi_t
    }

    pub fn reaches_zero(&self) -> bool {
        self.states.last().is_some_and(|s| s.t == 0.0)
    }

    /// Smallest `(I-J)(φ_{t_k}) - (I-J)(φ_{t_{k+1}})` over consecutive states;
    /// negative values violate monotonicity in `t`.
    pub fn min_monotonicity_increment(&self) -> f64 {
        self.iminusj
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_residual(&self) -> f64 {
        self.states.iter().map(|s| s.residual_sup).fold(0.0, f64::max)
    }

    /// `φ_t` at an arbitrary `t` inside the traced range, by linear
    /// interpolation between neighbouring states.
    pub fn interpolate(&self, t: f64) -> PotentialField {
        let states = &self.states;
        if t >= states[0].t {
            return states[0].phi_t.clone();
        }
        for w in states.windows(2) {
            let (hi, lo) = (&w[0], &w[1]);
            if t >= lo.t {
                let s = (t - lo.t) / (hi.t - lo.t);
                return lo.phi_t.combine(&hi.phi_t, 1.0 - s, s);
            }
        }
        states[states.len() - 1].phi_t.clone()
    }

    pub const CSV_HEADER: [&'static str; 7] =
        ["t", "sup_norm", "residual", "I", "J", "IminusJ", "osc_to_phi1"];

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::CSV_HEADER)?;
        for (k, s) in self.states.iter().enumerate() {
            let iminusj = self.iminusj[k];
            let row = [
                s.t,
                self.sup_norms[k],
                s.residual_sup,
                2.0 * iminusj,
                iminusj,
                iminusj,
                s.phi_t.sub(self.phi1()).osc(),
            ];
            w.write_record(row.iter().map(|v| format!("{v:.15e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A trace that stopped early, with the error that stopped it.
#[derive(Clone)]
pub struct TraceFailure {
    pub partial: PathTrace,
    pub error: Error,
}

impl std::fmt::Debug for TraceFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "TraceFailure({:?} after {} states)",
            self.error,
            self.partial.states.len()
        )
    }
}

impl From<Box<TraceFailure>> for Error {
    fn from(f: Box<TraceFailure>) -> Self {
        f.error
    }
}

fn secant_guess(states: &[PathState], t: f64) -> PotentialField {
    let k = states.len();
    let last = &states[k - 1];
    if k < 2 {
        return last.phi_t.clone();
    }
    let prev = &states[k - 2];
    let s = (t - last.t) / (last.t - prev.t);
    last.phi_t.combine(&prev.phi_t, 1.0 + s, -s)
}

fn in_cone(phi_t: &PotentialField, omega: &MetricState, grid: &SphereGrid) -> bool {
    let rho = omega.volume_ratio.add(&laplacian(phi_t, grid));
    check_positive(rho.values()).is_ok()
}

/// Solves at `t` from `from`, splitting the step `from.t → t` in half when
/// the direct solve fails.
fn advance(
    from: &[PathState],
    t: f64,
    omega: &MetricState,
    grid: &SphereGrid,
    config: &PathConfig,
    depth: usize,
) -> Result<PathState> {
    let guess = secant_guess(from, t);
    let attempt = if t > 0.0 && in_cone(&guess, omega, grid) {
        solve_at_t(t, &guess, omega, grid, &config.solver)
    } else {
        solve_at_t(t, &from[from.len() - 1].phi_t, omega, grid, &config.solver)
    };
    let err = match attempt {
        Ok(state) => return Ok(state),
        Err(e @ Error::SingularLinearization { .. }) => return Err(e),
        Err(e) => e,
    };
    let last = &from[from.len() - 1];
    if t > 0.0 {
        if let Ok(state) = solve_at_t(t, &last.phi_t, omega, grid, &config.solver) {
            return Ok(state);
        }
    }
    if depth >= config.max_subdivisions || t == 0.0 {
        return Err(err);
    }
    let mid = 0.5 * (last.t + t);
    let mid_state = advance(from, mid, omega, grid, config, depth + 1)?;
    let local = [last.clone(), mid_state];
    advance(&local, t, omega, grid, config, depth + 1)
}

/// Traces the path of `φ` along `config.t_grid`.
pub fn trace_path(
    phi: &PotentialField,
    grid: &SphereGrid,
    config: &PathConfig,
) -> std::result::Result<PathTrace, Box<TraceFailure>> {
    let fail = |partial: PathTrace, error: Error| Box::new(TraceFailure { partial, error });
    let omega = match metric_from_potential(phi, grid) {
        Ok(o) => o,
        Err(e) => return Err(fail(PathTrace::new(MetricState::round(grid), config.holder), e)),
    };
    let mut trace = PathTrace::new(omega, config.holder);
    if let Err(e) = config.validate() {
        return Err(fail(trace, e));
    }
    trace.push(endpoint_t1(&trace.omega, grid), grid);
    for &t in &config.t_grid[1..] {
        match advance(&trace.states, t, &trace.omega, grid, config, 0) {
            Ok(state) => trace.push(state, grid),
            Err(e) => {
                trace.t0 = compute_t0(&trace, &trace.holder);
                return Err(fail(trace, e));
            }
        }
    }
    trace.t0 = compute_t0(&trace, &trace.holder);
    Ok(trace)
}
