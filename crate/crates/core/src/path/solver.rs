//! Damped Newton solver for
//! `1 + Δ(φ + φ_t) = e^{h_ω - tφ_t}(1 + Δφ)` at a fixed `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{assemble, condition_number, solve_pointwise, Sector};
use crate::sphere::metric::check_positive;
use crate::sphere::{inverse_laplacian, laplacian, MetricState, Parity, PotentialField, SphereGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Target for the sup-norm of the pointwise residual.
    pub tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Condition estimates above this are reported as singular.
    pub condition_limit: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iterations: 50,
            max_halvings: 40,
            condition_limit: 1e12,
        }
    }
}

/// One solved point of the continuity path.
#[derive(Debug, Clone)]
pub struct PathState {
    pub t: f64,
    pub phi_t: PotentialField,
    pub residual_sup: f64,
    pub newton_iters: usize,
}

impl PathState {
    /// `1 + Δ(φ + φ_t)` given the background volume ratio.
    pub fn volume_ratio(&self, omega: &MetricState, grid: &SphereGrid) -> PotentialField {
        omega.volume_ratio.add(&laplacian(&self.phi_t, grid))
    }
}

struct Residual {
    values: Vec<f64>,
    /// `e^{h - tφ_t} ρ_ω`
    source: Vec<f64>,
    sup: f64,
    positive: bool,
}

fn residual(t: f64, phi_t: &PotentialField, omega: &MetricState, grid: &SphereGrid) -> Residual {
    let lap = laplacian(phi_t, grid);
    let rho_w = omega.volume_ratio.values();
    let h = omega.ricci_potential.values();
    let mut values = Vec::with_capacity(grid.node_count());
    let mut source = Vec::with_capacity(grid.node_count());
    let mut positive = true;
    for i in 0..grid.node_count() {
        let rho_t = rho_w[i] + lap.values()[i];
        positive &= rho_t > 0.0;
        let s = (h[i] - t * phi_t.values()[i]).exp() * rho_w[i];
        values.push(rho_t - s);
        source.push(s);
    }
    let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Residual {
        values,
        source,
        sup,
        positive,
    }
}

/// Sup-norm of the path-equation residual of `phi_t` at `t`.
pub fn path_residual(t: f64, phi_t: &PotentialField, omega: &MetricState, grid: &SphereGrid) -> f64 {
    residual(t, phi_t, omega, grid).sup
}

/// The known endpoint: `ω_{φ₁} = ω_KE`, so `φ₁ = -φ + c` with `c` the
/// normalization constant of `h_ω`.
pub fn endpoint_t1(omega: &MetricState, grid: &SphereGrid) -> PathState {
    let phi1 = omega
        .potential
        .scale(-1.0)
        .add_constant(omega.normalization_constant);
    let residual_sup = path_residual(1.0, &phi1, omega, grid);
    PathState {
        t: 1.0,
        phi_t: phi1,
        residual_sup,
        newton_iters: 0,
    }
}

fn sector_for(grid: &SphereGrid, omega: &MetricState, guess: &PotentialField) -> Sector {
    if omega.potential.parity() == Parity::Even && guess.parity() == Parity::Even {
        Sector::even(grid)
    } else {
        Sector::full(grid)
    }
}

/// At `t = 0` the equation is linear, `Δφ₀ = e^{h_ω}ρ_ω - ρ_ω`, and its
/// additive constant is fixed by `∫ φ₀ ω_{φ₀} = 0`, the `t → 0` limit of
/// the normalization `∫ e^{h_ω - tφ_t} ω = V`.
fn solve_at_zero(omega: &MetricState, grid: &SphereGrid) -> Result<PathState> {
    let rhs: Vec<f64> = omega
        .ricci_potential
        .values()
        .iter()
        .zip(omega.volume_ratio.values())
        .map(|(h, r)| h.exp() * r - r)
        .collect();
    let mut rhs = PotentialField::from_values(grid, rhs)?;
    if omega.potential.parity() == Parity::Even {
        rhs = rhs.project_even(grid);
    }
    let tilde = inverse_laplacian(&rhs, grid);
    let rho0 = omega.volume_ratio.add(&laplacian(&tilde, grid));
    check_positive(rho0.values())?;
    let c = -grid.mean_product(tilde.values(), rho0.values()) / rho0.mean(grid);
    let phi0 = tilde.add_constant(c);
    let residual_sup = path_residual(0.0, &phi0, omega, grid);
    Ok(PathState {
        t: 0.0,
        phi_t: phi0,
        residual_sup,
        newton_iters: 0,
    })
}

/// Solves the path equation at `t` starting from `guess`.
pub fn solve_at_t(
    t: f64,
    guess: &PotentialField,
    omega: &MetricState,
    grid: &SphereGrid,
    opts: &SolverOptions,
) -> Result<PathState> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Config(format!("t = {t} outside [0, 1]")));
    }
    if t == 0.0 {
        return solve_at_zero(omega, grid);
    }
    let sector = sector_for(grid, omega, guess);
    let mut phi = guess.clone();
    let mut res = residual(t, &phi, omega, grid);
    if !res.positive {
        check_positive(phi_volume(&phi, omega, grid).values())?;
    }
    let ones = vec![1.0; grid.node_count()];
    for iter in 0..=opts.max_iterations {
        if res.sup <= opts.tol {
            if t == 1.0 && !sector.is_even() {
                // the linearization at a t = 1 solution is Δ_{ω_{φ₁}} + 1 up to
                // the volume factor, whose kernel is nontrivial
                check_conditioning(grid, &sector, t, &res, opts)?;
            }
            return Ok(PathState {
                t,
                phi_t: phi,
                residual_sup: res.sup,
                newton_iters: iter,
            });
        }
        if iter == opts.max_iterations {
            break;
        }
        let b: Vec<f64> = res.source.iter().map(|s| t * s).collect();
        let rhs: Vec<f64> = res.values.iter().map(|r| -r).collect();
        let step = solve_pointwise(grid, &sector, &ones, &b, &rhs, iter == 0).ok_or(
            Error::SingularLinearization {
                t,
                condition: f64::INFINITY,
            },
        )?;
        if let Some(condition) = step.condition {
            if condition > opts.condition_limit {
                return Err(Error::SingularLinearization { t, condition });
            }
        }
        let delta = PotentialField::from_coeffs(grid, step.coeffs)?;

        let mut lambda = 1.0;
        let mut accepted = None;
        let mut cone_failure = false;
        for _ in 0..=opts.max_halvings {
            let candidate = phi.combine(&delta, 1.0, lambda);
            let cres = residual(t, &candidate, omega, grid);
            if !cres.positive {
                cone_failure = true;
            } else if cres.sup < res.sup {
                accepted = Some((candidate, cres));
                break;
            } else {
                cone_failure = false;
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((p, r)) => {
                phi = p;
                res = r;
            }
            None if cone_failure => return Err(Error::ConeBoundary { t }),
            None => {
                return Err(Error::NewtonDiverged {
                    t,
                    residual: res.sup,
                    iterations: iter + 1,
                })
            }
        }
    }
    Err(Error::NewtonDiverged {
        t,
        residual: res.sup,
        iterations: opts.max_iterations,
    })
}

fn check_conditioning(
    grid: &SphereGrid,
    sector: &Sector,
    t: f64,
    res: &Residual,
    opts: &SolverOptions,
) -> Result<()> {
    let ones = vec![1.0; grid.node_count()];
    let b: Vec<f64> = res.source.iter().map(|s| t * s).collect();
    let condition = condition_number(&assemble(grid, sector, &ones, &b));
    if condition > opts.condition_limit {
        return Err(Error::SingularLinearization { t, condition });
    }
    Ok(())
}

fn phi_volume(phi_t: &PotentialField, omega: &MetricState, grid: &SphereGrid) -> PotentialField {
    omega.volume_ratio.add(&laplacian(phi_t, grid))
}
