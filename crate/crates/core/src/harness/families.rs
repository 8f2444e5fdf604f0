//! Seeded generators of test potentials.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::dirichlet;
use crate::sphere::grid::legendre_table;
use crate::sphere::{laplacian, PotentialField, SphereGrid};

/// Smallest `1 + Δφ` a generated potential may have.
pub const CONE_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// Even Legendre series without constant term: invariant under the
    /// axis rotations and the half-turn about an equatorial axis.
    EvenLegendre,
    /// Pullbacks of the round metric under axis dilations; circle-invariant
    /// but not even.
    Mobius,
    /// Circle-invariant Gaussian bumps in `μ`, no parity.
    Bump,
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even_legendre" | "even-legendre" => Ok(FamilyKind::EvenLegendre),
            "mobius" => Ok(FamilyKind::Mobius),
            "bump" => Ok(FamilyKind::Bump),
            other => Err(Error::Config(format!("unknown family '{other}'"))),
        }
    }
}

impl std::fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FamilyKind::EvenLegendre => "even_legendre",
            FamilyKind::Mobius => "mobius",
            FamilyKind::Bump => "bump",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub seed: u64,
    pub size: usize,
    /// Highest Legendre degree used; `None` means the grid's `L`.
    pub degree_cap: Option<usize>,
    /// Overall amplitudes, cycled over rows. For the Möbius family these
    /// are the dilation factors.
    pub amplitudes: Vec<f64>,
    /// When set, each row is rescaled to a `J` target spread log-uniformly
    /// over this range.
    pub target_j: Option<(f64, f64)>,
}

impl FamilySpec {
    pub fn even_legendre(seed: u64, size: usize, target_j: (f64, f64)) -> Self {
        FamilySpec {
            kind: FamilyKind::EvenLegendre,
            seed,
            size,
            degree_cap: None,
            amplitudes: vec![1.0],
            target_j: Some(target_j),
        }
    }

    pub fn mobius(dilations: Vec<f64>) -> Self {
        FamilySpec {
            kind: FamilyKind::Mobius,
            seed: 0,
            size: dilations.len(),
            degree_cap: None,
            amplitudes: dilations,
            target_j: None,
        }
    }

    pub fn bump(seed: u64, size: usize, target_j: Option<(f64, f64)>) -> Self {
        FamilySpec {
            kind: FamilyKind::Bump,
            seed,
            size,
            degree_cap: None,
            amplitudes: vec![1.0],
            target_j,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.amplitudes.is_empty() || self.amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::Config("amplitude schedule must be finite and nonempty".into()));
        }
        if let Some((lo, hi)) = self.target_j {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::Config(format!("bad J target range [{lo}, {hi}]")));
            }
        }
        if self.kind == FamilyKind::Mobius && self.amplitudes.iter().any(|&a| a < 1.0) {
            return Err(Error::Config("dilation factors must be at least 1".into()));
        }
        Ok(())
    }

    fn amplitude(&self, row: usize) -> f64 {
        self.amplitudes[row % self.amplitudes.len()]
    }

    /// `J` target of `row`: stratified log-uniform over the range.
    pub fn target_for(&self, row: usize) -> Option<f64> {
        self.target_j.map(|(lo, hi)| {
            let u = (row as f64 + 0.5) / self.size.max(1) as f64;
            lo * (hi / lo).powf(u)
        })
    }

    fn rng(&self, row: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(row as u64);
        rng
    }

    fn cap(&self, grid: &SphereGrid) -> usize {
        self.degree_cap.unwrap_or(grid.max_degree()).min(grid.max_degree())
    }
}

/// `J = E/2` of a potential.
pub fn energy_j(phi: &PotentialField, grid: &SphereGrid) -> f64 {
    0.5 * dirichlet(phi, grid)
}

/// Largest `λ ≥ 0` with `min(1 + λΔφ) ≥ CONE_FLOOR`.
fn cone_limit(shape: &PotentialField, grid: &SphereGrid) -> f64 {
    let worst = laplacian(shape, grid).min();
    if worst >= 0.0 {
        f64::INFINITY
    } else {
        (1.0 - CONE_FLOOR) / -worst
    }
}

/// Golden-section search on `[lo, hi]` for the minimizer of `f`.
pub fn golden_section(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol * (1.0 + hi.abs()) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Scales `shape` so its `J` hits `target` while staying `CONE_FLOOR` inside
/// the cone.
pub fn rescale_to_target(shape: &PotentialField, target: f64, grid: &SphereGrid) -> Result<PotentialField> {
    let j1 = energy_j(shape, grid);
    if j1 <= 0.0 {
        return Err(Error::TargetUnreachable { target, max_attainable: 0.0 });
    }
    let limit = cone_limit(shape, grid);
    // J is quadratic in the scale, so it never needs to exceed this
    let ceiling = (target / j1).sqrt() * 2.0;
    let hi = limit.min(ceiling);
    let max_attainable = j1 * hi * hi;
    if max_attainable < target * (1.0 - 1e-12) {
        return Err(Error::TargetUnreachable { target, max_attainable });
    }
    let lambda = golden_section(0.0, hi, |l| (j1 * l * l - target).abs(), 1e-15);
    Ok(shape.scale(lambda))
}

/// One even-Legendre potential. `1 + Δφ` is shaped as a random mixture of
/// zonal heat kernels centred at `±μ_j` and symmetrized dilation profiles,
/// so the shape stays positive and can concentrate at the poles; the scale
/// is then fitted to the `J` target.
pub fn gen_even_legendre_row(spec: &FamilySpec, row: usize, grid: &SphereGrid) -> Result<PotentialField> {
    let amplitude = spec.amplitude(row);
    let cap = spec.cap(grid);
    if amplitude == 0.0 || cap < 2 {
        return Ok(PotentialField::zero(grid));
    }
    let mut rng = spec.rng(row);
    let kernels = rng.gen_range(1..=3);
    // below this the truncated heat kernel is no longer positive
    let tau_min = 30.0 / (cap * cap) as f64;
    let tau_max = 0.5f64.max(tau_min);
    // dilation profiles decay like ((a-1)/(a+1))^l; keep the tail under 1e-8
    let a_max = {
        let r = (-18.4 / cap as f64).exp();
        (1.0 + r) / (1.0 - r)
    };
    let mut coeffs = vec![0.0; cap + 1];
    let mut total = 0.0;
    for k in 0..kernels {
        if k == 0 {
            // a dominant pole-concentrated dilation profile; its even part
            // keeps 1 + Δφ > 0
            let weight: f64 = rng.gen_range(0.7..1.0);
            total += weight;
            let a = a_max.powf(rng.gen_range(0.7..1.0));
            let profile = gen_mobius(a, grid)?;
            for l in (2..=cap).step_by(2) {
                coeffs[l] += weight * profile.coeffs()[l];
            }
        } else {
            let weight: f64 = rng.gen_range(0.05..0.3);
            total += weight;
            let tau = tau_min * (tau_max / tau_min).powf(rng.gen::<f64>());
            let center = rng.gen_range(0.0..1.0);
            let (p, _) = legendre_table(cap, center);
            for l in (2..=cap).step_by(2) {
                let lf = l as f64;
                let g = (2.0 * lf + 1.0) * (-lf * (lf + 1.0) * tau).exp() * p[l];
                coeffs[l] -= weight * 2.0 * g / (lf * (lf + 1.0));
            }
        }
    }
    for c in coeffs.iter_mut() {
        *c /= total;
    }
    let shape = PotentialField::from_coeffs(grid, coeffs)?.scale(amplitude);
    match spec.target_for(row) {
        Some(target) => rescale_to_target(&shape, target, grid),
        None => {
            let limit = cone_limit(&shape, grid);
            Ok(if limit < 1.0 { shape.scale(limit) } else { shape })
        }
    }
}

pub fn gen_even_legendre(spec: &FamilySpec, grid: &SphereGrid) -> Vec<Result<PotentialField>> {
    (0..spec.size).map(|row| gen_even_legendre_row(spec, row, grid)).collect()
}

/// `2 log(((1+a²) + (a²-1)μ) / (2a))`: the potential of the pullback of the
/// round metric under the dilation `z ↦ az` of the stereographic coordinate.
pub fn mobius_value(a: f64, mu: f64) -> f64 {
    let q = (1.0 + a * a) + (a * a - 1.0) * mu;
    2.0 * (q / (2.0 * a)).ln()
}

pub fn gen_mobius(a: f64, grid: &SphereGrid) -> Result<PotentialField> {
    if !(a >= 1.0) {
        return Err(Error::Config(format!("dilation factor {a} below 1")));
    }
    Ok(PotentialField::from_fn(grid, |mu| mobius_value(a, mu)))
}

/// A Gaussian bump `exp(-(μ-μ₀)²/(2σ²))` in `μ`, scaled into the cone.
pub fn gen_bump_row(spec: &FamilySpec, row: usize, grid: &SphereGrid) -> Result<PotentialField> {
    let amplitude = spec.amplitude(row);
    if amplitude == 0.0 {
        return Ok(PotentialField::zero(grid));
    }
    let mut rng = spec.rng(row);
    let center: f64 = rng.gen_range(-0.9..0.9);
    let sigma: f64 = rng.gen_range(0.15..0.6);
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let raw = PotentialField::from_fn(grid, |mu| sign * (-(mu - center).powi(2) / (2.0 * sigma * sigma)).exp());
    let shape = raw.add_constant(-raw.mean(grid)).scale(amplitude);
    match spec.target_for(row) {
        Some(target) => rescale_to_target(&shape, target, grid),
        None => {
            let fraction: f64 = rng.gen_range(0.2..0.9);
            Ok(shape.scale(fraction * cone_limit(&shape, grid).min(1e6)))
        }
    }
}

/// All rows of a family, in row order.
pub fn generate(spec: &FamilySpec, grid: &SphereGrid) -> Result<Vec<Result<PotentialField>>> {
    spec.validate()?;
    Ok(match spec.kind {
        FamilyKind::EvenLegendre => gen_even_legendre(spec, grid),
        FamilyKind::Bump => (0..spec.size).map(|r| gen_bump_row(spec, r, grid)).collect(),
        FamilyKind::Mobius => (0..spec.size)
            .map(|r| gen_mobius(spec.amplitude(r), grid))
            .collect(),
    })
}
