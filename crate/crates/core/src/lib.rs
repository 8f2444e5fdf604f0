//! Numerical laboratory for the Moser–Trudinger inequality `F ≥ A·J - B` on
//! the round 2-sphere, restricted to circle-invariant Kähler potentials.
//!
//! The crate is organized bottom-up:
//!
//! * [`sphere`]: Gauss–Legendre pseudospectral discretization, the complex
//!   Laplacian, volume ratios and Ricci potentials.
//! * [`functionals`]: the energies `I`, `J`, `F`, `F⁰` and their identities.
//! * [`path`]: the Monge–Ampère continuity path `ω_{φ_t}` and its
//!   diagnostics.
//! * [`flow`]: the normalized Kähler–Ricci flow used as a smoother.
//! * [`harness`]: potential families, sweeps, verification suite, reports.

pub mod error;
pub mod flow;
pub mod functionals;
pub mod harness;
pub mod linalg;
pub mod path;
pub mod quadrature;
pub mod sphere;

pub use error::{Error, Result};

/// Complex dimension of the model geometry.
pub const DIM: usize = 1;
