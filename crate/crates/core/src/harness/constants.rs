//! Empirical stand-ins for the existence-only constants, frozen in
//! `data/constants.json` by `mtlab fit-constants` and regressed against
//! afterwards.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::HolderParams;
use crate::DIM;

pub const SCHEMA_VERSION: u32 = 1;

const FROZEN: &str = include_str!("../../data/constants.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerificationConstants {
    pub schema_version: u32,
    /// Grid size the constants were fitted on.
    pub grid: usize,
    pub holder_p: f64,
    pub holder_kappa: f64,
    /// Radius of the perturbative regime for the smoothed potential.
    pub eps_hat: f64,
    /// Ratio of the smoothed-potential norm to the norm of its data.
    pub c_hat: f64,
    /// Bound on the Hölder quotient of the smoothed Ricci potential divided
    /// by `(1-t)^{1-α}`.
    pub b2_hat: f64,
    /// Bound on the end-of-flow oscillation ratio.
    pub c_lemma5: f64,
    pub c1: f64,
    pub c2: f64,
    /// Bound on `osc(φ_t - φ₁) / (J + 1)` over `t ∈ [1/2, 1]`.
    pub k_bound: f64,
    pub a_fit: f64,
    pub b_fit: f64,
    /// Cap on `B` in the envelope fit.
    pub b_max: f64,
    /// Metric-equivalence constant for the end-of-flow metric.
    pub equivalence: f64,
    /// `(a, J(φ_a))` for the dilation family.
    pub mobius_j: Vec<(f64, f64)>,
}

impl Default for VerificationConstants {
    fn default() -> Self {
        VerificationConstants {
            schema_version: SCHEMA_VERSION,
            grid: 128,
            holder_p: 6.0,
            holder_kappa: 0.5,
            eps_hat: 0.25,
            c_hat: 1.0,
            b2_hat: 1.0,
            c_lemma5: 1.0,
            c1: 1.0,
            c2: 0.0,
            k_bound: 1.0,
            a_fit: 0.0,
            b_fit: 0.0,
            b_max: 10.0,
            equivalence: 2.0,
            mobius_j: Vec::new(),
        }
    }
}

impl VerificationConstants {
    /// The checked-in values.
    pub fn frozen() -> Self {
        Self::from_json(FROZEN).expect("embedded constants file is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "constants schema {} does not match {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        self.holder()?;
        let gamma = self.gamma();
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Config(format!("exponent γ = {gamma} outside (0, 1]")));
        }
        for (name, v) in [
            ("eps_hat", self.eps_hat),
            ("c_hat", self.c_hat),
            ("b2_hat", self.b2_hat),
            ("c_lemma5", self.c_lemma5),
            ("c1", self.c1),
            ("c2", self.c2),
            ("k_bound", self.k_bound),
            ("b_max", self.b_max),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be finite and nonnegative")));
            }
        }
        if !(self.equivalence >= 1.0) {
            return Err(Error::Config("equivalence constant must be at least 1".into()));
        }
        Ok(())
    }

    /// `D = ε̂ / (4(B̂₂+1)(Ĉ+1)(ε̂+1))`
    pub fn d(&self) -> f64 {
        self.eps_hat / (4.0 * (self.b2_hat + 1.0) * (self.c_hat + 1.0) * (self.eps_hat + 1.0))
    }

    pub fn holder(&self) -> Result<HolderParams> {
        HolderParams::new(self.holder_p, self.holder_kappa, self.d())
    }

    pub fn alpha(&self) -> f64 {
        (self.holder_p + self.holder_kappa - 2.0) / (self.holder_p - 1.0)
    }

    pub fn gamma(&self) -> f64 {
        1.0 - self.alpha()
    }

    /// `A_γ = C₂ / (4K + 2)^α`
    pub fn a_gamma(&self) -> f64 {
        self.c2 / (4.0 * self.k_bound + 2.0).powf(self.alpha())
    }

    /// `B_γ = 2C₁/n + A_γ`
    pub fn b_gamma(&self) -> f64 {
        2.0 * self.c1 / DIM as f64 + self.a_gamma()
    }
}
