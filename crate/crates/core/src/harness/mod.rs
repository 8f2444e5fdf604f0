//! Potential families, sweeps, the verification suite and report output.

pub mod constants;
pub mod families;
pub mod fit;
pub mod plots;
pub mod sweep;
pub mod verify;

pub use constants::VerificationConstants;
pub use families::{FamilyKind, FamilySpec};
pub use sweep::{run_sweep, SweepConfig, SweepReport};
pub use verify::{verify_suite, Verdict, VerifyConfig};
