//! Discretization of circle-invariant functions on the unit round sphere.

pub mod field;
pub mod grid;
pub mod metric;

pub use field::{gradient_norm_sq, inverse_laplacian, laplacian, FieldRecord, Parity, PotentialField};
pub use grid::{SphereGrid, SPHERE_AREA};
pub use metric::{metric_from_potential, MetricState};

/// Builds a grid with `n` Gauss–Legendre nodes.
pub fn build_grid(n: usize) -> crate::Result<SphereGrid> {
    SphereGrid::new(n)
}
