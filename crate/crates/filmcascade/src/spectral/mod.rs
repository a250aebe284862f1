//! Periodic pseudo-spectral engine: Fourier in x, Chebyshev collocation in y,
//! Fourier multipliers, delta-weighted Sobolev norms, and the TFLM snapshot
//! format.

pub mod field;
pub mod grid;
pub mod scalar;
pub mod snapshot;
pub mod surface;

pub use field::{BulkField, Field2, Row, Row2};
pub use grid::Grid;
pub use scalar::{Dual, Dual2, Scalar};
pub use snapshot::Snapshot;
pub use surface::{apply_multiplier_bulk, MultiplierSpec, SurfaceField, TWO_PI};
