//! filmcascade: pseudo-spectral simulation and verification toolkit for
//! viscous thin-film flow down an inclined plane.
//!
//! The crate implements the reduced long-wave model hierarchy
//! (Burgers -> KdV-Burgers -> Kawahara -> Benney), a solver for the
//! free-surface Navier-Stokes system flattened to the fixed strip
//! T x (0,1), the associated elliptic pressure problem, and the
//! energy/dissipation functionals used as numerical monitors, together
//! with an experiment harness and CLI.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod models;
pub mod nssolver;
pub mod params;
pub mod pressure;
pub mod spectral;
pub mod stability;
pub mod transform;

pub use error::{Error, Result};
