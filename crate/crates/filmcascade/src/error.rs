//! Error taxonomy shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("unsupported derivative order {order} (max {max})")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("film rupture: 1 + eta <= 0 on the grid")]
    FilmRupture,

    #[error("blow-up detected at t = {t}: {what}")]
    BlowUp { t: f64, what: String },

    #[error("degenerate geometry: J <= 0 somewhere on the strip")]
    GeometryDegenerate,

    #[error("degenerate division: |{what}| < {guard} on the grid")]
    DivisionDegenerate { what: String, guard: f64 },

    #[error("pressure fixed-point did not contract (update {update} after {iters} iterations)")]
    PressureDivergence { update: f64, iters: usize },

    #[error("eigenvalues did not converge under vertical refinement (drift {drift})")]
    Resolution { drift: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("gate failure: {0}")]
    GateFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
