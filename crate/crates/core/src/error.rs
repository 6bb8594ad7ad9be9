use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("orbit diverged after {steps} steps")]
    DivergedOrbit { steps: u64 },

    #[error("only {found} orbit returns fell in the sampling window (need {needed})")]
    InsufficientSamples { found: usize, needed: usize },

    #[error("newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular jacobian")]
    SingularJacobian,

    #[error("quadrature not converged: {coarse} vs {fine} on doubled grid")]
    QuadratureNonConvergent { coarse: f64, fine: f64 },

    #[error("trivial curve is not reducible (|lambda| >= |mu|)")]
    NotReducible,

    #[error("lyapunov exponent is -inf")]
    NegativeInfinity,

    #[error("no tangency in the epsilon search interval at alpha = {alpha}")]
    NoTangencyInRange { alpha: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
