//! Numerical toolkit for quasi-periodically forced one-dimensional maps,
//! centred on the forced logistic map `x̄ = α x (1 − x)(1 + ε cos 2πθ)`.

pub mod critical;
pub mod diagnostics;
mod error;
pub mod fourier;
pub mod linalg;
pub mod map;
pub mod model;
pub mod scan;

pub use error::{Error, Result};
pub use map::{Angle, CustomMap, FlmParams, MapFamily, ModelParams, OrbitState, ParametricFamily};
