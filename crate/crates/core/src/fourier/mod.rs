//! Invariant curves as truncated Fourier series: collocation Newton solver,
//! integral Lyapunov exponent, and continuation of zero-Lyapunov branches.

mod continuation;
mod curve;
mod solve;

pub use continuation::{
    branch_curve_norms, continue_invariant_curve, continue_zero_lyapunov, logistic_doubling, read_coefficients,
    write_branch_csv, write_coefficients, zero_lyapunov_seed, BifurcationBranch, ContinuationPoint, CurveBranch,
    StepControl, TerminalReason, NORM_GRID, START_ORDER,
};
pub use curve::FourierCurve;
pub use solve::{
    curve_fiber_derivative, curve_lyapunov, curve_lyapunov_gradient, invariance_residual, newton_report,
    newton_solve, LyapunovGradient, NewtonReport, Residual, NEWTON_MAX_ITER, QUADRATURE_TOL, SOLVER_TOL,
};
