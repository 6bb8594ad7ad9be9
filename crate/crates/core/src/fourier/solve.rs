use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

use super::FourierCurve;
use crate::linalg::lu_solve;
use crate::map::{wrap_unit, MapFamily, ParametricFamily};
use crate::{Error, Result};

/// Sup-norm target for the collocation residual.
pub const SOLVER_TOL: f64 = 1e-10;
/// Largest accepted change of the Lyapunov quadrature under grid doubling.
pub const QUADRATURE_TOL: f64 = 1e-8;
pub const NEWTON_MAX_ITER: usize = 30;
const MIN_QUADRATURE_GRID: usize = 256;
const MAX_QUADRATURE_GRID: usize = 1 << 17;

/// Collocation values of `u(θⱼ + pω) − F^p(θⱼ, u(θⱼ))`.
#[derive(Clone, Debug)]
pub struct Residual {
    values: Vec<f64>,
}

impl Residual {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Discrete Fourier coefficients of the residual, in curve layout.
    pub fn coefficients(&self) -> FourierCurve {
        FourierCurve::from_node_values(&self.values).expect("collocation grid is odd")
    }
}

/// Trigonometric basis rows `[1, cos 2πkθ, sin 2πkθ, …]` written into `row`.
pub(crate) fn basis_row(theta: f64, row: &mut [f64]) {
    let (s1, c1) = (TAU * wrap_unit(theta)).sin_cos();
    row[0] = 1.0;
    let (mut c, mut s) = (1.0, 0.0);
    for k in 1..=row.len() / 2 {
        let nc = c * c1 - s * s1;
        s = s * c1 + c * s1;
        c = nc;
        row[2 * k - 1] = c;
        row[2 * k] = s;
    }
}

/// Basis matrices at the collocation nodes and at the nodes shifted by `pω`.
#[derive(Clone, Debug)]
pub(crate) struct Collocation {
    pub period: usize,
    pub omega: f64,
    pub nodes: Vec<f64>,
    pub at_nodes: DMatrix<f64>,
    pub at_shifted: DMatrix<f64>,
}

impl Collocation {
    pub fn new(order: usize, period: usize, omega: f64) -> Self {
        let n = 2 * order + 1;
        let nodes: Vec<f64> = (0..n).map(|j| j as f64 / n as f64).collect();
        let shift = period as f64 * omega;
        let mut at_nodes = DMatrix::zeros(n, n);
        let mut at_shifted = DMatrix::zeros(n, n);
        let mut row = vec![0.0; n];
        for (j, &t) in nodes.iter().enumerate() {
            basis_row(t, &mut row);
            for (m, v) in row.iter().enumerate() {
                at_nodes[(j, m)] = *v;
            }
            basis_row(t + shift, &mut row);
            for (m, v) in row.iter().enumerate() {
                at_shifted[(j, m)] = *v;
            }
        }
        Collocation {
            period,
            omega,
            nodes,
            at_nodes,
            at_shifted,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn matches(&self, order: usize, period: usize, omega: f64) -> bool {
        self.len() == 2 * order + 1 && self.period == period && self.omega == omega
    }

    /// `(u(θⱼ), u(θⱼ + pω))` for every node.
    fn values(&self, c: &FourierCurve) -> (DVector<f64>, DVector<f64>) {
        let coeffs = DVector::from_column_slice(c.coeffs());
        (&self.at_nodes * &coeffs, &self.at_shifted * &coeffs)
    }
}

/// `F^p(θ, x)` and its fiber derivative `Π ∂ₓf` along the p steps.
fn compose<M: MapFamily>(map: &M, theta: f64, x: f64, period: usize) -> (f64, f64) {
    let omega = map.omega();
    let (mut x, mut prod) = (x, 1.0);
    for k in 0..period {
        let t = wrap_unit(theta + k as f64 * omega);
        prod *= map.dfiber_dx(t, x);
        x = map.fiber(t, x);
    }
    (x, prod)
}

/// As [`compose`], also returning `∂F^p/∂q` for parameter `which`.
fn compose_param<M: ParametricFamily>(
    map: &M,
    theta: f64,
    x: f64,
    period: usize,
    which: usize,
) -> (f64, f64, f64) {
    let omega = map.omega();
    let (mut x, mut prod, mut dq) = (x, 1.0, 0.0);
    for k in 0..period {
        let t = wrap_unit(theta + k as f64 * omega);
        let fx = map.dfiber_dx(t, x);
        dq = map.dfiber_dparam(t, x, which) + fx * dq;
        prod *= fx;
        x = map.fiber(t, x);
    }
    (x, prod, dq)
}

pub fn invariance_residual<M: MapFamily>(c: &FourierCurve, map: &M, period: usize) -> Residual {
    let colloc = Collocation::new(c.order(), period, map.omega());
    residual_with(&colloc, c, map).0
}

fn residual_with<M: MapFamily>(
    colloc: &Collocation,
    c: &FourierCurve,
    map: &M,
) -> (Residual, Vec<f64>) {
    let (u, shifted) = colloc.values(c);
    let mut values = Vec::with_capacity(colloc.len());
    let mut factors = Vec::with_capacity(colloc.len());
    for (j, &t) in colloc.nodes.iter().enumerate() {
        let (xp, a) = compose(map, t, u[j], colloc.period);
        values.push(shifted[j] - xp);
        factors.push(a);
    }
    (Residual { values }, factors)
}

/// Outcome of a Newton solve, with the residual sup-norm before each step
/// and after the last one.
#[derive(Clone, Debug)]
pub struct NewtonReport {
    pub curve: FourierCurve,
    pub residuals: Vec<f64>,
}

impl NewtonReport {
    pub fn iterations(&self) -> usize {
        self.residuals.len() - 1
    }

    /// Whether every step taken from below `threshold` contracted the
    /// residual by at least `factor` (or landed under `tol`).
    pub fn contracts_quadratically(&self, threshold: f64, factor: f64, tol: f64) -> bool {
        contracts(&self.residuals, threshold, factor, tol)
    }
}

pub(crate) fn contracts(residuals: &[f64], threshold: f64, factor: f64, tol: f64) -> bool {
    residuals
        .windows(2)
        .filter(|w| w[0] < threshold)
        .all(|w| w[1] < tol || w[1] * factor <= w[0])
}

/// Newton iteration on the collocation system for a `period`-periodic
/// invariant curve.
pub fn newton_solve<M: MapFamily>(
    c0: &FourierCurve,
    map: &M,
    period: usize,
    tol: f64,
    max_iter: usize,
) -> Result<FourierCurve> {
    newton_report(c0, map, period, tol, max_iter).map(|r| r.curve)
}

pub fn newton_report<M: MapFamily>(
    c0: &FourierCurve,
    map: &M,
    period: usize,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonReport> {
    let colloc = Collocation::new(c0.order(), period, map.omega());
    newton_with(&colloc, c0, map, tol, max_iter)
}

pub(crate) fn newton_with<M: MapFamily>(
    colloc: &Collocation,
    c0: &FourierCurve,
    map: &M,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonReport> {
    let n = colloc.len();
    let mut c = c0.clone();
    let mut residuals = Vec::new();
    for _ in 0..=max_iter {
        let (res, factors) = residual_with(colloc, &c, map);
        let norm = res.sup_norm();
        residuals.push(norm);
        if !norm.is_finite() {
            break;
        }
        if norm < tol {
            return Ok(NewtonReport { curve: c, residuals });
        }
        if residuals.len() > max_iter {
            break;
        }
        let mut jac = colloc.at_shifted.clone();
        for j in 0..n {
            let a = factors[j];
            for m in 0..n {
                jac[(j, m)] -= a * colloc.at_nodes[(j, m)];
            }
        }
        let delta = lu_solve(jac, res.values())?;
        for (ci, d) in c.coeffs_mut().iter_mut().zip(&delta) {
            *ci -= d;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: residuals.last().copied().unwrap_or(f64::NAN),
    })
}

fn first_grid(order: usize) -> usize {
    (4 * (2 * order + 1)).next_power_of_two().max(MIN_QUADRATURE_GRID)
}

/// Midpoint-rule value of `(1/p) ∫ ln|Π ∂ₓf| dθ` on `m` points.
fn quadrature<M: MapFamily>(c: &FourierCurve, map: &M, period: usize, m: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..m {
        let t = (i as f64 + 0.5) / m as f64;
        let (_, a) = compose(map, t, c.eval(t), period);
        sum += a.abs().ln();
    }
    sum / (m as f64 * period as f64)
}

/// Integral Lyapunov exponent of a `period`-periodic invariant curve.
///
/// The grid is doubled until two successive values agree to
/// [`QUADRATURE_TOL`]; a Richardson extrapolation over three grids is also
/// accepted, which handles isolated zeros sitting at a grid-symmetric
/// position.
pub fn curve_lyapunov<M: MapFamily>(c: &FourierCurve, map: &M, period: usize) -> Result<f64> {
    let mut m = first_grid(c.order());
    let mut prev = quadrature(c, map, period, m);
    let mut prev_extrap = f64::NAN;
    let mut last_diff = (prev, f64::NAN);
    while m < MAX_QUADRATURE_GRID {
        m *= 2;
        let next = quadrature(c, map, period, m);
        if (next - prev).abs() <= QUADRATURE_TOL {
            return Ok(next);
        }
        let extrap = 2.0 * next - prev;
        if (extrap - prev_extrap).abs() <= QUADRATURE_TOL {
            return Ok(extrap);
        }
        last_diff = (prev, next);
        prev_extrap = extrap;
        prev = next;
    }
    Err(Error::QuadratureNonConvergent {
        coarse: last_diff.0,
        fine: last_diff.1,
    })
}

/// Lyapunov quadrature together with its derivatives.
#[derive(Clone, Debug)]
pub struct LyapunovGradient {
    pub value: f64,
    pub grid: usize,
    /// `∂Λ/∂cₘ` in curve coefficient layout.
    pub d_coeffs: Vec<f64>,
    /// `∂Λ/∂q` for both family parameters.
    pub d_params: [f64; 2],
}

fn quadrature_gradient<M: ParametricFamily>(
    c: &FourierCurve,
    map: &M,
    period: usize,
    m: usize,
) -> LyapunovGradient {
    let omega = map.omega();
    let len = c.len();
    let mut value = 0.0;
    let mut d_coeffs = vec![0.0; len];
    let mut d_params = [0.0; 2];
    let mut row = vec![0.0; len];
    for i in 0..m {
        let t = (i as f64 + 0.5) / m as f64;
        let mut x = c.eval(t);
        // w: ∂/∂x₀ of Σ ln|aₖ|; dq: ∂xₖ/∂q per parameter.
        let (mut w, mut prod, mut dq) = (0.0, 1.0, [0.0; 2]);
        for k in 0..period {
            let tk = wrap_unit(t + k as f64 * omega);
            let fx = map.dfiber_dx(tk, x);
            let fxx = map.d2fiber_dx2(tk, x);
            value += fx.abs().ln();
            w += fxx / fx * prod;
            for (q, d) in dq.iter_mut().enumerate() {
                d_params[q] += (map.d2fiber_dx_dparam(tk, x, q) + fxx * *d) / fx;
                *d = map.dfiber_dparam(tk, x, q) + fx * *d;
            }
            prod *= fx;
            x = map.fiber(tk, x);
        }
        basis_row(t, &mut row);
        for (g, b) in d_coeffs.iter_mut().zip(&row) {
            *g += w * b;
        }
    }
    let scale = 1.0 / (m as f64 * period as f64);
    value *= scale;
    d_coeffs.iter_mut().for_each(|g| *g *= scale);
    d_params.iter_mut().for_each(|g| *g *= scale);
    LyapunovGradient {
        value,
        grid: m,
        d_coeffs,
        d_params,
    }
}

/// [`curve_lyapunov`] with analytic derivatives with respect to the
/// coefficients and the parameters, taken on the finer of the first two
/// grids that agree to [`QUADRATURE_TOL`].
pub fn curve_lyapunov_gradient<M: ParametricFamily>(
    c: &FourierCurve,
    map: &M,
    period: usize,
) -> Result<LyapunovGradient> {
    let mut m = first_grid(c.order());
    let mut prev = quadrature(c, map, period, m);
    while m < MAX_QUADRATURE_GRID {
        m *= 2;
        let next = quadrature_gradient(c, map, period, m);
        if (next.value - prev).abs() <= QUADRATURE_TOL {
            return Ok(next);
        }
        if !next.value.is_finite() {
            return Err(Error::QuadratureNonConvergent {
                coarse: prev,
                fine: next.value,
            });
        }
        prev = next.value;
    }
    Err(Error::QuadratureNonConvergent {
        coarse: prev,
        fine: f64::NAN,
    })
}

/// Solution of the extended system `(G, Λ) = 0` with one parameter free.
#[derive(Clone, Debug)]
pub(crate) struct ExtendedSolution<M> {
    pub curve: FourierCurve,
    pub map: M,
    pub lyapunov: f64,
    pub residuals: Vec<f64>,
}

/// Newton iteration on `G̃ = (G, Λ)` in the coefficients and parameter `free`.
pub(crate) fn newton_extended<M: ParametricFamily>(
    colloc: &Collocation,
    c0: &FourierCurve,
    map0: &M,
    free: usize,
    tol: f64,
    max_iter: usize,
) -> Result<ExtendedSolution<M>> {
    let n = colloc.len();
    let mut c = c0.clone();
    let mut params = map0.params();
    let mut residuals = Vec::new();
    for _ in 0..=max_iter {
        let map = map0.with_params(params);
        let (u, shifted) = colloc.values(&c);
        let mut rhs = Vec::with_capacity(n + 1);
        let mut factors = Vec::with_capacity(n);
        let mut dparam = Vec::with_capacity(n);
        for (j, &t) in colloc.nodes.iter().enumerate() {
            let (xp, a, dq) = compose_param(&map, t, u[j], colloc.period, free);
            rhs.push(shifted[j] - xp);
            factors.push(a);
            dparam.push(-dq);
        }
        let lyap = curve_lyapunov_gradient(&c, &map, colloc.period)?;
        rhs.push(lyap.value);
        let norm = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        residuals.push(norm);
        if !norm.is_finite() {
            break;
        }
        if norm < tol {
            return Ok(ExtendedSolution {
                curve: c,
                map,
                lyapunov: lyap.value,
                residuals,
            });
        }
        if residuals.len() > max_iter {
            break;
        }
        let mut jac = DMatrix::zeros(n + 1, n + 1);
        for j in 0..n {
            let a = factors[j];
            for m in 0..n {
                jac[(j, m)] = colloc.at_shifted[(j, m)] - a * colloc.at_nodes[(j, m)];
            }
            jac[(j, n)] = dparam[j];
        }
        for (m, g) in lyap.d_coeffs.iter().enumerate() {
            jac[(n, m)] = *g;
        }
        jac[(n, n)] = lyap.d_params[free];
        let delta = lu_solve(jac, &rhs)?;
        for (ci, d) in c.coeffs_mut().iter_mut().zip(&delta) {
            *ci -= d;
        }
        params[free] -= delta[n];
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: residuals.last().copied().unwrap_or(f64::NAN),
    })
}

/// Minimum of `|∂ₓF^p(θ, u(θ))|` over `grid` uniform points, and whether
/// its sign changes.
pub fn curve_fiber_derivative<M: MapFamily>(
    c: &FourierCurve,
    map: &M,
    period: usize,
    grid: usize,
) -> (f64, bool) {
    let mut min_abs = f64::INFINITY;
    let (mut pos, mut neg) = (false, false);
    for i in 0..grid {
        let t = i as f64 / grid as f64;
        let (_, a) = compose(map, t, c.eval(t), period);
        min_abs = min_abs.min(a.abs());
        pos |= a > 0.0;
        neg |= a < 0.0;
    }
    (min_abs, pos && neg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::curve_mesh;
    use crate::map::{FlmParams, ModelParams};

    #[test]
    fn residual_examples() {
        let flm = FlmParams::new(2.5, 0.0);
        let r = invariance_residual(&FourierCurve::constant(8, 0.6), &flm, 1);
        assert!(r.sup_norm() < 1e-14);

        let r = invariance_residual(&FourierCurve::constant(8, 0.5), &flm, 1);
        let coeffs = r.coefficients();
        assert!((coeffs.a0() + 0.125).abs() < 1e-14);
        assert!(coeffs.coeffs()[1..].iter().all(|v| v.abs() < 1e-14));

        let model = ModelParams::new(0.3, 0.1);
        let r = invariance_residual(&FourierCurve::constant(8, 0.0), &model, 1);
        assert_eq!(r.sup_norm(), 0.0);
    }

    #[test]
    fn newton_recovers_logistic_fixed_point() {
        let flm = FlmParams::new(2.5, 0.0);
        let c = newton_solve(&FourierCurve::constant(8, 0.55), &flm, 1, SOLVER_TOL, 20).unwrap();
        assert!((c.a0() - 0.6).abs() < 1e-12);
        assert!(c.coeffs()[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn newton_recovers_logistic_two_cycle() {
        let alpha: f64 = 3.05;
        let disc = ((alpha + 1.0) * (alpha - 3.0)).sqrt();
        let hi = (alpha + 1.0 + disc) / (2.0 * alpha);
        let lo = (alpha + 1.0 - disc) / (2.0 * alpha);
        let flm = FlmParams::new(alpha, 0.0);
        for (seed, want) in [(hi + 0.01, hi), (lo - 0.01, lo)] {
            let c = newton_solve(&FourierCurve::constant(4, seed), &flm, 2, SOLVER_TOL, 20).unwrap();
            assert!((c.a0() - want).abs() < 1e-12, "{} vs {want}", c.a0());
        }
    }

    #[test]
    fn newton_matches_backward_mesh() {
        let flm = FlmParams::new(2.5, 0.05);
        let report = newton_report(&FourierCurve::constant(32, 0.6), &flm, 1, SOLVER_TOL, 20).unwrap();
        assert!(report.contracts_quadratically(1e-4, 10.0, SOLVER_TOL));
        let mesh = curve_mesh(&flm, 256, 200, 0.5).unwrap();
        for (t, x) in mesh.thetas.iter().zip(&mesh.xs) {
            assert!((report.curve.eval(*t) - x).abs() < 1e-8);
        }
    }

    #[test]
    fn lyapunov_of_constant_curve() {
        let flm = FlmParams::new(2.5, 0.0);
        let l = curve_lyapunov(&FourierCurve::constant(4, 0.6), &flm, 1).unwrap();
        assert!((l - 0.5f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn lyapunov_of_trivial_model_curve() {
        let m = ModelParams::new(3.0, 1.0);
        let l = curve_lyapunov(&FourierCurve::constant(4, 0.0), &m, 1).unwrap();
        assert!((l - ((3.0 + 8f64.sqrt()) / 2.0).ln()).abs() < 1e-8);

        let m = ModelParams::new(0.0, 2.0);
        let l = curve_lyapunov(&FourierCurve::constant(4, 0.0), &m, 1).unwrap();
        assert!(l.abs() < 1e-8, "{l}");
    }

    #[test]
    fn lyapunov_gradient_matches_fd() {
        let flm = FlmParams::new(2.8, 0.1);
        let c = newton_solve(&FourierCurve::constant(16, 0.64), &flm, 1, SOLVER_TOL, 20).unwrap();
        let g = curve_lyapunov_gradient(&c, &flm, 1).unwrap();
        let h = 1e-6;
        for m in [0, 1, 2, 5] {
            let mut up = c.clone();
            up.coeffs_mut()[m] += h;
            let mut dn = c.clone();
            dn.coeffs_mut()[m] -= h;
            let fd = (quadrature(&up, &flm, 1, g.grid) - quadrature(&dn, &flm, 1, g.grid)) / (2.0 * h);
            assert!((fd - g.d_coeffs[m]).abs() < 1e-6, "coeff {m}: {fd} vs {}", g.d_coeffs[m]);
        }
        for q in 0..2 {
            let mut p = flm.params();
            p[q] += h;
            let up = quadrature(&c, &flm.with_params(p), 1, g.grid);
            p[q] -= 2.0 * h;
            let dn = quadrature(&c, &flm.with_params(p), 1, g.grid);
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - g.d_params[q]).abs() < 1e-6, "param {q}: {fd} vs {}", g.d_params[q]);
        }
    }

    #[test]
    fn extended_system_finds_logistic_doubling() {
        let flm = FlmParams::new(2.95, 0.0);
        let colloc = Collocation::new(4, 1, flm.omega());
        let sol = newton_extended(&colloc, &FourierCurve::constant(4, 0.66), &flm, 0, 1e-12, 30).unwrap();
        assert!((sol.map.alpha - 3.0).abs() < 1e-10);
        assert!((sol.curve.a0() - 2.0 / 3.0).abs() < 1e-10);
        assert!(sol.residuals.len() < 10, "{:?}", sol.residuals);
        assert!(contracts(&sol.residuals, 1e-4, 10.0, 1e-12), "{:?}", sol.residuals);
    }
}
