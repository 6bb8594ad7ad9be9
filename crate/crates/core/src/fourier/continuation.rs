use std::fmt;
use std::io::{self, Write};

use super::solve::{
    contracts, curve_fiber_derivative, curve_lyapunov, newton_extended, newton_with, Collocation, NEWTON_MAX_ITER,
    SOLVER_TOL,
};
use super::FourierCurve;
use crate::map::{FlmParams, MapFamily};
use crate::{Error, Result};

/// θ-grid for derivative sup-norms and the fiber-derivative minimum.
pub const NORM_GRID: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationPoint {
    pub curve: FourierCurve,
    pub alpha: f64,
    pub epsilon: f64,
    pub lyapunov: f64,
    /// The curve is invariant under the `period`-th iterate.
    pub period: usize,
}

impl ContinuationPoint {
    pub fn params(&self) -> FlmParams {
        FlmParams::new(self.alpha, self.epsilon)
    }

    fn param(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.alpha
        } else {
            self.epsilon
        }
    }

    /// `min_θ |∂ₓF^p(θ, u(θ))|` on [`NORM_GRID`] points.
    pub fn min_abs_dxf(&self) -> f64 {
        curve_fiber_derivative(&self.curve, &self.params(), self.period, NORM_GRID).0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminalReason {
    /// Every step size down to the last allowed halving failed.
    StepFailure,
    /// The Lyapunov quadrature stopped converging along the curve.
    LyapunovNondifferentiable,
    /// The next step would leave the admissible parameter domain.
    Boundary,
    /// The configured maximum number of points was reached.
    PointBudget,
}

impl TerminalReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminalReason::StepFailure => "step_failure",
            TerminalReason::LyapunovNondifferentiable => "lyapunov_nondifferentiable",
            TerminalReason::Boundary => "boundary",
            TerminalReason::PointBudget => "point_budget",
        }
    }
}

impl fmt::Display for TerminalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct BifurcationBranch {
    pub points: Vec<ContinuationPoint>,
    /// `k` of the period-doubling curve `D_k`.
    pub label: usize,
    pub terminal_reason: TerminalReason,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepControl {
    pub initial_step: f64,
    pub max_step: f64,
    pub max_halvings: u32,
    pub growth: f64,
    pub successes_to_grow: u32,
    pub max_order: usize,
    /// Relative size of the highest harmonics above which the order doubles.
    pub tail_tol: f64,
    pub max_points: usize,
    /// Sign of the first step along the stepped parameter.
    pub direction: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            initial_step: 1e-3,
            max_step: 1e-2,
            max_halvings: 8,
            growth: 1.3,
            successes_to_grow: 3,
            max_order: 1024,
            tail_tol: 1e-7,
            max_points: 5000,
            direction: 1.0,
        }
    }
}

pub const START_ORDER: usize = 32;

/// Largest of the last two harmonics relative to the largest coefficient.
fn tail_ratio(c: &FourierCurve) -> f64 {
    let n = c.order();
    let scale = c.coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if n < 2 || scale == 0.0 {
        return c.tail_ratio();
    }
    let tail = [c.a(n), c.b(n), c.a(n - 1), c.b(n - 1)]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    tail / scale
}

fn in_domain(alpha: f64, epsilon: f64) -> bool {
    alpha > 0.0 && alpha <= 4.0 && epsilon.abs() <= 1.0 && FlmParams::new(alpha, epsilon).is_compact()
}

struct Solver {
    colloc: Option<Collocation>,
}

impl Solver {
    fn collocation(&mut self, order: usize, period: usize, omega: f64) -> &Collocation {
        let stale = self.colloc.as_ref().map_or(true, |c| !c.matches(order, period, omega));
        if stale {
            self.colloc = Some(Collocation::new(order, period, omega));
        }
        self.colloc.as_ref().expect("just filled")
    }
}

enum Attempt {
    Accepted(ContinuationPoint),
    Failed(Error),
}

/// Solve with order doubling until the tail check passes or the cap is hit.
fn solve_adaptive<F>(
    solver: &mut Solver,
    guess: FourierCurve,
    period: usize,
    max_order: usize,
    tail_tol: f64,
    mut solve: F,
) -> Attempt
where
    F: FnMut(&Collocation, &FourierCurve) -> Result<ContinuationPoint>,
{
    let mut guess = guess;
    loop {
        let order = guess.order();
        let colloc = solver.collocation(order, period, crate::map::GOLDEN_OMEGA);
        match solve(colloc, &guess) {
            Ok(pt) => {
                if tail_ratio(&pt.curve) < tail_tol {
                    return Attempt::Accepted(pt);
                }
                if 2 * order > max_order {
                    return Attempt::Failed(Error::NoConvergence {
                        iterations: 0,
                        residual: tail_ratio(&pt.curve),
                    });
                }
                guess = pt.curve.with_order(2 * order);
            }
            Err(e) => return Attempt::Failed(e),
        }
    }
}

fn reducible(pt: &ContinuationPoint) -> bool {
    let (min_abs, sign_change) = curve_fiber_derivative(&pt.curve, &pt.params(), pt.period, NORM_GRID);
    min_abs > 0.0 && !sign_change
}

/// Secant predictor from the last two accepted points for a target value
/// `target` of parameter `axis`.
fn predict(points: &[ContinuationPoint], axis: usize, target: f64) -> (FourierCurve, f64) {
    let last = points.last().expect("nonempty branch");
    let other = 1 - axis;
    if points.len() < 2 {
        return (last.curve.clone(), last.param(other));
    }
    let prev = &points[points.len() - 2];
    let ds = last.param(axis) - prev.param(axis);
    if ds == 0.0 {
        return (last.curve.clone(), last.param(other));
    }
    let t = (target - last.param(axis)) / ds;
    let other_value = last.param(other) + t * (last.param(other) - prev.param(other));
    let mut curve = last.curve.clone();
    let prev_curve = prev.curve.with_order(curve.order());
    for (c, p) in curve.coeffs_mut().iter_mut().zip(prev_curve.coeffs()) {
        *c += t * (*c - p);
    }
    (curve, other_value)
}

/// Step-size bookkeeping shared by both continuation drivers.
struct StepState<'a> {
    ctl: &'a StepControl,
    step: f64,
    successes: u32,
}

impl<'a> StepState<'a> {
    fn new(ctl: &'a StepControl) -> Self {
        StepState {
            ctl,
            step: ctl.initial_step,
            successes: 0,
        }
    }

    fn accept(&mut self) {
        self.successes += 1;
        if self.successes >= self.ctl.successes_to_grow {
            self.step = (self.step * self.ctl.growth).min(self.ctl.max_step);
            self.successes = 0;
        }
    }

    /// Halve the step; `false` once it would drop below the initial step
    /// halved `max_halvings` times.
    fn reject(&mut self) -> bool {
        let floor = self.ctl.initial_step * 0.5f64.powi(self.ctl.max_halvings as i32);
        self.successes = 0;
        self.step *= 0.5;
        self.step >= floor * (1.0 - 1e-12)
    }
}

fn failure_reason(err: &Error) -> TerminalReason {
    match err {
        Error::QuadratureNonConvergent { .. } => TerminalReason::LyapunovNondifferentiable,
        _ => TerminalReason::StepFailure,
    }
}

/// Continue a zero-Lyapunov curve `G̃ = (G, Λ) = 0` through the `(α, ε)`
/// plane, stepping whichever parameter the branch currently moves along
/// fastest and solving for the other.
pub fn continue_zero_lyapunov(start: ContinuationPoint, label: usize, ctl: &StepControl) -> BifurcationBranch {
    let period = start.period;
    let mut solver = Solver { colloc: None };
    let mut points = vec![start];
    let mut state = StepState::new(ctl);
    let terminal_reason = loop {
        if points.len() >= ctl.max_points {
            break TerminalReason::PointBudget;
        }
        let last = points.last().expect("nonempty");
        let (axis, sign) = if points.len() < 2 {
            (1, ctl.direction.signum())
        } else {
            let prev = &points[points.len() - 2];
            let (da, de) = (last.alpha - prev.alpha, last.epsilon - prev.epsilon);
            if de.abs() >= da.abs() {
                (1, de.signum())
            } else {
                (0, da.signum())
            }
        };
        let target = last.param(axis) + sign * state.step;
        let (guess, other) = predict(&points, axis, target);
        let (alpha, epsilon) = if axis == 0 { (target, other) } else { (other, target) };
        if !in_domain(alpha, epsilon) {
            if state.reject() {
                continue;
            }
            break TerminalReason::Boundary;
        }
        let seed_map = FlmParams::new(alpha, epsilon);
        let free = 1 - axis;
        let attempt = solve_adaptive(&mut solver, guess, period, ctl.max_order, ctl.tail_tol, |colloc, c| {
            let sol = newton_extended(colloc, c, &seed_map, free, SOLVER_TOL, NEWTON_MAX_ITER)?;
            if !contracts(&sol.residuals, 1e-4, 10.0, SOLVER_TOL) {
                log::debug!("slow newton tail at ({alpha}, {epsilon}): {:?}", sol.residuals);
            }
            Ok(ContinuationPoint {
                curve: sol.curve,
                alpha: sol.map.alpha,
                epsilon: sol.map.epsilon,
                lyapunov: sol.lyapunov,
                period,
            })
        });
        let outcome = match attempt {
            Attempt::Accepted(pt) => {
                let jump = (pt.alpha - last.alpha).abs().max((pt.epsilon - last.epsilon).abs());
                if jump > ctl.max_step {
                    Err(Error::NoConvergence {
                        iterations: 0,
                        residual: jump,
                    })
                } else if !in_domain(pt.alpha, pt.epsilon) || !reducible(&pt) {
                    Err(Error::NotReducible)
                } else {
                    Ok(pt)
                }
            }
            Attempt::Failed(e) => Err(e),
        };
        match outcome {
            Ok(pt) => {
                log::debug!("D{label} accepted ({}, {}) N={}", pt.alpha, pt.epsilon, pt.curve.order());
                points.push(pt);
                state.accept();
            }
            Err(e) => {
                log::debug!("D{label} step {:.3e} failed: {e}", state.step);
                if !state.reject() {
                    break failure_reason(&e);
                }
            }
        }
    };
    BifurcationBranch {
        points,
        label,
        terminal_reason,
    }
}

/// Natural-parameter continuation of an invariant curve in one parameter.
#[derive(Clone, Debug)]
pub struct CurveBranch {
    pub points: Vec<ContinuationPoint>,
    pub terminal_reason: TerminalReason,
}

/// Continue a `period`-periodic invariant curve in parameter `axis`
/// (0 = α, 1 = ε) with the other fixed, until the curve stops being
/// solvable or reducible or `limit` is reached.
pub fn continue_invariant_curve(
    start: ContinuationPoint,
    axis: usize,
    limit: f64,
    ctl: &StepControl,
) -> CurveBranch {
    let period = start.period;
    let sign = (limit - start.param(axis)).signum();
    let mut solver = Solver { colloc: None };
    let mut points = vec![start];
    let mut state = StepState::new(ctl);
    let terminal_reason = loop {
        if points.len() >= ctl.max_points {
            break TerminalReason::PointBudget;
        }
        let last = points.last().expect("nonempty");
        if (limit - last.param(axis)) * sign <= 0.0 {
            break TerminalReason::Boundary;
        }
        let mut target = last.param(axis) + sign * state.step;
        if (limit - target) * sign < 0.0 {
            target = limit;
        }
        let (guess, other) = predict(&points, axis, target);
        let (alpha, epsilon) = if axis == 0 { (target, other) } else { (other, target) };
        let map = FlmParams::new(alpha, epsilon);
        let attempt = solve_adaptive(&mut solver, guess, period, ctl.max_order, ctl.tail_tol, |colloc, c| {
            let report = newton_with(colloc, c, &map, SOLVER_TOL, NEWTON_MAX_ITER)?;
            let lyapunov = curve_lyapunov(&report.curve, &map, period).unwrap_or(f64::NAN);
            Ok(ContinuationPoint {
                curve: report.curve,
                alpha,
                epsilon,
                lyapunov,
                period,
            })
        });
        let outcome = match attempt {
            Attempt::Accepted(pt) if reducible(&pt) => Ok(pt),
            Attempt::Accepted(_) => Err(Error::NotReducible),
            Attempt::Failed(e) => Err(e),
        };
        match outcome {
            Ok(pt) => {
                points.push(pt);
                state.accept();
            }
            Err(e) => {
                log::debug!("curve step {:.3e} failed: {e}", state.step);
                if !state.reject() {
                    break failure_reason(&e);
                }
            }
        }
    };
    CurveBranch {
        points,
        terminal_reason,
    }
}

/// `(sup |u′|, sup |u″|)` on [`NORM_GRID`] points for every branch point.
pub fn branch_curve_norms(points: &[ContinuationPoint]) -> Vec<(f64, f64)> {
    points.iter().map(|p| p.curve.derivative_sup_norms(NORM_GRID)).collect()
}

/// Parameter value `d_k` at which the logistic `2^{k−1}`-cycle has
/// multiplier −1, with a point of that cycle, to bisection accuracy `tol`.
pub fn logistic_doubling(k: usize, tol: f64) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::Domain("period-doubling index starts at 1".into()));
    }
    let period = 1usize << (k - 1);
    let mut lo = if k == 1 {
        1.0 + 1e-9
    } else {
        logistic_doubling(k - 1, tol)?.0
    };
    // accumulation point of the cascade
    let mut hi = 3.569_945_672;
    let cycle = |alpha: f64| -> Option<(f64, f64)> {
        let mut x = 0.5;
        for _ in 0..200_000 {
            x = alpha * x * (1.0 - x);
        }
        let (mut y, mut mult) = (x, 1.0);
        for _ in 0..period {
            mult *= alpha * (1.0 - 2.0 * y);
            y = alpha * y * (1.0 - y);
        }
        ((y - x).abs() < 1e-6).then_some((x, mult))
    };
    let mut best = None;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match cycle(mid) {
            Some((x, m)) if m > -1.0 => {
                lo = mid;
                best = Some(x);
            }
            _ => hi = mid,
        }
    }
    let x = match best {
        Some(x) => x,
        None => cycle(lo).map(|c| c.0).ok_or(Error::NoConvergence {
            iterations: 0,
            residual: hi - lo,
        })?,
    };
    Ok(polish_doubling(lo, x, period))
}

/// Newton on `f^p(x) = x`, `(f^p)′(x) = −1` in `(α, x)`, finite-difference
/// Jacobian. Falls back to the input when it does not settle.
fn polish_doubling(alpha: f64, x: f64, period: usize) -> (f64, f64) {
    let g = |a: f64, x: f64| {
        let (mut y, mut m) = (x, 1.0);
        for _ in 0..period {
            m *= a * (1.0 - 2.0 * y);
            y = a * y * (1.0 - y);
        }
        (y - x, m + 1.0)
    };
    let (mut a, mut x) = (alpha, x);
    let h = 1e-7;
    for _ in 0..50 {
        let (r0, r1) = g(a, x);
        if r0.abs().max(r1.abs()) < 1e-14 {
            return (a, x);
        }
        let (ga0, ga1) = g(a + h, x);
        let (gx0, gx1) = g(a, x + h);
        let (j00, j01) = ((ga0 - r0) / h, (gx0 - r0) / h);
        let (j10, j11) = ((ga1 - r1) / h, (gx1 - r1) / h);
        let det = j00 * j11 - j01 * j10;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        a -= (j11 * r0 - j01 * r1) / det;
        x -= (j00 * r1 - j10 * r0) / det;
    }
    let (r0, r1) = g(a, x);
    if r0.abs().max(r1.abs()) < 1e-10 && (a - alpha).abs() < 1e-2 {
        (a, x)
    } else {
        (alpha, x)
    }
}

/// Starting point of `D_k` at `ε = 0`: the constant `2^{k−1}`-periodic
/// curve at the logistic doubling, refined on the zero-Lyapunov system.
pub fn zero_lyapunov_seed(k: usize, order: usize) -> Result<ContinuationPoint> {
    let (alpha, x) = logistic_doubling(k, 1e-5)?;
    let period = 1usize << (k - 1);
    let map = FlmParams::new(alpha, 0.0);
    let colloc = Collocation::new(order, period, map.omega());
    let sol = newton_extended(
        &colloc,
        &FourierCurve::constant(order, x),
        &map,
        0,
        SOLVER_TOL,
        NEWTON_MAX_ITER,
    )?;
    Ok(ContinuationPoint {
        curve: sol.curve,
        alpha: sol.map.alpha,
        epsilon: 0.0,
        lyapunov: sol.lyapunov,
        period,
    })
}

/// Branch CSV: `alpha,epsilon,lyapunov,period,sup_d1,sup_d2,min_abs_dxf,N`.
pub fn write_branch_csv<W: Write>(mut w: W, points: &[ContinuationPoint]) -> io::Result<()> {
    writeln!(w, "alpha,epsilon,lyapunov,period,sup_d1,sup_d2,min_abs_dxf,N")?;
    for (p, (d1, d2)) in points.iter().zip(branch_curve_norms(points)) {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            p.alpha,
            p.epsilon,
            p.lyapunov,
            p.period,
            d1,
            d2,
            p.min_abs_dxf(),
            p.curve.order()
        )?;
    }
    Ok(())
}

/// Coefficient sidecar: one line per point, `N` then `a0 a1 b1 … aN bN`.
pub fn write_coefficients<W: Write>(mut w: W, points: &[ContinuationPoint]) -> io::Result<()> {
    for p in points {
        write!(w, "{}", p.curve.order())?;
        for c in p.curve.coeffs() {
            write!(w, " {c}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Inverse of [`write_coefficients`].
pub fn read_coefficients(text: &str) -> Result<Vec<FourierCurve>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let mut it = line.split_whitespace();
            let order: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Domain(format!("bad sidecar line: {line}")))?;
            let coeffs = it
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Domain(format!("bad coefficient: {e}")))?;
            if coeffs.len() != 2 * order + 1 {
                return Err(Error::Domain(format!(
                    "sidecar line has {} coefficients for N = {order}",
                    coeffs.len()
                )));
            }
            FourierCurve::from_coeffs(coeffs)
        })
        .collect()
}
