//! Map families and raw orbit iteration.
//!
//! A quasi-periodically forced map acts on the cylinder as
//! `(θ, x) ↦ (θ + ω, f(θ, x))`. The base dynamics is a rigid rotation; all
//! the interesting behaviour lives in the fiber map `f`. Two concrete families
//! are provided (the forced logistic map and the cubic period-doubling model),
//! plus [`CustomMap`] for user-defined forcings.

use std::f64::consts::TAU;
use std::fmt;

/// Golden mean rotation number `(√5 − 1)/2`, nearest double.
pub const GOLDEN_OMEGA: f64 = 0.618_033_988_749_894_9;

/// Orbits are flagged as diverged once `|x|` exceeds this bound.
pub const DEFAULT_ESCAPE_BOUND: f64 = 1e6;

/// Reduce a real number into `[0, 1)`.
#[inline]
pub fn wrap_unit(v: f64) -> f64 {
    let r = v - v.floor();
    // tiny negative inputs can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// A point of the circle `𝕋 = ℝ/ℤ`, stored in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct Angle(f64);

impl Angle {
    pub fn new(value: f64) -> Self {
        Angle(wrap_unit(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Rotate by `omega`, wrapping back into `[0, 1)`.
    #[inline]
    pub fn rotate(self, omega: f64) -> Self {
        Angle(wrap_unit(self.0 + omega))
    }

    /// `θ₀ + n·ω mod 1`, computed in one shot rather than accumulated.
    pub fn rotate_n(self, omega: f64, n: i64) -> Self {
        // split n·ω to keep the integer part from eating the mantissa
        let frac = wrap_unit(wrap_unit(omega) * n as f64);
        Angle(wrap_unit(self.0 + frac))
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An angle together with `cos 2πθ` and `sin 2πθ`.
///
/// Hot loops advance a `Phase` by the rotation recurrence instead of calling
/// `cos`/`sin` every iterate; see [`PhaseStepper`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Phase {
    pub theta: f64,
    pub cos: f64,
    pub sin: f64,
}

impl Phase {
    pub fn new(theta: f64) -> Self {
        let theta = wrap_unit(theta);
        let (sin, cos) = (TAU * theta).sin_cos();
        Phase { theta, cos, sin }
    }
}

/// Advances a [`Phase`] by a fixed rotation using the angle-addition
/// recurrence, resynchronising from the exact angle every `RESYNC` steps.
#[derive(Clone, Debug)]
pub struct PhaseStepper {
    phase: Phase,
    omega: f64,
    cos_w: f64,
    sin_w: f64,
    since_sync: u32,
}

impl PhaseStepper {
    const RESYNC: u32 = 512;

    pub fn new(theta: f64, omega: f64) -> Self {
        let (sin_w, cos_w) = (TAU * omega).sin_cos();
        PhaseStepper {
            phase: Phase::new(theta),
            omega,
            cos_w,
            sin_w,
            since_sync: 0,
        }
    }

    #[inline]
    pub fn phase(&self) -> &Phase {
        &self.phase
    }

    #[inline]
    pub fn advance(&mut self) {
        let theta = wrap_unit(self.phase.theta + self.omega);
        self.since_sync += 1;
        if self.since_sync >= Self::RESYNC {
            self.phase = Phase::new(theta);
            self.since_sync = 0;
        } else {
            let Phase { cos, sin, .. } = self.phase;
            self.phase = Phase {
                theta,
                cos: cos * self.cos_w - sin * self.sin_w,
                sin: sin * self.cos_w + cos * self.sin_w,
            };
        }
    }
}

/// A quasi-periodically forced one-dimensional map.
///
/// The `*_at` variants take a precomputed [`Phase`]; families whose forcing
/// is a trigonometric polynomial override them to skip the `cos` call.
pub trait MapFamily {
    fn omega(&self) -> f64;
    fn fiber(&self, theta: f64, x: f64) -> f64;
    fn dfiber_dx(&self, theta: f64, x: f64) -> f64;
    fn dfiber_dtheta(&self, theta: f64, x: f64) -> f64;

    #[inline]
    fn fiber_at(&self, phase: &Phase, x: f64) -> f64 {
        self.fiber(phase.theta, x)
    }

    #[inline]
    fn dfiber_dx_at(&self, phase: &Phase, x: f64) -> f64 {
        self.dfiber_dx(phase.theta, x)
    }

    #[inline]
    fn dfiber_dtheta_at(&self, phase: &Phase, x: f64) -> f64 {
        self.dfiber_dtheta(phase.theta, x)
    }
}

impl<M: MapFamily + ?Sized> MapFamily for &M {
    fn omega(&self) -> f64 {
        (**self).omega()
    }
    fn fiber(&self, theta: f64, x: f64) -> f64 {
        (**self).fiber(theta, x)
    }
    fn dfiber_dx(&self, theta: f64, x: f64) -> f64 {
        (**self).dfiber_dx(theta, x)
    }
    fn dfiber_dtheta(&self, theta: f64, x: f64) -> f64 {
        (**self).dfiber_dtheta(theta, x)
    }
    fn fiber_at(&self, phase: &Phase, x: f64) -> f64 {
        (**self).fiber_at(phase, x)
    }
    fn dfiber_dx_at(&self, phase: &Phase, x: f64) -> f64 {
        (**self).dfiber_dx_at(phase, x)
    }
    fn dfiber_dtheta_at(&self, phase: &Phase, x: f64) -> f64 {
        (**self).dfiber_dtheta_at(phase, x)
    }
}

/// A two-parameter family with the extra derivatives needed by Newton
/// continuation (second fiber derivative and parameter sensitivities).
pub trait ParametricFamily: MapFamily + Clone + Send + Sync {
    fn params(&self) -> [f64; 2];
    fn with_params(&self, params: [f64; 2]) -> Self;
    fn param_names(&self) -> [&'static str; 2];
    fn d2fiber_dx2(&self, theta: f64, x: f64) -> f64;
    fn dfiber_dparam(&self, theta: f64, x: f64, which: usize) -> f64;
    fn d2fiber_dx_dparam(&self, theta: f64, x: f64, which: usize) -> f64;
}

/// Parameters of the forced logistic map
/// `x̄ = α x (1 − x)(1 + ε cos 2πθ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlmParams {
    pub alpha: f64,
    pub epsilon: f64,
    pub omega: f64,
}

impl FlmParams {
    pub fn new(alpha: f64, epsilon: f64) -> Self {
        FlmParams {
            alpha,
            epsilon,
            omega: GOLDEN_OMEGA,
        }
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    /// Parameters for which `𝕋 × [0, 1]` is forward invariant.
    pub fn compact(alpha: f64, epsilon: f64) -> crate::Result<Self> {
        let p = FlmParams::new(alpha, epsilon);
        if p.is_compact() {
            Ok(p)
        } else {
            Err(crate::Error::Domain(format!(
                "alpha*(1+|epsilon|) = {} exceeds 4",
                alpha * (1.0 + epsilon.abs())
            )))
        }
    }

    pub fn is_compact(&self) -> bool {
        self.alpha > 0.0 && self.alpha * (1.0 + self.epsilon.abs()) <= 4.0
    }

    #[inline]
    fn forcing(&self, cos: f64) -> f64 {
        1.0 + self.epsilon * cos
    }
}

impl MapFamily for FlmParams {
    fn omega(&self) -> f64 {
        self.omega
    }

    #[inline]
    fn fiber(&self, theta: f64, x: f64) -> f64 {
        self.fiber_at(&Phase::new(theta), x)
    }

    #[inline]
    fn dfiber_dx(&self, theta: f64, x: f64) -> f64 {
        flm_dx(Angle::new(theta), x, self)
    }

    fn dfiber_dtheta(&self, theta: f64, x: f64) -> f64 {
        self.dfiber_dtheta_at(&Phase::new(theta), x)
    }

    #[inline]
    fn fiber_at(&self, phase: &Phase, x: f64) -> f64 {
        self.alpha * x * (1.0 - x) * self.forcing(phase.cos)
    }

    #[inline]
    fn dfiber_dx_at(&self, phase: &Phase, x: f64) -> f64 {
        self.alpha * (1.0 - 2.0 * x) * self.forcing(phase.cos)
    }

    #[inline]
    fn dfiber_dtheta_at(&self, phase: &Phase, x: f64) -> f64 {
        -self.alpha * x * (1.0 - x) * self.epsilon * TAU * phase.sin
    }
}

impl ParametricFamily for FlmParams {
    fn params(&self) -> [f64; 2] {
        [self.alpha, self.epsilon]
    }

    fn with_params(&self, params: [f64; 2]) -> Self {
        FlmParams {
            alpha: params[0],
            epsilon: params[1],
            omega: self.omega,
        }
    }

    fn param_names(&self) -> [&'static str; 2] {
        ["alpha", "epsilon"]
    }

    fn d2fiber_dx2(&self, theta: f64, _x: f64) -> f64 {
        -2.0 * self.alpha * self.forcing((TAU * theta).cos())
    }

    fn dfiber_dparam(&self, theta: f64, x: f64, which: usize) -> f64 {
        let c = (TAU * theta).cos();
        match which {
            0 => x * (1.0 - x) * self.forcing(c),
            _ => self.alpha * x * (1.0 - x) * c,
        }
    }

    fn d2fiber_dx_dparam(&self, theta: f64, x: f64, which: usize) -> f64 {
        let c = (TAU * theta).cos();
        match which {
            0 => (1.0 - 2.0 * x) * self.forcing(c),
            _ => self.alpha * (1.0 - 2.0 * x) * c,
        }
    }
}

/// Parameters of the cubic model skew product
/// `x̄ = x (x² − (μ + λ cos 2πθ))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub mu: f64,
    pub lambda: f64,
    pub omega: f64,
}

impl ModelParams {
    pub fn new(mu: f64, lambda: f64) -> Self {
        ModelParams {
            mu,
            lambda,
            omega: GOLDEN_OMEGA,
        }
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    #[inline]
    fn forcing(&self, cos: f64) -> f64 {
        self.mu + self.lambda * cos
    }
}

impl MapFamily for ModelParams {
    fn omega(&self) -> f64 {
        self.omega
    }

    fn fiber(&self, theta: f64, x: f64) -> f64 {
        self.fiber_at(&Phase::new(theta), x)
    }

    fn dfiber_dx(&self, theta: f64, x: f64) -> f64 {
        self.dfiber_dx_at(&Phase::new(theta), x)
    }

    fn dfiber_dtheta(&self, theta: f64, x: f64) -> f64 {
        self.dfiber_dtheta_at(&Phase::new(theta), x)
    }

    #[inline]
    fn fiber_at(&self, phase: &Phase, x: f64) -> f64 {
        x * (x * x - self.forcing(phase.cos))
    }

    #[inline]
    fn dfiber_dx_at(&self, phase: &Phase, x: f64) -> f64 {
        3.0 * x * x - self.forcing(phase.cos)
    }

    #[inline]
    fn dfiber_dtheta_at(&self, phase: &Phase, x: f64) -> f64 {
        x * self.lambda * TAU * phase.sin
    }
}

impl ParametricFamily for ModelParams {
    fn params(&self) -> [f64; 2] {
        [self.mu, self.lambda]
    }

    fn with_params(&self, params: [f64; 2]) -> Self {
        ModelParams {
            mu: params[0],
            lambda: params[1],
            omega: self.omega,
        }
    }

    fn param_names(&self) -> [&'static str; 2] {
        ["mu", "lambda"]
    }

    fn d2fiber_dx2(&self, _theta: f64, x: f64) -> f64 {
        6.0 * x
    }

    fn dfiber_dparam(&self, theta: f64, x: f64, which: usize) -> f64 {
        match which {
            0 => -x,
            _ => -x * (TAU * theta).cos(),
        }
    }

    fn d2fiber_dx_dparam(&self, theta: f64, _x: f64, which: usize) -> f64 {
        match which {
            0 => -1.0,
            _ => -(TAU * theta).cos(),
        }
    }
}

type FiberFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A map family built from closures, for forcings other than the built-in two.
pub struct CustomMap {
    omega: f64,
    fiber: FiberFn,
    dx: FiberFn,
    dtheta: FiberFn,
}

impl CustomMap {
    pub fn new<F, Dx, Dt>(omega: f64, fiber: F, dx: Dx, dtheta: Dt) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Dx: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Dt: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        CustomMap {
            omega,
            fiber: Box::new(fiber),
            dx: Box::new(dx),
            dtheta: Box::new(dtheta),
        }
    }
}

impl fmt::Debug for CustomMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomMap").field("omega", &self.omega).finish()
    }
}

impl MapFamily for CustomMap {
    fn omega(&self) -> f64 {
        self.omega
    }
    fn fiber(&self, theta: f64, x: f64) -> f64 {
        (self.fiber)(theta, x)
    }
    fn dfiber_dx(&self, theta: f64, x: f64) -> f64 {
        (self.dx)(theta, x)
    }
    fn dfiber_dtheta(&self, theta: f64, x: f64) -> f64 {
        (self.dtheta)(theta, x)
    }
}

/// A point of the cylinder together with the number of steps taken to reach it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitState {
    pub theta: Angle,
    pub x: f64,
    pub step_count: u64,
}

impl OrbitState {
    pub fn new(theta: f64, x: f64) -> Self {
        OrbitState {
            theta: Angle::new(theta),
            x,
            step_count: 0,
        }
    }

    /// One step of an arbitrary family.
    pub fn step<M: MapFamily + ?Sized>(self, map: &M) -> Self {
        OrbitState {
            theta: self.theta.rotate(map.omega()),
            x: map.fiber(self.theta.value(), self.x),
            step_count: self.step_count + 1,
        }
    }
}

impl Default for OrbitState {
    fn default() -> Self {
        OrbitState::new(0.0, 0.5)
    }
}

pub fn flm_step(state: OrbitState, p: &FlmParams) -> OrbitState {
    state.step(p)
}

pub fn model_step(state: OrbitState, p: &ModelParams) -> OrbitState {
    state.step(p)
}

/// `∂f/∂x` of the forced logistic map; vanishes on the critical line `x = 1/2`.
pub fn flm_dx(theta: Angle, x: f64, p: &FlmParams) -> f64 {
    p.alpha * (1.0 - 2.0 * x) * (1.0 + p.epsilon * (TAU * theta.value()).cos())
}

/// Streaming orbit: yields the phase and fiber value *before* each step.
pub(crate) struct Stepper<'a, M: ?Sized> {
    map: &'a M,
    phase: PhaseStepper,
    pub x: f64,
}

impl<'a, M: MapFamily + ?Sized> Stepper<'a, M> {
    pub fn new(map: &'a M, theta: f64, x: f64) -> Self {
        Stepper {
            map,
            phase: PhaseStepper::new(theta, map.omega()),
            x,
        }
    }

    #[inline]
    pub fn phase(&self) -> &Phase {
        self.phase.phase()
    }

    #[inline]
    pub fn map(&self) -> &'a M {
        self.map
    }

    #[inline]
    pub fn step(&mut self) -> f64 {
        self.x = self.map.fiber_at(self.phase.phase(), self.x);
        self.phase.advance();
        self.x
    }

    /// Run `n` steps; returns the step index at which `|x|` first exceeded
    /// `bound` (or became non-finite), if any.
    pub fn run(&mut self, n: u64, bound: f64) -> Option<u64> {
        for i in 0..n {
            let x = self.step();
            if !(x.abs() <= bound) {
                return Some(i);
            }
        }
        None
    }
}

/// Result of [`iterate`].
#[derive(Clone, Debug, PartialEq)]
pub struct Orbit {
    /// Kept `(θ, x)` samples, in iteration order.
    pub points: Vec<(f64, f64)>,
    pub diverged: bool,
    /// Total steps performed (transient included).
    pub steps: u64,
}

/// Forward iteration: drop `transient` iterates, keep the next `keep`.
///
/// Iteration stops the first time `|x| > escape_bound`.
pub fn iterate<M: MapFamily + ?Sized>(
    map: &M,
    seed: OrbitState,
    transient: u64,
    keep: usize,
    escape_bound: f64,
) -> Orbit {
    let mut st = Stepper::new(map, seed.theta.value(), seed.x);
    if let Some(i) = st.run(transient, escape_bound) {
        return Orbit {
            points: Vec::new(),
            diverged: true,
            steps: i + 1,
        };
    }
    let mut points = Vec::with_capacity(keep);
    for i in 0..keep {
        let x = st.step();
        if !(x.abs() <= escape_bound) {
            return Orbit {
                points,
                diverged: true,
                steps: transient + i as u64 + 1,
            };
        }
        points.push((st.phase().theta, x));
    }
    Orbit {
        points,
        diverged: false,
        steps: transient + keep as u64,
    }
}
