//! Per-parameter attractor diagnostics.
//!
//! The pipeline for one parameter pair is: forward transient (divergence
//! check), Lyapunov exponent by the limit of Birkhoff averages, period of the
//! attracting curve, reducibility of that curve, and optionally the
//! phase-sensitivity indicator. [`diagnose`] runs all of it; the individual
//! pieces are public so they can be reused on any [`MapFamily`].

use std::fmt;
use std::str::FromStr;

use crate::map::{wrap_unit, Angle, MapFamily, OrbitState, Stepper};
use crate::{Error, Result};

/// Default stopping tolerance for [`lyapunov_limit`].
pub const LYAPUNOV_TOL: f64 = 1e-3;
/// Exponents with `|Λ| ≤ ZERO_TOL` are reported as zero.
pub const ZERO_TOL: f64 = 1e-3;
pub const REDUCIBILITY_THRESHOLD: f64 = 1e-4;
pub const MESH_SIZE: usize = 2048;
pub const MESH_DEPTH: u64 = 1000;
pub const MESH_TOL: f64 = 1e-6;
pub const PERIOD_WINDOW: f64 = 1e-3;
pub const PERIOD_GAP: f64 = 100.0 * MESH_TOL;
/// A cell is an SNA candidate at order N when `γ(2N)/γ(N)` and `γ(4N)/γ(2N)`
/// both exceed this factor.
pub const SNA_GROWTH_FACTOR: f64 = 2.0;

const LYAPUNOV_BLOCK: u64 = 1024;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovEstimate {
    /// Natural-log units per iterate.
    pub value: f64,
    pub iterations_used: u64,
    pub converged: bool,
}

/// Lyapunov exponent along the forward orbit of `seed`, as the limit of
/// `(1/n) Σ ln|∂ₓf(θⱼ, xⱼ)|`.
///
/// Averages are checked every 1024 iterates; the estimate is accepted at the
/// first `n` where the averages over `n`, `3n/4` and `n/2` iterates agree
/// pairwise within `tol`. An exactly vanishing factor gives `-∞`.
pub fn lyapunov_limit<M: MapFamily + ?Sized>(
    map: &M,
    seed: OrbitState,
    transient: u64,
    tol: f64,
    n_max: u64,
) -> Result<LyapunovEstimate> {
    let mut st = Stepper::new(map, seed.theta.value(), seed.x);
    if let Some(i) = st.run(transient, crate::map::DEFAULT_ESCAPE_BOUND) {
        return Err(Error::DivergedOrbit { steps: i + 1 });
    }
    lyapunov_from(&mut st, tol, n_max, transient)
}

/// Fiber derivatives this small are rounding noise around an exact zero
/// (e.g. `1 − 2x` at the nearest double to `x = 1/2`).
const NUMERICAL_ZERO: f64 = 1e-15;

pub(crate) fn lyapunov_from<M: MapFamily + ?Sized>(
    st: &mut Stepper<'_, M>,
    tol: f64,
    n_max: u64,
    offset: u64,
) -> Result<LyapunovEstimate> {
    let quarter = LYAPUNOV_BLOCK / 4;
    // partial sums at every multiple of `quarter`
    let mut partial = vec![0.0f64];
    let mut sum = 0.0;
    let mut n = 0u64;
    while n < n_max {
        let a = st.map().dfiber_dx_at(st.phase(), st.x);
        if a.abs() <= NUMERICAL_ZERO {
            return Ok(LyapunovEstimate {
                value: f64::NEG_INFINITY,
                iterations_used: n + 1,
                converged: true,
            });
        }
        sum += a.abs().ln();
        let x = st.step();
        n += 1;
        if !(x.abs() <= crate::map::DEFAULT_ESCAPE_BOUND) {
            return Err(Error::DivergedOrbit { steps: offset + n });
        }
        if n % quarter == 0 {
            partial.push(sum);
            if n % LYAPUNOV_BLOCK == 0 {
                let m = (n / quarter) as usize;
                let full = sum / n as f64;
                let three = partial[3 * m / 4] / (3 * n / 4) as f64;
                let half = partial[m / 2] / (n / 2) as f64;
                let spread = (full - three)
                    .abs()
                    .max((full - half).abs())
                    .max((three - half).abs());
                if spread < tol {
                    return Ok(LyapunovEstimate {
                        value: full,
                        iterations_used: n,
                        converged: true,
                    });
                }
            }
        }
    }
    Ok(LyapunovEstimate {
        value: sum / n.max(1) as f64,
        iterations_used: n,
        converged: false,
    })
}

/// Samples of an attracting invariant curve on a uniform θ-grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveMesh {
    pub mesh_size: usize,
    pub thetas: Vec<f64>,
    pub xs: Vec<f64>,
    /// Number of backward-started iterates used per sample.
    pub depth: u64,
}

impl CurveMesh {
    /// Periodic linear interpolation of the sampled curve.
    pub fn interpolate(&self, theta: f64) -> f64 {
        let n = self.mesh_size;
        let s = wrap_unit(theta) * n as f64;
        let i = (s.floor() as usize).min(n - 1);
        let t = s - i as f64;
        let a = self.xs[i];
        let b = self.xs[(i + 1) % n];
        a + t * (b - a)
    }

    /// `max_j |u(θⱼ + ω) − f(θⱼ, u(θⱼ))|` with `u` linearly interpolated.
    pub fn invariance_residual<M: MapFamily + ?Sized>(&self, map: &M) -> f64 {
        let w = map.omega();
        self.thetas
            .iter()
            .zip(&self.xs)
            .map(|(&t, &x)| (self.interpolate(t + w) - map.fiber(t, x)).abs())
            .fold(0.0, f64::max)
    }
}

/// `u(θⱼ) ≈ x`-component of `F^M(θⱼ − Mω, x0)` on `mesh_size` uniform points.
pub fn curve_mesh<M: MapFamily + ?Sized>(
    map: &M,
    mesh_size: usize,
    depth: u64,
    x0: f64,
) -> Result<CurveMesh> {
    let w = map.omega();
    let mut thetas = Vec::with_capacity(mesh_size);
    let mut xs = Vec::with_capacity(mesh_size);
    for j in 0..mesh_size {
        let theta = j as f64 / mesh_size as f64;
        let start = Angle::new(theta).rotate_n(w, -(depth as i64));
        let mut st = Stepper::new(map, start.value(), x0);
        if let Some(i) = st.run(depth, crate::map::DEFAULT_ESCAPE_BOUND) {
            return Err(Error::DivergedOrbit { steps: i + 1 });
        }
        thetas.push(theta);
        xs.push(st.x);
    }
    Ok(CurveMesh {
        mesh_size,
        thetas,
        xs,
        depth,
    })
}

/// [`curve_mesh`] with the depth doubled until the invariance residual drops
/// below `tol` or `max_depth` is reached. Returns the mesh, its residual and
/// whether the tolerance was met.
pub fn converged_curve_mesh<M: MapFamily + ?Sized>(
    map: &M,
    mesh_size: usize,
    depth: u64,
    x0: f64,
    tol: f64,
    max_depth: u64,
) -> Result<(CurveMesh, f64, bool)> {
    let mut depth = depth.max(1);
    loop {
        let mesh = curve_mesh(map, mesh_size, depth, x0)?;
        let res = mesh.invariance_residual(map);
        if res < tol {
            return Ok((mesh, res, true));
        }
        if depth * 2 > max_depth {
            return Ok((mesh, res, false));
        }
        depth *= 2;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reducibility {
    pub reducible: bool,
    pub min_abs: f64,
    /// Sign changes of `∂ₓf` between neighbouring samples of the same branch.
    pub sign_changes: usize,
}

fn reducibility_of(derivs: impl Iterator<Item = f64>, threshold: f64) -> Reducibility {
    let mut min_abs = f64::INFINITY;
    let mut sign_changes = 0;
    let mut first: Option<f64> = None;
    let mut prev: Option<f64> = None;
    for d in derivs {
        min_abs = min_abs.min(d.abs());
        if let Some(p) = prev {
            if p * d < 0.0 {
                sign_changes += 1;
            }
        }
        first.get_or_insert(d);
        prev = Some(d);
    }
    // close the circle
    if let (Some(a), Some(b)) = (first, prev) {
        if a * b < 0.0 {
            sign_changes += 1;
        }
    }
    Reducibility {
        reducible: min_abs > threshold && sign_changes == 0,
        min_abs,
        sign_changes,
    }
}

/// A curve is reducible iff `∂ₓf(θ, u(θ))` has no zeros. On the mesh this is
/// `min_j |∂ₓf| > threshold` and no sign change between neighbours.
pub fn reducibility_check<M: MapFamily + ?Sized>(
    map: &M,
    mesh: &CurveMesh,
    threshold: f64,
) -> Reducibility {
    reducibility_of(
        mesh.thetas
            .iter()
            .zip(&mesh.xs)
            .map(|(&t, &x)| map.dfiber_dx(t, x)),
        threshold,
    )
}

/// Reducibility of a `period`-periodic attracting curve from a forward orbit
/// lying on it: iterate `n` sits on branch `n mod period`, so each branch is
/// sorted by θ and checked like a mesh.
pub fn orbit_reducibility<M: MapFamily + ?Sized>(
    map: &M,
    points: &[(f64, f64)],
    period: usize,
    threshold: f64,
) -> Reducibility {
    let period = period.max(1);
    let mut total = Reducibility {
        reducible: true,
        min_abs: f64::INFINITY,
        sign_changes: 0,
    };
    for r in 0..period {
        let mut branch: Vec<(f64, f64)> = points.iter().skip(r).step_by(period).copied().collect();
        branch.sort_by(|a, b| a.0.total_cmp(&b.0));
        let red = reducibility_of(branch.iter().map(|&(t, x)| map.dfiber_dx(t, x)), threshold);
        total.reducible &= red.reducible;
        total.min_abs = total.min_abs.min(red.min_abs);
        total.sign_changes += red.sign_changes;
    }
    total
}

/// Period of the attracting curve through `seed`, which must already sit on
/// the attractor.
///
/// Orbit returns to within `window` of the seed's angle are collected and
/// their x-values clustered with gap threshold [`PERIOD_GAP`]. The cluster
/// count is returned when it is a power of two not above `max_p` and does not
/// change when the sample is doubled; otherwise 0.
pub fn detect_period<M: MapFamily + ?Sized>(
    map: &M,
    seed: OrbitState,
    window: f64,
    max_p: usize,
) -> Result<usize> {
    let target = (16 * max_p).max(64);
    let budget = ((8.0 * target as f64 / window.max(1e-12)) as u64).clamp(100_000, 20_000_000);
    let theta0 = seed.theta.value();
    let mut st = Stepper::new(map, theta0, seed.x);
    let mut xs = Vec::with_capacity(2 * target);
    let mut steps = 0u64;
    while xs.len() < 2 * target && steps < budget {
        let x = st.step();
        steps += 1;
        if !(x.abs() <= crate::map::DEFAULT_ESCAPE_BOUND) {
            return Err(Error::DivergedOrbit { steps });
        }
        let d = (st.phase().theta - theta0).abs();
        if d.min(1.0 - d) <= window {
            xs.push(x);
        }
    }
    if xs.len() < 10 {
        return Err(Error::InsufficientSamples {
            found: xs.len(),
            needed: 10,
        });
    }
    let half = count_clusters(&xs[..xs.len() / 2], PERIOD_GAP);
    let full = count_clusters(&xs, PERIOD_GAP);
    if half == full && full.is_power_of_two() && full <= max_p {
        Ok(full)
    } else {
        Ok(0)
    }
}

fn count_clusters(xs: &[f64], gap: f64) -> usize {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    1 + v.windows(2).filter(|w| w[1] - w[0] > gap).count()
}

/// Running maxima `γ(N) = max_{n ≤ N} |dₙ|` of the phase derivative
/// `dₙ₊₁ = ∂θf(θₙ, xₙ) + ∂ₓf(θₙ, xₙ) dₙ`, `d₀ = 0`, at each checkpoint.
///
/// `checkpoints` must be ascending.
pub fn phase_sensitivity_profile<M: MapFamily + ?Sized>(
    map: &M,
    seed: OrbitState,
    checkpoints: &[u64],
) -> Result<Vec<f64>> {
    let mut st = Stepper::new(map, seed.theta.value(), seed.x);
    let mut d = 0.0f64;
    let mut gamma = 0.0f64;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut n = 0u64;
    for &cp in checkpoints {
        while n < cp {
            let ph = *st.phase();
            let x = st.x;
            d = st.map().dfiber_dtheta_at(&ph, x) + st.map().dfiber_dx_at(&ph, x) * d;
            gamma = gamma.max(d.abs());
            let nx = st.step();
            n += 1;
            if !(nx.abs() <= crate::map::DEFAULT_ESCAPE_BOUND) {
                return Err(Error::DivergedOrbit { steps: n });
            }
        }
        out.push(gamma);
    }
    Ok(out)
}

/// Phase-sensitivity indicator: `min` over seeds of `max_{n ≤ N} |dₙ|`.
pub fn phase_sensitivity<M: MapFamily + ?Sized>(
    map: &M,
    seeds: &[OrbitState],
    n: u64,
) -> Result<f64> {
    let mut best = f64::INFINITY;
    for &s in seeds {
        let g = phase_sensitivity_profile(map, s, &[n])?[0];
        best = best.min(g);
    }
    Ok(best)
}

/// SNA-candidate test from `γ(N), γ(2N), γ(4N)`: growth by more than
/// [`SNA_GROWTH_FACTOR`] over both doublings.
pub fn is_sna_candidate(gamma_n: f64, gamma_2n: f64, gamma_4n: f64) -> bool {
    gamma_2n > SNA_GROWTH_FACTOR * gamma_n && gamma_4n > SNA_GROWTH_FACTOR * gamma_2n
}

/// Attractor classes of the parameter-space diagram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    Diverged,
    Chaotic,
    NonReducibleCurve,
    ReducibleCurve,
    ZeroLyapunov,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 5] = [
        ClassLabel::Diverged,
        ClassLabel::Chaotic,
        ClassLabel::NonReducibleCurve,
        ClassLabel::ReducibleCurve,
        ClassLabel::ZeroLyapunov,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Diverged => "diverged",
            ClassLabel::Chaotic => "chaotic",
            ClassLabel::NonReducibleCurve => "non_reducible_curve",
            ClassLabel::ReducibleCurve => "reducible_curve",
            ClassLabel::ZeroLyapunov => "zero_lyapunov",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ClassLabel::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown class {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitDiagnostics {
    pub lyapunov: LyapunovEstimate,
    pub diverged: bool,
    /// Power of two, or 0 when undetected.
    pub period: usize,
    /// `None` when the check was not run or could not be run.
    pub reducible: Option<bool>,
    pub min_abs_fiber_derivative: f64,
    pub phase_sensitivity: Option<f64>,
}

impl OrbitDiagnostics {
    pub fn diverged() -> Self {
        OrbitDiagnostics {
            lyapunov: LyapunovEstimate {
                value: f64::NAN,
                iterations_used: 0,
                converged: false,
            },
            diverged: true,
            period: 0,
            reducible: None,
            min_abs_fiber_derivative: f64::NAN,
            phase_sensitivity: None,
        }
    }
}

pub fn classify(diag: &OrbitDiagnostics, zero_tol: f64) -> ClassLabel {
    let l = diag.lyapunov.value;
    if diag.diverged || l.is_nan() {
        ClassLabel::Diverged
    } else if l > zero_tol {
        ClassLabel::Chaotic
    } else if l.abs() <= zero_tol {
        ClassLabel::ZeroLyapunov
    } else if diag.reducible == Some(true) {
        ClassLabel::ReducibleCurve
    } else {
        ClassLabel::NonReducibleCurve
    }
}

/// Knobs for [`diagnose`].
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsConfig {
    pub seed: OrbitState,
    pub transient: u64,
    pub lyapunov_tol: f64,
    pub lyapunov_max: u64,
    pub zero_tol: f64,
    pub mesh_size: usize,
    pub mesh_tol: f64,
    pub max_mesh_depth: u64,
    pub reducibility_threshold: f64,
    pub period_window: f64,
    pub max_period: usize,
    /// Orbit length used for the reducibility of periodic curves.
    pub orbit_samples: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            seed: OrbitState::default(),
            transient: 20_000,
            lyapunov_tol: LYAPUNOV_TOL,
            lyapunov_max: 1_000_000,
            zero_tol: ZERO_TOL,
            mesh_size: MESH_SIZE,
            mesh_tol: MESH_TOL,
            max_mesh_depth: 8 * MESH_DEPTH,
            reducibility_threshold: REDUCIBILITY_THRESHOLD,
            period_window: PERIOD_WINDOW,
            max_period: 64,
            orbit_samples: 65_536,
        }
    }
}

/// Backward-mesh depth that contracts a unit transverse error below `tol`
/// at rate `e^Λ`, clamped to `[64, max]`.
fn mesh_depth_for(lyapunov: f64, tol: f64, max: u64) -> u64 {
    if !(lyapunov < 0.0) || lyapunov.is_infinite() {
        return if lyapunov == f64::NEG_INFINITY { 64 } else { max };
    }
    let d = (tol.ln() / lyapunov).ceil();
    (d.max(64.0) as u64).min(max)
}

/// Full per-parameter diagnostic pipeline: divergence, Lyapunov exponent,
/// period, reducibility.
pub fn diagnose<M: MapFamily + ?Sized>(map: &M, cfg: &DiagnosticsConfig) -> OrbitDiagnostics {
    let mut st = Stepper::new(map, cfg.seed.theta.value(), cfg.seed.x);
    if st.run(cfg.transient, crate::map::DEFAULT_ESCAPE_BOUND).is_some() {
        return OrbitDiagnostics::diverged();
    }
    let on_attractor = OrbitState {
        theta: Angle::new(st.phase().theta),
        x: st.x,
        step_count: cfg.transient,
    };
    let lyap = match lyapunov_from(&mut st, cfg.lyapunov_tol, cfg.lyapunov_max, cfg.transient) {
        Ok(l) => l,
        Err(_) => return OrbitDiagnostics::diverged(),
    };
    let mut diag = OrbitDiagnostics {
        lyapunov: lyap,
        diverged: false,
        period: 0,
        reducible: None,
        min_abs_fiber_derivative: f64::NAN,
        phase_sensitivity: None,
    };
    if lyap.value > cfg.zero_tol {
        return diag;
    }
    diag.period = detect_period(map, on_attractor, cfg.period_window, cfg.max_period).unwrap_or(0);

    let red = if diag.period == 1 {
        let depth = mesh_depth_for(lyap.value, cfg.mesh_tol * 1e-2, cfg.max_mesh_depth);
        converged_curve_mesh(map, cfg.mesh_size, depth, on_attractor.x, cfg.mesh_tol, depth)
            .ok()
            .map(|(mesh, _, _)| reducibility_check(map, &mesh, cfg.reducibility_threshold))
    } else if diag.period > 1 {
        let orbit = crate::map::iterate(
            map,
            on_attractor,
            0,
            cfg.orbit_samples.max(64 * diag.period),
            crate::map::DEFAULT_ESCAPE_BOUND,
        );
        (!orbit.diverged)
            .then(|| orbit_reducibility(map, &orbit.points, diag.period, cfg.reducibility_threshold))
    } else {
        None
    };
    if let Some(r) = red {
        diag.reducible = Some(r.reducible);
        diag.min_abs_fiber_derivative = r.min_abs;
    }
    diag
}

/// Point on the attractor after `transient` iterates from `seed`.
pub fn settle<M: MapFamily + ?Sized>(map: &M, seed: OrbitState, transient: u64) -> Result<OrbitState> {
    let mut st = Stepper::new(map, seed.theta.value(), seed.x);
    if let Some(i) = st.run(transient, crate::map::DEFAULT_ESCAPE_BOUND) {
        return Err(Error::DivergedOrbit { steps: i + 1 });
    }
    Ok(OrbitState {
        theta: Angle::new(st.phase().theta),
        x: st.x,
        step_count: seed.step_count + transient,
    })
}
