//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report reads top to
//! bottom. The process exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use qpmap_core::critical::{
    self, crossing_count, first_bound, invariant_reducibility_set, post_critical, precritical,
    tangency_epsilon, tangency_search_limit, SymbolSeq, SET_RESOLUTION,
};
use qpmap_core::diagnostics::{
    classify, converged_curve_mesh, diagnose, lyapunov_limit, ClassLabel, MESH_DEPTH,
};
use qpmap_core::fourier::{
    branch_curve_norms, continue_invariant_curve, continue_zero_lyapunov, curve_lyapunov, zero_lyapunov_seed,
    ContinuationPoint, FourierCurve, StepControl, START_ORDER,
};
use qpmap_core::model::{stability_mu, trivial_lyapunov};
use qpmap_core::scan::{axis, run_scan, run_sna_map, ScanConfig};
use qpmap_core::{FlmParams, ModelParams, OrbitState};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Tanh-sinh rule on `[0, len]` for an integrand given as a function of the
/// distance to each end, so that endpoint singularities are resolved.
fn tanh_sinh(len: f64, from_left: impl Fn(f64) -> f64, from_right: impl Fn(f64) -> f64) -> f64 {
    let h = 1.0 / 64.0;
    let half = 0.5 * len;
    let mut sum = 0.0;
    for k in -256i32..=256 {
        let t = k as f64 * h;
        let u = 0.5 * PI * t.sinh();
        let w = 0.5 * PI * t.cosh() / u.cosh().powi(2);
        // distance from the nearer end: half * (1 - |tanh u|)
        let d = half * 2.0 / (1.0 + (2.0 * u.abs()).exp());
        if d <= 0.0 || w == 0.0 {
            continue;
        }
        let f = if k < 0 { from_left(d) } else { from_right(d) };
        sum += w * f;
    }
    sum * h * half
}

/// `∫₀¹ ln|μ + λ cos 2πθ| dθ` by quadrature, split at the zeros of the
/// argument.
fn log_cos_quadrature(mu: f64, lambda: f64) -> f64 {
    // even in θ about 1/2: integrate [0, 1/2] and double
    let value_near = |anchor: f64, at_zero: bool, s: f64, d: f64| {
        let a = if at_zero { 0.0 } else { mu + lambda * (2.0 * PI * anchor).cos() };
        let c = (2.0 * PI * anchor).cos();
        let sn = (2.0 * PI * anchor).sin();
        let v = a + lambda * (-2.0 * c * (PI * d).sin().powi(2) - s * sn * (2.0 * PI * d).sin());
        v.abs().ln()
    };
    let mut cuts = vec![(0.0, mu + lambda == 0.0)];
    if lambda != 0.0 && (mu / lambda).abs() < 1.0 {
        cuts.push(((-mu / lambda).acos() / (2.0 * PI), true));
    }
    cuts.push((0.5, mu - lambda == 0.0));
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let ((a, za), (b, zb)) = (w[0], w[1]);
        total += tanh_sinh(b - a, |d| value_near(a, za, 1.0, d), |d| value_near(b, zb, -1.0, d));
    }
    2.0 * total
}

fn criterion_1() -> Outcome {
    let g = axis(-3.0, 3.0, 100);
    let mut worst_quad = 0.0f64;
    for &mu in &g {
        for &l in &g {
            let p = ModelParams::new(mu, l);
            let closed = trivial_lyapunov(&p).unwrap();
            worst_quad = worst_quad.max((closed - log_cos_quadrature(mu, l)).abs());
        }
    }
    let start = Instant::now();
    let g = axis(-3.0, 3.0, 50);
    let mut worst_orbit = 0.0f64;
    for &mu in &g {
        for &l in &g {
            let p = ModelParams::new(mu, l);
            let closed = trivial_lyapunov(&p).unwrap();
            // θ = 0 hits the zero of μ + λ cos 2πθ exactly on the diagonal μ = −λ
            let est = lyapunov_limit(&p, OrbitState::new(0.123, 0.0), 0, 1e-5, 400_000).unwrap();
            worst_orbit = worst_orbit.max((closed - est.value).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_quad < 1e-6 && worst_orbit < 1e-3 && elapsed < Duration::from_secs(10),
        format!(
            "max |closed - quadrature| = {worst_quad:.2e} (100x100), max |closed - orbit| = {worst_orbit:.2e} (50x50, {:.1} s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    for l in axis(-4.0, 4.0, 1000) {
        let lhs = stability_mu(l) - l.abs();
        let rhs = (l.abs() - 2.0).powi(2) / 4.0;
        worst = worst.max((lhs - rhs).abs());
    }
    let touch = [2.0f64, -2.0].iter().all(|&l| stability_mu(l) == l.abs());
    outcome(
        worst < 1e-12 && touch,
        format!("max |mu*(l) - |l| - (|l|-2)^2/4| = {worst:.1e} over 1000 lambdas; tangency at (2, +-2): {touch}"),
    )
}

fn criterion_3() -> Outcome {
    let d1 = zero_lyapunov_seed(1, START_ORDER).unwrap().alpha;
    let d2 = zero_lyapunov_seed(2, START_ORDER).unwrap().alpha;
    let e1 = (d1 - 3.0).abs();
    let e2 = (d2 - (1.0 + 6f64.sqrt())).abs();
    let cfg = ScanConfig::default().diagnostics();
    let mut worst = 0.0f64;
    for a in axis(1.05, 2.95, 20) {
        let est = lyapunov_limit(&FlmParams::new(a, 0.0), OrbitState::new(0.0, 0.3), cfg.transient, 1e-5, 1_000_000)
            .unwrap();
        worst = worst.max((est.value - (2.0 - a).abs().ln()).abs());
    }
    outcome(
        e1 < 1e-6 && e2 < 1e-6 && worst < 1e-3,
        format!("|d1 - 3| = {e1:.1e}, |d2 - (1+sqrt 6)| = {e2:.1e}, max |L - ln|2-a|| = {worst:.1e} at 20 alphas"),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let ctl = StepControl {
        max_order: 512,
        ..StepControl::default()
    };
    let seed = zero_lyapunov_seed(1, START_ORDER).unwrap();
    let branch = continue_zero_lyapunov(seed, 1, &ctl);
    let elapsed = start.elapsed();
    let last = branch.points.last().unwrap();
    let norms = branch_curve_norms(&branch.points);
    let d2: Vec<f64> = norms.iter().map(|n| n.1).collect();
    let tail = &d2[d2.len().saturating_sub(20)..];
    let monotone = tail.windows(2).all(|w| w[1] >= w[0]);
    let sup = *d2.last().unwrap();
    let near = (last.alpha - 3.3796).abs() < 1e-2 && (last.epsilon - 0.1423).abs() < 1e-2;
    outcome(
        near && sup > 1e3 && monotone && elapsed < Duration::from_secs(300),
        format!(
            "terminus ({:.6}, {:.6}) [{}], sup|u''| = {sup:.0}, last 20 monotone: {monotone}, N = {}, {:.0} s",
            last.alpha,
            last.epsilon,
            branch.terminal_reason,
            last.curve.order(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_5() -> Outcome {
    let alpha = 3.5;
    let curve = FourierCurve::constant(START_ORDER, 1.0 - 1.0 / alpha);
    let map = FlmParams::new(alpha, 0.0);
    let start = ContinuationPoint {
        lyapunov: curve_lyapunov(&curve, &map, 1).unwrap(),
        curve,
        alpha,
        epsilon: 0.0,
        period: 1,
    };
    let branch = continue_invariant_curve(start, 1, 0.5, &StepControl::default());
    let eps = branch.points.last().unwrap().epsilon;
    // combined pre-critical constraint at α = 3.5
    let mut combined = tangency_search_limit(alpha).unwrap();
    for k in [1, 2, 6] {
        if let Ok(e) = tangency_epsilon(k, alpha, 64) {
            combined = combined.min(e);
        }
    }
    let gap = (eps - combined).abs();
    outcome(
        (eps - 0.154086).abs() < 1e-3,
        format!(
            "loss at eps = {eps:.6} [{}]; combined constraint minimum {combined:.6}, distance {gap:.4} ({} 2e-2, reported only)",
            branch.terminal_reason,
            if gap < 2e-2 { "within" } else { "outside" }
        ),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let p = FlmParams::new(2.75, 0.12);
    let m1 = precritical(&SymbolSeq::minus_power(1), &p, SET_RESOLUTION);
    let crossings = crossing_count(&m1, &p);
    // transversality: P(−) − P₁ changes sign with nonzero slope
    let diff: Vec<(f64, f64)> = m1.points().map(|&(t, x)| (t, x - post_critical(t, &p))).collect();
    let transversal = diff
        .windows(2)
        .filter(|w| w[0].1.signum() != w[1].1.signum())
        .all(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs() > 1e-3);
    let connecting = four_codes().iter().any(|code| {
        precritical(code, &p, SET_RESOLUTION).segments.iter().any(|s| {
            let to_p0 = s.points.iter().any(|&(_, x)| (x - 0.5).abs() < 1e-3);
            let to_p1 = s.points.iter().any(|&(t, x)| (x - post_critical(t, &p)).abs() < 1e-3);
            to_p0 && to_p1
        })
    });
    let elapsed = start.elapsed();
    outcome(
        crossings == 2 && transversal && connecting && elapsed < Duration::from_secs(1),
        format!(
            "P(-) meets P1 at {crossings} points (transversal: {transversal}); P_-4 component joins P0 and P1: {connecting}; {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn four_codes() -> Vec<SymbolSeq> {
    use critical::Sign::{Minus, Plus};
    (0..16u32)
        .map(|bits| SymbolSeq((0..4).map(|i| if bits >> i & 1 == 1 { Minus } else { Plus }).collect()))
        .collect()
}

fn criterion_7() -> Outcome {
    let p = FlmParams::new(3.2, 0.138);
    let band = invariant_reducibility_set(&p, 8);
    let (mesh, residual, _) = converged_curve_mesh(&p, SET_RESOLUTION, MESH_DEPTH, 0.5, 1e-8, 64 * MESH_DEPTH).unwrap();
    let inside = band.contains_strictly(|t| mesh.interpolate(t));
    let margin = band
        .thetas
        .iter()
        .zip(band.lower.iter().zip(&band.upper))
        .map(|(&t, (&lo, &hi))| {
            let x = mesh.interpolate(t);
            (x - lo).min(hi - x)
        })
        .fold(f64::INFINITY, f64::min);
    outcome(
        band.exists && inside && band.thetas.len() == 8192,
        format!(
            "exists = {}, curve strictly inside at all {} samples: {inside} (min margin {margin:.2e}, mesh residual {residual:.1e})",
            band.exists,
            band.thetas.len()
        ),
    )
}

fn criterion_8() -> Outcome {
    let cfg = ScanConfig {
        threads: threads(),
        ..ScanConfig::preset("first-bound").unwrap()
    };
    let cfg = ScanConfig {
        x_steps: 100,
        y_steps: 100,
        ..cfg
    };
    let grid = run_scan(&cfg).unwrap();
    let ys = cfg.y_values();
    let dy = ys[1] - ys[0];
    let mut worst: (f64, f64) = (0.0, 0.0);
    let mut columns = 0;
    let mut within = 0;
    for (ix, &alpha) in cfg.x_values().iter().enumerate() {
        if alpha > 2.3 + 1e-12 {
            continue;
        }
        columns += 1;
        // first cell from the bottom that is not a reducible curve
        let first = (0..cfg.y_steps).find(|&iy| grid.cell(ix, iy).class != Some(ClassLabel::ReducibleCurve));
        let boundary = match first {
            Some(0) | None => f64::NAN,
            Some(iy) => 0.5 * (ys[iy - 1] + ys[iy]),
        };
        let dev = (boundary - first_bound(alpha).unwrap()) / dy;
        if dev.abs() < 2.0 {
            within += 1;
        }
        if !(dev.abs() <= worst.1.abs()) {
            worst = (alpha, dev);
        }
    }
    outcome(
        within == columns,
        format!(
            "{within}/{columns} columns within 2 cells of 1-2/alpha; worst deviation {:.1} cells at alpha = {:.4}",
            worst.1, worst.0
        ),
    )
}

fn criterion_9() -> Outcome {
    let cfg = ScanConfig::default().diagnostics();
    let mut parts = Vec::new();
    let mut ok = true;
    for (alpha, period) in [(2.4, Some(1)), (3.35, Some(2)), (3.5, Some(4)), (3.522, None)] {
        let d = diagnose(&FlmParams::new(alpha, 0.01), &cfg);
        ok &= d.lyapunov.value < 0.0 && period.map_or(true, |p| d.period == p);
        parts.push(format!("L({alpha}) = {:.4} p = {}", d.lyapunov.value, d.period));
    }
    let d = diagnose(&FlmParams::new(3.529, 0.01), &cfg);
    ok &= d.lyapunov.value > 0.0 && classify(&d, cfg.zero_tol) == ClassLabel::Chaotic;
    parts.push(format!("L(3.529) = {:.4}", d.lyapunov.value));
    outcome(ok, parts.join(", "))
}

fn criterion_10() -> Outcome {
    let cfg = ScanConfig {
        x_steps: 100,
        y_steps: 100,
        threads: threads(),
        ..ScanConfig::preset("fig3").unwrap()
    };
    let orders = [10_000, 100_000, 1_000_000];
    let map = run_sna_map(&cfg, &orders).unwrap();
    let counts = map.counts();
    let ok = counts
        .windows(2)
        .all(|w| w[1] as f64 <= w[0] as f64 + (0.02 * w[0] as f64).ceil());
    outcome(
        ok,
        format!(
            "candidates at N = 1e4, 1e5, 1e6: {counts:?} over {} cells (2% allowance)",
            map.grid.cells.len()
        ),
    )
}

fn criterion_11() -> Outcome {
    let base = ScanConfig {
        x_min: 3.2,
        x_max: 3.6,
        x_steps: 12,
        y_min: 0.0,
        y_max: 0.2,
        y_steps: 10,
        sna_orders: vec![1000, 10_000],
        ..ScanConfig::default()
    };
    let mut renders = Vec::new();
    for t in [1, 4, 8] {
        let cfg = ScanConfig {
            threads: t,
            ..base.clone()
        };
        let mut grid = Vec::new();
        run_scan(&cfg).unwrap().write_csv(&mut grid).unwrap();
        let sna = run_sna_map(&cfg, &cfg.sna_orders).unwrap();
        let mut mask = Vec::new();
        sna.grid.write_csv(&mut mask).unwrap();
        sna.write_mask_csv(&mut mask).unwrap();
        renders.push((grid, mask));
    }
    let identical = renders.windows(2).all(|w| w[0] == w[1]);
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    outcome(
        identical,
        format!(
            "grid and SNA outputs byte-identical for 1, 4, 8 threads: {identical}; property suites run under cargo test; wall-time scaling check {}",
            if cores >= 8 { "in the scan tests" } else { "skipped (fewer than 8 cores)" }
        ),
    )
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() {
    // criterion numbers on the command line select a subset
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, fn() -> Outcome); 11] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let mut failed = Vec::new();
    for (n, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        println!(
            "criterion {n:>2}: {} {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed.push(n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
