//! Closed-form analysis of the model map `x̄ = x(x² − (μ + λ cos 2πθ))`
//! around its trivial invariant curve `x = 0`.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::diagnostics::{diagnose, DiagnosticsConfig};
use crate::map::{ModelParams, OrbitState};
use crate::{Error, Result};

/// `∫₀¹ ln|τ + cos 2πθ| dθ`: `−ln 2` for `|τ| ≤ 1`, else `−ln 2 + arccosh|τ|`.
pub fn cos_log_integral(tau: f64) -> f64 {
    let t = tau.abs();
    if t <= 1.0 {
        -std::f64::consts::LN_2
    } else {
        -std::f64::consts::LN_2 + (t + (t * t - 1.0).sqrt()).ln()
    }
}

/// Lyapunov exponent of the trivial curve, `∫ ln|μ + λ cos 2πθ| dθ`.
pub fn trivial_lyapunov(p: &ModelParams) -> Result<f64> {
    let (m, l) = (p.mu.abs(), p.lambda.abs());
    if m == 0.0 && l == 0.0 {
        return Err(Error::NegativeInfinity);
    }
    Ok(if l <= m {
        ((m + (m * m - l * l).sqrt()) / 2.0).ln()
    } else {
        (l / 2.0).ln()
    })
}

/// Constant multiplier `−(μ + sign(μ)√(μ² − λ²))/2` of the reduced
/// linearisation around the trivial curve.
pub fn reduced_multiplier(p: &ModelParams) -> Result<f64> {
    if p.lambda.abs() >= p.mu.abs() {
        return Err(Error::NotReducible);
    }
    let root = (p.mu * p.mu - p.lambda * p.lambda).sqrt();
    Ok(-(p.mu + p.mu.signum() * root) / 2.0)
}

/// `μ` at which the trivial curve changes stability for a given `λ`.
pub fn stability_mu(lambda: f64) -> f64 {
    1.0 + lambda * lambda / 4.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExistenceRegion {
    /// Inside the band guaranteeing a two-periodic invariant curve.
    PeriodTwoGuaranteed,
    /// Inside the mirrored band guaranteeing two invariant curves.
    TwoCurvesGuaranteed,
    Outside,
}

pub fn existence_region(p: &ModelParams) -> ExistenceRegion {
    let (mu, l) = (p.mu, p.lambda.abs());
    if 0.0 < l && l < mu && 1.0 + l * l / 2.0 < mu && mu < 1.5 - 2.0 * l {
        ExistenceRegion::PeriodTwoGuaranteed
    } else if mu < -l && -l < 0.0 && -1.5 + 2.0 * l < mu && mu < -1.0 + l * l / 2.0 {
        ExistenceRegion::TwoCurvesGuaranteed
    } else {
        ExistenceRegion::Outside
    }
}

/// Distance of the stability parabola to the reducibility line at `λ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangencyWitness {
    pub lambda: f64,
    pub mu_star: f64,
    pub distance: f64,
    /// `(|λ| − 2)²/4`.
    pub predicted: f64,
}

pub fn tangency_witness(lambdas: &[f64]) -> Vec<TangencyWitness> {
    lambdas
        .iter()
        .map(|&lambda| {
            let mu_star = stability_mu(lambda);
            let d = lambda.abs() - 2.0;
            TangencyWitness {
                lambda,
                mu_star,
                distance: mu_star - lambda.abs(),
                predicted: d * d / 4.0,
            }
        })
        .collect()
}

/// Boundaries of the model's parameter plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelRegions {
    /// Tangency points `(μ, λ) = (2, ±2)` of the stability parabola with the
    /// reducibility lines `λ = ±μ`.
    pub tangency_points: [(f64, f64); 2],
}

impl Default for ModelRegions {
    fn default() -> Self {
        ModelRegions {
            tangency_points: [(2.0, 2.0), (2.0, -2.0)],
        }
    }
}

impl ModelRegions {
    pub fn reducible(&self, p: &ModelParams) -> bool {
        p.lambda.abs() < p.mu.abs()
    }

    pub fn stable(&self, p: &ModelParams) -> bool {
        p.mu.abs() < stability_mu(p.lambda)
    }

    pub fn existence(&self, p: &ModelParams) -> ExistenceRegion {
        existence_region(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelClass {
    Diverged,
    /// The orbit falls onto `x = 0`.
    Trivial,
    PeriodTwoReducible,
    PeriodTwoNonReducible,
    /// Chaotic, zero-Lyapunov, or of another period.
    Other,
}

impl ModelClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelClass::Diverged => "diverged",
            ModelClass::Trivial => "trivial",
            ModelClass::PeriodTwoReducible => "period_two_reducible",
            ModelClass::PeriodTwoNonReducible => "period_two_non_reducible",
            ModelClass::Other => "other",
        }
    }
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelCell {
    pub mu: f64,
    pub lambda: f64,
    pub class: ModelClass,
    /// Orbit Lyapunov exponent of the attractor reached.
    pub lyapunov: f64,
    /// Reduced multiplier of the trivial curve, NaN where not reducible.
    pub multiplier: f64,
}

/// Attractor below this magnitude counts as the trivial curve.
const TRIVIAL_EPS: f64 = 1e-8;

/// Classify the attractor reached from `seed` at one parameter value.
pub fn classify_model_cell(p: &ModelParams, seed: OrbitState, cfg: &DiagnosticsConfig) -> ModelCell {
    let multiplier = reduced_multiplier(p).unwrap_or(f64::NAN);
    let cfg = DiagnosticsConfig {
        seed,
        max_period: cfg.max_period.max(2),
        ..cfg.clone()
    };
    let diag = diagnose(p, &cfg);
    let class = if diag.diverged {
        ModelClass::Diverged
    } else {
        let settled = crate::diagnostics::settle(p, seed, cfg.transient);
        match settled {
            Ok(s) if s.x.abs() < TRIVIAL_EPS => ModelClass::Trivial,
            Err(_) => ModelClass::Diverged,
            Ok(_) if diag.period == 2 => match diag.reducible {
                Some(true) => ModelClass::PeriodTwoReducible,
                Some(false) => ModelClass::PeriodTwoNonReducible,
                None => ModelClass::Other,
            },
            Ok(_) => ModelClass::Other,
        }
    };
    ModelCell {
        mu: p.mu,
        lambda: p.lambda,
        class,
        lyapunov: diag.lyapunov.value,
        multiplier,
    }
}

/// Per-cell classification over `mus × lambdas` (row-major in μ), seeded
/// at `x = 0.3`.
pub fn model_period2_reducibility_scan(mus: &[f64], lambdas: &[f64], cfg: &DiagnosticsConfig) -> Vec<ModelCell> {
    let cells: Vec<(f64, f64)> = mus
        .iter()
        .flat_map(|&m| lambdas.iter().map(move |&l| (m, l)))
        .collect();
    cells
        .par_iter()
        .map(|&(mu, lambda)| classify_model_cell(&ModelParams::new(mu, lambda), OrbitState::new(0.0, 0.3), cfg))
        .collect()
}

/// Region CSV: `mu,lambda,class,lyapunov,multiplier`.
pub fn write_region_csv<W: Write>(mut w: W, cells: &[ModelCell]) -> io::Result<()> {
    writeln!(w, "mu,lambda,class,lyapunov,multiplier")?;
    for c in cells {
        writeln!(w, "{},{},{},{},{}", c.mu, c.lambda, c.class, c.lyapunov, c.multiplier)?;
    }
    Ok(())
}
