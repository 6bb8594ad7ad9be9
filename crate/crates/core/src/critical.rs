//! Critical, post-critical and pre-critical sets of the forced logistic map
//! and the reducibility constraints they induce in the `(α, ε)` plane.

use std::f64::consts::TAU;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::map::{wrap_unit, FlmParams};
use crate::{Error, Result};

/// Default θ-resolution of sampled pre-critical sets.
pub const SET_RESOLUTION: usize = 8192;
/// Lower end of the ε search interval for tangency constraints.
pub const TANGENCY_EPS_MIN: f64 = 1e-4;
const BOUNDARY_BISECTIONS: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn as_char(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// Sequence `s = (s₁, …, s_k)` naming `P(s) = H_{s_k} ∘ ⋯ ∘ H_{s₁}(P₀)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SymbolSeq(pub Vec<Sign>);

impl SymbolSeq {
    pub fn empty() -> Self {
        SymbolSeq(Vec::new())
    }

    /// `(−)^k`.
    pub fn minus_power(k: usize) -> Self {
        SymbolSeq(vec![Sign::Minus; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The preimage branch applied last; it fixes which half of `[0, 1]`
    /// the set lies in.
    pub fn outermost(&self) -> Option<Sign> {
        self.0.last().copied()
    }

    /// Compact form used in file names, e.g. `m4` for `(−)^4`, `pmm` otherwise.
    pub fn file_stem(&self) -> String {
        if self.is_empty() {
            return "p0".into();
        }
        if self.0.iter().all(|s| *s == Sign::Minus) {
            return format!("m{}", self.len());
        }
        self.0
            .iter()
            .map(|s| if *s == Sign::Plus { 'p' } else { 'm' })
            .collect()
    }
}

impl fmt::Display for SymbolSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", s.as_char())?;
        }
        f.write_str(")")
    }
}

impl FromStr for SymbolSeq {
    type Err = Error;

    /// Accepts `+`/`-` characters with optional parentheses and commas.
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .filter(|c| !matches!(c, '(' | ')' | ',' | ' '))
            .map(|c| match c {
                '+' | 'p' => Ok(Sign::Plus),
                '-' | 'm' | '−' => Ok(Sign::Minus),
                other => Err(Error::Config(format!("bad symbol {other:?} in code {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(SymbolSeq)
    }
}

/// Post-critical curve `P₁(θ) = (α/4)(1 + ε cos 2π(θ − ω))`.
pub fn post_critical(theta: f64, p: &FlmParams) -> f64 {
    0.25 * p.alpha * (1.0 + p.epsilon * (TAU * (theta - p.omega)).cos())
}

/// Preimage branch `H±(θ, x)`; `None` above `P₁`.
pub fn h_preimage(sign: Sign, theta: f64, x: f64, p: &FlmParams) -> Option<(f64, f64)> {
    let back = wrap_unit(theta - p.omega);
    let scale = p.alpha * (1.0 + p.epsilon * (TAU * back).cos());
    let mut rad = 0.25 - x / scale;
    if rad < 0.0 {
        // points on P₁ itself can round to a tiny negative radicand
        if rad < -1e-14 {
            return None;
        }
        rad = 0.0;
    }
    let r = rad.sqrt();
    Some(match sign {
        Sign::Plus => (back, 0.5 - r),
        Sign::Minus => (back, 0.5 + r),
    })
}

/// Fiber value of `P(code)` above `θ`, if defined.
pub fn precritical_at(code: &SymbolSeq, theta: f64, p: &FlmParams) -> Option<f64> {
    let k = code.len();
    let mut x = 0.5;
    for (i, s) in code.0.iter().enumerate() {
        let t = wrap_unit(theta + (k - i) as f64 * p.omega);
        x = h_preimage(*s, t, x, p)?.1;
    }
    Some(x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    /// `(θ, x)` samples in increasing θ within `[0, 1]`.
    pub points: Vec<(f64, f64)>,
}

impl Segment {
    pub fn theta_range(&self) -> (f64, f64) {
        (
            self.points.first().map_or(0.0, |p| p.0),
            self.points.last().map_or(0.0, |p| p.0),
        )
    }
}

/// Sampled set made of θ-graphs over disjoint intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseCurve {
    pub code: SymbolSeq,
    pub resolution: usize,
    pub segments: Vec<Segment>,
}

impl PiecewiseCurve {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.segments.iter().flat_map(|s| s.points.iter())
    }

    /// Value on the grid point `j/resolution`, if defined there.
    fn grid_values(&self) -> Vec<Option<f64>> {
        let mut out = vec![None; self.resolution];
        for &(t, x) in self.points() {
            let j = t * self.resolution as f64;
            let r = j.round();
            if (j - r).abs() < 1e-9 && (r as usize) < self.resolution {
                out[r as usize] = Some(x);
            }
        }
        out
    }
}

/// Locate the defined/undefined boundary between `good` and `bad`.
fn refine_boundary(code: &SymbolSeq, p: &FlmParams, mut good: f64, mut bad: f64) -> (f64, f64) {
    let mut x = precritical_at(code, good, p).expect("good end is defined");
    for _ in 0..BOUNDARY_BISECTIONS {
        let mid = 0.5 * (good + bad);
        match precritical_at(code, mid, p) {
            Some(v) => {
                good = mid;
                x = v;
            }
            None => bad = mid,
        }
    }
    (good, x)
}

/// Sample `P(code)` on the grid `θⱼ = j/resolution`, split into segments
/// at undefined samples, with segment ends refined onto the boundary of
/// the domain of definition.
pub fn precritical(code: &SymbolSeq, p: &FlmParams, resolution: usize) -> PiecewiseCurve {
    let h = 1.0 / resolution as f64;
    let values: Vec<Option<f64>> = (0..resolution)
        .map(|j| precritical_at(code, j as f64 * h, p))
        .collect();
    let mut segments = Vec::new();
    let mut current: Vec<(f64, f64)> = Vec::new();
    for (j, v) in values.iter().enumerate() {
        let t = j as f64 * h;
        match v {
            Some(x) => {
                if current.is_empty() && j > 0 {
                    current.push(refine_boundary(code, p, t, t - h));
                }
                current.push((t, *x));
            }
            None => {
                if !current.is_empty() {
                    current.push(refine_boundary(code, p, t - h, t));
                    segments.push(Segment {
                        points: std::mem::take(&mut current),
                    });
                }
            }
        }
    }
    if !current.is_empty() {
        match precritical_at(code, 1.0, p) {
            Some(x) => current.push((1.0, x)),
            None => current.push(refine_boundary(code, p, 1.0 - h, 1.0)),
        }
        segments.push(Segment { points: current });
    }
    for seg in &mut segments {
        seg.points.dedup_by(|a, b| a.0 == b.0);
    }
    PiecewiseCurve {
        code: code.clone(),
        resolution,
        segments,
    }
}

/// Largest `ε` for which `P₀` stays below `P₁`: `1 − 2/α`.
pub fn first_bound(alpha: f64) -> Result<f64> {
    if alpha <= 2.0 {
        return Err(Error::Domain(format!("first bound needs alpha > 2, got {alpha}")));
    }
    Ok(1.0 - 2.0 / alpha)
}

/// `min (P₁(θ) − x)` over the samples of `P(code)`; `+∞` when empty.
pub fn gap_to_postcritical(code: &SymbolSeq, p: &FlmParams) -> f64 {
    gap_of(&precritical(code, p, SET_RESOLUTION), p)
}

fn gap_of(set: &PiecewiseCurve, p: &FlmParams) -> f64 {
    set.points()
        .map(|&(t, x)| post_critical(t, p) - x)
        .fold(f64::INFINITY, f64::min)
}

/// Sign changes of `P₁(θ) − x` along each segment of `set`.
pub fn crossing_count(set: &PiecewiseCurve, p: &FlmParams) -> usize {
    set.segments
        .iter()
        .map(|seg| {
            let signs: Vec<bool> = seg
                .points
                .iter()
                .map(|&(t, x)| post_critical(t, p) - x)
                .filter(|g| *g != 0.0)
                .map(|g| g > 0.0)
                .collect();
            signs.windows(2).filter(|w| w[0] != w[1]).count()
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    FirstBound,
    /// Tangency of `P((−)^{2k})` with `P₁`.
    Tangency(usize),
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintKind::FirstBound => f.write_str("first_bound"),
            ConstraintKind::Tangency(k) => write!(f, "tangency_m{}", 2 * k),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintCurve {
    pub kind: ConstraintKind,
    pub samples: Vec<(f64, f64)>,
}

impl ConstraintCurve {
    pub fn first_bound(alphas: &[f64]) -> Self {
        ConstraintCurve {
            kind: ConstraintKind::FirstBound,
            samples: alphas
                .iter()
                .filter_map(|&a| first_bound(a).ok().map(|e| (a, e)))
                .collect(),
        }
    }

    pub fn epsilon_at(&self, alpha: f64) -> Option<f64> {
        self.samples.iter().find(|s| s.0 == alpha).map(|s| s.1)
    }
}

/// Upper end of the ε search interval at `alpha`.
pub fn tangency_search_limit(alpha: f64) -> Result<f64> {
    Ok(first_bound(alpha)?.min(4.0 / alpha - 1.0))
}

fn obstructed(code: &SymbolSeq, alpha: f64, epsilon: f64) -> bool {
    gap_to_postcritical(code, &FlmParams::new(alpha, epsilon)) <= 0.0
}

/// Smallest ε in the search interval at which `P((−)^{2k})` reaches `P₁`.
pub fn tangency_epsilon(k: usize, alpha: f64, coarse: usize) -> Result<f64> {
    let code = SymbolSeq::minus_power(2 * k);
    let hi = tangency_search_limit(alpha)?;
    let lo = TANGENCY_EPS_MIN;
    if hi <= lo {
        return Err(Error::NoTangencyInRange { alpha });
    }
    let mut prev = lo;
    if obstructed(&code, alpha, lo) {
        return Ok(lo);
    }
    for i in 1..=coarse {
        let e = lo + (hi - lo) * i as f64 / coarse as f64;
        if obstructed(&code, alpha, e) {
            let (mut a, mut b) = (prev, e);
            while b - a > 1e-10 {
                let mid = 0.5 * (a + b);
                if obstructed(&code, alpha, mid) {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            return Ok(b);
        }
        prev = e;
    }
    Err(Error::NoTangencyInRange { alpha })
}

/// Tangency locus of `P((−)^{2k})` with `P₁` over `alphas`; samples
/// without a tangency in range are dropped.
pub fn tangency_constraint(k: usize, alphas: &[f64], coarse: usize) -> Result<ConstraintCurve> {
    let samples: Vec<(f64, f64)> = alphas
        .par_iter()
        .map(|&a| tangency_epsilon(k, a, coarse).ok().map(|e| (a, e)))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    if samples.is_empty() {
        return Err(Error::NoTangencyInRange {
            alpha: alphas.first().copied().unwrap_or(f64::NAN),
        });
    }
    Ok(ConstraintCurve {
        kind: ConstraintKind::Tangency(k),
        samples,
    })
}

/// For each curve in order, the samples where it lowers the running
/// minimum of all earlier curves at the same α.
pub fn improvements(curves: &[ConstraintCurve]) -> Vec<ConstraintCurve> {
    let mut best: Vec<(f64, f64)> = Vec::new();
    let mut out = Vec::with_capacity(curves.len());
    for c in curves {
        let mut kept = Vec::new();
        for &(a, e) in &c.samples {
            match best.iter_mut().find(|b| b.0 == a) {
                Some(b) if e < b.1 => {
                    b.1 = e;
                    kept.push((a, e));
                }
                Some(_) => {}
                None => {
                    best.push((a, e));
                    kept.push((a, e));
                }
            }
        }
        out.push(ConstraintCurve {
            kind: c.kind,
            samples: kept,
        });
    }
    out
}

/// Smallest ε over all curves at `alpha`, if any curve has a sample there.
pub fn combined_minimum(curves: &[ConstraintCurve], alpha: f64) -> Option<f64> {
    curves
        .iter()
        .filter_map(|c| c.epsilon_at(alpha))
        .fold(None, |m: Option<f64>, e| Some(m.map_or(e, |m| m.min(e))))
}

/// Band between even-coded and odd-coded pre-critical sets.
#[derive(Clone, Debug)]
pub struct ReducibilitySet {
    pub exists: bool,
    pub thetas: Vec<f64>,
    /// Pointwise max of `P₀` and `P((−)^{2r})`.
    pub lower: Vec<f64>,
    /// Pointwise min of `P₁` and `P((−)^{2r+1})`.
    pub upper: Vec<f64>,
}

impl ReducibilitySet {
    /// Whether `curve(θ)` lies strictly inside the band at every grid θ.
    pub fn contains_strictly<F: Fn(f64) -> f64>(&self, curve: F) -> bool {
        self.thetas
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&t, (&lo, &hi))| {
                let x = curve(t);
                lo < x && x < hi
            })
    }
}

pub fn invariant_reducibility_set(p: &FlmParams, k_max: usize) -> ReducibilitySet {
    invariant_reducibility_set_at(p, k_max, SET_RESOLUTION)
}

pub fn invariant_reducibility_set_at(p: &FlmParams, k_max: usize, resolution: usize) -> ReducibilitySet {
    let thetas: Vec<f64> = (0..resolution).map(|j| j as f64 / resolution as f64).collect();
    let mut lower = vec![0.5f64; resolution];
    let mut upper: Vec<f64> = thetas.iter().map(|&t| post_critical(t, p)).collect();
    let mut exists = true;
    for depth in 1..=2 * k_max {
        let set = precritical(&SymbolSeq::minus_power(depth), p, resolution);
        if depth % 2 == 0 && gap_of(&set, p) <= 0.0 {
            exists = false;
        }
        for (j, v) in set.grid_values().into_iter().enumerate() {
            if let Some(x) = v {
                if depth % 2 == 0 {
                    lower[j] = lower[j].max(x);
                } else {
                    upper[j] = upper[j].min(x);
                }
            }
        }
    }
    ReducibilitySet {
        exists,
        thetas,
        lower,
        upper,
    }
}

/// Set dump: `theta,x,segment_id`.
pub fn write_set_dump<W: Write>(mut w: W, set: &PiecewiseCurve) -> io::Result<()> {
    writeln!(w, "theta,x,segment_id")?;
    for (id, seg) in set.segments.iter().enumerate() {
        for (t, x) in &seg.points {
            writeln!(w, "{t},{x},{id}")?;
        }
    }
    Ok(())
}

/// Constraint CSV: `alpha,epsilon`.
pub fn write_constraint_csv<W: Write>(mut w: W, curve: &ConstraintCurve) -> io::Result<()> {
    writeln!(w, "alpha,epsilon")?;
    for (a, e) in &curve.samples {
        writeln!(w, "{a},{e}")?;
    }
    Ok(())
}
