use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{axis, with_threads, write_file, Manifest, ScanConfig};
use crate::critical::{
    self, combined_minimum, crossing_count, improvements, invariant_reducibility_set_at, precritical,
    tangency_constraint, write_constraint_csv, write_set_dump, ConstraintCurve, Sign, SymbolSeq, SET_RESOLUTION,
};
use crate::diagnostics::{converged_curve_mesh, settle, MESH_DEPTH};
use crate::fourier::{
    continue_invariant_curve, continue_zero_lyapunov, curve_lyapunov, write_branch_csv, write_coefficients,
    zero_lyapunov_seed, ContinuationPoint, FourierCurve, StepControl, START_ORDER,
};
use crate::map::{iterate, FlmParams, MapFamily, DEFAULT_ESCAPE_BOUND};
use crate::model::{model_period2_reducibility_scan, stability_mu, write_region_csv};
use crate::{Error, OrbitState, Result};

/// Files written by a run and its manifest.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub manifest: Manifest,
}

impl RunSummary {
    fn finish(dir: &Path, mut files: Vec<PathBuf>, manifest: Manifest) -> Result<Self> {
        files.push(write_file(&dir.join("manifest.txt"), |w| {
            w.write_all(manifest.render().as_bytes())
        })?);
        Ok(RunSummary { files, manifest })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchKind {
    /// Zero-Lyapunov curve `D_i` from the `i`-th logistic doubling.
    PeriodDoubling(usize),
    /// Tangency of `P((−)^{2k})` with `P₁` over an α range.
    TangencyConstraint(usize),
    /// Stability parabola and reducibility lines of the model map.
    ModelBoundary,
    /// A periodic invariant curve continued in ε at fixed α.
    InvariantCurve,
}

impl fmt::Display for BranchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BranchKind::PeriodDoubling(i) => write!(f, "period_doubling_{i}"),
            BranchKind::TangencyConstraint(k) => write!(f, "tangency_constraint_{k}"),
            BranchKind::ModelBoundary => f.write_str("model_boundary"),
            BranchKind::InvariantCurve => f.write_str("invariant_curve"),
        }
    }
}

impl FromStr for BranchKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let index = |rest: &str| -> Result<usize> {
            match rest.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i),
                _ => Err(Error::Config(format!("bad branch index in {s:?}"))),
            }
        };
        if let Some(rest) = s.strip_prefix("period_doubling_") {
            return index(rest).map(BranchKind::PeriodDoubling);
        }
        if let Some(rest) = s.strip_prefix("tangency_constraint_") {
            return index(rest).map(BranchKind::TangencyConstraint);
        }
        match s {
            "model_boundary" => Ok(BranchKind::ModelBoundary),
            "invariant_curve" => Ok(BranchKind::InvariantCurve),
            _ => Err(Error::Config(format!(
                "unknown branch kind {s:?} (period_doubling_<i>, tangency_constraint_<k>, model_boundary, invariant_curve)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BranchOptions {
    pub kind: BranchKind,
    pub output: PathBuf,
    pub control: StepControl,
    /// Sample values of the free parameter: α for tangency curves, λ for
    /// model boundaries.
    pub samples: Vec<f64>,
    /// Coarse ε steps of the tangency search.
    pub coarse: usize,
    /// Fixed α and period of an invariant-curve run.
    pub alpha: f64,
    pub period: usize,
    /// Starting fiber value; defaults to the logistic fixed point `1 − 1/α`.
    pub x0: Option<f64>,
    pub epsilon_limit: f64,
    pub threads: usize,
}

impl Default for BranchOptions {
    fn default() -> Self {
        BranchOptions {
            kind: BranchKind::PeriodDoubling(1),
            output: PathBuf::from("out"),
            control: StepControl::default(),
            samples: axis(2.05, 3.6, 32),
            coarse: 64,
            alpha: 3.5,
            period: 1,
            x0: None,
            epsilon_limit: 0.5,
            threads: 1,
        }
    }
}

fn branch_files(dir: &Path, stem: &str, points: &[ContinuationPoint]) -> Result<Vec<PathBuf>> {
    Ok(vec![
        write_file(&dir.join(format!("{stem}.csv")), |w| write_branch_csv(w, points))?,
        write_file(&dir.join(format!("{stem}.coef")), |w| write_coefficients(w, points))?,
        write_file(&dir.join(format!("{stem}_terminal.csv")), |w| {
            writeln!(w, "theta,u,du,d2u")?;
            if let Some(p) = points.last() {
                for j in 0..=TERMINAL_SAMPLES {
                    let t = j as f64 / TERMINAL_SAMPLES as f64;
                    let (u, d1, d2) = p.curve.eval_all(t);
                    writeln!(w, "{t},{u},{d1},{d2}")?;
                }
            }
            Ok(())
        })?,
    ])
}

/// θ samples of the last curve of a branch.
const TERMINAL_SAMPLES: usize = 2048;

fn record_terminus(m: &mut Manifest, stem: &str, points: &[ContinuationPoint], reason: impl fmt::Display) {
    m.push(format!("branch.{stem}.terminal_reason"), reason);
    m.push(format!("branch.{stem}.points"), points.len());
    if let Some(p) = points.last() {
        m.push(format!("branch.{stem}.terminus"), format!("{},{}", p.alpha, p.epsilon));
        m.push(format!("branch.{stem}.order"), p.curve.order());
    }
}

fn options_hash(text: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Run one continuation or constraint computation and write its CSV,
/// coefficient sidecar (for curve branches) and manifest.
pub fn run_branch(opts: &BranchOptions) -> Result<RunSummary> {
    let c = &opts.control;
    let described = format!(
        "{} {:?} {:?} {} {} {} {:?} {}",
        opts.kind, c, opts.samples, opts.coarse, opts.alpha, opts.period, opts.x0, opts.epsilon_limit
    );
    let mut m = Manifest::new("branch", &options_hash(&described));
    m.push("kind", opts.kind);
    let dir = &opts.output;
    let files = match opts.kind {
        BranchKind::PeriodDoubling(i) => {
            let stem = format!("branch_d{i}");
            let seed = zero_lyapunov_seed(i, START_ORDER)?;
            m.push(format!("branch.{stem}.seed_alpha"), seed.alpha);
            let branch = continue_zero_lyapunov(seed, i, c);
            record_terminus(&mut m, &stem, &branch.points, branch.terminal_reason);
            branch_files(dir, &stem, &branch.points)?
        }
        BranchKind::InvariantCurve => {
            if opts.period == 0 {
                return Err(Error::Config("period must be at least 1".into()));
            }
            let x0 = match (opts.x0, opts.period) {
                (Some(x), _) => x,
                (None, 1) => 1.0 - 1.0 / opts.alpha,
                (None, _) => return Err(Error::Config("x0 is required for period > 1".into())),
            };
            let curve = FourierCurve::constant(START_ORDER, x0);
            let map = FlmParams::new(opts.alpha, 0.0);
            let start = ContinuationPoint {
                lyapunov: curve_lyapunov(&curve, &map, opts.period)?,
                curve,
                alpha: opts.alpha,
                epsilon: 0.0,
                period: opts.period,
            };
            let stem = format!("curve_a{}_p{}", opts.alpha, opts.period);
            let branch = continue_invariant_curve(start, 1, opts.epsilon_limit, c);
            record_terminus(&mut m, &stem, &branch.points, branch.terminal_reason);
            branch_files(dir, &stem, &branch.points)?
        }
        BranchKind::TangencyConstraint(k) => {
            let curve = with_threads(opts.threads, || tangency_constraint(k, &opts.samples, opts.coarse))??;
            m.push("samples", curve.samples.len());
            vec![write_constraint_csv_file(dir, &curve)?]
        }
        BranchKind::ModelBoundary => {
            let path = write_file(&dir.join("model_boundary.csv"), |w| {
                writeln!(w, "lambda,mu_stability,mu_reducibility")?;
                for &l in &opts.samples {
                    writeln!(w, "{l},{},{}", stability_mu(l), l.abs())?;
                }
                Ok(())
            })?;
            m.push("samples", opts.samples.len());
            vec![path]
        }
    };
    RunSummary::finish(dir, files, m)
}

fn write_constraint_csv_file(dir: &Path, curve: &ConstraintCurve) -> Result<PathBuf> {
    write_file(&dir.join(format!("constraint_{}.csv", curve.kind)), |w| {
        write_constraint_csv(w, curve)
    })
}

#[derive(Clone, Debug)]
pub struct ConstraintOptions {
    pub output: PathBuf,
    pub alphas: Vec<f64>,
    /// Tangency curves `P((−)^{2k})`, in order of application.
    pub ks: Vec<usize>,
    pub coarse: usize,
    /// Optional parameter point for set dumps and the reducibility band.
    pub set_at: Option<(f64, f64)>,
    pub codes: Vec<SymbolSeq>,
    pub k_max: usize,
    pub resolution: usize,
    pub threads: usize,
}

impl Default for ConstraintOptions {
    fn default() -> Self {
        ConstraintOptions {
            output: PathBuf::from("out"),
            alphas: axis(2.05, 3.6, 32),
            ks: vec![1, 2, 6],
            coarse: 64,
            set_at: None,
            codes: codes_up_to(4),
            k_max: 8,
            resolution: SET_RESOLUTION,
            threads: 1,
        }
    }
}

/// Constraint curves (first bound and tangencies), their successive
/// improvements, and optionally the pre-critical sets, post-critical curve,
/// reducibility band and attracting curve at one parameter value.
pub fn run_constraints(opts: &ConstraintOptions) -> Result<RunSummary> {
    let dir = &opts.output;
    let described = format!(
        "{:?} {:?} {} {:?} {:?} {} {}",
        opts.alphas, opts.ks, opts.coarse, opts.set_at, opts.codes, opts.k_max, opts.resolution
    );
    let mut m = Manifest::new("constraints", &options_hash(&described));
    let mut files = Vec::new();

    let valid: Vec<f64> = opts.alphas.iter().copied().filter(|&a| a > 2.0).collect();
    if !valid.is_empty() {
        let mut curves = vec![ConstraintCurve::first_bound(&valid)];
        for &k in &opts.ks {
            curves.push(with_threads(opts.threads, || tangency_constraint(k, &valid, opts.coarse))??);
        }
        for c in &curves {
            files.push(write_constraint_csv_file(dir, c)?);
        }
        for imp in improvements(&curves) {
            files.push(write_file(&dir.join(format!("improvement_{}.csv", imp.kind)), |w| {
                write_constraint_csv(w, &imp)
            })?);
        }
        files.push(write_file(&dir.join("constraint_combined.csv"), |w| {
            writeln!(w, "alpha,epsilon")?;
            for &a in &valid {
                if let Some(e) = combined_minimum(&curves, a) {
                    writeln!(w, "{a},{e}")?;
                }
            }
            Ok(())
        })?);
        for c in &curves {
            m.push(format!("curve.{}.samples", c.kind), c.samples.len());
        }
    }

    if let Some((alpha, epsilon)) = opts.set_at {
        let p = FlmParams::new(alpha, epsilon);
        for code in &opts.codes {
            let set = precritical(code, &p, opts.resolution);
            m.push(format!("set.{}.segments", code.file_stem()), set.segments.len());
            m.push(format!("set.{}.crossings", code.file_stem()), crossing_count(&set, &p));
            files.push(write_file(&dir.join(format!("set_{}.csv", code.file_stem())), |w| {
                write_set_dump(w, &set)
            })?);
        }
        files.push(write_file(&dir.join("postcritical.csv"), |w| {
            writeln!(w, "theta,x,segment_id")?;
            for j in 0..=opts.resolution {
                let t = j as f64 / opts.resolution as f64;
                writeln!(w, "{t},{},0", critical::post_critical(t, &p))?;
            }
            Ok(())
        })?);
        let band = invariant_reducibility_set_at(&p, opts.k_max, opts.resolution);
        m.push("reducibility_set.exists", band.exists);
        files.push(write_file(&dir.join("reducibility_set.csv"), |w| {
            writeln!(w, "theta,lower,upper")?;
            for ((t, lo), hi) in band.thetas.iter().zip(&band.lower).zip(&band.upper) {
                writeln!(w, "{t},{lo},{hi}")?;
            }
            Ok(())
        })?);
        // attracting curve on the same θ grid
        let mesh = converged_curve_mesh(&p, opts.resolution, MESH_DEPTH, 0.5, 1e-8, 64 * MESH_DEPTH);
        if let Ok((mesh, residual, _)) = mesh {
            m.push("curve_mesh.residual", residual);
            m.push(
                "curve_mesh.inside_band",
                band.exists && band.contains_strictly(|t| mesh.interpolate(t)),
            );
            files.push(write_file(&dir.join("curve_mesh.csv"), |w| {
                writeln!(w, "theta,x")?;
                for (t, x) in mesh.thetas.iter().zip(&mesh.xs) {
                    writeln!(w, "{t},{x}")?;
                }
                Ok(())
            })?);
        }
    }
    RunSummary::finish(dir, files, m)
}

/// Every symbol code of length at most `n`, shortest first.
pub fn codes_up_to(n: usize) -> Vec<SymbolSeq> {
    let mut out = vec![SymbolSeq::empty()];
    let mut level = vec![SymbolSeq::empty()];
    for _ in 0..n {
        level = level
            .iter()
            .flat_map(|c| {
                [Sign::Plus, Sign::Minus].map(|s| {
                    let mut v = c.0.clone();
                    v.push(s);
                    SymbolSeq(v)
                })
            })
            .collect();
        out.extend(level.iter().cloned());
    }
    out
}

#[derive(Clone, Debug)]
pub struct ModelOptions {
    pub config: ScanConfig,
    /// Also sample the boundary curves over the λ axis.
    pub boundaries: bool,
}

/// Period-two reducibility scan of the model map over the configured
/// `μ × λ` grid (row-major in μ).
pub fn run_model(opts: &ModelOptions) -> Result<RunSummary> {
    let cfg = &opts.config;
    cfg.validate()?;
    let mus = cfg.x_values();
    let lambdas = cfg.y_values();
    let dcfg = cfg.diagnostics();
    let cells = with_threads(cfg.threads, || model_period2_reducibility_scan(&mus, &lambdas, &dcfg))?;
    let mut m = Manifest::new("model", &cfg.hash());
    m.push("cells", cells.len());
    let dir = &cfg.output;
    let mut files = vec![write_file(&dir.join("model_regions.csv"), |w| write_region_csv(w, &cells))?];
    if opts.boundaries {
        files.push(write_file(&dir.join("model_boundary.csv"), |w| {
            writeln!(w, "lambda,mu_stability,mu_reducibility")?;
            for &l in &axis(cfg.y_min, cfg.y_max, 4 * cfg.y_steps) {
                writeln!(w, "{l},{},{}", stability_mu(l), l.abs())?;
            }
            Ok(())
        })?);
    }
    RunSummary::finish(dir, files, m)
}

/// `theta,x` samples of the attractor reached from `seed`, after the
/// transient.
pub fn dump_attractor<M: MapFamily, W: Write>(
    mut w: W,
    map: &M,
    seed: OrbitState,
    transient: u64,
    points: usize,
) -> Result<()> {
    let start = settle(map, seed, transient)?;
    let orbit = iterate(map, start, 0, points, DEFAULT_ESCAPE_BOUND);
    if orbit.diverged {
        return Err(Error::DivergedOrbit { steps: transient });
    }
    writeln!(w, "theta,x")?;
    for (t, x) in &orbit.points {
        writeln!(w, "{t},{x}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_kind_names() {
        for k in [
            BranchKind::PeriodDoubling(3),
            BranchKind::TangencyConstraint(2),
            BranchKind::ModelBoundary,
            BranchKind::InvariantCurve,
        ] {
            assert_eq!(k.to_string().parse::<BranchKind>().unwrap(), k);
        }
        assert!("period_doubling_0".parse::<BranchKind>().is_err());
        assert!("doubling".parse::<BranchKind>().is_err());
    }

    #[test]
    fn model_boundary_run() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_branch(&BranchOptions {
            kind: BranchKind::ModelBoundary,
            output: dir.path().into(),
            samples: vec![-2.0, 0.0, 2.0],
            ..BranchOptions::default()
        })
        .unwrap();
        let text = std::fs::read_to_string(dir.path().join("model_boundary.csv")).unwrap();
        assert_eq!(text.lines().nth(3), Some("2,2,2"));
        assert_eq!(s.manifest.get("kind"), Some("model_boundary"));
    }

    #[test]
    fn fig6_set_dumps() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_constraints(&ConstraintOptions {
            output: dir.path().into(),
            alphas: vec![],
            set_at: Some((2.75, 0.12)),
            resolution: 1024,
            ..ConstraintOptions::default()
        })
        .unwrap();
        assert_eq!(s.manifest.get("set.m1.crossings"), Some("2"));
        for f in ["set_p0.csv", "set_m1.csv", "set_m4.csv", "postcritical.csv", "reducibility_set.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn code_enumeration() {
        let c = codes_up_to(3);
        assert_eq!(c.len(), 15);
        assert!(c.contains(&SymbolSeq::minus_power(3)));
        assert!(c.windows(2).all(|w| w[0].len() <= w[1].len()));
    }

    #[test]
    fn attractor_dump_rows() {
        let mut buf = Vec::new();
        dump_attractor(&mut buf, &FlmParams::new(2.5, 0.0), OrbitState::new(0.0, 0.5), 1000, 10).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 11);
        let x: f64 = text.lines().nth(5).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert!((x - 0.6).abs() < 1e-12);
    }
}
