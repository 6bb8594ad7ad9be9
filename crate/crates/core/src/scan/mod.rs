//! Parameter-space runs and their on-disk artifacts.

mod config;
mod plot;
mod runs;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::diagnostics::{
    classify, diagnose, is_sna_candidate, phase_sensitivity_profile, settle, ClassLabel, DiagnosticsConfig,
};
use crate::map::{FlmParams, MapFamily, ModelParams};
use crate::{Error, Result};

pub use config::{axis, MapKind, ScanConfig, PRESETS};
pub use plot::{emit_plots, palette, Figure, FIGURES};
pub use runs::{
    codes_up_to, dump_attractor, run_branch, run_constraints, run_model, BranchKind, BranchOptions,
    ConstraintOptions, ModelOptions, RunSummary,
};

/// Fraction of errored cells above which a run is reported as failed.
pub const ERROR_BUDGET: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct ScanCell {
    pub x: f64,
    pub y: f64,
    /// `None` when the cell errored.
    pub class: Option<ClassLabel>,
    pub lyapunov: f64,
    pub period: usize,
    pub min_abs_dxf: f64,
    /// Phase-sensitivity indicator at each checkpoint of the grid.
    pub gammas: Vec<f64>,
    pub error: Option<String>,
}

impl ScanCell {
    fn errored(x: f64, y: f64, msg: String) -> Self {
        ScanCell {
            x,
            y,
            class: None,
            lyapunov: f64::NAN,
            period: 0,
            min_abs_dxf: f64::NAN,
            gammas: Vec::new(),
            error: Some(msg),
        }
    }

    pub fn class_name(&self) -> &'static str {
        self.class.map_or("error", ClassLabel::as_str)
    }
}

/// Row-major grid: index `iy * x_steps + ix`.
#[derive(Clone, Debug)]
pub struct ScanGrid {
    pub config: ScanConfig,
    /// Orbit lengths at which `gammas` were recorded; empty for plain scans.
    pub checkpoints: Vec<u64>,
    pub cells: Vec<ScanCell>,
}

impl ScanGrid {
    pub fn cell(&self, ix: usize, iy: usize) -> &ScanCell {
        &self.cells[iy * self.config.x_steps + ix]
    }

    pub fn errored(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }

    pub fn over_error_budget(&self) -> bool {
        self.errored() as f64 > ERROR_BUDGET * self.cells.len() as f64
    }

    pub fn class_counts(&self) -> [usize; 5] {
        let mut n = [0; 5];
        for c in self.cells.iter().filter_map(|c| c.class) {
            n[c.index()] += 1;
        }
        n
    }

    /// Grid CSV: `x,y,class,lyapunov,period,min_abs_dxf[,gamma_N...]`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let (xn, yn) = self.config.map.axis_names();
        write!(w, "{xn},{yn},class,lyapunov,period,min_abs_dxf")?;
        for c in &self.checkpoints {
            write!(w, ",gamma_{c}")?;
        }
        writeln!(w)?;
        for c in &self.cells {
            write!(
                w,
                "{},{},{},{},{},{}",
                c.x,
                c.y,
                c.class_name(),
                c.lyapunov,
                c.period,
                c.min_abs_dxf
            )?;
            for i in 0..self.checkpoints.len() {
                write!(w, ",{}", c.gammas.get(i).copied().unwrap_or(f64::NAN))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Run `f` on a pool of exactly `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn diagnose_cell<M: MapFamily>(map: &M, dcfg: &DiagnosticsConfig, x: f64, y: f64, checkpoints: &[u64]) -> ScanCell {
    let d = diagnose(map, dcfg);
    let class = classify(&d, dcfg.zero_tol);
    let mut gammas = vec![f64::NAN; checkpoints.len()];
    if !checkpoints.is_empty() && !d.diverged && d.lyapunov.value < 0.0 {
        let seeded = settle(map, dcfg.seed, dcfg.transient)
            .and_then(|s| phase_sensitivity_profile(map, s, checkpoints));
        if let Ok(g) = seeded {
            gammas = g;
        }
    }
    ScanCell {
        x,
        y,
        class: Some(class),
        lyapunov: d.lyapunov.value,
        period: d.period,
        min_abs_dxf: d.min_abs_fiber_derivative,
        gammas,
        error: None,
    }
}

fn eval_cell(cfg: &ScanConfig, dcfg: &DiagnosticsConfig, x: f64, y: f64, checkpoints: &[u64]) -> ScanCell {
    if !x.is_finite() || !y.is_finite() {
        return ScanCell::errored(x, y, "non-finite parameters".into());
    }
    let run = || match cfg.map {
        MapKind::Flm => diagnose_cell(&FlmParams::new(x, y).with_omega(cfg.omega), dcfg, x, y, checkpoints),
        MapKind::Model => diagnose_cell(&ModelParams::new(x, y).with_omega(cfg.omega), dcfg, x, y, checkpoints),
    };
    match panic::catch_unwind(AssertUnwindSafe(run)) {
        Ok(cell) => cell,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "cell evaluation panicked".into());
            ScanCell::errored(x, y, msg)
        }
    }
}

fn scan_with_checkpoints(cfg: &ScanConfig, checkpoints: Vec<u64>) -> Result<ScanGrid> {
    cfg.validate()?;
    let xs = cfg.x_values();
    let ys = cfg.y_values();
    let dcfg = cfg.diagnostics();
    let params: Vec<(f64, f64)> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
    let cells = with_threads(cfg.threads, || {
        params
            .par_iter()
            .map(|&(x, y)| eval_cell(cfg, &dcfg, x, y, &checkpoints))
            .collect::<Vec<_>>()
    })?;
    Ok(ScanGrid {
        config: cfg.clone(),
        checkpoints,
        cells,
    })
}

/// Classify every cell of the configured grid. Per-cell failures are
/// recorded in the cell; the result does not depend on the thread budget.
pub fn run_scan(cfg: &ScanConfig) -> Result<ScanGrid> {
    scan_with_checkpoints(cfg, Vec::new())
}

#[derive(Clone, Debug)]
pub struct SnaMap {
    pub grid: ScanGrid,
    pub orders: Vec<u64>,
    /// `masks[i][cell]`: candidate at `orders[i]`.
    pub masks: Vec<Vec<bool>>,
}

impl SnaMap {
    pub fn counts(&self) -> Vec<usize> {
        self.masks.iter().map(|m| m.iter().filter(|&&c| c).count()).collect()
    }

    /// `x,y,candidate_N...` with 0/1 entries.
    pub fn write_mask_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let (xn, yn) = self.grid.config.map.axis_names();
        write!(w, "{xn},{yn}")?;
        for n in &self.orders {
            write!(w, ",candidate_{n}")?;
        }
        writeln!(w)?;
        for (i, c) in self.grid.cells.iter().enumerate() {
            write!(w, "{},{}", c.x, c.y)?;
            for m in &self.masks {
                write!(w, ",{}", u8::from(m[i]))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Scan plus the phase-sensitivity growth test at each order `N`: a
/// negative-Λ cell is a candidate at `N` when the indicator more than
/// doubles from `N` to `2N` and again to `4N`.
pub fn run_sna_map(cfg: &ScanConfig, orders: &[u64]) -> Result<SnaMap> {
    if orders.is_empty() || orders.windows(2).any(|w| w[0] >= w[1]) || orders[0] == 0 {
        return Err(Error::Config("sna orders must be positive and strictly ascending".into()));
    }
    let mut checkpoints: Vec<u64> = orders.iter().flat_map(|&n| [n, 2 * n, 4 * n]).collect();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let grid = scan_with_checkpoints(cfg, checkpoints)?;
    let at = |c: &ScanCell, n: u64| {
        let i = grid.checkpoints.binary_search(&n).expect("checkpoint present");
        c.gammas.get(i).copied().unwrap_or(f64::NAN)
    };
    let masks = orders
        .iter()
        .map(|&n| {
            grid.cells
                .iter()
                .map(|c| is_sna_candidate(at(c, n), at(c, 2 * n), at(c, 4 * n)))
                .collect()
        })
        .collect();
    Ok(SnaMap {
        grid,
        orders: orders.to_vec(),
        masks,
    })
}

/// Plain-text `key = value` record of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, config_hash: &str) -> Self {
        let mut m = Manifest::default();
        m.push("command", command);
        m.push("qpmap_core_version", env!("CARGO_PKG_VERSION"));
        m.push("format_version", "1");
        m.push("config_sha256", config_hash);
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Manifest { entries }
    }
}

/// Create `path` (and its parent directory) and fill it through a buffer.
pub fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(path.to_path_buf())
}

fn grid_manifest(command: &str, grid: &ScanGrid) -> Manifest {
    let mut m = Manifest::new(command, &grid.config.hash());
    m.push("map", grid.config.map);
    m.push("cells", grid.cells.len());
    m.push("errored_cells", grid.errored());
    for (c, n) in ClassLabel::ALL.iter().zip(grid.class_counts()) {
        m.push(format!("count.{c}"), n);
    }
    m
}

/// `grid.csv` and `manifest.txt` in the configured output directory.
pub fn write_scan(grid: &ScanGrid) -> Result<Vec<PathBuf>> {
    let dir = &grid.config.output;
    Ok(vec![
        write_file(&dir.join("grid.csv"), |w| grid.write_csv(w))?,
        write_file(&dir.join("manifest.txt"), |w| {
            w.write_all(grid_manifest("scan", grid).render().as_bytes())
        })?,
    ])
}

/// `sna.csv`, `sna_candidates.csv` and `manifest.txt`.
pub fn write_sna(map: &SnaMap) -> Result<Vec<PathBuf>> {
    let dir = &map.grid.config.output;
    let mut m = grid_manifest("sna-map", &map.grid);
    for (n, c) in map.orders.iter().zip(map.counts()) {
        m.push(format!("candidates.{n}"), c);
    }
    Ok(vec![
        write_file(&dir.join("sna.csv"), |w| map.grid.write_csv(w))?,
        write_file(&dir.join("sna_candidates.csv"), |w| map.write_mask_csv(w))?,
        write_file(&dir.join("manifest.txt"), |w| w.write_all(m.render().as_bytes()))?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(map: MapKind, x: (f64, f64), y: (f64, f64), n: usize) -> ScanConfig {
        ScanConfig {
            map,
            x_min: x.0,
            x_max: x.1,
            y_min: y.0,
            y_max: y.1,
            x_steps: n,
            y_steps: n,
            ..ScanConfig::default()
        }
    }

    #[test]
    fn cells_are_row_major() {
        let g = run_scan(&small(MapKind::Flm, (2.2, 2.8), (0.0, 0.1), 3)).unwrap();
        assert_eq!(g.cells.len(), 9);
        assert_eq!((g.cell(2, 0).x, g.cell(2, 0).y), (2.8, 0.0));
        assert_eq!((g.cell(0, 1).x, g.cell(0, 1).y), (2.2, 0.05));
    }

    #[test]
    fn epsilon_row_examples() {
        let cfg = ScanConfig {
            x_steps: 2,
            y_steps: 2,
            ..small(MapKind::Flm, (2.4, 3.529), (0.01, 0.02), 2)
        };
        let g = run_scan(&cfg).unwrap();
        assert!(g.cell(0, 0).lyapunov < 0.0);
        assert!(g.cell(1, 0).lyapunov > 0.0);
        assert_eq!(g.cell(1, 0).class, Some(ClassLabel::Chaotic));
    }

    #[test]
    fn flm_window_reducibility_follows_constraints() {
        let g = run_scan(&small(MapKind::Flm, (2.2, 2.8), (0.0, 0.15), 12)).unwrap();
        let counts = g.class_counts();
        assert_eq!(counts[ClassLabel::Diverged.index()], 0);
        assert_eq!(counts[ClassLabel::Chaotic.index()], 0);
        for ix in 0..12 {
            let alpha = g.cell(ix, 0).x;
            let fb = 1.0 - 2.0 / alpha;
            let k1 = crate::critical::tangency_epsilon(1, alpha, 64).unwrap_or(fb);
            for iy in 0..12 {
                let c = g.cell(ix, iy);
                // above the first bound P₀ and P₁ intersect
                if c.y > fb + 0.01 {
                    assert_eq!(c.class, Some(ClassLabel::NonReducibleCurve), "{c:?}");
                }
                if c.y < fb.min(k1) - 0.01 {
                    assert_eq!(c.class, Some(ClassLabel::ReducibleCurve), "{c:?}");
                }
            }
        }
    }

    #[test]
    fn model_row_doubles_at_stability_parabola() {
        // λ = 1: the trivial curve loses stability at μ = 1 + 1/4
        let mut cfg = small(MapKind::Model, (0.9, 1.6), (1.0, 1.1), 2);
        cfg.x_steps = 71;
        cfg.seed_x = 0.3;
        let g = run_scan(&cfg).unwrap();
        let h = 0.7 / 70.0;
        let xs: Vec<_> = (0..cfg.x_steps).map(|ix| g.cell(ix, 0)).collect();
        let last_one = xs.iter().rposition(|c| c.period == 1).unwrap();
        let first_two = xs.iter().position(|c| c.period == 2).unwrap();
        // the marginal cell itself may resolve to anything
        assert!(first_two - last_one <= 2, "{last_one} {first_two}");
        let change = 0.5 * (xs[last_one].x + xs[first_two].x);
        assert!((change - 1.25).abs() <= h, "{change}");
        assert!((0..cfg.x_steps).all(|ix| g.cell(ix, 0).x >= 1.25 - h || g.cell(ix, 0).period == 1));
    }

    #[test]
    fn sna_zero_forcing_row_has_no_candidates() {
        let mut cfg = small(MapKind::Flm, (2.5, 3.5), (0.0, 0.01), 4);
        cfg.y_steps = 2;
        let m = run_sna_map(&cfg, &[1000, 10_000]).unwrap();
        for (i, c) in m.grid.cells.iter().enumerate() {
            if c.y == 0.0 {
                assert!(m.masks.iter().all(|mask| !mask[i]));
                assert!(c.gammas.iter().all(|g| g.is_nan() || *g == 0.0), "{c:?}");
            }
        }
        assert_eq!(m.grid.checkpoints, vec![1000, 2000, 4000, 10_000, 20_000, 40_000]);
    }

    #[test]
    fn smooth_reducible_cell_is_never_candidate() {
        let cfg = small(MapKind::Flm, (2.5, 2.6), (0.05, 0.06), 2);
        let m = run_sna_map(&cfg, &[10_000, 100_000]).unwrap();
        assert!(m.grid.cells.iter().all(|c| c.class == Some(ClassLabel::ReducibleCurve)));
        assert_eq!(m.counts(), vec![0, 0]);
    }

    #[test]
    fn sna_orders_must_ascend() {
        let cfg = small(MapKind::Flm, (2.5, 2.6), (0.0, 0.1), 2);
        assert!(run_sna_map(&cfg, &[100, 10]).is_err());
        assert!(run_sna_map(&cfg, &[]).is_err());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = ScanConfig {
            x_steps: 1,
            ..ScanConfig::default()
        };
        assert!(matches!(run_scan(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn non_finite_cells_error_without_aborting() {
        let cell = eval_cell(
            &ScanConfig::default(),
            &DiagnosticsConfig::default(),
            f64::NAN,
            0.1,
            &[],
        );
        assert!(cell.class.is_none() && cell.error.is_some());
        let grid = ScanGrid {
            config: ScanConfig::default(),
            checkpoints: vec![],
            cells: vec![ScanCell::errored(0.0, 0.0, "x".into()); 2],
        };
        assert!(grid.over_error_budget());
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains(",error,"));
    }

    #[test]
    fn manifest_round_trip() {
        let mut m = Manifest::new("scan", "abc");
        m.push("branch.d1.terminal_reason", "step_failure");
        let back = Manifest::parse(&m.render());
        assert_eq!(back, m);
        assert_eq!(back.get("config_sha256"), Some("abc"));
    }
}
