use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ini::{EscapePolicy, Ini, WriteOption};
use sha2::{Digest, Sha256};

use crate::diagnostics::DiagnosticsConfig;
use crate::map::GOLDEN_OMEGA;
use crate::{Error, OrbitState, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    Flm,
    Model,
}

impl MapKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MapKind::Flm => "flm",
            MapKind::Model => "model",
        }
    }

    /// CSV names of the two scanned parameters.
    pub fn axis_names(self) -> (&'static str, &'static str) {
        match self {
            MapKind::Flm => ("alpha", "epsilon"),
            MapKind::Model => ("mu", "lambda"),
        }
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MapKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flm" => Ok(MapKind::Flm),
            "model" => Ok(MapKind::Model),
            _ => Err(Error::Config(format!("unknown map kind {s:?} (expected flm or model)"))),
        }
    }
}

/// Everything a parameter-space run needs. The x axis is α (or μ), the y
/// axis ε (or λ).
#[derive(Clone, Debug, PartialEq)]
pub struct ScanConfig {
    pub map: MapKind,
    pub omega: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub x_steps: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub y_steps: usize,
    pub seed_theta: f64,
    pub seed_x: f64,
    pub transient: u64,
    pub lyapunov_tol: f64,
    pub lyapunov_max: u64,
    pub zero_tol: f64,
    pub reducibility_threshold: f64,
    pub mesh_size: usize,
    pub mesh_tol: f64,
    pub period_window: f64,
    pub max_period: usize,
    /// Orders `N` of the phase-sensitivity test.
    pub sna_orders: Vec<u64>,
    pub threads: usize,
    pub output: PathBuf,
}

impl Default for ScanConfig {
    fn default() -> Self {
        let d = DiagnosticsConfig::default();
        ScanConfig {
            map: MapKind::Flm,
            omega: GOLDEN_OMEGA,
            x_min: 2.0,
            x_max: 4.0,
            x_steps: 200,
            y_min: 0.0,
            y_max: 0.6,
            y_steps: 200,
            seed_theta: 0.0,
            seed_x: 0.5,
            transient: d.transient,
            lyapunov_tol: d.lyapunov_tol,
            lyapunov_max: d.lyapunov_max,
            zero_tol: d.zero_tol,
            reducibility_threshold: d.reducibility_threshold,
            mesh_size: d.mesh_size,
            mesh_tol: d.mesh_tol,
            period_window: d.period_window,
            max_period: d.max_period,
            sna_orders: vec![10_000, 100_000, 1_000_000],
            threads: 1,
            output: PathBuf::from("out"),
        }
    }
}

/// Named windows for the figure scripts. The coordinates are approximate.
pub const PRESETS: [(&str, [f64; 4]); 6] = [
    ("fig3", [3.3, 3.9, 0.0, 0.25]),
    ("fig5", [2.0, 4.0, 0.0, 0.6]),
    ("fig5-zoom", [3.2, 3.6, 0.0, 0.2]),
    ("fig5-zoom2", [3.35, 3.55, 0.05, 0.16]),
    ("first-bound", [2.05, 2.5, 0.0, 0.25]),
    ("fig10", [-1.0, 4.0, -3.0, 3.0]),
];

type Field = (&'static str, &'static str);

const FIELDS: [Field; 22] = [
    ("map", "kind"),
    ("map", "omega"),
    ("grid", "x_min"),
    ("grid", "x_max"),
    ("grid", "x_steps"),
    ("grid", "y_min"),
    ("grid", "y_max"),
    ("grid", "y_steps"),
    ("orbit", "seed_theta"),
    ("orbit", "seed_x"),
    ("orbit", "transient"),
    ("tolerances", "lyapunov_tol"),
    ("tolerances", "lyapunov_max"),
    ("tolerances", "zero_tol"),
    ("tolerances", "reducibility_threshold"),
    ("tolerances", "mesh_size"),
    ("tolerances", "mesh_tol"),
    ("tolerances", "period_window"),
    ("tolerances", "max_period"),
    ("sna", "orders"),
    ("run", "threads"),
    ("run", "output"),
];

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.trim()
        .parse()
        .map_err(|e| Error::Config(format!("{key} = {v:?}: {e}")))
}

impl ScanConfig {
    /// `(section, key)` of every field, in rendering order.
    pub fn fields() -> &'static [(&'static str, &'static str)] {
        &FIELDS
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, [x0, x1, y0, y1]) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?;
        let map = if name == "fig10" { MapKind::Model } else { MapKind::Flm };
        Ok(ScanConfig {
            map,
            x_min: *x0,
            x_max: *x1,
            y_min: *y0,
            y_max: *y1,
            seed_x: if map == MapKind::Model { 0.3 } else { 0.5 },
            ..ScanConfig::default()
        })
    }

    fn get(&self, key: &str) -> String {
        match key {
            "kind" => self.map.to_string(),
            "omega" => self.omega.to_string(),
            "x_min" => self.x_min.to_string(),
            "x_max" => self.x_max.to_string(),
            "x_steps" => self.x_steps.to_string(),
            "y_min" => self.y_min.to_string(),
            "y_max" => self.y_max.to_string(),
            "y_steps" => self.y_steps.to_string(),
            "seed_theta" => self.seed_theta.to_string(),
            "seed_x" => self.seed_x.to_string(),
            "transient" => self.transient.to_string(),
            "lyapunov_tol" => self.lyapunov_tol.to_string(),
            "lyapunov_max" => self.lyapunov_max.to_string(),
            "zero_tol" => self.zero_tol.to_string(),
            "reducibility_threshold" => self.reducibility_threshold.to_string(),
            "mesh_size" => self.mesh_size.to_string(),
            "mesh_tol" => self.mesh_tol.to_string(),
            "period_window" => self.period_window.to_string(),
            "max_period" => self.max_period.to_string(),
            "orders" => self
                .sna_orders
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(","),
            "threads" => self.threads.to_string(),
            "output" => self.output.to_string_lossy().into_owned(),
            _ => unreachable!("unknown field {key}"),
        }
    }

    /// Set one field from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "kind" => self.map = v.trim().parse()?,
            "omega" => self.omega = parse_value(key, v)?,
            "x_min" => self.x_min = parse_value(key, v)?,
            "x_max" => self.x_max = parse_value(key, v)?,
            "x_steps" => self.x_steps = parse_value(key, v)?,
            "y_min" => self.y_min = parse_value(key, v)?,
            "y_max" => self.y_max = parse_value(key, v)?,
            "y_steps" => self.y_steps = parse_value(key, v)?,
            "seed_theta" => self.seed_theta = parse_value(key, v)?,
            "seed_x" => self.seed_x = parse_value(key, v)?,
            "transient" => self.transient = parse_value(key, v)?,
            "lyapunov_tol" => self.lyapunov_tol = parse_value(key, v)?,
            "lyapunov_max" => self.lyapunov_max = parse_value(key, v)?,
            "zero_tol" => self.zero_tol = parse_value(key, v)?,
            "reducibility_threshold" => self.reducibility_threshold = parse_value(key, v)?,
            "mesh_size" => self.mesh_size = parse_value(key, v)?,
            "mesh_tol" => self.mesh_tol = parse_value(key, v)?,
            "period_window" => self.period_window = parse_value(key, v)?,
            "max_period" => self.max_period = parse_value(key, v)?,
            "orders" => {
                self.sna_orders = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_value(key, s))
                    .collect::<Result<_>>()?
            }
            "threads" => self.threads = parse_value(key, v)?,
            "output" => self.output = PathBuf::from(v),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Sectioned `key = value` text; [`ScanConfig::parse`] inverts it.
    pub fn render(&self) -> String {
        self.render_sections(|_| true)
    }

    fn render_sections(&self, keep: impl Fn(&str) -> bool) -> String {
        let mut ini = Ini::new();
        for (section, key) in FIELDS {
            if keep(section) {
                ini.with_section(Some(section)).set(key, self.get(key));
            }
        }
        let mut buf = Vec::new();
        ini.write_to_opt(
            &mut buf,
            WriteOption {
                escape_policy: EscapePolicy::Reserved,
                ..WriteOption::default()
            },
        )
        .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ini output is utf-8")
    }

    /// Defaults overridden by the keys present in `text`. Unknown sections
    /// or keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScanConfig::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    /// Override the fields present in `text`, keeping the rest.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (section, props) in ini.iter() {
            for (key, value) in props.iter() {
                match FIELDS.iter().find(|(s, k)| Some(*s) == section && *k == key) {
                    Some(_) => self.set(key, value)?,
                    None => {
                        return Err(Error::Config(format!(
                            "unknown key {key:?} in section [{}]",
                            section.unwrap_or("")
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.x_steps < 2 || self.y_steps < 2 {
            return bad(format!("need at least 2 steps per axis, got {}x{}", self.x_steps, self.y_steps));
        }
        for (name, lo, hi) in [("x", self.x_min, self.x_max), ("y", self.y_min, self.y_max)] {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return bad(format!("{name} range [{lo}, {hi}] is not a finite interval"));
            }
        }
        for (name, v) in [
            ("lyapunov_tol", self.lyapunov_tol),
            ("zero_tol", self.zero_tol),
            ("reducibility_threshold", self.reducibility_threshold),
            ("mesh_tol", self.mesh_tol),
            ("period_window", self.period_window),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a positive number, got {v}"));
            }
        }
        if !(self.omega.is_finite() && self.seed_theta.is_finite() && self.seed_x.is_finite()) {
            return bad("omega and seed must be finite".into());
        }
        if self.mesh_size == 0 || self.max_period == 0 || self.lyapunov_max == 0 {
            return bad("mesh_size, max_period and lyapunov_max must be positive".into());
        }
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        if self.sna_orders.is_empty() || self.sna_orders.windows(2).any(|w| w[0] >= w[1]) || self.sna_orders[0] == 0 {
            return bad("sna orders must be positive and strictly ascending".into());
        }
        Ok(())
    }

    /// SHA-256 of the rendered computational sections. Thread budget and
    /// output location do not change results and are left out.
    pub fn hash(&self) -> String {
        let text = self.render_sections(|s| s != "run");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn x_values(&self) -> Vec<f64> {
        axis(self.x_min, self.x_max, self.x_steps)
    }

    pub fn y_values(&self) -> Vec<f64> {
        axis(self.y_min, self.y_max, self.y_steps)
    }

    pub fn diagnostics(&self) -> DiagnosticsConfig {
        DiagnosticsConfig {
            seed: OrbitState::new(self.seed_theta, self.seed_x),
            transient: self.transient,
            lyapunov_tol: self.lyapunov_tol,
            lyapunov_max: self.lyapunov_max,
            zero_tol: self.zero_tol,
            mesh_size: self.mesh_size,
            mesh_tol: self.mesh_tol,
            reducibility_threshold: self.reducibility_threshold,
            period_window: self.period_window,
            max_period: self.max_period,
            ..DiagnosticsConfig::default()
        }
    }
}

/// `steps` points from `lo` to `hi`, both ends exact.
pub fn axis(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => vec![],
        1 => vec![lo],
        _ => (0..steps)
            .map(|i| {
                if i == steps - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (steps - 1) as f64
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_round_trip() {
        let c = ScanConfig::default();
        assert_eq!(ScanConfig::parse(&c.render()).unwrap(), c);
        c.validate().unwrap();
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = ScanConfig::parse("[grid]\nx_steps = 7\n\n[map]\nkind=model\n").unwrap();
        assert_eq!(c.x_steps, 7);
        assert_eq!(c.map, MapKind::Model);
        assert_eq!(c.y_steps, ScanConfig::default().y_steps);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(ScanConfig::parse("[grid]\nx_stepz = 3\n").is_err());
        assert!(ScanConfig::parse("[nope]\nx_steps = 3\n").is_err());
        assert!(ScanConfig::parse("[grid]\nx_steps = three\n").is_err());
        assert!(ScanConfig::parse("[map]\nkind = henon\n").is_err());
    }

    #[test]
    fn validation() {
        let ok = ScanConfig::default();
        for broken in [
            ScanConfig { x_steps: 1, ..ok.clone() },
            ScanConfig { y_max: f64::NAN, ..ok.clone() },
            ScanConfig { x_min: 5.0, ..ok.clone() },
            ScanConfig { zero_tol: 0.0, ..ok.clone() },
            ScanConfig { threads: 0, ..ok.clone() },
            ScanConfig { sna_orders: vec![10, 10], ..ok.clone() },
        ] {
            assert!(broken.validate().is_err(), "{broken:?}");
        }
    }

    #[test]
    fn hash_ignores_run_section() {
        let a = ScanConfig::default();
        let b = ScanConfig { threads: 8, output: "elsewhere".into(), ..a.clone() };
        let c = ScanConfig { x_steps: 201, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn axis_ends_exact() {
        let v = axis(2.05, 2.5, 100);
        assert_eq!(v.len(), 100);
        assert_eq!((v[0], v[99]), (2.05, 2.5));
    }

    #[test]
    fn presets_are_valid() {
        for (name, _) in PRESETS {
            ScanConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(ScanConfig::preset("fig99").is_err());
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), -10.0..10.0f64]
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(
            model in any::<bool>(),
            xs in (finite(), finite(), 2usize..10_000),
            ys in (finite(), finite(), 2usize..10_000),
            seed in (finite(), finite(), any::<u64>()),
            tols in (finite(), finite(), finite(), 1u64..u64::MAX),
            orders in prop::collection::vec(1u64..1_000_000_000, 0..5),
            threads in 1usize..64,
            output in "[a-zA-Z0-9_./;#=: -]{0,24}",
        ) {
            let c = ScanConfig {
                map: if model { MapKind::Model } else { MapKind::Flm },
                x_min: xs.0, x_max: xs.1, x_steps: xs.2,
                y_min: ys.0, y_max: ys.1, y_steps: ys.2,
                seed_theta: seed.0, seed_x: seed.1, transient: seed.2,
                lyapunov_tol: tols.0, zero_tol: tols.1, mesh_tol: tols.2, lyapunov_max: tols.3,
                sna_orders: orders,
                threads,
                output: output.trim().into(),
                ..ScanConfig::default()
            };
            prop_assert_eq!(ScanConfig::parse(&c.render()).unwrap(), c);
        }
    }
}
