use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};

use qpmap_core::scan::{
    self, axis, codes_up_to, dump_attractor, emit_plots, run_branch, run_constraints, run_model, write_file,
    BranchKind, BranchOptions, ConstraintOptions, MapKind, ModelOptions, ScanConfig,
};
use qpmap_core::{Error, FlmParams, MapFamily, ModelParams, OrbitState, Result};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;

/// Alternative flag names for the two axes of each map.
const AXIS_ALIASES: [(&str, [&str; 2]); 6] = [
    ("x_min", ["alpha-min", "mu-min"]),
    ("x_max", ["alpha-max", "mu-max"]),
    ("x_steps", ["alpha-steps", "mu-steps"]),
    ("y_min", ["epsilon-min", "lambda-min"]),
    ("y_max", ["epsilon-max", "lambda-max"]),
    ("y_steps", ["epsilon-steps", "lambda-steps"]),
];

/// The map kind is spelled `--map`.
fn arg_id(key: &'static str) -> &'static str {
    if key == "kind" {
        "map"
    } else {
        key
    }
}

fn flag(key: &str) -> String {
    key.replace('_', "-")
}

/// `--config`, `--preset` and one flag per config field.
fn config_args(cmd: Command) -> Command {
    let mut cmd = cmd
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .value_parser(value_parser!(PathBuf))
                .help("Sectioned key = value file; flags override it"),
        )
        .arg(
            Arg::new("preset")
                .long("preset")
                .value_name("NAME")
                .help("Start from a named window (fig3, fig5, fig5-zoom, fig5-zoom2, first-bound, fig10)"),
        );
    // `--threads` is added per command with a typed parser
    for &(section, key) in ScanConfig::fields() {
        if key == "threads" {
            continue;
        }
        let id = arg_id(key);
        let mut arg = Arg::new(id)
            .long(flag(id))
            .value_name("VALUE")
            .help(format!("[{section}] {key}"));
        if let Some((_, names)) = AXIS_ALIASES.iter().find(|(k, _)| *k == key) {
            arg = arg.visible_aliases(names.to_vec());
        }
        if key == "orders" {
            arg = arg.help("[sna] orders, comma separated and ascending");
        }
        if key == "output" {
            arg = arg.short('o');
        }
        cmd = cmd.arg(arg);
    }
    cmd
}

/// Defaults (or `fallback` preset), then `--preset`, then the config file,
/// then flags.
fn load_config(m: &ArgMatches, fallback: Option<&str>) -> Result<ScanConfig> {
    let mut cfg = match m.get_one::<String>("preset").map(String::as_str).or(fallback) {
        Some(name) => ScanConfig::preset(name)?,
        None => ScanConfig::default(),
    };
    if let Some(path) = m.get_one::<PathBuf>("config") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply(&text)?;
    }
    for &(_, key) in ScanConfig::fields().iter().filter(|(_, k)| *k != "threads") {
        if let Some(v) = m.get_one::<String>(arg_id(key)) {
            cfg.set(key, v)?;
        }
    }
    if let Some(&t) = m.get_one::<usize>("threads") {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::Config(format!("expected <a>:<b>, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn cli() -> Command {
    let threads = || {
        Arg::new("threads")
            .long("threads")
            .value_name("N")
            .value_parser(value_parser!(usize))
            .help("Worker threads")
    };
    let output = || {
        Arg::new("output")
            .long("output")
            .short('o')
            .value_name("DIR")
            .value_parser(value_parser!(PathBuf))
            .help("Output directory")
    };
    let scan = config_args(Command::new("scan").about("Classify every cell of a parameter grid"))
        .arg(
            Arg::new("attractor")
                .long("attractor")
                .value_name("X:Y")
                .action(ArgAction::Append)
                .help("Also dump the attractor at this parameter point (repeatable)"),
        )
        .arg(
            Arg::new("attractor-points")
                .long("attractor-points")
                .value_name("N")
                .default_value("5000")
                .value_parser(value_parser!(usize)),
        );
    let sna = config_args(Command::new("sna-map").about("Phase-sensitivity SNA candidates at each order"));
    let model = config_args(Command::new("model").about("Period-two reducibility regions of the model map")).arg(
        Arg::new("boundaries")
            .long("boundaries")
            .action(ArgAction::SetTrue)
            .help("Also write the stability parabola and reducibility lines"),
    );
    let branch = Command::new("branch")
        .about("Continue a bifurcation or constraint curve")
        .arg(
            Arg::new("kind")
                .long("kind")
                .required(true)
                .value_name("KIND")
                .help("period_doubling_<i>, tangency_constraint_<k>, model_boundary or invariant_curve"),
        )
        .arg(output())
        .arg(threads())
        .arg(Arg::new("alpha").long("alpha").value_parser(value_parser!(f64)).help("Fixed alpha of an invariant curve"))
        .arg(Arg::new("period").long("period").value_parser(value_parser!(usize)))
        .arg(Arg::new("x0").long("x0").value_parser(value_parser!(f64)).help("Starting fiber value"))
        .arg(Arg::new("epsilon-limit").long("epsilon-limit").value_parser(value_parser!(f64)))
        .arg(
            Arg::new("samples")
                .long("samples")
                .value_name("LO:HI:N")
                .help("Free-parameter samples for tangency and model boundary curves"),
        )
        .arg(Arg::new("coarse").long("coarse").value_parser(value_parser!(usize)))
        .arg(Arg::new("initial-step").long("initial-step").value_parser(value_parser!(f64)))
        .arg(Arg::new("max-step").long("max-step").value_parser(value_parser!(f64)))
        .arg(Arg::new("max-order").long("max-order").value_parser(value_parser!(usize)))
        .arg(Arg::new("tail-tol").long("tail-tol").value_parser(value_parser!(f64)))
        .arg(Arg::new("max-points").long("max-points").value_parser(value_parser!(usize)))
        .arg(
            Arg::new("reverse")
                .long("reverse")
                .action(ArgAction::SetTrue)
                .help("Take the first step towards decreasing parameter"),
        );
    let constraints = Command::new("constraints")
        .about("Reducibility constraint curves and pre-critical sets")
        .arg(output())
        .arg(threads())
        .arg(Arg::new("alphas").long("alphas").value_name("LO:HI:N"))
        .arg(
            Arg::new("k")
                .long("k")
                .value_delimiter(',')
                .value_parser(value_parser!(usize))
                .help("Tangency orders, comma separated"),
        )
        .arg(Arg::new("coarse").long("coarse").value_parser(value_parser!(usize)))
        .arg(
            Arg::new("set-at")
                .long("set-at")
                .value_name("ALPHA:EPSILON")
                .help("Dump pre-critical sets and the reducibility band here"),
        )
        .arg(
            Arg::new("code-length")
                .long("code-length")
                .value_parser(value_parser!(usize))
                .help("Dump every code up to this length"),
        )
        .arg(Arg::new("k-max").long("k-max").value_parser(value_parser!(usize)))
        .arg(Arg::new("resolution").long("resolution").value_parser(value_parser!(usize)));
    let plot = Command::new("plot")
        .about("Write gnuplot scripts for the artifacts in a directory")
        .arg(
            Arg::new("dir")
                .long("dir")
                .value_name("DIR")
                .default_value("out")
                .value_parser(value_parser!(PathBuf)),
        )
        .arg(
            Arg::new("figure")
                .long("figure")
                .value_delimiter(',')
                .value_parser(value_parser!(u8).range(1..=10))
                .help("Figures to write (default: all with available artifacts)"),
        );
    Command::new("qpmap")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Parameter scans and continuation for quasi-periodically forced maps")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(scan.arg(threads()))
        .subcommand(sna.arg(threads()))
        .subcommand(branch)
        .subcommand(constraints)
        .subcommand(model.arg(threads()))
        .subcommand(plot)
}

fn samples(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("expected <lo>:<hi>:<n>, got {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else { return Err(bad()) };
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    let n: usize = n.parse().map_err(|_| bad())?;
    if n < 2 || !(lo < hi) {
        return Err(bad());
    }
    Ok(axis(lo, hi, n))
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("{}", f.display());
    }
}

fn budget_check(errored: usize, total: usize) -> u8 {
    if (errored as f64) > scan::ERROR_BUDGET * total as f64 {
        eprintln!("{errored} of {total} cells errored, above the {}% budget", scan::ERROR_BUDGET * 100.0);
        EXIT_BUDGET
    } else {
        0
    }
}

fn attractor_file(cfg: &ScanConfig, (x, y): (f64, f64), points: usize) -> Result<PathBuf> {
    fn dump<M: MapFamily>(path: &Path, map: &M, cfg: &ScanConfig, points: usize) -> Result<PathBuf> {
        let seed = OrbitState::new(cfg.seed_theta, cfg.seed_x);
        // run first so a diverging orbit leaves no file behind
        let mut buf = Vec::new();
        dump_attractor(&mut buf, map, seed, cfg.transient, points)?;
        write_file(path, |w| w.write_all(&buf))
    }
    let path = cfg.output.join(format!("attractor_{x}_{y}.csv"));
    match cfg.map {
        MapKind::Flm => dump(&path, &FlmParams::new(x, y).with_omega(cfg.omega), cfg, points),
        MapKind::Model => dump(&path, &ModelParams::new(x, y).with_omega(cfg.omega), cfg, points),
    }
}

fn run(m: &ArgMatches) -> Result<u8> {
    match m.subcommand() {
        Some(("scan", m)) => {
            let cfg = load_config(m, None)?;
            let pairs: Vec<(f64, f64)> = m
                .get_many::<String>("attractor")
                .into_iter()
                .flatten()
                .map(|s| parse_pair(s))
                .collect::<Result<_>>()?;
            let grid = scan::run_scan(&cfg)?;
            let mut files = scan::write_scan(&grid)?;
            let points = *m.get_one::<usize>("attractor-points").expect("has default");
            for p in pairs {
                files.push(attractor_file(&cfg, p, points)?);
            }
            report(&files);
            Ok(budget_check(grid.errored(), grid.cells.len()))
        }
        Some(("sna-map", m)) => {
            let cfg = load_config(m, None)?;
            let map = scan::run_sna_map(&cfg, &cfg.sna_orders)?;
            for (n, c) in map.orders.iter().zip(map.counts()) {
                eprintln!("N = {n}: {c} candidates");
            }
            report(&scan::write_sna(&map)?);
            Ok(budget_check(map.grid.errored(), map.grid.cells.len()))
        }
        Some(("model", m)) => {
            let mut cfg = load_config(m, Some("fig10"))?;
            cfg.map = MapKind::Model;
            let summary = run_model(&ModelOptions {
                config: cfg,
                boundaries: m.get_flag("boundaries"),
            })?;
            report(&summary.files);
            Ok(0)
        }
        Some(("branch", m)) => {
            let mut opts = BranchOptions {
                kind: m.get_one::<String>("kind").expect("required").parse()?,
                ..BranchOptions::default()
            };
            if let Some(p) = m.get_one::<PathBuf>("output") {
                opts.output = p.clone();
            }
            if let Some(&t) = m.get_one::<usize>("threads") {
                opts.threads = t;
            }
            if let Some(&a) = m.get_one::<f64>("alpha") {
                opts.alpha = a;
            }
            if let Some(&p) = m.get_one::<usize>("period") {
                opts.period = p;
            }
            opts.x0 = m.get_one::<f64>("x0").copied();
            if let Some(&e) = m.get_one::<f64>("epsilon-limit") {
                opts.epsilon_limit = e;
            }
            if let Some(s) = m.get_one::<String>("samples") {
                opts.samples = samples(s)?;
            } else if opts.kind == BranchKind::ModelBoundary {
                opts.samples = axis(-3.0, 3.0, 121);
            }
            if let Some(&c) = m.get_one::<usize>("coarse") {
                opts.coarse = c;
            }
            let c = &mut opts.control;
            if let Some(&v) = m.get_one::<f64>("initial-step") {
                c.initial_step = v;
            }
            if let Some(&v) = m.get_one::<f64>("max-step") {
                c.max_step = v;
            }
            if let Some(&v) = m.get_one::<usize>("max-order") {
                c.max_order = v;
            }
            if let Some(&v) = m.get_one::<f64>("tail-tol") {
                c.tail_tol = v;
            }
            if let Some(&v) = m.get_one::<usize>("max-points") {
                c.max_points = v;
            }
            if m.get_flag("reverse") {
                c.direction = -1.0;
            }
            if !(c.initial_step > 0.0 && c.max_step >= c.initial_step && c.tail_tol > 0.0) || opts.threads == 0 {
                return Err(Error::Config("step sizes, tail tolerance and threads must be positive".into()));
            }
            let summary = run_branch(&opts)?;
            for (k, v) in &summary.manifest.entries {
                if k.ends_with("terminal_reason") || k.ends_with("terminus") {
                    eprintln!("{k} = {v}");
                }
            }
            report(&summary.files);
            Ok(0)
        }
        Some(("constraints", m)) => {
            let mut opts = ConstraintOptions::default();
            if let Some(p) = m.get_one::<PathBuf>("output") {
                opts.output = p.clone();
            }
            if let Some(&t) = m.get_one::<usize>("threads") {
                opts.threads = t;
            }
            if let Some(s) = m.get_one::<String>("alphas") {
                opts.alphas = samples(s)?;
                if opts.alphas[0] <= 2.0 {
                    return Err(Error::Config("alphas must exceed 2".into()));
                }
            }
            if let Some(ks) = m.get_many::<usize>("k") {
                opts.ks = ks.copied().collect();
                if opts.ks.contains(&0) {
                    return Err(Error::Config("tangency orders start at 1".into()));
                }
            }
            if let Some(&c) = m.get_one::<usize>("coarse") {
                opts.coarse = c;
            }
            if let Some(s) = m.get_one::<String>("set-at") {
                opts.set_at = Some(parse_pair(s)?);
            }
            if let Some(&n) = m.get_one::<usize>("code-length") {
                opts.codes = codes_up_to(n);
            }
            if let Some(&k) = m.get_one::<usize>("k-max") {
                opts.k_max = k;
            }
            if let Some(&r) = m.get_one::<usize>("resolution") {
                opts.resolution = r;
            }
            if opts.threads == 0 || opts.coarse < 2 || opts.resolution < 2 {
                return Err(Error::Config("threads, coarse and resolution must be positive".into()));
            }
            let summary = run_constraints(&opts)?;
            report(&summary.files);
            Ok(0)
        }
        Some(("plot", m)) => {
            let dir = m.get_one::<PathBuf>("dir").expect("has default");
            let figures: Vec<u8> = m.get_many::<u8>("figure").into_iter().flatten().copied().collect();
            report(&emit_plots(dir, &figures)?);
            Ok(0)
        }
        _ => unreachable!("subcommand is required"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = cli().get_matches();
    match run(&matches) {
        Ok(code) => ExitCode::from(code),
        Err(e @ Error::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
