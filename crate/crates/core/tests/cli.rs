use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qpmap_core::scan::{Manifest, ScanConfig};

fn qpmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpmap")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: [&str; 12] = [
    "--alpha-min", "2.4", "--alpha-max", "3.5", "--alpha-steps", "4", "--epsilon-min", "0", "--epsilon-max", "0.05",
    "--epsilon-steps", "3",
];

#[test]
fn scan_writes_grid_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan");
    let mut args = vec!["scan", "-o", path(&out)];
    args.extend(SMALL);
    let o = qpmap(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let grid = fs::read_to_string(out.join("grid.csv")).unwrap();
    let mut lines = grid.lines();
    assert_eq!(lines.next(), Some("alpha,epsilon,class,lyapunov,period,min_abs_dxf"));
    assert_eq!(lines.count(), 12);

    let m = Manifest::parse(&fs::read_to_string(out.join("manifest.txt")).unwrap());
    let cfg = ScanConfig {
        x_min: 2.4,
        x_max: 3.5,
        x_steps: 4,
        y_min: 0.0,
        y_max: 0.05,
        y_steps: 3,
        ..ScanConfig::default()
    };
    assert_eq!(m.get("config_sha256"), Some(cfg.hash().as_str()));
    assert_eq!(m.get("errored_cells"), Some("0"));
}

#[test]
fn config_file_and_flags_agree() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let cfg = ScanConfig {
        x_min: 2.4,
        x_max: 3.5,
        x_steps: 4,
        y_min: 0.0,
        y_max: 0.05,
        y_steps: 3,
        output: b.clone(),
        ..ScanConfig::default()
    };
    let file = dir.path().join("scan.ini");
    fs::write(&file, cfg.render()).unwrap();
    assert_eq!(ScanConfig::parse(&fs::read_to_string(&file).unwrap()).unwrap(), cfg);

    let mut args = vec!["scan", "-o", path(&a)];
    args.extend(SMALL);
    assert_eq!(code(&qpmap(&args)), 0);
    assert_eq!(code(&qpmap(&["scan", "--config", path(&file)])), 0);
    assert_eq!(
        fs::read(a.join("grid.csv")).unwrap(),
        fs::read(b.join("grid.csv")).unwrap()
    );
    // flags override the file
    let c = dir.path().join("c");
    assert_eq!(code(&qpmap(&["scan", "--config", path(&file), "-o", path(&c), "--x-steps", "2"])), 0);
    assert_eq!(fs::read_to_string(c.join("grid.csv")).unwrap().lines().count(), 1 + 2 * 3);
}

#[test]
fn thread_budget_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for t in ["1", "3"] {
        let out = dir.path().join(t);
        let mut args = vec!["scan", "--threads", t, "-o", path(&out)];
        args.extend(SMALL);
        assert_eq!(code(&qpmap(&args)), 0);
        outputs.push((fs::read(out.join("grid.csv")).unwrap(), fs::read(out.join("manifest.txt")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = path(dir.path());
    for args in [
        vec!["scan", "-o", o, "--x-steps", "1"],
        vec!["scan", "-o", o, "--preset", "nowhere"],
        vec!["scan", "-o", o, "--lyapunov-tol", "-1"],
        vec!["scan", "-o", o, "--orders", "100,10"],
        vec!["scan", "-o", o, "--no-such-flag"],
        vec!["scan", "-o", o, "--threads", "0"],
        vec!["sna-map", "-o", o, "--map", "henon"],
        vec!["branch", "--kind", "period_doubling_0", "-o", o],
        vec!["constraints", "--alphas", "1:3:4", "-o", o],
        vec!["scan", "--config", "/nonexistent/file.ini"],
    ] {
        let out = qpmap(&args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let bad = dir.path().join("bad.ini");
    fs::write(&bad, "[grid]\nx_steps = 3\nwidth = 4\n").unwrap();
    assert_eq!(code(&qpmap(&["scan", "--config", path(&bad)])), 2);
}

#[test]
fn error_budget_exceeded_exits_with_3() {
    // an axis spanning the whole double range leaves non-finite interior cells
    let dir = tempfile::tempdir().unwrap();
    let o = qpmap(&[
        "scan", "-o", path(dir.path()), "--x-min=-1e308", "--x-max", "1e308", "--x-steps", "3", "--y-steps", "2",
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let grid = fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    assert!(grid.lines().any(|l| l.contains(",error,")));
}

#[test]
fn attractor_dumps_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let mut args = vec!["scan", "-o", path(out), "--attractor", "2.4:0.01", "--attractor-points", "100"];
    args.extend(SMALL);
    assert_eq!(code(&qpmap(&args)), 0);
    let dump = fs::read_to_string(out.join("attractor_2.4_0.01.csv")).unwrap();
    assert_eq!(dump.lines().count(), 101);

    let o = qpmap(&["plot", "--dir", path(out)]);
    assert_eq!(code(&o), 0);
    let listed = String::from_utf8(o.stdout).unwrap();
    for fig in ["fig01.gp", "fig02.gp", "fig05.gp"] {
        assert!(listed.contains(fig), "{listed}");
    }
    // figure 4 needs a branch run
    assert_eq!(code(&qpmap(&["plot", "--dir", path(out), "--figure", "4"])), 1);
    assert_eq!(code(&qpmap(&["plot", "--dir", path(out), "--figure", "11"])), 2);
}

#[test]
fn sna_model_constraints_and_branch_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sna = d.join("sna");
    let o = qpmap(&[
        "sna-map", "-o", path(&sna), "--x-min", "3.3", "--x-max", "3.4", "--x-steps", "2", "--y-steps", "2",
        "--y-max", "0.1", "--orders", "1000,2000",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mask = fs::read_to_string(sna.join("sna_candidates.csv")).unwrap();
    assert!(mask.lines().next().unwrap().ends_with("candidate_1000,candidate_2000"), "{mask}");

    let model = d.join("model");
    let o = qpmap(&["model", "-o", path(&model), "--mu-steps", "3", "--lambda-steps", "3", "--boundaries"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(model.join("model_regions.csv")).unwrap().lines().count(), 10);
    assert!(model.join("model_boundary.csv").exists());

    let cons = d.join("cons");
    let o = qpmap(&["constraints", "-o", path(&cons), "--alphas", "2.2:3.0:3", "--k", "1", "--set-at", "2.75:0.12"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = Manifest::parse(&fs::read_to_string(cons.join("manifest.txt")).unwrap());
    assert_eq!(m.get("set.m1.crossings"), Some("2"));
    assert_eq!(m.get("reducibility_set.exists"), Some("false"));

    let o = qpmap(&["branch", "--kind", "model_boundary", "-o", path(&cons), "--samples=-2:2:5"]);
    assert_eq!(code(&o), 0);
    let b = fs::read_to_string(cons.join("model_boundary.csv")).unwrap();
    assert_eq!(b.lines().nth(1), Some("-2,2,2"));

    let o = qpmap(&["plot", "--dir", path(&cons), "--figure", "6,7"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}
