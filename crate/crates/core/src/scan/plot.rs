use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::write_file;
use crate::diagnostics::ClassLabel;
use crate::{Error, Result};

/// Table-1 colours: black, red, dark blue, soft blue, white.
pub fn palette() -> [(ClassLabel, &'static str); 5] {
    [
        (ClassLabel::ZeroLyapunov, "#000000"),
        (ClassLabel::Chaotic, "#ff0000"),
        (ClassLabel::NonReducibleCurve, "#00008b"),
        (ClassLabel::ReducibleCurve, "#87cefa"),
        (ClassLabel::Diverged, "#ffffff"),
    ]
}

const MODEL_PALETTE: [(&str, &str); 5] = [
    ("trivial", "#87cefa"),
    ("period_two_reducible", "#4169e1"),
    ("period_two_non_reducible", "#00008b"),
    ("other", "#ff0000"),
    ("diverged", "#ffffff"),
];

/// One plot script and the artifacts it reads. A `*` in a pattern matches
/// any run of characters; patterns must match at least one file.
#[derive(Clone, Copy, Debug)]
pub struct Figure {
    pub number: u8,
    pub title: &'static str,
    pub requires: &'static [&'static str],
}

pub const FIGURES: [Figure; 10] = [
    Figure { number: 1, title: "attractors at fixed forcing", requires: &["attractor_*.csv"] },
    Figure { number: 2, title: "Lyapunov exponent along the first grid row", requires: &["grid.csv"] },
    Figure { number: 3, title: "SNA candidates per order N", requires: &["sna.csv", "sna_candidates.csv"] },
    Figure { number: 4, title: "zero-Lyapunov curve at the end of D1", requires: &["branch_d1.csv", "branch_d1_terminal.csv"] },
    Figure { number: 5, title: "parameter space classification", requires: &["grid.csv"] },
    Figure { number: 6, title: "unions of pre-critical sets", requires: &["set_*.csv", "postcritical.csv"] },
    Figure { number: 7, title: "reducibility constraints", requires: &["constraint_*.csv"] },
    Figure { number: 8, title: "invariant curve before reducibility loss", requires: &["curve_*_terminal.csv"] },
    Figure { number: 9, title: "invariant set of reducibility", requires: &["reducibility_set.csv", "postcritical.csv", "curve_mesh.csv"] },
    Figure { number: 10, title: "model map regions", requires: &["model_regions.csv"] },
];

fn matches(pattern: &str, name: &str) -> bool {
    match pattern.split_once('*') {
        None => pattern == name,
        Some((pre, post)) => {
            name.len() >= pre.len() + post.len() && name.starts_with(pre) && name.ends_with(post)
        }
    }
}

/// Sorted file names in `dir` matching `pattern`.
fn find(dir: &Path, names: &[String], pattern: &str) -> Result<Vec<String>> {
    let found: Vec<String> = names.iter().filter(|n| matches(pattern, n)).cloned().collect();
    if found.is_empty() {
        return Err(Error::MissingArtifact(dir.join(pattern)));
    }
    Ok(found)
}

fn listing(dir: &Path) -> Result<Vec<String>> {
    if !dir.is_dir() {
        return Err(Error::MissingArtifact(dir.to_path_buf()));
    }
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    names.sort();
    Ok(names)
}

fn header(out: &mut String, fig: &Figure, size: &str) {
    let _ = writeln!(out, "# figure {}: {}", fig.number, fig.title);
    let _ = writeln!(out, "set terminal pngcairo size {size}");
    let _ = writeln!(out, "set output 'fig{:02}.png'", fig.number);
    out.push_str("set datafile separator ','\nset datafile columnheaders\nset key noautotitle\n");
}

fn rgb_function(out: &mut String, name: &str, entries: &[(&str, &str)]) {
    let _ = write!(out, "{name}(s) = ");
    for (class, colour) in entries {
        let _ = write!(out, "s eq \"{class}\" ? 0x{} : ", &colour[1..]);
    }
    out.push_str("0x808080\n");
}

fn class_rgb(out: &mut String) {
    let entries: Vec<(&str, &str)> = palette().iter().map(|(c, col)| (c.as_str(), *col)).collect();
    rgb_function(out, "class_rgb", &entries);
}

/// Code length encoded in a `set_<stem>.csv` name (`p0`, `m4`, `pmm`).
fn code_length(file: &str) -> usize {
    let stem = &file["set_".len()..file.len() - ".csv".len()];
    if stem == "p0" {
        0
    } else if let Some(n) = stem.strip_prefix('m').and_then(|r| r.parse().ok()) {
        n
    } else {
        stem.len()
    }
}

fn data_rows_in_first_block(path: &Path) -> Result<usize> {
    let text = fs::read_to_string(path)?;
    let mut rows = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap_or(""));
    let first = rows.next().unwrap_or("");
    Ok(1 + rows.take_while(|y| *y == first).count())
}

fn column_count(path: &Path) -> Result<usize> {
    let text = fs::read_to_string(path)?;
    Ok(text.lines().next().map_or(0, |l| l.split(',').count()))
}

fn script(fig: &Figure, dir: &Path, names: &[String]) -> Result<String> {
    let mut files = Vec::new();
    for pattern in fig.requires {
        files.push(find(dir, names, pattern)?);
    }
    let optional = |pattern: &str| find(dir, names, pattern).unwrap_or_default();
    let mut s = String::new();
    match fig.number {
        1 => {
            let attractors = &files[0];
            header(&mut s, fig, "1200,800");
            let cols = attractors.len().min(3);
            let rows = attractors.len().div_ceil(cols);
            let _ = writeln!(s, "set multiplot layout {rows},{cols}");
            s.push_str("set xlabel 'theta'\nset ylabel 'x'\nset xrange [0:1]\n");
            for f in attractors {
                let _ = writeln!(s, "set title '{f}' noenhanced");
                let _ = writeln!(s, "plot '{f}' using 1:2 with dots lc rgb 'black'");
            }
            s.push_str("unset multiplot\n");
        }
        2 => {
            let nx = data_rows_in_first_block(&dir.join("grid.csv"))?;
            header(&mut s, fig, "900,600");
            s.push_str("set xlabel 'alpha'\nset ylabel 'Lyapunov exponent'\nset xzeroaxis\n");
            let _ = writeln!(s, "plot 'grid.csv' every ::0::{} using 1:4 with linespoints pt 7 ps 0.4 lc rgb 'black'", nx - 1);
        }
        3 => {
            let orders = column_count(&dir.join("sna_candidates.csv"))?.saturating_sub(2);
            header(&mut s, fig, "1200,1000");
            let cols = orders.clamp(1, 2);
            let _ = writeln!(s, "set multiplot layout {},{cols}", orders.max(1).div_ceil(cols));
            s.push_str("set xlabel 'alpha'\nset ylabel 'epsilon'\n");
            s.push_str("sign_rgb(s, l) = s eq \"diverged\" ? 0xffffff : (s eq \"error\" ? 0x808080 : (l > 0 ? 0xff0000 : 0x0000ff))\n");
            for k in 0..orders {
                let _ = writeln!(s, "set title columnheader({}) noenhanced", k + 3);
                let _ = writeln!(
                    s,
                    "plot 'sna.csv' using 1:2:(sign_rgb(strcol(3), $4)) with points pt 5 ps 0.4 lc rgb variable, \\\n     'sna_candidates.csv' using 1:(${} > 0 ? $2 : 1/0) with points pt 5 ps 0.4 lc rgb 'black'",
                    k + 3
                );
            }
            s.push_str("unset multiplot\n");
        }
        4 | 8 => {
            let (branch, terminal) = if fig.number == 4 {
                ("branch_d1.csv".to_string(), "branch_d1_terminal.csv".to_string())
            } else {
                let t = files[0][0].clone();
                (t.replace("_terminal.csv", ".csv"), t)
            };
            header(&mut s, fig, "1200,900");
            s.push_str("set multiplot layout 2,2\nset xlabel 'theta'\nset xrange [0:1]\n");
            for (col, label) in [(2, "x(theta)"), (3, "x'(theta)"), (4, "x''(theta)")] {
                let _ = writeln!(s, "set ylabel \"{label}\"");
                let _ = writeln!(s, "plot '{terminal}' using 1:{col} with lines lc rgb 'black'");
            }
            s.push_str("set autoscale x\nset xlabel 'epsilon'\nset ylabel 'sup norm'\nset logscale y\n");
            if names.contains(&branch) {
                let _ = writeln!(
                    s,
                    "plot '{branch}' using 2:5 with lines lc rgb 'black' dt 1, '{branch}' using 2:6 with lines lc rgb 'black' dt 2"
                );
            } else {
                s.push_str("plot 1/0\n");
            }
            s.push_str("unset multiplot\n");
        }
        5 => {
            header(&mut s, fig, "1100,900");
            class_rgb(&mut s);
            s.push_str("set xlabel 'alpha'\nset ylabel 'epsilon'\n");
            let _ = write!(s, "plot 'grid.csv' using 1:2:(class_rgb(strcol(3))) with points pt 5 ps 0.4 lc rgb variable");
            for b in optional("branch_d*.csv") {
                if !b.ends_with("_terminal.csv") {
                    let _ = write!(s, ", \\\n     '{b}' using 1:2 with lines lw 2 lc rgb '#00a000'");
                }
            }
            s.push('\n');
        }
        6 => {
            let sets = &files[0];
            header(&mut s, fig, "1100,900");
            s.push_str("set multiplot layout 2,2\nset xlabel 'theta'\nset ylabel 'x'\nset xrange [0:1]\n");
            for k in 1..=4 {
                let members: Vec<&String> = sets.iter().filter(|f| code_length(f) <= k).collect();
                let _ = writeln!(s, "set title 'codes of length <= {k}'");
                let _ = write!(s, "plot 'postcritical.csv' using 1:2 with lines dt 2 lc rgb 'black'");
                for f in members {
                    let _ = write!(s, ", \\\n     '{f}' using 1:2 with dots lc rgb 'black'");
                }
                s.push('\n');
            }
            s.push_str("unset multiplot\n");
        }
        7 => {
            header(&mut s, fig, "1000,800");
            s.push_str("set xlabel 'alpha'\nset ylabel 'epsilon'\n");
            let mut layers = Vec::new();
            if names.iter().any(|n| n == "grid.csv") {
                class_rgb(&mut s);
                layers.push("'grid.csv' using 1:2:(class_rgb(strcol(3))) with points pt 5 ps 0.3 lc rgb variable".to_string());
            }
            for (i, c) in files[0].iter().enumerate() {
                layers.push(format!("'{c}' using 1:2 with lines lw 2 dt {} title '{c}' noenhanced", 1 + i % 5));
            }
            s.push_str("set key top left\n");
            let _ = writeln!(s, "plot {}", layers.join(", \\\n     "));
        }
        9 => {
            header(&mut s, fig, "1000,800");
            s.push_str("set xlabel 'theta'\nset ylabel 'x'\nset xrange [0:1]\n");
            let mut layers = vec![
                "'reducibility_set.csv' using 1:2:3 with filledcurves lc rgb '#dddddd'".to_string(),
            ];
            for f in optional("set_*.csv") {
                layers.push(format!("'{f}' using 1:2 with dots lc rgb 'black'"));
            }
            layers.push("'postcritical.csv' using 1:2 with lines dt 2 lc rgb 'black'".into());
            layers.push("'curve_mesh.csv' using 1:2 with lines dt 3 lw 2 lc rgb '#0000c0'".into());
            let _ = writeln!(s, "plot {}", layers.join(", \\\n     "));
        }
        10 => {
            header(&mut s, fig, "1000,800");
            rgb_function(&mut s, "model_rgb", &MODEL_PALETTE);
            s.push_str("set xlabel 'mu'\nset ylabel 'lambda'\n");
            let _ = write!(s, "plot 'model_regions.csv' using 1:2:(model_rgb(strcol(3))) with points pt 5 ps 0.4 lc rgb variable");
            if names.iter().any(|n| n == "model_boundary.csv") {
                s.push_str(
                    ", \\\n     'model_boundary.csv' using 2:1 with lines lc rgb 'black' dt 1, \\\n     'model_boundary.csv' using 3:1 with lines lc rgb 'black' dt 2",
                );
            }
            s.push('\n');
        }
        _ => unreachable!("figure numbers are 1..=10"),
    }
    Ok(s)
}

/// Write `figNN.gp` gnuplot scripts into `dir` for the requested figures,
/// reading artifacts from the same directory by relative path. With no
/// figures requested, every figure whose artifacts are present is written;
/// an explicitly requested figure with missing artifacts is an error.
pub fn emit_plots(dir: &Path, figures: &[u8]) -> Result<Vec<PathBuf>> {
    let names = listing(dir)?;
    let selected: Vec<&Figure> = if figures.is_empty() {
        FIGURES.iter().collect()
    } else {
        figures
            .iter()
            .map(|&n| {
                FIGURES
                    .iter()
                    .find(|f| f.number == n)
                    .ok_or_else(|| Error::Config(format!("no figure {n} (expected 1..=10)")))
            })
            .collect::<Result<_>>()?
    };
    let mut written = Vec::new();
    let mut first_missing = None;
    for fig in selected {
        match script(fig, dir, &names) {
            Ok(text) => {
                let path = dir.join(format!("fig{:02}.gp", fig.number));
                written.push(write_file(&path, |w| w.write_all(text.as_bytes()))?);
            }
            Err(e @ Error::MissingArtifact(_)) => {
                if !figures.is_empty() {
                    return Err(e);
                }
                first_missing.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    match (written.is_empty(), first_missing) {
        (true, Some(e)) => Err(e),
        _ => Ok(written),
    }
}
