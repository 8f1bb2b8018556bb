//! Report directory layout:
//!
//! * `config.toml`: the study configuration as loaded;
//! * `eps_<k>.csv`: `t, x, rho_eps, rho_limit` per level at the checkpoints
//!   (`k` is the ladder index, the level is a suffix);
//! * `errors.csv`: `eps, level, t, l1, l2` (level 0 = grid, 1 = particles);
//! * `summary.txt`: the human-readable table;
//! * `manifest.json`: the report, file checksums and the report checksum.
//!
//! Wall-clock times appear only in the manifest's `timing` block and are
//! excluded from every checksum.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::StudyConfig;
use crate::error::{AppError, Result};
use crate::harness::{hex_digest, ConvergenceReport, Level};
use crate::io::{write_bytes, write_csv, write_json};

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    generator: &'static str,
    config: &'a StudyConfig,
    report: &'a ConvergenceReport,
    /// SHA-256 of every data file, by file name.
    files: BTreeMap<String, String>,
    report_checksum: String,
}

fn level_code(l: Level) -> f64 {
    match l {
        Level::Grid => 0.0,
        Level::Particles => 1.0,
    }
}

fn level_name(l: Level) -> &'static str {
    match l {
        Level::Grid => "grid",
        Level::Particles => "particles",
    }
}

pub fn summary_table(report: &ConvergenceReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "alpha = {}  field = {}  solver = {:?}", report.alpha, report.field, report.solver);
    let _ = writeln!(
        s,
        "{:>10} {:>10} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "level", "eps", "L1(T)", "L2(T)", "weak", "rate", "mass_drift"
    );
    for r in &report.runs {
        let last = r.errors.last();
        let _ = writeln!(
            s,
            "{:>10} {:>10} {:>12.4e} {:>12.4e} {:>12.4e} {:>12} {:>12.2e}",
            level_name(r.level),
            r.eps,
            last.map(|e| e.l1).unwrap_or(f64::NAN),
            last.map(|e| e.l2).unwrap_or(f64::NAN),
            r.weak_residual,
            r.gronwall.map(|g| format!("{:.4e}", g.rate)).unwrap_or_else(|| "-".into()),
            r.mass_drift
        );
    }
    for sm in &report.summaries {
        let _ = writeln!(
            s,
            "{}: order {}  L1 decreasing {}  ratio {:.4}  weak decreasing {}",
            level_name(sm.level),
            sm.fitted_order.map(|o| format!("{o:.3}")).unwrap_or_else(|| "-".into()),
            sm.l1_decreasing,
            sm.l1_ratio,
            sm.weak_decreasing
        );
    }
    for o in &report.oracle {
        let _ = writeln!(s, "grid vs particles at eps = {}: L1 = {:.4e}", o.eps, o.l1);
    }
    if let Some(rc) = &report.recentring {
        for p in &rc.probes {
            let _ = writeln!(
                s,
                "recentring x = {:.4}: median {:.4} expected {:.4} tol {:.4} {}",
                p.x,
                p.median,
                p.expected,
                p.tolerance,
                if p.pass { "ok" } else { "off" }
            );
        }
    }
    s
}

/// Writes the report directory and returns the manifest path.
pub fn emit_report(report: &ConvergenceReport, cfg: &StudyConfig, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let mut files = BTreeMap::new();
    let mut record = |name: String| -> Result<()> {
        let p = dir.join(&name);
        let bytes = std::fs::read(&p).map_err(|e| AppError::io(&p, e))?;
        files.insert(name, hex_digest(&bytes));
        Ok(())
    };

    write_bytes(&dir.join("config.toml"), cfg.to_toml().as_bytes())?;
    record("config.toml".into())?;

    for r in &report.runs {
        let k = report.eps_list.iter().position(|e| *e == r.eps).unwrap_or(0);
        let name = format!("eps_{k}_{}.csv", level_name(r.level));
        let mut rows = Vec::new();
        for (c, t) in report.checkpoints.iter().enumerate() {
            for (i, x) in report.x_nodes.iter().enumerate() {
                rows.push([*t, *x, r.profiles[c][i], report.limit_profiles[c][i]]);
            }
        }
        write_csv(&dir.join(&name), &["t", "x", "rho_eps", "rho_limit"], &rows)?;
        record(name)?;
    }

    let rows: Vec<[f64; 5]> = report
        .runs
        .iter()
        .flat_map(|r| r.errors.iter().map(move |e| [r.eps, level_code(r.level), e.t, e.l1, e.l2]))
        .collect();
    write_csv(&dir.join("errors.csv"), &["eps", "level", "t", "l1", "l2"], &rows)?;
    record("errors.csv".into())?;

    write_bytes(&dir.join("summary.txt"), summary_table(report).as_bytes())?;

    let manifest = Manifest {
        schema_version: crate::config::SCHEMA_VERSION,
        generator: concat!("levyfp ", env!("CARGO_PKG_VERSION")),
        config: cfg,
        report,
        files,
        report_checksum: report.checksum(),
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}
