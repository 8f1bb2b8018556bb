use std::collections::BTreeMap;

use levyfp::config::{SolverKind, StudyConfig};
use levyfp::harness::Level;
use levyfp::report::emit_report;
use levyfp::{run_critical_alpha1, run_limit_study, AppError, ExitKind};

fn small(alpha: f64, solver: SolverKind) -> StudyConfig {
    let mut cfg = StudyConfig::with_alpha(alpha);
    cfg.eps_list = vec![0.5, 0.25];
    cfg.solver = solver;
    cfg.t_final = 0.4;
    cfg.grid.nx = 16;
    cfg.grid.dt_max = 0.02;
    cfg.grid.record_stride = 5;
    cfg.particles.count = 20_000;
    cfg.particles.dt = 0.02;
    cfg.macroscopic.dt = 0.005;
    cfg.diagnostics.test_window = [0.05, 0.35];
    cfg
}

fn data_files(dir: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg = small(1.5, SolverKind::Both);
    let a = run_limit_study(&cfg, Some(1)).unwrap();
    let b = run_limit_study(&cfg, Some(3)).unwrap();
    assert_eq!(a.checksum(), b.checksum());
    assert_eq!(a.runs, b.runs);
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_report(&a, &cfg, da.path()).unwrap();
    emit_report(&b, &cfg, db.path()).unwrap();
    assert_eq!(data_files(da.path()), data_files(db.path()));
}

#[test]
fn seed_changes_particle_results_only() {
    let cfg = small(1.5, SolverKind::Both);
    let mut other = cfg.clone();
    other.seed += 1;
    let a = run_limit_study(&cfg, None).unwrap();
    let b = run_limit_study(&other, None).unwrap();
    assert_ne!(a.checksum(), b.checksum());
    let grid = |r: &levyfp::ConvergenceReport| r.runs_for(Level::Grid).cloned().collect::<Vec<_>>();
    assert_eq!(grid(&a), grid(&b));
}

#[test]
fn report_covers_every_eps_and_checkpoint() {
    let cfg = small(2.0, SolverKind::Both);
    let r = run_limit_study(&cfg, None).unwrap();
    assert_eq!(r.runs.len(), 4);
    for run in &r.runs {
        assert_eq!(run.errors.len(), 3);
        assert!(run.errors.iter().all(|e| e.l1 >= 0.0 && e.l2 >= 0.0));
        assert!(run.mass_drift < 1e-10);
    }
    let g = r.runs_for(Level::Grid).next().unwrap();
    assert!(g.gronwall.is_some() && g.transported_residual.is_some() && g.residue_integral.is_some());
    assert!(g.min_ratio.unwrap() >= -1e-8);
    let p = r.runs_for(Level::Particles).next().unwrap();
    assert_eq!(p.particle_count, Some([20_000, 20_000]));
    assert_eq!(r.oracle.len(), 2);
    assert!(r.summary(Level::Grid).unwrap().fitted_order.is_some());
}

#[test]
fn report_directory_layout() {
    let cfg = small(1.5, SolverKind::Grid);
    let r = run_limit_study(&cfg, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = emit_report(&r, &cfg, dir.path()).unwrap();
    let files = data_files(dir.path());
    for name in ["config.toml", "errors.csv", "summary.txt", "eps_0_grid.csv", "eps_1_grid.csv"] {
        assert!(files.contains_key(name), "{name}");
    }
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
    assert_eq!(m["report_checksum"], r.checksum());
    assert_eq!(m["files"].as_object().unwrap().len(), 4);
    let saved = StudyConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(saved, cfg);
    let (header, rows) = levyfp::io::read_csv(&dir.path().join("eps_0_grid.csv")).unwrap();
    assert_eq!(header, ["t", "x", "rho_eps", "rho_limit"]);
    assert_eq!(rows.len(), 3 * 16);
}

#[test]
fn solver_errors_carry_the_eps() {
    let mut cfg = small(1.0, SolverKind::Grid);
    cfg.grid.dt_max = 0.05;
    let e = run_limit_study(&cfg, None).unwrap_err();
    assert!(matches!(e, AppError::AtEps { eps, .. } if eps == 0.5), "{e}");
    assert_eq!(e.exit_kind(), ExitKind::NumericalGuard);
}

#[test]
fn critical_study_needs_alpha_one() {
    let e = run_critical_alpha1(&small(1.5, SolverKind::Particles), None).unwrap_err();
    assert_eq!(e.exit_kind(), ExitKind::Validation);
}

#[test]
fn critical_study_reports_probes() {
    let mut cfg = small(1.0, SolverKind::Particles);
    cfg.particles.count = 200_000;
    cfg.diagnostics.window = 0.2;
    let r = run_critical_alpha1(&cfg, None).unwrap();
    let rc = r.recentring.unwrap();
    assert_eq!(rc.eps, 0.25);
    assert_eq!(rc.probes.len(), 3);
    for p in &rc.probes {
        assert!(p.count > 1000 && p.tolerance > 0.0 && p.median.is_finite());
    }
}
