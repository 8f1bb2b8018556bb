//! ε-sweep convergence studies.
//!
//! For every ε of the ladder the configured kinetic solver(s) run from
//! `ρ0(x) G_α(v - shift)`; their densities are compared against one
//! macroscopic reference run. ε levels are independent jobs on a rayon pool
//! and the report is assembled afterwards in ladder order.

use std::time::Instant;

use levyfp_core::entropy::{gronwall_certificate, time_integrated_residue, GronwallCertificate};
use levyfp_core::kinetic::{local_equilibria, solve, weak_residual, weak_residual_density, BumpCosine, SolveOptions};
use levyfp_core::macroscopic::{solve_macro, DensityTrajectory};
use levyfp_core::math::linear_fit;
use levyfp_core::particles::{velocity_marginal_at, VelocitySummary};
use levyfp_core::stable::{drift_shift, equilibrium_density, shifted_table};
use levyfp_core::{DensityField, Error as CoreError, ForceField, KineticField, ParticleEnsemble, SplitScheme};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{SolverKind, StudyConfig};
use crate::error::{AppError, Result};
use crate::mc::{run_particles, ParticleSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Grid,
    Particles,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckpointError {
    pub t: f64,
    pub l1: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelResult {
    pub eps: f64,
    pub level: Level,
    pub dt: f64,
    pub errors: Vec<CheckpointError>,
    /// Limit weak-form residual of `ρ_ε` against the bump test function.
    pub weak_residual: f64,
    /// Residual against the transported test function `φ(t, x + εv)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transported_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gronwall: Option<GronwallCertificate>,
    /// `∫ ‖r_ε‖² dt` over the recorded fields.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residue_integral: Option<f64>,
    pub mass_drift: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub particle_count: Option<[usize; 2]>,
    /// `ρ_ε` at the checkpoints.
    #[serde(skip)]
    pub profiles: Vec<Vec<f64>>,
}

impl LevelResult {
    pub fn final_l1(&self) -> f64 {
        self.errors.last().map(|e| e.l1).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub level: Level,
    /// Slope of `log L¹(T)` against `log ε`.
    pub fitted_order: Option<f64>,
    pub l1_decreasing: bool,
    /// `L¹(T)` at the smallest ε over that at the largest.
    pub l1_ratio: f64,
    pub weak_decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleAgreement {
    pub eps: f64,
    /// Grid against particle density at the final time.
    pub l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecentringProbe {
    pub x: f64,
    pub expected: f64,
    pub median: f64,
    pub iqr: f64,
    pub count: usize,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_median: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecentringCheck {
    pub eps: f64,
    pub window: f64,
    pub probes: Vec<RecentringProbe>,
}

impl RecentringCheck {
    pub fn pass(&self) -> bool {
        self.probes.iter().all(|p| p.pass)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub macro_seconds: f64,
    /// Per ε, in ladder order.
    pub eps_seconds: Vec<f64>,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub alpha: f64,
    pub field: String,
    pub eps_list: Vec<f64>,
    pub solver: SolverKind,
    pub checkpoints: Vec<f64>,
    pub runs: Vec<LevelResult>,
    pub summaries: Vec<LevelSummary>,
    pub oracle: Vec<OracleAgreement>,
    pub macro_mass_drift: f64,
    pub macro_min_ratio: f64,
    /// Limit-equation residual of the reference itself.
    pub macro_weak_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recentring: Option<RecentringCheck>,
    #[serde(skip)]
    pub x_nodes: Vec<f64>,
    /// Reference `ρ` at the checkpoints.
    #[serde(skip)]
    pub limit_profiles: Vec<Vec<f64>>,
    pub timing: Timing,
}

impl ConvergenceReport {
    pub fn runs_for(&self, level: Level) -> impl Iterator<Item = &LevelResult> {
        self.runs.iter().filter(move |r| r.level == level)
    }

    pub fn summary(&self, level: Level) -> Option<&LevelSummary> {
        self.summaries.iter().find(|s| s.level == level)
    }

    /// SHA-256 over every reported number except wall-clock times.
    pub fn checksum(&self) -> String {
        #[derive(Serialize)]
        struct Content<'a> {
            report: &'a ConvergenceReport,
            profiles: Vec<&'a [Vec<f64>]>,
            limit: &'a [Vec<f64>],
        }
        let mut bare = self.clone();
        bare.timing = Timing::default();
        let content = Content {
            report: &bare,
            profiles: self.runs.iter().map(|r| r.profiles.as_slice()).collect(),
            limit: &self.limit_profiles,
        };
        hex_digest(&serde_json::to_vec(&content).expect("serializable report"))
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything one ε job produces.
struct EpsOutcome {
    results: Vec<LevelResult>,
    grid_final: Option<KineticField>,
    ensemble: Option<ParticleEnsemble>,
    seconds: f64,
}

struct Shared {
    cfg: StudyConfig,
    field: ForceField,
    rho0: DensityField,
    reference: DensityTrajectory,
    phi: BumpCosine,
    checkpoints: Vec<f64>,
}

fn l1_l2(rho: &DensityField, reference: &DensityField) -> Result<(f64, f64)> {
    Ok((rho.l1_distance(reference)?, rho.l2_distance(reference)?))
}

fn errors_at(sh: &Shared, rho: &DensityTrajectory) -> Result<(Vec<CheckpointError>, Vec<Vec<f64>>)> {
    let mut errors = Vec::new();
    let mut profiles = Vec::new();
    for &t in &sh.checkpoints {
        let r = rho.nearest(t)?;
        let (l1, l2) = l1_l2(&r, &sh.reference.nearest(t)?)?;
        errors.push(CheckpointError { t, l1, l2 });
        profiles.push(r.values().to_vec());
    }
    Ok((errors, profiles))
}

fn grid_level(sh: &Shared, eps: f64) -> Result<(LevelResult, KineticField)> {
    let cfg = &sh.cfg;
    let alpha = cfg.alpha;
    let xg = cfg.xgrid()?;
    let g = equilibrium_density(cfg.vgrid()?, alpha)?;
    let profile = if cfg.initial.velocity_shift != 0.0 {
        shifted_table(&g, cfg.initial.velocity_shift)?
    } else {
        g.clone()
    };
    let f0 = KineticField::well_prepared(&sh.rho0, &profile)?;
    let scheme = SplitScheme::resolved(eps, alpha, cfg.grid.dt_max, cfg.grid.ratio)?;
    let opts = SolveOptions {
        checkpoints: sh.checkpoints.clone(),
        clip_negative: cfg.grid.clip_negative,
        record_stride: cfg.grid.record_stride,
    };
    let tr = solve(&f0, &sh.field, &scheme, cfg.t_final, &opts)?;
    let (errors, profiles) = errors_at(sh, &tr.rho)?;
    let transported = if tr.recorded.len() >= 2 {
        Some(weak_residual(&tr, &sh.field, &sh.phi, eps)?)
    } else {
        None
    };
    let residue_integral = if tr.recorded.len() >= 2 {
        let feps = local_equilibria(&g, &xg, &sh.field, eps, 0.0)?;
        Some(time_integrated_residue(&tr.recorded, &feps, &g, eps, alpha)?)
    } else {
        None
    };
    let gronwall = gronwall_certificate(&tr.rho.times, &tr.weighted_l2, eps, alpha, sh.field.w1inf_norm()).ok();
    let result = LevelResult {
        eps,
        level: Level::Grid,
        dt: cfg.t_final / (tr.rho.len() - 1) as f64,
        errors,
        weak_residual: weak_residual(&tr, &sh.field, &sh.phi, 0.0)?,
        transported_residual: transported,
        gronwall,
        residue_integral,
        mass_drift: tr.mass_drift,
        min_ratio: Some(tr.min_ratio),
        particle_count: None,
        profiles,
    };
    Ok((result, tr.final_field))
}

fn particle_level(sh: &Shared, eps: f64) -> Result<(LevelResult, ParticleEnsemble)> {
    let cfg = &sh.cfg;
    let s = ParticleSettings {
        alpha: cfg.alpha,
        eps,
        count: cfg.particles.count,
        dt: cfg.particles.dt,
        t_final: cfg.t_final,
        seed: cfg.seed,
        velocity_shift: cfg.initial.velocity_shift,
        smoothing: cfg.particles.smoothing,
    };
    let run = run_particles(&sh.rho0, &sh.field, &s, &cfg.xgrid()?)?;
    let (errors, profiles) = errors_at(sh, &run.rho)?;
    let result = LevelResult {
        eps,
        level: Level::Particles,
        dt: run.dt,
        errors,
        weak_residual: weak_residual_density(&run.rho, &sh.field, &sh.phi, cfg.alpha)?,
        transported_residual: None,
        gronwall: None,
        residue_integral: None,
        mass_drift: run.rho.mass_drift(),
        min_ratio: None,
        particle_count: Some([run.initial_count, run.ensemble.len()]),
        profiles,
    };
    Ok((result, run.ensemble))
}

fn run_eps(sh: &Shared, eps: f64) -> Result<EpsOutcome> {
    let start = Instant::now();
    let at = |source: CoreError| AppError::AtEps { eps, source };
    let lift = |e: AppError| match e {
        AppError::Core(source) => at(source),
        other => other,
    };
    let mut results = Vec::new();
    let mut grid_final = None;
    let mut ensemble = None;
    if sh.cfg.solver.grid() {
        let (r, f) = grid_level(sh, eps).map_err(lift)?;
        results.push(r);
        grid_final = Some(f);
    }
    if sh.cfg.solver.particles() {
        let (r, e) = particle_level(sh, eps).map_err(lift)?;
        results.push(r);
        ensemble = Some(e);
    }
    Ok(EpsOutcome {
        results,
        grid_final,
        ensemble,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn summarize(runs: &[LevelResult], level: Level) -> Option<LevelSummary> {
    let rs: Vec<&LevelResult> = runs.iter().filter(|r| r.level == level).collect();
    if rs.is_empty() {
        return None;
    }
    let l1: Vec<f64> = rs.iter().map(|r| r.final_l1()).collect();
    let weak: Vec<f64> = rs.iter().map(|r| r.weak_residual.abs()).collect();
    let fitted_order = if rs.len() >= 2 && l1.iter().all(|e| *e > 0.0) {
        let xs: Vec<f64> = rs.iter().map(|r| r.eps.ln()).collect();
        let ys: Vec<f64> = l1.iter().map(|e| e.ln()).collect();
        linear_fit(&xs, &ys).map(|(slope, _)| slope)
    } else {
        None
    };
    Some(LevelSummary {
        level,
        fitted_order,
        l1_decreasing: l1.windows(2).all(|w| w[1] < w[0]),
        l1_ratio: l1[l1.len() - 1] / l1[0],
        weak_decreasing: weak.windows(2).all(|w| w[1] < w[0]),
    })
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(AppError::config("--jobs", "must be at least 1"));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| AppError::Format(e.to_string()))
}

struct StudyOutput {
    report: ConvergenceReport,
    outcomes: Vec<EpsOutcome>,
}

fn study(cfg: &StudyConfig, jobs: Option<usize>) -> Result<StudyOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let field = cfg.force_field()?;
    let xg = cfg.xgrid()?;
    let (a, k) = (cfg.initial.amplitude, cfg.initial.wavenumber);
    let rho0 = DensityField::from_fn(xg, |x| 1.0 + a * (k * x).cos())?;
    let [t0, t1] = cfg.diagnostics.test_window;
    let phi = BumpCosine::new(t0, t1, cfg.diagnostics.test_wavenumber)?;

    let macro_start = Instant::now();
    let reference = solve_macro(&rho0, &field, cfg.t_final, cfg.macroscopic.dt, cfg.alpha)?;
    let macro_seconds = macro_start.elapsed().as_secs_f64();
    let macro_weak_residual = weak_residual_density(&reference, &field, &phi, cfg.alpha)?;

    let checkpoints = cfg.checkpoint_times();
    let shared = Shared {
        cfg: cfg.clone(),
        field,
        rho0,
        reference,
        phi,
        checkpoints: checkpoints.clone(),
    };
    let pool = pool(jobs)?;
    let workers = pool.current_num_threads();
    let outcomes: Vec<EpsOutcome> = pool.install(|| {
        cfg.eps_list
            .par_iter()
            .map(|&eps| run_eps(&shared, eps))
            .collect::<Result<Vec<_>>>()
    })?;

    let runs: Vec<LevelResult> = outcomes.iter().flat_map(|o| o.results.iter().cloned()).collect();
    let summaries = [Level::Grid, Level::Particles]
        .into_iter()
        .filter_map(|l| summarize(&runs, l))
        .collect();
    let oracle = if cfg.solver == SolverKind::Both {
        outcomes
            .iter()
            .zip(&cfg.eps_list)
            .map(|(o, &eps)| {
                let g = &o.results[0].profiles;
                let p = &o.results[1].profiles;
                let l1 = g[g.len() - 1]
                    .iter()
                    .zip(&p[p.len() - 1])
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    * xg.spacing();
                OracleAgreement { eps, l1 }
            })
            .collect()
    } else {
        Vec::new()
    };
    let limit_profiles = checkpoints
        .iter()
        .map(|&t| shared.reference.nearest(t).map(|r| r.values().to_vec()))
        .collect::<levyfp_core::Result<Vec<_>>>()?;
    let report = ConvergenceReport {
        alpha: cfg.alpha,
        field: cfg.field.clone(),
        eps_list: cfg.eps_list.clone(),
        solver: cfg.solver,
        checkpoints,
        runs,
        summaries,
        oracle,
        macro_mass_drift: shared.reference.mass_drift(),
        macro_min_ratio: shared.reference.min_ratio(),
        macro_weak_residual,
        recentring: None,
        x_nodes: xg.nodes(),
        limit_profiles,
        timing: Timing {
            total_seconds: start.elapsed().as_secs_f64(),
            macro_seconds,
            eps_seconds: outcomes.iter().map(|o| o.seconds).collect(),
            workers,
        },
    };
    Ok(StudyOutput { report, outcomes })
}

/// Runs the configured study. `jobs` bounds the worker pool (default: one
/// per core); it never changes the numbers.
pub fn run_limit_study(cfg: &StudyConfig, jobs: Option<usize>) -> Result<ConvergenceReport> {
    Ok(study(cfg, jobs)?.report)
}

/// Median of one grid row in velocity, linear inside the crossing cell.
pub fn row_median(f: &KineticField, i: usize) -> f64 {
    let row = f.row(i);
    let vg = f.vgrid();
    let total: f64 = row.iter().sum();
    let mut acc = 0.0;
    for (j, &w) in row.iter().enumerate() {
        if w > 0.0 && acc + w >= 0.5 * total {
            let s = (0.5 * total - acc) / w;
            return vg.node(j) + (s - 0.5) * vg.spacing();
        }
        acc += w;
    }
    f64::NAN
}

/// The α = 1 study plus the recentring check: at each probe the local
/// velocity median of the particles at the smallest ε must equal `E(T, x)`
/// within `k · IQR / √n`. When the configured solver has no particles, a
/// particle run at the smallest ε is added for the check.
pub fn run_critical_alpha1(cfg: &StudyConfig, jobs: Option<usize>) -> Result<ConvergenceReport> {
    if cfg.alpha != 1.0 {
        return Err(AppError::config("alpha", "the critical study needs alpha = 1"));
    }
    let StudyOutput { mut report, mut outcomes } = study(cfg, jobs)?;
    let last = outcomes.pop().expect("eps_list is not empty");
    let eps = *cfg.eps_list.last().expect("eps_list is not empty");
    let field = cfg.force_field()?;
    let ensemble = match last.ensemble {
        Some(e) => e,
        None => {
            let s = ParticleSettings {
                alpha: 1.0,
                eps,
                count: cfg.particles.count,
                dt: cfg.particles.dt,
                t_final: cfg.t_final,
                seed: cfg.seed,
                velocity_shift: cfg.initial.velocity_shift,
                smoothing: cfg.particles.smoothing,
            };
            let pool = pool(jobs)?;
            let xg = cfg.xgrid()?;
            let rho0 = DensityField::from_fn(xg, |x| {
                1.0 + cfg.initial.amplitude * (cfg.initial.wavenumber * x).cos()
            })?;
            pool.install(|| run_particles(&rho0, &field, &s, &xg))
                .map_err(|source| AppError::AtEps { eps, source })?
                .ensemble
        }
    };
    let xg = cfg.xgrid()?;
    let d = &cfg.diagnostics;
    let mut probes = Vec::new();
    for &x in &d.probes {
        let s: VelocitySummary =
            velocity_marginal_at(&ensemble, x, d.window).map_err(|source| AppError::AtEps { eps, source })?;
        let expected = drift_shift(field.eval(cfg.t_final, x), eps, 1.0);
        let tolerance = s.median_tolerance(d.median_k);
        probes.push(RecentringProbe {
            x,
            expected,
            median: s.median,
            iqr: s.iqr,
            count: s.count,
            tolerance,
            grid_median: last.grid_final.as_ref().map(|f| row_median(f, xg.cell_of(x))),
            pass: (s.median - expected).abs() <= tolerance,
        });
    }
    report.recentring = Some(RecentringCheck {
        eps,
        window: d.window,
        probes,
    });
    Ok(report)
}
