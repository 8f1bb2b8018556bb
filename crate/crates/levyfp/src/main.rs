use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use levyfp::config::StudyConfig;
use levyfp::Result;
use levyfp::io::{density_rows, read_field_dump, write_bytes, write_csv, write_field_dump, write_json};
use levyfp::mc::{run_particles, ParticleSettings};
use levyfp::report::{emit_report, summary_table};
use levyfp::{run_critical_alpha1, run_limit_study, AppError};
use levyfp_core::entropy::{entropy_report, DissipationOptions};
use levyfp_core::fraclap::{cross_validation_error, Normalization};
use levyfp_core::kinetic::{local_equilibria, solve, SolveOptions};
use levyfp_core::macroscopic::solve_macro;
use levyfp_core::stable::{default_velocity_grid, equilibrium_density, sample_stable, StableSamplerConfig};
use levyfp_core::{DensityField, ForceField, KineticField, PeriodicGrid1D, SplitScheme};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "levyfp", version, about = "Fractional Vlasov-Fokker-Planck solvers and diffusion-limit studies")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an eps-sweep convergence study from a TOML config.
    LimitStudy {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (results do not depend on it).
        #[arg(long)]
        jobs: Option<usize>,
        /// Write the report here instead of the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a complete default config for the given alpha.
    InitConfig {
        #[arg(long, default_value_t = 1.5)]
        alpha: f64,
    },
    /// Phase-space grid solve.
    GridRun(GridRunArgs),
    /// Monte Carlo run of the Levy-Langevin particles.
    McRun(McRunArgs),
    /// Solve the limiting advection/fractional-diffusion equation.
    MacroRun {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value = "sin:0.5,1")]
        field: String,
        #[arg(long, default_value_t = 128)]
        nx: usize,
        #[arg(long, default_value_t = 2.0 * std::f64::consts::PI)]
        length: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 1.0)]
        t_final: f64,
        /// rho0 ∝ 1 + amplitude cos(2πx/L).
        #[arg(long, default_value_t = 0.5)]
        amplitude: f64,
        /// Number of evenly spaced snapshots written.
        #[arg(long, default_value_t = 10)]
        snapshots: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate G_alpha as CSV (v, G_alpha).
    Equilibrium {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        length: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw samples of G_alpha, one per line.
    Sample {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral vs singular-integral error table (alpha, n, L, rel_l2_error).
    LaplacianCheck {
        #[arg(long, value_delimiter = ',', default_value = "1,1.5")]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1024,2048")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 80.0)]
        length: f64,
        /// Use the constant exactly as printed instead of the multiplier-consistent one.
        #[arg(long)]
        printed_constant: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Entropy diagnostics of binary field dumps (pass the JSON sidecars).
    EntropyReport {
        #[arg(required = true)]
        sidecars: Vec<PathBuf>,
        /// Dissipation on every velocity node instead of every fourth.
        #[arg(long)]
        full_resolution: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CommonRun {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    t_final: f64,
    /// zero | const:A | sin:A,k
    #[arg(long, default_value = "sin:0.5,1")]
    field: String,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// rho0 ∝ 1 + amplitude cos x on the 2π torus.
    #[arg(long, default_value_t = 0.5)]
    amplitude: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GridRunArgs {
    #[command(flatten)]
    common: CommonRun,
    #[arg(long, default_value_t = 128)]
    nx: usize,
    #[arg(long, requires = "vmax")]
    nv: Option<usize>,
    #[arg(long, requires = "nv")]
    vmax: Option<f64>,
    /// Checkpoint times (comma separated); default 0.25, 0.5, 1 times t_final.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<f64>,
    /// dt <= ratio eps^alpha on top of --dt.
    #[arg(long, default_value_t = 0.1)]
    ratio: f64,
    #[arg(long)]
    clip_negative: bool,
}

#[derive(Args)]
struct McRunArgs {
    #[command(flatten)]
    common: CommonRun,
    #[arg(long, default_value_t = 1_000_000)]
    particles: usize,
    /// Histogram cells.
    #[arg(long, default_value_t = 64)]
    nx: usize,
    #[arg(long)]
    jobs: Option<usize>,
}

fn torus(n: usize) -> Result<PeriodicGrid1D> {
    Ok(PeriodicGrid1D::new(2.0 * std::f64::consts::PI, n)?)
}

fn parse_field(s: &str) -> Result<ForceField> {
    s.parse().map_err(|e: levyfp_core::Error| AppError::config("--field", e.to_string()))
}

fn output<W: FnOnce(&mut dyn std::io::Write) -> std::io::Result<()>>(out: Option<&Path>, w: W) -> Result<()> {
    match out {
        Some(p) => {
            let mut buf = Vec::new();
            w(&mut buf).map_err(|e| AppError::io(p, e))?;
            write_bytes(p, &buf)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            w(&mut lock).map_err(|e| AppError::io("<stdout>", e))
        }
    }
}

#[derive(Serialize)]
struct GridManifest<'a> {
    alpha: f64,
    eps: f64,
    field: &'a str,
    scheme: SplitScheme,
    t_final: f64,
    checkpoints: Vec<f64>,
    mass_drift: f64,
    min_ratio: f64,
    clipped_mass: f64,
    wall_seconds: f64,
}

fn grid_run(a: GridRunArgs) -> Result<()> {
    let c = &a.common;
    let start = Instant::now();
    let field = parse_field(&c.field)?;
    let xg = torus(a.nx)?;
    let vg = match (a.nv, a.vmax) {
        (Some(n), Some(v)) => PeriodicGrid1D::new(2.0 * v, n)?,
        _ => default_velocity_grid(c.alpha)?,
    };
    let g = equilibrium_density(vg, c.alpha)?;
    let rho0 = DensityField::from_fn(xg, |x| 1.0 + c.amplitude * x.cos())?;
    let f0 = KineticField::well_prepared(&rho0, &g)?;
    let scheme = SplitScheme::resolved(c.eps, c.alpha, c.dt, a.ratio)?;
    let checkpoints = if a.checkpoints.is_empty() {
        vec![0.25 * c.t_final, 0.5 * c.t_final, c.t_final]
    } else {
        a.checkpoints.clone()
    };
    let opts = SolveOptions {
        checkpoints: checkpoints.clone(),
        clip_negative: a.clip_negative,
        record_stride: 0,
    };
    let tr = solve(&f0, &field, &scheme, c.t_final, &opts)?;
    let snaps: Vec<(f64, Vec<f64>)> = tr.checkpoints.iter().map(|f| (f.time(), f.rho())).collect();
    let refs: Vec<(f64, &[f64])> = snaps.iter().map(|(t, r)| (*t, r.as_slice())).collect();
    write_csv(&c.out.join("rho.csv"), &["t", "x", "rho"], density_rows(&xg, &refs))?;
    write_field_dump(&c.out.join("field"), &tr.final_field, c.alpha, c.eps, &field)?;
    write_json(
        &c.out.join("manifest.json"),
        &GridManifest {
            alpha: c.alpha,
            eps: c.eps,
            field: &c.field,
            scheme,
            t_final: c.t_final,
            checkpoints,
            mass_drift: tr.mass_drift,
            min_ratio: tr.min_ratio,
            clipped_mass: tr.clipped_mass,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    )?;
    eprintln!("mass drift {:.2e}, min f/max f {:.2e}", tr.mass_drift, tr.min_ratio);
    Ok(())
}

#[derive(Serialize)]
struct McManifest<'a> {
    alpha: f64,
    eps: f64,
    field: &'a str,
    particles: usize,
    dt: f64,
    t_final: f64,
    rng: RngMeta,
    final_count: usize,
    wall_seconds: f64,
}

#[derive(Serialize)]
struct RngMeta {
    generator: &'static str,
    seed: u64,
    streams: usize,
    chunk_size: usize,
}

fn mc_run(a: McRunArgs) -> Result<()> {
    let c = &a.common;
    let start = Instant::now();
    let field = parse_field(&c.field)?;
    let xg = torus(a.nx)?;
    let rho0 = DensityField::from_fn(xg, |x| 1.0 + c.amplitude * x.cos())?;
    let s = ParticleSettings {
        alpha: c.alpha,
        eps: c.eps,
        count: a.particles,
        dt: c.dt,
        t_final: c.t_final,
        seed: c.seed,
        velocity_shift: 0.0,
        smoothing: false,
    };
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = a.jobs {
        b = b.num_threads(n.max(1));
    }
    let pool = b.build().map_err(|e| AppError::Format(e.to_string()))?;
    let run = pool.install(|| run_particles(&rho0, &field, &s, &xg))?;
    let n = run.rho.len();
    let picks = [0, (n - 1) / 4, (n - 1) / 2, n - 1];
    let mut rows = Vec::new();
    for &k in &picks {
        let mut row = vec![run.rho.times[k]];
        row.extend_from_slice(&run.rho.values[k]);
        rows.push(row);
    }
    rows.dedup_by(|a, b| a[0] == b[0]);
    let mut header = vec!["t".to_string()];
    header.extend(xg.nodes().iter().map(|x| format!("x={x}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&c.out.join("snapshots.csv"), &header, &rows)?;
    write_json(
        &c.out.join("manifest.json"),
        &McManifest {
            alpha: c.alpha,
            eps: c.eps,
            field: &c.field,
            particles: a.particles,
            dt: run.dt,
            t_final: c.t_final,
            rng: RngMeta {
                generator: "ChaCha8, one stream per chunk",
                seed: c.seed,
                streams: run.ensemble.rng_stream_count(),
                chunk_size: levyfp_core::particles::CHUNK_SIZE,
            },
            final_count: run.ensemble.len(),
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    )
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::LimitStudy { config, jobs, out } => {
            let cfg = StudyConfig::load(&config)?;
            let report = if cfg.alpha == 1.0 {
                run_critical_alpha1(&cfg, jobs)?
            } else {
                run_limit_study(&cfg, jobs)?
            };
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let manifest = emit_report(&report, &cfg, &dir)?;
            print!("{}", summary_table(&report));
            eprintln!("report: {}", manifest.display());
            Ok(())
        }
        Cmd::InitConfig { alpha } => {
            let cfg = StudyConfig::with_alpha(alpha);
            cfg.validate()?;
            print!("{}", cfg.to_toml());
            Ok(())
        }
        Cmd::GridRun(a) => grid_run(a),
        Cmd::McRun(a) => mc_run(a),
        Cmd::MacroRun {
            alpha,
            field,
            nx,
            length,
            dt,
            t_final,
            amplitude,
            snapshots,
            out,
        } => {
            let f = parse_field(&field)?;
            let g = PeriodicGrid1D::new(length, nx)?;
            let k = 2.0 * std::f64::consts::PI / length;
            let rho0 = DensityField::from_fn(g, |x| 1.0 + amplitude * (k * x).cos())?;
            let traj = solve_macro(&rho0, &f, t_final, dt, alpha)?;
            let steps = traj.len() - 1;
            let m = snapshots.clamp(1, steps);
            let mut idx: Vec<usize> = (0..=m).map(|s| s * steps / m).collect();
            idx.dedup();
            let refs: Vec<(f64, &[f64])> = idx.iter().map(|&i| (traj.times[i], traj.values[i].as_slice())).collect();
            write_csv(&out, &["t", "x", "rho"], density_rows(&g, &refs))?;
            eprintln!("mass drift {:.2e}", traj.mass_drift());
            Ok(())
        }
        Cmd::Equilibrium { alpha, n, length, out } => {
            let vg = match (n, length) {
                (None, None) => default_velocity_grid(alpha)?,
                (n, l) => {
                    let d = default_velocity_grid(alpha)?;
                    PeriodicGrid1D::new(l.unwrap_or(d.length()), n.unwrap_or(d.len()))?
                }
            };
            let g = equilibrium_density(vg, alpha)?;
            let rows: Vec<[f64; 2]> = g.density().iter().enumerate().map(|(i, d)| [vg.node(i), *d]).collect();
            write_csv(&out, &["v", "G_alpha"], rows)
        }
        Cmd::Sample { alpha, count, seed, out } => {
            let xs = sample_stable(&StableSamplerConfig::equilibrium(alpha, seed)?, count)?;
            output(out.as_deref(), |w| {
                let mut w = std::io::BufWriter::new(w);
                for x in &xs {
                    writeln!(w, "{x}")?;
                }
                w.flush()
            })
        }
        Cmd::LaplacianCheck {
            alphas,
            n,
            length,
            printed_constant,
            out,
        } => {
            let norm = if printed_constant {
                Normalization::Printed
            } else {
                Normalization::MultiplierConsistent
            };
            let mut rows = Vec::new();
            for &a in &alphas {
                for &m in &n {
                    rows.push((a, m, cross_validation_error(a, m, length, norm)?));
                }
            }
            output(out.as_deref(), |w| {
                writeln!(w, "alpha,n,L,rel_l2_error")?;
                for (a, m, e) in &rows {
                    writeln!(w, "{a},{m},{length},{e}")?;
                }
                Ok(())
            })
        }
        Cmd::EntropyReport {
            sidecars,
            full_resolution,
            out,
        } => {
            let opts = if full_resolution {
                DissipationOptions::full_resolution()
            } else {
                DissipationOptions::default()
            };
            let mut series = Vec::new();
            for p in &sidecars {
                let (f, meta) = read_field_dump(p)?;
                let field = ForceField::new(meta.field.clone())?;
                let g = equilibrium_density(meta.v_grid, meta.alpha)?;
                let feps = local_equilibria(&g, &meta.x_grid, &field, meta.eps, meta.time)?;
                series.push(entropy_report(&f, &feps, &g, meta.eps, meta.alpha, opts)?);
            }
            let text = levyfp::io::to_json_pretty(&series);
            output(out.as_deref(), |w| w.write_all(text.as_bytes()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_kind() as u8)
        }
    }
}
