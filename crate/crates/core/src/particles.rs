//! Monte Carlo for the Lévy–Langevin characteristics.
//!
//! Particles are split into fixed chunks of [`CHUNK_SIZE`], each with its
//! own ChaCha stream `(seed, chunk)`. A step touches every chunk
//! independently, so any partition of chunks across workers gives
//! bit-identical ensembles.

use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;

use crate::field::ForceField;
use crate::grid::PeriodicGrid1D;
use crate::macroscopic::DensityField;
use crate::math::quantile_sorted;
use crate::stable::{drift_shift, equilibrium_scale, standard_stable, stream_rng, uniform_open};
use crate::{check_alpha, check_eps, Error, Result};

pub const CHUNK_SIZE: usize = 8192;
/// Above this effective step the velocity is redrawn from the local equilibrium.
pub const STIFF_LIMIT: f64 = 30.0;
/// Smallest sample accepted by [`velocity_marginal_at`].
pub const MIN_WINDOW_COUNT: usize = 1000;

#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    positions: Vec<f64>,
    velocities: Vec<f64>,
    time: f64,
    length: f64,
    seed: u64,
    rngs: Vec<ChaCha8Rng>,
}

/// Mutable view of one chunk and its generator.
pub struct ParticleChunk<'a> {
    pub positions: &'a mut [f64],
    pub velocities: &'a mut [f64],
    pub rng: &'a mut ChaCha8Rng,
}

impl ParticleEnsemble {
    pub fn new(positions: Vec<f64>, velocities: Vec<f64>, length: f64, seed: u64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Input("ensemble must hold at least one particle"));
        }
        if positions.len() != velocities.len() {
            return Err(Error::Input("positions and velocities differ in length"));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Parameter("domain length must be positive"));
        }
        if positions.iter().chain(&velocities).any(|v| !v.is_finite()) {
            return Err(Error::Input("particle states must be finite"));
        }
        let chunks = positions.len().div_ceil(CHUNK_SIZE);
        let rngs = (0..chunks).map(|c| stream_rng(seed, c as u64)).collect();
        let mut ens = Self {
            positions,
            velocities,
            time: 0.0,
            length,
            seed,
            rngs,
        };
        for x in ens.positions.iter_mut() {
            *x = wrap(*x, length);
        }
        Ok(ens)
    }

    /// `n` particles with positions drawn from `rho0` (piecewise constant on
    /// node-centred cells) and velocities from `G_α(· - velocity_shift)`.
    pub fn from_density(rho0: &DensityField, alpha: f64, n: usize, seed: u64, velocity_shift: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if n == 0 {
            return Err(Error::Input("ensemble must hold at least one particle"));
        }
        let g = *rho0.grid();
        let h = g.spacing();
        let mut cdf = Vec::with_capacity(g.len());
        let mut acc = 0.0;
        for &r in rho0.values() {
            if r < 0.0 {
                return Err(Error::Input("initial density must be nonnegative"));
            }
            acc += r * h;
            cdf.push(acc);
        }
        let mut ens = Self::new(alloc::vec![0.0; n], alloc::vec![0.0; n], g.length(), seed)?;
        let scale = equilibrium_scale(alpha);
        for chunk in ens.chunks_mut() {
            for (x, v) in chunk.positions.iter_mut().zip(chunk.velocities.iter_mut()) {
                let u = uniform_open(chunk.rng) * acc;
                let k = cdf.partition_point(|c| *c < u).min(g.len() - 1);
                let xi = g.node(k) + h * (uniform_open(chunk.rng) - 0.5);
                *x = wrap(xi, g.length());
                *v = velocity_shift + scale * standard_stable(chunk.rng, alpha);
            }
        }
        Ok(ens)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng_stream_count(&self) -> usize {
        self.rngs.len()
    }

    pub fn chunks_mut(&mut self) -> Vec<ParticleChunk<'_>> {
        self.positions
            .chunks_mut(CHUNK_SIZE)
            .zip(self.velocities.chunks_mut(CHUNK_SIZE))
            .zip(self.rngs.iter_mut())
            .map(|((positions, velocities), rng)| ParticleChunk {
                positions,
                velocities,
                rng,
            })
            .collect()
    }

    /// Moves the clock after all chunks have been stepped.
    pub fn advance_time(&mut self, dt: f64) {
        self.time += dt;
    }
}

#[inline]
fn wrap(x: f64, l: f64) -> f64 {
    let w = x - l * libm::floor(x / l);
    if w >= l || w < 0.0 {
        0.0
    } else {
        w
    }
}

/// Coefficients of one exact step of the rescaled characteristics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLaw {
    pub dt: f64,
    pub alpha: f64,
    /// `ε^{1-α}`, multiplying `v` in the position update.
    pub position_coef: f64,
    pub eps: f64,
    /// `e^{-dt/ε^α}`.
    pub decay: f64,
    /// Scale of the stable increment, `((1 - e^{-α dt/ε^α})/α)^{1/α}`.
    pub noise_scale: f64,
    /// Set when `dt/ε^α` exceeds [`STIFF_LIMIT`].
    pub resample: bool,
}

impl StepLaw {
    pub fn new(dt: f64, eps: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_eps(eps)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Parameter("dt must be positive"));
        }
        let tau = dt / libm::pow(eps, alpha);
        let resample = tau > STIFF_LIMIT;
        Ok(Self {
            dt,
            alpha,
            position_coef: libm::pow(eps, 1.0 - alpha),
            eps,
            decay: libm::exp(-tau),
            noise_scale: if resample {
                equilibrium_scale(alpha)
            } else {
                libm::pow(-libm::expm1(-alpha * tau) / alpha, 1.0 / alpha)
            },
            resample,
        })
    }
}

/// Advances one chunk from time `t` by `law.dt`.
pub fn step_chunk(chunk: &mut ParticleChunk<'_>, field: &ForceField, t: f64, law: &StepLaw, length: f64) {
    let uniform = field.uniform_value();
    for (x, v) in chunk.positions.iter_mut().zip(chunk.velocities.iter_mut()) {
        let e = uniform.unwrap_or_else(|| field.eval(t, *x));
        let m = drift_shift(e, law.eps, law.alpha);
        let s = law.noise_scale * standard_stable(chunk.rng, law.alpha);
        let v0 = *v;
        *v = if law.resample { m + s } else { m + (v0 - m) * law.decay + s };
        *x = wrap(*x + law.position_coef * v0 * law.dt, length);
    }
}

/// One step of the rescaled system in macroscopic time.
pub fn step_rescaled(ens: &mut ParticleEnsemble, field: &ForceField, dt: f64, eps: f64, alpha: f64) -> Result<()> {
    let law = StepLaw::new(dt, eps, alpha)?;
    let t = ens.time;
    let l = ens.length;
    for mut c in ens.chunks_mut() {
        step_chunk(&mut c, field, t, &law, l);
    }
    ens.advance_time(dt);
    Ok(())
}

/// One step of the unscaled Langevin system.
pub fn step_langevin(ens: &mut ParticleEnsemble, field: &ForceField, dt: f64, alpha: f64) -> Result<()> {
    step_rescaled(ens, field, dt, 1.0, alpha)
}

/// Histogram of positions on `xgrid`, optionally with one-cell triangular
/// (cloud-in-cell) smoothing.
pub fn estimate_density(ens: &ParticleEnsemble, xgrid: &PeriodicGrid1D, smoothing: bool) -> Result<DensityField> {
    if ens.is_empty() {
        return Err(Error::Input("empty ensemble"));
    }
    if libm::fabs(xgrid.length() - ens.length) > 1e-12 * ens.length {
        return Err(Error::Input("density grid does not cover the particle domain"));
    }
    let n = xgrid.len();
    let h = xgrid.spacing();
    let mut counts = alloc::vec![0.0; n];
    for &x in &ens.positions {
        if smoothing {
            let q = (x - xgrid.start()) / h;
            let k = libm::floor(q);
            let t = q - k;
            let k = (k as i64).rem_euclid(n as i64) as usize;
            counts[k] += 1.0 - t;
            counts[(k + 1) % n] += t;
        } else {
            counts[xgrid.cell_of(x)] += 1.0;
        }
    }
    let norm = 1.0 / (ens.len() as f64 * h);
    for c in counts.iter_mut() {
        *c *= norm;
    }
    DensityField::new(*xgrid, counts, ens.time)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VelocitySummary {
    pub count: usize,
    pub median: f64,
    pub iqr: f64,
    /// Bin centres and densities over the central 98% of the sample.
    pub histogram: Vec<(f64, f64)>,
}

impl VelocitySummary {
    /// `k · IQR / √n`, the tolerance used for median checks.
    pub fn median_tolerance(&self, k: f64) -> f64 {
        k * self.iqr / libm::sqrt(self.count as f64)
    }
}

/// Velocities of particles with periodic distance `< window` from `x_center`.
pub fn velocity_marginal_at(ens: &ParticleEnsemble, x_center: f64, window: f64) -> Result<VelocitySummary> {
    let l = ens.length;
    let mut vs: Vec<f64> = ens
        .positions
        .iter()
        .zip(&ens.velocities)
        .filter(|(x, _)| {
            let mut d = libm::fmod(**x - x_center, l);
            if d > 0.5 * l {
                d -= l;
            } else if d < -0.5 * l {
                d += l;
            }
            libm::fabs(d) < window
        })
        .map(|(_, v)| *v)
        .collect();
    if vs.len() < MIN_WINDOW_COUNT {
        return Err(Error::Statistics {
            count: vs.len(),
            required: MIN_WINDOW_COUNT,
        });
    }
    vs.sort_unstable_by(|a, b| a.total_cmp(b));
    let median = quantile_sorted(&vs, 0.5);
    let iqr = quantile_sorted(&vs, 0.75) - quantile_sorted(&vs, 0.25);
    let lo = quantile_sorted(&vs, 0.01);
    let hi = quantile_sorted(&vs, 0.99);
    let bins = 40;
    let w = (hi - lo) / bins as f64;
    let mut hist = alloc::vec![0usize; bins];
    if w > 0.0 {
        for &v in &vs {
            if v >= lo && v < hi {
                hist[(((v - lo) / w) as usize).min(bins - 1)] += 1;
            }
        }
    }
    let total = vs.len() as f64;
    let histogram = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| (lo + (i as f64 + 0.5) * w, if w > 0.0 { c as f64 / (total * w) } else { 0.0 }))
        .collect();
    Ok(VelocitySummary {
        count: vs.len(),
        median,
        iqr,
        histogram,
    })
}
