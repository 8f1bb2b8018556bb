//! Symmetric α-stable equilibria and sampling.
//!
//! `G_α` is the density with characteristic function `e^{-|ξ|^α/α}`;
//! `F_ε = G_α(· - ε^{α-1}E)` is its translate under a field `E`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::fft::FftPlan;
use crate::grid::PeriodicGrid1D;
use crate::math::{abs_pow, erfc, gamma, linear_fit};
use crate::{check_alpha, Error, Result};

/// Default bound on the equilibrium mass lying outside the velocity box.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-3;
/// Largest admissible characteristic function value at the Nyquist frequency.
pub const NYQUIST_TOLERANCE: f64 = 1e-12;
/// Largest admissible mass removed by clipping negative table values.
pub const CLIP_TOLERANCE: f64 = 1e-8;

/// `Ĝ_α(ξ) = exp(-|ξ|^α / α)` for a vector `ξ`.
pub fn char_function(xi: &[f64], alpha: f64) -> f64 {
    let r2: f64 = xi.iter().map(|x| x * x).sum();
    let r = libm::sqrt(r2);
    libm::exp(-abs_pow(r, alpha) / alpha)
}

/// `exp(-t |ξ|^α / α)`.
pub fn fp_semigroup_multiplier(t: f64, xi: f64, alpha: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Parameter("semigroup time must be nonnegative"));
    }
    Ok(libm::exp(-t * abs_pow(xi, alpha) / alpha))
}

/// Leading tail coefficient `a` of `G_α(v) ~ a |v|^{-1-α}`.
pub fn tail_coefficient(alpha: f64) -> f64 {
    gamma(1.0 + alpha) * libm::sin(0.5 * PI * alpha) / (PI * alpha)
}

/// Estimated `G_α` mass outside `[-radius, radius]`.
pub fn tail_mass_estimate(alpha: f64, radius: f64) -> f64 {
    if alpha >= 2.0 {
        erfc(radius / core::f64::consts::SQRT_2)
    } else {
        2.0 * tail_coefficient(alpha) / (alpha * libm::pow(radius, alpha))
    }
}

/// Smallest power-of-two velocity grid passing both the tail-mass and the
/// Nyquist checks for `alpha`.
pub fn velocity_grid_for(alpha: f64, tail_tolerance: f64) -> Result<PeriodicGrid1D> {
    check_alpha(alpha)?;
    if !(tail_tolerance > 0.0 && tail_tolerance < 1.0) {
        return Err(Error::Parameter("tail tolerance must lie in (0, 1)"));
    }
    let radius = if alpha >= 2.0 {
        // Gaussian tails: stay where G is well above FFT roundoff
        let mut r = 1.0;
        while tail_mass_estimate(alpha, r) > tail_tolerance {
            r *= 1.1;
        }
        libm::ceil(r).max(7.0)
    } else {
        let r = libm::pow(2.0 * tail_coefficient(alpha) / (alpha * tail_tolerance), 1.0 / alpha);
        libm::ceil(r * 1.02)
    };
    // exp(-xi_N^α/α) < NYQUIST_TOLERANCE with margin
    let xi_n = libm::pow(-alpha * libm::log(NYQUIST_TOLERANCE) * 1.05, 1.0 / alpha);
    let h_max = PI / xi_n;
    let n = ((2.0 * radius / h_max) as usize + 1).next_power_of_two().max(64);
    PeriodicGrid1D::new(2.0 * radius, n)
}

/// Velocity grid used by the solvers when none is given.
///
/// `[-48, 48)` with 512 nodes for `1.5 ≤ α < 2`. Elsewhere the grid comes
/// from the tail and Nyquist requirements; at `α = 2` it is `[-7, 7)`.
pub fn default_velocity_grid(alpha: f64) -> Result<PeriodicGrid1D> {
    check_alpha(alpha)?;
    if (1.5..2.0).contains(&alpha) {
        PeriodicGrid1D::new(96.0, 512)
    } else {
        velocity_grid_for(alpha, DEFAULT_TAIL_TOLERANCE)
    }
}

/// Sampled `G_α` or `F_ε` with its Fourier-side representation.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumTable {
    vgrid: PeriodicGrid1D,
    density: Vec<f64>,
    xi_grid: PeriodicGrid1D,
    /// `Ĝ_α` at the FFT-ordered wavenumbers of `vgrid`.
    char_values: Vec<f64>,
    alpha: f64,
    shift: f64,
    clipped_mass: f64,
}

impl EquilibriumTable {
    pub fn vgrid(&self) -> &PeriodicGrid1D {
        &self.vgrid
    }

    pub fn xi_grid(&self) -> &PeriodicGrid1D {
        &self.xi_grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn char_values(&self) -> &[f64] {
        &self.char_values
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Centre of symmetry, `ε^{α-1}E` (zero for `G_α`).
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn clipped_mass(&self) -> f64 {
        self.clipped_mass
    }

    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.vgrid.spacing()
    }

    /// `F̂(ξ)` at FFT slot `i`.
    pub fn fourier(&self, i: usize) -> Complex64 {
        let xi = self.vgrid.wavenumber(i);
        let th = -xi * self.shift;
        self.char_values[i] * Complex64::new(libm::cos(th), libm::sin(th))
    }

    /// Distribution function on the grid, linear inside each node-centred cell.
    pub fn cdf(&self, v: f64) -> f64 {
        let h = self.vgrid.spacing();
        let q = (v - self.vgrid.start()) / h + 0.5;
        if q <= 0.0 {
            return 0.0;
        }
        let k = libm::floor(q) as usize;
        if k >= self.density.len() {
            return 1.0;
        }
        let below: f64 = self.density[..k].iter().sum::<f64>() * h;
        (below + (q - k as f64) * self.density[k] * h).min(1.0)
    }

    /// Kolmogorov–Smirnov distance between the samples and the table.
    pub fn ks_distance(&self, samples: &[f64]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::Input("no samples"));
        }
        let mut s = samples.to_vec();
        s.sort_unstable_by(|a, b| a.total_cmp(b));
        // cumulative sums at cell edges, then linear inside cells
        let h = self.vgrid.spacing();
        let mut edges = Vec::with_capacity(self.density.len() + 1);
        let mut acc = 0.0;
        edges.push(0.0);
        for d in &self.density {
            acc += d * h;
            edges.push(acc);
        }
        let start = self.vgrid.start() - 0.5 * h;
        let nn = s.len() as f64;
        let mut worst = 0.0f64;
        for (i, &x) in s.iter().enumerate() {
            let q = (x - start) / h;
            let c = if q <= 0.0 {
                0.0
            } else if q >= self.density.len() as f64 {
                acc
            } else {
                let k = libm::floor(q) as usize;
                edges[k] + (q - k as f64) * (edges[k + 1] - edges[k])
            };
            let lo = i as f64 / nn;
            let hi = (i + 1) as f64 / nn;
            worst = worst.max(libm::fabs(c - lo)).max(libm::fabs(hi - c));
        }
        Ok(worst)
    }

    /// Linear interpolation of the density at `v` (zero outside the box).
    pub fn value_at(&self, v: f64) -> f64 {
        let q = (v - self.vgrid.start()) / self.vgrid.spacing();
        if q < 0.0 || q > (self.density.len() - 1) as f64 {
            return 0.0;
        }
        let k = libm::floor(q) as usize;
        let t = q - k as f64;
        let next = self.density.get(k + 1).copied().unwrap_or(0.0);
        self.density[k] * (1.0 - t) + next * t
    }
}

pub fn equilibrium_density(vgrid: PeriodicGrid1D, alpha: f64) -> Result<EquilibriumTable> {
    equilibrium_density_with(vgrid, alpha, DEFAULT_TAIL_TOLERANCE)
}

pub fn equilibrium_density_with(vgrid: PeriodicGrid1D, alpha: f64, tail_tolerance: f64) -> Result<EquilibriumTable> {
    check_alpha(alpha)?;
    if char_function(&[vgrid.nyquist()], alpha) >= NYQUIST_TOLERANCE {
        return Err(Error::Resolution("velocity grid too coarse: characteristic function not negligible at Nyquist"));
    }
    if tail_mass_estimate(alpha, vgrid.half_width()) > tail_tolerance {
        return Err(Error::Resolution("velocity grid too narrow: equilibrium tail mass exceeds tolerance"));
    }
    let char_values: Vec<f64> = (0..vgrid.len())
        .map(|i| char_function(&[vgrid.wavenumber(i)], alpha))
        .collect();
    build_table(vgrid, alpha, char_values, 0.0, true)
}

fn build_table(
    vgrid: PeriodicGrid1D,
    alpha: f64,
    char_values: Vec<f64>,
    shift: f64,
    symmetrize: bool,
) -> Result<EquilibriumTable> {
    let n = vgrid.len();
    let plan = FftPlan::new(n)?;
    let nyq = n / 2;
    let mut spec: Vec<Complex64> = (0..n)
        .map(|i| {
            // (-1)^m moves the origin from node 0 to the centre node
            let sign = if vgrid.frequency_index(i) % 2 == 0 { 1.0 } else { -1.0 };
            let th = -vgrid.wavenumber(i) * shift;
            let phase = if i == nyq {
                Complex64::new(libm::cos(th), 0.0)
            } else {
                Complex64::new(libm::cos(th), libm::sin(th))
            };
            sign * char_values[i] * phase
        })
        .collect();
    plan.inverse(&mut spec);
    let scale = n as f64 / vgrid.length();
    let mut density: Vec<f64> = spec.iter().map(|z| z.re * scale).collect();
    if symmetrize {
        for j in 1..nyq {
            let m = 0.5 * (density[j] + density[n - j]);
            density[j] = m;
            density[n - j] = m;
        }
    }
    let h = vgrid.spacing();
    let mut clipped = 0.0;
    for d in density.iter_mut() {
        if *d < 0.0 {
            clipped -= *d * h;
            *d = 0.0;
        }
    }
    if clipped >= CLIP_TOLERANCE {
        return Err(Error::Resolution("equilibrium table has significant negative ringing"));
    }
    let mass: f64 = density.iter().sum::<f64>() * h;
    for d in density.iter_mut() {
        *d /= mass;
    }
    Ok(EquilibriumTable {
        vgrid,
        density,
        xi_grid: vgrid.dual(),
        char_values,
        alpha,
        shift,
        clipped_mass: clipped,
    })
}

/// The velocity shift `ε^{α-1} E`; at `α = 1` the factor is 1 for every
/// `ε ≥ 0`.
pub fn drift_shift(e_value: f64, eps: f64, alpha: f64) -> f64 {
    libm::pow(eps, alpha - 1.0) * e_value
}

/// `F_ε(v) = G_α(v - ε^{α-1}E)`, built by a spectral phase shift.
pub fn perturbed_equilibrium(table: &EquilibriumTable, e_value: f64, eps: f64, alpha: f64) -> Result<EquilibriumTable> {
    if (alpha - table.alpha).abs() > 0.0 {
        return Err(Error::Parameter("alpha does not match the base table"));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Parameter("eps must lie in [0, 1]"));
    }
    let shift = drift_shift(e_value, eps, alpha) + table.shift;
    shifted_table(table, shift)
}

/// The base table translated so that its centre sits at `shift`.
pub fn shifted_table(table: &EquilibriumTable, shift: f64) -> Result<EquilibriumTable> {
    if !shift.is_finite() || libm::fabs(shift) > 0.25 * table.vgrid.length() {
        return Err(Error::Domain("equilibrium shift exceeds a quarter of the velocity box"));
    }
    if shift == 0.0 {
        let mut t = table.clone();
        t.shift = 0.0;
        return Ok(t);
    }
    build_table(table.vgrid, table.alpha, table.char_values.clone(), shift, false)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SandwichReport {
    /// Smallest `C₁` with `C₁⁻¹ b ≤ G_α ≤ C₁ b` on the grid; `None` at `α = 2`.
    pub c1: Option<f64>,
    /// Log-log slope of the tail on `|v| ∈ [10, L/4]`; `None` at `α = 2`.
    pub tail_slope: Option<f64>,
    /// Set when the check was skipped because the equilibrium is Gaussian.
    pub gaussian: bool,
}

/// The comparison profile `min(1/(α|v|^{d+α}), 1/α^{d/α})`.
pub fn sandwich_profile(v: f64, alpha: f64) -> f64 {
    let tail = 1.0 / (alpha * libm::pow(libm::fabs(v), 1.0 + alpha));
    tail.min(1.0 / libm::pow(alpha, 1.0 / alpha))
}

pub fn verify_sandwich_bounds(table: &EquilibriumTable, alpha: f64) -> Result<SandwichReport> {
    if alpha >= 2.0 {
        return Ok(SandwichReport {
            c1: None,
            tail_slope: None,
            gaussian: true,
        });
    }
    let g = table.vgrid;
    let lo = 10.0;
    let hi = 0.25 * g.length();
    if hi <= lo * 1.5 {
        return Err(Error::Resolution("tail fit window [10, L/4] is empty"));
    }
    let mut c1 = 1.0f64;
    for (j, &d) in table.density.iter().enumerate() {
        let v = g.node(j) - table.shift;
        let b = sandwich_profile(v, alpha);
        if d <= 0.0 {
            return Err(Error::Resolution("equilibrium table vanishes inside the box"));
        }
        c1 = c1.max(d / b).max(b / d);
    }

    let h = g.spacing();
    let samples = 48;
    let mut xs = Vec::with_capacity(samples);
    let mut ys = Vec::with_capacity(samples);
    let mut last = usize::MAX;
    for s in 0..samples {
        let r = lo * libm::pow(hi / lo, s as f64 / (samples - 1) as f64);
        let j = libm::round((r + table.shift - g.start()) / h) as usize;
        let jm = libm::round((-r + table.shift - g.start()) / h) as usize;
        if j == last || j >= g.len() {
            continue;
        }
        last = j;
        let val = 0.5 * (table.density[j] + table.density[jm]);
        xs.push(libm::log(libm::fabs(g.node(j) - table.shift)));
        ys.push(libm::log(val));
    }
    let (slope, _) = linear_fit(&xs, &ys).ok_or(Error::Resolution("tail fit window has too few nodes"))?;
    Ok(SandwichReport {
        c1: Some(c1),
        tail_slope: Some(slope),
        gaussian: false,
    })
}

/// `max |F_ε - G_α| / G_α` over `|v| ≤ core_radius`.
pub fn perturbation_ratio(base: &EquilibriumTable, e_value: f64, eps: f64, core_radius: f64) -> Result<f64> {
    let f = perturbed_equilibrium(base, e_value, eps, base.alpha)?;
    let g = base.vgrid;
    let mut m = 0.0f64;
    for j in 0..g.len() {
        if libm::fabs(g.node(j)) <= core_radius {
            let b = base.density[j];
            m = m.max(libm::fabs(f.density[j] - b) / b);
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub eps: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Slope of `log m(ε)` against `log ε`; `None` when every ratio vanishes.
    pub order: Option<f64>,
}

/// Fitted order of `max |F_ε - G_α|/G_α` in `ε` on the default grid, over
/// `|v| ≤ 2`.
pub fn perturbation_decay_rate(e_value: f64, alpha: f64, eps_list: &[f64]) -> Result<DecayFit> {
    let base = equilibrium_density(default_velocity_grid(alpha)?, alpha)?;
    perturbation_decay_rate_on(&base, e_value, eps_list, 2.0)
}

pub fn perturbation_decay_rate_on(
    base: &EquilibriumTable,
    e_value: f64,
    eps_list: &[f64],
    core_radius: f64,
) -> Result<DecayFit> {
    if base.alpha <= 1.0 {
        return Err(Error::Parameter("no decay in eps at alpha = 1"));
    }
    if eps_list.len() < 2 {
        return Err(Error::Input("need at least two eps values"));
    }
    let ratios = eps_list
        .iter()
        .map(|&e| perturbation_ratio(base, e_value, e, core_radius))
        .collect::<Result<Vec<_>>>()?;
    let order = if ratios.iter().all(|r| *r > 0.0) {
        let xs: Vec<f64> = eps_list.iter().map(|e| libm::log(*e)).collect();
        let ys: Vec<f64> = ratios.iter().map(|r| libm::log(*r)).collect();
        linear_fit(&xs, &ys).map(|(s, _)| s)
    } else {
        None
    };
    Ok(DecayFit {
        eps: eps_list.to_vec(),
        ratios,
        order,
    })
}

/// Parameters of a symmetric α-stable law with CF `exp(-(scale |ξ|)^α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StableSamplerConfig {
    pub alpha: f64,
    pub scale: f64,
    pub seed: u64,
}

impl StableSamplerConfig {
    pub fn new(alpha: f64, scale: f64, seed: u64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Parameter("scale must be positive"));
        }
        Ok(Self { alpha, scale, seed })
    }

    /// The law of `G_α`: scale `α^{-1/α}`.
    pub fn equilibrium(alpha: f64, seed: u64) -> Result<Self> {
        Self::new(alpha, equilibrium_scale(alpha), seed)
    }
}

/// Scale giving CF `e^{-|ξ|^α/α}`.
pub fn equilibrium_scale(alpha: f64) -> f64 {
    libm::pow(alpha, -1.0 / alpha)
}

/// Uniform on the open interval (0, 1).
#[inline]
pub fn uniform_open<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// One draw with CF `exp(-|ξ|^α)` (Chambers–Mallows–Stuck).
#[inline]
pub fn standard_stable<R: RngCore + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    let u = PI * (uniform_open(rng) - 0.5);
    let w = -libm::log(uniform_open(rng));
    if alpha == 1.0 {
        libm::tan(u)
    } else if alpha == 2.0 {
        2.0 * libm::sin(u) * libm::sqrt(w)
    } else {
        let a = libm::sin(alpha * u) / libm::pow(libm::cos(u), 1.0 / alpha);
        let b = libm::pow(libm::cos((1.0 - alpha) * u) / w, (1.0 - alpha) / alpha);
        a * b
    }
}

/// Generator for stream `stream` of a seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` i.i.d. draws, deterministic in the seed.
pub fn sample_stable(cfg: &StableSamplerConfig, n: usize) -> Result<Vec<f64>> {
    check_alpha(cfg.alpha)?;
    if n == 0 {
        return Err(Error::Parameter("sample count must be at least 1"));
    }
    let mut rng = stream_rng(cfg.seed, 0);
    let mut out = vec![0.0; n];
    for x in out.iter_mut() {
        *x = cfg.scale * standard_stable(&mut rng, cfg.alpha);
    }
    Ok(out)
}

/// Real part of the empirical characteristic function.
pub fn empirical_cf(samples: &[f64], xi: f64) -> f64 {
    samples.iter().map(|x| libm::cos(xi * x)).sum::<f64>() / samples.len() as f64
}
