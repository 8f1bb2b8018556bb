//! Phase-space solver for the rescaled kinetic equation
//!
//! `∂t f + ε^{1-α} v ∂x f + ε^{-1} E ∂v f = ε^{-α} (∂v(v f) - (-Δv)^{α/2} f)`
//!
//! on a periodic `x` torus and a truncated periodic `v` box. Time is split
//! into free transport (an exact spectral shift per velocity node) and the
//! field-perturbed fractional Fokker–Planck flow, which is solved exactly in
//! velocity-Fourier variables along its characteristics `ξ ↦ ξ e^{-τ}`.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::fft::FftPlan;
use crate::field::ForceField;
use crate::grid::PeriodicGrid1D;
use crate::macroscopic::{min_over_max, DensityField, DensityTrajectory};
use crate::math::{abs_pow, lagrange4};
use crate::stable::{drift_shift, equilibrium_density, shifted_table, EquilibriumTable};
use crate::{check_alpha, check_eps, Error, Result};

/// Gridded `f(x, v)`, stored with `x` as the slow index.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticField {
    xgrid: PeriodicGrid1D,
    vgrid: PeriodicGrid1D,
    values: Vec<f64>,
    time: f64,
    mass: f64,
}

impl KineticField {
    pub fn new(xgrid: PeriodicGrid1D, vgrid: PeriodicGrid1D, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != xgrid.len() * vgrid.len() {
            return Err(Error::Input("field size does not match the phase-space grid"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("field values must be finite"));
        }
        let mass = values.iter().sum::<f64>() * xgrid.spacing() * vgrid.spacing();
        Ok(Self {
            xgrid,
            vgrid,
            values,
            time,
            mass,
        })
    }

    pub fn from_fn(xgrid: PeriodicGrid1D, vgrid: PeriodicGrid1D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(xgrid.len() * vgrid.len());
        for i in 0..xgrid.len() {
            for j in 0..vgrid.len() {
                values.push(f(xgrid.node(i), vgrid.node(j)));
            }
        }
        Self::new(xgrid, vgrid, values, 0.0)
    }

    /// `ρ0(x) M(v)` for a velocity profile `M` given as a table.
    pub fn well_prepared(rho0: &DensityField, profile: &EquilibriumTable) -> Result<Self> {
        let xgrid = *rho0.grid();
        let vgrid = *profile.vgrid();
        let mut values = Vec::with_capacity(xgrid.len() * vgrid.len());
        for &r in rho0.values() {
            values.extend(profile.density().iter().map(|g| r * g));
        }
        Self::new(xgrid, vgrid, values, rho0.time())
    }

    /// `ρ(x_i) F_i(v)` with one velocity profile per `x` node (or one shared).
    pub fn local_equilibrium(xgrid: PeriodicGrid1D, rho: &[f64], profiles: &[EquilibriumTable]) -> Result<Self> {
        if rho.len() != xgrid.len() {
            return Err(Error::Input("density length does not match the x grid"));
        }
        let vgrid = *profiles.first().ok_or(Error::Input("no velocity profiles"))?.vgrid();
        let mut values = Vec::with_capacity(xgrid.len() * vgrid.len());
        for (i, &r) in rho.iter().enumerate() {
            let p = profile_for(profiles, i, xgrid.len())?;
            values.extend(p.density().iter().map(|g| r * g));
        }
        Self::new(xgrid, vgrid, values, 0.0)
    }

    pub fn xgrid(&self) -> &PeriodicGrid1D {
        &self.xgrid
    }

    pub fn vgrid(&self) -> &PeriodicGrid1D {
        &self.vgrid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Row `f(x_i, ·)`.
    pub fn row(&self, i: usize) -> &[f64] {
        let nv = self.vgrid.len();
        &self.values[i * nv..(i + 1) * nv]
    }

    /// Mass recorded at construction.
    pub fn initial_mass(&self) -> f64 {
        self.mass
    }

    /// Current `Σ f Δx Δv`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.xgrid.spacing() * self.vgrid.spacing()
    }

    /// `ρ(x_i) = Σ_v f Δv`.
    pub fn rho(&self) -> Vec<f64> {
        let hv = self.vgrid.spacing();
        self.values
            .chunks(self.vgrid.len())
            .map(|r| r.iter().sum::<f64>() * hv)
            .collect()
    }

    pub fn density(&self) -> Result<DensityField> {
        DensityField::new(self.xgrid, self.rho(), self.time)
    }

    /// `min f / max f`.
    pub fn min_ratio(&self) -> f64 {
        min_over_max(&self.values)
    }
}

pub(crate) fn profile_for(profiles: &[EquilibriumTable], i: usize, nx: usize) -> Result<&EquilibriumTable> {
    match profiles.len() {
        1 => Ok(&profiles[0]),
        n if n == nx => Ok(&profiles[i]),
        _ => Err(Error::Input("need one velocity profile or one per x node")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SplitOrder {
    Lie,
    #[default]
    Strang,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitScheme {
    pub dt: f64,
    pub order: SplitOrder,
    pub eps: f64,
    pub alpha: f64,
}

impl SplitScheme {
    pub fn new(dt: f64, order: SplitOrder, eps: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_eps(eps)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Parameter("dt must be positive"));
        }
        Ok(Self { dt, order, eps, alpha })
    }

    /// Strang scheme with `dt = min(dt_max, ratio · ε^α)`, keeping the
    /// effective relaxation step `dt/ε^α` at most `ratio`.
    pub fn resolved(eps: f64, alpha: f64, dt_max: f64, ratio: f64) -> Result<Self> {
        check_eps(eps)?;
        let dt = dt_max.min(ratio * libm::pow(eps, alpha));
        Self::new(dt, SplitOrder::Strang, eps, alpha)
    }

    /// `dt / ε^α`.
    pub fn effective_dt(&self) -> f64 {
        self.dt / libm::pow(self.eps, self.alpha)
    }
}

/// Exact fractional Fokker–Planck substep for rows of a kinetic field.
///
/// Writing `p = f̂ / F̂_ε`, the flow is the pure dilation
/// `p(τ, ξ) = p(0, ξ e^{-τ})`, evaluated by four-point Lagrange
/// interpolation on the `ξ` grid. Coefficients depend on `τ` only and are
/// cached.
#[derive(Debug, Clone)]
pub struct FpStepper {
    vgrid: PeriodicGrid1D,
    alpha: f64,
    plan: FftPlan,
    tau: f64,
    idx: Vec<[usize; 4]>,
    coef: Vec<[f64; 4]>,
    buf: Vec<Complex64>,
    out: Vec<Complex64>,
    phase: Vec<Complex64>,
    // α = 2 only: dense map from row samples to dilated Fourier coefficients
    dense: Vec<Complex64>,
}

impl FpStepper {
    pub fn new(vgrid: PeriodicGrid1D, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let n = vgrid.len();
        Ok(Self {
            vgrid,
            alpha,
            plan: FftPlan::new(n)?,
            tau: f64::NAN,
            idx: vec![[0; 4]; n],
            coef: vec![[0.0; 4]; n],
            buf: vec![Complex64::new(0.0, 0.0); n],
            out: vec![Complex64::new(0.0, 0.0); n],
            phase: vec![Complex64::new(1.0, 0.0); n],
            dense: Vec::new(),
        })
    }

    fn prepare(&mut self, tau: f64) {
        if tau == self.tau {
            return;
        }
        let g = self.vgrid;
        let n = g.len() as i64;
        let shrink = libm::exp(-tau);
        if self.alpha == 2.0 {
            // the Gaussian lives inside the box, so the truncated transform
            // can be evaluated at the dilated frequencies directly
            let nodes = g.nodes();
            let nu = g.len();
            self.dense.clear();
            self.dense.reserve(nu * nu);
            for slot in 0..nu {
                let xi = g.wavenumber(slot);
                let m = libm::exp(-0.5 * xi * xi * (1.0 - shrink * shrink));
                for &v in &nodes {
                    let th = xi * (g.start() - shrink * v);
                    self.dense.push(Complex64::new(m * libm::cos(th), m * libm::sin(th)));
                }
            }
            self.tau = tau;
            return;
        }
        let big_a = |m: i64| abs_pow(m as f64 * g.wavenumber_spacing(), self.alpha) / self.alpha;
        for slot in 0..g.len() {
            let m = g.frequency_index(slot);
            let s = m as f64 * shrink;
            let k = libm::floor(s);
            let w = lagrange4(s - k);
            let k = k as i64;
            let am = big_a(m);
            for q in 0..4 {
                let j = k - 1 + q as i64;
                if j < -n / 2 || j >= n / 2 || w[q] == 0.0 {
                    self.idx[slot][q] = 0;
                    self.coef[slot][q] = 0.0;
                    continue;
                }
                // (-1)^{m-j} converts between node-0 and centred origins
                let sign = if (m - j).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                self.idx[slot][q] = j.rem_euclid(n) as usize;
                self.coef[slot][q] = sign * w[q] * libm::exp(big_a(j) - am);
            }
        }
        self.tau = tau;
    }

    /// Advances one velocity row by effective time `tau` with drift centre `a`.
    pub fn step_row(&mut self, row: &mut [f64], tau: f64, a: f64) {
        self.prepare(tau);
        let n = self.vgrid.len();
        if !self.dense.is_empty() {
            let pull = 1.0 - libm::exp(-tau);
            for (slot, out) in self.out.iter_mut().enumerate() {
                let coefs = &self.dense[slot * n..(slot + 1) * n];
                let mut acc = Complex64::new(0.0, 0.0);
                for (c, &r) in coefs.iter().zip(row.iter()) {
                    acc += c * r;
                }
                let th = -a * self.vgrid.wavenumber(slot) * pull;
                *out = acc * Complex64::new(libm::cos(th), libm::sin(th));
            }
            self.plan.inverse(&mut self.out);
            for (r, z) in row.iter_mut().zip(&self.out) {
                *r = z.re;
            }
            return;
        }
        for (b, &r) in self.buf.iter_mut().zip(row.iter()) {
            *b = Complex64::new(r, 0.0);
        }
        self.plan.forward(&mut self.buf);
        let shifted = a != 0.0;
        if shifted {
            for (i, p) in self.phase.iter_mut().enumerate() {
                let th = -a * self.vgrid.wavenumber(i);
                *p = Complex64::new(libm::cos(th), libm::sin(th));
            }
        }
        for m in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for q in 0..4 {
                let c = self.coef[m][q];
                if c != 0.0 {
                    let j = self.idx[m][q];
                    let mut term = self.buf[j] * c;
                    if shifted {
                        term *= self.phase[j].conj();
                    }
                    acc += term;
                }
            }
            self.out[m] = if shifted { acc * self.phase[m] } else { acc };
        }
        self.plan.inverse(&mut self.out);
        for (r, z) in row.iter_mut().zip(&self.out) {
            *r = z.re;
        }
    }
}

/// Exact solution over effective time `dt_eff` of
/// `∂τ f = ∂v((v - a) f) - (-Δv)^{α/2} f` in every row, with one drift
/// centre `a` per `x` node.
pub fn fp_step_exact(f: &mut KineticField, dt_eff: f64, drift_centers: &[f64], alpha: f64) -> Result<()> {
    let mut st = FpStepper::new(f.vgrid, alpha)?;
    fp_step_with(&mut st, f, dt_eff, drift_centers)
}

fn fp_step_with(st: &mut FpStepper, f: &mut KineticField, dt_eff: f64, drift_centers: &[f64]) -> Result<()> {
    if !(dt_eff >= 0.0) {
        return Err(Error::Parameter("effective time step must be nonnegative"));
    }
    if drift_centers.len() != f.xgrid.len() {
        return Err(Error::Input("need one drift centre per x node"));
    }
    let limit = 0.25 * f.vgrid.length();
    if drift_centers.iter().any(|a| !(libm::fabs(*a) <= limit)) {
        return Err(Error::Domain("drift centre exceeds a quarter of the velocity box"));
    }
    let nv = f.vgrid.len();
    for (row, &a) in f.values.chunks_mut(nv).zip(drift_centers) {
        st.step_row(row, dt_eff, a);
    }
    Ok(())
}

/// Spectral free transport: each velocity column is shifted by `ε^{1-α} v dt`.
pub fn transport_step(f: &mut KineticField, dt: f64, eps: f64, alpha: f64) -> Result<()> {
    check_alpha(alpha)?;
    check_eps(eps)?;
    if !(dt > 0.0) {
        return Err(Error::Parameter("dt must be positive"));
    }
    let plan = FftPlan::new(f.xgrid.len())?;
    transport_with(&plan, f, dt, libm::pow(eps, 1.0 - alpha));
    Ok(())
}

fn transport_with(plan: &FftPlan, f: &mut KineticField, dt: f64, coef: f64) {
    let nx = f.xgrid.len();
    let nv = f.vgrid.len();
    let mut col = vec![Complex64::new(0.0, 0.0); nx];
    for j in 0..nv {
        let shift = coef * f.vgrid.node(j) * dt;
        if shift == 0.0 {
            continue;
        }
        for (i, c) in col.iter_mut().enumerate() {
            *c = Complex64::new(f.values[i * nv + j], 0.0);
        }
        plan.forward(&mut col);
        f.xgrid.phase_shift(&mut col, shift);
        plan.inverse(&mut col);
        for (i, c) in col.iter().enumerate() {
            f.values[i * nv + j] = c.re;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveOptions {
    /// Times at which full fields are kept.
    pub checkpoints: Vec<f64>,
    /// Clip negative values and restore the mass after each step.
    pub clip_negative: bool,
    /// Keep every `k`-th field (0 keeps none).
    pub record_stride: usize,
}

#[derive(Debug, Clone)]
pub struct KineticTrajectory {
    pub eps: f64,
    pub alpha: f64,
    /// `ρ` after every step.
    pub rho: DensityTrajectory,
    /// `∬ f² / F_ε` after every step, aligned with `rho.times`.
    pub weighted_l2: Vec<f64>,
    pub checkpoints: Vec<KineticField>,
    /// Fields kept every `record_stride` steps, including the first and last.
    pub recorded: Vec<KineticField>,
    /// Worst `min f / max f` over all steps.
    pub min_ratio: f64,
    /// Largest relative deviation of the mass from its initial value.
    pub mass_drift: f64,
    /// Largest mass removed by clipping in one step.
    pub clipped_mass: f64,
    pub final_field: KineticField,
}

/// Local equilibria `F_ε` at every `x` node of `xgrid` for the field at time `t`.
pub fn local_equilibria(
    base: &EquilibriumTable,
    xgrid: &PeriodicGrid1D,
    field: &ForceField,
    eps: f64,
    t: f64,
) -> Result<Vec<EquilibriumTable>> {
    if let Some(e) = field.uniform_value() {
        return Ok(vec![shifted_table(base, drift_shift(e, eps, base.alpha()))?]);
    }
    (0..xgrid.len())
        .map(|i| shifted_table(base, drift_shift(field.eval(t, xgrid.node(i)), eps, base.alpha())))
        .collect()
}

/// `∬ f² / w` with one weight profile shared or one per `x` node.
pub fn weighted_l2(f: &KineticField, weights: &[EquilibriumTable]) -> Result<f64> {
    let nx = f.xgrid.len();
    let mut acc = 0.0;
    for i in 0..nx {
        let w = profile_for(weights, i, nx)?;
        for (v, d) in f.row(i).iter().zip(w.density()) {
            if !(*d > 0.0) {
                return Err(Error::Domain("weight must be positive on the grid"));
            }
            acc += v * v / d;
        }
    }
    Ok(acc * f.xgrid.spacing() * f.vgrid.spacing())
}

/// Integrates from `f0` to `t_final` with the given splitting.
pub fn solve(
    f0: &KineticField,
    field: &ForceField,
    scheme: &SplitScheme,
    t_final: f64,
    opts: &SolveOptions,
) -> Result<KineticTrajectory> {
    let SplitScheme { eps, alpha, order, .. } = *scheme;
    check_alpha(alpha)?;
    check_eps(eps)?;
    if !(t_final > 0.0) {
        return Err(Error::Parameter("t_final must be positive"));
    }
    let mass0 = f0.mass();
    if libm::fabs(mass0 - 1.0) > 1e-8 {
        return Err(Error::Input("initial field must have unit mass"));
    }
    if f0.min_ratio() < -1e-8 {
        return Err(Error::Input("initial field must be nonnegative"));
    }
    let steps = libm::ceil(t_final / scheme.dt - 1e-9).max(1.0) as usize;
    let dt = t_final / steps as f64;
    let coef = libm::pow(eps, 1.0 - alpha);
    if coef * f0.vgrid.half_width() * dt > 0.5 * f0.xgrid.length() {
        return Err(Error::Resolution("transport CFL guard: eps^(1-alpha) v_max dt exceeds half the domain"));
    }
    let tau = dt / libm::pow(eps, alpha);

    let base = equilibrium_density(f0.vgrid, alpha)?;
    let weights = local_equilibria(&base, &f0.xgrid, field, eps, f0.time)?;
    let xplan = FftPlan::new(f0.xgrid.len())?;
    let mut fp = FpStepper::new(f0.vgrid, alpha)?;

    let check_steps: Vec<usize> = opts
        .checkpoints
        .iter()
        .map(|&tc| libm::round((tc - f0.time) / dt).clamp(0.0, steps as f64) as usize)
        .collect();

    let mut f = f0.clone();
    let mut traj = KineticTrajectory {
        eps,
        alpha,
        rho: DensityTrajectory::new(f.xgrid),
        weighted_l2: Vec::with_capacity(steps + 1),
        checkpoints: Vec::new(),
        recorded: Vec::new(),
        min_ratio: f.min_ratio(),
        mass_drift: 0.0,
        clipped_mass: 0.0,
        final_field: f0.clone(),
    };
    let record = |traj: &mut KineticTrajectory, f: &KineticField, s: usize| -> Result<()> {
        traj.rho.push(f.time, f.rho());
        traj.weighted_l2.push(weighted_l2(f, &weights)?);
        traj.min_ratio = traj.min_ratio.min(f.min_ratio());
        traj.mass_drift = traj.mass_drift.max(libm::fabs(f.mass() - mass0) / mass0);
        for &c in &check_steps {
            if c == s {
                traj.checkpoints.push(f.clone());
            }
        }
        if opts.record_stride > 0 && (s % opts.record_stride == 0 || s == steps) {
            traj.recorded.push(f.clone());
        }
        Ok(())
    };
    record(&mut traj, &f, 0)?;

    let xs = f.xgrid.nodes();
    let mut centers = vec![0.0; xs.len()];
    for s in 0..steps {
        let t0 = f0.time + s as f64 * dt;
        let t_field = match order {
            SplitOrder::Strang => t0 + 0.5 * dt,
            SplitOrder::Lie => t0,
        };
        for (c, &x) in centers.iter_mut().zip(&xs) {
            *c = drift_shift(field.eval(t_field, x), eps, alpha);
        }
        match order {
            SplitOrder::Strang => {
                transport_with(&xplan, &mut f, 0.5 * dt, coef);
                fp_step_with(&mut fp, &mut f, tau, &centers)?;
                transport_with(&xplan, &mut f, 0.5 * dt, coef);
            }
            SplitOrder::Lie => {
                transport_with(&xplan, &mut f, dt, coef);
                fp_step_with(&mut fp, &mut f, tau, &centers)?;
            }
        }
        if opts.clip_negative {
            let cell = f.xgrid.spacing() * f.vgrid.spacing();
            let mut removed = 0.0;
            for v in f.values.iter_mut() {
                if *v < 0.0 {
                    removed -= *v * cell;
                    *v = 0.0;
                }
            }
            if removed > 0.0 {
                let m = f.mass();
                let r = mass0 / m;
                for v in f.values.iter_mut() {
                    *v *= r;
                }
            }
            traj.clipped_mass = traj.clipped_mass.max(removed);
        }
        f.time = f0.time + (s + 1) as f64 * dt;
        record(&mut traj, &f, s + 1)?;
    }
    traj.final_field = f;
    Ok(traj)
}

/// A smooth test function `φ(t, x)` with closed-form derivatives.
pub trait TestFunction {
    fn value(&self, t: f64, x: f64) -> f64;
    fn time_derivative(&self, t: f64, x: f64) -> f64;
    fn space_derivative(&self, t: f64, x: f64) -> f64;
    /// `(-Δx)^{α/2} φ(t, ·)` at `x`.
    fn fractional_laplacian(&self, t: f64, x: f64, alpha: f64) -> f64;
    /// Interval outside which `φ` vanishes identically.
    fn time_support(&self) -> (f64, f64);
}

/// `φ ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullTest;

impl TestFunction for NullTest {
    fn value(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn time_derivative(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn space_derivative(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn fractional_laplacian(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
    fn time_support(&self) -> (f64, f64) {
        (0.0, 0.0)
    }
}

/// `χ(t) cos(k x + phase)` with the smooth bump `χ` supported on
/// `(t_start, t_end)`. `k` must be a wavenumber of the torus.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BumpCosine {
    pub t_start: f64,
    pub t_end: f64,
    pub wavenumber: f64,
    pub phase: f64,
}

impl BumpCosine {
    pub fn new(t_start: f64, t_end: f64, wavenumber: f64) -> Result<Self> {
        if !(t_end > t_start) {
            return Err(Error::Parameter("bump support must be a nonempty interval"));
        }
        Ok(Self {
            t_start,
            t_end,
            wavenumber,
            phase: 0.0,
        })
    }

    fn bump(&self, t: f64) -> (f64, f64) {
        let half = 0.5 * (self.t_end - self.t_start);
        let s = (t - 0.5 * (self.t_start + self.t_end)) / half;
        if s <= -1.0 || s >= 1.0 {
            return (0.0, 0.0);
        }
        let q = 1.0 - s * s;
        let chi = libm::exp(1.0 - 1.0 / q);
        (chi, chi * (-2.0 * s / (q * q)) / half)
    }
}

impl TestFunction for BumpCosine {
    fn value(&self, t: f64, x: f64) -> f64 {
        self.bump(t).0 * libm::cos(self.wavenumber * x + self.phase)
    }
    fn time_derivative(&self, t: f64, x: f64) -> f64 {
        self.bump(t).1 * libm::cos(self.wavenumber * x + self.phase)
    }
    fn space_derivative(&self, t: f64, x: f64) -> f64 {
        -self.wavenumber * self.bump(t).0 * libm::sin(self.wavenumber * x + self.phase)
    }
    fn fractional_laplacian(&self, t: f64, x: f64, alpha: f64) -> f64 {
        abs_pow(self.wavenumber, alpha) * self.value(t, x)
    }
    fn time_support(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }
}

fn check_coverage(times: &[f64], phi: &dyn TestFunction) -> Result<()> {
    let (a, b) = phi.time_support();
    let (Some(&t0), Some(&t1)) = (times.first(), times.last()) else {
        return Err(Error::Coverage("no stored snapshots"));
    };
    let tol = 1e-12 * (1.0 + libm::fabs(t1));
    if a < t0 - tol || b > t1 + tol {
        return Err(Error::Coverage("test function support exceeds the stored time range"));
    }
    Ok(())
}

fn trapezoid(times: &[f64], vals: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(vals.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Limit weak-form residual of a density history,
/// `∫∫ ρ (∂tφ + E ∂xφ - (-Δ)^{α/2}φ) dx dt + ∫ ρ(0) φ(0) dx`.
pub fn weak_residual_density(
    rho: &DensityTrajectory,
    field: &ForceField,
    phi: &dyn TestFunction,
    alpha: f64,
) -> Result<f64> {
    check_coverage(&rho.times, phi)?;
    let g = rho.grid.ok_or(Error::Coverage("no stored snapshots"))?;
    let xs = g.nodes();
    let h = g.spacing();
    let integrand: Vec<f64> = rho
        .times
        .iter()
        .zip(&rho.values)
        .map(|(&t, r)| {
            xs.iter()
                .zip(r)
                .map(|(&x, &ri)| {
                    ri * (phi.time_derivative(t, x) + field.eval(t, x) * phi.space_derivative(t, x)
                        - phi.fractional_laplacian(t, x, alpha))
                })
                .sum::<f64>()
                * h
        })
        .collect();
    let t0 = rho.times[0];
    let initial: f64 = xs.iter().zip(&rho.values[0]).map(|(&x, &r)| r * phi.value(t0, x)).sum::<f64>() * h;
    Ok(trapezoid(&rho.times, &integrand) + initial)
}

/// Weak residual of a kinetic trajectory against `ψ(t, x, v) = φ(t, x + s v)`.
///
/// With `shift = 0` this is [`weak_residual_density`] on the stored `ρ`
/// history. With `shift = ε` the transported test function cancels the
/// stiff terms exactly, so the result measures discretization error only;
/// it needs fields recorded with [`SolveOptions::record_stride`].
pub fn weak_residual(
    traj: &KineticTrajectory,
    field: &ForceField,
    phi: &dyn TestFunction,
    shift: f64,
) -> Result<f64> {
    if shift == 0.0 {
        return weak_residual_density(&traj.rho, field, phi, traj.alpha);
    }
    let times: Vec<f64> = traj.recorded.iter().map(|f| f.time).collect();
    check_coverage(&times, phi)?;
    let alpha = traj.alpha;
    let first = traj.recorded.first().ok_or(Error::Coverage("no recorded fields"))?;
    let xs = first.xgrid.nodes();
    let vs = first.vgrid.nodes();
    let cell = first.xgrid.spacing() * first.vgrid.spacing();
    let nv = vs.len();
    let integrand: Vec<f64> = traj
        .recorded
        .iter()
        .map(|f| {
            let t = f.time;
            let mut acc = 0.0;
            for (i, &x) in xs.iter().enumerate() {
                let e = field.eval(t, x);
                for (j, &v) in vs.iter().enumerate() {
                    let y = x + shift * v;
                    acc += f.values[i * nv + j]
                        * (phi.time_derivative(t, y) + e * phi.space_derivative(t, y)
                            - phi.fractional_laplacian(t, y, alpha));
                }
            }
            acc * cell
        })
        .collect();
    let t0 = first.time;
    let mut initial = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        for (j, &v) in vs.iter().enumerate() {
            initial += first.values[i * nv + j] * phi.value(t0, x + shift * v);
        }
    }
    Ok(trapezoid(&times, &integrand) + initial * cell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable::default_velocity_grid;
    use core::f64::consts::PI;

    fn setup(alpha: f64) -> (PeriodicGrid1D, PeriodicGrid1D, EquilibriumTable) {
        let xg = PeriodicGrid1D::new(2.0 * PI, 16).unwrap();
        let vg = default_velocity_grid(alpha).unwrap();
        let t = equilibrium_density(vg, alpha).unwrap();
        (xg, vg, t)
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let (xg, _, g) = setup(1.5);
        let rho = DensityField::from_fn(xg, |x| 1.0 + 0.3 * x.cos()).unwrap();
        let e = ForceField::sinusoidal(0.5, 1.0).unwrap();
        let feps = local_equilibria(&g, &xg, &e, 0.2, 0.0).unwrap();
        let mut f = KineticField::local_equilibrium(xg, rho.values(), &feps).unwrap();
        let before = f.values().to_vec();
        let centers: Vec<f64> = xg.nodes().iter().map(|&x| feps[xg.cell_of(x)].shift()).collect();
        fp_step_exact(&mut f, 0.7, &centers, 1.5).unwrap();
        let peak = before.iter().cloned().fold(0.0, f64::max);
        let err = before.iter().zip(f.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8 * peak, "{err}");
    }

    #[test]
    fn transport_moves_mode() {
        let xg = PeriodicGrid1D::new(2.0 * PI, 32).unwrap();
        let vg = PeriodicGrid1D::new(4.0, 8).unwrap();
        let mut f = KineticField::from_fn(xg, vg, |x, v| (1.0 + 0.5 * (2.0 * x).cos()) * (1.0 + 0.1 * v)).unwrap();
        let m0 = f.mass();
        transport_step(&mut f, 0.3, 0.5, 1.5).unwrap();
        let c = 0.5f64.powf(-0.5);
        for i in 0..32 {
            for j in 0..8 {
                let (x, v) = (xg.node(i), vg.node(j));
                let want = (1.0 + 0.5 * (2.0 * (x - c * v * 0.3)).cos()) * (1.0 + 0.1 * v);
                assert!((f.values()[i * 8 + j] - want).abs() < 1e-12);
            }
        }
        assert!((f.mass() - m0).abs() < 1e-13);
    }

    #[test]
    fn negative_step_rejected() {
        let (xg, vg, _) = setup(1.5);
        let mut f = KineticField::from_fn(xg, vg, |_, _| 1.0).unwrap();
        assert!(fp_step_exact(&mut f, -1.0, &[0.0; 16], 1.5).is_err());
    }

    #[test]
    fn bump_derivative() {
        let b = BumpCosine::new(0.2, 0.8, 1.0).unwrap();
        let h = 1e-6;
        for t in [0.3, 0.5, 0.71] {
            let fd = (b.value(t + h, 0.4) - b.value(t - h, 0.4)) / (2.0 * h);
            assert!((fd - b.time_derivative(t, 0.4)).abs() < 1e-7);
        }
        assert_eq!(b.value(0.1, 0.0), 0.0);
    }
}
