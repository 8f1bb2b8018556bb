//! The limit equation `∂t ρ + ∂x(Eρ) + (-Δ)^{α/2} ρ = 0` on a periodic domain.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::fft::FftPlan;
use crate::field::ForceField;
use crate::fraclap::symbol_from_k2;
use crate::grid::PeriodicGrid1D;
use crate::{check_alpha, Error, Result};

/// Relative mass tolerance enforced on every [`DensityField`].
pub const MASS_TOLERANCE: f64 = 1e-10;

/// A probability density on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: PeriodicGrid1D,
    values: Vec<f64>,
    time: f64,
}

impl DensityField {
    /// Requires finite values with unit mass.
    pub fn new(grid: PeriodicGrid1D, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input("density length does not match its grid"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("density values must be finite"));
        }
        let mass = values.iter().sum::<f64>() * grid.spacing();
        if libm::fabs(mass - 1.0) > MASS_TOLERANCE {
            return Err(Error::Input("density must have unit mass"));
        }
        Ok(Self { grid, values, time })
    }

    /// Rescales nonnegative values to unit mass.
    pub fn normalized(grid: PeriodicGrid1D, mut values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input("density length does not match its grid"));
        }
        let mass = values.iter().sum::<f64>() * grid.spacing();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Input("density must have positive finite mass"));
        }
        for v in values.iter_mut() {
            *v /= mass;
        }
        Self::new(grid, values, time)
    }

    pub fn from_fn(grid: PeriodicGrid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::normalized(grid, grid.nodes().into_iter().map(f).collect(), 0.0)
    }

    pub fn grid(&self) -> &PeriodicGrid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.spacing()
    }

    pub fn l1_distance(&self, other: &DensityField) -> Result<f64> {
        self.distance(other, libm::fabs)
    }

    pub fn l2_distance(&self, other: &DensityField) -> Result<f64> {
        self.distance(other, |d| d * d).map(libm::sqrt)
    }

    pub fn linf_distance(&self, other: &DensityField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Input("densities live on different grids"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max(libm::fabs(a - b))))
    }

    fn distance(&self, other: &DensityField, g: impl Fn(f64) -> f64) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Input("densities live on different grids"));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| g(a - b)).sum::<f64>() * self.grid.spacing())
    }

    /// Smallest value divided by the largest.
    pub fn min_ratio(&self) -> f64 {
        min_over_max(&self.values)
    }

    /// The same profile translated by `shift` (exact on the torus).
    pub fn translated(&self, shift: f64) -> Result<Self> {
        let plan = FftPlan::new(self.grid.len())?;
        let mut spec = crate::fft::forward_real(&plan, &self.values);
        self.grid.phase_shift(&mut spec, shift);
        Ok(Self {
            grid: self.grid,
            values: crate::fft::inverse_real(&plan, spec),
            time: self.time,
        })
    }
}

pub(crate) fn min_over_max(v: &[f64]) -> f64 {
    let (mn, mx) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if mx > 0.0 {
        mn / mx
    } else {
        0.0
    }
}

/// Densities at a sequence of times on a common grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DensityTrajectory {
    pub grid: Option<PeriodicGrid1D>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl DensityTrajectory {
    pub fn new(grid: PeriodicGrid1D) -> Self {
        Self {
            grid: Some(grid),
            times: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, values: Vec<f64>) {
        self.times.push(t);
        self.values.push(values);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn snapshot(&self, i: usize) -> Result<DensityField> {
        let grid = self.grid.ok_or(Error::Input("empty trajectory"))?;
        let v = self.values.get(i).ok_or(Error::Input("snapshot index out of range"))?;
        DensityField::new(grid, v.clone(), self.times[i])
    }

    pub fn last(&self) -> Result<DensityField> {
        if self.is_empty() {
            return Err(Error::Input("empty trajectory"));
        }
        self.snapshot(self.len() - 1)
    }

    /// Snapshot whose time is closest to `t`.
    pub fn nearest(&self, t: f64) -> Result<DensityField> {
        if self.is_empty() {
            return Err(Error::Input("empty trajectory"));
        }
        let i = (0..self.len())
            .min_by(|&a, &b| libm::fabs(self.times[a] - t).total_cmp(&libm::fabs(self.times[b] - t)))
            .unwrap_or(0);
        self.snapshot(i)
    }

    /// Largest relative mass deviation from the first snapshot.
    pub fn mass_drift(&self) -> f64 {
        let Some(g) = self.grid else { return 0.0 };
        let h = g.spacing();
        let m0 = self.values.first().map(|v| v.iter().sum::<f64>() * h).unwrap_or(1.0);
        self.values
            .iter()
            .map(|v| libm::fabs(v.iter().sum::<f64>() * h - m0) / m0)
            .fold(0.0, f64::max)
    }

    /// Worst `min/max` ratio over all snapshots.
    pub fn min_ratio(&self) -> f64 {
        self.values.iter().map(|v| min_over_max(v)).fold(f64::INFINITY, f64::min)
    }
}

/// Inverse transform of `exp(-t|k|^α)` centred at `x = 0`.
pub fn stable_kernel_oracle(t: f64, alpha: f64, xgrid: PeriodicGrid1D) -> Result<DensityField> {
    check_alpha(alpha)?;
    if !(t > 0.0) {
        return Err(Error::Parameter("kernel time must be positive"));
    }
    let n = xgrid.len();
    let plan = FftPlan::new(n)?;
    let mut spec: Vec<Complex64> = (0..n)
        .map(|i| {
            let k = xgrid.wavenumber(i);
            let sign = if xgrid.frequency_index(i) % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(sign * libm::exp(-t * symbol_from_k2(k * k, alpha)), 0.0)
        })
        .collect();
    plan.inverse(&mut spec);
    let scale = n as f64 / xgrid.length();
    DensityField::normalized(xgrid, spec.iter().map(|z| z.re * scale).collect(), t)
}

/// Cauchy kernel `t / (π(x² + t²))` summed over `2·images + 1` periods.
pub fn cauchy_periodized(t: f64, x: f64, length: f64, images: i32) -> f64 {
    (-images..=images)
        .map(|m| {
            let y = x + m as f64 * length;
            t / (PI * (y * y + t * t))
        })
        .sum()
}

/// The Cauchy kernel summed over all periods, in closed form.
pub fn cauchy_torus(t: f64, x: f64, length: f64) -> f64 {
    let a = 2.0 * PI * t / length;
    let b = 2.0 * PI * x / length;
    libm::sinh(a) / (length * (libm::cosh(a) - libm::cos(b)))
}

/// Heat kernel of variance `2t` summed over `2·images + 1` periods.
pub fn heat_periodized(t: f64, x: f64, length: f64, images: i32) -> f64 {
    (-images..=images)
        .map(|m| {
            let y = x + m as f64 * length;
            libm::exp(-y * y / (4.0 * t)) / libm::sqrt(4.0 * PI * t)
        })
        .sum()
}

/// Exact solution of the force-free equation: `ρ0` convolved with the
/// stable kernel, computed as a Fourier product.
pub fn fractional_heat(rho0: &DensityField, t: f64, alpha: f64) -> Result<DensityField> {
    check_alpha(alpha)?;
    let g = rho0.grid;
    let plan = FftPlan::new(g.len())?;
    let mut spec = crate::fft::forward_real(&plan, &rho0.values);
    for (i, z) in spec.iter_mut().enumerate() {
        let k = g.wavenumber(i);
        *z *= libm::exp(-t * symbol_from_k2(k * k, alpha));
    }
    DensityField::new(g, crate::fft::inverse_real(&plan, spec), rho0.time + t)
}

/// Strang splitting: half exact diffusion, advection, half diffusion. Every
/// step is recorded.
pub fn solve_macro(
    rho0: &DensityField,
    field: &ForceField,
    t_final: f64,
    dt: f64,
    alpha: f64,
) -> Result<DensityTrajectory> {
    check_alpha(alpha)?;
    if !(dt > 0.0 && t_final > 0.0) {
        return Err(Error::Parameter("dt and t_final must be positive"));
    }
    let g = rho0.grid;
    let steps = libm::ceil(t_final / dt - 1e-9).max(1.0) as usize;
    let dt = t_final / steps as f64;
    if field.sup_norm() * dt > 0.5 * g.length() {
        return Err(Error::Resolution("advection CFL guard: sup|E| dt exceeds half the domain"));
    }
    if field.sup_derivative() * dt >= 1.0 {
        return Err(Error::Resolution("advection guard: dt ||E'|| must stay below 1"));
    }
    let plan = FftPlan::new(g.len())?;
    let half: Vec<f64> = (0..g.len())
        .map(|i| {
            let k = g.wavenumber(i);
            libm::exp(-0.5 * dt * symbol_from_k2(k * k, alpha))
        })
        .collect();
    let mut adv = Advector::new(g);

    let mut traj = DensityTrajectory::new(g);
    let mut rho = rho0.values.clone();
    let mut t = rho0.time;
    traj.push(t, rho.clone());
    for s in 0..steps {
        diffuse(&plan, &mut rho, &half);
        match field.uniform_value() {
            Some(e) => {
                let mut spec = crate::fft::forward_real(&plan, &rho);
                g.phase_shift(&mut spec, e * dt);
                rho = crate::fft::inverse_real(&plan, spec);
            }
            None => adv.step(&mut rho, field, t, dt),
        }
        diffuse(&plan, &mut rho, &half);
        t = rho0.time + (s + 1) as f64 * dt;
        traj.push(t, rho.clone());
    }
    Ok(traj)
}

fn diffuse(plan: &FftPlan, rho: &mut Vec<f64>, mult: &[f64]) {
    let mut spec = crate::fft::forward_real(plan, rho);
    for (z, m) in spec.iter_mut().zip(mult) {
        *z *= *m;
    }
    *rho = crate::fft::inverse_real(plan, spec);
}

/// Conservative semi-Lagrangian advection of cell averages through the
/// cumulative mass, interpolated with a monotone cubic Hermite.
struct Advector {
    grid: PeriodicGrid1D,
    m: Vec<f64>,
    d: Vec<f64>,
    out: Vec<f64>,
}

impl Advector {
    fn new(grid: PeriodicGrid1D) -> Self {
        let n = grid.len();
        Self {
            grid,
            m: vec![0.0; n + 1],
            d: vec![0.0; n],
            out: vec![0.0; n + 1],
        }
    }

    fn step(&mut self, rho: &mut [f64], field: &ForceField, t: f64, dt: f64) {
        let g = self.grid;
        let n = g.len();
        let h = g.spacing();
        // cumulative mass at cell edges x_start - h/2 + k h
        self.m[0] = 0.0;
        for k in 0..n {
            self.m[k + 1] = self.m[k] + rho[k] * h;
        }
        let mass = self.m[n];
        let at = |k: i64| -> f64 {
            let q = k.rem_euclid(n as i64);
            let wraps = (k - q) / n as i64;
            self.m[q as usize] + wraps as f64 * mass
        };
        for k in 0..n as i64 {
            let mut dk = (-at(k + 2) + 8.0 * at(k + 1) - 8.0 * at(k - 1) + at(k - 2)) / (12.0 * h);
            // Hyman filter on the secants rho[k-1], rho[k]
            let sl = rho[(k - 1).rem_euclid(n as i64) as usize];
            let sr = rho[k as usize];
            let cap = 3.0 * sl.min(sr);
            dk = dk.clamp(0.0, cap.max(0.0));
            self.d[k as usize] = dk;
        }

        let edge0 = g.start() - 0.5 * h;
        let tm = t + 0.5 * dt;
        for k in 0..=n {
            let x = edge0 + k as f64 * h;
            let xm = x - 0.5 * dt * field.eval(tm, x);
            let xd = x - dt * field.eval(tm, xm);
            self.out[k] = self.eval_cumulative((xd - edge0) / h, mass);
        }
        for (i, r) in rho.iter_mut().enumerate() {
            *r = (self.out[i + 1] - self.out[i]) / h;
        }
    }

    /// Cumulative mass at edge coordinate `q` (in cells from the first edge).
    fn eval_cumulative(&self, q: f64, mass: f64) -> f64 {
        let n = self.grid.len() as i64;
        let h = self.grid.spacing();
        let kf = libm::floor(q);
        let s = q - kf;
        let k = kf as i64;
        let kk = k.rem_euclid(n);
        let wraps = ((k - kk) / n) as f64;
        let k0 = kk as usize;
        let k1 = ((kk + 1) % n) as usize;
        let m0 = self.m[k0];
        let m1 = self.m[k0 + 1];
        let d0 = self.d[k0] * h;
        let d1 = self.d[k1] * h;
        let s2 = s * s;
        let s3 = s2 * s;
        let val = (2.0 * s3 - 3.0 * s2 + 1.0) * m0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * m1
            + (s3 - s2) * d1;
        val + wraps * mass
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> PeriodicGrid1D {
        PeriodicGrid1D::new(2.0 * PI, 128).unwrap()
    }

    #[test]
    fn unit_mass_enforced() {
        let g = grid();
        assert!(DensityField::new(g, vec![1.0; 128], 0.0).is_err());
        let d = DensityField::from_fn(g, |x| 1.0 + 0.5 * x.cos()).unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn force_free_matches_exact_product() {
        let g = grid();
        let r0 = DensityField::from_fn(g, |x| 1.0 + 0.5 * x.cos()).unwrap();
        let traj = solve_macro(&r0, &ForceField::zero(), 1.0, 0.01, 1.5).unwrap();
        let exact = fractional_heat(&r0, 1.0, 1.5).unwrap();
        assert!(traj.last().unwrap().linf_distance(&exact).unwrap() < 1e-8);
    }

    #[test]
    fn advection_preserves_mass_and_sign() {
        let g = grid();
        let r0 = DensityField::from_fn(g, |x| (-(x * x) * 4.0).exp()).unwrap();
        let e = ForceField::sinusoidal(0.5, 1.0).unwrap();
        let traj = solve_macro(&r0, &e, 1.0, 0.01, 1.5).unwrap();
        assert!(traj.mass_drift() < 1e-12);
        assert!(traj.min_ratio() > -1e-8);
    }

    #[test]
    fn guards() {
        let g = grid();
        let r0 = DensityField::from_fn(g, |x| 1.0 + 0.5 * x.cos()).unwrap();
        let e = ForceField::sinusoidal(2.0, 1.0).unwrap();
        assert!(matches!(solve_macro(&r0, &e, 1.0, 0.6, 1.5), Err(Error::Resolution(_))));
    }
}
