//! Quadratic entropy, dissipation and micro–macro diagnostics.

use alloc::vec::Vec;

use crate::grid::GridFunction;
use crate::kinetic::{profile_for, weighted_l2, KineticField};
use crate::math::{linear_fit, riemann_zeta};
use crate::stable::EquilibriumTable;
use crate::{check_alpha, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationOptions {
    /// Use every `decimation`-th velocity node (1 = full resolution).
    pub decimation: usize,
}

impl Default for DissipationOptions {
    fn default() -> Self {
        Self { decimation: 4 }
    }
}

impl DissipationOptions {
    pub fn full_resolution() -> Self {
        Self { decimation: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EntropyReport {
    /// `∬ f² / F_ε`.
    pub weighted_l2: f64,
    pub dissipation: f64,
    /// Dissipation minus `∬ (f - ρF_ε)² / F_ε`.
    pub poincare_gap: f64,
    /// `∬ r² / G_α` for the micro residue `r`.
    pub residue_norm: f64,
    pub time: f64,
}

/// Per-row quantities on the decimated velocity grid.
struct Row {
    v: Vec<f64>,
    g: Vec<f64>,
    w: Vec<f64>,
    h: f64,
    rho: f64,
}

fn decimated_row(f: &KineticField, weight: &EquilibriumTable, i: usize, step: usize) -> Result<Row> {
    let vg = f.vgrid();
    let row = f.row(i);
    let dens = weight.density();
    let rho = row.iter().sum::<f64>() * vg.spacing();
    let h = vg.spacing() * step as f64;
    let mut v = Vec::new();
    let mut g = Vec::new();
    let mut w = Vec::new();
    for j in (0..vg.len()).step_by(step) {
        let d = dens[j];
        if !(d > 0.0) {
            return Err(Error::Domain("equilibrium must be positive on the grid"));
        }
        v.push(vg.node(j));
        g.push(row[j] / d);
        w.push(d);
    }
    let mass = w.iter().sum::<f64>() * h;
    for x in w.iter_mut() {
        *x /= mass;
    }
    Ok(Row { v, g, w, h, rho })
}

fn row_dissipation(r: &Row, alpha: f64, kernel: &[f64]) -> f64 {
    let n = r.v.len();
    if alpha >= 2.0 {
        let mut acc = 0.0;
        for a in 0..n - 1 {
            let dg = (r.g[a + 1] - r.g[a]) / r.h;
            acc += dg * dg * 0.5 * (r.w[a] + r.w[a + 1]) * r.h;
        }
        return acc;
    }
    let mut acc = 0.0;
    for a in 0..n {
        let mut inner = 0.0;
        for b in 0..n {
            if a != b {
                let d = r.g[a] - r.g[b];
                inner += d * d * kernel[a.abs_diff(b)];
            }
        }
        acc += inner * r.w[a];
    }
    acc *= 0.5 * r.h * r.h;
    // w outside the box, where f/F is taken at its mean ρ
    let lo = r.v[0] - 0.5 * r.h;
    let hi = r.v[n - 1] + 0.5 * r.h;
    let mut tail = 0.0;
    for a in 0..n {
        let t = (libm::pow(hi - r.v[a], -alpha) + libm::pow(r.v[a] - lo, -alpha)) / alpha;
        let d = r.g[a] - r.rho;
        tail += r.w[a] * d * d * t;
    }
    acc + 0.5 * r.h * tail
}

/// `|r|^{-1-α}` at offsets `k h`, with the nearest neighbour boosted by
/// `1 + |ζ(α-1)|` to restore the excised near field.
fn kernel_table(n: usize, h: f64, alpha: f64) -> Vec<f64> {
    let boost = 1.0 + libm::fabs(riemann_zeta(alpha - 1.0));
    (0..n)
        .map(|k| match k {
            0 => 0.0,
            1 => boost * libm::pow(h, -1.0 - alpha),
            _ => libm::pow(k as f64 * h, -1.0 - alpha),
        })
        .collect()
}

/// `D_ε = ½ ∭ (f(v)/F(v) - f(w)/F(w))² F(v) / |v - w|^{1+α} dw dv dx`, or
/// `∬ |∂v (f/F)|² F` at `α = 2`.
pub fn dissipation(f: &KineticField, feps: &[EquilibriumTable], alpha: f64) -> Result<f64> {
    dissipation_with(f, feps, alpha, DissipationOptions::default())
}

pub fn dissipation_with(f: &KineticField, feps: &[EquilibriumTable], alpha: f64, opts: DissipationOptions) -> Result<f64> {
    Ok(poincare_gap_with(f, feps, alpha, opts)?.0)
}

/// `(D_ε, ∬ (f - ρF_ε)² / F_ε)` on the same quadrature.
pub fn poincare_gap(f: &KineticField, feps: &[EquilibriumTable], alpha: f64) -> Result<(f64, f64)> {
    poincare_gap_with(f, feps, alpha, DissipationOptions::default())
}

pub fn poincare_gap_with(
    f: &KineticField,
    feps: &[EquilibriumTable],
    alpha: f64,
    opts: DissipationOptions,
) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    let step = opts.decimation.max(1);
    let nx = f.xgrid().len();
    let n = f.vgrid().len().div_ceil(step);
    let h = f.vgrid().spacing() * step as f64;
    let kernel = kernel_table(n, h, alpha);
    let mut d = 0.0;
    let mut lower = 0.0;
    for i in 0..nx {
        let r = decimated_row(f, profile_for(feps, i, nx)?, i, step)?;
        d += row_dissipation(&r, alpha, &kernel);
        lower += r
            .g
            .iter()
            .zip(&r.w)
            .map(|(g, w)| w * (g - r.rho) * (g - r.rho))
            .sum::<f64>()
            * r.h;
    }
    let hx = f.xgrid().spacing();
    Ok((d * hx, lower * hx))
}

/// `∬ f² / w`.
pub fn weighted_entropy(f: &KineticField, weight: &[EquilibriumTable]) -> Result<f64> {
    weighted_l2(f, weight)
}

/// `f = ρ F_ε + ε^{α/2} r`.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroMacro {
    pub rho: GridFunction,
    pub residue: KineticField,
    /// `ε^{α/2}`.
    pub scale: f64,
    equilibrium: KineticField,
}

impl MicroMacro {
    pub fn reconstruct(&self) -> Vec<f64> {
        self.equilibrium
            .values()
            .iter()
            .zip(self.residue.values())
            .map(|(e, r)| e + self.scale * r)
            .collect()
    }
}

pub fn micro_macro_decompose(f: &KineticField, feps: &[EquilibriumTable], eps: f64, alpha: f64) -> Result<MicroMacro> {
    check_alpha(alpha)?;
    if !(eps > 0.0) {
        return Err(Error::Parameter("eps must be positive"));
    }
    let rho = f.rho();
    let eq = KineticField::local_equilibrium(*f.xgrid(), &rho, feps)?;
    let scale = libm::pow(eps, 0.5 * alpha);
    let res: Vec<f64> = f.values().iter().zip(eq.values()).map(|(a, b)| (a - b) / scale).collect();
    let residue = KineticField::new(*f.xgrid(), *f.vgrid(), res, f.time())?;
    Ok(MicroMacro {
        rho: GridFunction::new(alloc::vec![*f.xgrid()], rho)?,
        residue,
        scale,
        equilibrium: eq,
    })
}

pub fn entropy_report(
    f: &KineticField,
    feps: &[EquilibriumTable],
    g_alpha: &EquilibriumTable,
    eps: f64,
    alpha: f64,
    opts: DissipationOptions,
) -> Result<EntropyReport> {
    let (d, lower) = poincare_gap_with(f, feps, alpha, opts)?;
    let mm = micro_macro_decompose(f, feps, eps, alpha)?;
    Ok(EntropyReport {
        weighted_l2: weighted_l2(f, feps)?,
        dissipation: d,
        poincare_gap: d - lower,
        residue_norm: weighted_l2(&mm.residue, core::slice::from_ref(g_alpha))?,
        time: f.time(),
    })
}

/// `∫ ‖r_ε(t)‖²_{G_α^{-1}} dt` by the trapezoid rule over stored fields.
pub fn time_integrated_residue(
    fields: &[KineticField],
    feps: &[EquilibriumTable],
    g_alpha: &EquilibriumTable,
    eps: f64,
    alpha: f64,
) -> Result<f64> {
    if fields.len() < 2 {
        return Err(Error::Coverage("need at least two stored fields"));
    }
    let mut prev: Option<(f64, f64)> = None;
    let mut acc = 0.0;
    for f in fields {
        let mm = micro_macro_decompose(f, feps, eps, alpha)?;
        let r = weighted_l2(&mm.residue, core::slice::from_ref(g_alpha))?;
        if let Some((t0, r0)) = prev {
            acc += 0.5 * (f.time() - t0) * (r + r0);
        }
        prev = Some((f.time(), r));
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GronwallCertificate {
    /// Fitted exponential growth rate of `∬ f² / F_ε`.
    pub rate: f64,
    /// `ε^{α-1} ‖E‖_{W^{1,∞}}`.
    pub ceiling_scale: f64,
    /// `rate / ceiling_scale`, the measured constant (`None` when the
    /// ceiling vanishes).
    pub constant: Option<f64>,
}

/// Least-squares growth rate of `log W(t)`.
pub fn gronwall_certificate(
    times: &[f64],
    weighted_l2: &[f64],
    eps: f64,
    alpha: f64,
    field_w1inf: f64,
) -> Result<GronwallCertificate> {
    if times.len() < 5 || weighted_l2.len() != times.len() {
        return Err(Error::Coverage("need at least five entropy checkpoints"));
    }
    if weighted_l2.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Input("entropy values must be positive"));
    }
    let ys: Vec<f64> = weighted_l2.iter().map(|w| libm::log(*w)).collect();
    let (rate, _) = linear_fit(times, &ys).ok_or(Error::Input("degenerate checkpoint times"))?;
    let ceiling_scale = libm::pow(eps, alpha - 1.0) * field_w1inf;
    Ok(GronwallCertificate {
        rate,
        ceiling_scale,
        constant: (ceiling_scale > 0.0).then(|| rate / ceiling_scale),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid1D;
    use crate::stable::{default_velocity_grid, equilibrium_density};
    use core::f64::consts::PI;

    fn table(alpha: f64) -> EquilibriumTable {
        equilibrium_density(default_velocity_grid(alpha).unwrap(), alpha).unwrap()
    }

    #[test]
    fn equilibrium_has_no_dissipation() {
        for alpha in [1.5, 2.0] {
            let g = table(alpha);
            let xg = PeriodicGrid1D::new(2.0 * PI, 8).unwrap();
            let rho: Vec<f64> = xg.nodes().iter().map(|x| 1.0 + 0.2 * x.sin()).collect();
            let f = KineticField::local_equilibrium(xg, &rho, core::slice::from_ref(&g)).unwrap();
            let (d, lower) = poincare_gap(&f, core::slice::from_ref(&g), alpha).unwrap();
            assert!(d.abs() < 1e-20 && lower.abs() < 1e-20, "{d} {lower}");
        }
    }

    #[test]
    fn perturbation_gives_positive_gap() {
        let g = table(1.5);
        let xg = PeriodicGrid1D::new(2.0 * PI, 8).unwrap();
        let vg = *g.vgrid();
        let dens = g.density().to_vec();
        let f = KineticField::from_fn(xg, vg, |_, v| {
            let j = vg.cell_of(v);
            dens[j] * (1.0 + 0.1 * v.sin())
        })
        .unwrap();
        let (d, lower) = poincare_gap(&f, core::slice::from_ref(&g), 1.5).unwrap();
        assert!(d > lower && lower > 0.0);
    }

    #[test]
    fn gronwall_needs_five_points() {
        assert!(matches!(
            gronwall_certificate(&[0.0, 1.0], &[1.0, 1.0], 0.5, 1.5, 1.0),
            Err(Error::Coverage(_))
        ));
        let t = [0.0, 0.25, 0.5, 0.75, 1.0];
        let w: Vec<f64> = t.iter().map(|s: &f64| (0.3 * s).exp()).collect();
        let c = gronwall_certificate(&t, &w, 0.25, 2.0, 1.0).unwrap();
        assert!((c.rate - 0.3).abs() < 1e-12);
        assert!((c.ceiling_scale - 0.25).abs() < 1e-15);
    }
}
