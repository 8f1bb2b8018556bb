use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Error, Result};

/// Uniform periodic grid with nodes `-L/2 + i L/n`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PeriodicGrid1D {
    length: f64,
    n: usize,
}

impl PeriodicGrid1D {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Parameter("grid length must be positive and finite"));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Parameter("grid size must be a power of two, at least 8"));
        }
        Ok(Self { length, n })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn start(&self) -> f64 {
        -0.5 * self.length
    }

    pub fn node(&self, i: usize) -> f64 {
        self.start() + i as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Index of the node at the origin.
    pub fn center_index(&self) -> usize {
        self.n / 2
    }

    /// Largest node magnitude, `L/2`.
    pub fn half_width(&self) -> f64 {
        0.5 * self.length
    }

    /// Signed integer frequency of FFT slot `i` (Nyquist reported as `-n/2`).
    pub fn frequency_index(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Angular wavenumber `2 pi m / L` of FFT slot `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * PI * self.frequency_index(i) as f64 / self.length
    }

    /// Spacing of the dual (Fourier) grid.
    pub fn wavenumber_spacing(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.spacing()
    }

    /// The Fourier-side grid: `n` wavenumbers spanning `[-pi/h, pi/h)`.
    pub fn dual(&self) -> PeriodicGrid1D {
        PeriodicGrid1D {
            length: 2.0 * PI / self.spacing(),
            n: self.n,
        }
    }

    /// Wraps `x` into `[-L/2, L/2)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let shifted = libm::fmod(x - self.start(), self.length);
        let shifted = if shifted < 0.0 { shifted + self.length } else { shifted };
        let w = self.start() + shifted;
        if w >= self.half_width() {
            self.start()
        } else {
            w
        }
    }

    /// Index of the cell (centered on a node) containing the periodic point `x`.
    pub fn cell_of(&self, x: f64) -> usize {
        let r = libm::floor((x - self.start()) / self.spacing() + 0.5) as i64;
        r.rem_euclid(self.n as i64) as usize
    }

    /// Shortest signed periodic displacement from `a` to `b`.
    pub fn periodic_delta(&self, a: f64, b: f64) -> f64 {
        let mut d = libm::fmod(b - a, self.length);
        if d >= self.half_width() {
            d -= self.length;
        } else if d < -self.half_width() {
            d += self.length;
        }
        d
    }

    /// Multiplies the FFT-ordered spectrum by `e^{-i k shift}`, i.e. translates
    /// the sampled function by `shift`. The Nyquist slot keeps only the real
    /// part of the phase so real data stays real.
    pub fn phase_shift(&self, spectrum: &mut [num_complex::Complex64], shift: f64) {
        let nyq = self.n / 2;
        for (i, z) in spectrum.iter_mut().enumerate() {
            let theta = -self.wavenumber(i) * shift;
            if i == nyq {
                *z *= libm::cos(theta);
            } else {
                *z *= num_complex::Complex64::new(libm::cos(theta), libm::sin(theta));
            }
        }
    }
}

/// Samples of a real function on a product of periodic grids, row-major with
/// the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    axes: Vec<PeriodicGrid1D>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(axes: Vec<PeriodicGrid1D>, values: Vec<f64>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Input("grid function needs at least one axis"));
        }
        let expected: usize = axes.iter().map(|g| g.len()).product();
        if values.len() != expected {
            return Err(Error::Input("value count does not match the grid shape"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("grid function values must be finite"));
        }
        Ok(Self { axes, values })
    }

    pub fn from_fn(grid: PeriodicGrid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().into_iter().map(f).collect();
        Self::new(alloc::vec![grid], values)
    }

    pub fn from_fn_2d(gx: PeriodicGrid1D, gy: PeriodicGrid1D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(gx.len() * gy.len());
        for i in 0..gx.len() {
            for j in 0..gy.len() {
                values.push(f(gx.node(i), gy.node(j)));
            }
        }
        Self::new(alloc::vec![gx, gy], values)
    }

    pub fn axes(&self) -> &[PeriodicGrid1D] {
        &self.axes
    }

    /// The single axis of a one-dimensional function.
    pub fn grid(&self) -> Result<PeriodicGrid1D> {
        match self.axes.as_slice() {
            [g] => Ok(*g),
            _ => Err(Error::Input("expected a one-dimensional grid function")),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|g| g.spacing()).product()
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| libm::fabs(*v)).sum::<f64>() * self.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v * v).sum::<f64>() * self.cell_volume())
    }

    /// Grid quadrature of the product with another function on the same grid.
    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        if self.axes != other.axes {
            return Err(Error::Input("grid functions live on different grids"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.cell_volume())
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            axes: self.axes.clone(),
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_and_wavenumbers() {
        let g = PeriodicGrid1D::new(2.0 * PI, 8).unwrap();
        assert!((g.node(0) + PI).abs() < 1e-15);
        assert_eq!(g.center_index(), 4);
        assert!(g.node(4).abs() < 1e-15);
        assert_eq!(g.frequency_index(3), 3);
        assert_eq!(g.frequency_index(4), -4);
        assert!((g.wavenumber(7) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(PeriodicGrid1D::new(1.0, 4).is_err());
        assert!(PeriodicGrid1D::new(1.0, 12).is_err());
        assert!(PeriodicGrid1D::new(-1.0, 16).is_err());
    }

    #[test]
    fn wrap_and_cells() {
        let g = PeriodicGrid1D::new(10.0, 16).unwrap();
        assert!((g.wrap(5.0) + 5.0).abs() < 1e-12);
        assert!((g.wrap(12.5) - 2.5).abs() < 1e-12);
        assert_eq!(g.cell_of(0.0), 8);
        assert_eq!(g.cell_of(10.0), 8);
        assert_eq!(g.cell_of(4.9), 0);
        assert!((g.periodic_delta(4.5, -4.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_rejected() {
        let g = PeriodicGrid1D::new(1.0, 8).unwrap();
        assert!(GridFunction::from_fn(g, |x| if x > 0.2 { f64::NAN } else { 0.0 }).is_err());
    }
}
