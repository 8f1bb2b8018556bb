//! External force fields `E(t, x)` on the periodic spatial domain.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::grid::PeriodicGrid1D;
use crate::math::lagrange4;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum FieldKind {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude * sin(wavenumber * x + phase)`.
    Sinusoidal {
        amplitude: f64,
        wavenumber: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        phase: f64,
    },
    /// Periodic samples on a grid, interpolated with four-point Lagrange.
    Tabulated {
        grid: PeriodicGrid1D,
        values: Vec<f64>,
    },
}

/// A time-independent field with its recorded `W^{1,inf}` bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceField {
    kind: FieldKind,
    sup: f64,
    sup_derivative: f64,
}

impl ForceField {
    pub fn new(kind: FieldKind) -> Result<Self> {
        let (sup, sup_derivative) = match &kind {
            FieldKind::Zero => (0.0, 0.0),
            FieldKind::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::Parameter("field value must be finite"));
                }
                (libm::fabs(*value), 0.0)
            }
            FieldKind::Sinusoidal {
                amplitude,
                wavenumber,
                phase,
            } => {
                if !(amplitude.is_finite() && wavenumber.is_finite() && phase.is_finite()) {
                    return Err(Error::Parameter("field parameters must be finite"));
                }
                let a = libm::fabs(*amplitude);
                (a, a * libm::fabs(*wavenumber))
            }
            FieldKind::Tabulated { grid, values } => {
                if values.len() != grid.len() {
                    return Err(Error::Input("tabulated field length does not match its grid"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Input("tabulated field values must be finite"));
                }
                let n = values.len();
                let h = grid.spacing();
                let sup = values.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
                let dsup = (0..n).fold(0.0f64, |m, i| {
                    m.max(libm::fabs(values[(i + 1) % n] - values[i]) / h)
                });
                (sup, dsup)
            }
        };
        Ok(Self {
            kind,
            sup,
            sup_derivative,
        })
    }

    pub fn zero() -> Self {
        Self {
            kind: FieldKind::Zero,
            sup: 0.0,
            sup_derivative: 0.0,
        }
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(FieldKind::Constant { value })
    }

    pub fn sinusoidal(amplitude: f64, wavenumber: f64) -> Result<Self> {
        Self::new(FieldKind::Sinusoidal {
            amplitude,
            wavenumber,
            phase: 0.0,
        })
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    /// `||E||_inf`.
    pub fn sup_norm(&self) -> f64 {
        self.sup
    }

    /// `||d_x E||_inf`.
    pub fn sup_derivative(&self) -> f64 {
        self.sup_derivative
    }

    /// `||E||_{W^{1,inf}}`.
    pub fn w1inf_norm(&self) -> f64 {
        self.sup + self.sup_derivative
    }

    /// The field value when it does not depend on `x`.
    pub fn uniform_value(&self) -> Option<f64> {
        match self.kind {
            FieldKind::Zero => Some(0.0),
            FieldKind::Constant { value } => Some(value),
            _ => None,
        }
    }

    pub fn eval(&self, _t: f64, x: f64) -> f64 {
        match &self.kind {
            FieldKind::Zero => 0.0,
            FieldKind::Constant { value } => *value,
            FieldKind::Sinusoidal {
                amplitude,
                wavenumber,
                phase,
            } => amplitude * libm::sin(wavenumber * x + phase),
            FieldKind::Tabulated { grid, values } => {
                let n = values.len() as i64;
                let q = (x - grid.start()) / grid.spacing();
                let k = libm::floor(q);
                let w = lagrange4(q - k);
                let k = k as i64;
                (0..4)
                    .map(|j| w[j] * values[(k - 1 + j as i64).rem_euclid(n) as usize])
                    .sum()
            }
        }
    }

    /// `d_x E(t, x)`.
    pub fn derivative(&self, t: f64, x: f64) -> f64 {
        match &self.kind {
            FieldKind::Zero | FieldKind::Constant { .. } => 0.0,
            FieldKind::Sinusoidal {
                amplitude,
                wavenumber,
                phase,
            } => amplitude * wavenumber * libm::cos(wavenumber * x + phase),
            FieldKind::Tabulated { grid, .. } => {
                let h = 1e-4 * grid.spacing();
                (self.eval(t, x + h) - self.eval(t, x - h)) / (2.0 * h)
            }
        }
    }

    /// Field values at every node of `grid`.
    pub fn sample(&self, t: f64, grid: &PeriodicGrid1D) -> Vec<f64> {
        (0..grid.len()).map(|i| self.eval(t, grid.node(i))).collect()
    }
}

impl Default for ForceField {
    fn default() -> Self {
        Self::zero()
    }
}

/// Short textual form: `zero`, `const:A` or `sin:A,k`.
impl FromStr for ForceField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "zero" {
            return Ok(Self::zero());
        }
        let bad = Error::Input("field must be zero, const:A or sin:A,k");
        let (head, rest) = s.split_once(':').ok_or(bad.clone())?;
        match head {
            "const" => {
                let a: f64 = rest.trim().parse().map_err(|_| bad.clone())?;
                Self::constant(a)
            }
            "sin" => {
                let (a, k) = rest.split_once(',').ok_or(bad.clone())?;
                let a: f64 = a.trim().parse().map_err(|_| bad.clone())?;
                let k: f64 = k.trim().parse().map_err(|_| bad)?;
                Self::sinusoidal(a, k)
            }
            _ => Err(bad),
        }
    }
}

impl fmt::Display for ForceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            FieldKind::Zero => write!(f, "zero"),
            FieldKind::Constant { value } => write!(f, "const:{value}"),
            FieldKind::Sinusoidal {
                amplitude,
                wavenumber,
                phase,
            } if *phase == 0.0 => write!(f, "sin:{amplitude},{wavenumber}"),
            FieldKind::Sinusoidal { .. } => write!(f, "sinusoidal"),
            FieldKind::Tabulated { grid, .. } => write!(f, "tabulated[{}]", grid.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn parse_and_bounds() {
        let e: ForceField = "sin:0.5,2".parse().unwrap();
        assert_eq!(e.sup_norm(), 0.5);
        assert_eq!(e.sup_derivative(), 1.0);
        assert!((e.eval(0.0, PI / 4.0) - 0.5).abs() < 1e-15);
        let c: ForceField = "const:-0.25".parse().unwrap();
        assert_eq!(c.uniform_value(), Some(-0.25));
        assert!("sin:1".parse::<ForceField>().is_err());
        assert!("gravity".parse::<ForceField>().is_err());
        assert_eq!(e.to_string(), "sin:0.5,2");
    }

    #[test]
    fn tabulated_interpolates_smooth_field() {
        let g = PeriodicGrid1D::new(2.0 * PI, 64).unwrap();
        let vals = g.nodes().iter().map(|x| x.sin()).collect();
        let e = ForceField::new(FieldKind::Tabulated { grid: g, values: vals }).unwrap();
        for x in [0.1, 1.3, -2.9, 3.1] {
            assert!((e.eval(0.0, x) - x.sin()).abs() < 1e-5);
            assert!((e.derivative(0.0, x) - x.cos()).abs() < 1e-3);
        }
        assert!((e.sup_derivative() - 1.0).abs() < 1e-2);
    }
}
