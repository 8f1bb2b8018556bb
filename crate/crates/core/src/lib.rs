//! Numerics for the fractional Vlasov–Lévy–Fokker–Planck equation and its
//! anomalous advection–diffusion limit.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation: file formats, configuration, the command line and
//! thread-level parallelism live in the `levyfp` companion crate.
//!
//! Layout:
//!
//! * [`fraclap`]: the fractional Laplacian as a Fourier multiplier and as a
//!   principal-value hypersingular integral.
//! * [`stable`]: the α-stable equilibrium `G_α`, its translate `F_ε`, tail
//!   checks and Chambers–Mallows–Stuck sampling.
//! * [`particles`]: Monte Carlo integration of the Lévy–Langevin system.
//! * [`kinetic`]: the phase-space solver for the ε-rescaled kinetic equation
//!   and the weak-formulation residual.
//! * [`macroscopic`]: the limiting advection/fractional-diffusion equation.
//! * [`entropy`]: quadratic entropy, dissipation and micro–macro diagnostics.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod entropy;
mod error;
pub mod fft;
pub mod field;
pub mod fraclap;
pub mod grid;
pub mod kinetic;
pub mod macroscopic;
pub mod math;
pub mod particles;
pub mod stable;

pub use error::{Error, Result};
pub use field::ForceField;
pub use grid::{GridFunction, PeriodicGrid1D};
pub use kinetic::{KineticField, SplitOrder, SplitScheme};
pub use macroscopic::DensityField;
pub use particles::ParticleEnsemble;
pub use stable::{EquilibriumTable, StableSamplerConfig};

/// Stability index and spatial dimension shared by every operator.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlphaParams {
    pub alpha: f64,
    pub dim: usize,
}

impl AlphaParams {
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        check_alpha(alpha)?;
        if dim == 0 {
            return Err(Error::Parameter("dimension must be at least 1"));
        }
        Ok(Self { alpha, dim })
    }

    /// One-dimensional parameters, the common case.
    pub fn one_d(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1)
    }
}

/// Physical configuration consumed by the kinetic solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelParams {
    pub alpha: f64,
    pub dim: usize,
    /// Knudsen number.
    pub eps: f64,
    /// Final time.
    pub horizon: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, eps: f64, horizon: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_eps(eps)?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Parameter("horizon must be positive"));
        }
        Ok(Self {
            alpha,
            dim: 1,
            eps,
            horizon,
        })
    }

    /// Velocity shift `ε^{α-1}` applied to the field in the perturbed equilibrium.
    pub fn field_scale(&self) -> f64 {
        libm::pow(self.eps, self.alpha - 1.0)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (1.0..=2.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Parameter("alpha must lie in [1, 2]"))
    }
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter("eps must lie in (0, 1]"))
    }
}
