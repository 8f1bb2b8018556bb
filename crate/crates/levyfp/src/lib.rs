//! Command-line driver, file formats and ε-sweep convergence studies on top
//! of `levyfp-core`.
//!
//! * [`config`]: the TOML study configuration and its validation.
//! * [`harness`]: limit studies, the α = 1 recentring check and reports.
//! * [`mc`]: particle stepping parallelised over RNG chunks.
//! * [`io`]: CSV writers and binary field dumps with JSON sidecars.
//! * [`report`]: manifest, per-ε CSVs, summary table and checksums.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
mod error;
pub mod harness;
pub mod io;
pub mod mc;
pub mod report;

pub use config::StudyConfig;
pub use error::{AppError, ExitKind, Result};
pub use harness::{run_critical_alpha1, run_limit_study, ConvergenceReport};

pub use levyfp_core as core;
