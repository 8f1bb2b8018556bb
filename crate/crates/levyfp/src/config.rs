//! Study configuration.
//!
//! A study file is TOML. Only `schema_version` and `alpha` are required;
//! everything else has a default:
//!
//! ```toml
//! schema_version = 1
//! alpha = 1.5
//! eps_list = [0.4, 0.2, 0.1]      # strictly decreasing, in (0, 1]
//! solver = "grid"                 # grid | particles | both
//! field = "sin:0.5,1"             # zero | const:A | sin:A,k
//! t_final = 1.0
//! seed = 7
//! output_dir = "levyfp-out"
//!
//! [initial]
//! length = 6.283185307179586      # torus length
//! amplitude = 0.5                 # rho0 ∝ 1 + amplitude cos(k x)
//! wavenumber = 1
//! velocity_shift = 0.0            # nonzero: ill-prepared rho0(x) G(v - shift)
//!
//! [grid]
//! nx = 128
//! nv = 512                        # optional, with vmax; default depends on alpha
//! vmax = 48.0
//! dt_max = 0.01
//! ratio = 0.1                     # dt <= ratio eps^alpha
//! clip_negative = false
//! record_stride = 20
//!
//! [particles]
//! count = 1000000
//! dt = 0.01
//! smoothing = true
//!
//! [macro]
//! dt = 0.001
//!
//! [diagnostics]
//! checkpoints = [0.25, 0.5, 1.0]  # fractions of t_final
//! test_window = [0.1, 0.9]        # support of the weak-form bump
//! test_wavenumber = 1.0
//! probes = [0.0, 1.5707963267948966, 3.141592653589793]
//! window = 0.05
//! median_k = 4.0
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use levyfp_core::stable::default_velocity_grid;
use levyfp_core::{ForceField, PeriodicGrid1D};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Grid,
    Particles,
    Both,
}

impl SolverKind {
    pub fn grid(self) -> bool {
        matches!(self, Self::Grid | Self::Both)
    }

    pub fn particles(self) -> bool {
        matches!(self, Self::Particles | Self::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub schema_version: u32,
    pub alpha: f64,
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(default)]
    pub solver: SolverKind,
    #[serde(default = "default_field")]
    pub field: String,
    #[serde(default = "one")]
    pub t_final: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub grid: GridLevel,
    #[serde(default)]
    pub particles: ParticleLevel,
    #[serde(default, rename = "macro")]
    pub macroscopic: MacroLevel,
    #[serde(default)]
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    #[serde(default = "two_pi")]
    pub length: f64,
    #[serde(default = "half")]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub wavenumber: f64,
    #[serde(default)]
    pub velocity_shift: f64,
}

impl Default for InitialData {
    fn default() -> Self {
        Self {
            length: two_pi(),
            amplitude: 0.5,
            wavenumber: 1.0,
            velocity_shift: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridLevel {
    #[serde(default = "default_nx")]
    pub nx: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nv: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vmax: Option<f64>,
    #[serde(default = "default_dt")]
    pub dt_max: f64,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default)]
    pub clip_negative: bool,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

impl Default for GridLevel {
    fn default() -> Self {
        Self {
            nx: default_nx(),
            nv: None,
            vmax: None,
            dt_max: default_dt(),
            ratio: default_ratio(),
            clip_negative: false,
            record_stride: default_stride(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleLevel {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "yes")]
    pub smoothing: bool,
}

impl Default for ParticleLevel {
    fn default() -> Self {
        Self {
            count: default_count(),
            dt: default_dt(),
            smoothing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroLevel {
    #[serde(default = "default_macro_dt")]
    pub dt: f64,
}

impl Default for MacroLevel {
    fn default() -> Self {
        Self { dt: default_macro_dt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<f64>,
    #[serde(default = "default_test_window")]
    pub test_window: [f64; 2],
    #[serde(default = "one")]
    pub test_wavenumber: f64,
    #[serde(default = "default_probes")]
    pub probes: Vec<f64>,
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_median_k")]
    pub median_k: f64,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self {
            checkpoints: default_checkpoints(),
            test_window: default_test_window(),
            test_wavenumber: 1.0,
            probes: default_probes(),
            window: default_window(),
            median_k: default_median_k(),
        }
    }
}

fn default_eps_list() -> Vec<f64> {
    vec![0.4, 0.2, 0.1]
}
fn default_field() -> String {
    "sin:0.5,1".into()
}
fn default_seed() -> u64 {
    7
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("levyfp-out")
}
fn default_nx() -> usize {
    128
}
fn default_dt() -> f64 {
    0.01
}
fn default_ratio() -> f64 {
    0.1
}
fn default_stride() -> usize {
    20
}
fn default_count() -> usize {
    1_000_000
}
fn default_macro_dt() -> f64 {
    1e-3
}
fn default_checkpoints() -> Vec<f64> {
    vec![0.25, 0.5, 1.0]
}
fn default_test_window() -> [f64; 2] {
    [0.1, 0.9]
}
fn default_probes() -> Vec<f64> {
    vec![0.0, 0.5 * PI, PI]
}
fn default_window() -> f64 {
    0.05
}
fn default_median_k() -> f64 {
    4.0
}
fn two_pi() -> f64 {
    2.0 * PI
}
fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn yes() -> bool {
    true
}

impl StudyConfig {
    /// Defaults for everything but `alpha`.
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            alpha,
            eps_list: default_eps_list(),
            solver: SolverKind::default(),
            field: default_field(),
            t_final: 1.0,
            seed: default_seed(),
            output_dir: default_output_dir(),
            initial: InitialData::default(),
            grid: GridLevel::default(),
            particles: ParticleLevel::default(),
            macroscopic: MacroLevel::default(),
            diagnostics: Diagnostics::default(),
        }
    }

    /// Parses and validates. Errors carry the path of the offending key.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| AppError::config("<document>", e.message().trim()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { "<document>".to_string() } else { path };
            AppError::config(path, e.inner().message().trim())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("study configs always serialize")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| AppError::io(path, e))
    }

    pub fn force_field(&self) -> Result<ForceField> {
        self.field.parse().map_err(|e: levyfp_core::Error| AppError::config("field", e.to_string()))
    }

    pub fn xgrid(&self) -> Result<PeriodicGrid1D> {
        PeriodicGrid1D::new(self.initial.length, self.grid.nx).map_err(|e| AppError::config("grid.nx", e.to_string()))
    }

    /// Explicit `nv`/`vmax` if given, otherwise the default box for `alpha`.
    pub fn vgrid(&self) -> Result<PeriodicGrid1D> {
        match (self.grid.nv, self.grid.vmax) {
            (None, None) => default_velocity_grid(self.alpha).map_err(|e| AppError::config("alpha", e.to_string())),
            (Some(nv), Some(vmax)) => {
                PeriodicGrid1D::new(2.0 * vmax, nv).map_err(|e| AppError::config("grid.nv", e.to_string()))
            }
            _ => Err(AppError::config("grid.nv", "nv and vmax must be given together")),
        }
    }

    /// Absolute checkpoint times.
    pub fn checkpoint_times(&self) -> Vec<f64> {
        self.diagnostics.checkpoints.iter().map(|c| c * self.t_final).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |p: &str, m: &str| Err(AppError::config(p, m));
        if self.schema_version != SCHEMA_VERSION {
            return bad("schema_version", "unsupported schema version (expected 1)");
        }
        if !(1.0..=2.0).contains(&self.alpha) {
            return bad("alpha", "must lie in [1, 2]");
        }
        if self.eps_list.is_empty() {
            return bad("eps_list", "must not be empty");
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return bad("eps_list", "every entry must lie in (0, 1]");
        }
        if self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("eps_list", "must be strictly decreasing");
        }
        self.force_field()?;
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad("t_final", "must be positive");
        }
        if !(self.initial.length > 0.0 && self.initial.length.is_finite()) {
            return bad("initial.length", "must be positive");
        }
        if !(self.initial.amplitude.abs() < 1.0) {
            return bad("initial.amplitude", "must lie in (-1, 1) to keep rho0 positive");
        }
        let k = self.initial.wavenumber * self.initial.length / (2.0 * PI);
        if !(k >= 0.0 && (k - k.round()).abs() < 1e-9) {
            return bad("initial.wavenumber", "must be a nonnegative wavenumber of the torus");
        }
        if !self.initial.velocity_shift.is_finite() {
            return bad("initial.velocity_shift", "must be finite");
        }
        self.xgrid()?;
        self.vgrid()?;
        for (name, v) in [
            ("grid.dt_max", self.grid.dt_max),
            ("grid.ratio", self.grid.ratio),
            ("particles.dt", self.particles.dt),
            ("macro.dt", self.macroscopic.dt),
            ("diagnostics.window", self.diagnostics.window),
            ("diagnostics.median_k", self.diagnostics.median_k),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(name, "must be positive");
            }
        }
        if self.solver.particles() && self.particles.count == 0 {
            return bad("particles.count", "must be positive");
        }
        let cps = &self.diagnostics.checkpoints;
        if cps.is_empty() || cps.iter().any(|c| !(*c > 0.0 && *c <= 1.0)) {
            return bad("diagnostics.checkpoints", "fractions of t_final in (0, 1]");
        }
        if cps.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("diagnostics.checkpoints", "must be strictly increasing");
        }
        let [a, b] = self.diagnostics.test_window;
        if !(0.0 <= a && a < b && b <= self.t_final) {
            return bad("diagnostics.test_window", "must be an interval inside [0, t_final]");
        }
        let k = self.diagnostics.test_wavenumber * self.initial.length / (2.0 * PI);
        if !(k > 0.5 && (k - k.round()).abs() < 1e-9) {
            return bad("diagnostics.test_wavenumber", "must be a positive wavenumber of the torus");
        }
        Ok(())
    }
}
