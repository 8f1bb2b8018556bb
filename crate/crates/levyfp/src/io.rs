//! CSV tables and binary field dumps.
//!
//! A dump is two files: `NAME.bin` holds the values of `f[i][j]` (x index
//! `i`, velocity index `j`) as little-endian `f64` in row-major order, and
//! `NAME.json` is the sidecar describing grids and parameters.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use levyfp_core::field::FieldKind;
use levyfp_core::{ForceField, KineticField, PeriodicGrid1D};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

/// Writes a header and rows of numbers. Floats use the shortest
/// representation that reads back exactly.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator,
    I::Item: AsRef<[f64]>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let row = row.as_ref();
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    write_bytes(path, out.as_bytes())
}

/// Reads a numeric CSV written by [`write_csv`]: header names and rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| AppError::Format(format!("{}: empty CSV", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| AppError::Format(format!("{}: line {}: {e}", path.display(), n + 2)))?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| AppError::io(path, e))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, to_json_pretty(value).as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| AppError::Json {
        path: path.into(),
        source,
    })
}

/// Rows `(t, x, ρ)` for a list of snapshots on a common grid.
pub fn density_rows(grid: &PeriodicGrid1D, snapshots: &[(f64, &[f64])]) -> Vec<[f64; 3]> {
    snapshots
        .iter()
        .flat_map(|(t, rho)| rho.iter().enumerate().map(move |(i, r)| [*t, grid.node(i), *r]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpSidecar {
    /// Name of the data file, relative to the sidecar.
    pub data: String,
    pub dtype: String,
    pub byte_order: String,
    pub layout: String,
    /// `[nx, nv]`.
    pub shape: [usize; 2],
    pub x_grid: PeriodicGrid1D,
    pub v_grid: PeriodicGrid1D,
    pub time: f64,
    pub alpha: f64,
    pub eps: f64,
    pub field: FieldKind,
}

/// Writes `stem.bin` and `stem.json`; returns both paths.
pub fn write_field_dump(
    stem: &Path,
    f: &KineticField,
    alpha: f64,
    eps: f64,
    field: &ForceField,
) -> Result<(PathBuf, PathBuf)> {
    let bin = stem.with_extension("bin");
    let json = stem.with_extension("json");
    let mut bytes = Vec::with_capacity(8 * f.values().len());
    for v in f.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_bytes(&bin, &bytes)?;
    let sidecar = DumpSidecar {
        data: bin.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        dtype: "f64".into(),
        byte_order: "little".into(),
        layout: "row-major [x][v]".into(),
        shape: [f.xgrid().len(), f.vgrid().len()],
        x_grid: *f.xgrid(),
        v_grid: *f.vgrid(),
        time: f.time(),
        alpha,
        eps,
        field: field.kind().clone(),
    };
    write_json(&json, &sidecar)?;
    Ok((bin, json))
}

/// Loads a dump from its sidecar path.
pub fn read_field_dump(sidecar: &Path) -> Result<(KineticField, DumpSidecar)> {
    let meta: DumpSidecar = read_json(sidecar)?;
    let fmt_err = |m: &str| AppError::Format(format!("{}: {m}", sidecar.display()));
    if meta.dtype != "f64" || meta.byte_order != "little" {
        return Err(fmt_err("only little-endian f64 dumps are supported"));
    }
    if meta.shape != [meta.x_grid.len(), meta.v_grid.len()] {
        return Err(fmt_err("shape does not match the grids"));
    }
    let bin = sidecar.parent().unwrap_or(Path::new(".")).join(&meta.data);
    let bytes = fs::read(&bin).map_err(|e| AppError::io(&bin, e))?;
    if bytes.len() != 8 * meta.shape[0] * meta.shape[1] {
        return Err(fmt_err("data file length does not match the shape"));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let f = KineticField::new(meta.x_grid, meta.v_grid, values, meta.time)?;
    Ok((f, meta))
}
