//! CSV and JSON emission. Data files carry no timestamps; run metadata goes
//! to a `.meta.json` sidecar next to each CSV.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ResolvedFrame, RunConfig};

pub const FRAME_CONVENTION: &str = "hbar = 1; rates are angular frequencies; displaced-squeezed frame with \
     e^(2r) = omega_m/Omega_m, g_eff = g omega_m/Omega_m, g0 = g_eff |alpha|, \
     Omega_c = -Delta + g_eff/2; joint index j*n_b + k (cavity-major)";

/// Round-trip formatting with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn sidecar_path(data: &Path) -> PathBuf {
    data.with_extension("meta.json")
}

/// Column name with its unit, for the sidecar.
pub struct Column<'a>(pub &'a str, pub &'a str);

pub fn write_sidecar(
    data: &Path,
    command: &str,
    columns: &[Column<'_>],
    cfg: &RunConfig,
    frame: Option<&ResolvedFrame>,
    extra: Value,
) -> Result<()> {
    let columns: Vec<Value> = columns
        .iter()
        .map(|Column(name, unit)| json!({ "name": name, "unit": unit }))
        .collect();
    let mut meta = json!({
        "generator": concat!("mech-sim ", env!("CARGO_PKG_VERSION")),
        "command": command,
        "data_file": data.file_name().map(|f| f.to_string_lossy().into_owned()),
        "columns": columns,
        "frame_convention": FRAME_CONVENTION,
        "config": cfg,
    });
    if let Some(f) = frame {
        meta["time_unit"] = json!(f.time_unit.label());
        meta["rates"] = json!(f.rates);
        meta["rate_unit_rad_per_s"] = json!(f.rate_unit);
        meta["derived_frame"] = json!(f.frame);
    }
    if let (Value::Object(m), Value::Object(e)) = (&mut meta, extra) {
        m.extend(e);
    }
    write_json(&sidecar_path(data), &meta)
}
