//! On-disk artifact formats: RFC-4180 CSV sample tables, raw little-endian
//! checkpoint arrays with JSON metadata sidecars, and SHA-256 helpers used
//! for content addressing.

use crate::fields::{Box3, GridField};
use crate::{Error, Result};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::io::Read as _;
use std::path::Path;

/// One long-format sample row. Every numeric artifact row carries the run id
/// and the realization index; deterministic (non-Monte-Carlo) rows use
/// realization 0.
#[derive(Debug, Clone)]
pub struct SampleRow {
    pub realization: u64,
    /// Time for dynamic statistics; abscissa (radius, ...) for sweeps.
    pub t: f64,
    pub statistic: String,
    pub value: f64,
}

impl SampleRow {
    pub fn new(realization: u64, t: f64, statistic: impl Into<String>, value: f64) -> Self {
        Self { realization, t, statistic: statistic.into(), value }
    }
}

/// Write rows as UTF-8 RFC-4180 CSV with a header. Rows are written in the
/// order given; callers are responsible for passing a deterministic order.
pub fn write_samples_csv(path: &Path, run_id: &str, rows: &[SampleRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(["run_id", "realization", "t", "statistic", "value"]).map_err(csv_err)?;
    for row in rows {
        w.write_record([
            run_id,
            &row.realization.to_string(),
            &row.t.to_string(),
            &row.statistic,
            &row.value.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv error: {other:?}")),
    }
}

/// Save a sequence of grid fields as one raw array of little-endian f64
/// values (`count * m^3` of them, field-major, x-fastest within a field)
/// next to a `<name>.json` sidecar describing the layout.
pub fn save_fields(
    dir: &Path,
    name: &str,
    grid: Box3,
    times: &[f64],
    fields: &[&GridField],
    config_hash: &str,
) -> Result<Vec<String>> {
    if times.len() != fields.len() {
        return Err(Error::Config("times and fields must align".into()));
    }
    let raw_name = format!("{name}.f64");
    let raw_path = dir.join(&raw_name);
    let mut bytes: Vec<u8> = Vec::with_capacity(fields.len() * grid.size() * 8);
    for f in fields {
        if f.grid() != grid {
            return Err(Error::Config("checkpoint grid mismatch".into()));
        }
        for &v in f.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(&raw_path, &bytes)?;

    let sidecar_name = format!("{name}.json");
    let sidecar = serde_json::json!({
        "schema_version": 1,
        "kind": "field-checkpoints",
        "data_file": raw_name,
        "element": "f64-le",
        "m": grid.m(),
        "box_length": grid.length(),
        "count": fields.len(),
        "times": times,
        "layout": "field-major, x fastest within each field",
        "config_hash": config_hash,
    });
    fs::write(dir.join(&sidecar_name), serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(vec![raw_name, sidecar_name])
}

/// Hex SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 65536];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    let digest = h.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    Ok(hex)
}

/// Create `path` as a fresh directory, refusing to reuse an existing one so
/// prior artifacts are never overwritten.
pub fn ensure_new_dir(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    match fs::create_dir(path) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
            "run directory {} already exists; refusing to overwrite (choose a new --out or remove it)",
            path.display()
        ))),
        Err(e) => Err(e.into()),
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(format!("json error: {e}"))
    }
}
