//! Atomic file output and marginal CSV input.
use std::io::Write;
use std::path::Path;

use anyhow::anyhow;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{CliResult, Failure};

pub const X_MARGINAL_HEADER: [&str; 2] = ["x_m", "density_per_m"];
pub const P_MARGINAL_HEADER: [&str; 2] = ["p_kg_m_per_s", "density_per_kg_m_per_s"];

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::usage(anyhow!("cannot write {}: {e}", path.display()))
}

/// Writes through a temporary file in the target directory, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_failure(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_failure(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_failure(path, e))?;
    tmp.persist(path).map_err(|e| io_failure(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_failure(path, e))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Serialises rows under the given header.
pub fn write_csv<R: Serialize>(path: &Path, header: &[&str], rows: &[R]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(|e| io_failure(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_failure(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| io_failure(path, e))?;
    write_atomic(path, &bytes)
}

/// Reads a two-column `(coordinate, density)` CSV with the given header; returns the columns
/// and the SHA-256 of the file.
pub fn read_marginal(path: &Path, header: [&str; 2]) -> CliResult<(Vec<f64>, Vec<f64>, String)> {
    let bytes = std::fs::read(path).map_err(|e| Failure::usage(anyhow!("cannot read {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes.as_slice());
    let found: Vec<String> = r
        .headers()
        .map_err(|e| Failure::usage(anyhow!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if found != header {
        return Err(Failure::usage(anyhow!(
            "{}: header must be `{}`, found `{}`",
            path.display(),
            header.join(","),
            found.join(",")
        )));
    }
    let (mut coords, mut density) = (Vec::new(), Vec::new());
    for (i, rec) in r.deserialize::<(f64, f64)>().enumerate() {
        let (c, d) = rec.map_err(|e| Failure::usage(anyhow!("{}: data row {}: {e}", path.display(), i + 1)))?;
        coords.push(c);
        density.push(d);
    }
    Ok((coords, density, digest))
}
