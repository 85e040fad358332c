use std::path::Path;

use anyhow::Result;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    Ok(rops3d::mesh::io::write_atomic(path, bytes)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

/// Shortest round-trip formatting for CSV cells.
pub fn num(v: f64) -> String {
    format!("{v}")
}
