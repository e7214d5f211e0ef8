//! Deterministic report emission: CSV rows with 17 significant digits and
//! pretty JSON with declaration-ordered fields. No wall-clock content.

use serde::Serialize;
use std::io::Write;
use std::path::Path;

use crate::CliError;

/// Full-precision float formatting shared with the library CSV layer.
pub fn fmt(v: f64) -> String {
    memlqr::io::fmt_full(v)
}

/// Writes one CSV file with a header row; every row must match its width.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))?;
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    file.write_all(out.as_bytes())
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// Serializes one report as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}
