//! Dense-matrix export: a small binary container plus CSV for debugging.
//!
//! Both formats are row-major. The binary layout is a fixed magic tag,
//! row and column counts as little-endian u64, then the entries as
//! little-endian f64. CSV carries one comment line of metadata and prints
//! 17 significant digits, enough to reproduce every f64 exactly.

use crate::{scalar, Error, Result, Scalar};
use nalgebra::DMatrix;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"MLQRMAT1";

/// Writes `m` in the binary container format.
pub fn write_matrix_bin<T: Scalar>(path: &Path, m: &DMatrix<T>) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::Io(format!("write failed: {e}"));
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(m.ncols() as u64).to_le_bytes()).map_err(io_err)?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)].to_f64().ok_or_else(|| {
                Error::Io("matrix entry not representable as f64".into())
            })?;
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// Reads a matrix written by [`write_matrix_bin`].
pub fn read_matrix_bin<T: Scalar>(path: &Path) -> Result<DMatrix<T>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("cannot open {}: {e}", path.display())))?;
    let mut r = BufReader::new(file);
    let io_err = |e: std::io::Error| Error::Io(format!("read failed: {e}"));
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(Error::Io("not a matrix container file".into()));
    }
    let mut dims = [0u8; 8];
    r.read_exact(&mut dims).map_err(io_err)?;
    let nrows = u64::from_le_bytes(dims) as usize;
    r.read_exact(&mut dims).map_err(io_err)?;
    let ncols = u64::from_le_bytes(dims) as usize;
    let mut out = DMatrix::<T>::zeros(nrows, ncols);
    let mut buf = [0u8; 8];
    for i in 0..nrows {
        for j in 0..ncols {
            r.read_exact(&mut buf).map_err(io_err)?;
            out[(i, j)] = scalar::<T>(f64::from_le_bytes(buf));
        }
    }
    Ok(out)
}

/// Formats one value with 17 significant digits (round-trip exact for f64).
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `m` as CSV with a leading `# label rows x cols` comment line.
pub fn write_matrix_csv<T: Scalar>(path: &Path, label: &str, m: &DMatrix<T>) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::Io(format!("write failed: {e}"));
    writeln!(w, "# {label} {}x{}", m.nrows(), m.ncols()).map_err(io_err)?;
    for i in 0..m.nrows() {
        let row: Vec<String> =
            (0..m.ncols()).map(|j| fmt_full(m[(i, j)].to_f64().unwrap_or(f64::NAN))).collect();
        writeln!(w, "{}", row.join(",")).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reads a matrix written by [`write_matrix_csv`].
pub fn read_matrix_csv<T: Scalar>(path: &Path) -> Result<DMatrix<T>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("cannot open {}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    let mut rows: Vec<Vec<T>> = Vec::new();
    for line in reader.lines() {
        let line =
            line.map_err(|e| Error::Io(format!("read failed: {e}")))?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|tok| tok.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| Error::Io(format!("bad CSV entry: {e}")))?;
        rows.push(row.into_iter().map(scalar::<T>).collect());
    }
    if rows.is_empty() {
        return Err(Error::Io("CSV contains no data rows".into()));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Io("ragged CSV rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn binary_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let m = dmatrix![1.0, -2.5e-17, std::f64::consts::PI; 4.0, 5.0, -6.0e300];
        write_matrix_bin(&path, &m).unwrap();
        let back: DMatrix<f64> = read_matrix_bin(&path).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = dmatrix![1.0 / 3.0, -2.5e-17; std::f64::consts::E, 0.1];
        write_matrix_csv(&path, "test", &m).unwrap();
        let back: DMatrix<f64> = read_matrix_csv(&path).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"NOTAMATRIXFILE..").unwrap();
        assert!(read_matrix_bin::<f64>(&path).is_err());
    }

    #[test]
    fn full_precision_format_roundtrips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-17, 6.02e23, f64::MIN_POSITIVE] {
            let s = fmt_full(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }
}
