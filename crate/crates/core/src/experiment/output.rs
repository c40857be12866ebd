//! Deterministic file output: fixed number formatting, LF line endings, and
//! all-or-nothing writes.

use std::fs;
use std::path::{Path, PathBuf};

use crate::Result;

/// 17 significant digits in scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))
}

/// Writes every `(name, bytes)` pair under `dir`. If any write fails, the
/// files written so far (and `dir`, when created here and left empty) are
/// removed before the error is returned.
pub fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    let created_dir = !dir.exists();
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, bytes) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            if created_dir {
                let _ = fs::remove_dir(dir);
            }
            return Err(e.into());
        }
        written.push(path);
    }
    Ok(written)
}
