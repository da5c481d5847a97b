//! Atomic file output.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::CliError;

/// Writes `path` by filling a temporary file in the same directory and
/// renaming it into place, so readers never see a partial file.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::from(e.error))?;
    Ok(())
}

/// Writes rows of string cells as CSV.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| CliError::Runtime(stgia_core::Error::Io(e.to_string()));
        out.write_record(header).map_err(csv_err)?;
        for r in rows {
            out.write_record(r).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    })
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

/// Fixed-precision float cell; empty for `None`.
pub fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or(String::new(), |v| format!("{v:.digits$}"))
}
