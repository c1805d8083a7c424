//! Plot-data and JSON record writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Fixed-width scientific notation; `nan` for missing values.
pub fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.12e}")
    }
}

/// Whitespace-separated columns under a `#`-prefixed header line. Rows are
/// flushed as they are written so that a failing run leaves partial data.
pub struct PlotWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl PlotWriter {
    pub fn create(path: &Path, columns: &[&str]) -> Result<Self, CliError> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "# {}", columns.join(" "))?;
        out.flush()?;
        Ok(Self {
            out,
            path: path.to_path_buf(),
        })
    }

    pub fn row(&mut self, first: impl std::fmt::Display, rest: &[f64]) -> Result<(), CliError> {
        let mut line = first.to_string();
        for &v in rest {
            line.push(' ');
            line.push_str(&fmt(v));
        }
        writeln!(self.out, "{line}")?;
        self.out.flush()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Failure(e.to_string()))?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting() {
        assert_eq!(fmt(f64::NAN), "nan");
        assert_eq!(fmt(0.5), "5.000000000000e-1");
        assert_eq!(fmt(-2.0), "-2.000000000000e0");
    }

    #[test]
    fn writer_emits_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.dat");
        let mut w = PlotWriter::create(&p, &["x", "y"]).unwrap();
        w.row(1, &[0.25]).unwrap();
        w.row("0.5", &[f64::NAN]).unwrap();
        assert_eq!(w.path(), p.as_path());
        let s = std::fs::read_to_string(&p).unwrap();
        assert_eq!(s, "# x y\n1 2.500000000000e-1\n0.5 nan\n");
    }
}
