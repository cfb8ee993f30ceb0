//! CSV and manifest writers. Floats are printed with 17 significant digits
//! so that reruns can be compared byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest";

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// An in-memory CSV table.
#[derive(Clone, Debug)]
pub struct Csv {
    pub name: String,
    columns: usize,
    body: String,
}

impl Csv {
    pub fn new(name: &str, header: &[&str]) -> Self {
        let mut body = header.join(",");
        body.push('\n');
        Self {
            name: name.to_string(),
            columns: header.len(),
            body,
        }
    }

    pub fn row(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.columns);
        let cells: Vec<String> = values.iter().map(|&v| num(v)).collect();
        self.body.push_str(&cells.join(","));
        self.body.push('\n');
    }

    /// Row whose first cell is an integer index.
    pub fn indexed_row(&mut self, k: usize, values: &[f64]) {
        debug_assert_eq!(values.len() + 1, self.columns);
        let _ = write!(self.body, "{k}");
        for &v in values {
            let _ = write!(self.body, ",{}", num(v));
        }
        self.body.push('\n');
    }

    pub fn contents(&self) -> &str {
        &self.body
    }
}

/// A named output file.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl From<Csv> for Artifact {
    fn from(c: Csv) -> Self {
        Artifact {
            name: c.name,
            contents: c.body,
        }
    }
}

/// Fails before any work is done if a planned output exists and overwriting
/// is off.
pub fn check_targets(dir: &Path, names: &[&str], overwrite: bool) -> Result<(), CliError> {
    if overwrite {
        return Ok(());
    }
    for name in names.iter().chain(std::iter::once(&MANIFEST)) {
        let path = dir.join(name);
        if path.exists() {
            return Err(CliError::io(format!(
                "{} exists; pass --overwrite to replace it",
                path.display()
            )));
        }
    }
    Ok(())
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
    let mut written = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.contents)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

/// `key = value` lines: the effective configuration (with the source of
/// each value as a trailing comment), then run metadata.
pub fn manifest(cfg: &RunConfig, outputs: &[&str], wall_time: f64) -> String {
    let mut s = String::new();
    for (key, value, source) in &cfg.effective {
        let _ = writeln!(s, "{key} = {value}  # {source}");
    }
    let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "wall_time_s = {wall_time:.3}");
    let _ = writeln!(s, "outputs = {}", outputs.join(","));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
        let mut c = Csv::new("x.csv", &["k", "a"]);
        c.indexed_row(3, &[1.5]);
        assert_eq!(c.contents(), "k,a\n3,1.5000000000000000e0\n");
    }
}
