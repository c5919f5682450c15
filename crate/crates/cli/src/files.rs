//! Output bookkeeping and the small CSV formats the CLI exchanges.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use eitshape::forward::Protocol;

use crate::{CliError, CliResult};

pub const PLOT_SCRIPT: &str = include_str!("../assets/plot_results.py");

pub struct Outputs {
    dir: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Outputs { dir: dir.to_path_buf(), hashes: BTreeMap::new() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::validation(format!("cannot create {}: {e}", parent.display())))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
        self.hashes.insert(name.to_string(), eitshape::sha256_hex(bytes));
        Ok(())
    }

    /// Records a file some library call already wrote.
    pub fn record(&mut self, name: &str) -> CliResult<()> {
        let path = self.path(name);
        let bytes = std::fs::read(&path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
        self.hashes.insert(name.to_string(), eitshape::sha256_hex(&bytes));
        Ok(())
    }

    pub fn hashes(&self) -> &BTreeMap<String, String> {
        &self.hashes
    }
}

/// Versioned transfer-voltage CSV, one row per measurement.
pub fn write_voltages(protocol: &Protocol, v: &[f64]) -> String {
    let mut out = String::from("# EITVOLT 1\nmeasurement,source,sink,frequency_hz,positive,negative,voltage\n");
    for (i, (m, v)) in protocol.measurements().iter().zip(v).enumerate() {
        let t = &protocol.injections()[m.injection].tone;
        let _ = writeln!(out, "{},{},{},{},{},{},{}", i + 1, t.source, t.sink, t.frequency, m.pair.positive, m.pair.negative, v);
    }
    out
}

/// Values of a CSV column: the named one if a header names it, otherwise the
/// last column. `#` lines are skipped.
pub fn read_column(text: &str, path: &Path, names: &[&str]) -> CliResult<Vec<f64>> {
    let err = |line: usize, msg: String| CliError::validation(format!("{}:{line}: {msg}", path.display()));
    let mut rows = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .peekable();
    let mut column = None;
    if let Some((_, first)) = rows.peek() {
        let fields: Vec<&str> = first.split(',').map(str::trim).collect();
        if fields.iter().any(|f| f.parse::<f64>().is_err()) {
            column = Some(
                fields
                    .iter()
                    .position(|f| names.contains(f))
                    .unwrap_or(fields.len() - 1),
            );
            rows.next();
        }
    }
    rows.map(|(i, line)| {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let c = column.unwrap_or(fields.len() - 1);
        let f = fields.get(c).ok_or_else(|| err(i + 1, format!("missing column {}", c + 1)))?;
        f.parse::<f64>().map_err(|_| err(i + 1, format!("`{f}` is not a number")))
    })
    .collect()
}

pub fn text(bytes: Vec<u8>, path: &Path) -> CliResult<String> {
    String::from_utf8(bytes).map_err(|_| CliError::validation(format!("{} is not UTF-8 text", path.display())))
}
