//! `manifest.json`: everything needed to reproduce a run.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::files::Outputs;
use crate::{Cli, CliError, CliResult};

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub seed: u64,
    pub threads: usize,
    pub argv: Vec<String>,
    pub parameters: Value,
    /// Input path to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    /// Output path, relative to the output directory, to SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub results: BTreeMap<String, Value>,
    pub started_unix: f64,
    pub finished_unix: f64,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

impl Manifest {
    pub fn start(cli: &Cli) -> CliResult<Self> {
        let parameters = serde_json::to_value(&cli.command).map_err(|e| CliError::validation(e.to_string()))?;
        Ok(Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: cli.command.name(),
            seed: cli.seed,
            threads: cli.threads,
            argv: std::env::args().collect(),
            parameters,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            results: BTreeMap::new(),
            started_unix: now(),
            finished_unix: 0.0,
        })
    }

    /// Reads an input file, recording its hash.
    pub fn input(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.insert(path.display().to_string(), eitshape::sha256_hex(&bytes));
        Ok(bytes)
    }

    pub fn result(&mut self, key: &str, value: impl Into<Value>) {
        self.results.insert(key.into(), value.into());
    }

    pub fn finish(mut self, out: &Outputs) -> CliResult<()> {
        self.outputs = out.hashes().clone();
        self.finished_unix = now();
        let text = serde_json::to_string_pretty(&self).map_err(|e| CliError::validation(e.to_string()))?;
        let path = out.dir().join("manifest.json");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))
    }
}
