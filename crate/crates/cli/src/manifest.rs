use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, Result};

/// Fully resolved run description written as `<output>.manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub argv: Vec<String>,
    pub threads: Option<usize>,
    pub config: Value,
    pub node_labels: Option<Vec<String>>,
}

impl Manifest {
    pub fn new(command: &'static str, argv: Vec<String>, threads: Option<usize>, config: Value) -> Self {
        Self { tool: "grf", version: env!("CARGO_PKG_VERSION"), command, argv, threads, config, node_labels: None }
    }

    pub fn with_labels(mut self, labels: Option<Vec<String>>) -> Self {
        self.node_labels = labels;
        self
    }

    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    pub fn write(&self, output: &Path, summary: &Value) -> Result<()> {
        let path = Self::path_for(output);
        let mut doc = serde_json::to_value(self)?;
        doc["output"] = json!(output);
        doc["summary"] = summary.clone();
        let mut out = BufWriter::new(File::create(&path).map_err(CliError::io(&path))?);
        serde_json::to_writer_pretty(&mut out, &doc)?;
        writeln!(out).map_err(CliError::io(&path))?;
        out.flush().map_err(CliError::io(&path))
    }
}
