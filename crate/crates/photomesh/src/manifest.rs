//! Run manifests: enough to repeat a command and get byte-identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::files::{self, MANIFEST_V1};
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// Arguments after the program name, exactly as given.
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub config: Option<String>,
    pub inputs: Vec<String>,
    pub out: String,
    /// Files written next to the manifest, with their schema or format.
    pub outputs: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str, args: &[String], out: &Path) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args: args.to_vec(),
            seed: None,
            config: None,
            inputs: Vec::new(),
            out: out.display().to_string(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.display().to_string());
    }

    pub fn output(&mut self, name: &str, format: &str) {
        self.outputs.push((name.to_string(), format.to_string()));
    }

    pub fn write(&self, out: &Path) -> Result<(), CliError> {
        files::write_json(MANIFEST_V1, &out.join(MANIFEST_FILE), self)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        files::read_json(MANIFEST_V1, path)
    }
}
