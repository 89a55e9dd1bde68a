use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{read_input, sha256_hex, OutputSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one command invocation: enough to rerun it and check the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    /// Inputs keyed by the flag that named them.
    pub inputs: Vec<(String, FileHash)>,
    pub outputs: Vec<FileHash>,
    /// Fully resolved configuration (file merged with flags).
    pub config: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args,
            inputs: Vec::new(),
            outputs: Vec::new(),
            config: serde_json::Value::Null,
        }
    }

    pub fn input(&mut self, flag: &str, path: &Path) -> CliResult<()> {
        let bytes = read_input(path, flag)?;
        self.inputs.push((flag.into(), FileHash { path: path.to_path_buf(), sha256: sha256_hex(&bytes) }));
        Ok(())
    }

    pub fn set_config<T: Serialize>(&mut self, cfg: &T) {
        self.config = serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null);
    }

    /// Hashes everything written so far and writes the manifest itself.
    pub fn finish(mut self, outputs: &mut OutputSet, path: &Path) -> CliResult<()> {
        for p in outputs.paths() {
            let bytes = std::fs::read(p).map_err(|e| CliError::io(p, e))?;
            self.outputs.push(FileHash { path: p.clone(), sha256: sha256_hex(&bytes) });
        }
        outputs.write_json(path, &self)
    }
}

/// Default manifest path for a single-file output: `<out>.manifest.json`.
pub fn manifest_path_for(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
