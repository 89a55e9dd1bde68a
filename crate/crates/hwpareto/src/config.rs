//! TOML run configuration.
//!
//! ```toml
//! [run]
//! bench = "bench.json"      # relative paths resolve against this file
//! out_dir = "runs/mgd"
//! hardware = "predictor"    # or "exact"
//!
//! [search]                  # any SearchConfig field
//! epochs = 30
//! scheme = "mgd"
//!
//! [predictor]               # PredictorConfig
//! [hypernet]                # HypernetConfig
//! [pretrain]                # PretrainConfig
//! ```
//!
//! Command-line flags override the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hwpareto_core::hypernet::{HypernetConfig, PretrainConfig};
use hwpareto_core::pipeline::{HardwareMode, PipelineConfig};
use hwpareto_core::predictor::PredictorConfig;
use hwpareto_core::search::SearchConfig;

use crate::error::{CliError, CliResult};
use crate::io::read_input;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub bench: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Pretrained hypernetwork to start from; pretrained in-process if absent.
    pub hypernet: Option<PathBuf>,
    /// Predictor checkpoints, one per hardware objective; trained in-process if empty.
    pub predictors: Vec<PathBuf>,
    pub hardware: HardwareMode,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub run: RunSection,
    pub search: SearchConfig,
    pub predictor: PredictorConfig,
    pub hypernet: HypernetConfig,
    pub pretrain: PretrainConfig,
}

impl FileConfig {
    /// Parses `path`; relative paths in `[run]` become relative to its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = read_input(path, "--config")?;
        let text = String::from_utf8(bytes).map_err(|e| CliError::data(path, e))?;
        let mut cfg: FileConfig = toml::from_str(&text).map_err(|e| CliError::usage(format!("--config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.run.bench.as_mut().map(fix);
        cfg.run.out_dir.as_mut().map(fix);
        cfg.run.hypernet.as_mut().map(fix);
        cfg.run.predictors.iter_mut().for_each(fix);
        Ok(cfg)
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            hardware: self.run.hardware,
            predictor: self.predictor.clone(),
            hypernet: self.hypernet.clone(),
            pretrain: self.pretrain.clone(),
            search: self.search.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}
