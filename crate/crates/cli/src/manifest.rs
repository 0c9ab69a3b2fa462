use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sinco::metrics::EvalReport;
use sinco::nets::InrConfig;
use sinco::training::TraceRow;

use crate::args::Command;
use crate::error::{read_input, write_output, CliError, Result};

/// Everything needed to repeat a run, written beside its artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: Command,
    pub seed: u64,
    pub arch: Option<String>,
    pub net: Option<InrConfig>,
    pub param_count: Option<usize>,
    pub achieved_bpp: Option<f64>,
    pub wall_clock_seconds: f64,
    pub final_loss: Option<TraceRow>,
    pub metrics: Option<EvalReport>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: Command, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            seed,
            arch: None,
            net: None,
            param_count: None,
            achieved_bpp: None,
            wall_clock_seconds: 0.0,
            final_loss: None,
            metrics: None,
            outputs: Vec::new(),
        }
    }

    /// `<artifact>.manifest.json`.
    pub fn path_for(artifact: &Path) -> PathBuf {
        let mut name = artifact.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        artifact.with_file_name(name)
    }

    pub fn write_beside(&self, artifact: &Path) -> Result<PathBuf> {
        let path = Self::path_for(artifact);
        let json = serde_json::to_vec_pretty(self).map_err(|e| CliError::Internal(e.to_string()))?;
        write_output(&path, &json)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_slice(&read_input(path)?)
            .map_err(|e| CliError::Data(format!("{}: bad manifest: {e}", path.display())))
    }
}
