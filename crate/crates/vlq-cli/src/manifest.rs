//! Reproducibility manifests.
//!
//! Every output file gets a sibling `<name>.manifest.json` carrying the
//! artifact version, the effective (flags merged over config) settings,
//! the seed, and timestamps — enough to regenerate the file exactly.

use std::path::Path;

use serde::Serialize;

#[derive(Serialize)]
pub struct RunManifest {
    pub artifact: String,
    pub command: String,
    pub created_utc: String,
    pub seed: Option<u64>,
    pub effective_config: serde_json::Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, effective_config: serde_json::Value) -> Self {
        Self {
            artifact: format!("vlq-cli {}", env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            created_utc: chrono::Utc::now().to_rfc3339(),
            seed,
            effective_config,
            outputs: Vec::new(),
        }
    }

    /// Write `out` next to the data file it describes.
    pub fn write_for(mut self, data_path: &Path) -> Result<(), String> {
        self.outputs.push(data_path.display().to_string());
        let manifest_path = {
            let mut s = data_path.as_os_str().to_os_string();
            s.push(".manifest.json");
            std::path::PathBuf::from(s)
        };
        let body = serde_json::to_string_pretty(&self)
            .map_err(|e| format!("manifest serialization failed: {e}"))?;
        std::fs::write(&manifest_path, body)
            .map_err(|e| format!("cannot write {}: {e}", manifest_path.display()))
    }
}
