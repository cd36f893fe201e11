use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use maxmin_core::io::write_json_atomic;

/// Replay record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: String,
    pub wall_time_secs: f64,
    pub outputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

pub fn version() -> String {
    format!("{}+{}", env!("CARGO_PKG_VERSION"), env!("MAXMIN_GIT_DESCRIBE"))
}

pub struct ManifestBuilder {
    started: Instant,
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn start(command: &str, argv: &[String]) -> Self {
        ManifestBuilder {
            started: Instant::now(),
            manifest: RunManifest {
                command: command.into(),
                args: argv.iter().skip(1).cloned().collect(),
                config_path: None,
                seed: None,
                version: version(),
                wall_time_secs: 0.0,
                outputs: Vec::new(),
                extra: serde_json::Map::new(),
            },
        }
    }

    pub fn config(&mut self, path: Option<&Path>) -> &mut Self {
        self.manifest.config_path = path.map(Path::to_path_buf);
        self
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.manifest.seed = Some(seed);
        self
    }

    pub fn extra(&mut self, key: &str, value: impl Into<serde_json::Value>) -> &mut Self {
        self.manifest.extra.insert(key.into(), value.into());
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.manifest.outputs.push(path.to_path_buf());
        self
    }

    pub fn finish(&mut self, dir: &Path) -> maxmin_core::error::Result<()> {
        self.manifest.wall_time_secs = self.started.elapsed().as_secs_f64();
        write_json_atomic(&dir.join("manifest.json"), &self.manifest)
    }
}
