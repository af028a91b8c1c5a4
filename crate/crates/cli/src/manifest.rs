use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance record written next to every result.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    /// SHA-256 of the canonical JSON export of the input system.
    pub config_sha256: Option<String>,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub wall_time_seconds: f64,
    pub outputs: Vec<PathBuf>,
}

pub struct ManifestBuilder {
    started: Instant,
    command_line: Vec<String>,
    config_sha256: Option<String>,
    seed: Option<u64>,
    outputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn start(command_line: Vec<String>) -> Self {
        ManifestBuilder {
            started: Instant::now(),
            command_line,
            config_sha256: None,
            seed: None,
            outputs: Vec::new(),
        }
    }

    pub fn config(&mut self, canonical_json: &str) {
        self.config_sha256 = Some(hex::encode(Sha256::digest(canonical_json.as_bytes())));
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn finish(self) -> RunManifest {
        RunManifest {
            command_line: self.command_line,
            config_sha256: self.config_sha256,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            outputs: self.outputs,
        }
    }
}

/// `<file>.manifest.json` next to a result file.
pub fn manifest_path(result: &Path) -> PathBuf {
    let mut name = result.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}
