use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use gravity::io::write_text;
use gravity::{Error, Result};

#[derive(Serialize)]
struct InputDigest {
    path: PathBuf,
    sha256: String,
}

/// Record of one command run, written as `manifest.json` next to its
/// outputs.
#[derive(Serialize)]
pub struct RunManifest {
    command: &'static str,
    version: &'static str,
    config: serde_json::Value,
    seed: u64,
    inputs: Vec<InputDigest>,
    outputs: Vec<PathBuf>,
    duration_secs: f64,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunManifest {
    pub fn start(command: &'static str, config: &impl Serialize, seed: u64) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config: serde_json::to_value(config).expect("arguments serialise"),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            duration_secs: 0.0,
            started: Some(Instant::now()),
        }
    }

    /// Records an output written elsewhere.
    pub fn record(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.inputs.push(InputDigest {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    /// Writes `text` to `dir/name` and records it.
    pub fn output(&mut self, dir: &Path, name: &str, text: &str) -> Result<()> {
        let path = dir.join(name);
        write_text(&path, text)?;
        self.outputs.push(path);
        Ok(())
    }

    pub fn output_bytes(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        let path = dir.join(name);
        write_text(&path, "")?;
        std::fs::write(&path, bytes).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        self.outputs.push(path);
        Ok(())
    }

    pub fn finish(mut self, dir: &Path) -> Result<()> {
        if let Some(t) = self.started.take() {
            self.duration_secs = t.elapsed().as_secs_f64();
        }
        let text = serde_json::to_string_pretty(&self).expect("manifest serialises");
        write_text(&dir.join("manifest.json"), &text)
    }
}
