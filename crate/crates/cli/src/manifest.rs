use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance record written next to every output set.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// Fully resolved configuration in the input format.
    pub config: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub wall_clock_seconds: f64,
    pub status: String,
}

impl RunManifest {
    pub fn new(command: &str, config: String) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            wall_clock_seconds: 0.0,
            status: "ok".into(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn add_output(&mut self, name: &str, bytes: &[u8]) {
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
