use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use notegen::config::KvConfig;
use notegen::{Error, Result};

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct ExperimentManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub seed: u64,
    pub config: std::collections::BTreeMap<String, String>,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<String>,
    pub versions: std::collections::BTreeMap<String, String>,
    pub wall_clock_ms: u128,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes through a sibling temporary file and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub struct Recorder {
    command: String,
    seed: u64,
    started: Instant,
    inputs: Vec<InputFile>,
}

impl Recorder {
    pub fn new(command: &str, seed: u64) -> Self {
        Recorder { command: command.to_string(), seed, started: Instant::now(), inputs: Vec::new() }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputFile { path: path.display().to_string(), sha256: sha256_file(path)? });
        Ok(())
    }

    /// Writes `<primary>.manifest.json` naming `outputs`; call before
    /// writing the outputs themselves.
    pub fn finish(self, config: &KvConfig, primary: &Path, outputs: &[&Path]) -> Result<()> {
        let mut versions = std::collections::BTreeMap::new();
        versions.insert("notegen".to_string(), env!("CARGO_PKG_VERSION").to_string());
        versions.insert("abstractor_format".to_string(), notegen::abstractor::ABSTRACTOR_FORMAT.to_string());
        versions.insert("extractor_format".to_string(), notegen::extract::EXTRACTOR_FORMAT.to_string());
        let m = ExperimentManifest {
            command: self.command,
            argv: std::env::args().collect(),
            seed: self.seed,
            config: config.entries().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            inputs: self.inputs,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            versions,
            wall_clock_ms: self.started.elapsed().as_millis(),
        };
        let text = serde_json::to_string_pretty(&m).map_err(|e| Error::Runtime(e.to_string()))?;
        atomic_write(&sibling(primary, ".manifest.json"), text.as_bytes())
    }
}
