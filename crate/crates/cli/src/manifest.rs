use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lingprobe::pipeline::PipelineConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Hash of the config's canonical JSON.
pub fn config_hash(config: &PipelineConfig) -> String {
    sha256_hex(serde_json::to_string(config).expect("config serializes").as_bytes())
}

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool_version: &'static str,
    pub command: String,
    pub arguments: BTreeMap<String, String>,
    pub artifact: String,
    pub artifact_sha256: String,
    pub inputs: Vec<InputRecord>,
    pub seed: u64,
    pub config: PipelineConfig,
    pub config_sha256: String,
}

/// Everything one invocation read, shared by the manifests of its artifacts.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub command: &'static str,
    pub arguments: BTreeMap<String, String>,
    pub inputs: Vec<InputRecord>,
    pub config: PipelineConfig,
}

impl RunRecord {
    pub fn new(command: &'static str, config: &PipelineConfig) -> Self {
        RunRecord {
            command,
            arguments: BTreeMap::new(),
            inputs: Vec::new(),
            config: config.clone(),
        }
    }

    pub fn arg(&mut self, key: &str, value: impl ToString) {
        self.arguments.insert(key.into(), value.to_string());
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        self.inputs.push(InputRecord {
            role: role.into(),
            path: path.to_path_buf(),
            sha256: file_sha256(path)?,
        });
        Ok(())
    }

    /// Writes `contents` to `path` and its manifest to `<path>.manifest.json`.
    pub fn write_artifact(&self, path: &Path, contents: &[u8]) -> Result<()> {
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
        let manifest = Manifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            command: self.command.into(),
            arguments: self.arguments.clone(),
            artifact: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            artifact_sha256: sha256_hex(contents),
            inputs: self.inputs.clone(),
            seed: self.config.seed,
            config: self.config.clone(),
            config_sha256: config_hash(&self.config),
        };
        let mpath = manifest_path(path);
        let mut json = serde_json::to_string_pretty(&manifest)?;
        json.push('\n');
        fs::write(&mpath, json).with_context(|| format!("writing {}", mpath.display()))?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}
