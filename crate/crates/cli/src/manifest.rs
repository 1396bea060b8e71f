use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::run::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path, recorded_as: PathBuf) -> Result<Self> {
        Ok(FileDigest {
            path: recorded_as,
            sha256: sha256_file(path)?,
        })
    }
}

/// Everything needed to re-run a command. `command` and `config` come from
/// the flattened [`RunConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    #[serde(flatten)]
    pub run: RunConfig,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Hash of the canonical JSON form of a resolved config.
pub fn config_hash(run: &RunConfig) -> String {
    sha256_hex(&serde_json::to_vec(run).expect("config serializes"))
}

impl Manifest {
    pub fn new(seed: u64, run: RunConfig, out_dir: &Path, outputs: &[&str]) -> Result<Self> {
        let outputs = outputs
            .iter()
            .map(|name| FileDigest::of(&out_dir.join(name), PathBuf::from(name)))
            .collect::<Result<_>>()?;
        Ok(Manifest {
            tool_version: TOOL_VERSION.to_string(),
            seed,
            config_hash: config_hash(&run),
            run,
            outputs,
        })
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}
