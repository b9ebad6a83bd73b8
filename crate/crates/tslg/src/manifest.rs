//! Run manifests: everything needed to repeat a command, plus digests of
//! what it read and wrote so a replay can be checked byte for byte.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tslg_core::config::CaseConfig;

use crate::cli::Invocation;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(FileDigest {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        })
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let k = f.read(&mut buf)?;
        if k == 0 {
            break;
        }
        h.update(&buf[..k]);
    }
    Ok(h.finalize().iter().map(|b| format!("{:02x}", b)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub invocation: Invocation,
    /// The configuration the command actually ran with (seed included).
    pub config: CaseConfig,
    pub workers: usize,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Wall-clock milliseconds per phase. The only nondeterministic field.
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(invocation: Invocation, config: CaseConfig, workers: usize) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            invocation,
            config,
            workers,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    /// Digests that differ from the files now on disk.
    pub fn changed_outputs(&self) -> Result<Vec<PathBuf>> {
        let mut bad = Vec::new();
        for d in &self.outputs {
            if !d.path.exists() || sha256_file(&d.path)? != d.sha256 {
                bad.push(d.path.clone());
            }
        }
        Ok(bad)
    }
}

/// `lib.json` is described by `lib.manifest.json`.
pub fn manifest_path(primary: &Path) -> PathBuf {
    primary.with_extension("manifest.json")
}
