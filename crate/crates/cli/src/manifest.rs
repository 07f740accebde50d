//! Run manifests: enough to reproduce any output bit for bit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    /// fnv1a64 content hashes of input files.
    pub inputs: BTreeMap<String, String>,
    /// fnv1a64 content hashes of output files.
    pub outputs: BTreeMap<String, String>,
    pub wall_clock_secs: f64,
}

pub struct ManifestBuilder {
    command: String,
    params: BTreeMap<String, String>,
    seed: u64,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: u64) -> Self {
        ManifestBuilder {
            command: command.into(),
            params: BTreeMap::new(),
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            started: Instant::now(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.params.insert(key.into(), value.to_string());
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        let hash = hash_file(path)?;
        self.inputs.insert(path.display().to_string(), hash);
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> Result<&mut Self> {
        let hash = hash_file(path)?;
        self.outputs.insert(path.display().to_string(), hash);
        Ok(self)
    }

    /// Writes `<out>.manifest.json` next to the named output.
    pub fn write_next_to(self, out: &Path) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command,
            params: self.params,
            seed: self.seed,
            inputs: self.inputs,
            outputs: self.outputs,
            wall_clock_secs: self.started.elapsed().as_secs_f64(),
        };
        let mut path = out.as_os_str().to_owned();
        path.push(".manifest.json");
        let path = PathBuf::from(path);
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(format!("{:016x}", fnv1a64(&bytes)))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
