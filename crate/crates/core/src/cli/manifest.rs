// Copyright (c) The swarm-consensus Authors.
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Reproduction record written at the end of every run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub config_sha256: String,
    pub output_dir: PathBuf,
    /// File name -> SHA-256 of its contents.
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Collects artifacts written to one output directory and their checksums.
pub struct ArtifactSet {
    dir: PathBuf,
    checksums: BTreeMap<String, String>,
}

impl ArtifactSet {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            checksums: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.checksums.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn finish<C: Serialize>(self, command: &str, seed: u64, config: &C) -> io::Result<RunManifest> {
        let config = serde_json::to_value(config).map_err(io::Error::other)?;
        let config_sha256 = sha256_hex(config.to_string().as_bytes());
        let manifest = RunManifest {
            command: command.to_string(),
            seed,
            config,
            config_sha256,
            output_dir: self.dir.clone(),
            artifacts: self.checksums,
        };
        let mut text = serde_json::to_vec_pretty(&manifest).map_err(io::Error::other)?;
        text.push(b'\n');
        write_atomic(&self.dir.join(MANIFEST_FILE), &text)?;
        Ok(manifest)
    }
}
