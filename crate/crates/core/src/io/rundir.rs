//! Run directories: the resolved configuration plus a manifest naming the
//! crate version, seed and configuration hash. Re-running a command with the
//! stored `config.toml` reproduces every output except timings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::io::config::RunConfig;
use crate::io::{read_file, write_file, IoError};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: config.seed,
            config_hash: config.hash(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    /// Create the directory (and parents) and record the manifest and config.
    pub fn create(root: &Path, command: &str, config: &RunConfig) -> Result<Self, IoError> {
        std::fs::create_dir_all(root).map_err(|source| IoError::File { path: root.display().to_string(), source })?;
        let dir = RunDir { root: root.to_path_buf() };
        let manifest = serde_json::to_string_pretty(&Manifest::new(command, config))?;
        write_file(&dir.path(MANIFEST_FILE), format!("{manifest}\n").as_bytes())?;
        write_file(&dir.path(CONFIG_FILE), config.to_toml().as_bytes())?;
        Ok(dir)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<(), IoError> {
        write_file(&self.path(name), bytes)
    }
}

pub fn read_manifest(root: &Path) -> Result<Manifest, IoError> {
    Ok(serde_json::from_slice(&read_file(&root.join(MANIFEST_FILE))?)?)
}

/// Load the stored configuration and check it against the manifest hash.
pub fn read_config(root: &Path) -> Result<RunConfig, IoError> {
    let text = String::from_utf8(read_file(&root.join(CONFIG_FILE))?)
        .map_err(|_| IoError::Config("config.toml is not UTF-8".into()))?;
    let config = RunConfig::from_toml(&text)?;
    let manifest = read_manifest(root)?;
    if config.hash() != manifest.config_hash {
        return Err(IoError::Config(format!(
            "config hash {} does not match manifest {}",
            config.hash(),
            manifest.config_hash
        )));
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip_and_hash_check() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = RunConfig { seed: 42, ..RunConfig::default() };
        let dir = RunDir::create(&tmp.path().join("run"), "learn", &cfg).unwrap();
        let m = read_manifest(dir.root()).unwrap();
        assert_eq!(m, Manifest::new("learn", &cfg));
        assert_eq!(read_config(dir.root()).unwrap(), cfg);

        dir.write(CONFIG_FILE, b"seed = 43\n").unwrap();
        assert!(read_config(dir.root()).is_err());
    }
}
