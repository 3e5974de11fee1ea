use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one run: enough to reproduce every output byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub params: serde_json::Value,
    pub seed: u64,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// Files of one run, written together once everything is computed.
pub struct Outputs {
    pub files: Vec<(String, String)>,
}

impl Outputs {
    pub fn new() -> Self {
        Outputs { files: Vec::new() }
    }

    pub fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    /// Writes every file plus the manifest into `dir`; returns the paths.
    pub fn write(
        self,
        dir: &Path,
        command: &str,
        params: serde_json::Value,
        seed: u64,
    ) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir)?;
        let manifest = Manifest {
            version: qwsearch::VERSION.to_string(),
            command: command.to_string(),
            params,
            seed,
            outputs: self.files.iter().map(|(name, _)| name.clone()).collect(),
        };
        let mut written = Vec::with_capacity(self.files.len() + 1);
        for (name, contents) in self.files {
            let path = dir.join(&name);
            fs::write(&path, contents)?;
            written.push(path);
        }
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, manifest.to_json())?;
        written.push(path);
        Ok(written)
    }
}

impl Default for Outputs {
    fn default() -> Self {
        Self::new()
    }
}
