//! Run manifests: everything needed to reproduce a run, plus hashes of the
//! files it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::settings::Settings;
use crate::CliError;

/// File name of the manifest inside the output directory.
pub const MANIFEST_FILE: &str = "manifest.json";

/// One written output file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
}

/// Record of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// The `--system` argument as given.
    pub system_ref: String,
    /// SHA-256 of the serialized system configuration.
    pub system_hash: String,
    /// Full system configuration, parameters included.
    pub system: serde_json::Value,
    pub settings: Settings,
    /// Seeds of any randomized checks; the pipeline uses none.
    pub seeds: BTreeMap<String, u64>,
    pub versions: BTreeMap<String, String>,
    pub out_dir: String,
    pub outputs: Vec<OutputRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Version identifiers recorded in every manifest.
pub fn versions() -> BTreeMap<String, String> {
    let mut v = BTreeMap::new();
    v.insert("pulled-fronts".into(), pulled_fronts::VERSION.into());
    v.insert("pulled-fronts-cli".into(), env!("CARGO_PKG_VERSION").into());
    v.insert("manifest".into(), "1".into());
    v
}

/// Creates `dir` if needed and writes the files, returning their records.
pub fn write_outputs(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<OutputRecord>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut records = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        records.push(OutputRecord { path: name.clone(), sha256: sha256_hex(bytes) });
    }
    Ok(records)
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<RunManifest, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("manifest {}: {e}", path.display())))
    }
}
