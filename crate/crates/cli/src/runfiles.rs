//! Per-run output bookkeeping: the resolved-config echo and the run
//! manifest. Manifests record file names (not paths) and content hashes so
//! identical runs produce byte-identical manifests regardless of where the
//! inputs live.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::errors::{CliError, CliResult};

pub struct RunContext {
    pub out_dir: PathBuf,
    command: String,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    config_sha256: Option<String>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

impl RunContext {
    pub fn create(command: &str, out_dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out_dir.display())))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            command: command.to_string(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            config_sha256: None,
        })
    }

    /// Record an input file by basename + content hash.
    pub fn record_input(&mut self, path: &Path) -> CliResult<()> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let digest = sha256_file(path)?;
        self.inputs.insert(name, digest);
        Ok(())
    }

    /// Write the resolved-config echo and remember its hash.
    pub fn write_config_echo<T: Serialize>(&mut self, resolved: &T) -> CliResult<()> {
        let text = toml::to_string_pretty(resolved)
            .map_err(|e| CliError::runtime(format!("config echo serialization: {e}")))?;
        self.config_sha256 = Some(hex(&Sha256::digest(text.as_bytes())));
        std::fs::write(self.out_dir.join("resolved_config.toml"), text)?;
        self.outputs.push("resolved_config.toml".to_string());
        Ok(())
    }

    /// Write an output file and track it in the manifest.
    pub fn write_output(&mut self, name: &str, contents: &[u8]) -> CliResult<()> {
        std::fs::write(self.out_dir.join(name), contents)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_output_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::runtime(format!("serializing {name}: {e}")))?;
        text.push('\n');
        self.write_output(name, text.as_bytes())
    }

    /// Note an output file that was written directly by library code.
    pub fn note_output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    /// Finish the run: write `run_manifest.json`.
    pub fn finish(mut self) -> CliResult<()> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            command: &'a str,
            version: &'a str,
            config_sha256: Option<&'a str>,
            inputs: &'a BTreeMap<String, String>,
            outputs: &'a [String],
        }
        self.outputs.sort();
        let manifest = Manifest {
            command: &self.command,
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: self.config_sha256.as_deref(),
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::runtime(format!("manifest serialization: {e}")))?;
        text.push('\n');
        std::fs::write(self.out_dir.join("run_manifest.json"), text)?;
        Ok(())
    }
}

/// Parse an optional TOML config file with unknown keys rejected.
pub fn load_config_file<T: serde::de::DeserializeOwned + Default>(
    path: Option<&Path>,
) -> CliResult<T> {
    match path {
        None => Ok(T::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::config(format!("cannot read config {}: {e}", path.display()))
            })?;
            toml::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
        }
    }
}
