//! Shared command plumbing: exit-code classification, atomic output writes,
//! input digests, run manifests, and config-file merging.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use tierank_core::{EvalError, TrainError};

/// Failed run, carrying the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, unreadable inputs, infeasible requests (exit 1).
    Validation(anyhow::Error),
    /// A numerical check ran and found violations (exit 2).
    Numerical(String),
    /// Training aborted on a non-finite loss or margin (exit 3).
    Diverged(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Diverged(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Validation(e) => write!(f, "{e:#}"),
            Failure::Numerical(m) | Failure::Diverged(m) => write!(f, "{m}"),
        }
    }
}

impl<E: std::error::Error + Send + Sync + 'static> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Validation(anyhow::Error::new(e))
    }
}

/// Maps divergence to its dedicated exit code; everything else is validation.
pub fn classify_train_error(e: TrainError) -> Failure {
    match e {
        TrainError::Diverged { .. } => Failure::Diverged(e.to_string()),
        other => Failure::Validation(other.into()),
    }
}

pub fn classify_eval_error(e: EvalError) -> Failure {
    match e {
        EvalError::Train(TrainError::Diverged { .. }) => Failure::Diverged(e.to_string()),
        other => Failure::Validation(other.into()),
    }
}

/// Writes through a temp file in the same directory and renames into place,
/// so outputs are never observable half-written.
pub fn atomic_write(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = match path.file_name() {
        Some(name) => path.with_file_name(format!(".{}.tmp", name.to_string_lossy())),
        None => {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                "output path has no file name",
            ))
        }
    };
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

pub fn sha256_hex(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Reproducibility record written beside every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    /// Resolved configuration with every default materialized.
    pub config: serde_json::Value,
    /// sha256 of each input file, keyed by the path as given.
    pub input_digests: BTreeMap<String, String>,
    /// Primary output file names, relative to the output directory.
    pub outputs: Vec<String>,
    /// Wall-clock stamp; the only line that may differ between reruns.
    pub unix_time_secs: u64,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            input_digests: BTreeMap::new(),
            outputs: Vec::new(),
            unix_time_secs: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> std::io::Result<()> {
        self.input_digests
            .insert(path.display().to_string(), sha256_hex(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn write(&self, out_dir: &Path) -> std::io::Result<()> {
        let mut text =
            serde_json::to_string_pretty(self).expect("manifest serialization cannot fail");
        text.push('\n');
        atomic_write(&out_dir.join("manifest.json"), &text)
    }
}

pub fn ensure_out_dir(out: &PathBuf) -> Result<(), Failure> {
    fs::create_dir_all(out)
        .map_err(|e| Failure::Validation(anyhow::anyhow!("cannot create {}: {e}", out.display())))
}

fn merge_value(base: &mut serde_json::Value, update: serde_json::Value) {
    match (base, update) {
        (serde_json::Value::Object(b), serde_json::Value::Object(u)) => {
            for (k, v) in u {
                match b.get_mut(&k) {
                    Some(slot) => merge_value(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, u) => *b = u,
    }
}

/// Resolves a command's parameters: library defaults, overridden by the
/// optional `--config` JSON file, overridden by explicitly passed flags.
pub fn resolve_params<P: Serialize + DeserializeOwned>(
    defaults: &P,
    config: Option<&Path>,
    cli_overlay: serde_json::Value,
) -> Result<P, Failure> {
    let mut value = serde_json::to_value(defaults)
        .map_err(|e| Failure::Validation(anyhow::anyhow!("defaults not serializable: {e}")))?;
    if let Some(path) = config {
        let text = fs::read_to_string(path).map_err(|e| {
            Failure::Validation(anyhow::anyhow!(
                "cannot read config {}: {e}",
                path.display()
            ))
        })?;
        let file_value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
            Failure::Validation(anyhow::anyhow!("bad config {}: {e}", path.display()))
        })?;
        merge_value(&mut value, file_value);
    }
    merge_value(&mut value, cli_overlay);
    serde_json::from_value(value)
        .map_err(|e| Failure::Validation(anyhow::anyhow!("invalid configuration: {e}")))
}
