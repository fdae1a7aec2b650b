//! Run manifests: JSON records that make pipeline runs reproducible.
//!
//! A manifest stores the generator settings, the detector list, the
//! relative paths of the artifacts it describes, and a SHA-256 checksum
//! per artifact. Manifests contain no timestamps and no absolute paths,
//! so identical runs produce byte-identical manifests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ftmf_core::ScenarioConfig;

use crate::error::{CliError, Result};

/// Tool version stamped into every manifest.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Scenario settings as stored on disk. The tail index is kept as a
/// string because JSON has no spelling for infinity; `inf` round-trips
/// through the standard float parser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSettings {
    pub nu: String,
    pub d: usize,
    #[serde(rename = "T")]
    pub target_amplitude: f64,
    pub alpha: f64,
    pub n: usize,
    pub seed: u64,
}

impl ScenarioSettings {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        ScenarioSettings {
            nu: format_float(config.nu),
            d: config.d,
            target_amplitude: config.target_amplitude,
            alpha: config.alpha,
            n: config.n,
            seed: config.seed,
        }
    }

    pub fn to_config(&self) -> Result<ScenarioConfig> {
        let nu: f64 = self.nu.parse().map_err(|_| {
            CliError::Validation(format!("manifest: could not parse nu `{}`", self.nu))
        })?;
        let config = ScenarioConfig {
            nu,
            d: self.d,
            target_amplitude: self.target_amplitude,
            alpha: self.alpha,
            n: self.n,
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Record of a simulate run: settings, detectors, and the generated
/// artifacts with their checksums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: ScenarioSettings,
    pub detectors: Vec<String>,
    /// Artifact role (for example `background`) to relative file name.
    pub artifacts: BTreeMap<String, String>,
    /// Relative file name to SHA-256 hex digest.
    pub checksums: BTreeMap<String, String>,
}

/// Record of a score run: which detectors ran, which tail index was
/// used and where it came from, the input checksums, and the produced
/// artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresManifest {
    pub tool_version: String,
    pub detectors: Vec<String>,
    /// Tail index used for scoring, formatted like a config value.
    pub nu: String,
    /// Where the tail index came from: `manifest`, `override`, or
    /// `estimated`.
    pub nu_source: String,
    /// True when the tail index was estimated from fewer rows than the
    /// estimator is calibrated for.
    pub nu_low_sample: bool,
    /// Consumed file name to SHA-256 hex digest.
    pub inputs: BTreeMap<String, String>,
    pub artifacts: BTreeMap<String, String>,
    pub checksums: BTreeMap<String, String>,
}

/// Render a float the way config files spell it (`10`, `2.5`, `inf`).
pub fn format_float(value: f64) -> String {
    format!("{value}")
}

/// SHA-256 digest of a file, as lowercase hex.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(digest.len() * 2);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Validation(format!("could not serialize manifest: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: invalid manifest: {e}", path.display())))
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        save_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        load_json(path)
    }
}

impl ScoresManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        save_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        load_json(path)
    }
}
