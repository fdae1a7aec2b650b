//! Flat key-value scenario configs.
//!
//! A config is plain text, one `key = value` pair per line. Blank lines
//! and lines starting with `#` are ignored. Recognized keys:
//!
//! ```text
//! nu        tail index, a number above 2 or `inf` for Gaussian
//! d         number of channels
//! T         target amplitude along the first channel
//! alpha     fill fraction in (0, 1)
//! n         pixels per class
//! seed      random seed
//! detectors comma-separated detector names (optional; default all six)
//! outputs   directory for generated artifacts (optional; default `.`)
//! ```
//!
//! Unknown keys, duplicate keys, and unparseable values are rejected
//! with the offending line number.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ftmf_core::{DetectorKind, ScenarioConfig};

use crate::error::{CliError, Result};

/// A parsed scenario config: the generator parameters plus the detector
/// list and output directory used by the pipeline commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub detectors: Vec<DetectorKind>,
    pub outputs: PathBuf,
}

/// Parse a comma-separated detector list, rejecting unknown names and
/// duplicates.
pub fn parse_detector_list(text: &str) -> std::result::Result<Vec<DetectorKind>, String> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let kind = DetectorKind::from_str(part).map_err(|e| e.to_string())?;
        if out.contains(&kind) {
            return Err(format!("detector `{}` listed twice", kind));
        }
        out.push(kind);
    }
    Ok(out)
}

struct RawField {
    line: usize,
    value: String,
}

/// Parse config text. `path` is used only for error messages.
pub fn parse_config(path: &Path, text: &str) -> Result<RunConfig> {
    const KEYS: [&str; 8] = ["nu", "d", "T", "alpha", "n", "seed", "detectors", "outputs"];
    let mut fields: Vec<(&str, RawField)> = Vec::new();
    let mut seen = BTreeSet::new();

    for (index, raw_line) in text.lines().enumerate() {
        let line_no = index + 1;
        let line = raw_line.trim_end_matches('\r').trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::at_line(path, line_no, "expected `key = value`"))?;
        let key = key.trim();
        let value = value.trim();
        let canonical = KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| CliError::at_line(path, line_no, format!("unknown key `{key}`")))?;
        if !seen.insert(*canonical) {
            return Err(CliError::at_line(
                path,
                line_no,
                format!("duplicate key `{key}`"),
            ));
        }
        fields.push((
            canonical,
            RawField {
                line: line_no,
                value: value.to_string(),
            },
        ));
    }

    let take = |key: &str| fields.iter().find(|(k, _)| *k == key).map(|(_, f)| f);
    let required = |key: &'static str| {
        take(key).ok_or_else(|| {
            CliError::Validation(format!("{}: missing required key `{key}`", path.display()))
        })
    };
    fn parse_as<T: FromStr>(path: &Path, key: &str, field: &RawField) -> Result<T> {
        field.value.parse::<T>().map_err(|_| {
            CliError::at_line(
                path,
                field.line,
                format!("could not parse `{}` as a value for `{key}`", field.value),
            )
        })
    }

    let nu: f64 = parse_as(path, "nu", required("nu")?)?;
    let d: usize = parse_as(path, "d", required("d")?)?;
    let target_amplitude: f64 = parse_as(path, "T", required("T")?)?;
    let alpha: f64 = parse_as(path, "alpha", required("alpha")?)?;
    let n: usize = parse_as(path, "n", required("n")?)?;
    let seed: u64 = parse_as(path, "seed", required("seed")?)?;

    let detectors = match take("detectors") {
        Some(field) => parse_detector_list(&field.value)
            .map_err(|msg| CliError::at_line(path, field.line, msg))?,
        None => DetectorKind::ALL.to_vec(),
    };
    let outputs = match take("outputs") {
        Some(field) => PathBuf::from(&field.value),
        None => PathBuf::from("."),
    };

    let scenario = ScenarioConfig {
        nu,
        d,
        target_amplitude,
        alpha,
        n,
        seed,
    };
    scenario.validate()?;

    Ok(RunConfig {
        scenario,
        detectors,
        outputs,
    })
}

/// Read and parse a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(path, &text)
}
