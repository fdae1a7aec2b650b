//! The three pipeline commands: simulate, score, evaluate.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DVector;

use ftmf_core::{
    estimate_mean_cov, false_alarm_at_detection, generate, mfr_project, pairwise_auc, roc,
    score_batch_detailed, whiten, BackgroundModel, DataMatrix, DetectorKind, Label, ScoreSet,
    TargetSpec,
};

use crate::config::{load_config, parse_detector_list};
use crate::error::{CliError, Result};
use crate::manifest::{
    format_float, sha256_file, RunManifest, ScenarioSettings, ScoresManifest, TOOL_VERSION,
};
use crate::tables::{
    read_matrix, read_scores, write_matrix, write_metrics, write_roc, write_scores, MetricsRow,
    RocRow, RowLabel, ScoreRow,
};

/// File names a simulate run writes into its output directory.
pub const MANIFEST_FILE: &str = "manifest.json";
pub const BACKGROUND_FILE: &str = "background.csv";
pub const TARGETS_FILE: &str = "targets.csv";

/// Detection rate at which the operating point is reported.
const REPORTED_DETECTION_RATE: f64 = 0.5;

/// Keep a library error's exit-code class while prefixing its message.
fn with_context(context: &str, err: ftmf_core::Error) -> CliError {
    match CliError::from(err) {
        CliError::Validation(m) => CliError::Validation(format!("{context}: {m}")),
        CliError::Io(m) => CliError::Io(format!("{context}: {m}")),
        CliError::Numerical(m) => CliError::Numerical(format!("{context}: {m}")),
    }
}

/// Generate a scenario from a config file and write the three artifacts
/// (background matrix, target matrix, manifest) into the output
/// directory.
pub fn cmd_simulate(config_path: &Path, out_dir: Option<&Path>) -> Result<()> {
    let config = load_config(config_path)?;
    let dir = out_dir.unwrap_or(&config.outputs);
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;

    let scenario = generate(&config.scenario)?;
    let background_path = dir.join(BACKGROUND_FILE);
    let targets_path = dir.join(TARGETS_FILE);
    write_matrix(&background_path, &scenario.background)?;
    write_matrix(&targets_path, &scenario.targets)?;

    let manifest = RunManifest {
        tool_version: TOOL_VERSION.into(),
        config: ScenarioSettings::from_config(&config.scenario),
        detectors: config.detectors.iter().map(|k| k.name().into()).collect(),
        artifacts: BTreeMap::from([
            ("background".into(), BACKGROUND_FILE.into()),
            ("targets".into(), TARGETS_FILE.into()),
        ]),
        checksums: BTreeMap::from([
            (BACKGROUND_FILE.into(), sha256_file(&background_path)?),
            (TARGETS_FILE.into(), sha256_file(&targets_path)?),
        ]),
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    manifest.save(&manifest_path)?;

    println!(
        "wrote {}: {} background and {} target pixels, {} channels",
        manifest_path.display(),
        scenario.background.n_rows(),
        scenario.targets.n_rows(),
        scenario.background.n_channels(),
    );
    Ok(())
}

/// Arguments of the score command.
#[derive(Debug, Clone)]
pub struct ScoreOptions {
    /// Scenario manifest to score (labeled pipeline mode).
    pub manifest: Option<PathBuf>,
    /// Whitened sample matrix to score (unlabeled real-data mode).
    pub matrix: Option<PathBuf>,
    /// Target signature for real-data mode, as comma-separated values.
    pub target: Option<String>,
    /// Comma-separated detector list; defaults to the manifest's list
    /// or, for real-data mode, to all six detectors.
    pub detectors: Option<String>,
    /// Use this tail index instead of the manifest value.
    pub nu_override: Option<f64>,
    /// Estimate the tail index from the data.
    pub estimate_nu: bool,
    /// Output scores file.
    pub out: PathBuf,
}

/// Where the scoring tail index came from.
enum NuChoice {
    Manifest(f64),
    Override(f64),
    Estimated { nu: f64, low_sample: bool },
}

impl NuChoice {
    fn nu(&self) -> f64 {
        match *self {
            NuChoice::Manifest(nu) | NuChoice::Override(nu) => nu,
            NuChoice::Estimated { nu, .. } => nu,
        }
    }

    fn source(&self) -> &'static str {
        match self {
            NuChoice::Manifest(_) => "manifest",
            NuChoice::Override(_) => "override",
            NuChoice::Estimated { .. } => "estimated",
        }
    }

    fn low_sample(&self) -> bool {
        matches!(
            self,
            NuChoice::Estimated {
                low_sample: true,
                ..
            }
        )
    }
}

/// Estimate the tail index from raw rows: fit the mean and covariance,
/// whiten, then invert the fourth-moment relation.
fn estimate_nu_from_rows(context: &str, data: &DataMatrix) -> Result<NuChoice> {
    let (mu, cov) = estimate_mean_cov(data).map_err(|e| with_context(context, e))?;
    let whitened = whiten(data, &mu, &cov).map_err(|e| with_context(context, e))?;
    let est = ftmf_core::estimate_nu(&whitened).map_err(|e| with_context(context, e))?;
    Ok(NuChoice::Estimated {
        nu: est.nu,
        low_sample: est.low_sample,
    })
}

/// One scored input matrix: rows share a label and a pixel-index base.
struct ScorePart {
    data: DataMatrix,
    label: RowLabel,
    base: usize,
    context: &'static str,
}

/// Score every part with every detector and assemble pixel-major rows.
fn assemble_rows(
    parts: &[ScorePart],
    model: &BackgroundModel,
    target: &TargetSpec,
    detectors: &[DetectorKind],
) -> Result<Vec<ScoreRow>> {
    let mut detailed = Vec::with_capacity(detectors.len());
    for kind in detectors {
        let mut per_part = Vec::with_capacity(parts.len());
        for part in parts {
            let scored = score_batch_detailed(&part.data, model, target, *kind)
                .map_err(|e| with_context(part.context, e))?;
            per_part.push(scored);
        }
        detailed.push(per_part);
    }

    let total: usize = parts.iter().map(|p| p.data.n_rows()).sum();
    let mut rows = Vec::with_capacity(total * detectors.len());
    for (part_index, part) in parts.iter().enumerate() {
        let mut scored: Vec<_> = detailed
            .iter()
            .map(|per_part| per_part[part_index].iter())
            .collect();
        for i in 0..part.data.n_rows() {
            let x = part.data.row(i);
            let point = mfr_project(&x, target).map_err(|e| with_context(part.context, e))?;
            for (kind, pixel_scores) in detectors.iter().zip(scored.iter_mut()) {
                let pixel_score = pixel_scores.next().expect("one score per row");
                rows.push(ScoreRow {
                    pixel: part.base + i,
                    label: part.label,
                    detector: *kind,
                    score: pixel_score.score,
                    alpha_hat: pixel_score.alpha_hat,
                    mf: point.mf,
                    residual: point.residual,
                });
            }
        }
    }
    Ok(rows)
}

fn requested_detectors(
    flag: Option<&str>,
    fallback: impl FnOnce() -> Result<Vec<DetectorKind>>,
) -> Result<Vec<DetectorKind>> {
    match flag {
        Some(text) => parse_detector_list(text).map_err(CliError::Validation),
        None => fallback(),
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Score pixels against a scenario manifest or a raw whitened matrix,
/// writing a scores file and a sibling scores manifest.
pub fn cmd_score(opts: &ScoreOptions) -> Result<()> {
    match (&opts.manifest, &opts.matrix) {
        (Some(manifest), None) => score_scenario(opts, manifest),
        (None, Some(matrix)) => score_matrix(opts, matrix),
        _ => Err(CliError::Validation(
            "provide exactly one of --manifest or --matrix".into(),
        )),
    }
}

fn score_scenario(opts: &ScoreOptions, manifest_path: &Path) -> Result<()> {
    let manifest = RunManifest::load(manifest_path)?;
    let config = manifest.config.to_config()?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut inputs = BTreeMap::new();
    inputs.insert(file_name(manifest_path), sha256_file(manifest_path)?);
    let mut artifact_path = |role: &str| -> Result<PathBuf> {
        let name = manifest.artifacts.get(role).ok_or_else(|| {
            CliError::Validation(format!(
                "{}: manifest lists no `{role}` artifact",
                manifest_path.display()
            ))
        })?;
        let path = dir.join(name);
        let digest = sha256_file(&path)?;
        match manifest.checksums.get(name) {
            Some(expected) if *expected == digest => {}
            Some(_) => {
                return Err(CliError::Validation(format!(
                    "{}: checksum mismatch; file changed since the manifest was written",
                    path.display()
                )))
            }
            None => {
                return Err(CliError::Validation(format!(
                    "{}: manifest records no checksum for `{name}`",
                    manifest_path.display()
                )))
            }
        }
        inputs.insert(name.clone(), digest);
        Ok(path)
    };
    let background_path = artifact_path("background")?;
    let targets_path = artifact_path("targets")?;

    let background = read_matrix(&background_path)?;
    let targets = read_matrix(&targets_path)?;
    for (name, data) in [(BACKGROUND_FILE, &background), (TARGETS_FILE, &targets)] {
        if data.n_channels() != config.d {
            return Err(CliError::Validation(format!(
                "{name} has {} channels but the manifest says d = {}",
                data.n_channels(),
                config.d
            )));
        }
    }

    let detectors = requested_detectors(opts.detectors.as_deref(), || {
        if manifest.detectors.is_empty() {
            return Err(CliError::Validation(format!(
                "{}: manifest lists no detectors",
                manifest_path.display()
            )));
        }
        let mut kinds = Vec::with_capacity(manifest.detectors.len());
        for name in &manifest.detectors {
            let kind = DetectorKind::from_str(name).map_err(|e| with_context("manifest", e))?;
            kinds.push(kind);
        }
        Ok(kinds)
    })?;

    let nu_choice = if let Some(nu) = opts.nu_override {
        NuChoice::Override(nu)
    } else if opts.estimate_nu {
        estimate_nu_from_rows(BACKGROUND_FILE, &background)?
    } else {
        NuChoice::Manifest(config.nu)
    };

    let model = BackgroundModel::standard(config.d, nu_choice.nu())?;
    let target = config.make_target()?;
    let n = background.n_rows();
    let parts = [
        ScorePart {
            data: background,
            label: RowLabel::Background,
            base: 0,
            context: BACKGROUND_FILE,
        },
        ScorePart {
            data: targets,
            label: RowLabel::Target,
            base: n,
            context: TARGETS_FILE,
        },
    ];
    let rows = assemble_rows(&parts, &model, &target, &detectors)?;
    write_outputs(opts, &detectors, &nu_choice, inputs, rows)
}

fn score_matrix(opts: &ScoreOptions, matrix_path: &Path) -> Result<()> {
    let data = read_matrix(matrix_path)?;
    let target_text = opts.target.as_deref().ok_or_else(|| {
        CliError::Validation("real-data scoring needs --target with the signature values".into())
    })?;
    let mut entries = Vec::new();
    for part in target_text.split(',') {
        let value: f64 = part.trim().parse().map_err(|_| {
            CliError::Validation(format!("could not parse `{}` in --target", part.trim()))
        })?;
        entries.push(value);
    }
    if entries.len() != data.n_channels() {
        return Err(CliError::Validation(format!(
            "--target has {} entries but the matrix has {} channels",
            entries.len(),
            data.n_channels()
        )));
    }
    let target = TargetSpec::new(DVector::from_vec(entries))?;

    let nu_choice = if let Some(nu) = opts.nu_override {
        NuChoice::Override(nu)
    } else if opts.estimate_nu {
        estimate_nu_from_rows("matrix", &data)?
    } else {
        return Err(CliError::Validation(
            "real-data scoring needs --nu-override or --estimate-nu".into(),
        ));
    };

    let detectors =
        requested_detectors(opts.detectors.as_deref(), || Ok(DetectorKind::ALL.to_vec()))?;
    let model = BackgroundModel::standard(data.n_channels(), nu_choice.nu())?;
    let inputs = BTreeMap::from([(file_name(matrix_path), sha256_file(matrix_path)?)]);
    let parts = [ScorePart {
        data,
        label: RowLabel::Unlabeled,
        base: 0,
        context: "matrix",
    }];
    let rows = assemble_rows(&parts, &model, &target, &detectors)?;
    write_outputs(opts, &detectors, &nu_choice, inputs, rows)
}

fn write_outputs(
    opts: &ScoreOptions,
    detectors: &[DetectorKind],
    nu_choice: &NuChoice,
    inputs: BTreeMap<String, String>,
    rows: Vec<ScoreRow>,
) -> Result<()> {
    write_scores(&opts.out, &rows)?;
    let out_name = file_name(&opts.out);
    let scores_manifest = ScoresManifest {
        tool_version: TOOL_VERSION.into(),
        detectors: detectors.iter().map(|k| k.name().into()).collect(),
        nu: format_float(nu_choice.nu()),
        nu_source: nu_choice.source().into(),
        nu_low_sample: nu_choice.low_sample(),
        inputs,
        artifacts: BTreeMap::from([("scores".into(), out_name.clone())]),
        checksums: BTreeMap::from([(out_name, sha256_file(&opts.out)?)]),
    };
    let manifest_path = opts.out.with_extension("manifest.json");
    scores_manifest.save(&manifest_path)?;
    println!(
        "scored {} pixels with {} detectors (nu = {}, {}) -> {}",
        rows.len() / detectors.len().max(1),
        detectors.len(),
        scores_manifest.nu,
        scores_manifest.nu_source,
        opts.out.display(),
    );
    Ok(())
}

/// Compute per-detector metrics from a scores file: exact pairwise AUC
/// and the false-alarm rate at 50 percent detection, plus the threshold
/// that realizes it. Optionally write full ROC curves.
pub fn cmd_evaluate(scores_path: &Path, out: &Path, roc_out: Option<&Path>) -> Result<()> {
    let rows = read_scores(scores_path)?;

    let mut groups: Vec<(DetectorKind, Vec<f64>, Vec<Label>)> = Vec::new();
    for row in &rows {
        let label = match row.label {
            RowLabel::Background => Label::Background,
            RowLabel::Target => Label::Target,
            RowLabel::Unlabeled => {
                return Err(CliError::Validation(format!(
                    "{}: contains unlabeled rows; evaluation needs background and target labels",
                    scores_path.display()
                )))
            }
        };
        match groups.iter_mut().find(|(kind, _, _)| *kind == row.detector) {
            Some((_, scores, labels)) => {
                scores.push(row.score);
                labels.push(label);
            }
            None => groups.push((row.detector, vec![row.score], vec![label])),
        }
    }

    let mut metrics = Vec::with_capacity(groups.len());
    let mut roc_rows = Vec::new();
    for (kind, scores, labels) in groups {
        let context = format!("detector `{kind}`");
        let set = ScoreSet::new(scores, labels)
            .map_err(|e| with_context(&context, e))?
            .with_detector(kind);
        let auc = pairwise_auc(&set).map_err(|e| with_context(&context, e))?;
        let op = false_alarm_at_detection(&set, REPORTED_DETECTION_RATE)
            .map_err(|e| with_context(&context, e))?;
        metrics.push(MetricsRow {
            detector: kind,
            auc,
            far_at_pd50: op.far,
            threshold: op.threshold,
        });
        if roc_out.is_some() {
            let curve = roc(&set).map_err(|e| with_context(&context, e))?;
            roc_rows.extend(curve.points.iter().map(|p| RocRow {
                detector: kind,
                threshold: p.threshold,
                far: p.far,
                pd: p.pd,
            }));
        }
    }

    write_metrics(out, &metrics)?;
    if let Some(roc_path) = roc_out {
        write_roc(roc_path, &roc_rows)?;
    }
    println!("evaluated {} detectors -> {}", metrics.len(), out.display());
    Ok(())
}
