//! Headered CSV readers and writers for the pipeline artifacts.
//!
//! All files use `\n` line endings, a trailing newline, and the
//! shortest round-trip decimal rendering of each float, so a rerun with
//! the same inputs writes byte-identical files. Readers report problems
//! with the 1-based line number of the offending row.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use ftmf_core::{DataMatrix, DetectorKind};

use crate::error::{CliError, Result};
use crate::manifest::format_float;

/// Column header of a scores file.
pub const SCORES_HEADER: &str = "pixel,label,detector,score,alpha_hat,mf,residual";
/// Column header of a metrics file.
pub const METRICS_HEADER: &str = "detector,auc,far_at_pd50,threshold";
/// Column header of a ROC file.
pub const ROC_HEADER: &str = "detector,threshold,far,pd";

/// Class column of a scores row. Real-data scoring produces unlabeled
/// rows, which evaluation refuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowLabel {
    Background,
    Target,
    Unlabeled,
}

impl std::fmt::Display for RowLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RowLabel::Background => "background",
            RowLabel::Target => "target",
            RowLabel::Unlabeled => "unlabeled",
        })
    }
}

impl FromStr for RowLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "background" => Ok(RowLabel::Background),
            "target" => Ok(RowLabel::Target),
            "unlabeled" => Ok(RowLabel::Unlabeled),
            other => Err(format!(
                "unknown label `{other}`; expected background, target, or unlabeled"
            )),
        }
    }
}

/// One row of a scores file: one pixel scored by one detector.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub pixel: usize,
    pub label: RowLabel,
    pub detector: DetectorKind,
    pub score: f64,
    /// Estimated fill fraction; replacement detectors only.
    pub alpha_hat: Option<f64>,
    pub mf: f64,
    pub residual: f64,
}

/// One row of a metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub detector: DetectorKind,
    pub auc: f64,
    pub far_at_pd50: f64,
    pub threshold: f64,
}

/// One row of a ROC file.
#[derive(Debug, Clone, PartialEq)]
pub struct RocRow {
    pub detector: DetectorKind,
    pub threshold: f64,
    pub far: f64,
    pub pd: f64,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Data lines of a CSV body: (1-based line number, line), header
/// skipped, carriage returns stripped.
fn body_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.trim_end_matches('\r')))
        .skip(1)
}

fn parse_finite(path: &Path, line: usize, column: &str, text: &str) -> Result<f64> {
    let value: f64 = text.parse().map_err(|_| {
        CliError::at_line(
            path,
            line,
            format!("could not parse `{text}` as `{column}`"),
        )
    })?;
    if !value.is_finite() {
        return Err(CliError::at_line(
            path,
            line,
            format!("column `{column}` must be finite, got `{text}`"),
        ));
    }
    Ok(value)
}

fn split_fields<'a>(
    path: &Path,
    line: usize,
    text: &'a str,
    expected: usize,
) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = text.split(',').collect();
    if fields.len() != expected {
        return Err(CliError::at_line(
            path,
            line,
            format!("expected {expected} fields, got {}", fields.len()),
        ));
    }
    Ok(fields)
}

/// Write a data matrix with a `c0,c1,...` header, one pixel per row.
pub fn write_matrix(path: &Path, data: &DataMatrix) -> Result<()> {
    let d = data.n_channels();
    let mut out = String::new();
    for c in 0..d {
        if c > 0 {
            out.push(',');
        }
        let _ = write!(out, "c{c}");
    }
    out.push('\n');
    let m = data.as_matrix();
    for i in 0..data.n_rows() {
        for c in 0..d {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&format_float(m[(i, c)]));
        }
        out.push('\n');
    }
    write_text(path, &out)
}

/// Parse a headered matrix. The header fixes the column count; its
/// names are not interpreted, so externally produced files are
/// accepted as-is.
pub fn parse_matrix(path: &Path, text: &str) -> Result<DataMatrix> {
    let header = text
        .lines()
        .next()
        .ok_or_else(|| CliError::at_line(path, 1, "empty file; expected a header row"))?;
    let d = header.trim_end_matches('\r').split(',').count();
    let mut values = Vec::new();
    let mut rows = 0usize;
    for (line_no, line) in body_lines(text) {
        if line.is_empty() {
            continue;
        }
        let fields = split_fields(path, line_no, line, d)?;
        for (c, field) in fields.iter().enumerate() {
            values.push(parse_finite(path, line_no, &format!("c{c}"), field)?);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::Validation(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok(DataMatrix::from_row_slice(rows, d, &values)?)
}

/// Read a headered matrix from a file.
pub fn read_matrix(path: &Path) -> Result<DataMatrix> {
    parse_matrix(path, &read_text(path)?)
}

/// Write scores rows under [`SCORES_HEADER`].
pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut out = String::from(SCORES_HEADER);
    out.push('\n');
    for row in rows {
        let alpha = row.alpha_hat.map(format_float).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.pixel,
            row.label,
            row.detector,
            format_float(row.score),
            alpha,
            format_float(row.mf),
            format_float(row.residual),
        );
    }
    write_text(path, &out)
}

/// Parse a scores file, enforcing the exact header.
pub fn parse_scores(path: &Path, text: &str) -> Result<Vec<ScoreRow>> {
    let header = text
        .lines()
        .next()
        .map(|h| h.trim_end_matches('\r'))
        .ok_or_else(|| CliError::at_line(path, 1, "empty file; expected a header row"))?;
    if header != SCORES_HEADER {
        return Err(CliError::at_line(
            path,
            1,
            format!("unexpected header `{header}`; expected `{SCORES_HEADER}`"),
        ));
    }
    let mut rows = Vec::new();
    for (line_no, line) in body_lines(text) {
        if line.is_empty() {
            continue;
        }
        let fields = split_fields(path, line_no, line, 7)?;
        let pixel: usize = fields[0].parse().map_err(|_| {
            CliError::at_line(
                path,
                line_no,
                format!("could not parse `{}` as `pixel`", fields[0]),
            )
        })?;
        let label =
            RowLabel::from_str(fields[1]).map_err(|msg| CliError::at_line(path, line_no, msg))?;
        let detector =
            DetectorKind::from_str(fields[2]).map_err(|e| CliError::at_line(path, line_no, e))?;
        let score = parse_finite(path, line_no, "score", fields[3])?;
        let alpha_hat = if fields[4].is_empty() {
            None
        } else {
            Some(parse_finite(path, line_no, "alpha_hat", fields[4])?)
        };
        let mf = parse_finite(path, line_no, "mf", fields[5])?;
        let residual = parse_finite(path, line_no, "residual", fields[6])?;
        rows.push(ScoreRow {
            pixel,
            label,
            detector,
            score,
            alpha_hat,
            mf,
            residual,
        });
    }
    if rows.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok(rows)
}

/// Read a scores file.
pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    parse_scores(path, &read_text(path)?)
}

/// Write metrics rows under [`METRICS_HEADER`].
pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.detector,
            format_float(row.auc),
            format_float(row.far_at_pd50),
            format_float(row.threshold),
        );
    }
    write_text(path, &out)
}

/// Write ROC rows under [`ROC_HEADER`].
pub fn write_roc(path: &Path, rows: &[RocRow]) -> Result<()> {
    let mut out = String::from(ROC_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.detector,
            format_float(row.threshold),
            format_float(row.far),
            format_float(row.pd),
        );
    }
    write_text(path, &out)
}
