//! Score evaluation: labeled score sets, ROC curves, exact pairwise AUC,
//! operating points at a fixed detection rate, rank correlation, and the
//! matched-filter-versus-residual projection.

use nalgebra::DVector;

use crate::detectors::{DetectorKind, TargetSpec};
use crate::error::{Error, Result};

/// Class of a scored pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Background,
    Target,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Label::Background => "background",
            Label::Target => "target",
        })
    }
}

/// A set of finite detection scores with per-score class labels,
/// optionally tagged with the detector that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    scores: Vec<f64>,
    labels: Vec<Label>,
    detector: Option<DetectorKind>,
}

impl ScoreSet {
    /// Pair scores with labels, rejecting length mismatches and
    /// non-finite scores (which cannot be ranked).
    pub fn new(scores: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::LabelCountMismatch {
                labels: labels.len(),
                scores: scores.len(),
            });
        }
        for (index, s) in scores.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFiniteScore { index });
            }
        }
        Ok(ScoreSet {
            scores,
            labels,
            detector: None,
        })
    }

    /// All scores share one label.
    pub fn uniform(scores: Vec<f64>, label: Label) -> Result<Self> {
        let labels = vec![label; scores.len()];
        Self::new(scores, labels)
    }

    /// Tag the set with the detector that produced it.
    pub fn with_detector(mut self, kind: DetectorKind) -> Self {
        self.detector = Some(kind);
        self
    }

    /// The detector that produced these scores, when known.
    pub fn detector(&self) -> Option<DetectorKind> {
        self.detector
    }

    /// Append another set, keeping order. The tag survives only when
    /// the two sides agree on it.
    pub fn concat(mut self, other: ScoreSet) -> ScoreSet {
        self.scores.extend(other.scores);
        self.labels.extend(other.labels);
        if self.detector != other.detector {
            self.detector = None;
        }
        self
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// (background count, target count).
    pub fn class_counts(&self) -> (usize, usize) {
        let targets = self.labels.iter().filter(|l| **l == Label::Target).count();
        (self.labels.len() - targets, targets)
    }

    /// Split into (background scores, target scores), preserving order
    /// within each class.
    pub fn split(&self) -> (Vec<f64>, Vec<f64>) {
        let mut bg = Vec::new();
        let mut tg = Vec::new();
        for (s, l) in self.scores.iter().zip(&self.labels) {
            match l {
                Label::Background => bg.push(*s),
                Label::Target => tg.push(*s),
            }
        }
        (bg, tg)
    }

    fn require_both_classes(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let (bg, tg) = self.split();
        if bg.is_empty() || tg.is_empty() {
            return Err(Error::SingleClass);
        }
        Ok((bg, tg))
    }
}

/// One point of a ROC curve: at threshold `threshold`, a pixel is
/// declared a detection when its score is at or above the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    /// Fraction of background pixels at or above the threshold.
    pub far: f64,
    /// Fraction of target pixels at or above the threshold.
    pub pd: f64,
}

/// A ROC curve: starts at (0, 0), ends at (1, 1), both coordinates
/// nondecreasing, one point per distinct score (ties grouped), plus
/// the exact pairwise area under the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Sweep a threshold over the distinct score values, highest first.
pub fn roc(set: &ScoreSet) -> Result<RocCurve> {
    let auc = pairwise_auc(set)?;
    let (mut bg, mut tg) = set.require_both_classes()?;
    bg.sort_by(|a, b| b.partial_cmp(a).expect("scores validated finite"));
    tg.sort_by(|a, b| b.partial_cmp(a).expect("scores validated finite"));
    let mut thresholds: Vec<f64> = set.scores.clone();
    thresholds.sort_by(|a, b| b.partial_cmp(a).expect("scores validated finite"));
    thresholds.dedup();

    let mut points = Vec::with_capacity(thresholds.len() + 1);
    points.push(RocPoint {
        threshold: f64::INFINITY,
        far: 0.0,
        pd: 0.0,
    });
    let (mut i_bg, mut i_tg) = (0usize, 0usize);
    for th in thresholds {
        while i_bg < bg.len() && bg[i_bg] >= th {
            i_bg += 1;
        }
        while i_tg < tg.len() && tg[i_tg] >= th {
            i_tg += 1;
        }
        points.push(RocPoint {
            threshold: th,
            far: i_bg as f64 / bg.len() as f64,
            pd: i_tg as f64 / tg.len() as f64,
        });
    }
    Ok(RocCurve { points, auc })
}

/// Midranks (1-based, ties averaged) of a slice of finite values.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end + 1 < idx.len() && values[idx[end + 1]] == values[idx[start]] {
            end += 1;
        }
        let rank = (start + end + 2) as f64 / 2.0;
        for &i in &idx[start..=end] {
            ranks[i] = rank;
        }
        start = end + 1;
    }
    ranks
}

/// Exact pairwise AUC: the probability that a random target score beats
/// a random background score, ties counting one half. Computed through
/// midranks, which gives bit-identical results to the brute-force pair
/// count.
pub fn pairwise_auc(set: &ScoreSet) -> Result<f64> {
    let (bg, tg) = set.require_both_classes()?;
    let m = bg.len() as f64;
    let n = tg.len() as f64;
    let mut combined = bg;
    combined.extend_from_slice(&tg);
    let ranks = midranks(&combined);
    let r_t: f64 = ranks[combined.len() - tg.len()..].iter().sum();
    Ok((r_t - n * (n + 1.0) / 2.0) / (m * n))
}

/// An operating point: the threshold achieving a requested detection
/// rate, with the realized rates under the strict rule `score >
/// threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    /// Fraction of background scores strictly above the threshold.
    pub far: f64,
    /// Fraction of target scores strictly above the threshold.
    pub pd: f64,
}

/// False-alarm rate at a requested detection rate. The threshold is the
/// lower-midpoint order statistic of the target scores: the largest
/// target score with at least `rate` of the targets at or above it.
pub fn false_alarm_at_detection(set: &ScoreSet, rate: f64) -> Result<OperatingPoint> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidParameter {
            field: "rate",
            reason: format!("must lie strictly between 0 and 1, got {rate}"),
        });
    }
    let (bg, mut tg) = set.require_both_classes()?;
    tg.sort_by(|a, b| a.partial_cmp(b).expect("scores validated finite"));
    let m = tg.len();
    let k = (((1.0 - rate) * m as f64).ceil() as isize - 1).clamp(0, m as isize - 1) as usize;
    let threshold = tg[k];
    let far = bg.iter().filter(|s| **s > threshold).count() as f64 / bg.len() as f64;
    let pd = tg.iter().filter(|s| **s > threshold).count() as f64 / m as f64;
    Ok(OperatingPoint { threshold, far, pd })
}

/// Spearman rank correlation of two paired samples, using midranks for
/// ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "paired sample length",
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidParameter {
            field: "samples",
            reason: "need at least two pairs for a rank correlation".into(),
        });
    }
    for (index, v) in a.iter().chain(b.iter()).enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteScore {
                index: index % a.len(),
            });
        }
    }
    let ra = midranks(a);
    let rb = midranks(b);
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..a.len() {
        let xa = ra[i] - mean;
        let xb = rb[i] - mean;
        num += xa * xb;
        da += xa * xa;
        db += xb * xb;
    }
    if da == 0.0 || db == 0.0 {
        return Err(Error::UndefinedStatistic(
            "rank correlation of a constant sample",
        ));
    }
    Ok(num / (da * db).sqrt())
}

/// A pixel projected onto the target direction: matched-filter
/// coordinate along the unit target, and the norm of what remains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfrPoint {
    pub mf: f64,
    pub residual: f64,
}

/// Project `x` onto the target direction: `mf = t.x / |t|` and
/// `residual = sqrt(|x|^2 - mf^2)`. Together they satisfy
/// `mf^2 + residual^2 = |x|^2`.
pub fn mfr_project(x: &DVector<f64>, target: &TargetSpec) -> Result<MfrPoint> {
    if x.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            what: "pixel length",
            expected: target.dim(),
            actual: x.len(),
        });
    }
    let norm_t = target.vector().norm();
    let mf = target.vector().dot(x) / norm_t;
    let residual = (x.norm_squared() - mf * mf).max(0.0).sqrt();
    Ok(MfrPoint { mf, residual })
}
