//! Error types shared across the crate.

/// Everything that can go wrong in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A vector or matrix had a different dimension than the model expects.
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A data matrix with zero rows or zero columns was supplied.
    #[error("data matrix must have at least one row and one column")]
    EmptyMatrix,

    /// A NaN or infinity showed up in input data.
    #[error("non-finite value in input at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    /// Cholesky factorization hit a non-positive pivot; the matrix is not
    /// positive definite (singular or indefinite). `pivot` is the zero-based
    /// index of the offending diagonal entry.
    #[error("matrix is not positive definite (pivot {pivot} is not positive)")]
    NotPositiveDefinite { pivot: usize },

    /// A scalar parameter was outside its legal range.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// A detector name that is not one of the six supported detectors.
    #[error("unknown detector `{0}`; expected one of amf, ec-amf, ace, ftmf, ec-ftmf, ftce")]
    UnknownDetector(String),

    /// The replacement-model likelihood equation collapsed (no quadratic
    /// term); happens only when the target signature equals the background
    /// mean under the heaviest admissible tail.
    #[error("degenerate likelihood equation: target signature coincides with the background mean")]
    DegenerateQuadratic,

    /// A statistic whose definition divides by a quantity that is zero for
    /// this input (e.g. ACE at the background mean).
    #[error("statistic undefined for this input: {0}")]
    UndefinedStatistic(&'static str),

    /// An operation that needs finite tail weight was asked to run on the
    /// Gaussian (infinite degrees of freedom) branch.
    #[error("{what} requires a finite tail parameter")]
    RequiresFiniteTail { what: &'static str },

    /// ROC-style evaluation needs at least one score from each class.
    #[error("need at least one background and one target score")]
    SingleClass,

    /// Score and label slices disagree in length.
    #[error("label count {labels} does not match score count {scores}")]
    LabelCountMismatch { labels: usize, scores: usize },

    /// A detector produced a NaN score; evaluation cannot rank it.
    #[error("non-finite score at index {index}")]
    NonFiniteScore { index: usize },

    /// Error from processing one row of a batch, with the row attached.
    #[error("row {row}: {source}")]
    AtRow {
        row: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the index of the batch row that produced it.
    pub fn at_row(self, row: usize) -> Self {
        Error::AtRow {
            row,
            source: Box::new(self),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn messages_name_the_offending_field() {
        let e = Error::InvalidParameter {
            field: "alpha",
            reason: "must lie in (0, 1), got 1.5".into(),
        };
        let msg = e.to_string();
        assert!(msg.contains("alpha"));
        assert!(msg.contains("1.5"));
    }

    #[test]
    fn row_wrapping_preserves_the_cause() {
        let e = Error::UndefinedStatistic("test ratio").at_row(7);
        let msg = e.to_string();
        assert!(msg.contains("row 7"));
        assert!(msg.contains("test ratio"));
    }

    #[test]
    fn unknown_detector_lists_the_valid_names() {
        let msg = Error::UnknownDetector("mahalanobis".into()).to_string();
        for name in ["amf", "ec-amf", "ace", "ftmf", "ec-ftmf", "ftce"] {
            assert!(msg.contains(name), "missing {name} in {msg}");
        }
    }
}
