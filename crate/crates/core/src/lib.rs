//! Subpixel target detection in correlated, heavy-tailed clutter.
//!
//! The crate models background pixels as draws from an elliptically
//! contoured family (multivariate Student-t, scaled so the supplied
//! matrix is the true covariance, with the Gaussian as the infinite-tail
//! member) and provides six detection statistics: three classical
//! additive-model filters and three replacement-model likelihood-ratio
//! detectors whose fill-fraction maximization is solved in closed form.
//! Scenario simulation and threshold-free evaluation (exact pairwise
//! AUC, ROC sweeps, operating points) round out the pipeline.

pub mod detectors;
pub mod error;
pub mod evaluate;
pub mod mvt;
pub mod simulate;
pub mod stats;

pub use detectors::{
    alpha_ml, ec_amf_statistic, log_likelihood_alpha, score, score_batch, score_batch_detailed,
    score_pixel, AlphaSolution, DetectorKind, Family, PixelScore, Tail, TargetSpec,
};
pub use error::{Error, Result};
pub use evaluate::{
    false_alarm_at_detection, mfr_project, pairwise_auc, roc, spearman, Label, MfrPoint,
    OperatingPoint, RocCurve, RocPoint, ScoreSet,
};
pub use mvt::{estimate_nu, BackgroundModel, NuEstimate};
pub use simulate::{generate, Scenario, ScenarioConfig};
pub use stats::{
    estimate_mean_cov, estimate_mean_cov_with_ridge, mahalanobis_sq, whiten, DataMatrix, SpdFactor,
};
