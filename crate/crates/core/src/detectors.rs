//! The six detection statistics: three additive-model filters (matched
//! filter, tail-adjusted matched filter, cosine estimator) and three
//! replacement-model likelihood-ratio detectors, one per tail branch.
//!
//! The replacement model says an observed pixel is `x = (1 - alpha) z +
//! alpha t` for background `z` and target signature `t`, so the target
//! displaces background instead of adding to it. Its likelihood-ratio
//! detectors maximize over the fill fraction `alpha` in closed form: the
//! stationarity condition is a quadratic in `beta = 1 - alpha` whose
//! nonnegative root is the unique interior maximizer.

use std::fmt;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::mvt::BackgroundModel;
use crate::stats::DataMatrix;

/// Floor on `beta = 1 - alpha` when evaluating a replacement score whose
/// ML fill fraction reaches the `alpha = 1` endpoint; keeps the score
/// finite (and still far above every background score).
const BETA_MIN: f64 = 1e-9;

/// Floor on the replaced-pixel Mahalanobis distance inside the
/// cosine-style replacement statistic. Pixels lying exactly on the
/// mean-to-target segment would otherwise produce an infinite ratio.
const M_HAT_FLOOR: f64 = 1e-300;

/// A validated target signature: at least one channel, every entry
/// finite, not identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec(DVector<f64>);

impl TargetSpec {
    pub fn new(t: DVector<f64>) -> Result<Self> {
        if t.is_empty() {
            return Err(Error::InvalidParameter {
                field: "target",
                reason: "must have at least one channel".into(),
            });
        }
        for (i, &v) in t.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    field: "target",
                    reason: format!("entry {i} is not finite"),
                });
            }
        }
        if t.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidParameter {
                field: "target",
                reason: "must not be the zero vector".into(),
            });
        }
        Ok(TargetSpec(t))
    }

    /// The signature vector.
    pub fn vector(&self) -> &DVector<f64> {
        &self.0
    }

    /// Number of channels.
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Whether a detector models the target as added on top of the
/// background or as replacing part of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Additive,
    Replacement,
}

/// Tail branch of the replacement-model likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    /// Infinite degrees of freedom.
    Gaussian,
    /// Finite tail parameter in (2, infinity).
    General(f64),
    /// Limit as the tail parameter drops to 2. Scale information
    /// vanishes and only pixel direction survives, which is what the
    /// cosine-style replacement statistic uses.
    Heaviest,
}

impl Tail {
    /// The branch matching a model's own tail parameter.
    pub fn from_model(model: &BackgroundModel) -> Tail {
        if model.is_gaussian() {
            Tail::Gaussian
        } else {
            Tail::General(model.nu())
        }
    }
}

/// The six supported detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    /// Matched filter: whitened target against the whitened, centered
    /// pixel.
    Amf,
    /// Matched filter with the tail-dependent adaptive gain; reduces to
    /// the plain filter on the Gaussian branch and to the cosine
    /// estimator at the tail boundary.
    EcAmf,
    /// Cosine estimator: matched-filter signal normalized by the pixel's
    /// Mahalanobis distance.
    Ace,
    /// Replacement-model likelihood ratio, Gaussian branch.
    Ftmf,
    /// Replacement-model likelihood ratio at the model's own tail.
    EcFtmf,
    /// Replacement-model likelihood ratio, heaviest-tail branch.
    Ftce,
}

impl DetectorKind {
    /// All detectors, in the canonical reporting order.
    pub const ALL: [DetectorKind; 6] = [
        DetectorKind::Amf,
        DetectorKind::EcAmf,
        DetectorKind::Ace,
        DetectorKind::Ftmf,
        DetectorKind::EcFtmf,
        DetectorKind::Ftce,
    ];

    /// Canonical lowercase name, as used in configs and CSV output.
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Amf => "amf",
            DetectorKind::EcAmf => "ec-amf",
            DetectorKind::Ace => "ace",
            DetectorKind::Ftmf => "ftmf",
            DetectorKind::EcFtmf => "ec-ftmf",
            DetectorKind::Ftce => "ftce",
        }
    }

    /// Which signal model the detector assumes.
    pub fn family(self) -> Family {
        match self {
            DetectorKind::Amf | DetectorKind::EcAmf | DetectorKind::Ace => Family::Additive,
            DetectorKind::Ftmf | DetectorKind::EcFtmf | DetectorKind::Ftce => Family::Replacement,
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        match norm.as_str() {
            "amf" => Ok(DetectorKind::Amf),
            "ec-amf" => Ok(DetectorKind::EcAmf),
            "ace" => Ok(DetectorKind::Ace),
            "ftmf" => Ok(DetectorKind::Ftmf),
            "ec-ftmf" => Ok(DetectorKind::EcFtmf),
            "ftce" => Ok(DetectorKind::Ftce),
            _ => Err(Error::UnknownDetector(s.to_string())),
        }
    }
}

/// One detector output for one pixel. Replacement detectors also report
/// the clamped ML fill fraction; additive detectors have none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelScore {
    pub score: f64,
    pub alpha_hat: Option<f64>,
}

/// Solution of the replacement-model fill-fraction maximization for one
/// pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSolution {
    /// ML fill fraction clamped to [0, 1].
    pub alpha_hat: f64,
    /// Unclamped stationary root: the derivative of the replacement
    /// log-likelihood in alpha vanishes here.
    pub raw_root: f64,
    /// Coefficients of the solved quadratic in beta = 1 - alpha:
    /// coeff_a beta^2 + coeff_b beta + coeff_c = 0. Branch-normalized,
    /// with coeff_a > 0 and coeff_c <= 0, so the discriminant is never
    /// negative.
    pub coeff_a: f64,
    pub coeff_b: f64,
    pub coeff_c: f64,
}

/// Per-target precomputation shared by every pixel of a batch.
struct Projector {
    /// Whitened offset of the target from the mean: L^{-1} (t - mu).
    u: DVector<f64>,
    /// Whitened target: L^{-1} t.
    wt: DVector<f64>,
    /// Squared length of `u`.
    a: f64,
}

/// Whitened per-pixel quantities every detector is a function of.
struct PixelGeometry {
    /// L^{-1} (x - t).
    v: DVector<f64>,
    /// Matched-filter signal: (L^{-1} t) . (L^{-1} (x - mu)).
    signal: f64,
    /// Squared Mahalanobis distance of the pixel from the mean.
    m0: f64,
    /// Squared length of `v`.
    q: f64,
    /// Inner product v . u.
    b: f64,
}

impl Projector {
    fn new(model: &BackgroundModel, target: &TargetSpec) -> Result<Self> {
        if target.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                what: "target length",
                expected: model.dim(),
                actual: target.dim(),
            });
        }
        let u = model.cov().solve_lower(&(target.vector() - model.mu()))?;
        let wt = model.cov().solve_lower(target.vector())?;
        let a = u.norm_squared();
        Ok(Projector { u, wt, a })
    }

    fn geometry(&self, model: &BackgroundModel, x: &DVector<f64>) -> Result<PixelGeometry> {
        if x.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                what: "pixel length",
                expected: model.dim(),
                actual: x.len(),
            });
        }
        let y = model.cov().solve_lower(&(x - model.mu()))?;
        let v = &y - &self.u;
        Ok(PixelGeometry {
            signal: self.wt.dot(&y),
            m0: y.norm_squared(),
            q: v.norm_squared(),
            b: v.dot(&self.u),
            v,
        })
    }
}

/// Coefficients of the stationarity quadratic in beta = 1 - alpha, from
/// the pixel invariants q = |v|^2, b = v.u, a = |u|^2 and the channel
/// count d. Each branch is normalized so the leading coefficient is
/// strictly positive and the constant term is nonpositive.
fn quad_coeffs(q: f64, b: f64, a: f64, d: f64, tail: Tail) -> Result<(f64, f64, f64)> {
    match tail {
        Tail::Gaussian => Ok((1.0, -b / d, -q / d)),
        Tail::General(nu) => {
            if nu.is_nan() || nu <= 2.0 {
                return Err(Error::InvalidParameter {
                    field: "nu",
                    reason: format!("general tail branch needs nu > 2, got {nu}"),
                });
            }
            if nu.is_infinite() {
                return Err(Error::RequiresFiniteTail {
                    what: "the general tail branch",
                });
            }
            Ok((a + (nu - 2.0), (1.0 - nu / d) * b, -(nu / d) * q))
        }
        Tail::Heaviest => {
            if a == 0.0 {
                return Err(Error::DegenerateQuadratic);
            }
            Ok((a, (1.0 - 2.0 / d) * b, -(2.0 / d) * q))
        }
    }
}

/// Nonnegative root of a2 x^2 + b1 x + c0 = 0 under a2 > 0, c0 <= 0,
/// in the cancellation-free form: the subtraction of nearly equal
/// magnitudes never happens on either sign of b1.
fn nonnegative_root(a2: f64, b1: f64, c0: f64) -> f64 {
    let disc = (b1 * b1 - 4.0 * a2 * c0).max(0.0);
    let s = disc.sqrt();
    if b1 <= 0.0 {
        (s - b1) / (2.0 * a2)
    } else {
        -2.0 * c0 / (b1 + s)
    }
}

fn solve_beta(q: f64, b: f64, a: f64, d: f64, tail: Tail) -> Result<(f64, (f64, f64, f64))> {
    let (ca, cb, cc) = quad_coeffs(q, b, a, d, tail)?;
    Ok((nonnegative_root(ca, cb, cc), (ca, cb, cc)))
}

/// Maximum-likelihood fill fraction of one pixel under the replacement
/// model with the given tail branch. `raw_root` is the unclamped
/// stationary point; `alpha_hat` clamps it to [0, 1]. A pixel equal to
/// the target signature yields `raw_root = 1` exactly.
pub fn alpha_ml(
    model: &BackgroundModel,
    target: &TargetSpec,
    x: &DVector<f64>,
    tail: Tail,
) -> Result<AlphaSolution> {
    let proj = Projector::new(model, target)?;
    let geom = proj.geometry(model, x)?;
    let (beta, (ca, cb, cc)) = solve_beta(geom.q, geom.b, proj.a, model.dim() as f64, tail)?;
    let raw_root = 1.0 - beta;
    Ok(AlphaSolution {
        alpha_hat: raw_root.clamp(0.0, 1.0),
        raw_root,
        coeff_a: ca,
        coeff_b: cb,
        coeff_c: cc,
    })
}

/// Replacement-model log-likelihood of `x` at fill fraction `alpha`,
/// under the model's own tail: the density of the implied background
/// pixel (x - alpha t) / (1 - alpha) plus the change-of-variables term.
/// At `alpha = 0` this equals the background log density exactly.
pub fn log_likelihood_alpha(
    model: &BackgroundModel,
    target: &TargetSpec,
    x: &DVector<f64>,
    alpha: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter {
            field: "alpha",
            reason: format!("must lie in [0, 1), got {alpha}"),
        });
    }
    if target.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            what: "target length",
            expected: model.dim(),
            actual: target.dim(),
        });
    }
    let beta = 1.0 - alpha;
    let z = (x - target.vector() * alpha) / beta;
    let d = model.dim() as f64;
    Ok(-d * (-alpha).ln_1p() + model.log_density(&z)?)
}

/// The tail-adjusted matched-filter statistic from its whitened scalars:
/// sqrt(nu - 1) * signal / sqrt((nu - 2) + mahal_sq). Defined for
/// nu >= 2; at nu = 2 it coincides with the cosine estimator, and the
/// infinite-nu limit is the plain matched filter.
pub fn ec_amf_statistic(signal: f64, mahal_sq: f64, nu: f64) -> Result<f64> {
    if nu.is_nan() || nu < 2.0 {
        return Err(Error::InvalidParameter {
            field: "nu",
            reason: format!("tail-adjusted filter needs nu >= 2, got {nu}"),
        });
    }
    if !mahal_sq.is_finite() || mahal_sq < 0.0 {
        return Err(Error::InvalidParameter {
            field: "mahal_sq",
            reason: format!("must be finite and non-negative, got {mahal_sq}"),
        });
    }
    if nu.is_infinite() {
        return Ok(signal);
    }
    let denom = (nu - 2.0) + mahal_sq;
    if denom == 0.0 {
        return Err(Error::UndefinedStatistic(
            "tail-adjusted filter at the background mean",
        ));
    }
    Ok((nu - 1.0).sqrt() * signal / denom.sqrt())
}

/// Score one pixel with one detector.
pub fn score(
    model: &BackgroundModel,
    target: &TargetSpec,
    x: &DVector<f64>,
    kind: DetectorKind,
) -> Result<f64> {
    Ok(score_pixel(model, target, x, kind)?.score)
}

/// Score one pixel, also reporting the ML fill fraction for replacement
/// detectors.
pub fn score_pixel(
    model: &BackgroundModel,
    target: &TargetSpec,
    x: &DVector<f64>,
    kind: DetectorKind,
) -> Result<PixelScore> {
    let proj = Projector::new(model, target)?;
    score_with(&proj, model, x, kind)
}

fn score_with(
    proj: &Projector,
    model: &BackgroundModel,
    x: &DVector<f64>,
    kind: DetectorKind,
) -> Result<PixelScore> {
    let geom = proj.geometry(model, x)?;
    let d = model.dim() as f64;
    match kind {
        DetectorKind::Amf => Ok(PixelScore {
            score: geom.signal,
            alpha_hat: None,
        }),
        DetectorKind::EcAmf => {
            let score = if model.is_gaussian() {
                geom.signal
            } else {
                ec_amf_statistic(geom.signal, geom.m0, model.nu())?
            };
            Ok(PixelScore {
                score,
                alpha_hat: None,
            })
        }
        DetectorKind::Ace => {
            if geom.m0 == 0.0 {
                return Err(Error::UndefinedStatistic(
                    "cosine statistic at the background mean",
                ));
            }
            Ok(PixelScore {
                score: geom.signal / geom.m0.sqrt(),
                alpha_hat: None,
            })
        }
        DetectorKind::Ftmf => replacement_score(proj, &geom, d, Tail::Gaussian),
        DetectorKind::EcFtmf => replacement_score(proj, &geom, d, Tail::from_model(model)),
        DetectorKind::Ftce => replacement_score(proj, &geom, d, Tail::Heaviest),
    }
}

/// Evaluate a replacement-model log-likelihood ratio at the (capped) ML
/// fill fraction. The reduced form drops pixel-independent constants;
/// the null value is zero, so scores are nonnegative up to the final
/// rounding guard.
fn replacement_score(
    proj: &Projector,
    geom: &PixelGeometry,
    d: f64,
    tail: Tail,
) -> Result<PixelScore> {
    if matches!(tail, Tail::Heaviest) && geom.m0 == 0.0 {
        return Err(Error::UndefinedStatistic(
            "replacement cosine statistic at the background mean",
        ));
    }
    let (beta_raw, _) = solve_beta(geom.q, geom.b, proj.a, d, tail)?;
    let alpha_hat = (1.0 - beta_raw).clamp(0.0, 1.0);
    if beta_raw >= 1.0 {
        // The likelihood peaks at or left of alpha = 0, so the
        // constrained maximum is the null itself.
        return Ok(PixelScore {
            score: 0.0,
            alpha_hat: Some(alpha_hat),
        });
    }
    let beta = beta_raw.max(BETA_MIN);
    // Mahalanobis distance of the implied background pixel, computed
    // through the vector form |v + beta u|^2 / beta^2 so that signs
    // never cancel catastrophically.
    let w = &geom.v + &proj.u * beta;
    let m_hat = w.norm_squared() / (beta * beta);
    let base = -d * beta.ln();
    let score = match tail {
        Tail::Gaussian => base - 0.5 * (m_hat - geom.m0),
        Tail::General(nu) => {
            base - 0.5 * (d + nu) * (((nu - 2.0) + m_hat) / ((nu - 2.0) + geom.m0)).ln()
        }
        Tail::Heaviest => base - 0.5 * (d + 2.0) * (m_hat.max(M_HAT_FLOOR) / geom.m0).ln(),
    };
    Ok(PixelScore {
        score: score.max(0.0),
        alpha_hat: Some(alpha_hat),
    })
}

/// Score every row of `data` with one detector. Row-level failures carry
/// the offending row index.
pub fn score_batch(
    data: &DataMatrix,
    model: &BackgroundModel,
    target: &TargetSpec,
    kind: DetectorKind,
) -> Result<Vec<f64>> {
    Ok(score_batch_detailed(data, model, target, kind)?
        .into_iter()
        .map(|p| p.score)
        .collect())
}

/// Like [`score_batch`], but keeping the per-pixel fill fractions.
pub fn score_batch_detailed(
    data: &DataMatrix,
    model: &BackgroundModel,
    target: &TargetSpec,
    kind: DetectorKind,
) -> Result<Vec<PixelScore>> {
    if data.n_channels() != model.dim() {
        return Err(Error::DimensionMismatch {
            what: "data channels",
            expected: model.dim(),
            actual: data.n_channels(),
        });
    }
    let proj = Projector::new(model, target)?;
    if kind == DetectorKind::Ftce && proj.a == 0.0 {
        // Target equal to the mean is a configuration error, not a
        // per-row one.
        return Err(Error::DegenerateQuadratic);
    }
    let mut out = Vec::with_capacity(data.n_rows());
    for i in 0..data.n_rows() {
        let ps = score_with(&proj, model, &data.row(i), kind).map_err(|e| e.at_row(i))?;
        out.push(ps);
    }
    Ok(out)
}
