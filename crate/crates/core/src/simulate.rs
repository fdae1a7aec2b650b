//! Deterministic matched-pair scenario generation: one background draw,
//! one implanted-target copy of it, nothing else touching the random
//! stream.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::detectors::TargetSpec;
use crate::error::{Error, Result};
use crate::mvt::{validate_nu, BackgroundModel};
use crate::stats::DataMatrix;

/// Parameters of a synthetic detection scenario.
///
/// The background is a standard (zero-mean, identity-covariance) model
/// with tail parameter `nu`; the target signature is `target_amplitude`
/// times the first basis vector; every target pixel replaces a fraction
/// `alpha` of its paired background pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    /// Tail parameter, in (2, infinity]; infinite means Gaussian.
    pub nu: f64,
    /// Number of channels.
    pub d: usize,
    /// Target amplitude T: the signature is T times the first basis
    /// vector.
    pub target_amplitude: f64,
    /// Fill fraction in (0, 1).
    pub alpha: f64,
    /// Number of pixels in each of the two sets.
    pub n: usize,
    /// Seed for the deterministic generator.
    pub seed: u64,
}

impl ScenarioConfig {
    /// Check every field, reporting the conventional parameter name of
    /// the first offender.
    pub fn validate(&self) -> Result<()> {
        validate_nu(self.nu)?;
        if self.d == 0 {
            return Err(Error::InvalidParameter {
                field: "d",
                reason: "must be at least 1".into(),
            });
        }
        if !self.target_amplitude.is_finite() || self.target_amplitude <= 0.0 {
            return Err(Error::InvalidParameter {
                field: "T",
                reason: format!("must be finite and positive, got {}", self.target_amplitude),
            });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter {
                field: "alpha",
                reason: format!("must lie in (0, 1), got {}", self.alpha),
            });
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter {
                field: "n",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// The scenario's target signature: T times the first basis vector.
    pub fn make_target(&self) -> Result<TargetSpec> {
        self.validate()?;
        let mut t = DVector::zeros(self.d);
        t[0] = self.target_amplitude;
        TargetSpec::new(t)
    }
}

/// A generated scenario: the model and target that produced it, one
/// matrix of pure background pixels, and one matrix of matched
/// implanted-target pixels.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: BackgroundModel,
    pub target: TargetSpec,
    pub background: DataMatrix,
    pub targets: DataMatrix,
}

/// Generate a scenario. The random stream is consumed only by the
/// background draw; target pixels are the deterministic matched pairs
/// `targets[i] = (1 - alpha) * background[i] + alpha * t`, so background
/// and target sets share the exact same clutter realization.
pub fn generate(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let model = BackgroundModel::standard(config.d, config.nu)?;
    let target = config.make_target()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let background = model.sample(config.n, &mut rng)?;

    let beta = 1.0 - config.alpha;
    let mut implanted = DMatrix::zeros(config.n, config.d);
    for i in 0..config.n {
        let row = background.row(i) * beta + target.vector() * config.alpha;
        implanted.row_mut(i).tr_copy_from(&row);
    }
    let targets = DataMatrix::new(implanted)?;

    Ok(Scenario {
        config: *config,
        model,
        target,
        background,
        targets,
    })
}
