//! Elliptically contoured background model: a multivariate Student-t
//! family parameterized so the supplied matrix is the true covariance for
//! every admissible tail parameter, with the Gaussian as the first-class
//! infinite-tail member.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::stats::{mahalanobis_sq, DataMatrix, SpdFactor};

/// Background distribution: mean, covariance (factored), and tail
/// parameter `nu`.
///
/// `nu` must lie in (2, infinity]; `f64::INFINITY` selects the Gaussian.
/// The density is scaled so that the covariance of the distribution is
/// exactly the supplied matrix for every `nu`, which makes models with
/// different tails directly comparable.
#[derive(Debug, Clone)]
pub struct BackgroundModel {
    mu: DVector<f64>,
    cov: SpdFactor,
    nu: f64,
}

/// Reject tail parameters outside (2, infinity].
pub(crate) fn validate_nu(nu: f64) -> Result<()> {
    if nu.is_nan() || nu <= 2.0 {
        return Err(Error::InvalidParameter {
            field: "nu",
            reason: format!("must be greater than 2 (or infinite for Gaussian), got {nu}"),
        });
    }
    Ok(())
}

impl BackgroundModel {
    /// Build a model from a mean, a factored covariance, and a tail
    /// parameter.
    pub fn new(mu: DVector<f64>, cov: SpdFactor, nu: f64) -> Result<Self> {
        if mu.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                what: "mean length",
                expected: cov.dim(),
                actual: mu.len(),
            });
        }
        validate_nu(nu)?;
        Ok(BackgroundModel { mu, cov, nu })
    }

    /// Zero-mean, identity-covariance model in `d` channels.
    pub fn standard(d: usize, nu: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter {
                field: "d",
                reason: "must be at least 1".into(),
            });
        }
        Self::new(DVector::zeros(d), SpdFactor::identity(d), nu)
    }

    /// Number of channels.
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Background mean.
    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    /// Factored covariance.
    pub fn cov(&self) -> &SpdFactor {
        &self.cov
    }

    /// Tail parameter; `f64::INFINITY` on the Gaussian branch.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Whether this model is on the Gaussian (infinite-tail) branch.
    pub fn is_gaussian(&self) -> bool {
        self.nu.is_infinite()
    }

    /// Log density at `x`.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "point length",
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let d = self.dim() as f64;
        let m = mahalanobis_sq(x, &self.mu, &self.cov)?;
        if self.is_gaussian() {
            Ok(-0.5 * d * (2.0 * std::f64::consts::PI).ln() - 0.5 * self.cov.log_det() - 0.5 * m)
        } else {
            let nu = self.nu;
            let log_c = ln_gamma((d + nu) / 2.0)
                - ln_gamma(nu / 2.0)
                - 0.5 * d * ((nu - 2.0) * std::f64::consts::PI).ln();
            Ok(log_c - 0.5 * self.cov.log_det() - 0.5 * (d + nu) * (m / (nu - 2.0)).ln_1p())
        }
    }

    /// Draw `n` rows. Each row consumes the generator in a fixed order:
    /// `d` standard normal draws, then (finite-tail branch only) one
    /// chi-squared draw. The row is `mu + L g * sqrt((nu - 2) / w)`, which
    /// has covariance exactly equal to the model covariance.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DataMatrix> {
        if n == 0 {
            return Err(Error::InvalidParameter {
                field: "n",
                reason: "must be at least 1".into(),
            });
        }
        let d = self.dim();
        let chi = if self.is_gaussian() {
            None
        } else {
            // nu > 2 is guaranteed by construction, so this cannot fail.
            Some(ChiSquared::new(self.nu).expect("chi-squared dof validated at model build"))
        };
        let mut rows = nalgebra::DMatrix::zeros(n, d);
        for i in 0..n {
            let g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let mut x = self.cov.lower() * g;
            if let Some(chi) = &chi {
                let w: f64 = chi.sample(rng);
                x *= ((self.nu - 2.0) / w).sqrt();
            }
            x += &self.mu;
            rows.row_mut(i).tr_copy_from(&x);
        }
        DataMatrix::new(rows)
    }
}

/// Result of tail estimation from whitened data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuEstimate {
    /// Estimated tail parameter; `f64::INFINITY` when the sample kurtosis
    /// is at or below the Gaussian value.
    pub nu: f64,
    /// Multivariate kurtosis ratio: mean of r^4 over its Gaussian value
    /// d(d+2). Equals 1 for Gaussian data, larger for heavier tails.
    pub kappa: f64,
    /// Set when there are too few rows for the fourth moment to be
    /// stable; the estimate is still returned.
    pub low_sample: bool,
}

/// Number of rows below which a kurtosis-based tail estimate is flagged
/// as unreliable.
const LOW_SAMPLE_ROWS: usize = 1000;

/// Estimate the tail parameter from whitened rows (zero mean, identity
/// covariance) by the method of moments on the squared radius r^2:
/// for this family E[r^4] = d(d+2) (nu-2)/(nu-4), so the kurtosis ratio
/// kappa = mean(r^4) / (d(d+2)) inverts to nu = (4 kappa - 2)/(kappa - 1).
/// A ratio at or below 1 (Gaussian or lighter) maps to infinity.
pub fn estimate_nu(whitened: &DataMatrix) -> Result<NuEstimate> {
    let n = whitened.n_rows();
    let d = whitened.n_channels() as f64;
    let mut fourth = 0.0;
    for i in 0..n {
        let r2 = whitened.row(i).norm_squared();
        fourth += r2 * r2;
    }
    fourth /= n as f64;
    let kappa = fourth / (d * (d + 2.0));
    let nu = if kappa <= 1.0 {
        f64::INFINITY
    } else {
        (4.0 * kappa - 2.0) / (kappa - 1.0)
    };
    Ok(NuEstimate {
        nu,
        kappa,
        low_sample: n < LOW_SAMPLE_ROWS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_density_at_zero_matches_closed_form() {
        // d = 1, nu = 3: the normalizer reduces to 2 / pi.
        let model = BackgroundModel::standard(1, 3.0).unwrap();
        let x = DVector::from_vec(vec![0.0]);
        let expected = (2.0 / std::f64::consts::PI).ln();
        assert_abs_diff_eq!(model.log_density(&x).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_branch_matches_the_normal_density() {
        let model = BackgroundModel::standard(1, f64::INFINITY).unwrap();
        let at = |v: f64| model.log_density(&DVector::from_vec(vec![v])).unwrap();
        let norm = |v: f64| -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * v * v;
        for v in [0.0, 1.0, -2.5] {
            assert_abs_diff_eq!(at(v), norm(v), epsilon = 1e-12);
        }
    }

    #[test]
    fn huge_nu_approaches_the_gaussian_density() {
        let heavy = BackgroundModel::standard(3, 1e6).unwrap();
        let gauss = BackgroundModel::standard(3, f64::INFINITY).unwrap();
        let x = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let gap = (heavy.log_density(&x).unwrap() - gauss.log_density(&x).unwrap()).abs();
        assert!(gap < 1e-4, "gap {gap}");
    }

    #[test]
    fn density_decreases_with_distance_from_the_mean() {
        for nu in [2.5, 10.0, f64::INFINITY] {
            let model = BackgroundModel::standard(2, nu).unwrap();
            let p = |r: f64| model.log_density(&DVector::from_vec(vec![r, 0.0])).unwrap();
            assert!(p(0.0) > p(1.0));
            assert!(p(1.0) > p(3.0));
            assert!(p(3.0) > p(10.0));
        }
    }

    #[test]
    fn tail_parameter_at_or_below_two_is_rejected() {
        for nu in [2.0, 1.0, 0.0, -3.0, f64::NAN] {
            let err = BackgroundModel::standard(2, nu).unwrap_err();
            assert!(
                matches!(err, Error::InvalidParameter { field: "nu", .. }),
                "nu = {nu}"
            );
        }
        assert!(BackgroundModel::standard(2, 2.0 + 1e-9).is_ok());
        assert!(BackgroundModel::standard(2, f64::INFINITY).is_ok());
    }

    #[test]
    fn mean_length_must_match_covariance() {
        let err = BackgroundModel::new(DVector::zeros(3), SpdFactor::identity(2), 5.0).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn sampling_is_deterministic_for_a_fixed_seed() {
        let model = BackgroundModel::standard(4, 7.0).unwrap();
        let a = model
            .sample(16, &mut ChaCha8Rng::seed_from_u64(99))
            .unwrap();
        let b = model
            .sample(16, &mut ChaCha8Rng::seed_from_u64(99))
            .unwrap();
        assert_eq!(a, b);
        let c = model
            .sample(16, &mut ChaCha8Rng::seed_from_u64(100))
            .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampling_zero_rows_is_an_error() {
        let model = BackgroundModel::standard(2, 5.0).unwrap();
        let err = model
            .sample(0, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { field: "n", .. }));
    }

    #[test]
    fn gaussian_sampling_works_without_a_mixing_draw() {
        let model = BackgroundModel::standard(3, f64::INFINITY).unwrap();
        let data = model.sample(8, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(data.n_rows(), 8);
        assert_eq!(data.n_channels(), 3);
    }

    #[test]
    fn tail_estimate_inverts_a_known_fourth_moment() {
        // d = 1 rows with |x| = 3^(1/2): mean r^4 = 9, so kappa = 3 and
        // nu = (4 * 3 - 2) / (3 - 1) = 5.
        let s = 3.0_f64.sqrt();
        let data = DataMatrix::from_row_slice(2, 1, &[s, -s]).unwrap();
        let est = estimate_nu(&data).unwrap();
        assert_abs_diff_eq!(est.kappa, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(est.nu, 5.0, epsilon = 1e-12);
        assert!(est.low_sample);
    }

    #[test]
    fn light_tails_map_to_the_gaussian_branch() {
        let data = DataMatrix::from_row_slice(2, 1, &[1.0, -1.0]).unwrap();
        let est = estimate_nu(&data).unwrap();
        assert!(est.nu.is_infinite());
        assert!(est.kappa < 1.0);
    }
}
