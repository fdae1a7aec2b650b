//! Dense data matrices, covariance estimation, and Cholesky-based
//! whitening. Everything downstream (densities, detectors, evaluation)
//! goes through [`SpdFactor`] so quadratic forms are computed by
//! triangular solves rather than explicit inverses.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot tolerance for the Cholesky factorization: a pivot is
/// treated as non-positive when it falls at or below this fraction of the
/// largest diagonal entry of the input.
const PIVOT_REL_TOL: f64 = 1e-12;

/// A validated N x d matrix of pixel spectra: one row per sample, one
/// column per channel. Construction guarantees the matrix is non-empty
/// and every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(DMatrix<f64>);

impl DataMatrix {
    /// Validate and wrap a dense matrix.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::EmptyMatrix);
        }
        for row in 0..matrix.nrows() {
            for col in 0..matrix.ncols() {
                if !matrix[(row, col)].is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        Ok(DataMatrix(matrix))
    }

    /// Build from a flat row-major slice.
    pub fn from_row_slice(n_rows: usize, n_channels: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n_rows * n_channels {
            return Err(Error::DimensionMismatch {
                what: "row-major data length",
                expected: n_rows * n_channels,
                actual: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n_rows, n_channels, data))
    }

    /// Build from a slice of equally sized row vectors.
    pub fn from_rows(rows: &[DVector<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyMatrix)?;
        let d = first.len();
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    what: "row length",
                    expected: d,
                    actual: row.len(),
                });
            }
        }
        let mut m = DMatrix::zeros(rows.len(), d);
        for (i, row) in rows.iter().enumerate() {
            m.row_mut(i).tr_copy_from(row);
        }
        Self::new(m)
    }

    /// Number of samples (rows).
    pub fn n_rows(&self) -> usize {
        self.0.nrows()
    }

    /// Number of channels (columns).
    pub fn n_channels(&self) -> usize {
        self.0.ncols()
    }

    /// Copy of row `i` as a column vector. Panics if `i` is out of range,
    /// matching slice indexing.
    pub fn row(&self, i: usize) -> DVector<f64> {
        self.0.row(i).transpose()
    }

    /// Borrow the underlying matrix.
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// A symmetric positive definite matrix together with its lower Cholesky
/// factor and log-determinant. The factor is the single entry point for
/// quadratic forms and whitening.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    matrix: DMatrix<f64>,
    lower: DMatrix<f64>,
    log_det: f64,
}

impl SpdFactor {
    /// Factor a covariance matrix. Only the lower triangle of `matrix` is
    /// read, so slightly asymmetric inputs (roundoff from accumulation)
    /// are accepted. Fails with the pivot index when the matrix is not
    /// positive definite.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::EmptyMatrix);
        }
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                what: "covariance matrix columns",
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        for row in 0..matrix.nrows() {
            for col in 0..matrix.ncols() {
                if !matrix[(row, col)].is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        let (lower, log_det) = cholesky_lower(&matrix)?;
        Ok(SpdFactor {
            matrix,
            lower,
            log_det,
        })
    }

    /// Identity covariance of dimension `d`.
    pub fn identity(d: usize) -> Self {
        SpdFactor {
            matrix: DMatrix::identity(d, d),
            lower: DMatrix::identity(d, d),
            log_det: 0.0,
        }
    }

    /// Dimension of the (square) matrix.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The original matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// The lower-triangular factor L with L L^T equal to the matrix.
    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// Log-determinant, accumulated from the factor diagonal.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Solve L y = v by forward substitution. This whitens `v`: if `v`
    /// has covariance L L^T then the solution has identity covariance.
    pub fn solve_lower(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let d = self.dim();
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                what: "vector length",
                expected: d,
                actual: v.len(),
            });
        }
        let mut y = v.clone();
        for i in 0..d {
            for k in 0..i {
                let yk = y[k];
                y[i] -= self.lower[(i, k)] * yk;
            }
            y[i] /= self.lower[(i, i)];
        }
        Ok(y)
    }
}

/// Cholesky-Banachiewicz factorization reading only the lower triangle.
/// Returns the lower factor and the log-determinant of the input.
fn cholesky_lower(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let d = a.nrows();
    let max_diag = (0..d).map(|i| a[(i, i)]).fold(0.0_f64, f64::max);
    let tol = PIVOT_REL_TOL * max_diag;
    let mut l = DMatrix::zeros(d, d);
    let mut half_log_det = 0.0;
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                // The comparison is written so a NaN pivot also fails.
                if sum.partial_cmp(&tol) != Some(std::cmp::Ordering::Greater) {
                    return Err(Error::NotPositiveDefinite { pivot: i });
                }
                let p = sum.sqrt();
                l[(i, i)] = p;
                half_log_det += p.ln();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok((l, 2.0 * half_log_det))
}

/// Sample mean and 1/N covariance of the rows, returned pre-factored.
/// Fails with the pivot index when the sample covariance is singular
/// (too few samples, repeated rows, collinear channels, ...).
pub fn estimate_mean_cov(data: &DataMatrix) -> Result<(DVector<f64>, SpdFactor)> {
    estimate_mean_cov_with_ridge(data, 0.0)
}

/// Same as [`estimate_mean_cov`] but adds `ridge` to every diagonal entry
/// of the sample covariance before factoring. Useful for real data whose
/// empirical covariance is near-singular; `ridge = 0` is the plain
/// estimator.
pub fn estimate_mean_cov_with_ridge(
    data: &DataMatrix,
    ridge: f64,
) -> Result<(DVector<f64>, SpdFactor)> {
    if !ridge.is_finite() || ridge < 0.0 {
        return Err(Error::InvalidParameter {
            field: "ridge",
            reason: format!("must be finite and non-negative, got {ridge}"),
        });
    }
    let n = data.n_rows();
    let d = data.n_channels();
    let m = data.as_matrix();

    let mut mu = DVector::zeros(d);
    for i in 0..n {
        for j in 0..d {
            mu[j] += m[(i, j)];
        }
    }
    mu /= n as f64;

    let mut cov = DMatrix::zeros(d, d);
    let mut centered = DVector::zeros(d);
    for i in 0..n {
        for j in 0..d {
            centered[j] = m[(i, j)] - mu[j];
        }
        cov.ger(1.0, &centered, &centered, 1.0);
    }
    cov /= n as f64;
    for j in 0..d {
        cov[(j, j)] += ridge;
    }

    let factor = SpdFactor::new(cov)?;
    Ok((mu, factor))
}

/// Squared Mahalanobis distance (x - mu)^T R^{-1} (x - mu), computed as
/// the squared norm of the whitened difference.
pub fn mahalanobis_sq(x: &DVector<f64>, mu: &DVector<f64>, factor: &SpdFactor) -> Result<f64> {
    if mu.len() != factor.dim() {
        return Err(Error::DimensionMismatch {
            what: "mean length",
            expected: factor.dim(),
            actual: mu.len(),
        });
    }
    let y = factor.solve_lower(&(x - mu))?;
    Ok(y.norm_squared())
}

/// Whiten every row: subtract `mu`, then solve against the lower factor.
/// The result has (exactly) identity sample covariance when `mu` and
/// `factor` came from [`estimate_mean_cov`] on the same data.
pub fn whiten(data: &DataMatrix, mu: &DVector<f64>, factor: &SpdFactor) -> Result<DataMatrix> {
    let d = factor.dim();
    if data.n_channels() != d {
        return Err(Error::DimensionMismatch {
            what: "data channels",
            expected: d,
            actual: data.n_channels(),
        });
    }
    if mu.len() != d {
        return Err(Error::DimensionMismatch {
            what: "mean length",
            expected: d,
            actual: mu.len(),
        });
    }
    let mut out = DMatrix::zeros(data.n_rows(), d);
    for i in 0..data.n_rows() {
        let y = factor.solve_lower(&(data.row(i) - mu))?;
        out.row_mut(i).tr_copy_from(&y);
    }
    DataMatrix::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spd(entries: &[f64], d: usize) -> SpdFactor {
        SpdFactor::new(DMatrix::from_row_slice(d, d, entries)).unwrap()
    }

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }

    #[test]
    fn mahalanobis_at_the_mean_is_zero() {
        let f = spd(&[2.0, 0.3, 0.3, 1.0], 2);
        let mu = DVector::from_vec(vec![5.0, -1.0]);
        let m = mahalanobis_sq(&mu.clone(), &mu, &f).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn identity_covariance_gives_squared_euclidean_norm() {
        let f = SpdFactor::identity(2);
        let x = DVector::from_vec(vec![3.0, 4.0]);
        let mu = DVector::zeros(2);
        assert_abs_diff_eq!(mahalanobis_sq(&x, &mu, &f).unwrap(), 25.0, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_covariance_scales_each_channel() {
        let f = spd(&[2.0, 0.0, 0.0, 8.0], 2);
        let x = DVector::from_vec(vec![2.0, 4.0]);
        let mu = DVector::zeros(2);
        // 2^2 / 2 + 4^2 / 8 = 2 + 2.
        assert_abs_diff_eq!(mahalanobis_sq(&x, &mu, &f).unwrap(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_reconstructs_the_input() {
        let r = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 2.0]);
        let f = SpdFactor::new(r.clone()).unwrap();
        let resid = f.lower() * f.lower().transpose() - &r;
        assert!(max_abs(&resid) <= 1e-10 * max_abs(&r));
        for i in 0..3 {
            assert!(f.lower()[(i, i)] > 0.0);
        }
    }

    #[test]
    fn log_det_matches_direct_determinant() {
        let cases: Vec<DMatrix<f64>> = vec![
            DMatrix::from_row_slice(1, 1, &[0.37]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.9, 0.9, 5.0]),
            DMatrix::from_row_slice(
                4,
                4,
                &[
                    3.0, 0.5, 0.2, 0.1, 0.5, 2.0, 0.3, 0.0, 0.2, 0.3, 1.5, 0.4, 0.1, 0.0, 0.4, 2.5,
                ],
            ),
        ];
        for r in cases {
            let f = SpdFactor::new(r.clone()).unwrap();
            let direct = r.determinant().ln();
            assert_abs_diff_eq!(f.log_det(), direct, epsilon = 1e-10);
        }
    }

    #[test]
    fn singular_matrix_reports_the_failing_pivot() {
        let err = SpdFactor::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).unwrap_err();
        match err {
            Error::NotPositiveDefinite { pivot } => assert_eq!(pivot, 1),
            other => panic!("expected pivot error, got {other}"),
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let err = SpdFactor::new(DMatrix::from_row_slice(1, 1, &[-1.0])).unwrap_err();
        match err {
            Error::NotPositiveDefinite { pivot } => assert_eq!(pivot, 0),
            other => panic!("expected pivot error, got {other}"),
        }
    }

    #[test]
    fn undersampled_covariance_fails_with_pivot_index() {
        // Two samples in two channels: rank-one covariance.
        let data = DataMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]).unwrap();
        let err = estimate_mean_cov(&data).unwrap_err();
        match err {
            Error::NotPositiveDefinite { pivot } => assert_eq!(pivot, 1),
            other => panic!("expected pivot error, got {other}"),
        }
    }

    #[test]
    fn repeated_rows_make_the_covariance_singular() {
        let data = DataMatrix::from_row_slice(4, 2, &[3.0, -1.0, 3.0, -1.0, 3.0, -1.0, 3.0, -1.0])
            .unwrap();
        let err = estimate_mean_cov(&data).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { pivot: 0 }));
    }

    #[test]
    fn ridge_restores_definiteness_and_keeps_the_mean() {
        let data = DataMatrix::from_row_slice(4, 2, &[3.0, -1.0, 3.0, -1.0, 3.0, -1.0, 3.0, -1.0])
            .unwrap();
        let (mu, factor) = estimate_mean_cov_with_ridge(&data, 1e-3).unwrap();
        assert_abs_diff_eq!(mu[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mu[1], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(factor.matrix()[(0, 0)], 1e-3, epsilon = 1e-15);
    }

    #[test]
    fn negative_ridge_is_rejected() {
        let data = DataMatrix::from_row_slice(2, 1, &[0.0, 1.0]).unwrap();
        let err = estimate_mean_cov_with_ridge(&data, -1.0).unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidParameter { field: "ridge", .. }
        ));
    }

    #[test]
    fn estimator_recovers_a_known_mean_and_covariance() {
        // Four points placed so the 1/N covariance is exactly diag(2, 0.5).
        let data = DataMatrix::from_row_slice(
            4,
            2,
            &[
                10.0 + 2.0_f64.sqrt(),
                5.0,
                10.0 - 2.0_f64.sqrt(),
                5.0,
                10.0,
                5.0 + 0.5_f64.sqrt(),
                10.0,
                5.0 - 0.5_f64.sqrt(),
            ],
        )
        .unwrap();
        let (mu, factor) = estimate_mean_cov(&data).unwrap();
        assert_abs_diff_eq!(mu[0], 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mu[1], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(factor.matrix()[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(factor.matrix()[(1, 1)], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(factor.matrix()[(0, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn whitened_rows_have_identity_sample_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200;
        let d = 3;
        let mix = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.7, 0.5, 0.0, -0.3, 0.2, 0.9]);
        let mut raw = DMatrix::zeros(n, d);
        for i in 0..n {
            let g = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            raw.row_mut(i).tr_copy_from(&(&mix * g));
        }
        let data = DataMatrix::new(raw).unwrap();
        let (mu, factor) = estimate_mean_cov(&data).unwrap();
        let white = whiten(&data, &mu, &factor).unwrap();
        let (wmu, wfactor) = estimate_mean_cov(&white).unwrap();
        for j in 0..d {
            assert_abs_diff_eq!(wmu[j], 0.0, epsilon = 1e-10);
        }
        let resid = wfactor.matrix() - DMatrix::<f64>::identity(d, d);
        assert!(max_abs(&resid) <= 1e-8);
    }

    #[test]
    fn mahalanobis_equals_squared_norm_of_whitened_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = spd(&[4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 2.0], 3);
        let mu = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        for _ in 0..100 {
            let x = DVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
            let m = mahalanobis_sq(&x, &mu, &f).unwrap();
            let w = f.solve_lower(&(&x - &mu)).unwrap();
            let rel = (m - w.norm_squared()).abs() / (1.0 + m);
            assert!(rel <= 1e-9, "relative gap {rel}");
        }
    }

    #[test]
    fn invertible_change_of_basis_preserves_mahalanobis() {
        let r = DMatrix::from_row_slice(2, 2, &[2.0, 0.4, 0.4, 1.5]);
        let mu = DVector::from_vec(vec![1.0, 2.0]);
        let x = DVector::from_vec(vec![-0.5, 3.0]);
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, -1.0, 2.0]);

        let base = mahalanobis_sq(&x, &mu, &SpdFactor::new(r.clone()).unwrap()).unwrap();
        let mapped_r = &a * r * a.transpose();
        let mapped =
            mahalanobis_sq(&(&a * x), &(&a * mu), &SpdFactor::new(mapped_r).unwrap()).unwrap();
        assert!((base - mapped).abs() / (1.0 + base.abs()) <= 1e-8);
    }

    #[test]
    fn data_matrix_rejects_non_finite_entries() {
        let err =
            DataMatrix::from_row_slice(2, 3, &[0.0, 1.0, 2.0, 3.0, 4.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 1, col: 2 }));
    }

    #[test]
    fn data_matrix_rejects_empty_input() {
        let err = DataMatrix::new(DMatrix::zeros(0, 3)).unwrap_err();
        assert!(matches!(err, Error::EmptyMatrix));
    }

    #[test]
    fn from_rows_checks_row_lengths() {
        let rows = vec![DVector::zeros(2), DVector::zeros(3)];
        let err = DataMatrix::from_rows(&rows).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }
}
