//! Sample-side computations: covariance estimators, symmetric eigenvalues,
//! Fisher spectra and linear spectral statistics.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::funcs::SpectralFn;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("degenerate sample: need at least 2 observations, got {0}")]
    DegenerateSample(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("eigendecomposition failed the trace reconstruction check ({0})")]
    EigenCheck(String),
    #[error("singular denominator matrix: {0}")]
    SingularDenominator(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// An n×p matrix of observations, rows are observation records.
#[derive(Clone, Debug)]
pub struct DataMatrix {
    inner: DMatrix<f64>,
}

impl DataMatrix {
    pub fn from_matrix(inner: DMatrix<f64>) -> Result<Self, EstimatorError> {
        if inner.nrows() < 2 {
            return Err(EstimatorError::DegenerateSample(inner.nrows()));
        }
        if inner.ncols() == 0 {
            return Err(EstimatorError::ShapeMismatch("p must be at least 1".into()));
        }
        if inner.iter().any(|x| !x.is_finite()) {
            return Err(EstimatorError::Domain("data contains non-finite entries".into()));
        }
        Ok(Self { inner })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, EstimatorError> {
        let n = rows.len();
        if n < 2 {
            return Err(EstimatorError::DegenerateSample(n));
        }
        let p = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(EstimatorError::ShapeMismatch(format!(
                    "row {} has {} fields, expected {}",
                    i + 1,
                    r.len(),
                    p
                )));
            }
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_matrix(DMatrix::from_row_slice(n, p, &flat))
    }

    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn p(&self) -> usize {
        self.inner.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovKind {
    /// denominator N = n−1, sample mean subtracted
    Unbiased,
    /// denominator n, sample mean subtracted
    Mle,
    /// denominator n, known mean subtracted
    Noncentered,
}

/// A p×p symmetric nonnegative-definite covariance estimate.
#[derive(Clone, Debug)]
pub struct CovarianceEstimate {
    matrix: DMatrix<f64>,
    kind: CovKind,
    denominator: usize,
}

impl CovarianceEstimate {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> CovKind {
        self.kind
    }

    pub fn denominator(&self) -> usize {
        self.denominator
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

fn centered_gram(x: &DataMatrix, center: Option<&[f64]>) -> Result<DMatrix<f64>, EstimatorError> {
    let (n, p) = (x.n(), x.p());
    let mut centered = x.matrix().clone();
    match center {
        Some(mu) => {
            if mu.len() != p {
                return Err(EstimatorError::ShapeMismatch(format!(
                    "mean vector has length {}, expected {}",
                    mu.len(),
                    p
                )));
            }
            for i in 0..n {
                for j in 0..p {
                    centered[(i, j)] -= mu[j];
                }
            }
        }
        None => {
            for j in 0..p {
                let mean = centered.column(j).sum() / n as f64;
                for i in 0..n {
                    centered[(i, j)] -= mean;
                }
            }
        }
    }
    Ok(centered.transpose() * centered)
}

/// Unbiased sample covariance S = (1/(n−1)) Σ (x_i − x̄)(x_i − x̄)ᵀ.
pub fn unbiased_cov(x: &DataMatrix) -> Result<CovarianceEstimate, EstimatorError> {
    let n = x.n();
    if n < 2 {
        return Err(EstimatorError::DegenerateSample(n));
    }
    let gram = centered_gram(x, None)?;
    Ok(CovarianceEstimate {
        matrix: gram / (n as f64 - 1.0),
        kind: CovKind::Unbiased,
        denominator: n - 1,
    })
}

/// MLE covariance Σ̂ = (1/n) Σ (x_i − x̄)(x_i − x̄)ᵀ = (1 − 1/n)·S.
pub fn mle_cov(x: &DataMatrix) -> Result<CovarianceEstimate, EstimatorError> {
    let n = x.n();
    if n < 2 {
        return Err(EstimatorError::DegenerateSample(n));
    }
    let gram = centered_gram(x, None)?;
    Ok(CovarianceEstimate {
        matrix: gram / n as f64,
        kind: CovKind::Mle,
        denominator: n,
    })
}

/// Non-centered covariance S⁰ = (1/n) Σ (x_i − μ)(x_i − μ)ᵀ for a known mean.
pub fn noncentered_cov(x: &DataMatrix, mu: &[f64]) -> Result<CovarianceEstimate, EstimatorError> {
    let gram = centered_gram(x, Some(mu))?;
    Ok(CovarianceEstimate {
        matrix: gram / x.n() as f64,
        kind: CovKind::Noncentered,
        denominator: x.n(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectrumKind {
    Covariance,
    Fisher,
    Generic,
}

/// Ascending real eigenvalues.
#[derive(Clone, Debug)]
pub struct EigenSpectrum {
    values: Vec<f64>,
    kind: SpectrumKind,
}

impl EigenSpectrum {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    /// Test-only construction from raw values.
    pub fn from_values(mut values: Vec<f64>, kind: SpectrumKind) -> Self {
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Self { values, kind }
    }
}

fn eigen_with_kind(m: &DMatrix<f64>, kind: SpectrumKind) -> Result<EigenSpectrum, EstimatorError> {
    if m.nrows() != m.ncols() {
        return Err(EstimatorError::ShapeMismatch(format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1.0);
    let mut asym = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > 1e-10 * scale {
        return Err(EstimatorError::NotSymmetric(asym));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym.clone());
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // reconstruction contract: Σλ = tr M, Σλ² = ‖M‖_F²
    let tr: f64 = sym.diagonal().iter().sum();
    let fro2: f64 = sym.iter().map(|x| x * x).sum();
    let sum: f64 = values.iter().sum();
    let sum2: f64 = values.iter().map(|x| x * x).sum();
    let denom = tr.abs().max(1.0);
    if (sum - tr).abs() > 1e-8 * denom {
        return Err(EstimatorError::EigenCheck(format!(
            "sum of eigenvalues {sum} vs trace {tr}"
        )));
    }
    if (sum2 - fro2).abs() > 1e-8 * fro2.max(1.0) {
        return Err(EstimatorError::EigenCheck(format!(
            "sum of squares {sum2} vs Frobenius norm {fro2}"
        )));
    }
    Ok(EigenSpectrum { values, kind })
}

/// Full ascending spectrum of a symmetric matrix.
pub fn eigenvalues_sym(m: &DMatrix<f64>) -> Result<EigenSpectrum, EstimatorError> {
    eigen_with_kind(m, SpectrumKind::Generic)
}

/// Spectrum of a covariance estimate.
pub fn covariance_spectrum(s: &CovarianceEstimate) -> Result<EigenSpectrum, EstimatorError> {
    let mut spec = eigen_with_kind(s.matrix(), SpectrumKind::Covariance)?;
    let scale = spec.values.last().copied().unwrap_or(0.0).abs().max(1.0);
    for v in &mut spec.values {
        if *v < 0.0 && *v > -1e-10 * scale {
            *v = 0.0;
        }
    }
    Ok(spec)
}

/// Eigenvalues of Sx·Sy⁻¹ via the symmetric reduction L⁻¹·Sx·L⁻ᵀ with
/// Sy = L·Lᵀ; real and nonnegative.
pub fn fisher_spectrum(
    sx: &CovarianceEstimate,
    sy: &CovarianceEstimate,
) -> Result<EigenSpectrum, EstimatorError> {
    if sx.dim() != sy.dim() {
        return Err(EstimatorError::ShapeMismatch(format!(
            "dimension mismatch: {} vs {}",
            sx.dim(),
            sy.dim()
        )));
    }
    let chol = nalgebra::Cholesky::new(sy.matrix().clone()).ok_or_else(|| {
        EstimatorError::SingularDenominator(
            "Cholesky factorization of the denominator covariance failed (need p < m)".into(),
        )
    })?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(sx.matrix())
        .ok_or_else(|| EstimatorError::SingularDenominator("triangular solve failed".into()))?;
    let w = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| EstimatorError::SingularDenominator("triangular solve failed".into()))?;
    let w = (&w + w.transpose()) * 0.5;
    let mut spec = eigen_with_kind(&w, SpectrumKind::Fisher)?;
    let scale = spec.values.last().copied().unwrap_or(0.0).abs().max(1.0);
    for v in &mut spec.values {
        if *v < 0.0 {
            if *v < -1e-10 * scale {
                return Err(EstimatorError::EigenCheck(format!(
                    "Fisher eigenvalue {v} is negative beyond tolerance"
                )));
            }
            *v = 0.0;
        }
    }
    Ok(spec)
}

/// A linear spectral statistic: Σ g(λ_j) and its normalized value.
#[derive(Clone, Debug)]
pub struct LssValue {
    pub sum: f64,
    pub mean: f64,
    pub function: String,
}

/// Evaluate Σ g(λ_j) over a spectrum.
pub fn lss(spectrum: &EigenSpectrum, g: &dyn SpectralFn) -> Result<LssValue, EstimatorError> {
    let mut sum = 0.0;
    for &v in spectrum.values() {
        let gv = g.eval(v);
        if !gv.is_finite() {
            return Err(EstimatorError::Domain(format!(
                "{} is undefined at eigenvalue {v} (y >= 1 regime?)",
                g.label()
            )));
        }
        sum += gv;
    }
    Ok(LssValue {
        sum,
        mean: sum / spectrum.len() as f64,
        function: g.label(),
    })
}
