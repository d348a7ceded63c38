//! The two corrected likelihood-ratio tests: identity of one covariance
//! matrix and equality of two, centered by the substitution principle
//! (adjusted sample sizes N = n−1, M = m−1) with raw-size variants for
//! comparison.

use thiserror::Error;

use crate::clt::Kappa;
use crate::clt::MomentParams;
use crate::estimators::{
    self, CovarianceEstimate, DataMatrix, EigenSpectrum, EstimatorError,
};
use crate::funcs::FisherLrtFn;
use crate::mp::{self, MpError};

#[derive(Debug, Error)]
pub enum TestError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Mp(#[from] MpError),
    #[error("ill-conditioned covariance (condition estimate {0:.3e} > 1e12)")]
    IllConditioned(f64),
}

/// Which sample-size convention the centering terms use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SizeConvention {
    /// N = n−1 (and M = m−1): the substitution principle. The default.
    #[default]
    Adjusted,
    /// Raw n (and m): the uncorrected comparison column.
    Raw,
}

impl SizeConvention {
    pub fn ratio(self, p: usize, n: usize) -> f64 {
        match self {
            SizeConvention::Adjusted => p as f64 / (n as f64 - 1.0),
            SizeConvention::Raw => p as f64 / n as f64,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SizeConvention::Adjusted => "adjusted",
            SizeConvention::Raw => "raw",
        }
    }
}

/// Standardized test outcome.
#[derive(Clone, Debug)]
pub struct TestReport {
    pub statistic: f64,
    pub centering: f64,
    pub mean_correction: f64,
    pub variance: f64,
    pub z_score: f64,
    pub p_value: f64,
    pub convention: SizeConvention,
    pub kappa: Kappa,
    pub beta_x: f64,
    pub beta_y: Option<f64>,
    pub p: usize,
    pub n: usize,
    pub m: Option<usize>,
}

/// Upper tail of the standard normal, 1 − Φ(z).
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

fn report(
    statistic: f64,
    centering: f64,
    mean_correction: f64,
    variance: f64,
    convention: SizeConvention,
    mpx: &MomentParams,
    beta_y: Option<f64>,
    p: usize,
    n: usize,
    m: Option<usize>,
) -> TestReport {
    let z_score = (statistic - centering - mean_correction) / variance.sqrt();
    TestReport {
        statistic,
        centering,
        mean_correction,
        variance,
        z_score,
        p_value: normal_sf(z_score),
        convention,
        kappa: mpx.kappa,
        beta_x: mpx.beta,
        beta_y,
        p,
        n,
        m,
    }
}

/// L* = Σλ_j − Σlog λ_j − p = tr S − log|S| − p.
pub fn clrt_identity_statistic(spectrum: &EigenSpectrum) -> Result<f64, TestError> {
    let p = spectrum.len() as f64;
    let mut sum = 0.0;
    for &v in spectrum.values() {
        if v <= 0.0 {
            return Err(TestError::Domain(format!(
                "nonpositive eigenvalue {v}: the identity CLRT requires y < 1"
            )));
        }
        sum += v - v.ln();
    }
    Ok(sum - p)
}

/// One-sample corrected LRT of H₀: Σ = I.
pub fn clrt_identity_test(
    x: &DataMatrix,
    params: &MomentParams,
    convention: SizeConvention,
) -> Result<TestReport, TestError> {
    let (p, n) = (x.p(), x.n());
    let y = convention.ratio(p, n);
    if y >= 1.0 {
        return Err(TestError::Domain(format!(
            "identity CLRT requires y < 1; p = {p}, n = {n} give y = {y:.4} under the {} convention",
            convention.label()
        )));
    }
    let s = estimators::unbiased_cov(x)?;
    let spectrum = estimators::covariance_spectrum(&s)?;
    let statistic = clrt_identity_statistic(&spectrum)?;
    let c = mp::identity_case_centering(y)?;
    let kappa = params.kappa.value();
    let mean_correction = (kappa - 1.0) * c.mean_correction + 0.5 * params.beta * y;
    let variance = 0.5 * kappa * c.variance;
    Ok(report(
        statistic,
        p as f64 * c.lss_mean,
        mean_correction,
        variance,
        convention,
        params,
        None,
        p,
        n,
        None,
    ))
}

fn cholesky_logdet(m: &nalgebra::DMatrix<f64>) -> Result<f64, TestError> {
    let chol = nalgebra::Cholesky::new(m.clone()).ok_or_else(|| {
        TestError::Estimator(EstimatorError::SingularDenominator(
            "Cholesky factorization failed (matrix not positive definite)".into(),
        ))
    })?;
    let diag = chol.l_dirty().diagonal();
    let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
    let mut logdet = 0.0;
    for d in diag.iter() {
        dmin = dmin.min(*d);
        dmax = dmax.max(*d);
        logdet += d.ln();
    }
    // diag-ratio proxy for the condition number
    let cond = (dmax / dmin) * (dmax / dmin);
    if !cond.is_finite() || cond > 1e12 {
        return Err(TestError::IllConditioned(cond));
    }
    Ok(2.0 * logdet)
}

/// −(2/n)·log T* from log-determinants:
/// −log|Sx| − (m/n)log|Sy| + ((n+m)/n)log|c₁Sx + c₂Sy|.
pub fn clrt_equality_statistic(
    sx: &CovarianceEstimate,
    sy: &CovarianceEstimate,
    n: usize,
    m: usize,
) -> Result<f64, TestError> {
    if sx.dim() != sy.dim() {
        return Err(TestError::Estimator(EstimatorError::ShapeMismatch(format!(
            "dimension mismatch: {} vs {}",
            sx.dim(),
            sy.dim()
        ))));
    }
    let (nf, mf) = (n as f64, m as f64);
    let c1 = nf / (nf + mf);
    let c2 = mf / (nf + mf);
    let mix = sx.matrix() * c1 + sy.matrix() * c2;
    let ld_x = cholesky_logdet(sx.matrix())?;
    let ld_y = cholesky_logdet(sy.matrix())?;
    let ld_mix = cholesky_logdet(&mix)?;
    Ok(-ld_x - mf / nf * ld_y + (nf + mf) / nf * ld_mix)
}

/// The same statistic as a Fisher-matrix LSS:
/// −(2/n)log T* = ((n+m)/n)·Σ_j f(λ_j) with f built from the raw ratios
/// y_n = p/n, y_m = p/m and λ_j the eigenvalues of Sx·Sy⁻¹.
pub fn equality_statistic_fisher_route(
    spectrum: &EigenSpectrum,
    n: usize,
    m: usize,
) -> Result<f64, TestError> {
    let p = spectrum.len();
    let f = FisherLrtFn::new(p as f64 / n as f64, p as f64 / m as f64);
    let value = estimators::lss(spectrum, &f)?;
    Ok((n as f64 + m as f64) / n as f64 * value.sum)
}

/// Closed-form centering G_{y1,y2}(f) of the two-sample CLRT.
pub fn equality_centering(y1: f64, y2: f64) -> f64 {
    let h2 = y1 + y2 - y1 * y2;
    let s = y1 + y2;
    h2 / (y1 * y2) * (s / h2).ln()
        + y1 * (1.0 - y2) / (y2 * s) * (1.0 - y2).ln()
        + y2 * (1.0 - y1) / (y1 * s) * (1.0 - y1).ln()
}

/// Closed-form base mean term a_{n,m}(f).
pub fn equality_mean_base(y1: f64, y2: f64) -> f64 {
    let h2 = y1 + y2 - y1 * y2;
    let s = y1 + y2;
    0.5 * ((h2 / s).ln() - y1 / s * (1.0 - y2).ln() - y2 / s * (1.0 - y1).ln())
}

/// Closed-form base variance v_{n,m}(f).
pub fn equality_variance_base(y1: f64, y2: f64) -> f64 {
    let h2 = y1 + y2 - y1 * y2;
    let s = y1 + y2;
    -2.0 * y2 * y2 / (s * s) * (1.0 - y1).ln() - 2.0 * y1 * y1 / (s * s) * (1.0 - y2).ln()
        + 2.0 * (h2 / s).ln()
}

/// Corrected mean a*: (κ−1)a + y₁y₂/(2(y₁+y₂)²)·(β_x y₁ + β_y y₂).
pub fn equality_mean_correction(
    y1: f64,
    y2: f64,
    kappa: Kappa,
    beta_x: f64,
    beta_y: f64,
) -> f64 {
    let s = y1 + y2;
    (kappa.value() - 1.0) * equality_mean_base(y1, y2)
        + y1 * y2 / (2.0 * s * s) * (beta_x * y1 + beta_y * y2)
}

/// Corrected variance v* = (κ/2)·v.
pub fn equality_variance(y1: f64, y2: f64, kappa: Kappa) -> f64 {
    0.5 * kappa.value() * equality_variance_base(y1, y2)
}

/// Two-sample corrected LRT of H₀: Σ_x = Σ_y.
pub fn clrt_equality_test(
    x: &DataMatrix,
    y: &DataMatrix,
    mpx: &MomentParams,
    mpy: &MomentParams,
    convention: SizeConvention,
) -> Result<TestReport, TestError> {
    if x.p() != y.p() {
        return Err(TestError::Estimator(EstimatorError::ShapeMismatch(format!(
            "samples have different dimensions: {} vs {}",
            x.p(),
            y.p()
        ))));
    }
    if mpx.kappa != mpy.kappa {
        return Err(TestError::Domain(
            "both samples must share the real/complex indicator κ".into(),
        ));
    }
    let (p, n, m) = (x.p(), x.n(), y.n());
    let y1 = convention.ratio(p, n);
    let y2 = convention.ratio(p, m);
    if y1 >= 1.0 || y2 >= 1.0 {
        return Err(TestError::Domain(format!(
            "equality CLRT requires p < min(n,m) under the {} convention (got y1 = {y1:.4}, y2 = {y2:.4})",
            convention.label()
        )));
    }
    let sx = estimators::unbiased_cov(x)?;
    let sy = estimators::unbiased_cov(y)?;
    let statistic = clrt_equality_statistic(&sx, &sy, n, m)?;
    let centering = p as f64 * equality_centering(y1, y2);
    let mean_correction = equality_mean_correction(y1, y2, mpx.kappa, mpx.beta, mpy.beta);
    let variance = equality_variance(y1, y2, mpx.kappa);
    Ok(report(
        statistic,
        centering,
        mean_correction,
        variance,
        convention,
        mpx,
        Some(mpy.beta),
        p,
        n,
        Some(m),
    ))
}
