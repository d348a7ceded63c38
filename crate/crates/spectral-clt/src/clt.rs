//! Limiting-Gaussian mean and covariance functionals for linear spectral
//! statistics: the identity-population unit-circle forms, the general-H
//! contour forms and the two-sample Fisher forms.
//!
//! Unit-circle integrals are trapezoid quadratures over equispaced nodes.
//! Because every kernel here is a rational function with poles off the
//! circle, the quadrature is evaluated through the kernel's Laurent
//! expansion paired with the integrand's trapezoid Fourier coefficients;
//! this is the same discrete quadrature, organized so that the r↓1
//! regularization costs nothing and node counts stay moderate. The r-limits
//! are taken by 3-point Richardson extrapolation in δ = r − 1.

use num_complex::Complex64;
use thiserror::Error;

use crate::funcs::SpectralFn;
use crate::mp::{self, MpError, SpectralModel};
use crate::quad;

/// Radius ladder for the r↓1 limits; r = 1 + δ.
const RADIUS_DELTAS: [f64; 3] = [1e-3, 5e-4, 2.5e-4];
/// Doubling the node count must change a converged functional by no more
/// than this.
const CONVERGENCE_TOL: f64 = 1e-9;
const CONVERGENCE_HARD: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CltError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("circle quadrature did not converge: doubling nodes to {nodes} still moved the value by {change:.3e}")]
    QuadratureNotConverged { nodes: usize, change: f64 },
    #[error("covariance kernel singular: |1 - a(z1,z2)| = {0:.3e} (contour too close to the support)")]
    KernelSingularity(f64),
    #[error("degenerate kernel: m̲(z1) = m̲(z2) for distinct z1, z2")]
    DegenerateKernel,
    #[error("test function {0} provides no derivative")]
    DerivativeUnavailable(String),
    #[error(transparent)]
    Mp(#[from] MpError),
}

/// Real/complex field indicator κ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kappa {
    /// Complex-valued data, κ = 1.
    Complex,
    /// Real-valued data, κ = 2.
    Real,
}

impl Kappa {
    pub fn value(self) -> f64 {
        match self {
            Kappa::Complex => 1.0,
            Kappa::Real => 2.0,
        }
    }
}

/// Standardized-innovation moment parameters (κ, α_x = |EX²|²,
/// β_x = E|X|⁴ − α_x − 2).
#[derive(Clone, Copy, Debug)]
pub struct MomentParams {
    pub kappa: Kappa,
    pub alpha: f64,
    pub beta: f64,
}

impl MomentParams {
    pub fn new(kappa: Kappa, alpha: f64, beta: f64) -> Result<Self, CltError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(CltError::Domain(format!("alpha must lie in [0,1], got {alpha}")));
        }
        if kappa == Kappa::Real && (alpha - 1.0).abs() > 1e-12 {
            return Err(CltError::Domain(format!(
                "real data forces alpha = 1, got {alpha}"
            )));
        }
        if beta < -2.0 {
            return Err(CltError::Domain(format!("beta must be >= -2, got {beta}")));
        }
        Ok(Self { kappa, alpha, beta })
    }

    pub fn real_gaussian() -> Self {
        Self { kappa: Kappa::Real, alpha: 1.0, beta: 0.0 }
    }

    pub fn complex_gaussian() -> Self {
        Self { kappa: Kappa::Complex, alpha: 0.0, beta: 0.0 }
    }
}

/// Quadrature configuration for both contour families.
#[derive(Clone, Copy, Debug)]
pub struct ContourSpec {
    /// Starting unit-circle node count (power of two, ≥ 256).
    pub circle_nodes: usize,
    /// Doubling cap for circle nodes.
    pub max_circle_nodes: usize,
    /// Gauss–Legendre nodes per rectangle side (even).
    pub rect_nodes_per_side: usize,
    /// Rectangle margins as fractions of the support width (inner, outer).
    pub rect_margins: (f64, f64),
    /// Rectangle half-heights (inner, outer).
    pub rect_half_heights: (f64, f64),
}

impl ContourSpec {
    pub fn new(
        circle_nodes: usize,
        rect_nodes_per_side: usize,
        rect_margins: (f64, f64),
        rect_half_heights: (f64, f64),
    ) -> Result<Self, CltError> {
        if circle_nodes < 256 || !circle_nodes.is_power_of_two() {
            return Err(CltError::Domain(format!(
                "circle node count must be a power of two >= 256, got {circle_nodes}"
            )));
        }
        if rect_nodes_per_side < 8 || rect_nodes_per_side % 2 != 0 {
            return Err(CltError::Domain(format!(
                "rectangle nodes per side must be even and >= 8, got {rect_nodes_per_side}"
            )));
        }
        if !(rect_margins.0 > 0.0 && rect_margins.1 > rect_margins.0) {
            return Err(CltError::Domain("rectangle margins must satisfy 0 < inner < outer".into()));
        }
        if !(rect_half_heights.0 > 0.0 && rect_half_heights.1 > rect_half_heights.0) {
            return Err(CltError::Domain("half-heights must satisfy 0 < inner < outer".into()));
        }
        Ok(Self {
            circle_nodes,
            max_circle_nodes: 1 << 14,
            rect_nodes_per_side,
            rect_margins,
            rect_half_heights,
        })
    }
}

impl Default for ContourSpec {
    fn default() -> Self {
        Self {
            circle_nodes: 512,
            max_circle_nodes: 1 << 14,
            rect_nodes_per_side: 96,
            rect_margins: (0.25, 0.5),
            rect_half_heights: (0.5, 0.75),
        }
    }
}

// ---------------------------------------------------------------------------
// unit-circle machinery
// ---------------------------------------------------------------------------

/// Trapezoid Fourier coefficients of F sampled on M equispaced circle nodes
/// (angular offset in units of the step): returns (c_k for k=0..=k_max,
/// c_{-k} for k=0..=k_max), with c_k = (1/2πi)∮ F(ξ) ξ^{-k-1} dξ.
fn fourier_coeffs(
    samples: &[Complex64],
    offset: f64,
    k_max: usize,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let m = samples.len();
    let mut pos = vec![Complex64::default(); k_max + 1];
    let mut neg = vec![Complex64::default(); k_max + 1];
    for (j, &fj) in samples.iter().enumerate() {
        let theta = 2.0 * std::f64::consts::PI * (j as f64 + offset) / m as f64;
        let dn = Complex64::from_polar(1.0, -theta);
        let up = dn.conj();
        let mut pw_dn = Complex64::new(1.0, 0.0);
        let mut pw_up = Complex64::new(1.0, 0.0);
        for k in 0..=k_max {
            pos[k] += fj * pw_dn;
            neg[k] += fj * pw_up;
            pw_dn *= dn;
            pw_up *= up;
        }
    }
    let scale = 1.0 / m as f64;
    for k in 0..=k_max {
        pos[k] *= scale;
        neg[k] *= scale;
    }
    (pos, neg)
}

fn sample_on_circle(
    f: &dyn SpectralFn,
    map: &dyn Fn(Complex64) -> Complex64,
    m: usize,
    offset: f64,
) -> Vec<Complex64> {
    (0..m)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * (j as f64 + offset) / m as f64;
            f.eval_complex(map(Complex64::from_polar(1.0, theta)))
        })
        .collect()
}

/// φ(ξ) = 1 + h² + h(ξ + 1/ξ), the MP spectral parameter on the circle.
fn mp_circle_map(h: f64) -> impl Fn(Complex64) -> Complex64 {
    move |xi| 1.0 + h * h + h * (xi + xi.inv())
}

fn richardson3(v: [f64; 3]) -> f64 {
    let a1 = 2.0 * v[1] - v[0];
    let a2 = 2.0 * v[2] - v[1];
    (4.0 * a2 - a1) / 3.0
}

/// Doubling driver: evaluate at increasing node counts until the value is
/// stable to CONVERGENCE_TOL.
fn converge_circle(
    spec: &ContourSpec,
    eval: &mut dyn FnMut(usize) -> Result<f64, CltError>,
) -> Result<f64, CltError> {
    let mut m = spec.circle_nodes;
    let mut prev = eval(m)?;
    loop {
        m *= 2;
        let next = eval(m)?;
        let change = (next - prev).abs();
        if change <= CONVERGENCE_TOL {
            return Ok(next);
        }
        if m >= spec.max_circle_nodes {
            if change <= CONVERGENCE_HARD {
                return Ok(next);
            }
            return Err(CltError::QuadratureNotConverged { nodes: m, change });
        }
        prev = next;
    }
}

fn check_circle_domain(f: &dyn SpectralFn, y: f64) -> Result<(), CltError> {
    if y <= 0.0 {
        return Err(CltError::Domain(format!("aspect ratio must be positive, got {y}")));
    }
    if f.requires_positive_part() && y >= 1.0 {
        return Err(CltError::Domain(format!(
            "{} is not analytic on the support at y = {y} (support edge reaches 0)",
            f.label()
        )));
    }
    Ok(())
}

/// I₁(f) = lim_{r↓1} (1/2πi)∮ f(|1+h₀ξ|²)[ξ/(ξ²−r⁻²) − 1/ξ] dξ with h₀=√y.
/// The kernel expands as Σ_{k≥1} r^{−2k} ξ^{−2k−1}, so the quadrature value
/// is Σ_{k≥1} r^{−2k} c_{2k}.
pub fn contour_i1(f: &dyn SpectralFn, y: f64, spec: &ContourSpec) -> Result<f64, CltError> {
    check_circle_domain(f, y)?;
    let map = mp_circle_map(y.sqrt());
    converge_circle(spec, &mut |m| {
        let samples = sample_on_circle(f, &map, m, 0.0);
        let k_max = m / 2;
        let (pos, _) = fourier_coeffs(&samples, 0.0, k_max);
        let vals = RADIUS_DELTAS.map(|d| {
            let rinv2 = 1.0 / ((1.0 + d) * (1.0 + d));
            let mut rpow = rinv2;
            let mut acc = Complex64::default();
            let mut k = 2;
            while k <= k_max {
                acc += pos[k] * rpow;
                rpow *= rinv2;
                k += 2;
            }
            acc.re
        });
        Ok(richardson3(vals))
    })
}

/// I₂(f) = (1/2πi)∮ f(|1+h₀ξ|²) ξ⁻³ dξ = c₂.
pub fn contour_i2(f: &dyn SpectralFn, y: f64, spec: &ContourSpec) -> Result<f64, CltError> {
    check_circle_domain(f, y)?;
    let map = mp_circle_map(y.sqrt());
    converge_circle(spec, &mut |m| {
        let samples = sample_on_circle(f, &map, m, 0.0);
        let (pos, _) = fourier_coeffs(&samples, 0.0, 2);
        Ok(pos[2].re)
    })
}

/// Shared core of the J₁-type double-circle integral
/// lim_{r↓1} (1/2πi)² ∮∮ F(ξ₁)G(ξ₂)/(ξ₁−rξ₂)² dξ₁dξ₂
/// = lim Σ_{u≥0} (u+1) r^{−u−2} c_{−u−1}(F) c_{u+1}(G),
/// with the ξ₂ grid offset by half a step.
fn double_circle_j1(
    f: &dyn SpectralFn,
    g: &dyn SpectralFn,
    map: &dyn Fn(Complex64) -> Complex64,
    spec: &ContourSpec,
) -> Result<f64, CltError> {
    converge_circle(spec, &mut |m| {
        let k_max = m / 2;
        let fs = sample_on_circle(f, map, m, 0.0);
        let gs = sample_on_circle(g, map, m, 0.5);
        let (_, fneg) = fourier_coeffs(&fs, 0.0, k_max);
        let (gpos, _) = fourier_coeffs(&gs, 0.5, k_max);
        let vals = RADIUS_DELTAS.map(|d| {
            let rinv = 1.0 / (1.0 + d);
            let mut rpow = rinv * rinv;
            let mut acc = Complex64::default();
            for u in 0..k_max {
                acc += (u as f64 + 1.0) * rpow * fneg[u + 1] * gpos[u + 1];
                rpow *= rinv;
            }
            acc.re
        });
        Ok(richardson3(vals))
    })
}

/// J₁(f,g), the identity-population covariance kernel.
pub fn contour_j1(
    f: &dyn SpectralFn,
    g: &dyn SpectralFn,
    y: f64,
    spec: &ContourSpec,
) -> Result<f64, CltError> {
    check_circle_domain(f, y)?;
    check_circle_domain(g, y)?;
    let map = mp_circle_map(y.sqrt());
    double_circle_j1(f, g, &map, spec)
}

/// J₂(f,g) = [(1/2πi)∮ f(|1+h₀ξ|²)ξ⁻²dξ]·[same for g] = c₁(f)·c₁(g).
pub fn contour_j2(
    f: &dyn SpectralFn,
    g: &dyn SpectralFn,
    y: f64,
    spec: &ContourSpec,
) -> Result<f64, CltError> {
    check_circle_domain(f, y)?;
    check_circle_domain(g, y)?;
    let map = mp_circle_map(y.sqrt());
    converge_circle(spec, &mut |m| {
        let fs = sample_on_circle(f, &map, m, 0.0);
        let gs = sample_on_circle(g, &map, m, 0.5);
        let (fpos, _) = fourier_coeffs(&fs, 0.0, 1);
        let (gpos, _) = fourier_coeffs(&gs, 0.5, 1);
        Ok((fpos[1] * gpos[1]).re)
    })
}

// ---------------------------------------------------------------------------
// general-H rectangle contours (Theorem-2.1-style forms)
// ---------------------------------------------------------------------------

struct RectNode {
    /// Gauss–Legendre weight × segment direction / (2πi).
    w: Complex64,
    m: Complex64,
    dm: Complex64,
    fval: Complex64,
}

#[derive(Clone, Copy, PartialEq)]
enum RectLevel {
    Inner,
    Outer,
}

fn rectangle_nodes(
    model: &SpectralModel,
    f: &dyn SpectralFn,
    level: RectLevel,
    nodes_per_side: usize,
    spec: &ContourSpec,
) -> Result<Vec<RectNode>, CltError> {
    let support = mp::mp_support(model)?;
    let width = (support.upper - support.lower).max(0.1 * support.upper);
    let (margin, nu, floor_frac) = match level {
        RectLevel::Inner => (spec.rect_margins.0 * width, spec.rect_half_heights.0, 0.5),
        RectLevel::Outer => (spec.rect_margins.1 * width, spec.rect_half_heights.1, 0.25),
    };
    let mut x_l = support.lower - margin;
    if f.requires_positive_part() {
        if support.lower <= 0.0 {
            return Err(CltError::Domain(format!(
                "{} is not analytic at the support edge 0",
                f.label()
            )));
        }
        x_l = x_l.max(floor_frac * support.lower);
    }
    let x_r = support.upper + margin;

    let (gl_nodes, gl_weights) = quad::gauss_legendre(nodes_per_side);
    let two_pi_i = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
    // counterclockwise: bottom (L→R), right (B→T), top (R→L), left (T→B)
    let sides: [(Complex64, Complex64); 4] = [
        (Complex64::new(x_l, -nu), Complex64::new(x_r, -nu)),
        (Complex64::new(x_r, -nu), Complex64::new(x_r, nu)),
        (Complex64::new(x_r, nu), Complex64::new(x_l, nu)),
        (Complex64::new(x_l, nu), Complex64::new(x_l, -nu)),
    ];
    let mut out = Vec::with_capacity(4 * nodes_per_side);
    let mut guess: Option<Complex64> = None;
    for (a, b) in sides {
        let center = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for (t, w) in gl_nodes.iter().zip(&gl_weights) {
            let z = center + half * t;
            let m = mp::solve_with_guess(model, z, guess)?;
            guess = Some(m);
            out.push(RectNode {
                w: w * half / two_pi_i,
                m,
                dm: mp::derivative_from_value(model, m),
                fval: f.eval_complex(z),
            });
        }
    }
    Ok(out)
}

/// Limiting mean E X_f for general discrete H by rectangle-contour
/// quadrature:
///   −(1/2πi)∮ f(z)·A(z)·[α/((1−B)(1−αB)) + β/(1−B)] dz,
/// with A = y·m̲³∫t²/(1+tm̲)³dH and B = y·m̲²∫t²/(1+tm̲)²dH.
pub fn lss_mean_general(
    f: &dyn SpectralFn,
    model: &SpectralModel,
    params: &MomentParams,
    spec: &ContourSpec,
) -> Result<f64, CltError> {
    let y = model.y();
    let alpha = params.alpha;
    let beta = params.beta;
    let eval = |nodes_per_side: usize| -> Result<f64, CltError> {
        let nodes = rectangle_nodes(model, f, RectLevel::Inner, nodes_per_side, spec)?;
        let mut acc = Complex64::default();
        for nd in &nodes {
            let b = y * nd.m * nd.m * model.resolvent_sq(nd.m);
            let a_int = y * nd.m * nd.m * nd.m * model.resolvent_cube(nd.m);
            let one = Complex64::new(1.0, 0.0);
            let denom1 = one - b;
            let denom2 = one - alpha * b;
            if denom1.norm() < 1e-10 || denom2.norm() < 1e-10 {
                return Err(CltError::KernelSingularity(denom1.norm().min(denom2.norm())));
            }
            let weight = a_int * (alpha / (denom1 * denom2) + beta / denom1);
            acc += nd.w * nd.fval * weight;
        }
        Ok(-acc.re)
    };
    let coarse = eval(spec.rect_nodes_per_side)?;
    let fine = eval(spec.rect_nodes_per_side * 2)?;
    let change = (fine - coarse).abs();
    if change > CONVERGENCE_HARD {
        let finer = eval(spec.rect_nodes_per_side * 4)?;
        let change = (finer - fine).abs();
        if change > CONVERGENCE_HARD {
            return Err(CltError::QuadratureNotConverged {
                nodes: spec.rect_nodes_per_side * 4,
                change,
            });
        }
        return Ok(finer);
    }
    Ok(fine)
}

/// Limiting covariance Cov(X_f, X_g) for general discrete H: the
/// (m̲₁−m̲₂)⁻² kernel, the β-weighted H-kernel and the ∂²log(1−a) term, over
/// nested non-overlapping rectangles.
pub fn lss_cov_general(
    f: &dyn SpectralFn,
    g: &dyn SpectralFn,
    model: &SpectralModel,
    params: &MomentParams,
    spec: &ContourSpec,
) -> Result<f64, CltError> {
    let y = model.y();
    let alpha = params.alpha;
    let beta = params.beta;
    let atoms = model.atoms().to_vec();
    let eval = |nodes_per_side: usize| -> Result<f64, CltError> {
        let inner = rectangle_nodes(model, f, RectLevel::Inner, nodes_per_side, spec)?;
        let outer = rectangle_nodes(model, g, RectLevel::Outer, nodes_per_side, spec)?;
        let one = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::default();
        for n1 in &inner {
            for n2 in &outer {
                let dm_diff = n1.m - n2.m;
                if dm_diff.norm() < 1e-13 {
                    return Err(CltError::DegenerateKernel);
                }
                // H-kernels for this node pair
                let mut ih2 = Complex64::default(); // ∫ t²/((1+tm₁)²(1+tm₂)²) dH
                let mut q = Complex64::default(); // ∫ t² m₁m₂/((1+tm₁)(1+tm₂)) dH
                let mut q1 = Complex64::default(); // ∫ t² m₂/((1+tm₂)(1+tm₁)²) dH
                let mut q2 = Complex64::default(); // ∫ t² m₁/((1+tm₁)(1+tm₂)²) dH
                for &(t, w) in &atoms {
                    let d1 = one + t * n1.m;
                    let d2 = one + t * n2.m;
                    let t2w = w * t * t;
                    ih2 += t2w / (d1 * d1 * d2 * d2);
                    q += t2w * n1.m * n2.m / (d1 * d2);
                    q1 += t2w * n2.m / (d2 * d1 * d1);
                    q2 += t2w * n1.m / (d1 * d2 * d2);
                }
                let pair_w = n1.w * n2.w * n1.fval * n2.fval;
                // (m̲₁−m̲₂)⁻² kernel
                let t1 = n1.dm * n2.dm / (dm_diff * dm_diff);
                // β-weighted H-kernel (dm̲ measure)
                let t2 = n1.dm * n2.dm * ih2;
                // ∂²/∂z₁∂z₂ log(1 − a) with a = α·y·Q
                let v = one - alpha * y * q;
                if v.norm() < 1e-10 {
                    return Err(CltError::KernelSingularity(v.norm()));
                }
                let qz1 = n1.dm * q1;
                let qz2 = n2.dm * q2;
                let qz12 = n1.dm * n2.dm * ih2;
                let lpp = -alpha * y * (qz12 / v + alpha * y * qz1 * qz2 / (v * v));
                acc += pair_w * (t1 + y * beta * t2 - lpp);
            }
        }
        Ok(acc.re)
    };
    let coarse = eval(spec.rect_nodes_per_side)?;
    let fine = eval(spec.rect_nodes_per_side * 2)?;
    let change = (fine - coarse).abs();
    if change > CONVERGENCE_HARD {
        return Err(CltError::QuadratureNotConverged {
            nodes: spec.rect_nodes_per_side * 2,
            change,
        });
    }
    Ok(fine)
}

/// a(z1, z2) = α·(1 + m̲₁m̲₂(z₁−z₂)/(m̲₂−m̲₁)); the coincident limit uses
/// a(z,z) = α·(1 − m̲²/m̲′).
pub fn a_kernel(
    z1: Complex64,
    z2: Complex64,
    model: &SpectralModel,
    alpha: f64,
) -> Result<Complex64, CltError> {
    let m1 = mp::solve_with_guess(model, z1, None)?;
    if z1 == z2 {
        let dm = mp::derivative_from_value(model, m1);
        return Ok(alpha * (Complex64::new(1.0, 0.0) - m1 * m1 / dm));
    }
    let m2 = mp::solve_with_guess(model, z2, None)?;
    let diff = m2 - m1;
    if diff.norm() < 1e-13 * m1.norm().max(1.0) {
        return Err(CltError::DegenerateKernel);
    }
    Ok(alpha * (Complex64::new(1.0, 0.0) + m1 * m2 * (z1 - z2) / diff))
}

struct XDerivFn<'a>(&'a dyn SpectralFn);

impl SpectralFn for XDerivFn<'_> {
    fn eval(&self, x: f64) -> f64 {
        self.0.x_deriv(x).unwrap_or(f64::NAN)
    }

    fn eval_complex(&self, _z: Complex64) -> Complex64 {
        unreachable!("x·g'(x) is only integrated against the real density")
    }

    fn requires_positive_part(&self) -> bool {
        false
    }

    fn label(&self) -> String {
        format!("x*d/dx[{}]", self.0.label())
    }
}

/// MLE mean shift m₁(g) = −y·F^{y,H}(x·g′(x)).
pub fn mle_mean_shift(g: &dyn SpectralFn, model: &SpectralModel) -> Result<f64, CltError> {
    if g.x_deriv(1.0).is_none() {
        return Err(CltError::DerivativeUnavailable(g.label()));
    }
    let shifted = XDerivFn(g);
    Ok(-model.y() * mp::mp_linear_functional(model, &shifted)?)
}

// ---------------------------------------------------------------------------
// two-sample Fisher forms
// ---------------------------------------------------------------------------

/// Limiting Fisher-matrix parameters: y₁ = lim p/n, y₂ = lim p/m ∈ (0,1) and
/// h = (y₁ + y₂ − y₁y₂)^{1/2}.
#[derive(Clone, Copy, Debug)]
pub struct FisherModel {
    y1: f64,
    y2: f64,
    h: f64,
}

impl FisherModel {
    pub fn new(y1: f64, y2: f64) -> Result<Self, CltError> {
        if !(y1 > 0.0 && y1.is_finite()) {
            return Err(CltError::Domain(format!("y1 must be positive, got {y1}")));
        }
        if !(y2 > 0.0 && y2 < 1.0) {
            return Err(CltError::Domain(format!("y2 must lie in (0,1), got {y2}")));
        }
        let h = (y1 + y2 - y1 * y2).sqrt();
        Ok(Self { y1, y2, h })
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Support of the Fisher LSD, [(1−h)², (1+h)²]/(1−y₂)².
    pub fn support(&self) -> (f64, f64) {
        let d = (1.0 - self.y2) * (1.0 - self.y2);
        ((1.0 - self.h) * (1.0 - self.h) / d, (1.0 + self.h) * (1.0 + self.h) / d)
    }

    fn circle_map(&self) -> impl Fn(Complex64) -> Complex64 {
        let h = self.h;
        let denom = (1.0 - self.y2) * (1.0 - self.y2);
        move |xi: Complex64| (1.0 + h * h + h * (xi + xi.inv())) / denom
    }
}

fn check_fisher_domain(f: &dyn SpectralFn, fm: &FisherModel) -> Result<(), CltError> {
    if f.requires_positive_part() && fm.h >= 1.0 {
        return Err(CltError::Domain(format!(
            "{} is not analytic on the Fisher support when h >= 1 (y1 = {} >= 1)",
            f.label(),
            fm.y1
        )));
    }
    Ok(())
}

fn same_kappa(mpx: &MomentParams, mpy: &MomentParams) -> Result<Kappa, CltError> {
    if mpx.kappa != mpy.kappa {
        return Err(CltError::Domain(
            "both samples must share the real/complex indicator κ".into(),
        ));
    }
    Ok(mpx.kappa)
}

/// Limiting mean of the Fisher-matrix LSS CLT: the (κ−1) r-limit term, the
/// β_x kernel (ξ+y₂/h)⁻³ term and the β_y rational-kernel term, all on the
/// unit circle.
pub fn fisher_lss_mean(
    f: &dyn SpectralFn,
    fm: &FisherModel,
    mpx: &MomentParams,
    mpy: &MomentParams,
    spec: &ContourSpec,
) -> Result<f64, CltError> {
    check_fisher_domain(f, fm)?;
    let kappa = same_kappa(mpx, mpy)?.value();
    let (y1, y2, h) = (fm.y1, fm.y2, fm.h);
    let a = y2 / h;
    let s2 = y2 / (h * h);
    let map = fm.circle_map();
    converge_circle(spec, &mut |m| {
        let samples = sample_on_circle(f, &map, m, 0.0);
        let k_max = m / 2;
        let (c, _) = fourier_coeffs(&samples, 0.0, k_max);

        // (κ−1)/2 · Σ_k c_k [r^{−k}(1+(−1)^k) − 2(−a)^k], extrapolated in r.
        let t1 = if kappa > 1.0 {
            let vals = RADIUS_DELTAS.map(|d| {
                let rinv = 1.0 / (1.0 + d);
                let mut rpow = rinv;
                let mut apow = -a;
                let mut acc = Complex64::default();
                for k in 1..=k_max {
                    let sign = if k % 2 == 0 { 2.0 } else { 0.0 };
                    acc += c[k] * (sign * rpow - 2.0 * apow);
                    rpow *= rinv;
                    apow *= -a;
                }
                acc.re
            });
            (kappa - 1.0) * 0.5 * richardson3(vals)
        } else {
            0.0
        };

        // β_x y₁(1−y₂)²/h² · (1/2πi)∮ f(φ)/(ξ+a)³ dξ
        //   = coeff pairing with Σ_{k≥2} (k−1)k/2 (−a)^{k−2} c_k.
        let t2 = if mpx.beta != 0.0 {
            let mut apow = 1.0;
            let mut acc = Complex64::default();
            for k in 2..=k_max {
                let kf = k as f64;
                acc += c[k] * ((kf - 1.0) * kf * 0.5 * apow);
                apow *= -a;
            }
            mpx.beta * y1 * (1.0 - y2) * (1.0 - y2) / (h * h) * acc.re
        } else {
            0.0
        };

        // β_y(1−y₂)/2 · (1/2πi)∮ f(φ)(ξ²−y₂/h²)/(ξ+a)² [...] dξ. With
        // s² = y₂/h² the kernel factorizes to 2ξ/(ξ+a)² − 2(ξ²−s²)/(ξ+a)³,
        // whose pairing is Σ_j c_j[−j(j+1)(−a)^j + s²(j−1)j(−a)^{j−2}].
        let t3 = if mpy.beta != 0.0 {
            let mut acc = Complex64::default();
            let mut apow_j = -a; // (−a)^j at j=1
            for j in 1..=k_max {
                let jf = j as f64;
                let mut coeff = -jf * (jf + 1.0) * apow_j;
                if j >= 2 {
                    let apow_jm2 = apow_j / (a * a); // (−a)^{j−2}
                    coeff += s2 * (jf - 1.0) * jf * apow_jm2;
                }
                acc += c[j] * coeff;
                apow_j *= -a;
            }
            mpy.beta * (1.0 - y2) * 0.5 * acc.re
        } else {
            0.0
        };

        Ok(t1 + t2 + t3)
    })
}

/// Limiting covariance of the Fisher-matrix LSS CLT: the κ double-circle
/// (ξ₁−rξ₂)⁻² term plus the (β_x y₁+β_y y₂)-weighted product term.
pub fn fisher_lss_cov(
    f: &dyn SpectralFn,
    g: &dyn SpectralFn,
    fm: &FisherModel,
    mpx: &MomentParams,
    mpy: &MomentParams,
    spec: &ContourSpec,
) -> Result<f64, CltError> {
    check_fisher_domain(f, fm)?;
    check_fisher_domain(g, fm)?;
    let kappa = same_kappa(mpx, mpy)?.value();
    let (y1, y2, h) = (fm.y1, fm.y2, fm.h);
    let a = y2 / h;
    let map = fm.circle_map();

    let kappa_term = kappa * double_circle_j1(f, g, &map, spec)?;

    let beta_weight = mpx.beta * y1 + mpy.beta * y2;
    let beta_term = if beta_weight != 0.0 {
        // (1/2πi)∮ F/(ξ+a)² dξ = Σ_{k≥1} k(−a)^{k−1} c_k, for f and g.
        let single = |func: &dyn SpectralFn, offset: f64| -> Result<f64, CltError> {
            converge_circle(spec, &mut |m| {
                let samples = sample_on_circle(func, &map, m, offset);
                let k_max = m / 2;
                let (c, _) = fourier_coeffs(&samples, offset, k_max);
                let mut apow = 1.0;
                let mut acc = Complex64::default();
                for k in 1..=k_max {
                    acc += c[k] * (k as f64 * apow);
                    apow *= -a;
                }
                Ok(acc.re)
            })
        };
        let sf = single(f, 0.0)?;
        let sg = single(g, 0.5)?;
        beta_weight * (1.0 - y2) * (1.0 - y2) / (h * h) * sf * sg
    } else {
        0.0
    };

    Ok(kappa_term + beta_term)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcs::{BuiltinFn, ConstFn, FisherLrtFn, LinComb};
    use approx::assert_abs_diff_eq;

    fn spec() -> ContourSpec {
        ContourSpec::default()
    }

    #[test]
    fn i_forms_vanish_on_identity_and_constants() {
        let s = spec();
        assert!(contour_i1(&BuiltinFn::Identity, 0.5, &s).unwrap().abs() <= 1e-9);
        assert!(contour_i2(&BuiltinFn::Identity, 0.5, &s).unwrap().abs() <= 1e-9);
        assert!(contour_i1(&ConstFn(1.0), 0.5, &s).unwrap().abs() <= 1e-12);
        assert!(contour_i2(&ConstFn(1.0), 0.5, &s).unwrap().abs() <= 1e-12);
        assert!(contour_j1(&BuiltinFn::Identity, &ConstFn(1.0), 0.5, &s).unwrap().abs() <= 1e-10);
        assert!(contour_j2(&BuiltinFn::Identity, &ConstFn(1.0), 0.5, &s).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn i1_matches_identity_case_mean() {
        let y = 25.0 / 49.0;
        let m = crate::mp::identity_case_centering(y).unwrap().mean_correction;
        let i1 = contour_i1(&BuiltinFn::LogLrt, y, &spec()).unwrap();
        assert_abs_diff_eq!(i1, m, epsilon = 1e-6);
        // I2(g) = y/2 for g = x − log x − 1 (residue calculus)
        let i2 = contour_i2(&BuiltinFn::LogLrt, 0.3, &spec()).unwrap();
        assert_abs_diff_eq!(i2, 0.15, epsilon = 1e-9);
    }

    #[test]
    fn j_forms_on_identity_function() {
        let s = spec();
        for y in [0.2, 0.5, 0.7, 0.8] {
            let j1 = contour_j1(&BuiltinFn::Identity, &BuiltinFn::Identity, y, &s).unwrap();
            let j2 = contour_j2(&BuiltinFn::Identity, &BuiltinFn::Identity, y, &s).unwrap();
            assert_abs_diff_eq!(j1, y, epsilon = 1e-8);
            assert_abs_diff_eq!(j2, y, epsilon = 1e-8);
        }
    }

    #[test]
    fn j1_matches_identity_case_variance() {
        let y = 25.0 / 49.0;
        let v = crate::mp::identity_case_centering(y).unwrap().variance;
        let j1 = contour_j1(&BuiltinFn::LogLrt, &BuiltinFn::LogLrt, y, &spec()).unwrap();
        let j2 = contour_j2(&BuiltinFn::LogLrt, &BuiltinFn::LogLrt, y, &spec()).unwrap();
        // κJ1 + βJ2 at κ=2, β=0
        assert_abs_diff_eq!(2.0 * j1, v, epsilon = 1e-6);
        // J2(g,g) = c₁(g)² = 0 for this g
        assert!(j2.abs() <= 1e-10);
    }

    #[test]
    fn j_forms_are_bilinear_and_symmetric() {
        let s = spec();
        let y = 0.6;
        let f = BuiltinFn::Square;
        let g = BuiltinFn::LogLrt;
        let combo = LinComb { a: 0.7, f: &f, b: -1.3, g: &g };
        let j_combo = contour_j1(&combo, &BuiltinFn::Log, y, &s).unwrap();
        let jf = contour_j1(&f, &BuiltinFn::Log, y, &s).unwrap();
        let jg = contour_j1(&g, &BuiltinFn::Log, y, &s).unwrap();
        assert_abs_diff_eq!(j_combo, 0.7 * jf - 1.3 * jg, epsilon = 1e-9);

        let j_fg = contour_j1(&f, &g, y, &s).unwrap();
        let j_gf = contour_j1(&g, &f, y, &s).unwrap();
        assert_abs_diff_eq!(j_fg, j_gf, epsilon = 1e-10);
    }

    #[test]
    fn mean_general_matches_circle_route_for_delta_one() {
        let s = spec();
        let y = 25.0 / 49.0;
        let model = SpectralModel::standard(y).unwrap();
        let params = MomentParams::real_gaussian();
        let mean = lss_mean_general(&BuiltinFn::LogLrt, &model, &params, &s).unwrap();
        let closed = crate::mp::identity_case_centering(y).unwrap().mean_correction;
        assert_abs_diff_eq!(mean, closed, epsilon = 1e-5);
        assert_abs_diff_eq!(mean, 0.35693, epsilon = 1e-4);

        // f = x has zero limiting mean
        let zero = lss_mean_general(&BuiltinFn::Identity, &model, &params, &s).unwrap();
        assert!(zero.abs() <= 1e-8);

        // complex Gaussian-like parameters kill every term
        let cg = MomentParams::complex_gaussian();
        for f in [BuiltinFn::Identity, BuiltinFn::Square, BuiltinFn::Log, BuiltinFn::LogLrt] {
            let v = lss_mean_general(&f, &model, &cg, &s).unwrap();
            assert!(v.abs() <= 1e-10, "{:?} gave {v}", f);
        }
    }

    #[test]
    fn cov_general_matches_closed_forms() {
        let s = spec();
        let y = 25.0 / 49.0;
        let model = SpectralModel::standard(y).unwrap();
        let params = MomentParams::real_gaussian();
        let cov = lss_cov_general(&BuiltinFn::LogLrt, &BuiltinFn::LogLrt, &model, &params, &s)
            .unwrap();
        let closed = crate::mp::identity_case_centering(y).unwrap().variance;
        assert_abs_diff_eq!(cov, closed, epsilon = 1e-5);

        // f = g = x, β = 1, y = 0.5: κJ1 + βJ2 = 2·0.5 + 1·0.5 = 1.5
        let model_half = SpectralModel::standard(0.5).unwrap();
        let p2 = MomentParams::new(Kappa::Real, 1.0, 1.0).unwrap();
        let cov_x =
            lss_cov_general(&BuiltinFn::Identity, &BuiltinFn::Identity, &model_half, &p2, &s)
                .unwrap();
        assert_abs_diff_eq!(cov_x, 1.5, epsilon = 1e-5);

        let null =
            lss_cov_general(&BuiltinFn::Identity, &ConstFn(1.0), &model_half, &p2, &s).unwrap();
        assert!(null.abs() <= 1e-8);
    }

    #[test]
    fn a_kernel_properties() {
        let model = SpectralModel::standard(0.5).unwrap();
        let z1 = Complex64::new(1.0, 1.0);
        let z2 = Complex64::new(1.0, 2.0);
        assert_eq!(a_kernel(z1, z2, &model, 0.0).unwrap(), Complex64::default());

        let a = a_kernel(z1, z2, &model, 1.0).unwrap();
        assert!(a.norm().is_finite());
        assert!((Complex64::new(1.0, 0.0) - a).norm() > 0.0);

        // real on conjugate pairs
        let ac = a_kernel(z1, z1.conj(), &model, 1.0).unwrap();
        assert!(ac.im.abs() < 1e-10);

        // coincident-point limit agrees with nearby off-diagonal values
        let near = a_kernel(z1, z1 + Complex64::new(1e-6, 0.0), &model, 1.0).unwrap();
        let diag = a_kernel(z1, z1, &model, 1.0).unwrap();
        assert!((near - diag).norm() < 1e-4);
    }

    #[test]
    fn mle_shift_examples() {
        let model = SpectralModel::standard(0.5).unwrap();
        let m1 = mle_mean_shift(&BuiltinFn::Identity, &model).unwrap();
        assert_abs_diff_eq!(m1, -0.5, epsilon = 1e-6);
        let m2 = mle_mean_shift(&BuiltinFn::Square, &model).unwrap();
        assert_abs_diff_eq!(m2, -1.5, epsilon = 1e-6);
        let m0 = mle_mean_shift(&ConstFn(3.0), &model).unwrap();
        assert!(m0.abs() <= 1e-12);
    }

    /// f₁(x) = log(y₁ + y₂x), one leg of the two-sample LRT function.
    struct LogAffine {
        y1: f64,
        y2: f64,
    }

    impl SpectralFn for LogAffine {
        fn eval(&self, x: f64) -> f64 {
            (self.y1 + self.y2 * x).ln()
        }
        fn eval_complex(&self, z: Complex64) -> Complex64 {
            (self.y2 * z + self.y1).ln()
        }
        fn label(&self) -> String {
            "log(y1+y2 x)".into()
        }
    }

    // Closed forms from the two-sample CLT proof (parameters c'=1, d'=h,
    // c=h, d=y₂).
    fn ex_f1(kappa: f64, bx: f64, by: f64, y1: f64, y2: f64) -> f64 {
        let h2 = y1 + y2 - y1 * y2;
        let s = y1 + y2;
        (kappa - 1.0) / 2.0 * (h2 / (s * (1.0 - y2))).ln() - bx / 2.0 * y1 * y2 * y2 / (s * s)
            + by / 2.0 * y2 * y2 * (2.0 * y1 + y2) / (s * s)
    }

    fn ex_f2(kappa: f64, bx: f64, by: f64, y1: f64, y2: f64) -> f64 {
        (kappa - 1.0) / 2.0 * ((1.0 - y1) / (1.0 - y2)).ln() - bx / 2.0 * y1 + by / 2.0 * y2
    }

    fn var_f1(kappa: f64, bx: f64, by: f64, y1: f64, y2: f64) -> f64 {
        let h2 = y1 + y2 - y1 * y2;
        let s = y1 + y2;
        kappa * (h2 / (s * (1.0 - y2))).ln() + (bx * y1 + by * y2) * y2 * y2 / (s * s)
    }

    fn var_f2(kappa: f64, bx: f64, by: f64, y1: f64, y2: f64) -> f64 {
        kappa * (1.0 / ((1.0 - y1) * (1.0 - y2))).ln() + bx * y1 + by * y2
    }

    fn cov_f1_f2(kappa: f64, bx: f64, by: f64, y1: f64, y2: f64) -> f64 {
        kappa * (1.0 / (1.0 - y2)).ln() + (bx * y1 + by * y2) * y2 / (y1 + y2)
    }

    #[test]
    fn fisher_mean_matches_proof_closed_forms() {
        let s = spec();
        let (y1, y2) = (0.3, 0.4);
        let fm = FisherModel::new(y1, y2).unwrap();
        let mpx = MomentParams::new(Kappa::Real, 1.0, 0.7).unwrap();
        let mpy = MomentParams::new(Kappa::Real, 1.0, -0.3).unwrap();
        let f1 = LogAffine { y1, y2 };
        let got1 = fisher_lss_mean(&f1, &fm, &mpx, &mpy, &s).unwrap();
        assert_abs_diff_eq!(got1, ex_f1(2.0, 0.7, -0.3, y1, y2), epsilon = 1e-8);
        let got2 = fisher_lss_mean(&BuiltinFn::Log, &fm, &mpx, &mpy, &s).unwrap();
        assert_abs_diff_eq!(got2, ex_f2(2.0, 0.7, -0.3, y1, y2), epsilon = 1e-8);
    }

    #[test]
    fn fisher_cov_matches_proof_closed_forms() {
        let s = spec();
        let (y1, y2) = (0.3, 0.4);
        let fm = FisherModel::new(y1, y2).unwrap();
        let mpx = MomentParams::new(Kappa::Real, 1.0, 0.7).unwrap();
        let mpy = MomentParams::new(Kappa::Real, 1.0, -0.3).unwrap();
        let f1 = LogAffine { y1, y2 };
        let v1 = fisher_lss_cov(&f1, &f1, &fm, &mpx, &mpy, &s).unwrap();
        assert_abs_diff_eq!(v1, var_f1(2.0, 0.7, -0.3, y1, y2), epsilon = 1e-8);
        let v2 = fisher_lss_cov(&BuiltinFn::Log, &BuiltinFn::Log, &fm, &mpx, &mpy, &s).unwrap();
        assert_abs_diff_eq!(v2, var_f2(2.0, 0.7, -0.3, y1, y2), epsilon = 1e-8);
        let c12 = fisher_lss_cov(&f1, &BuiltinFn::Log, &fm, &mpx, &mpy, &s).unwrap();
        assert_abs_diff_eq!(c12, cov_f1_f2(2.0, 0.7, -0.3, y1, y2), epsilon = 1e-8);
        // symmetry
        let c21 = fisher_lss_cov(&BuiltinFn::Log, &f1, &fm, &mpx, &mpy, &s).unwrap();
        assert_abs_diff_eq!(c12, c21, epsilon = 1e-10);
    }

    #[test]
    fn fisher_mean_table_two_entry() {
        let s = spec();
        let y = 20.0 / 39.0;
        let fm = FisherModel::new(y, y).unwrap();
        let gaussian = MomentParams::real_gaussian();
        let f = FisherLrtFn::new(y, y);
        let a = fisher_lss_mean(&f, &fm, &gaussian, &gaussian, &s).unwrap();
        assert_abs_diff_eq!(a, 0.2115, epsilon = 1e-4);
        let v = fisher_lss_cov(&f, &f, &fm, &gaussian, &gaussian, &s).unwrap();
        assert_abs_diff_eq!(v, 0.1266, epsilon = 1e-4);

        // constants are null
        assert!(fisher_lss_mean(&ConstFn(2.0), &fm, &gaussian, &gaussian, &s).unwrap().abs() <= 1e-10);
        assert!(
            fisher_lss_cov(&ConstFn(2.0), &ConstFn(2.0), &fm, &gaussian, &gaussian, &s)
                .unwrap()
                .abs()
                <= 1e-10
        );

        // complex Gaussian parameters: mean vanishes entirely
        let cg = MomentParams::complex_gaussian();
        let zero = fisher_lss_mean(&f, &fm, &cg, &cg, &s).unwrap();
        assert!(zero.abs() <= 1e-10);
    }

    #[test]
    fn fisher_model_validation() {
        assert!(FisherModel::new(0.5, 0.5).is_ok());
        assert!(FisherModel::new(0.0, 0.5).is_err());
        assert!(FisherModel::new(0.5, 1.0).is_err());
        let fm = FisherModel::new(0.25, 1.0 / 6.0).unwrap();
        assert_abs_diff_eq!(fm.h() * fm.h(), 0.25 + 1.0 / 6.0 - 0.25 / 6.0, epsilon = 1e-14);
    }
}
