//! Generalized Marčenko–Pastur limiting spectral distributions for discrete
//! population spectra: companion Stieltjes transform, support, density and
//! linear functionals F^{y,H}(g).
//!
//! The companion transform m̲_y(z) is the unique ℂ⁺ solution of
//!
//! ```text
//! z = −1/m̲ + y ∫ t/(1 + t·m̲) dH(t)
//! ```
//!
//! and the distribution-side transform is recovered through
//! m̲ = −(1−y)/z + y·m.

use num_complex::Complex64;
use thiserror::Error;

use crate::funcs::SpectralFn;
use crate::quad;

/// Residual tolerance for the fixed-point solver.
pub const SOLVER_TOL: f64 = 1e-12;
const SOLVER_CAP: usize = 10_000;
const DAMPING: f64 = 0.5;
/// Imaginary offset used for Stieltjes inversion (a documented knob).
pub const INVERSION_EPS: f64 = 1e-6;
const FUNCTIONAL_TOL: f64 = 1e-9;
const DENSITY_FLOOR: f64 = 1e-8;
const SUPPORT_GRID: usize = 4096;

#[derive(Debug, Error)]
pub enum MpError {
    #[error("invalid spectral model: {0}")]
    InvalidModel(String),
    #[error("fixed-point iteration for m̲(z) did not converge at z = {z} (residual {residual:.3e})")]
    NonConvergence { z: Complex64, residual: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature failed to reach tolerance on [{0}, {1}]")]
    Quadrature(f64, f64),
}

/// Limiting-regime parameters: aspect ratio y and a discrete population
/// spectral distribution H given by (atom, weight) pairs.
#[derive(Clone, Debug)]
pub struct SpectralModel {
    y: f64,
    atoms: Vec<(f64, f64)>,
}

impl SpectralModel {
    pub fn new(y: f64, atoms: &[(f64, f64)]) -> Result<Self, MpError> {
        if !(y.is_finite() && y > 0.0) {
            return Err(MpError::InvalidModel(format!("y must be positive, got {y}")));
        }
        if atoms.is_empty() {
            return Err(MpError::InvalidModel("H needs at least one atom".into()));
        }
        let mut weight_sum = 0.0;
        let mut has_positive = false;
        for &(t, w) in atoms {
            if !t.is_finite() || t < 0.0 {
                return Err(MpError::InvalidModel(format!("atom {t} must be finite and >= 0")));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(MpError::InvalidModel(format!("weight {w} must be positive")));
            }
            if t > 0.0 {
                has_positive = true;
            }
            weight_sum += w;
        }
        if (weight_sum - 1.0).abs() > 1e-12 {
            return Err(MpError::InvalidModel(format!(
                "weights sum to {weight_sum}, expected 1 within 1e-12"
            )));
        }
        if !has_positive {
            return Err(MpError::InvalidModel(
                "H must carry at least one strictly positive atom".into(),
            ));
        }
        Ok(Self { y, atoms: atoms.to_vec() })
    }

    /// Standard MP model: H = δ_1.
    pub fn standard(y: f64) -> Result<Self, MpError> {
        Self::new(y, &[(1.0, 1.0)])
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Point mass of F^{y,H} at the origin, max(0, 1 − 1/y).
    pub fn atom_at_zero(&self) -> f64 {
        (1.0 - 1.0 / self.y).max(0.0)
    }

    /// ∫ t dH(t).
    pub fn population_mean(&self) -> f64 {
        self.atoms.iter().map(|&(t, w)| w * t).sum()
    }

    pub fn max_atom(&self) -> f64 {
        self.atoms.iter().map(|&(t, _)| t).fold(0.0, f64::max)
    }

    /// ∫ t/(1 + t·m) dH(t).
    pub(crate) fn resolvent_mean(&self, m: Complex64) -> Complex64 {
        self.atoms
            .iter()
            .map(|&(t, w)| w * t / (1.0 + t * m))
            .sum()
    }

    /// ∫ t²/(1 + t·m)² dH(t).
    pub(crate) fn resolvent_sq(&self, m: Complex64) -> Complex64 {
        self.atoms
            .iter()
            .map(|&(t, w)| {
                let d = 1.0 + t * m;
                w * t * t / (d * d)
            })
            .sum()
    }

    /// ∫ t²/(1 + t·m)³ dH(t).
    pub(crate) fn resolvent_cube(&self, m: Complex64) -> Complex64 {
        self.atoms
            .iter()
            .map(|&(t, w)| {
                let d = 1.0 + t * m;
                w * t * t / (d * d * d)
            })
            .sum()
    }
}

/// One evaluation of the companion Stieltjes transform.
#[derive(Clone, Copy, Debug)]
pub struct CompanionStieltjes {
    pub z: Complex64,
    pub value: Complex64,
    pub residual: f64,
}

/// Support of the continuous part of F^{y,H}, plus the mass at zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportInterval {
    pub lower: f64,
    pub upper: f64,
    pub atom_at_zero: f64,
}

fn master_residual(model: &SpectralModel, z: Complex64, m: Complex64) -> f64 {
    (z + 1.0 / m - model.y * model.resolvent_mean(m)).norm()
}

/// Damped fixed-point iteration with a Newton polish, on the upper half plane.
fn solve_upper(
    model: &SpectralModel,
    z: Complex64,
    guess: Option<Complex64>,
) -> Result<Complex64, MpError> {
    debug_assert!(z.im > 0.0);
    let y = model.y;
    let default = (y * model.population_mean() - z).inv();
    let mut m = match guess {
        Some(g) if g.im > 0.0 && g.norm().is_finite() => g,
        _ => default,
    };
    if m.im <= 0.0 {
        m = Complex64::new(m.re, 1.0 / (1.0 + z.norm()));
    }
    let mut residual = master_residual(model, z, m);
    for _ in 0..SOLVER_CAP {
        if residual <= SOLVER_TOL && m.im > 0.0 {
            return Ok(m);
        }
        if residual <= 1e-4 {
            // Newton on R(m) = z + 1/m − y∫t/(1+tm)dH; R'(m) = −1/m² + y∫t²/(1+tm)².
            let r = z + 1.0 / m - y * model.resolvent_mean(m);
            let rp = -1.0 / (m * m) + y * model.resolvent_sq(m);
            let candidate = m - r / rp;
            if candidate.im > 0.0 {
                let cand_res = master_residual(model, z, candidate);
                if cand_res < residual {
                    m = candidate;
                    residual = cand_res;
                    continue;
                }
            }
        }
        let target = (y * model.resolvent_mean(m) - z).inv();
        let next = (1.0 - DAMPING) * m + DAMPING * target;
        m = if next.im > 0.0 { next } else { target };
        residual = master_residual(model, z, m);
    }
    if residual <= SOLVER_TOL && m.im > 0.0 {
        Ok(m)
    } else {
        Err(MpError::NonConvergence { z, residual })
    }
}

/// Solve for m̲(z) at any z off the real axis, using conjugate reflection for
/// the lower half plane. `guess` warm-starts the iteration.
pub(crate) fn solve_with_guess(
    model: &SpectralModel,
    z: Complex64,
    guess: Option<Complex64>,
) -> Result<Complex64, MpError> {
    if z.im > 0.0 {
        solve_upper(model, z, guess)
    } else if z.im < 0.0 {
        Ok(solve_upper(model, z.conj(), guess.map(|g| g.conj()))?.conj())
    } else {
        Err(MpError::Domain(format!("z = {z} lies on the real axis")))
    }
}

/// Companion Stieltjes transform m̲_y(z) of F̲^{y,H} = (1−y)δ₀ + y·F^{y,H},
/// the unique ℂ⁺ root of the master equation.
pub fn solve_companion_stieltjes(
    model: &SpectralModel,
    z: Complex64,
) -> Result<CompanionStieltjes, MpError> {
    if z.im <= 0.0 {
        return Err(MpError::Domain(format!("Im(z) must be positive, got z = {z}")));
    }
    let value = solve_upper(model, z, None)?;
    Ok(CompanionStieltjes {
        z,
        value,
        residual: master_residual(model, z, value),
    })
}

/// Derivative from the solved transform:
/// m̲′ = 1 / (1/m̲² − y ∫ t²/(1+t·m̲)² dH).
pub(crate) fn derivative_from_value(model: &SpectralModel, m: Complex64) -> Complex64 {
    (1.0 / (m * m) - model.y * model.resolvent_sq(m)).inv()
}

/// m̲′_y(z), the z-derivative of the companion transform.
pub fn companion_derivative(model: &SpectralModel, z: Complex64) -> Result<Complex64, MpError> {
    let m = solve_with_guess(model, z, None)?;
    Ok(derivative_from_value(model, m))
}

/// Distribution-side Stieltjes transform m(z) of F^{y,H}, recovered from the
/// companion transform through m̲ = −(1−y)/z + y·m.
pub fn mp_stieltjes(model: &SpectralModel, z: Complex64) -> Result<Complex64, MpError> {
    let mb = solve_with_guess(model, z, None)?;
    Ok((mb + (1.0 - model.y) / z) / model.y)
}

fn density_from_companion(model: &SpectralModel, x: f64, mb: Complex64) -> f64 {
    let z = Complex64::new(x, INVERSION_EPS);
    let m = (mb + (1.0 - model.y) / z) / model.y;
    (m.im / std::f64::consts::PI).max(0.0)
}

fn distribution_side_im(model: &SpectralModel, z: Complex64, mb: Complex64) -> f64 {
    ((mb + (1.0 - model.y) / z) / model.y).im / std::f64::consts::PI
}

/// Density by Stieltjes inversion with a 3-point Richardson ladder in the
/// offset (4ε, 2ε, ε), removing the O(ε) and O(ε²) smoothing bias. The
/// ladder also serves as a continuation path toward the real axis.
fn density_ladder(
    model: &SpectralModel,
    x: f64,
    guess: &mut Option<Complex64>,
) -> Result<f64, MpError> {
    let mut vals = [0.0; 3];
    let mut g = *guess;
    for (i, k) in [4.0, 2.0, 1.0].into_iter().enumerate() {
        let z = Complex64::new(x, k * INVERSION_EPS);
        let mb = solve_with_guess(model, z, g)?;
        g = Some(mb);
        vals[i] = distribution_side_im(model, z, mb);
    }
    *guess = g;
    Ok(((8.0 * vals[2] - 6.0 * vals[1] + vals[0]) / 3.0).max(0.0))
}

/// Pushforward density factor ρ(u²) evaluated along the parabola
/// z = (u + ikε)², which keeps the inversion offset uniform in the
/// √-coordinate. Used near a singular lower edge (y = 1), where the plain
/// vertical offset loses O(√ε) of mass.
fn density_parabola_ladder(
    model: &SpectralModel,
    u: f64,
    guess: &mut Option<Complex64>,
) -> Result<f64, MpError> {
    let mut vals = [0.0; 3];
    let mut g = *guess;
    for (i, k) in [4.0, 2.0, 1.0].into_iter().enumerate() {
        let w = Complex64::new(u, k * INVERSION_EPS);
        let z = w * w;
        let mb = solve_with_guess(model, z, g)?;
        g = Some(mb);
        vals[i] = distribution_side_im(model, z, mb);
    }
    *guess = g;
    Ok(((8.0 * vals[2] - 6.0 * vals[1] + vals[0]) / 3.0).max(0.0))
}

/// Density of the continuous part of F^{y,H} at x > 0, by Stieltjes
/// inversion at offset ε (Richardson-extrapolated in the ladder ε, 2ε, 4ε).
pub fn mp_density(model: &SpectralModel, x: f64) -> Result<f64, MpError> {
    if x <= 0.0 {
        return Err(MpError::Domain(format!("density requires x > 0, got {x}")));
    }
    density_ladder(model, x, &mut None)
}

/// Support of the continuous part. Exact for a single atom; for general
/// discrete H, a bracketing interval found by a density scan with
/// bisection-refined edges.
pub fn mp_support(model: &SpectralModel) -> Result<SupportInterval, MpError> {
    let atom_at_zero = model.atom_at_zero();
    let y = model.y;
    let sqrt_y = y.sqrt();
    let positive: Vec<(f64, f64)> = model
        .atoms
        .iter()
        .copied()
        .filter(|&(t, _)| t > 0.0)
        .collect();
    if positive.len() == 1 {
        let t = positive[0].0;
        return Ok(SupportInterval {
            lower: t * (1.0 - sqrt_y) * (1.0 - sqrt_y),
            upper: t * (1.0 + sqrt_y) * (1.0 + sqrt_y),
            atom_at_zero,
        });
    }

    let hi = 1.2 * (1.0 + sqrt_y) * (1.0 + sqrt_y) * model.max_atom();
    let step = hi / SUPPORT_GRID as f64;
    let mut guess = None;
    let mut first = None;
    let mut last = None;
    let mut densities = Vec::with_capacity(SUPPORT_GRID);
    for i in 1..=SUPPORT_GRID {
        let x = i as f64 * step;
        let mb = solve_with_guess(model, Complex64::new(x, INVERSION_EPS), guess)?;
        guess = Some(mb);
        let d = density_from_companion(model, x, mb);
        densities.push((x, d));
        if d > DENSITY_FLOOR {
            if first.is_none() {
                first = Some(i - 1);
            }
            last = Some(i - 1);
        }
    }
    let (first, last) = match (first, last) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(MpError::InvalidModel(
                "density scan found no mass above the floor".into(),
            ))
        }
    };

    let density_at = |x: f64| -> Result<f64, MpError> { mp_density(model, x) };
    // Bisection on density − floor, starting from the bracketing grid cells.
    let refine = |mut lo: f64, mut hi: f64, rising: bool| -> Result<f64, MpError> {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let above = density_at(mid)? > DENSITY_FLOOR;
            if above == rising {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-9 * (1.0 + hi) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    };

    let lower = if first == 0 {
        densities[0].0.min(step * 0.5)
    } else {
        refine(densities[first - 1].0.max(step * 1e-6), densities[first].0 + step, true)?
    };
    let upper = if last + 1 >= SUPPORT_GRID {
        hi
    } else {
        refine(densities[last].0, densities[last + 1].0 + step, false)?
    };
    Ok(SupportInterval {
        lower: lower.max(0.0),
        upper,
        atom_at_zero,
    })
}

/// Linear functional F^{y,H}(g) = ∫ g dF^{y,H}: adaptive quadrature of
/// g·density over the continuous support plus the atom contribution at 0.
pub fn mp_linear_functional(model: &SpectralModel, g: &dyn SpectralFn) -> Result<f64, MpError> {
    let support = mp_support(model)?;
    let atom = model.atom_at_zero();
    let mut total = 0.0;
    if atom > 0.0 {
        let g0 = g.eval(0.0);
        if !g0.is_finite() {
            return Err(MpError::Domain(format!(
                "g = {} is undefined at 0 while the MP law carries mass {atom:.6} there",
                g.label()
            )));
        }
        total += atom * g0;
    }

    let (a, b) = (support.lower.max(0.0), support.upper);
    let mut guess: Option<Complex64> = None;

    // Near-zero lower edge (y = 1): substitute x = u² to absorb the x^{-1/2}
    // singularity, evaluating the density along the matching parabola.
    let value = if a < 1e-6 * b.max(1.0) {
        let lo = a.sqrt().max(1e-7);
        let hi = b.sqrt();
        quad::integrate(
            &mut |u: f64| match density_parabola_ladder(model, u, &mut guess) {
                Ok(rho) => 2.0 * u * rho * g.eval(u * u),
                Err(_) => f64::NAN,
            },
            lo,
            hi,
            FUNCTIONAL_TOL,
        )
    } else {
        quad::integrate(
            &mut |x: f64| match density_ladder(model, x, &mut guess) {
                Ok(rho) => rho * g.eval(x),
                Err(_) => f64::NAN,
            },
            a,
            b,
            FUNCTIONAL_TOL,
        )
    };
    let value = value.ok_or(MpError::Quadrature(a, b))?;
    if !value.is_finite() {
        return Err(MpError::Quadrature(a, b));
    }
    Ok(total + value)
}

/// The closed-form triplet (F^y(g), m(g), v(g)) for g(x) = x − log x − 1 under
/// H = δ₁, valid for 0 < y < 1:
///   F = 1 − (y−1)/y · log(1−y),  m = −log(1−y)/2,  v = −2log(1−y) − 2y.
#[derive(Clone, Copy, Debug)]
pub struct IdentityCentering {
    /// F^{y}(g), the centering functional.
    pub lss_mean: f64,
    /// m(g), the limiting mean term (real Gaussian case).
    pub mean_correction: f64,
    /// v(g), the limiting variance (real Gaussian case).
    pub variance: f64,
}

pub fn identity_case_centering(y: f64) -> Result<IdentityCentering, MpError> {
    if !(y > 0.0 && y < 1.0) {
        return Err(MpError::Domain(format!(
            "identity-case centering requires 0 < y < 1, got y = {y}"
        )));
    }
    let log1my = (-y).ln_1p();
    Ok(IdentityCentering {
        lss_mean: 1.0 - (y - 1.0) / y * log1my,
        mean_correction: -0.5 * log1my,
        variance: -2.0 * log1my - 2.0 * y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcs::BuiltinFn;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    /// ℂ⁺ root of z·m̲² + (z+1−y)·m̲ + 1 = 0, the H=δ₁ closed form.
    pub(crate) fn quadratic_root(y: f64, z: Complex64) -> Complex64 {
        let b = z + 1.0 - y;
        let disc = (b * b - 4.0 * z).sqrt();
        let r1 = (-b + disc) / (2.0 * z);
        let r2 = (-b - disc) / (2.0 * z);
        if r1.im > 0.0 {
            r1
        } else {
            r2
        }
    }

    #[test]
    fn solver_matches_quadratic_root_for_delta_one() {
        let model = SpectralModel::standard(0.5).unwrap();
        let z = Complex64::new(0.0, 1.0);
        let sol = solve_companion_stieltjes(&model, z).unwrap();
        let exact = quadratic_root(0.5, z);
        assert!((sol.value - exact).norm() < 1e-10);
        assert!(sol.residual <= SOLVER_TOL);
        assert!(sol.value.im > 0.0);
    }

    #[test]
    fn degenerate_aspect_ratio_recovers_point_mass_transforms() {
        // As y→0 the companion law collapses to δ₀ (m̲ → −1/z) while the
        // recovered distribution-side transform tends to that of δ₁.
        let model = SpectralModel::standard(1e-8).unwrap();
        let z = Complex64::new(2.0, 1.0);
        let sol = solve_companion_stieltjes(&model, z).unwrap();
        assert!((sol.value - (-z.inv())).norm() < 1e-6);
        let m = mp_stieltjes(&model, z).unwrap();
        let expected = (Complex64::new(1.0, 0.0) - z).inv();
        assert!((m - expected).norm() < 1e-6);
    }

    #[test]
    fn two_atom_solution_satisfies_master_equation() {
        let model = SpectralModel::new(0.5, &[(1.0, 0.5), (2.0, 0.5)]).unwrap();
        let sol = solve_companion_stieltjes(&model, Complex64::new(1.0, 0.5)).unwrap();
        assert!(sol.residual < 1e-12);
        assert!(sol.value.im > 0.0);
    }

    #[test]
    fn solver_rejects_real_axis_and_bad_models() {
        let model = SpectralModel::standard(0.5).unwrap();
        assert!(solve_companion_stieltjes(&model, Complex64::new(1.0, 0.0)).is_err());
        assert!(SpectralModel::new(0.0, &[(1.0, 1.0)]).is_err());
        assert!(SpectralModel::new(0.5, &[(0.0, 1.0)]).is_err());
        assert!(SpectralModel::new(0.5, &[(1.0, 0.9)]).is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for (y, atoms) in [
            (1e-8, vec![(1.0, 1.0)]),
            (0.5, vec![(1.0, 1.0)]),
            (0.5, vec![(1.0, 0.5), (2.0, 0.5)]),
        ] {
            let model = SpectralModel::new(y, &atoms).unwrap();
            for z in [Complex64::new(2.0, 1.0), Complex64::new(0.0, 1.0), Complex64::new(1.0, 1.0)] {
                let d = companion_derivative(&model, z).unwrap();
                let h = 1e-5;
                let plus = solve_companion_stieltjes(&model, z + h).unwrap().value;
                let minus = solve_companion_stieltjes(&model, z - h).unwrap().value;
                let fd = (plus - minus) / (2.0 * h);
                assert!(
                    (d - fd).norm() / d.norm() < 1e-6,
                    "y={y} z={z}: analytic {d} vs fd {fd}"
                );
            }
        }
        // degenerate closed form: m̲′ → 1/z² and the recovered F-side
        // derivative → 1/(1−z)²
        let model = SpectralModel::standard(1e-8).unwrap();
        let z = Complex64::new(2.0, 1.0);
        let d = companion_derivative(&model, z).unwrap();
        assert!((d - 1.0 / (z * z)).norm() < 1e-6);
    }

    #[test]
    fn support_closed_forms() {
        let m1 = SpectralModel::standard(0.25).unwrap();
        let s1 = mp_support(&m1).unwrap();
        assert_abs_diff_eq!(s1.lower, 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(s1.upper, 2.25, epsilon = 1e-14);
        assert_abs_diff_eq!(s1.atom_at_zero, 0.0, epsilon = 1e-14);

        let m2 = SpectralModel::standard(4.0).unwrap();
        let s2 = mp_support(&m2).unwrap();
        assert_abs_diff_eq!(s2.lower, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s2.upper, 9.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s2.atom_at_zero, 0.75, epsilon = 1e-14);
    }

    #[test]
    fn two_atom_support_contains_all_mass() {
        let model = SpectralModel::new(0.5, &[(1.0, 0.5), (2.0, 0.5)]).unwrap();
        let mass = mp_linear_functional(&model, &crate::funcs::ConstFn(1.0)).unwrap();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn density_matches_closed_form_for_delta_one() {
        let model = SpectralModel::standard(0.25).unwrap();
        let (a, b) = (0.25, 2.25);
        for x in [0.4, 1.0, 1.7, 2.2] {
            let d = mp_density(&model, x).unwrap();
            let closed = ((b - x) * (x - a)).sqrt() / (2.0 * std::f64::consts::PI * x * 0.25);
            assert_abs_diff_eq!(d, closed, epsilon = 1e-6);
        }
        assert!(mp_density(&model, 3.0).unwrap() <= 1e-6);
    }

    #[test]
    fn functional_examples() {
        let m03 = SpectralModel::standard(0.3).unwrap();
        let sq = mp_linear_functional(&m03, &BuiltinFn::Square).unwrap();
        assert_abs_diff_eq!(sq, 1.3, epsilon = 1e-6);
        let id = mp_linear_functional(&m03, &BuiltinFn::Identity).unwrap();
        assert_abs_diff_eq!(id, 1.0, epsilon = 1e-6);

        let y = 25.0 / 49.0;
        let model = SpectralModel::standard(y).unwrap();
        let f = mp_linear_functional(&model, &BuiltinFn::LogLrt).unwrap();
        let closed = identity_case_centering(y).unwrap().lss_mean;
        assert_abs_diff_eq!(f, closed, epsilon = 1e-6);
    }

    #[test]
    fn functional_rejects_log_with_mass_at_zero() {
        let model = SpectralModel::standard(2.0).unwrap();
        let err = mp_linear_functional(&model, &BuiltinFn::Log).unwrap_err();
        assert!(matches!(err, MpError::Domain(_)));
    }

    #[test]
    fn mass_is_conserved_at_y_greater_than_one() {
        let model = SpectralModel::standard(2.0).unwrap();
        let mass = mp_linear_functional(&model, &crate::funcs::ConstFn(1.0)).unwrap();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn mass_is_conserved_at_y_equal_one() {
        let model = SpectralModel::standard(1.0).unwrap();
        let mass = mp_linear_functional(&model, &crate::funcs::ConstFn(1.0)).unwrap();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn centering_triplet_examples() {
        let c = identity_case_centering(25.0 / 49.0).unwrap();
        assert_abs_diff_eq!(25.0 * c.lss_mean + c.mean_correction, 8.226, epsilon = 1e-3);
        assert_abs_diff_eq!(c.variance, 0.407, epsilon = 1e-3);

        let raw = identity_case_centering(0.5).unwrap();
        assert_abs_diff_eq!(25.0 * raw.lss_mean + raw.mean_correction, 8.017, epsilon = 1e-3);
        assert_abs_diff_eq!(raw.variance, 0.386, epsilon = 1e-3);

        let tiny = identity_case_centering(1e-10).unwrap();
        assert!(tiny.lss_mean.abs() <= 1e-9);
        assert!(tiny.mean_correction.abs() <= 1e-9);
        assert!(tiny.variance.abs() <= 1e-9);

        assert!(identity_case_centering(1.0).is_err());
    }

    #[test]
    fn conjugate_symmetry() {
        let model = SpectralModel::new(0.7, &[(0.5, 0.25), (1.0, 0.5), (3.0, 0.25)]).unwrap();
        let z = Complex64::new(1.3, 0.8);
        let up = solve_with_guess(&model, z, None).unwrap();
        let down = solve_with_guess(&model, z.conj(), None).unwrap();
        assert!((down - up.conj()).norm() < 1e-12);
    }

    #[test]
    fn solver_grid_against_quadratic_oracle() {
        for i in 0..20 {
            let y = 0.05 + 4.95 * i as f64 / 19.0;
            let model = SpectralModel::standard(y).unwrap();
            for j in 0..20 {
                let z = Complex64::new(-2.0 + 5.0 * j as f64 / 19.0, 0.1 + 9.9 * j as f64 / 19.0);
                let got = solve_companion_stieltjes(&model, z).unwrap().value;
                let exact = quadratic_root(y, z);
                assert!(
                    (got - exact).norm() < 1e-10,
                    "mismatch at y={y}, z={z}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn substitution_difference_identity() {
        // p·(F^{y_n}(x²) − F^{y_N}(x²)) = p(y_n − y_N) = −p²/(n(n−1)), exactly.
        for n in [50usize, 500, 5000] {
            let p = n / 2;
            let yn = p as f64 / n as f64;
            let yn_adj = p as f64 / (n as f64 - 1.0);
            let diff = p as f64 * (yn - yn_adj);
            let exact = -(p as f64 * p as f64) / (n as f64 * (n as f64 - 1.0));
            assert_relative_eq!(diff, exact, max_relative = 1e-12);
        }
        // and the limit is −y² for p = n/2
        let n = 5000.0f64;
        let p = 2500.0f64;
        assert_abs_diff_eq!(-(p * p) / (n * (n - 1.0)), -0.25, epsilon = 1e-4);
    }
}
