//! Test functions for linear spectral statistics.
//!
//! The CLT functionals evaluate a test function both on the real support and
//! at complex arguments along integration contours, so a function here is a
//! value/analytic-continuation pair. Derivative information (in the form
//! x·g'(x)) is only needed by the MLE mean shift and is optional.

use num_complex::Complex64;

/// A scalar test function g used in linear spectral statistics.
///
/// `eval_complex` must be an analytic continuation of `eval` on a
/// neighbourhood of the relevant spectral support. Log-type functions are
/// only analytic off the branch cut (−∞, 0]; they report
/// `requires_positive_part() == true` so contour builders keep Re(z) > 0.
pub trait SpectralFn: Sync {
    fn eval(&self, x: f64) -> f64;
    fn eval_complex(&self, z: Complex64) -> Complex64;

    /// x·g'(x), if a derivative is available. Implementations should return
    /// the continuous extension at x = 0 when one exists (e.g. 1 for log x).
    fn x_deriv(&self, _x: f64) -> Option<f64> {
        None
    }

    /// Whether the analytic continuation is restricted to Re(z) > 0.
    fn requires_positive_part(&self) -> bool {
        true
    }

    fn label(&self) -> String {
        "custom".to_string()
    }
}

/// The four built-in test functions: x, x², log x and the one-sample
/// likelihood-ratio integrand x − log x − 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuiltinFn {
    Identity,
    Square,
    Log,
    LogLrt,
}

impl SpectralFn for BuiltinFn {
    fn eval(&self, x: f64) -> f64 {
        match self {
            BuiltinFn::Identity => x,
            BuiltinFn::Square => x * x,
            BuiltinFn::Log => x.ln(),
            BuiltinFn::LogLrt => x - x.ln() - 1.0,
        }
    }

    fn eval_complex(&self, z: Complex64) -> Complex64 {
        match self {
            BuiltinFn::Identity => z,
            BuiltinFn::Square => z * z,
            BuiltinFn::Log => z.ln(),
            BuiltinFn::LogLrt => z - z.ln() - Complex64::new(1.0, 0.0),
        }
    }

    fn x_deriv(&self, x: f64) -> Option<f64> {
        Some(match self {
            BuiltinFn::Identity => x,
            BuiltinFn::Square => 2.0 * x * x,
            BuiltinFn::Log => 1.0,
            BuiltinFn::LogLrt => x - 1.0,
        })
    }

    fn requires_positive_part(&self) -> bool {
        matches!(self, BuiltinFn::Log | BuiltinFn::LogLrt)
    }

    fn label(&self) -> String {
        match self {
            BuiltinFn::Identity => "x",
            BuiltinFn::Square => "x^2",
            BuiltinFn::Log => "log",
            BuiltinFn::LogLrt => "x-logx-1",
        }
        .to_string()
    }
}

impl std::str::FromStr for BuiltinFn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "x" | "identity" => Ok(BuiltinFn::Identity),
            "x2" | "x^2" | "square" => Ok(BuiltinFn::Square),
            "log" | "logx" | "log-x" => Ok(BuiltinFn::Log),
            "lrt" | "x-logx-1" | "loglrt" => Ok(BuiltinFn::LogLrt),
            other => Err(format!(
                "unknown test function '{other}' (expected x, x2, log or lrt)"
            )),
        }
    }
}

/// The two-sample likelihood-ratio test function of the Fisher spectrum,
/// f(x) = log(y1 + y2·x) − y2/(y1+y2)·log x − log(y1+y2),
/// built from the *raw* dimension-to-sample ratios.
#[derive(Clone, Copy, Debug)]
pub struct FisherLrtFn {
    pub y1: f64,
    pub y2: f64,
}

impl FisherLrtFn {
    pub fn new(y1: f64, y2: f64) -> Self {
        Self { y1, y2 }
    }
}

impl SpectralFn for FisherLrtFn {
    fn eval(&self, x: f64) -> f64 {
        let s = self.y1 + self.y2;
        (self.y1 + self.y2 * x).ln() - self.y2 / s * x.ln() - s.ln()
    }

    fn eval_complex(&self, z: Complex64) -> Complex64 {
        let s = self.y1 + self.y2;
        (self.y2 * z + self.y1).ln() - self.y2 / s * z.ln() - s.ln()
    }

    fn x_deriv(&self, x: f64) -> Option<f64> {
        let s = self.y1 + self.y2;
        Some(self.y2 * x / (self.y1 + self.y2 * x) - self.y2 / s)
    }

    fn label(&self) -> String {
        format!("fisher-lrt(y1={}, y2={})", self.y1, self.y2)
    }
}

/// Linear combination a·f + b·g, used for bilinearity checks.
pub struct LinComb<'a> {
    pub a: f64,
    pub f: &'a dyn SpectralFn,
    pub b: f64,
    pub g: &'a dyn SpectralFn,
}

impl SpectralFn for LinComb<'_> {
    fn eval(&self, x: f64) -> f64 {
        self.a * self.f.eval(x) + self.b * self.g.eval(x)
    }

    fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.a * self.f.eval_complex(z) + self.b * self.g.eval_complex(z)
    }

    fn x_deriv(&self, x: f64) -> Option<f64> {
        Some(self.a * self.f.x_deriv(x)? + self.b * self.g.x_deriv(x)?)
    }

    fn requires_positive_part(&self) -> bool {
        self.f.requires_positive_part() || self.g.requires_positive_part()
    }

    fn label(&self) -> String {
        format!(
            "{}*{} + {}*{}",
            self.a,
            self.f.label(),
            self.b,
            self.g.label()
        )
    }
}

/// Constant function, null in every centering/covariance functional.
pub struct ConstFn(pub f64);

impl SpectralFn for ConstFn {
    fn eval(&self, _x: f64) -> f64 {
        self.0
    }

    fn eval_complex(&self, _z: Complex64) -> Complex64 {
        Complex64::new(self.0, 0.0)
    }

    fn x_deriv(&self, _x: f64) -> Option<f64> {
        Some(0.0)
    }

    fn requires_positive_part(&self) -> bool {
        false
    }

    fn label(&self) -> String {
        format!("const({})", self.0)
    }
}
