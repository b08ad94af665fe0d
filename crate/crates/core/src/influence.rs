//! Influence functions admissible for Catoni-type estimating equations.
//!
//! An admissible influence `phi` is continuous, nondecreasing and sits inside the
//! logarithmic envelope
//!
//! ```text
//! -log(1 - x + x^2/2) <= phi(x) <= log(1 + x + x^2/2)
//! ```
//!
//! Two built-ins are provided. `Wide` is `sign(x) log(1 + |x| + x^2/2)`, unbounded
//! with logarithmic growth. `Narrow` follows the lower envelope on `[0, 1)` and the
//! upper envelope on `[-1, 0)`, with `±log 2` plateaus beyond; it is the tightest
//! nondecreasing selection inside the envelope and gives a bounded estimator.
//!
//! Custom influences (a tabulated monotone curve or a closed-form callable) must
//! pass [`validate_envelope`] on `[-50, 50]` with step `1e-3` before they can be
//! used. Outside that grid, envelope membership is the caller's responsibility.

use std::f64::consts::LN_2;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Absolute tolerance used when checking grid points against the envelope.
pub const ENVELOPE_TOL: f64 = 1e-12;
/// Tolerance on the central finite-difference slope at the origin.
pub const SLOPE_TOL: f64 = 1e-6;
/// Grid over which a custom influence must validate before use.
pub const VALIDATION_GRID: (f64, f64, f64) = (-50.0, 50.0, 1e-3);

const SLOPE_STEP: f64 = 1e-5;

/// Lipschitz constant of the derivative of `Wide` on the validation grid, rounded up.
pub const WIDE_K1: f64 = 0.250;
/// Lipschitz constant of the derivative of `Narrow` on the validation grid, rounded up.
pub const NARROW_K1: f64 = 2.000;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum CustomPhi {
    /// Monotone knots `(x, phi(x))`, linearly interpolated and clamped at the ends.
    Table { xs: Vec<f64>, ys: Vec<f64> },
    /// Closed-form callable with an optional derivative.
    Function {
        phi: ScalarFn,
        derivative: Option<ScalarFn>,
    },
}

impl CustomPhi {
    pub fn table(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::invalid("custom table columns differ in length"));
        }
        if xs.len() < 2 {
            return Err(Error::invalid("custom table needs at least two knots"));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("custom table contains non-finite values"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "custom table knots must be strictly increasing in x",
            ));
        }
        Ok(CustomPhi::Table { xs, ys })
    }

    /// Reads a two-column `x,phi` table; a non-numeric first line is taken as a header.
    pub fn from_table_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(Error::invalid(format!(
                        "{}:{}: expected two comma-separated columns",
                        path.display(),
                        lineno + 1
                    )))
                }
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    xs.push(x);
                    ys.push(y);
                }
                _ if lineno == 0 => continue,
                _ => {
                    return Err(Error::invalid(format!(
                        "{}:{}: cannot parse numbers",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        Self::table(xs, ys)
    }

    fn eval(&self, x: f64) -> f64 {
        match self {
            CustomPhi::Table { xs, ys } => {
                let last = xs.len() - 1;
                if x <= xs[0] {
                    return ys[0];
                }
                if x >= xs[last] {
                    return ys[last];
                }
                let i = xs.partition_point(|&k| k <= x) - 1;
                let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
                ys[i] + t * (ys[i + 1] - ys[i])
            }
            CustomPhi::Function { phi, .. } => phi(x),
        }
    }

    fn slope_bound(&self) -> f64 {
        match self {
            CustomPhi::Table { xs, ys } => xs
                .windows(2)
                .zip(ys.windows(2))
                .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
                .fold(0.0, f64::max),
            CustomPhi::Function { .. } => f64::INFINITY,
        }
    }
}

impl fmt::Debug for CustomPhi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CustomPhi::Table { xs, .. } => write!(f, "Table({} knots)", xs.len()),
            CustomPhi::Function { derivative, .. } => {
                write!(f, "Function(derivative: {})", derivative.is_some())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum InfluenceKind {
    Wide,
    Narrow,
    Custom(CustomPhi),
}

/// An influence function with its smoothness certificate.
#[derive(Debug, Clone)]
pub struct InfluenceSpec {
    kind: InfluenceKind,
    /// Bound on `|phi'|`.
    pub k0: f64,
    /// Lipschitz constant of `phi'`; infinite when unknown.
    pub k1: f64,
    pub name: String,
    validated: bool,
}

impl InfluenceSpec {
    pub fn wide() -> Self {
        InfluenceSpec {
            kind: InfluenceKind::Wide,
            k0: 1.0,
            k1: WIDE_K1,
            name: "wide".into(),
            validated: true,
        }
    }

    pub fn narrow() -> Self {
        InfluenceSpec {
            kind: InfluenceKind::Narrow,
            k0: 1.0,
            k1: NARROW_K1,
            name: "narrow".into(),
            validated: true,
        }
    }

    /// A custom influence that has not been checked against the envelope.
    ///
    /// Only [`validate_envelope`] and [`phi_eval`] accept it; estimators refuse it
    /// until it goes through [`InfluenceSpec::custom`].
    pub fn custom_unchecked(name: impl Into<String>, custom: CustomPhi) -> Self {
        let k0 = custom.slope_bound();
        InfluenceSpec {
            kind: InfluenceKind::Custom(custom),
            k0,
            k1: f64::INFINITY,
            name: name.into(),
            validated: false,
        }
    }

    /// Validates a custom influence on the standard grid; fails with the report's
    /// first violation when the envelope check does not pass.
    pub fn custom(name: impl Into<String>, custom: CustomPhi) -> Result<Self> {
        let mut spec = Self::custom_unchecked(name, custom);
        let (lo, hi, step) = VALIDATION_GRID;
        let report = validate_envelope(&spec, lo, hi, step)?;
        if !report.passed {
            return Err(Error::domain(format!(
                "custom influence '{}' violates the envelope (first violation at x = {:?}, slope at 0 = {})",
                spec.name, report.first_violation_x, report.slope_at_zero
            )));
        }
        spec.validated = true;
        Ok(spec)
    }

    /// Resolves `wide`, `narrow` or `custom:<path>` (a two-column table file).
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "wide" => Ok(Self::wide()),
            "narrow" => Ok(Self::narrow()),
            other => match other.strip_prefix("custom:") {
                Some(path) => Self::custom(other, CustomPhi::from_table_file(path)?),
                None => Err(Error::invalid(format!(
                    "unknown influence '{other}' (expected wide, narrow or custom:<path>)"
                ))),
            },
        }
    }

    pub fn kind(&self) -> &InfluenceKind {
        &self.kind
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    pub fn has_derivative(&self) -> bool {
        match &self.kind {
            InfluenceKind::Wide | InfluenceKind::Narrow => true,
            InfluenceKind::Custom(CustomPhi::Function { derivative, .. }) => derivative.is_some(),
            InfluenceKind::Custom(CustomPhi::Table { .. }) => false,
        }
    }

    /// Largest value of `|phi|`; infinite for unbounded influences.
    pub fn sup_abs(&self) -> f64 {
        match &self.kind {
            InfluenceKind::Narrow => LN_2,
            InfluenceKind::Custom(CustomPhi::Table { ys, .. }) => {
                ys.iter().fold(0.0, |m, y| m.max(y.abs()))
            }
            _ => f64::INFINITY,
        }
    }

    pub(crate) fn ensure_usable(&self) -> Result<()> {
        if self.validated {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "influence '{}' has not passed envelope validation",
                self.name
            )))
        }
    }

    /// Evaluates `phi(x)` without argument checks.
    #[inline]
    pub fn phi(&self, x: f64) -> f64 {
        match &self.kind {
            InfluenceKind::Wide => wide(x),
            InfluenceKind::Narrow => narrow(x),
            InfluenceKind::Custom(c) => c.eval(x),
        }
    }

    /// Evaluates `phi'(x)`; `None` when no derivative is available.
    #[inline]
    pub fn dphi(&self, x: f64) -> Option<f64> {
        match &self.kind {
            InfluenceKind::Wide => Some(wide_derivative(x)),
            InfluenceKind::Narrow => Some(narrow_derivative(x)),
            InfluenceKind::Custom(CustomPhi::Function {
                derivative: Some(d),
                ..
            }) => Some(d(x)),
            InfluenceKind::Custom(_) => None,
        }
    }
}

#[inline]
fn wide(x: f64) -> f64 {
    let a = x.abs();
    (a + 0.5 * a * a).ln_1p().copysign(x)
}

#[inline]
fn wide_derivative(x: f64) -> f64 {
    let a = x.abs();
    (1.0 + a) / (1.0 + a + 0.5 * a * a)
}

#[inline]
fn narrow(x: f64) -> f64 {
    if x <= -1.0 {
        -LN_2
    } else if x < 0.0 {
        (x + 0.5 * x * x).ln_1p()
    } else if x < 1.0 {
        -(-x + 0.5 * x * x).ln_1p()
    } else {
        LN_2
    }
}

#[inline]
fn narrow_derivative(x: f64) -> f64 {
    let a = x.abs();
    if a >= 1.0 {
        0.0
    } else {
        (1.0 - a) / (1.0 - a + 0.5 * a * a)
    }
}

/// Upper envelope `log(1 + x + x^2/2)`.
#[inline]
pub fn envelope_upper(x: f64) -> f64 {
    (x + 0.5 * x * x).ln_1p()
}

/// Lower envelope `-log(1 - x + x^2/2)`.
#[inline]
pub fn envelope_lower(x: f64) -> f64 {
    -(-x + 0.5 * x * x).ln_1p()
}

pub fn phi_eval(spec: &InfluenceSpec, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::invalid(format!("phi argument must be finite, got {x}")));
    }
    Ok(spec.phi(x))
}

pub fn phi_derivative(spec: &InfluenceSpec, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::invalid(format!(
            "phi' argument must be finite, got {x}"
        )));
    }
    spec.dphi(x).ok_or_else(|| {
        Error::Unsupported(format!("influence '{}' has no derivative", spec.name))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub passed: bool,
    /// Violating grid point closest to the origin (positive side on ties).
    pub first_violation_x: Option<f64>,
    /// Largest signed excursion of `phi` beyond the envelope over the grid;
    /// zero means the curve touches the envelope, negative means strictly inside.
    pub max_envelope_slack: f64,
    pub monotonicity_ok: bool,
    pub slope_at_zero: f64,
}

/// Grid points `lo + i * step` up to and including `hi` (within rounding).
pub fn grid(lo: f64, hi: f64, step: f64) -> impl Iterator<Item = f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=count).map(move |i| lo + i as f64 * step)
}

/// Checks envelope membership, monotonicity, `|phi(x)| <= |x|`, `|phi(x) - x| <= x^2`,
/// `phi(0) = 0` and the slope at the origin on the grid `{lo, lo + step, ..., hi}`.
pub fn validate_envelope(spec: &InfluenceSpec, lo: f64, hi: f64, step: f64) -> Result<EnvelopeReport> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!("grid bounds must satisfy lo < hi, got [{lo}, {hi}]")));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::invalid(format!("grid step must be positive, got {step}")));
    }

    let mut closest: Option<f64> = None;
    let mut note = |x: f64| match closest {
        Some(c) if c.abs() < x.abs() || (c.abs() == x.abs() && c > 0.0) => {}
        _ => closest = Some(x),
    };

    let mut max_slack = f64::NEG_INFINITY;
    let mut monotonicity_ok = true;
    let mut prev: Option<f64> = None;
    for x in grid(lo, hi, step) {
        let y = spec.phi(x);
        let excursion = (y - envelope_upper(x)).max(envelope_lower(x) - y);
        max_slack = max_slack.max(excursion);
        let mut bad = !y.is_finite() || excursion > ENVELOPE_TOL;
        bad |= y.abs() > x.abs() + ENVELOPE_TOL;
        bad |= (y - x).abs() > x * x + ENVELOPE_TOL;
        if let Some(p) = prev {
            if y < p - ENVELOPE_TOL {
                monotonicity_ok = false;
                bad = true;
            }
        }
        if bad {
            note(x);
        }
        prev = Some(y);
    }

    let slope_at_zero = (spec.phi(SLOPE_STEP) - spec.phi(-SLOPE_STEP)) / (2.0 * SLOPE_STEP);
    if spec.phi(0.0) != 0.0 || (slope_at_zero - 1.0).abs() > SLOPE_TOL {
        note(0.0);
    }

    Ok(EnvelopeReport {
        passed: closest.is_none(),
        first_violation_x: closest,
        max_envelope_slack: max_slack,
        monotonicity_ok,
        slope_at_zero,
    })
}

/// Grid estimate of the Lipschitz constant of `phi'`: `max |phi'(x + step) - phi'(x)| / step`.
pub fn derivative_lipschitz(spec: &InfluenceSpec, lo: f64, hi: f64, step: f64) -> Result<f64> {
    let mut prev: Option<f64> = None;
    let mut best = 0.0_f64;
    for x in grid(lo, hi, step) {
        let d = phi_derivative(spec, x)?;
        if let Some(p) = prev {
            best = best.max((d - p).abs() / step);
        }
        prev = Some(d);
    }
    Ok(best)
}

/// Right side of the increment inequality
/// `|phi(x1) - phi(x2) - (x1 - x2)| <= log(1 + q) + |x1 - x2| (q / (1 + q) + |x1 - x2|)`
/// with `q = x1^2 x2^2 / 2`, valid for every admissible influence.
pub fn lemma1_gap_bound(x1: f64, x2: f64) -> f64 {
    let q = 0.5 * x1 * x1 * x2 * x2;
    let d = (x1 - x2).abs();
    q.ln_1p() + d * (q / (1.0 + q) + d)
}
