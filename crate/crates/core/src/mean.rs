//! Catoni location estimates with known scale or self-normalization.

use crate::error::{Error, Result};
use crate::influence::InfluenceSpec;
use crate::root::{plateau_midpoint, RootMethod};
use crate::specialfn::std_normal_quantile;

/// A nonempty sample of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("sample is empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample value {i} is not finite")));
        }
        Ok(Sample { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Standard deviation with denominator `n - 1` (0 when `n = 1`).
    pub fn sample_sd(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        let ss: f64 = self.values.iter().map(|v| (v - m) * (v - m)).sum();
        (ss / (n - 1) as f64).sqrt()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Sample> {
        Sample::new(self.values.iter().map(|&v| f(v)).collect())
    }
}

impl TryFrom<Vec<f64>> for Sample {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Sample::new(v)
    }
}

/// Default tuning `a_n = n^{-1/2}`.
pub fn default_a_n(n: usize) -> f64 {
    1.0 / (n as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct MeanConfig {
    /// Explicit `alpha`; overrides `a_n` for the known-scale solver.
    pub alpha: Option<f64>,
    /// Tuning `a_n`; `None` means `n^{-1/2}`.
    pub a_n: Option<f64>,
    /// Known scale `sigma`; `alpha = a_n / sigma` when `alpha` is absent.
    pub sigma: Option<f64>,
    pub phi: InfluenceSpec,
    pub tol: f64,
    pub max_iter: usize,
    pub method: RootMethod,
}

impl MeanConfig {
    pub fn with_alpha(alpha: f64, phi: InfluenceSpec, tol: f64) -> Self {
        MeanConfig { alpha: Some(alpha), a_n: None, sigma: None, phi, tol, max_iter: 1000, method: RootMethod::Bisection }
    }

    pub fn with_scale(sigma: f64, a_n: Option<f64>, phi: InfluenceSpec, tol: f64) -> Self {
        MeanConfig { alpha: None, a_n, sigma: Some(sigma), phi, tol, max_iter: 1000, method: RootMethod::Bisection }
    }

    pub fn self_normalized(a_n: Option<f64>, phi: InfluenceSpec, tol: f64) -> Self {
        MeanConfig { alpha: None, a_n, sigma: None, phi, tol, max_iter: 1000, method: RootMethod::Bisection }
    }

    fn check(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::invalid("tol must be a positive finite number"));
        }
        for (name, v) in [("alpha", self.alpha), ("a_n", self.a_n), ("sigma", self.sigma)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::invalid(format!("{name} must be positive and finite")));
                }
            }
        }
        self.phi.ensure_usable()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    KnownScale,
    SelfNormalized,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::KnownScale => "known-scale",
            Variant::SelfNormalized => "self-normalized",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanEstimate {
    pub theta_hat: f64,
    pub bracket: (f64, f64),
    /// Estimated extent of the set where `|g| <= n alpha tol`.
    pub plateau: (f64, f64),
    pub iterations: usize,
    pub g_residual: f64,
    /// Scale used for intervals; 0 when unknown.
    pub sigma_used: f64,
    pub alpha: f64,
    pub variant: Variant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub bias_allowance: f64,
}

/// `sum_i phi(alpha (x_i - theta))`.
pub fn catoni_g(sample: &Sample, alpha: f64, phi: &InfluenceSpec, theta: f64) -> f64 {
    g_raw(sample.values(), alpha, phi, theta)
}

#[inline]
fn g_raw(values: &[f64], alpha: f64, phi: &InfluenceSpec, theta: f64) -> f64 {
    values.iter().map(|&x| phi.phi(alpha * (x - theta))).sum()
}

fn solve_with_alpha(
    sample: &Sample,
    alpha: f64,
    config: &MeanConfig,
    sigma_used: f64,
    variant: Variant,
) -> Result<MeanEstimate> {
    let n = sample.len() as f64;
    let tol = config.tol;
    let eps = n * alpha * tol;
    let values = sample.values();
    let phi = &config.phi;
    let r = plateau_midpoint(
        |t| g_raw(values, alpha, phi, t),
        sample.min() - tol,
        sample.max() + tol,
        tol,
        eps,
        config.max_iter,
        config.method,
    )?;
    Ok(MeanEstimate {
        theta_hat: r.theta,
        bracket: r.bracket,
        plateau: r.plateau,
        iterations: r.iterations,
        g_residual: r.residual,
        sigma_used,
        alpha,
        variant,
    })
}

/// Solve `sum phi(alpha (X_i - theta)) = 0` with `alpha` explicit or `a_n / sigma`.
pub fn solve_mean(sample: &Sample, config: &MeanConfig) -> Result<MeanEstimate> {
    config.check()?;
    let alpha = match (config.alpha, config.sigma) {
        (Some(a), _) => a,
        (None, Some(s)) => config.a_n.unwrap_or_else(|| default_a_n(sample.len())) / s,
        (None, None) => {
            return Err(Error::invalid("known-scale solve needs alpha or sigma"));
        }
    };
    solve_with_alpha(sample, alpha, config, config.sigma.unwrap_or(0.0), Variant::KnownScale)
}

/// Self-normalized solve with `alpha = a_n / sigma_hat`.
pub fn solve_self_normalized(sample: &Sample, config: &MeanConfig) -> Result<MeanEstimate> {
    config.check()?;
    if config.alpha.is_some() {
        return Err(Error::invalid("the self-normalized solver derives alpha from the sample; do not pass alpha"));
    }
    if sample.len() < 2 {
        return Err(Error::invalid("self-normalized solve needs n >= 2"));
    }
    let sd = sample.sample_sd();
    if !(sd > 0.0) {
        return Err(Error::DegenerateSample(
            "sample standard deviation is zero (sigma_hat = 0); the sample mean is the natural fallback".into(),
        ));
    }
    let a_n = config.a_n.unwrap_or_else(|| default_a_n(sample.len()));
    solve_with_alpha(sample, a_n / sd, config, sd, Variant::SelfNormalized)
}

/// `alpha sigma^2 / sqrt(1 - alpha^2 sigma^2)`, the allowance for `|u_n - u|`.
pub fn bias_bound(alpha: f64, sigma: f64) -> Result<f64> {
    if !(alpha > 0.0) || !(sigma > 0.0) || !alpha.is_finite() || !sigma.is_finite() {
        return Err(Error::invalid("alpha and sigma must be positive and finite"));
    }
    let s = alpha * sigma;
    if s >= 1.0 {
        return Err(Error::domain(format!("alpha * sigma = {s} >= 1: the bias bound is vacuous")));
    }
    Ok(alpha * sigma * sigma / (1.0 - s * s).sqrt())
}

/// Normal-approximation interval `theta_hat ± z sigma / sqrt(n)`, optionally
/// widened on both sides by `bias_bound(alpha, sigma_used)`.
pub fn build_ci(est: &MeanEstimate, n: usize, level: f64, include_bias: bool, alpha: f64) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level must lie in (0, 1)"));
    }
    if !(est.sigma_used > 0.0) {
        return Err(Error::invalid("interval needs a positive scale (sigma_used)"));
    }
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let z = std_normal_quantile(0.5 * (1.0 + level))?;
    let half = z * est.sigma_used / (n as f64).sqrt();
    let bias = if include_bias { bias_bound(alpha, est.sigma_used)? } else { 0.0 };
    Ok(ConfidenceInterval {
        lo: est.theta_hat - half - bias,
        hi: est.theta_hat + half + bias,
        level,
        bias_allowance: bias,
    })
}
