//! Catoni-type linear regression.
//!
//! The estimate solves `h(beta) = (1/(n alpha)) sum_i x_i phi(alpha (y_i - x_i' beta)) = 0`
//! by damped Newton iteration started from least squares. Gram diagnostics,
//! the high-probability radius `beta_0` and the standardized statistic used
//! for normal approximation checks live here too.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::influence::InfluenceSpec;
use crate::linalg::{jacobi_eigen, lu_solve, spd_solve, sym_sqrt};

/// Gram matrices with `lambda_min` at or below this are treated as singular.
pub const SINGULAR_GRAM: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    /// `n x p`, row `i` is `x_i'`.
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl RegressionProblem {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if p == 0 || n < p {
            return Err(Error::invalid(format!("need n >= p >= 1, got n = {n}, p = {p}")));
        }
        if y.len() != n {
            return Err(Error::invalid(format!("response has {} entries for {n} rows", y.len())));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("design and response must be finite"));
        }
        Ok(RegressionProblem { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramStats {
    pub s_n: DMatrix<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `max_i ||x_i||_2`.
    pub l_n: f64,
}

pub fn gram_stats(x: &DMatrix<f64>) -> Result<GramStats> {
    let n = x.nrows();
    if n == 0 || x.ncols() == 0 {
        return Err(Error::invalid("empty design"));
    }
    let s = x.tr_mul(x) / n as f64;
    let s_n = (&s + s.transpose()) * 0.5;
    let e = jacobi_eigen(&s_n)?;
    let l_n = x.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
    Ok(GramStats { lambda_min: e.values[0].max(0.0), lambda_max: e.values[e.values.len() - 1], s_n, l_n })
}

/// `h(beta)`.
pub fn h_value(problem: &RegressionProblem, beta: &DVector<f64>, alpha: f64, phi: &InfluenceSpec) -> DVector<f64> {
    let r = &problem.y - &problem.x * beta;
    let w = r.map(|ri| phi.phi(alpha * ri));
    problem.x.tr_mul(&w) / (problem.n() as f64 * alpha)
}

fn jacobian(problem: &RegressionProblem, beta: &DVector<f64>, alpha: f64, phi: &InfluenceSpec) -> DMatrix<f64> {
    let r = &problem.y - &problem.x * beta;
    let mut wx = problem.x.clone();
    for (i, mut row) in wx.row_iter_mut().enumerate() {
        row *= phi.dphi(alpha * r[i]).unwrap_or(0.0);
    }
    -(problem.x.tr_mul(&wx)) / problem.n() as f64
}

/// Least squares via the normal equations.
pub fn ols(problem: &RegressionProblem) -> Result<DVector<f64>> {
    let s = problem.x.tr_mul(&problem.x);
    let b = problem.x.tr_mul(&problem.y);
    spd_solve(&s, &b).ok_or_else(|| Error::SingularGram { lambda_min: 0.0 })
}

/// Mean squared least-squares residual with denominator `n - p`.
pub fn residual_variance(problem: &RegressionProblem) -> Result<f64> {
    let (n, p) = (problem.n(), problem.p());
    if n <= p {
        return Err(Error::invalid("residual variance needs n > p"));
    }
    let b = ols(problem)?;
    let r = &problem.y - &problem.x * b;
    Ok(r.norm_squared() / (n - p) as f64)
}

/// `alpha = sqrt(2 log(1/epsilon) / (n sigma_bar^2))`.
pub fn default_alpha(n: usize, sigma_bar_sq: f64, epsilon: f64) -> f64 {
    (2.0 * (1.0 / epsilon).ln() / (n as f64 * sigma_bar_sq)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaBarSource {
    Known(f64),
    /// Least-squares residual variance, denominator `n - p`.
    ResidualEstimated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaRule {
    Explicit(f64),
    Auto { epsilon: f64, sigma_bar_sq: SigmaBarSource },
}

#[derive(Debug, Clone)]
pub struct RegressionConfig {
    pub alpha: AlphaRule,
    pub phi: InfluenceSpec,
    /// Target on `||h||_2`.
    pub tol: f64,
    pub max_iter: usize,
    pub damping: bool,
    pub min_step: f64,
}

impl RegressionConfig {
    pub fn new(alpha: AlphaRule, phi: InfluenceSpec) -> Self {
        RegressionConfig { alpha, phi, tol: 1e-10, max_iter: 100, damping: true, min_step: 2f64.powi(-20) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub beta_hat: DVector<f64>,
    pub iterations: usize,
    pub h_norm: f64,
    pub converged: bool,
    pub alpha_used: f64,
    /// `(value, "known" | "residual-estimated")` when `alpha` was tuned automatically.
    pub sigma_bar_sq: Option<(f64, &'static str)>,
    pub gram: GramStats,
    /// Newton steps that fell back to `-S_n` as the Jacobian.
    pub fallback_steps: usize,
}

/// Resolve `alpha`, returning the sigma-bar provenance when tuned automatically.
pub fn resolve_alpha(problem: &RegressionProblem, rule: AlphaRule) -> Result<(f64, Option<(f64, &'static str)>)> {
    match rule {
        AlphaRule::Explicit(a) => {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::invalid("alpha must be positive and finite"));
            }
            Ok((a, None))
        }
        AlphaRule::Auto { epsilon, sigma_bar_sq } => {
            if !(epsilon > 0.0 && epsilon < 1.0) {
                return Err(Error::invalid("epsilon must lie in (0, 1)"));
            }
            let (s2, src) = match sigma_bar_sq {
                SigmaBarSource::Known(v) => (v, "known"),
                SigmaBarSource::ResidualEstimated => (residual_variance(problem)?, "residual-estimated"),
            };
            if !(s2 > 0.0) || !s2.is_finite() {
                return Err(Error::DegenerateSample(format!("sigma_bar^2 = {s2} is not positive")));
            }
            Ok((default_alpha(problem.n(), s2, epsilon), Some((s2, src))))
        }
    }
}

pub fn solve_regression(problem: &RegressionProblem, config: &RegressionConfig) -> Result<RegressionFit> {
    let phi = &config.phi;
    phi.ensure_usable()?;
    if !phi.has_derivative() {
        return Err(Error::Unsupported(format!("influence '{}' has no derivative; regression needs one", phi.name)));
    }
    if !phi.k0.is_finite() || !phi.k1.is_finite() {
        return Err(Error::Unsupported("influence needs finite K0 and K1".into()));
    }
    if !(config.tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    let gram = gram_stats(&problem.x)?;
    if gram.lambda_min <= SINGULAR_GRAM {
        return Err(Error::SingularGram { lambda_min: gram.lambda_min });
    }
    let (alpha, sigma_bar_sq) = resolve_alpha(problem, config.alpha)?;
    let neg_s = -gram.s_n.clone();

    let mut beta = ols(problem)?;
    let mut h = h_value(problem, &beta, alpha, phi);
    let mut h_norm = h.norm();
    let mut iterations = 0;
    let mut fallback_steps = 0;
    while h_norm > config.tol && iterations < config.max_iter {
        iterations += 1;
        let j = jacobian(problem, &beta, alpha, phi);
        let mut accepted = false;
        for use_gram in [false, true] {
            let jm = if use_gram { &neg_s } else { &j };
            let Some(dir) = lu_solve(jm, &h) else { continue };
            let mut s = 1.0;
            loop {
                let cand = &beta - &dir * s;
                let hc = h_value(problem, &cand, alpha, phi);
                let nc = hc.norm();
                if nc < h_norm || (!config.damping && nc.is_finite()) {
                    beta = cand;
                    h = hc;
                    h_norm = nc;
                    accepted = true;
                    break;
                }
                s *= 0.5;
                if !config.damping || s < config.min_step {
                    break;
                }
            }
            if accepted {
                if use_gram {
                    fallback_steps += 1;
                }
                break;
            }
        }
        if !accepted {
            return Err(Error::Stalled { iterations, h_norm });
        }
    }
    let converged = h_norm <= config.tol;
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            lo: h_norm,
            hi: h_norm,
            reason: format!("||h|| = {h_norm:e} above tol after {iterations} Newton steps"),
        });
    }
    Ok(RegressionFit { beta_hat: beta, iterations, h_norm, converged, alpha_used: alpha, sigma_bar_sq, gram, fallback_steps })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub delta_sq: f64,
    pub beta_0: Option<f64>,
    pub feasible: bool,
    pub epsilon: f64,
    pub sigma_bar_sq: f64,
    /// `alpha^2 c_u sigma_bar^2` and `2 c_u log(1/epsilon) / n`, before the `L^2/c_l^2` factor.
    pub alpha_term: f64,
    pub log_term: f64,
    /// `n >= 4 c_u L^2 log(1/epsilon) / c_l^2`.
    pub sample_size_ok: bool,
}

impl FeasibilityReport {
    /// Which of the two terms dominates `1 - delta_sq`.
    pub fn dominant_term(&self) -> &'static str {
        if self.alpha_term >= self.log_term {
            "alpha^2 c_u sigma_bar^2"
        } else {
            "2 c_u log(1/epsilon)/n"
        }
    }
}

/// Radius check with `c_l = lambda_min(S_n)` and `c_u = lambda_max(S_n)`.
pub fn feasibility(gram: &GramStats, sigma_bar_sq: f64, alpha: f64, epsilon: f64, n: usize) -> Result<FeasibilityReport> {
    if !(gram.lambda_min > 0.0) {
        return Err(Error::SingularGram { lambda_min: gram.lambda_min });
    }
    if !(epsilon > 0.0 && epsilon < 1.0) || !(alpha > 0.0) || !(sigma_bar_sq >= 0.0) || n == 0 {
        return Err(Error::invalid("feasibility needs alpha > 0, sigma_bar^2 >= 0, epsilon in (0,1), n >= 1"));
    }
    let (c_l, c_u, l) = (gram.lambda_min, gram.lambda_max, gram.l_n);
    let log_e = (1.0 / epsilon).ln();
    let nf = n as f64;
    let alpha_term = alpha * alpha * c_u * sigma_bar_sq;
    let log_term = 2.0 * c_u * log_e / nf;
    let delta_sq = 1.0 - (l * l / (c_l * c_l)) * (alpha_term + log_term);
    let feasible = delta_sq >= 0.0;
    let beta_0 = feasible
        .then(|| (l / c_l) * (alpha * sigma_bar_sq + 2.0 * log_e / (nf * alpha)) / (1.0 + delta_sq.sqrt()));
    Ok(FeasibilityReport {
        delta_sq,
        beta_0,
        feasible,
        epsilon,
        sigma_bar_sq,
        alpha_term,
        log_term,
        sample_size_ok: nf >= 4.0 * c_u * l * l * log_e / (c_l * c_l),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedStat {
    pub t: DVector<f64>,
    pub delta_n: DVector<f64>,
    pub sigma_tilde: f64,
}

/// `T = sqrt(n) S_n^{1/2} (beta_hat - beta_star - delta_n) / sigma_tilde`.
pub fn standardize(
    beta_hat: &DVector<f64>,
    beta_star: &DVector<f64>,
    delta_n: &DVector<f64>,
    sigma_tilde: f64,
    s_n: &DMatrix<f64>,
    n: usize,
) -> Result<StandardizedStat> {
    if !(sigma_tilde > 0.0) {
        return Err(Error::invalid("sigma_tilde must be positive"));
    }
    let root = sym_sqrt(s_n)?;
    Ok(standardize_with_root(beta_hat, beta_star, delta_n, sigma_tilde, &root, n))
}

/// As [`standardize`] with a precomputed `S_n^{1/2}`.
pub fn standardize_with_root(
    beta_hat: &DVector<f64>,
    beta_star: &DVector<f64>,
    delta_n: &DVector<f64>,
    sigma_tilde: f64,
    s_n_root: &DMatrix<f64>,
    n: usize,
) -> StandardizedStat {
    let d = beta_hat - beta_star - delta_n;
    let t = s_n_root * d * ((n as f64).sqrt() / sigma_tilde);
    StandardizedStat { t, delta_n: delta_n.clone(), sigma_tilde }
}

/// `delta_n = S_n^{-1} (m / (n alpha)) sum_i x_i` for i.i.d. noise with `E phi(alpha eps) = m`.
pub fn delta_n_from_scalar(x: &DMatrix<f64>, m: f64, alpha: f64, s_n: &DMatrix<f64>) -> Result<DVector<f64>> {
    let e = jacobi_eigen(s_n)?;
    let scale = e.values.amax().max(f64::MIN_POSITIVE);
    if e.values[0] <= 1e-12 * scale {
        return Err(Error::domain("S_n is singular"));
    }
    let n = x.nrows() as f64;
    let col_sums = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum()));
    let rhs = col_sums * (m / (n * alpha));
    spd_solve(s_n, &rhs).ok_or_else(|| Error::domain("S_n is not positive definite"))
}
