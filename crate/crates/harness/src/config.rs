//! Experiment configuration: one experiment per flat TOML file.
//!
//! ```toml
//! kind = "be_mean"
//! model = "gamma:k=2,theta=1,centered"
//! n_list = [250, 1000, 4000]
//! reps = 20000
//! a_n_c = 1.0
//! phi = "wide"
//! seed = 7
//! ```

use std::path::Path;
use std::str::FromStr;

use catoni_core::dist::NoiseModel;
use catoni_core::influence::InfluenceSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    BeMean,
    BeSelf,
    MdMean,
    MdSelf,
    Coverage,
    RegressionBound,
    RegressionMdbe,
    TailBounds,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::BeMean => "be_mean",
            Kind::BeSelf => "be_self",
            Kind::MdMean => "md_mean",
            Kind::MdSelf => "md_self",
            Kind::Coverage => "coverage",
            Kind::RegressionBound => "regression_bound",
            Kind::RegressionMdbe => "regression_mdbe",
            Kind::TailBounds => "tail_bounds",
        }
    }

    /// Stable word mixed into every replicate stream.
    pub(crate) fn code(self) -> u64 {
        self as u64 + 1
    }

    fn is_regression(self) -> bool {
        matches!(self, Kind::RegressionBound | Kind::RegressionMdbe)
    }
}

/// Row generator for regression designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowGenerator {
    /// Uniform on the unit sphere, then scaled coordinatewise by `design_scales`.
    Sphere,
    /// I.i.d. standard normal entries.
    Gaussian,
    /// First column ones, the rest standard normal.
    InterceptGaussian,
    /// A single column of ones (`p = 1`).
    Ones,
}

/// File schema. Every key is optional except `kind`, `model`, `n_list`, `reps` and `seed`;
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub kind: Kind,
    pub model: String,
    pub n_list: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    /// `a_n = a_n_c * n^{-1/2}`; mutually exclusive with `a_n_list`.
    pub a_n_c: Option<f64>,
    /// One `a_n` per entry of `n_list`.
    pub a_n_list: Option<Vec<f64>>,
    #[serde(default = "default_phi")]
    pub phi: String,
    #[serde(default)]
    pub z_grid: Vec<f64>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Solver tolerance on the standardized statistic scale: `tol = stat_tol * sigma / sqrt(n)`.
    #[serde(default = "default_stat_tol")]
    pub stat_tol: f64,
    #[serde(default = "default_delta_list")]
    pub delta_list: Vec<f64>,
    pub design_rows: Option<RowGenerator>,
    pub design_p: Option<usize>,
    pub design_scales: Option<Vec<f64>>,
    pub beta_star: Option<Vec<f64>>,
    pub design_seed: Option<u64>,
}

fn default_phi() -> String {
    "wide".into()
}
fn default_level() -> f64 {
    0.95
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_stat_tol() -> f64 {
    1e-9
}
fn default_delta_list() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ANRule {
    Scaled(f64),
    Explicit,
}

#[derive(Debug, Clone)]
pub struct Design {
    pub rows: RowGenerator,
    pub p: usize,
    pub scales: Vec<f64>,
    pub beta_star: Vec<f64>,
    pub seed: u64,
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub model: NoiseModel,
    pub n_list: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    a_n_rule: ANRule,
    a_n_list: Vec<f64>,
    pub phi: InfluenceSpec,
    pub z_grid: Vec<f64>,
    pub level: f64,
    pub epsilon: f64,
    pub stat_tol: f64,
    pub delta_list: Vec<f64>,
    pub design: Option<Design>,
    raw: RawConfig,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config { key: key.to_string(), message: msg.to_string() }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(s).map_err(|e| {
            let msg = e.message().to_string();
            let key = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "<file>".to_string());
            HarnessError::Config { key, message: msg }
        })?;
        Self::from_raw(raw)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        let model = NoiseModel::from_str(&raw.model).map_err(|e| bad("model", e))?;
        let phi = InfluenceSpec::from_name(&raw.phi).map_err(|e| bad("phi", e))?;
        if raw.reps < 100 {
            return Err(bad("reps", format!("must be at least 100, got {}", raw.reps)));
        }
        if raw.n_list.is_empty() {
            return Err(bad("n_list", "must not be empty"));
        }
        if let Some(n) = raw.n_list.iter().find(|&&n| n < 4) {
            return Err(bad("n_list", format!("every n must be at least 4, got {n}")));
        }
        if raw.z_grid.windows(2).any(|w| !(w[0] < w[1])) || raw.z_grid.iter().any(|z| !z.is_finite()) {
            return Err(bad("z_grid", "must be finite and strictly ascending"));
        }
        if !(raw.level > 0.0 && raw.level < 1.0) {
            return Err(bad("level", "must lie in (0, 1)"));
        }
        if !(raw.epsilon > 0.0 && raw.epsilon < 1.0) {
            return Err(bad("epsilon", "must lie in (0, 1)"));
        }
        if !(raw.stat_tol > 0.0 && raw.stat_tol.is_finite()) {
            return Err(bad("stat_tol", "must be positive"));
        }
        if raw.delta_list.is_empty() || raw.delta_list.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
            return Err(bad("delta_list", "entries must lie in (0, 1]"));
        }
        let (a_n_rule, a_n_list) = match (raw.a_n_c, &raw.a_n_list) {
            (Some(_), Some(_)) => return Err(bad("a_n_list", "give either a_n_c or a_n_list, not both")),
            (Some(c), None) => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(bad("a_n_c", "must be positive"));
                }
                (ANRule::Scaled(c), raw.n_list.iter().map(|&n| c / (n as f64).sqrt()).collect())
            }
            (None, Some(list)) => {
                if list.len() != raw.n_list.len() {
                    return Err(bad("a_n_list", "must have one entry per n_list entry"));
                }
                if list.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                    return Err(bad("a_n_list", "entries must be positive"));
                }
                (ANRule::Explicit, list.clone())
            }
            (None, None) => (ANRule::Scaled(1.0), raw.n_list.iter().map(|&n| 1.0 / (n as f64).sqrt()).collect()),
        };
        if matches!(raw.kind, Kind::MdMean | Kind::MdSelf) && raw.z_grid.is_empty() {
            return Err(bad("z_grid", "moderate-deviation runs need a z grid"));
        }
        if raw.kind == Kind::MdMean && !model.sqrt_exp_moment_finite() {
            return Err(bad("model", format!("md_mean needs E exp(t sqrt|X|) < inf; {model} does not have it")));
        }
        if matches!(raw.kind, Kind::MdSelf | Kind::TailBounds) {
            for &d in &raw.delta_list {
                if catoni_core::dist::abs_central_moment(&model, 2.0 + d).is_infinite() {
                    return Err(bad("delta_list", format!("E|X|^(2+{d}) is infinite for {model}")));
                }
            }
        }
        let design = if raw.kind.is_regression() { Some(Self::design(&raw)?) } else { None };
        if raw.kind.is_regression() && !phi.has_derivative() {
            return Err(bad("phi", "regression needs a differentiable influence function"));
        }
        Ok(ExperimentConfig {
            kind: raw.kind,
            model,
            n_list: raw.n_list.clone(),
            reps: raw.reps,
            seed: raw.seed,
            a_n_rule,
            a_n_list,
            phi,
            z_grid: raw.z_grid.clone(),
            level: raw.level,
            epsilon: raw.epsilon,
            stat_tol: raw.stat_tol,
            delta_list: raw.delta_list.clone(),
            design,
            raw,
        })
    }

    fn design(raw: &RawConfig) -> Result<Design> {
        let rows = raw.design_rows.ok_or_else(|| bad("design_rows", "required for regression kinds"))?;
        let p = raw.design_p.ok_or_else(|| bad("design_p", "required for regression kinds"))?;
        if p == 0 || p > catoni_core::linalg::MAX_JACOBI_DIM {
            return Err(bad("design_p", format!("must lie in 1..={}", catoni_core::linalg::MAX_JACOBI_DIM)));
        }
        if rows == RowGenerator::Ones && p != 1 {
            return Err(bad("design_p", "the ones design has p = 1"));
        }
        let scales = raw.design_scales.clone().unwrap_or_else(|| vec![1.0; p]);
        if scales.len() != p || scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(bad("design_scales", "needs p positive entries"));
        }
        let beta_star = raw.beta_star.clone().unwrap_or_else(|| vec![1.0; p]);
        if beta_star.len() != p || beta_star.iter().any(|b| !b.is_finite()) {
            return Err(bad("beta_star", "needs p finite entries"));
        }
        if let Some(&n) = raw.n_list.iter().find(|&&n| n <= p) {
            return Err(bad("n_list", format!("n = {n} must exceed design_p = {p}")));
        }
        Ok(Design { rows, p, scales, beta_star, seed: raw.design_seed.unwrap_or(raw.seed) })
    }

    /// `a_n` for the `i`-th entry of `n_list`.
    pub fn a_n(&self, i: usize) -> f64 {
        self.a_n_list[i]
    }

    pub fn a_n_rule(&self) -> ANRule {
        self.a_n_rule
    }

    pub fn raw(&self) -> &RawConfig {
        &self.raw
    }

    /// SHA-256 of the canonical JSON rendering of the parsed configuration.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(&self.raw).expect("config serializes");
        let d = Sha256::digest(canonical.as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }
}
