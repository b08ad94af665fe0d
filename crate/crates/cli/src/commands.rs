use std::fmt;

use catoni_core::influence::{validate_envelope, CustomPhi, InfluenceSpec};
use catoni_core::mean::{build_ci, solve_mean, solve_self_normalized, MeanConfig, Sample};
use catoni_core::regression::{
    feasibility, gram_stats, residual_variance, solve_regression, AlphaRule, RegressionConfig, RegressionProblem,
    SigmaBarSource,
};
use catoni_core::Error as CoreError;
use catoni_harness::report::fmt_num;
use catoni_harness::{run_with_threads, ExperimentConfig, HarnessError};
use nalgebra::{DMatrix, DVector};

use crate::data::CsvDataset;
use crate::exit::CliError;
use crate::{EstimateArgs, RegressArgs, SimulateArgs, ValidatePhiArgs};

const DEFAULT_EPSILON: f64 = 0.1;

/// Ordered `key: value` lines.
#[derive(Debug, Default)]
pub struct Report(Vec<(String, String)>);

impl Report {
    fn num(&mut self, k: impl Into<String>, v: f64) -> &mut Self {
        self.0.push((k.into(), fmt_num(v)));
        self
    }

    fn text(&mut self, k: impl Into<String>, v: impl fmt::Display) -> &mut Self {
        self.0.push((k.into(), v.to_string()));
        self
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.0 {
            writeln!(f, "{k}: {v}")?;
        }
        Ok(())
    }
}

pub struct Failure {
    pub partial: Report,
    pub error: CliError,
}

impl From<CliError> for Failure {
    fn from(error: CliError) -> Self {
        Failure { partial: Report::default(), error }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        CliError::from(e).into()
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        CliError::from(e).into()
    }
}

type Outcome = Result<Report, Failure>;

fn positive(name: &str, v: Option<f64>) -> Result<(), CliError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(CliError::Flags(format!("--{name} must be positive and finite, got {x}"))),
        _ => Ok(()),
    }
}

/// Resolves `--phi`. A custom table that cannot be read is an input error;
/// one that leaves the envelope is a validation failure.
fn load_phi(name: &str) -> Result<InfluenceSpec, CliError> {
    match name.strip_prefix("custom:") {
        Some(path) => {
            let table = CustomPhi::from_table_file(path).map_err(|e| CliError::Input(e.to_string()))?;
            InfluenceSpec::custom(name, table).map_err(|e| CliError::Validation(e.to_string()))
        }
        None => InfluenceSpec::from_name(name).map_err(|e| CliError::Flags(e.to_string())),
    }
}

pub fn estimate(a: &EstimateArgs) -> Outcome {
    if a.self_normalized && a.alpha.is_some() {
        return Err(CliError::Flags("--alpha cannot be combined with --self-normalized".into()).into());
    }
    if a.self_normalized && a.sigma.is_some() {
        return Err(CliError::Flags("--sigma cannot be combined with --self-normalized".into()).into());
    }
    if a.alpha.is_some() && a.a_n.is_some() {
        return Err(CliError::Flags("give either --alpha or --a-n, not both".into()).into());
    }
    if a.alpha.is_none() && !a.self_normalized && a.sigma.is_none() {
        return Err(CliError::Flags("choose --alpha, --sigma (alpha = a_n / sigma) or --self-normalized".into()).into());
    }
    positive("alpha", a.alpha)?;
    positive("a-n", a.a_n)?;
    positive("sigma", a.sigma)?;
    positive("tol", Some(a.tol))?;
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(CliError::Flags(format!("--level must lie in (0, 1), got {}", a.level)).into());
    }
    let phi = load_phi(&a.phi)?;
    let data = CsvDataset::read(&a.input)?;
    let sample = Sample::new(data.column(&a.column)?).map_err(|e| CliError::Input(e.to_string()))?;
    let n = sample.len();

    let est = if a.self_normalized {
        solve_self_normalized(&sample, &MeanConfig::self_normalized(a.a_n, phi.clone(), a.tol))?
    } else {
        let mut cfg = MeanConfig::with_scale(a.sigma.unwrap_or(1.0), a.a_n, phi.clone(), a.tol);
        cfg.alpha = a.alpha;
        cfg.sigma = a.sigma;
        solve_mean(&sample, &cfg)?
    };

    let mut r = Report::default();
    r.num("theta_hat", est.theta_hat)
        .text("variant", est.variant.as_str())
        .text("phi", &phi.name)
        .text("n", n)
        .num("alpha", est.alpha);
    if est.sigma_used > 0.0 {
        r.num("sigma_used", est.sigma_used);
        let ci = build_ci(&est, n, a.level, a.bias_corrected, est.alpha)?;
        r.num("level", ci.level).num("ci_lo", ci.lo).num("ci_hi", ci.hi).num("bias_allowance", ci.bias_allowance);
    } else {
        r.text("sigma_used", "none").text("ci", "unavailable (pass --sigma or --self-normalized)");
    }
    r.text("iterations", est.iterations)
        .num("bracket_lo", est.bracket.0)
        .num("bracket_hi", est.bracket.1)
        .num("plateau_lo", est.plateau.0)
        .num("plateau_hi", est.plateau.1)
        .num("g_residual", est.g_residual)
        .num("tol", a.tol);
    Ok(r)
}

pub fn regress(a: &RegressArgs) -> Outcome {
    if a.alpha.is_some() && a.epsilon.is_some() {
        return Err(CliError::Flags("give either --alpha or --epsilon, not both".into()).into());
    }
    positive("alpha", a.alpha)?;
    positive("sigma-bar-sq", a.sigma_bar_sq)?;
    positive("tol", Some(a.tol))?;
    if let Some(e) = a.epsilon {
        if !(e > 0.0 && e < 1.0) {
            return Err(CliError::Flags(format!("--epsilon must lie in (0, 1), got {e}")).into());
        }
    }
    let phi = load_phi(&a.phi)?;
    if !phi.has_derivative() {
        return Err(CliError::Flags(format!("influence '{}' has no derivative; regression needs wide or narrow", phi.name)).into());
    }
    let data = CsvDataset::read(&a.input)?;
    let y = data.column(&a.response)?;
    data.index(&a.response)?;
    let features: Vec<String> = match &a.features {
        Some(f) => f.iter().map(|s| s.trim().to_string()).collect(),
        None => data.headers.iter().filter(|h| **h != a.response).cloned().collect(),
    };
    if features.iter().any(|f| *f == a.response) {
        return Err(CliError::Flags("the response cannot also be a feature".into()).into());
    }
    let mut names: Vec<String> = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    if a.intercept {
        names.push("(intercept)".into());
        cols.push(vec![1.0; data.rows()]);
    }
    for f in &features {
        cols.push(data.column(f)?);
        names.push(f.clone());
    }
    if cols.is_empty() {
        return Err(CliError::Flags("no feature columns".into()).into());
    }
    let n = data.rows();
    let x = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let problem = RegressionProblem::new(x, DVector::from_vec(y))?;
    let gram = gram_stats(&problem.x)?;

    let sigma_source = match a.sigma_bar_sq {
        Some(v) => SigmaBarSource::Known(v),
        None => SigmaBarSource::ResidualEstimated,
    };
    let epsilon = a.epsilon.unwrap_or(DEFAULT_EPSILON);
    let rule = match a.alpha {
        Some(v) => AlphaRule::Explicit(v),
        None => AlphaRule::Auto { epsilon, sigma_bar_sq: sigma_source },
    };
    let mut cfg = RegressionConfig::new(rule, phi.clone());
    cfg.tol = a.tol;

    let mut r = Report::default();
    r.text("n", n).text("p", names.len()).text("phi", &phi.name);
    r.num("lambda_min", gram.lambda_min).num("lambda_max", gram.lambda_max).num("l_n", gram.l_n);
    let fit = match solve_regression(&problem, &cfg) {
        Ok(f) => f,
        Err(e) => return Err(Failure { partial: r, error: e.into() }),
    };
    for (name, b) in names.iter().zip(fit.beta_hat.iter()) {
        r.num(format!("beta_hat[{name}]"), *b);
    }
    r.num("h_norm", fit.h_norm).text("iterations", fit.iterations).text("converged", fit.converged);
    r.text("fallback_steps", fit.fallback_steps);
    r.num("alpha", fit.alpha_used);
    let (s2, src) = match fit.sigma_bar_sq {
        Some((v, src)) => {
            r.text("alpha_source", format!("auto (epsilon = {})", fmt_num(epsilon)));
            (v, src)
        }
        None => {
            r.text("alpha_source", "explicit");
            match a.sigma_bar_sq {
                Some(v) => (v, "known"),
                None => (residual_variance(&problem)?, "residual-estimated"),
            }
        }
    };
    r.num("sigma_bar_sq", s2).text("sigma_bar_sq_source", src);
    let f = feasibility(&gram, s2, fit.alpha_used, epsilon, n)?;
    r.num("epsilon", f.epsilon).num("delta_sq", f.delta_sq).text("feasible", f.feasible);
    match f.beta_0 {
        Some(b0) => r.num("beta_0", b0),
        None => r.text("beta_0", "none").text("infeasibility_cause", f.dominant_term()),
    };
    r.text("sample_size_ok", f.sample_size_ok);
    Ok(r)
}

pub fn simulate(a: &SimulateArgs) -> Outcome {
    let cfg = ExperimentConfig::from_path(&a.config)?;
    let table = run_with_threads(&cfg, a.threads)?;
    table.write_to(&a.out)?;
    let flagged = table
        .col("status")
        .map(|c| table.rows.iter().filter(|row| row[c].as_str() != Some("ok")).count())
        .unwrap_or(0);
    let mut r = Report::default();
    r.text("kind", table.kind)
        .text("rows", table.rows.len())
        .text("flagged_rows", flagged)
        .text("config_sha256", &table.provenance.config_digest)
        .text("report", a.out.join("report.csv").display())
        .text("provenance", a.out.join("provenance.jsonl").display());
    Ok(r)
}

pub fn validate_phi(a: &ValidatePhiArgs) -> Outcome {
    let phi = match a.phi.strip_prefix("custom:") {
        Some(path) => {
            let table = CustomPhi::from_table_file(path).map_err(|e| CliError::Input(e.to_string()))?;
            InfluenceSpec::custom_unchecked(&a.phi, table)
        }
        None => InfluenceSpec::from_name(&a.phi).map_err(|e| CliError::Flags(e.to_string()))?,
    };
    let rep = validate_envelope(&phi, a.lo, a.hi, a.step)?;
    let mut r = Report::default();
    r.text("phi", &phi.name)
        .num("lo", a.lo)
        .num("hi", a.hi)
        .num("step", a.step)
        .text("passed", rep.passed);
    match rep.first_violation_x {
        Some(x) => r.num("first_violation_x", x),
        None => r.text("first_violation_x", "none"),
    };
    r.num("max_envelope_slack", rep.max_envelope_slack)
        .text("monotonicity_ok", rep.monotonicity_ok)
        .num("slope_at_zero", rep.slope_at_zero);
    if rep.passed {
        Ok(r)
    } else {
        let msg = format!("'{}' leaves the envelope", phi.name);
        Err(Failure { partial: r, error: CliError::Validation(msg) })
    }
}
