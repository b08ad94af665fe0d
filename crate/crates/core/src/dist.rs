//! Centered noise models: exact moments, seeded sampling and quadrature
//! oracles for population quantities of the Catoni estimators.
//!
//! Every model has mean zero. Expectations `E g(X)` are computed by adaptive
//! Gauss–Kronrod quadrature in a per-model latent coordinate (normal score,
//! gamma variate, log-magnitude for algebraic tails) so that semi-infinite
//! ranges are integrated without truncation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use log::warn;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::influence::InfluenceSpec;
use crate::mean::{bias_bound, Sample};
use crate::quad::{integrate_lower_tail, integrate_points, integrate_upper_tail, QuadOptions, QuadResult};
use crate::rng::RngStream;
use crate::root::{plateau_midpoint, RootMethod};
use crate::specialfn::{normal_pdf, Probability};

/// Counter words reserved for each variate drawn by [`draw`].
pub const WORDS_PER_VARIATE: u64 = 1 << 16;

/// Orders `2 + delta` for `delta` in {0.25, 0.5, 1} reported by [`moments`].
pub const MOMENT_ORDERS: [f64; 3] = [2.25, 2.5, 3.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Gaussian { sigma: f64 },
    /// `scale * (G - shape)` with `G ~ Gamma(shape, 1)`.
    CenteredGamma { shape: f64, scale: f64 },
    StudentT { nu: f64 },
    /// `P - E P` with `P` Pareto of tail index `index` and minimum `scale`.
    CenteredPareto { index: f64, scale: f64 },
    /// `exp(mu + s Z) - exp(mu + s^2/2)`.
    CenteredLognormal { mu: f64, s: f64 },
    /// `high` with probability `p`, else `low`.
    TwoPoint { p: f64, high: f64, low: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match *self {
            NoiseModel::Gaussian { sigma } => pos("sigma", sigma),
            NoiseModel::CenteredGamma { shape, scale } => pos("k", shape).and(pos("theta", scale)),
            NoiseModel::StudentT { nu } => {
                pos("nu", nu)?;
                if nu <= 2.0 {
                    return Err(Error::invalid("t noise needs nu > 2 for a finite variance"));
                }
                Ok(())
            }
            NoiseModel::CenteredPareto { index, scale } => {
                pos("a", index)?;
                pos("xm", scale)?;
                if index <= 2.0 {
                    return Err(Error::invalid("pareto noise needs a > 2 for a finite variance"));
                }
                Ok(())
            }
            NoiseModel::CenteredLognormal { mu, s } => {
                if !mu.is_finite() {
                    return Err(Error::invalid("mu must be finite"));
                }
                pos("s", s)
            }
            NoiseModel::TwoPoint { p, high, low } => {
                if !(0.0..=1.0).contains(&p) || !high.is_finite() || !low.is_finite() {
                    return Err(Error::invalid("twopoint needs p in [0,1] and finite atoms"));
                }
                let mean = p * high + (1.0 - p) * low;
                if mean.abs() > 1e-14 * high.abs().max(low.abs()).max(1.0) {
                    return Err(Error::invalid(format!("twopoint mean is {mean}, not 0")));
                }
                Ok(())
            }
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            NoiseModel::Gaussian { .. } => "gauss",
            NoiseModel::CenteredGamma { .. } => "gamma",
            NoiseModel::StudentT { .. } => "t",
            NoiseModel::CenteredPareto { .. } => "pareto",
            NoiseModel::CenteredLognormal { .. } => "lognormal",
            NoiseModel::TwoPoint { .. } => "twopoint",
        }
    }

    /// Always 0: every model is centered.
    pub fn mean(&self) -> f64 {
        0.0
    }

    pub fn variance(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => sigma * sigma,
            NoiseModel::CenteredGamma { shape, scale } => shape * scale * scale,
            NoiseModel::StudentT { nu } => nu / (nu - 2.0),
            NoiseModel::CenteredPareto { index: a, scale } => scale * scale * a / ((a - 1.0) * (a - 1.0) * (a - 2.0)),
            NoiseModel::CenteredLognormal { mu, s } => (s * s).exp_m1() * (2.0 * mu + s * s).exp(),
            NoiseModel::TwoPoint { p, high, low } => p * high * high + (1.0 - p) * low * low,
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Whether the law is symmetric about its mean.
    pub fn is_symmetric(&self) -> bool {
        match *self {
            NoiseModel::Gaussian { .. } | NoiseModel::StudentT { .. } => true,
            NoiseModel::TwoPoint { p, high, low } => p == 0.5 && high == -low,
            _ => false,
        }
    }

    /// Whether `E exp(t0 sqrt|X|)` is finite for some `t0 > 0`.
    pub fn sqrt_exp_moment_finite(&self) -> bool {
        matches!(
            self,
            NoiseModel::Gaussian { .. } | NoiseModel::CenteredGamma { .. } | NoiseModel::TwoPoint { .. }
        )
    }

    fn pareto_mean(index: f64, scale: f64) -> f64 {
        index * scale / (index - 1.0)
    }

    fn lognormal_mean(mu: f64, s: f64) -> f64 {
        (mu + 0.5 * s * s).exp()
    }

    fn atoms(&self) -> Option<[(f64, f64); 2]> {
        match *self {
            NoiseModel::TwoPoint { p, high, low } => Some([(low, 1.0 - p), (high, p)]),
            _ => None,
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NoiseModel::Gaussian { sigma } => write!(f, "gauss:sigma={sigma}"),
            NoiseModel::CenteredGamma { shape, scale } => write!(f, "gamma:k={shape},theta={scale},centered"),
            NoiseModel::StudentT { nu } => write!(f, "t:nu={nu}"),
            NoiseModel::CenteredPareto { index, scale } => write!(f, "pareto:a={index},xm={scale},centered"),
            NoiseModel::CenteredLognormal { mu, s } => write!(f, "lognormal:mu={mu},s={s},centered"),
            NoiseModel::TwoPoint { p, high, low } => write!(f, "twopoint:p={p},high={high},low={low}"),
        }
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    /// Parses `family:key=value,...`, e.g. `gamma:k=2,theta=1,centered` or `t:nu=4`.
    /// Families with a nonzero natural mean require the `centered` token.
    fn from_str(s: &str) -> Result<Self> {
        let (family, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut keys: Vec<(String, f64)> = Vec::new();
        let mut centered = false;
        for tok in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            if tok == "centered" {
                centered = true;
                continue;
            }
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("model '{s}': expected key=value, got '{tok}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("model '{s}': value of '{}' is not a number", k.trim())))?;
            keys.push((k.trim().to_string(), v));
        }
        let allowed: &[&str] = match family.trim() {
            "gauss" | "gaussian" | "normal" => &["sigma"],
            "gamma" => &["k", "theta"],
            "t" => &["nu"],
            "pareto" => &["a", "xm"],
            "lognormal" => &["mu", "s"],
            "twopoint" => &["p", "high", "low"],
            other => return Err(Error::invalid(format!("unknown noise family '{other}'"))),
        };
        if let Some((k, _)) = keys.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::invalid(format!("model '{s}': unknown key '{k}'")));
        }
        let get = |k: &str, default: Option<f64>| -> Result<f64> {
            keys.iter()
                .rev()
                .find(|(kk, _)| kk == k)
                .map(|(_, v)| *v)
                .or(default)
                .ok_or_else(|| Error::invalid(format!("model '{s}': missing key '{k}'")))
        };
        let needs_centered = matches!(family.trim(), "gamma" | "pareto" | "lognormal");
        if needs_centered && !centered {
            return Err(Error::invalid(format!(
                "model '{s}': only centered {family} noise is supported; add ',centered'"
            )));
        }
        let model = match family.trim() {
            "gauss" | "gaussian" | "normal" => NoiseModel::Gaussian { sigma: get("sigma", Some(1.0))? },
            "gamma" => NoiseModel::CenteredGamma { shape: get("k", None)?, scale: get("theta", Some(1.0))? },
            "t" => NoiseModel::StudentT { nu: get("nu", None)? },
            "pareto" => NoiseModel::CenteredPareto { index: get("a", None)?, scale: get("xm", Some(1.0))? },
            "lognormal" => NoiseModel::CenteredLognormal { mu: get("mu", Some(0.0))?, s: get("s", Some(1.0))? },
            _ => NoiseModel::TwoPoint { p: get("p", None)?, high: get("high", None)?, low: get("low", None)? },
        };
        model.validate()?;
        Ok(model)
    }
}

// ---------------------------------------------------------------------------
// Sampling

#[inline]
fn gamma_variate(rng: &mut RngStream, shape: f64) -> f64 {
    if shape < 1.0 {
        let g = gamma_variate(rng, shape + 1.0);
        let u = rng.uniform();
        return g * u.powf(1.0 / shape);
    }
    // Marsaglia & Tsang (2000).
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let z = rng.standard_normal();
        let t = 1.0 + c * z;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = rng.uniform();
        let z2 = z * z;
        if u < 1.0 - 0.0331 * z2 * z2 || u.ln() < 0.5 * z2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// One variate from `rng`'s current position.
pub fn variate(model: &NoiseModel, rng: &mut RngStream) -> f64 {
    match *model {
        NoiseModel::Gaussian { sigma } => sigma * rng.standard_normal(),
        NoiseModel::CenteredGamma { shape, scale } => scale * (gamma_variate(rng, shape) - shape),
        NoiseModel::StudentT { nu } => {
            let z = rng.standard_normal();
            let chi2 = 2.0 * gamma_variate(rng, 0.5 * nu);
            z / (chi2 / nu).sqrt()
        }
        NoiseModel::CenteredPareto { index, scale } => {
            scale * rng.uniform().powf(-1.0 / index) - NoiseModel::pareto_mean(index, scale)
        }
        NoiseModel::CenteredLognormal { mu, s } => {
            (mu + s * rng.standard_normal()).exp() - NoiseModel::lognormal_mean(mu, s)
        }
        NoiseModel::TwoPoint { p, high, low } => {
            if rng.uniform() < p {
                high
            } else {
                low
            }
        }
    }
}

/// `n` i.i.d. variates. Variate `i` is generated from counter
/// `rng.counter + i * WORDS_PER_VARIATE`; on return the counter has advanced
/// by `n * WORDS_PER_VARIATE`.
pub fn draw(model: &NoiseModel, n: usize, rng: &mut RngStream) -> Sample {
    let mut out = Vec::with_capacity(n);
    draw_into(model, n, rng, &mut out);
    Sample::new(out).expect("models produce finite variates")
}

/// As [`draw`], writing into `out` (cleared first).
pub fn draw_into(model: &NoiseModel, n: usize, rng: &mut RngStream, out: &mut Vec<f64>) {
    out.clear();
    for i in 0..n as u64 {
        let mut sub = rng.fork_at(i * WORDS_PER_VARIATE);
        out.push(variate(model, &mut sub));
    }
    rng.advance(n as u64 * WORDS_PER_VARIATE);
}

// ---------------------------------------------------------------------------
// Expectations

type F = Box<dyn Fn(f64) -> f64>;

/// A monotone parametrization `x = x(v)` of part of the support, with
/// `dF = w(v) dv`.
struct Piece {
    v0: f64,
    v1: f64,
    x: F,
    v: F,
    w: F,
}

fn pieces(model: &NoiseModel) -> Vec<Piece> {
    let inf = f64::INFINITY;
    match *model {
        NoiseModel::Gaussian { sigma } => {
            let mk = |v0, v1| Piece {
                v0,
                v1,
                x: Box::new(move |z| sigma * z),
                v: Box::new(move |x| x / sigma),
                w: Box::new(normal_pdf),
            };
            vec![mk(-inf, 0.0), mk(0.0, inf)]
        }
        NoiseModel::CenteredGamma { shape: k, scale } => {
            let ln_norm = ln_gamma(k);
            let dens = move |g: f64| {
                if g <= 0.0 {
                    if k == 1.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    ((k - 1.0) * g.ln() - g - ln_norm).exp()
                }
            };
            let lin = |g0, g1| Piece {
                v0: g0,
                v1: g1,
                x: Box::new(move |g| scale * (g - k)),
                v: Box::new(move |x| x / scale + k),
                w: Box::new(dens),
            };
            if k < 1.0 {
                // t = G^k on G in [0, 1] removes the G^(k-1) singularity.
                let ln_norm1 = ln_gamma(k + 1.0);
                let head = Piece {
                    v0: 0.0,
                    v1: 1.0,
                    x: Box::new(move |t: f64| scale * (t.powf(1.0 / k) - k)),
                    v: Box::new(move |x: f64| (x / scale + k).max(0.0).powf(k)),
                    w: Box::new(move |t: f64| (-t.powf(1.0 / k) - ln_norm1).exp()),
                };
                vec![head, lin(1.0, inf)]
            } else {
                vec![lin(0.0, k), lin(k, inf)]
            }
        }
        NoiseModel::StudentT { nu } => {
            let ln_c = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln();
            let pdf = move |x: f64| (ln_c - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()).exp();
            vec![
                // x = -exp(-v), v <= 0
                Piece {
                    v0: -inf,
                    v1: 0.0,
                    x: Box::new(|v: f64| -(-v).exp()),
                    v: Box::new(|x: f64| -(-x).ln()),
                    w: Box::new(move |v: f64| {
                        let m = (-v).exp();
                        pdf(m) * m
                    }),
                },
                Piece { v0: -1.0, v1: 1.0, x: Box::new(|x| x), v: Box::new(|x| x), w: Box::new(pdf) },
                Piece {
                    v0: 0.0,
                    v1: inf,
                    x: Box::new(|v: f64| v.exp()),
                    v: Box::new(|x: f64| x.ln()),
                    w: Box::new(move |v: f64| {
                        let m = v.exp();
                        pdf(m) * m
                    }),
                },
            ]
        }
        NoiseModel::CenteredPareto { index: a, scale } => {
            let mean = NoiseModel::pareto_mean(a, scale);
            let mk = |v0, v1| Piece {
                v0,
                v1,
                x: Box::new(move |v: f64| scale * v.exp() - mean),
                v: Box::new(move |x: f64| ((x + mean) / scale).max(1.0).ln()),
                w: Box::new(move |v: f64| a * (-a * v).exp()),
            };
            vec![mk(0.0, 1.0 / a), mk(1.0 / a, inf)]
        }
        NoiseModel::CenteredLognormal { mu, s } => {
            let mean = NoiseModel::lognormal_mean(mu, s);
            let mk = |v0, v1| Piece {
                v0,
                v1,
                x: Box::new(move |z: f64| (mu + s * z).exp() - mean),
                v: Box::new(move |x: f64| {
                    let y = x + mean;
                    if y <= 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        (y.ln() - mu) / s
                    }
                }),
                w: Box::new(normal_pdf),
            };
            vec![mk(-inf, 0.0), mk(0.0, inf)]
        }
        NoiseModel::TwoPoint { .. } => Vec::new(),
    }
}

/// Integrate over `[points[0], points[last]]`, where the outer points may be
/// infinite and the inner ones are finite and increasing.
fn integrate_latent(f: &dyn Fn(f64) -> f64, points: &[f64], opts: QuadOptions) -> QuadResult {
    let mut total = QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0, converged: true };
    let segments = points.len().saturating_sub(1).max(1) as f64;
    let opts = QuadOptions { abs_tol: opts.abs_tol / segments, ..opts };
    let mut add = |r: QuadResult| {
        total.value += r.value;
        total.abs_error += r.abs_error;
        total.evaluations += r.evaluations;
        total.converged &= r.converged;
    };
    let first = points[0];
    let last = points[points.len() - 1];
    let inner: Vec<f64> = points.iter().copied().filter(|p| p.is_finite()).collect();
    if first == f64::NEG_INFINITY {
        let b = inner.first().copied().unwrap_or(0.0);
        add(integrate_lower_tail(f, b, opts));
    }
    if inner.len() >= 2 {
        add(integrate_points(f, &inner, opts));
    }
    if last == f64::INFINITY {
        let a = inner.last().copied().unwrap_or(0.0);
        add(integrate_upper_tail(f, a, opts));
    }
    if first == f64::NEG_INFINITY && last == f64::INFINITY && inner.is_empty() {
        // Both tails were split at 0 above; nothing else to add.
    }
    total
}

/// `E[g(X) 1(lo <= X <= hi)]`, splitting the latent ranges at `breaks` (x values).
pub fn expect_on(
    model: &NoiseModel,
    g: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> QuadResult {
    if let Some(atoms) = model.atoms() {
        let value = atoms
            .iter()
            .filter(|(x, w)| *w > 0.0 && *x >= lo && *x <= hi)
            .map(|(x, w)| w * g(*x))
            .sum();
        return QuadResult { value, abs_error: 0.0, evaluations: 2, converged: true };
    }
    let ps = pieces(model);
    let mut total = QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0, converged: true };
    let per = QuadOptions { abs_tol: opts.abs_tol / ps.len() as f64, ..opts };
    for p in &ps {
        let x0 = (p.x)(p.v0);
        let x1 = (p.x)(p.v1);
        if hi < x0 || lo > x1 || hi < lo {
            continue;
        }
        let va = if lo <= x0 { p.v0 } else { (p.v)(lo).clamp(p.v0, p.v1) };
        let vb = if hi >= x1 { p.v1 } else { (p.v)(hi).clamp(p.v0, p.v1) };
        if !(vb > va) {
            continue;
        }
        let mut pts = vec![va];
        let mut inner: Vec<f64> = breaks
            .iter()
            .filter(|b| b.is_finite() && **b > x0 && **b < x1)
            .map(|&b| (p.v)(b))
            .filter(|v| v.is_finite() && *v > va && *v < vb)
            .collect();
        inner.sort_by(f64::total_cmp);
        pts.extend(inner);
        pts.push(vb);
        let f = |v: f64| {
            let w = (p.w)(v);
            if w == 0.0 || !w.is_finite() {
                0.0
            } else {
                g((p.x)(v)) * w
            }
        };
        let r = integrate_latent(&f, &pts, per);
        total.value += r.value;
        total.abs_error += r.abs_error;
        total.evaluations += r.evaluations;
        total.converged &= r.converged;
    }
    if !total.converged {
        warn!("quadrature for {model} did not reach tolerance: est. error {:.3e}", total.abs_error);
    }
    total
}

/// `E g(X)` over the whole support.
pub fn expect(model: &NoiseModel, g: &dyn Fn(f64) -> f64, breaks: &[f64], opts: QuadOptions) -> QuadResult {
    expect_on(model, g, f64::NEG_INFINITY, f64::INFINITY, breaks, opts)
}

fn moment_opts() -> QuadOptions {
    QuadOptions { abs_tol: 0.0, rel_tol: 1e-12, max_intervals: 4000 }
}

/// `E|X - u|^k`, infinite when the moment diverges.
pub fn abs_central_moment(model: &NoiseModel, k: f64) -> f64 {
    let u = model.mean();
    match *model {
        NoiseModel::Gaussian { sigma } => {
            sigma.powf(k) * (0.5 * k * 2f64.ln() + ln_gamma(0.5 * (k + 1.0)) - 0.5 * PI.ln()).exp()
        }
        NoiseModel::StudentT { nu } => {
            if k >= nu {
                f64::INFINITY
            } else {
                (0.5 * k * nu.ln() + ln_gamma(0.5 * (k + 1.0)) + ln_gamma(0.5 * (nu - k))
                    - 0.5 * PI.ln()
                    - ln_gamma(0.5 * nu))
                    .exp()
            }
        }
        NoiseModel::CenteredPareto { index, .. } if k >= index => f64::INFINITY,
        NoiseModel::TwoPoint { p, high, low } => p * (high - u).abs().powf(k) + (1.0 - p) * (low - u).abs().powf(k),
        _ => expect(model, &|x| (x - u).abs().powf(k), &[u], moment_opts()).value,
    }
}

/// `d_k = sigma / (E|X - u|^k)^{1/k}`; 0 when the moment is infinite.
pub fn d_k(model: &NoiseModel, k: f64) -> f64 {
    let m = abs_central_moment(model, k);
    if m.is_infinite() {
        0.0
    } else {
        model.sd() / m.powf(1.0 / k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelMoments {
    pub u: f64,
    pub sigma_sq: f64,
    /// `(k, E|X - u|^k)` for `k` in [`MOMENT_ORDERS`].
    pub abs_central_moment: Vec<(f64, f64)>,
    /// `(k, d_k)` for the same orders.
    pub d_k: Vec<(f64, f64)>,
    pub sqrt_exp_moment_finite: bool,
}

impl ModelMoments {
    pub fn abs_moment(&self, k: f64) -> Option<f64> {
        self.abs_central_moment.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }

    pub fn d(&self, k: f64) -> Option<f64> {
        self.d_k.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }
}

pub fn moments(model: &NoiseModel) -> ModelMoments {
    let sigma_sq = model.variance();
    let abs: Vec<(f64, f64)> = MOMENT_ORDERS.iter().map(|&k| (k, abs_central_moment(model, k))).collect();
    let d = abs
        .iter()
        .map(|&(k, m)| (k, if m.is_infinite() { 0.0 } else { sigma_sq.sqrt() / m.powf(1.0 / k) }))
        .collect();
    ModelMoments {
        u: model.mean(),
        sigma_sq,
        abs_central_moment: abs,
        d_k: d,
        sqrt_exp_moment_finite: model.sqrt_exp_moment_finite(),
    }
}

/// `E phi(alpha (X - x)) / alpha`, with breakpoints at the kinks of bounded influences.
pub fn scaled_phi_mean(model: &NoiseModel, alpha: f64, phi: &InfluenceSpec, x: f64, abs_tol: f64) -> QuadResult {
    let breaks = [x - 1.0 / alpha, x, x + 1.0 / alpha];
    let r = expect(
        model,
        &|y| phi.phi(alpha * (y - x)),
        &breaks,
        QuadOptions { abs_tol: abs_tol * alpha, rel_tol: 0.0, max_intervals: 4000 },
    );
    QuadResult { value: r.value / alpha, abs_error: r.abs_error / alpha, ..r }
}

/// Root `u_n` of `x -> E phi(alpha (X - x))`, located to `quad_tol` by the
/// plateau-midpoint rule with the integral evaluated to `quad_tol / 10`.
pub fn solve_u_n(model: &NoiseModel, alpha: f64, phi: &InfluenceSpec, quad_tol: f64) -> Result<f64> {
    model.validate()?;
    phi.ensure_usable()?;
    if !(alpha > 0.0) || !(quad_tol > 0.0) {
        return Err(Error::invalid("alpha and quad_tol must be positive"));
    }
    let u = model.mean();
    let sigma = model.sd();
    let half = match bias_bound(alpha, sigma) {
        Ok(b) => 2.0 * b + sigma,
        Err(_) => {
            warn!("alpha * sigma = {} >= 1 for {model}; widening the u_n bracket", alpha * sigma);
            sigma + 2.0 / alpha
        }
    };
    let f = |x: f64| scaled_phi_mean(model, alpha, phi, x, 0.1 * quad_tol).value;
    let (mut lo, mut hi) = (u - half, u + half);
    let mut grow = half;
    let mut tries = 0;
    while f(lo) <= quad_tol || f(hi) >= -quad_tol {
        tries += 1;
        if tries > 60 {
            return Err(Error::Internal(format!(
                "could not bracket u_n for {model}: quadrature tolerance {quad_tol} may be too loose"
            )));
        }
        grow *= 2.0;
        if f(lo) <= quad_tol {
            lo = u - grow;
        }
        if f(hi) >= -quad_tol {
            hi = u + grow;
        }
    }
    let r = plateau_midpoint(f, lo, hi, quad_tol, quad_tol, 400, RootMethod::Illinois)
        .map_err(|e| Error::Internal(format!("u_n search failed: {e}")))?;
    Ok(r.theta)
}

/// Truncated-moment terms `(beta2, beta3)` at sample size `n`.
pub fn beta_terms(model: &NoiseModel, n: usize) -> (f64, f64) {
    let u = model.mean();
    let s2 = model.variance();
    let s = s2.sqrt();
    let c = (n as f64).sqrt() * s;
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-11, max_intervals: 4000 };
    let sq = |x: f64| (x - u) * (x - u);
    let b2 = expect_on(model, &sq, f64::NEG_INFINITY, u - c, &[], opts).value
        + expect_on(model, &sq, u + c, f64::INFINITY, &[], opts).value;
    let b3 = expect_on(model, &|x| (x - u).abs().powi(3), u - c, u + c, &[u], opts).value;
    (b2 / s2, b3 / (c * s2))
}

/// `(E phi(alpha X), Var phi(alpha X))`.
pub fn phi_mean_and_var(model: &NoiseModel, alpha: f64, phi: &InfluenceSpec) -> Result<(f64, f64)> {
    model.validate()?;
    phi.ensure_usable()?;
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha must be positive"));
    }
    let breaks = [-1.0 / alpha, 0.0, 1.0 / alpha];
    let opts = QuadOptions { abs_tol: 1e-300, rel_tol: 1e-13, max_intervals: 4000 };
    let m = expect(model, &|y| phi.phi(alpha * y), &breaks, QuadOptions { abs_tol: 1e-16 * alpha, ..opts }).value;
    let v = expect(
        model,
        &|y| {
            let d = phi.phi(alpha * y) - m;
            d * d
        },
        &breaks,
        opts,
    )
    .value;
    Ok((m, v))
}

/// Exponential lower-tail bound for a U-statistic with kernel of order `m`
/// (`mean_h = E h`, `p_moment = E h^p`).
pub fn u_stat_lower_tail_bound(m: usize, n: usize, mean_h: f64, p_moment: f64, p: f64, x: f64) -> Result<Probability> {
    if m == 0 || n == 0 {
        return Err(Error::invalid("m and n must be positive"));
    }
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::invalid("p must lie in (1, 2]"));
    }
    if !(p_moment > 0.0) || !(x > 0.0) {
        return Err(Error::invalid("E h^p and x must be positive"));
    }
    if x > mean_h {
        return Err(Error::domain(format!("x = {x} exceeds E h = {mean_h}")));
    }
    let blocks = (n / m) as f64;
    let expo = blocks * (p - 1.0) * (mean_h - x).powf(p / (p - 1.0)) / (p * p_moment.powf(1.0 / (p - 1.0)));
    Probability::new((-expo).exp())
}

/// `c_delta = (delta / (2 + delta)) (3/4)^{(2 + delta)/delta}`.
pub fn c_delta(delta: f64) -> f64 {
    delta / (2.0 + delta) * 0.75f64.powf((2.0 + delta) / delta)
}

/// Bound on `P(n^{-1} sum (X_i - EX_i)^2 <= sigma^2 / 4)`, `exp(-n c_delta d^{(4+2delta)/delta})`
/// with `d = d_{2+delta}`.
pub fn variance_quarter_tail_bound(n: usize, delta: f64, d: f64) -> Result<Probability> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid("delta must lie in (0, 1]"));
    }
    if !(d > 0.0 && d <= 1.0) {
        return Err(Error::invalid("d must lie in (0, 1]"));
    }
    Probability::new((-(n as f64) * c_delta(delta) * d.powf((4.0 + 2.0 * delta) / delta)).exp())
}

/// `gamma_n = min{n^{delta/(4+2delta)}, n^{-1/2} / a_n}`.
pub fn gamma_n(n: usize, a_n: f64, delta: f64) -> f64 {
    let n = n as f64;
    n.powf(delta / (4.0 + 2.0 * delta)).min(1.0 / (n.sqrt() * a_n))
}
