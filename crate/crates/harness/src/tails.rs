use catoni_core::dist;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::ReportTable;
use crate::sim::{par_replicates, proportion, replicate_stream};

pub const TAIL_COLUMNS: &[&str] = &["n", "delta", "d", "bound", "count", "freq", "freq_se", "dominated"];

/// Frequency of `n^{-1} sum (X_i - u)^2 <= sigma^2 / 4` against its exponential bound.
pub fn run_tail_bounds(cfg: &ExperimentConfig) -> Result<ReportTable> {
    let mut t = ReportTable::new(cfg, TAIL_COLUMNS);
    let u = cfg.model.mean();
    let quarter = 0.25 * cfg.model.variance();
    let mut freqs = Vec::new();
    for &n in &cfg.n_list {
        let hits = par_replicates(cfg.reps, n, |r| {
            let s = dist::draw(&cfg.model, n, &mut replicate_stream(cfg.seed, cfg.kind, n, r));
            let ss = s.values().iter().map(|x| (x - u) * (x - u)).sum::<f64>() / n as f64;
            Ok(ss <= quarter)
        })?;
        let count = hits.iter().filter(|&&h| h).count();
        let (f, se) = proportion(count, cfg.reps);
        freqs.push(f);
        for &delta in &cfg.delta_list {
            let d = dist::d_k(&cfg.model, 2.0 + delta);
            let bound = dist::variance_quarter_tail_bound(n, delta, d)?.get();
            t.push(vec![
                n.into(),
                delta.into(),
                d.into(),
                bound.into(),
                count.into(),
                f.into(),
                se.into(),
                (f <= bound + 3.0 * se).into(),
            ]);
        }
    }
    t.note(json!({ "freq_by_n": cfg.n_list.iter().zip(&freqs).map(|(n, f)| json!([n, f])).collect::<Vec<_>>() }));
    Ok(t)
}
