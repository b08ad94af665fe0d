//! Replicate streams, ordered parallel maps and small summary statistics.

use catoni_core::rng::{hash_words, RngStream};
use rayon::prelude::*;

use crate::config::Kind;
use crate::error::{HarnessError, Result};

/// Stream for replicate `r` at sample size `n`; independent of `reps`.
pub fn replicate_stream(seed: u64, kind: Kind, n: usize, r: usize) -> RngStream {
    RngStream::new(seed, hash_words(&[kind.code(), n as u64, r as u64]))
}

/// Stream for the `attempt`-th redraw of replicate `r` (attempt 0 is the original).
pub fn redraw_stream(seed: u64, kind: Kind, n: usize, r: usize, attempt: u64) -> RngStream {
    if attempt == 0 {
        replicate_stream(seed, kind, n, r)
    } else {
        RngStream::new(seed, hash_words(&[kind.code(), n as u64, r as u64, attempt]))
    }
}

/// Runs `f` for every replicate index and returns results in index order.
pub fn par_replicates<T, F>(reps: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> std::result::Result<T, catoni_core::Error> + Sync + Send,
{
    (0..reps)
        .into_par_iter()
        .map(|r| f(r).map_err(|source| HarnessError::Replicate { n, replicate: r, source }))
        .collect()
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Binomial proportion and its standard error.
pub fn proportion(count: usize, total: usize) -> (f64, f64) {
    let p = count as f64 / total as f64;
    (p, (p * (1.0 - p) / total as f64).sqrt())
}

/// Scale of the Kolmogorov distance between `reps` draws and their own law.
pub fn ks_null_scale(reps: usize) -> f64 {
    0.8 / (reps as f64).sqrt()
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties; NaN when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}
