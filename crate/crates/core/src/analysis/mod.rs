//! Statistics and trajectory metrics used to compare runs.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wilcoxon {
    /// Number of non-zero differences.
    pub n: usize,
    /// Sum of the ranks of positive differences `x - y`.
    pub w_plus: f64,
    pub w_minus: f64,
    /// Normal approximation with tie correction, no continuity correction.
    pub z: f64,
    pub p_normal: f64,
    /// Exact two-sided p from the null distribution of `W+`; only when
    /// `n <= 25` and there are no tied magnitudes.
    pub p_exact: Option<f64>,
}

impl Wilcoxon {
    /// Exact p when available, otherwise the normal approximation.
    pub fn p_value(&self) -> f64 {
        self.p_exact.unwrap_or(self.p_normal)
    }
}

pub const EXACT_MAX_N: usize = 25;

/// Mid-ranks (1-based) of `values`, ties sharing the average rank.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Paired two-sided signed-rank test on `x - y`, zero differences dropped.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<Wilcoxon, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::Domain(format!("paired samples differ in length ({} vs {})", x.len(), y.len())));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if d.is_empty() {
        return Err(AnalysisError::Degenerate("all paired differences are zero".into()));
    }
    let n = d.len();
    if n < 6 {
        return Err(AnalysisError::Domain(format!("need at least 6 non-zero differences, got {n}")));
    }
    let mags: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = mid_ranks(&mags);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let nf = n as f64;
    let total = nf * (nf + 1.0) / 2.0;
    let w_minus = total - w_plus;

    let mut sorted = mags.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut has_ties = false;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        if t > 1.0 {
            has_ties = true;
        }
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let mean = total / 2.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = (w_plus - mean) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_normal = (2.0 * (1.0 - normal.cdf(z.abs()))).min(1.0);
    let p_exact = (n <= EXACT_MAX_N && !has_ties).then(|| exact_p(n, w_plus.round() as usize));
    Ok(Wilcoxon { n, w_plus, w_minus, z, p_normal, p_exact })
}

/// Two-sided exact p: counts rank subsets of `1..=n` by their sum.
fn exact_p(n: usize, w: usize) -> f64 {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0f64; max + 1];
    counts[0] = 1.0;
    for r in 1..=n {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total = 2f64.powi(n as i32);
    let lower: f64 = counts[..=w].iter().sum::<f64>() / total;
    let upper: f64 = counts[w..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

fn dist(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Mean distance between time-aligned points.
pub fn ate(a: &[Point], b: &[Point]) -> Result<f64, AnalysisError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(AnalysisError::Domain(format!("trajectories must be non-empty and aligned ({} vs {})", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(p, q)| dist(p, q)).sum::<f64>() / a.len() as f64)
}

/// Accumulated Euclidean cost of the cheapest monotone alignment.
pub fn dtw(a: &[Point], b: &[Point]) -> Result<f64, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::Domain("DTW needs two non-empty sequences".into()));
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for p in a {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            cur[j] = dist(p, &b[j - 1]) + prev[j - 1].min(prev[j]).min(cur[j - 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// `(MAE, MSE)` over two equally long command streams, flattened.
pub fn control_similarity(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(f64, f64), AnalysisError> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) {
        return Err(AnalysisError::Domain("command streams differ in shape".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q)).collect();
    if diffs.is_empty() {
        return Err(AnalysisError::Domain("empty command streams".into()));
    }
    let n = diffs.len() as f64;
    Ok((diffs.iter().map(|d| d.abs()).sum::<f64>() / n, diffs.iter().map(|d| d * d).sum::<f64>() / n))
}

/// Trailing mean over up to `window` points; early points average what exists.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut sum = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            sum += v;
            if i >= w {
                sum -= values[i - w];
            }
            sum / (i + 1).min(w) as f64
        })
        .collect()
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}
