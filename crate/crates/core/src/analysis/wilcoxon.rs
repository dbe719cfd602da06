use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest number of non-zero differences for which `Auto` uses the exact
/// null distribution.
pub const EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMode {
    #[default]
    Auto,
    Exact,
    Approx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive differences.
    pub v: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub z: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// Effect size |z| / sqrt(n).
    pub r: f64,
    pub exact: bool,
}

/// Average ranks of `values` (1-based).
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Null distribution of twice the signed-rank sum: entry `s` is
/// P(2V = s) when every rank's sign is a fair coin. Doubling makes
/// tied (half-integer) ranks integral.
pub fn exact_null(doubled_ranks: &[usize]) -> Vec<f64> {
    let total: usize = doubled_ranks.iter().sum();
    let mut dist = vec![0.0; total + 1];
    dist[0] = 1.0;
    let mut reach = 0;
    for &r in doubled_ranks {
        for s in (0..=reach).rev() {
            let p = dist[s];
            if p != 0.0 {
                dist[s] = p * 0.5;
                dist[s + r] += p * 0.5;
            }
        }
        reach += r;
    }
    dist
}

/// Signed-rank test on paired samples.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], mode: WilcoxonMode) -> Result<WilcoxonResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    wilcoxon_diffs(&d, mode)
}

/// Signed-rank test on differences; zeros are dropped.
pub fn wilcoxon_diffs(diffs: &[f64], mode: WilcoxonMode) -> Result<WilcoxonResult> {
    let d: Vec<f64> = diffs.iter().copied().filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Err(Error::AllTied);
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&abs);
    let v: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut ties = 0.0;
    let mut sorted = abs.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&s| s == sorted[i]).count();
        ties += (j * j * j - j) as f64;
        i += j;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
    let dev = v - mean;
    let z = if var <= 0.0 || dev.abs() < 0.5 {
        0.0
    } else {
        (dev - 0.5 * dev.signum()) / var.sqrt()
    };
    let exact = match mode {
        WilcoxonMode::Exact => true,
        WilcoxonMode::Approx => false,
        WilcoxonMode::Auto => n <= EXACT_MAX_N,
    };
    let p = if exact {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let dist = exact_null(&doubled);
        let s = (2.0 * v).round() as usize;
        let lower: f64 = dist[..=s].iter().sum();
        let upper: f64 = dist[s..].iter().sum();
        (2.0 * lower.min(upper)).min(1.0)
    } else {
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * (1.0 - normal.cdf(z.abs()))).min(1.0)
    };
    Ok(WilcoxonResult {
        v,
        n,
        z,
        p,
        r: z.abs() / nf.sqrt(),
        exact,
    })
}
