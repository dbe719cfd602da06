use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::analysis::matrix::to_matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardize {
    /// Zero mean, unit sample variance.
    #[default]
    ZScore,
    /// Zero mean, divided by the column's observed range.
    Range,
    /// Zero mean only.
    Center,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    /// Indices of the input columns that were kept (constant ones dropped).
    pub kept_columns: Vec<usize>,
    pub dropped_columns: Vec<usize>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// One row per component, one entry per kept column; orthonormal rows.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Scores of every input row on the returned components.
    pub projections: Vec<Vec<f64>>,
}

fn column_scale(col: &[f64], mean: f64, how: Standardize) -> f64 {
    match how {
        Standardize::ZScore => {
            let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (col.len() - 1) as f64).sqrt()
        }
        Standardize::Range => {
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        }
        Standardize::Center => 1.0,
    }
}

/// Principal components of the standardized columns of `data` (rows are
/// observations). `n_components = None` keeps all of them. Each component is
/// signed so its largest-magnitude loading is positive.
pub fn pca(data: &[Vec<f64>], n_components: Option<usize>, how: Standardize) -> Result<Pca> {
    let x = to_matrix(data)?;
    let (n, p) = x.shape();
    if n < 2 {
        return Err(Error::TooFew {
            what: "rows",
            needed: 2,
            got: n,
        });
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut means = Vec::new();
    let mut scales = Vec::new();
    for j in 0..p {
        let col: Vec<f64> = x.column(j).iter().copied().collect();
        let m = col.iter().sum::<f64>() / n as f64;
        let s = column_scale(&col, m, how);
        let spread = col.iter().map(|v| (v - m).abs()).fold(0.0, f64::max);
        if spread > 1e-12 * (1.0 + m.abs()) && s > 0.0 {
            kept.push(j);
            means.push(m);
            scales.push(s);
        } else {
            dropped.push(j);
        }
    }
    if kept.is_empty() {
        return Err(Error::Degenerate("all columns are constant".into()));
    }
    if !dropped.is_empty() {
        tracing::warn!(?dropped, "pca: dropping constant columns");
    }
    let z = DMatrix::from_fn(n, kept.len(), |i, j| (x[(i, kept[j])] - means[j]) / scales[j]);
    let svd = z.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());

    let eig_all: Vec<f64> = order
        .iter()
        .map(|&k| svd.singular_values[k].powi(2) / (n - 1) as f64)
        .collect();
    let total: f64 = eig_all.iter().sum();
    let k = n_components.unwrap_or(order.len()).min(order.len());

    let mut components = Vec::with_capacity(k);
    for &c in order.iter().take(k) {
        let mut v: Vec<f64> = vt.row(c).iter().copied().collect();
        let big = v.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if big < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
    }
    let projections = (0..n)
        .map(|i| {
            components
                .iter()
                .map(|c| c.iter().enumerate().map(|(j, w)| w * z[(i, j)]).sum())
                .collect()
        })
        .collect();
    Ok(Pca {
        kept_columns: kept,
        dropped_columns: dropped,
        means,
        scales,
        components,
        explained_variance_ratio: eig_all.iter().take(k).map(|e| e / total).collect(),
        eigenvalues: eig_all.into_iter().take(k).collect(),
        projections,
    })
}

impl Pca {
    /// Standardized data rebuilt from the projections.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let p = self.kept_columns.len();
        self.projections
            .iter()
            .map(|s| {
                (0..p)
                    .map(|j| s.iter().zip(&self.components).map(|(a, c)| a * c[j]).sum())
                    .collect()
            })
            .collect()
    }

    pub fn standardize_row(&self, row: &[f64]) -> Vec<f64> {
        self.kept_columns
            .iter()
            .enumerate()
            .map(|(j, &c)| (row[c] - self.means[j]) / self.scales[j])
            .collect()
    }
}
