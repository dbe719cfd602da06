use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::matrix::{correlation_of_columns, pearson, to_matrix, LabeledMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub distance: f64,
}

/// Average-linkage agglomerative clustering on a full distance matrix.
/// Returns the dendrogram leaf order and the merge history.
pub fn average_linkage(dist: &[Vec<f64>]) -> (Vec<usize>, Vec<Merge>) {
    let mut clusters: Vec<Vec<usize>> = (0..dist.len()).map(|i| vec![i]).collect();
    let mut merges = Vec::new();
    let avg = |a: &[usize], b: &[usize]| -> f64 {
        let s: f64 = a.iter().flat_map(|&i| b.iter().map(move |&j| dist[i][j])).sum();
        s / (a.len() * b.len()) as f64
    };
    while clusters.len() > 1 {
        let mut best = (0, 1, f64::INFINITY);
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let d = avg(&clusters[i], &clusters[j]);
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        let (i, j, d) = best;
        let right = clusters.remove(j);
        let left = std::mem::take(&mut clusters[i]);
        merges.push(Merge {
            left: left.clone(),
            right: right.clone(),
            distance: d,
        });
        clusters[i] = left.into_iter().chain(right).collect();
    }
    (clusters.pop().unwrap_or_default(), merges)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrResult {
    /// Correlations in input order.
    pub matrix: LabeledMatrix,
    /// Dendrogram leaf order (indices into the input dimensions).
    pub order: Vec<usize>,
    pub merges: Vec<Merge>,
    /// Dimensions that were constant across stimuli and therefore masked.
    pub masked: Vec<String>,
}

impl CorrResult {
    pub fn ordered(&self) -> LabeledMatrix {
        self.matrix.permuted(&self.order)
    }
}

/// Pearson correlations between dimensions (columns) of per-stimulus mean
/// ratings (rows), ordered by average-linkage clustering on `1 - r`.
pub fn corr_matrix(profiles: &[Vec<f64>], dims: &[String]) -> Result<CorrResult> {
    if profiles.len() < 3 {
        return Err(Error::TooFew {
            what: "stimuli",
            needed: 3,
            got: profiles.len(),
        });
    }
    let x = to_matrix(profiles)?;
    if x.ncols() != dims.len() {
        return Err(Error::LengthMismatch(x.ncols(), dims.len()));
    }
    let r = correlation_of_columns(&x);
    let masked: Vec<String> = (0..dims.len())
        .filter(|&i| r[i][i].is_none())
        .map(|i| dims[i].clone())
        .collect();
    // a masked pair counts as uncorrelated for clustering
    let dist: Vec<Vec<f64>> = r
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, v)| if i == j { 0.0 } else { 1.0 - v.unwrap_or(0.0) })
                .collect()
        })
        .collect();
    let (order, merges) = average_linkage(&dist);
    Ok(CorrResult {
        matrix: LabeledMatrix::new(dims.to_vec(), dims.to_vec(), r)?,
        order,
        merges,
        masked,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossModal {
    /// Entry (i, j): r between image dimension i and voice dimension j.
    pub matrix: LabeledMatrix,
    /// diag(i) minus the mean of the off-diagonal entries of row i.
    pub diagonal_difference: Vec<f64>,
    /// Dimensions sorted by diagonal difference, strongest first.
    pub ranking: Vec<String>,
}

/// Correlate every image dimension with every voice dimension across the
/// shared stimulus set. Both maps are keyed by stimulus id.
pub fn cross_modal_corr(
    image: &BTreeMap<String, Vec<f64>>,
    voice: &BTreeMap<String, Vec<f64>>,
    dims: &[String],
) -> Result<CrossModal> {
    if image.len() != voice.len() || image.keys().zip(voice.keys()).any(|(a, b)| a != b) {
        return Err(Error::StimulusMismatch);
    }
    if image.len() < 3 {
        return Err(Error::TooFew {
            what: "stimuli",
            needed: 3,
            got: image.len(),
        });
    }
    let p = dims.len();
    let col = |m: &BTreeMap<String, Vec<f64>>, d: usize| -> Result<Vec<f64>> {
        m.values()
            .map(|v| v.get(d).copied().ok_or(Error::LengthMismatch(v.len(), p)))
            .collect()
    };
    let img: Vec<Vec<f64>> = (0..p).map(|d| col(image, d)).collect::<Result<_>>()?;
    let voc: Vec<Vec<f64>> = (0..p).map(|d| col(voice, d)).collect::<Result<_>>()?;
    let data: Vec<Vec<Option<f64>>> = (0..p)
        .map(|i| (0..p).map(|j| pearson(&img[i], &voc[j])).collect())
        .collect();
    let diagonal_difference: Vec<f64> = (0..p)
        .map(|i| {
            let off: Vec<f64> = (0..p).filter(|&j| j != i).filter_map(|j| data[i][j]).collect();
            let off_mean = if off.is_empty() {
                0.0
            } else {
                off.iter().sum::<f64>() / off.len() as f64
            };
            data[i][i].unwrap_or(0.0) - off_mean
        })
        .collect();
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&a, &b| diagonal_difference[b].partial_cmp(&diagonal_difference[a]).unwrap());
    Ok(CrossModal {
        matrix: LabeledMatrix::new(dims.to_vec(), dims.to_vec(), data)?,
        diagonal_difference,
        ranking: idx.into_iter().map(|i| dims[i].clone()).collect(),
    })
}
