use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::matrix::{mean, pearson};
use crate::error::{Error, Result};
use crate::hitl::dense::{Modality, RatingRecord};

/// Rating values grouped by (stimulus, dimension), in a stable order.
pub fn cells_from_ratings(ratings: &[RatingRecord], modality: Modality) -> Vec<Vec<f64>> {
    let mut cells: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for r in ratings.iter().filter(|r| r.modality == modality) {
        cells
            .entry((r.stimulus_id.as_str(), r.dimension.as_str()))
            .or_default()
            .push(r.value as f64);
    }
    cells.into_values().collect()
}

/// Split each cell's raters at random into two halves and correlate the half
/// means across cells; averaged over `n_splits` splits. Odd counts give the
/// extra rater to the first half.
pub fn split_half_reliability(cells: &[Vec<f64>], n_splits: usize, seed: u64) -> Result<f64> {
    if let Some(c) = cells.iter().find(|c| c.len() < 2) {
        return Err(Error::TooFew {
            what: "ratings per cell",
            needed: 2,
            got: c.len(),
        });
    }
    if cells.len() < 3 {
        return Err(Error::TooFew {
            what: "cells",
            needed: 3,
            got: cells.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..n_splits.max(1) {
        let (mut a, mut b) = (Vec::with_capacity(cells.len()), Vec::with_capacity(cells.len()));
        for c in cells {
            let mut v = c.clone();
            v.shuffle(&mut rng);
            let h = v.len().div_ceil(2);
            a.push(mean(&v[..h]));
            b.push(mean(&v[h..]));
        }
        // identical halves everywhere is perfect agreement
        total += pearson(&a, &b).unwrap_or(if a == b { 1.0 } else { 0.0 });
    }
    Ok(total / n_splits.max(1) as f64)
}

/// Spearman-Brown prophecy: reliability of a measure `factor` times longer.
pub fn spearman_brown(r: f64, factor: f64) -> f64 {
    factor * r / (1.0 + (factor - 1.0) * r)
}
