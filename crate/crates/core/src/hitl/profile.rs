use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hitl::dense::{Modality, RatingRecord};
use crate::labels::{dimension_index, DENSE_DIMENSIONS};

/// Mean rating and count per dimension, in canonical label order. Dimensions
/// without ratings have `mean = None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptualProfile {
    pub stimulus_id: String,
    pub modality: Modality,
    pub mean: Vec<Option<f64>>,
    pub count: Vec<u32>,
}

impl PerceptualProfile {
    pub fn missing(&self) -> Vec<String> {
        self.mean
            .iter()
            .zip(DENSE_DIMENSIONS)
            .filter(|(m, _)| m.is_none())
            .map(|(_, d)| d.to_string())
            .collect()
    }

    /// Dense vector; fails when any dimension is unrated.
    pub fn vector(&self) -> Result<Vec<f64>> {
        let missing = self.missing();
        if !missing.is_empty() {
            return Err(Error::MissingDimensions(missing));
        }
        Ok(self.mean.iter().map(|m| m.expect("checked")).collect())
    }

    pub fn get(&self, label: &str) -> Result<Option<f64>> {
        let d = dimension_index(label).ok_or_else(|| Error::UnknownDimension(label.to_string()))?;
        Ok(self.mean[d])
    }
}

/// Profile of one stimulus from every matching record in `ratings`.
pub fn profile(stimulus_id: &str, modality: Modality, ratings: &[RatingRecord]) -> Result<PerceptualProfile> {
    let n = DENSE_DIMENSIONS.len();
    let mut sum = vec![0u64; n];
    let mut count = vec![0u32; n];
    for r in ratings.iter().filter(|r| r.stimulus_id == stimulus_id && r.modality == modality) {
        let d = dimension_index(&r.dimension).ok_or_else(|| Error::UnknownDimension(r.dimension.clone()))?;
        if !(1..=5).contains(&r.value) {
            return Err(Error::InvalidRating(r.value));
        }
        // integer sums keep the mean independent of record order
        sum[d] += r.value as u64;
        count[d] += 1;
    }
    Ok(PerceptualProfile {
        stimulus_id: stimulus_id.to_string(),
        modality,
        mean: sum
            .iter()
            .zip(&count)
            .map(|(&s, &c)| (c > 0).then(|| s as f64 / c as f64))
            .collect(),
        count,
    })
}

/// Profiles for every stimulus that has ratings in `modality`.
pub fn profiles(ratings: &[RatingRecord], modality: Modality) -> Result<BTreeMap<String, PerceptualProfile>> {
    let mut ids: Vec<&str> = ratings
        .iter()
        .filter(|r| r.modality == modality)
        .map(|r| r.stimulus_id.as_str())
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids.into_iter()
        .map(|id| Ok((id.to_string(), profile(id, modality, ratings)?)))
        .collect()
}
