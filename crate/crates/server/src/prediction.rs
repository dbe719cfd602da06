//! Prediction experiments: corpus from a GSP experiment plus dense
//! profiles, five voices per target robot, and the explorer space.

use std::collections::BTreeMap;

use robovoice::analysis::predict::{nearest_by_scores, CONDITIONS};
use robovoice::analysis::{factor_analysis, pca, predict_conditions, CorpusEntry, FaOptions, PredictionSet, Standardize};
use robovoice::hitl::{derive_seed, profiles, DenseExperiment, GspExperiment, PerceptualProfile, ValidationItem};
use robovoice::labels::DENSE_DIMENSIONS;
use robovoice::EffectProfile;
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explorer {
    /// "factor_analysis", or "pca" when the correlation matrix is singular.
    pub method: String,
    pub labels: Vec<String>,
    pub scores: Vec<(String, Vec<f64>)>,
    /// Conditions for every corpus robot, keyed by stimulus id.
    pub predictions: BTreeMap<String, PredictionSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSetup {
    pub targets: Vec<PredictionSet>,
    pub items: Vec<ValidationItem>,
    pub explorer: Explorer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreAnswer {
    pub nearest: String,
    pub distance: f64,
    pub scores: Vec<f64>,
    pub prediction: Option<PredictionSet>,
}

fn bad(msg: impl Into<String>) -> ApiError {
    ApiError::BadRequest(msg.into())
}

/// Corpus entries for every chain whose stimulus has a complete profile.
pub fn build_corpus(
    gsp: &GspExperiment,
    dense: &DenseExperiment,
) -> ApiResult<(Vec<CorpusEntry>, BTreeMap<String, PerceptualProfile>)> {
    let profs = profiles(&dense.ratings, dense.modality)?;
    let corpus: Vec<CorpusEntry> = gsp
        .chains
        .iter()
        .filter_map(|c| {
            let p = profs.get(&c.stimulus_id)?;
            p.missing().is_empty().then(|| CorpusEntry {
                stimulus_id: c.stimulus_id.clone(),
                profile: p.clone(),
                chain_configs: c.configs().cloned().collect(),
                final_config: c.final_config().clone(),
            })
        })
        .collect();
    if corpus.len() < 2 {
        return Err(bad(format!("corpus has {} robots with complete profiles; need 2", corpus.len())));
    }
    Ok((corpus, profs))
}

/// Factor scores (or PCA scores as a fallback) of each corpus robot.
pub fn explorer_space(corpus: &[CorpusEntry], n_factors: usize) -> ApiResult<(String, Vec<String>, Vec<Vec<f64>>)> {
    let rows: Vec<Vec<f64>> = corpus.iter().map(|e| e.profile.vector()).collect::<Result<_, _>>()?;
    let labels: Vec<String> = DENSE_DIMENSIONS.iter().map(|s| s.to_string()).collect();
    let opts = FaOptions {
        n_factors: Some(n_factors.max(1)),
        ..FaOptions::default()
    };
    if let Ok(fa) = factor_analysis(&rows, &labels, &opts) {
        let scores = rows.iter().map(|r| fa.scores_for(&labels, r)).collect::<Result<Vec<_>, _>>()?;
        return Ok(("factor_analysis".into(), fa.loadings.cols.clone(), scores));
    }
    let k = n_factors.max(1).min(rows.len() - 1);
    let p = pca(&rows, Some(k), Standardize::ZScore)?;
    let names = (1..=p.components.len()).map(|i| format!("PC{i}")).collect();
    Ok(("pca".into(), names, p.projections))
}

pub fn build_setup(
    gsp: &GspExperiment,
    dense: &DenseExperiment,
    targets: &[String],
    profile: &EffectProfile,
    n_factors: usize,
    seed: u64,
) -> ApiResult<PredictionSetup> {
    let (corpus, profs) = build_corpus(gsp, dense)?;
    let mut sets = Vec::new();
    let mut items = Vec::new();
    for (i, id) in targets.iter().enumerate() {
        let p = profs
            .get(id)
            .filter(|p| p.missing().is_empty())
            .ok_or_else(|| bad(format!("target {id:?} has no complete profile")))?;
        let set = predict_conditions(p, &corpus, profile, derive_seed(seed, &[1, i as u64]))?;
        for c in CONDITIONS {
            if let Some(v) = set.conditions.get(&c) {
                items.push(ValidationItem {
                    stimulus_id: id.clone(),
                    condition: serde_json::to_value(c).expect("enum").as_str().expect("str").to_string(),
                    config: v.config.clone(),
                });
            }
        }
        sets.push(set);
    }
    let (method, labels, scores) = explorer_space(&corpus, n_factors)?;
    let predictions = corpus
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let set = predict_conditions(&e.profile, &corpus, profile, derive_seed(seed, &[2, i as u64]))?;
            Ok((e.stimulus_id.clone(), set))
        })
        .collect::<ApiResult<_>>()?;
    Ok(PredictionSetup {
        targets: sets,
        items,
        explorer: Explorer {
            method,
            labels,
            scores: corpus.iter().map(|e| e.stimulus_id.clone()).zip(scores).collect(),
            predictions,
        },
    })
}

impl Explorer {
    pub fn nearest(&self, point: &[f64]) -> ApiResult<ExploreAnswer> {
        if point.len() != self.labels.len() {
            return Err(ApiError::Unprocessable(format!(
                "expected {} scores, got {}",
                self.labels.len(),
                point.len()
            )));
        }
        let (id, d) = nearest_by_scores(point, &self.scores).ok_or_else(|| ApiError::NotFound("empty corpus".into()))?;
        self.answer(id, d)
    }

    pub fn select(&self, stimulus_id: &str) -> ApiResult<ExploreAnswer> {
        self.answer(stimulus_id, 0.0)
    }

    fn answer(&self, id: &str, distance: f64) -> ApiResult<ExploreAnswer> {
        let scores = self
            .scores
            .iter()
            .find(|(s, _)| s == id)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| ApiError::NotFound(format!("{id:?} is not in the corpus")))?;
        Ok(ExploreAnswer {
            nearest: id.to_string(),
            distance,
            scores,
            prediction: self.predictions.get(id).cloned(),
        })
    }
}
