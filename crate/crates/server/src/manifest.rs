//! Experiment manifests: what a client POSTs to create an experiment.

use std::collections::BTreeSet;
use std::path::Path;

use robovoice::dsp::DEFAULT_SAMPLE_RATE;
use robovoice::hitl::{DenseParams, GspParams, Modality, StepParams, ValidationItem, DEFAULT_CLAIM_TIMEOUT_MS};
use robovoice::labels::sentence_for;
use robovoice::{EffectProfile, VoiceConfig};
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Gsp,
    Step,
    Dense,
    Validation,
    Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusRef {
    pub id: String,
    /// Image file (relative to the asset directory) or an http(s) URL.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    /// Fixed at creation; drawn from the Harvard list when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence: Option<String>,
    /// Voice stimulus for voice-modality STEP-Tag and dense experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voice: Option<VoiceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenseSetup {
    pub modality: Modality,
    pub dims_per_trial: usize,
    /// Per-participant trial cap.
    pub max_trials: usize,
    /// The experiment is complete once every (stimulus, dimension) cell has
    /// this many ratings.
    pub ratings_per_cell: u32,
}

impl Default for DenseSetup {
    fn default() -> Self {
        let p = DenseParams::default();
        Self {
            modality: Modality::Image,
            dims_per_trial: p.dims_per_trial,
            max_trials: p.max_trials,
            ratings_per_cell: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSetup {
    pub items: Vec<ValidationItem>,
    pub raters_per_item: usize,
    pub claim_timeout_ms: u64,
}

impl Default for ValidationSetup {
    fn default() -> Self {
        Self {
            items: Vec::new(),
            raters_per_item: 5,
            claim_timeout_ms: DEFAULT_CLAIM_TIMEOUT_MS,
        }
    }
}

/// Builds a validation experiment from a finished GSP corpus and dense
/// profiles hosted in the same store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictionRequest {
    pub gsp_experiment: String,
    pub dense_experiment: String,
    pub raters_per_item: usize,
    pub claim_timeout_ms: u64,
    pub n_factors: usize,
}

impl Default for PredictionRequest {
    fn default() -> Self {
        Self {
            gsp_experiment: String::new(),
            dense_experiment: String::new(),
            raters_per_item: 5,
            claim_timeout_ms: DEFAULT_CLAIM_TIMEOUT_MS,
            n_factors: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub kind: ExperimentKind,
    pub stimuli: Vec<StimulusRef>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gsp: Option<GspParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<StepParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense: Option<DenseSetup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationSetup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<PredictionRequest>,
}

fn default_profile() -> String {
    "default".into()
}

fn default_sample_rate() -> u32 {
    DEFAULT_SAMPLE_RATE
}

fn bad(msg: impl Into<String>) -> ApiError {
    ApiError::BadRequest(msg.into())
}

fn is_url(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://")
}

impl Manifest {
    pub fn from_json(text: &str) -> ApiResult<Self> {
        serde_json::from_str(text).map_err(|e| bad(format!("manifest: {e}")))
    }

    pub fn effect_profile(&self) -> ApiResult<EffectProfile> {
        EffectProfile::by_name(&self.profile).ok_or_else(|| bad(format!("unknown effect profile {:?}", self.profile)))
    }

    pub fn stimulus_ids(&self) -> Vec<String> {
        self.stimuli.iter().map(|s| s.id.clone()).collect()
    }

    pub fn stimulus(&self, id: &str) -> Option<&StimulusRef> {
        self.stimuli.iter().find(|s| s.id == id)
    }

    /// Check the manifest and fill in defaults: protocol parameters and one
    /// sentence per stimulus. The result is what gets stored.
    pub fn normalize(mut self, assets: Option<&Path>) -> ApiResult<Self> {
        if self.stimuli.is_empty() {
            return Err(bad("manifest lists no stimuli"));
        }
        let mut seen = BTreeSet::new();
        for s in &self.stimuli {
            if s.id.is_empty() || s.id.chars().any(|c| c.is_whitespace() || c == '/') {
                return Err(bad(format!("invalid stimulus id {:?}", s.id)));
            }
            if !seen.insert(s.id.clone()) {
                return Err(bad(format!("duplicate stimulus id {:?}", s.id)));
            }
            if let Some(img) = &s.image {
                if !is_url(img) {
                    let path = assets.map_or_else(|| Path::new(img).to_path_buf(), |a| a.join(img));
                    if img.contains("..") || !path.is_file() {
                        return Err(bad(format!("image {img:?} for {} not found", s.id)));
                    }
                }
            }
        }
        let profile = self.effect_profile()?;
        if self.sample_rate < 8000 || self.sample_rate > 96_000 {
            return Err(bad(format!("sample_rate {} outside 8000..=96000", self.sample_rate)));
        }
        let seed = self.seed;
        for (i, s) in self.stimuli.iter_mut().enumerate() {
            match &s.sentence {
                Some(t) if t.trim().is_empty() => return Err(bad(format!("empty sentence for {}", s.id))),
                Some(_) => {}
                None => s.sentence = Some(sentence_for(seed, i).to_string()),
            }
            if let Some(v) = &s.voice {
                check_config(v, &profile)?;
            }
        }

        match self.kind {
            ExperimentKind::Gsp => {
                let p = self.gsp.get_or_insert_with(GspParams::default);
                if p.raters_per_node == 0 || p.max_iterations == 0 {
                    return Err(bad("gsp raters_per_node and max_iterations must be positive"));
                }
            }
            ExperimentKind::Step => {
                let p = self.step.get_or_insert_with(StepParams::default);
                if p.participants_per_stimulus == 0 || p.flags_to_remove == 0 {
                    return Err(bad("step participants_per_stimulus and flags_to_remove must be positive"));
                }
            }
            ExperimentKind::Dense => {
                let p = self.dense.get_or_insert_with(DenseSetup::default);
                if p.dims_per_trial == 0 || p.max_trials == 0 || p.ratings_per_cell == 0 {
                    return Err(bad("dense dims_per_trial, max_trials and ratings_per_cell must be positive"));
                }
                if p.modality == Modality::Voice && self.stimuli.iter().any(|s| s.voice.is_none()) {
                    return Err(bad("voice-modality dense experiments need a voice per stimulus"));
                }
            }
            ExperimentKind::Validation => {
                let v = self.validation.as_ref().ok_or_else(|| bad("validation experiments need `validation`"))?;
                if v.items.is_empty() || v.raters_per_item == 0 {
                    return Err(bad("validation needs items and a positive raters_per_item"));
                }
                for it in &v.items {
                    if !seen.contains(&it.stimulus_id) {
                        return Err(bad(format!("validation item refers to unknown stimulus {:?}", it.stimulus_id)));
                    }
                    check_config(&it.config, &profile)?;
                }
            }
            ExperimentKind::Prediction => {
                let p = self.prediction.as_ref().ok_or_else(|| bad("prediction experiments need `prediction`"))?;
                if p.gsp_experiment.is_empty() || p.dense_experiment.is_empty() || p.raters_per_item == 0 {
                    return Err(bad("prediction needs gsp_experiment, dense_experiment and raters_per_item"));
                }
            }
        }
        Ok(self)
    }
}

pub fn check_config(c: &VoiceConfig, profile: &EffectProfile) -> ApiResult<()> {
    let finite = c.latent.iter().all(|v| v.is_finite()) && c.speed.is_finite() && c.effect_amount.is_finite();
    if !finite {
        return Err(bad("voice config has non-finite values"));
    }
    if c.effect_id >= profile.len() {
        return Err(bad(format!("effect_id {} outside profile {}", c.effect_id, profile.name)));
    }
    Ok(())
}
