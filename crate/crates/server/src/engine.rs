//! One hosted protocol state machine plus the command type its log stores.

use std::collections::BTreeMap;

use robovoice::hitl::dense::DenseReply;
use robovoice::hitl::gsp::GspReply;
use robovoice::hitl::step::StepReply;
use robovoice::hitl::validation::ValidationReply;
use robovoice::hitl::{
    DenseCommand, DenseExperiment, DenseParams, GspCommand, GspExperiment, StepCommand, StepTag, TagAction, TrialId,
    ValidationCommand, ValidationExperiment,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{ApiError, ApiResult};
use crate::manifest::{ExperimentKind, Manifest};
use crate::prediction::PredictionSetup;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Gsp(GspExperiment),
    Step(StepTag),
    Dense(DenseExperiment),
    Validation(ValidationExperiment),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Gsp(GspCommand),
    Step(StepCommand),
    Dense(DenseCommand),
    Validation(ValidationCommand),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Gsp(GspReply),
    Step(StepReply),
    Dense(DenseReply),
    Validation(ValidationReply),
}

impl Reply {
    pub fn to_json(&self) -> Value {
        match self {
            Reply::Gsp(r) => serde_json::to_value(r),
            Reply::Step(r) => serde_json::to_value(r),
            Reply::Dense(r) => serde_json::to_value(r),
            Reply::Validation(r) => serde_json::to_value(r),
        }
        .expect("reply serializes")
    }
}

fn bad(msg: impl Into<String>) -> ApiError {
    ApiError::BadRequest(msg.into())
}

/// A strict 1..=5 integer; anything else numeric is an invalid value.
fn rating_value(v: &Value, what: &str) -> ApiResult<u8> {
    let n = v.as_number().ok_or_else(|| bad(format!("{what} must be a number")))?;
    match n.as_u64() {
        Some(x @ 1..=5) => Ok(x as u8),
        _ => Err(ApiError::Unprocessable(format!("{what} = {n} is not an integer in 1..=5"))),
    }
}

impl Engine {
    pub fn create(manifest: &Manifest, setup: Option<&PredictionSetup>) -> ApiResult<Self> {
        let ids = manifest.stimulus_ids();
        let m = manifest;
        Ok(match m.kind {
            ExperimentKind::Gsp => Engine::Gsp(GspExperiment::new(
                &ids,
                m.gsp.clone().unwrap_or_default(),
                m.effect_profile()?,
                m.seed,
            )),
            ExperimentKind::Step => Engine::Step(StepTag::new(&ids, m.step.clone().unwrap_or_default())),
            ExperimentKind::Dense => {
                let d = m.dense.clone().unwrap_or_default();
                let params = DenseParams {
                    dims_per_trial: d.dims_per_trial,
                    max_trials: d.max_trials,
                };
                Engine::Dense(DenseExperiment::new(&ids, d.modality, params, m.seed))
            }
            ExperimentKind::Validation => {
                let v = m.validation.clone().ok_or_else(|| bad("missing validation setup"))?;
                Engine::Validation(ValidationExperiment::new(v.items, v.raters_per_item, v.claim_timeout_ms))
            }
            ExperimentKind::Prediction => {
                let s = setup.ok_or_else(|| bad("prediction experiment without a resolved setup"))?;
                let p = m.prediction.clone().unwrap_or_default();
                Engine::Validation(ValidationExperiment::new(s.items.clone(), p.raters_per_item, p.claim_timeout_ms))
            }
        })
    }

    pub fn is_complete(&self, manifest: &Manifest) -> bool {
        match self {
            Engine::Gsp(e) => e.is_complete(),
            Engine::Step(e) => e.is_complete(),
            Engine::Dense(e) => {
                let target = manifest.dense.as_ref().map_or(1, |d| d.ratings_per_cell);
                e.counts.iter().flatten().all(|&c| c >= target)
            }
            Engine::Validation(e) => e.is_complete(),
        }
    }

    pub fn next_trial_command(&self, participant: &str, now_ms: u64) -> Command {
        let participant = participant.to_string();
        match self {
            Engine::Gsp(_) => Command::Gsp(GspCommand::NextTrial {
                participant,
                at_ms: now_ms,
            }),
            Engine::Step(_) => Command::Step(StepCommand::NextTrial {
                participant,
                at_ms: now_ms,
            }),
            Engine::Dense(_) => Command::Dense(DenseCommand::Assign { participant }),
            Engine::Validation(_) => Command::Validation(ValidationCommand::NextTrial {
                participant,
                at_ms: now_ms,
            }),
        }
    }

    /// Turn a response body into a command. Missing or mistyped fields are
    /// 400; well-formed values outside the accepted set are 422.
    pub fn response_command(&self, trial: TrialId, body: &Value) -> ApiResult<Command> {
        let obj = body.as_object().ok_or_else(|| bad("response body must be a JSON object"))?;
        match self {
            Engine::Gsp(e) => {
                let v = obj.get("position").ok_or_else(|| bad("missing `position`"))?;
                let n = v.as_number().ok_or_else(|| bad("`position` must be a number"))?;
                let res = e.profile.specs()[0].resolution;
                let position = match n.as_u64() {
                    Some(p) if (p as usize) < res => p as usize,
                    _ => return Err(robovoice::Error::OffGrid(n.as_f64().unwrap_or(f64::NAN)).into()),
                };
                Ok(Command::Gsp(GspCommand::Respond { trial, position }))
            }
            Engine::Step(_) => {
                let v = obj.get("actions").ok_or_else(|| bad("missing `actions`"))?;
                let actions: Vec<TagAction> =
                    serde_json::from_value(v.clone()).map_err(|e| bad(format!("actions: {e}")))?;
                Ok(Command::Step(StepCommand::Submit { trial, actions }))
            }
            Engine::Dense(_) => {
                let v = obj.get("ratings").ok_or_else(|| bad("missing `ratings`"))?;
                let map = v.as_object().ok_or_else(|| bad("`ratings` must map dimension to value"))?;
                let values = map
                    .iter()
                    .map(|(k, v)| Ok((k.clone(), rating_value(v, k)?)))
                    .collect::<ApiResult<BTreeMap<String, u8>>>()?;
                Ok(Command::Dense(DenseCommand::Submit { trial, values }))
            }
            Engine::Validation(_) => {
                let rating = rating_value(obj.get("rating").ok_or_else(|| bad("missing `rating`"))?, "rating")?;
                Ok(Command::Validation(ValidationCommand::Respond { trial, rating }))
            }
        }
    }

    pub fn apply(&mut self, cmd: &Command) -> ApiResult<Reply> {
        Ok(match (self, cmd) {
            (Engine::Gsp(e), Command::Gsp(c)) => Reply::Gsp(e.apply(c)?),
            (Engine::Step(e), Command::Step(c)) => Reply::Step(e.apply(c)?),
            (Engine::Dense(e), Command::Dense(c)) => Reply::Dense(e.apply(c)?),
            (Engine::Validation(e), Command::Validation(c)) => Reply::Validation(e.apply(c)?),
            _ => return Err(bad("command does not match the experiment protocol")),
        })
    }

    pub fn progress(&self, manifest: &Manifest) -> Value {
        match self {
            Engine::Gsp(e) => json!({
                "chains": e.chains.len(),
                "complete_chains": e.chains.iter().filter(|c| c.is_complete()).count(),
                "iterations": e.chains.iter().map(|c| c.iterations()).collect::<Vec<_>>(),
            }),
            Engine::Step(e) => json!({
                "stimuli": e.stimuli.len(),
                "complete_stimuli": e.stimuli.iter().filter(|s| s.annotators.len() >= e.params.participants_per_stimulus).count(),
                "visible_tags": e.stimuli.iter().map(|s| s.visible_tags().count()).sum::<usize>(),
            }),
            Engine::Dense(e) => json!({
                "ratings": e.total_ratings(),
                "min_cell_count": e.counts.iter().flatten().min().copied().unwrap_or(0),
                "target_per_cell": manifest.dense.as_ref().map_or(1, |d| d.ratings_per_cell),
            }),
            Engine::Validation(e) => json!({
                "items": e.items.len(),
                "ratings": e.ratings.len(),
                "target_ratings": e.items.len() * e.raters_per_item,
                "condition_means": e.condition_means(),
            }),
        }
    }
}
