//! Oracle participants that take part through a [`Store`] the way HTTP
//! clients do: claim a trial, answer it with a JSON body, repeat until the
//! experiment is complete.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robovoice::analysis::{wilcoxon_signed_rank, WilcoxonMode, WilcoxonResult};
use robovoice::hitl::dense::DenseReply;
use robovoice::hitl::gsp::GspReply;
use robovoice::hitl::validation::ValidationReply;
use robovoice::hitl::{derive_seed, GspParams, Modality};
use robovoice::labels::dimension_index;
use robovoice::sim::world::{oracle_dense_rating, oracle_match_rating, oracle_slider_response};
use robovoice::sim::{OracleWorld, WorldParams};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::engine::{Engine, Reply};
use crate::error::{ApiError, ApiResult};
use crate::manifest::{DenseSetup, ExperimentKind, Manifest, PredictionRequest, StimulusRef};
use crate::store::Store;

fn manifest(world: &OracleWorld, kind: ExperimentKind, seed: u64) -> Manifest {
    Manifest {
        kind,
        stimuli: world
            .stimuli
            .iter()
            .enumerate()
            .map(|(i, id)| StimulusRef {
                id: id.clone(),
                image: None,
                sentence: None,
                voice: Some(world.ideal_config(i)),
            })
            .collect(),
        seed,
        profile: world.profile.name.clone(),
        sample_rate: robovoice::dsp::DEFAULT_SAMPLE_RATE,
        gsp: None,
        step: None,
        dense: None,
        validation: None,
        prediction: None,
    }
}

pub fn gsp_manifest(world: &OracleWorld, raters_per_node: usize, max_iterations: usize, seed: u64) -> Manifest {
    Manifest {
        gsp: Some(GspParams {
            raters_per_node,
            max_iterations,
            ..GspParams::default()
        }),
        ..manifest(world, ExperimentKind::Gsp, seed)
    }
}

pub fn dense_manifest(world: &OracleWorld, ratings_per_cell: u32, seed: u64) -> Manifest {
    Manifest {
        dense: Some(DenseSetup {
            modality: Modality::Image,
            ratings_per_cell,
            ..DenseSetup::default()
        }),
        ..manifest(world, ExperimentKind::Dense, seed)
    }
}

/// Validation of predicted voices for every world stimulus.
pub fn prediction_manifest(world: &OracleWorld, gsp: &str, dense: &str, raters_per_item: usize, seed: u64) -> Manifest {
    Manifest {
        prediction: Some(PredictionRequest {
            gsp_experiment: gsp.into(),
            dense_experiment: dense.into(),
            raters_per_item,
            ..PredictionRequest::default()
        }),
        ..manifest(world, ExperimentKind::Prediction, seed)
    }
}

fn world_index(world: &OracleWorld, id: &str) -> ApiResult<usize> {
    world
        .index_of(id)
        .ok_or_else(|| ApiError::Internal(format!("stimulus {id} is not in the world")))
}

/// Run participants `agent-00000`, `agent-00001`, ... against experiment
/// `id` until it reports 410. A participant who gets 409 (nothing open for
/// them, or at their cap) is replaced by the next one. Returns the number
/// of answered trials.
pub fn run_agents(
    store: &Store,
    id: &str,
    mut answer: impl FnMut(&Reply) -> ApiResult<Value>,
) -> ApiResult<usize> {
    let mut participant = 0usize;
    let mut idle = 0usize;
    let mut answered = 0usize;
    loop {
        let pid = format!("agent-{participant:05}");
        let t = match store.next_trial(id, &pid) {
            Ok(t) => t,
            Err(ApiError::Gone(_)) => return Ok(answered),
            Err(ApiError::Conflict(_)) => {
                participant += 1;
                idle += 1;
                // every slot is held by someone else; nobody will free them
                if idle > 10_000 {
                    return Err(ApiError::Internal(format!("{id}: no participant can make progress")));
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        idle = 0;
        let body = answer(&t.reply)?;
        store.respond(&t.trial_id, &body, None)?;
        answered += 1;
    }
}

/// Slider responses: the ideal position plus Gaussian noise of the world's
/// sigma.
pub fn run_gsp_agents(store: &Store, id: &str, world: &OracleWorld, seed: u64) -> ApiResult<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0xa1]));
    run_agents(store, id, |r| match r {
        Reply::Gsp(GspReply::Trial(t)) => {
            let s = world_index(world, &t.stimulus_id)?;
            let p = oracle_slider_response(world, s, &t.base_config, t.active_dim, &mut rng);
            Ok(json!({ "position": p }))
        }
        _ => Err(ApiError::Internal("expected a gsp trial".into())),
    })
}

/// Dense ratings: the true attribute plus the world's rating noise.
pub fn run_dense_agents(store: &Store, id: &str, world: &OracleWorld, seed: u64) -> ApiResult<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0xa2]));
    run_agents(store, id, |r| match r {
        Reply::Dense(DenseReply::Trial(t)) => {
            let s = world_index(world, &t.stimulus_id)?;
            let ratings: BTreeMap<&str, u8> = t
                .dimensions
                .iter()
                .map(|d| {
                    let f = dimension_index(d).expect("canonical dimension");
                    (d.as_str(), oracle_dense_rating(world.features[s][f], world.params.rating_noise, &mut rng))
                })
                .collect();
            Ok(json!({ "ratings": ratings }))
        }
        _ => Err(ApiError::Internal("expected a dense trial".into())),
    })
}

/// Match ratings of the voice in each validation trial.
pub fn run_validation_agents(store: &Store, id: &str, world: &OracleWorld) -> ApiResult<usize> {
    run_agents(store, id, |r| match r {
        Reply::Validation(ValidationReply::Trial(t)) => {
            let s = world_index(world, &t.stimulus_id)?;
            Ok(json!({ "rating": oracle_match_rating(world, s, &t.config) }))
        }
        _ => Err(ApiError::Internal("expected a validation trial".into())),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub seed: u64,
    pub world: WorldParams,
    pub raters_per_node: usize,
    pub max_iterations: usize,
    pub ratings_per_cell: u32,
    pub raters_per_item: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            world: WorldParams::default(),
            raters_per_node: 5,
            max_iterations: 16,
            ratings_per_cell: 5,
            raters_per_item: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub gsp_experiment: String,
    pub dense_experiment: String,
    pub validation_experiment: String,
    pub trials: BTreeMap<String, usize>,
    /// Mean validation rating per condition.
    pub means: BTreeMap<String, f64>,
    /// Per-target mean ratings, matched against random.
    pub matched_vs_random: WilcoxonResult,
}

/// GSP, dense rating and prediction validation in one store, every trial
/// answered by oracle agents.
pub fn run_study(store: &Store, cfg: &StudyConfig) -> ApiResult<StudyReport> {
    let world = OracleWorld::new(cfg.world.clone(), cfg.seed);
    let gsp = store.create(gsp_manifest(&world, cfg.raters_per_node, cfg.max_iterations, cfg.seed))?;
    let dense = store.create(dense_manifest(&world, cfg.ratings_per_cell, cfg.seed))?;
    let mut trials = BTreeMap::new();
    trials.insert("gsp".to_string(), run_gsp_agents(store, &gsp, &world, cfg.seed)?);
    trials.insert("dense".to_string(), run_dense_agents(store, &dense, &world, cfg.seed)?);
    let val = store.create(prediction_manifest(&world, &gsp, &dense, cfg.raters_per_item, cfg.seed))?;
    trials.insert("validation".to_string(), run_validation_agents(store, &val, &world)?);

    let Engine::Validation(v) = store.state(&val)?.engine else {
        return Err(ApiError::Internal("prediction experiment hosts a validation engine".into()));
    };
    let mut per_target: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for r in &v.ratings {
        let item = &v.items[r.item];
        let e = per_target.entry((item.condition.clone(), item.stimulus_id.clone())).or_default();
        e.0 += r.rating as f64;
        e.1 += 1;
    }
    let series = |c: &str| -> Vec<f64> {
        world
            .stimuli
            .iter()
            .filter_map(|s| per_target.get(&(c.to_string(), s.clone())).map(|(t, n)| t / *n as f64))
            .collect()
    };
    let matched_vs_random = wilcoxon_signed_rank(&series("matched"), &series("random"), WilcoxonMode::Auto)?;
    Ok(StudyReport {
        gsp_experiment: gsp,
        dense_experiment: dense,
        validation_experiment: val,
        trials,
        means: v.condition_means(),
        matched_vs_random,
    })
}
