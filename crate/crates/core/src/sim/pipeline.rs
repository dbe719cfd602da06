use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::predict::{predict_conditions, Condition, CorpusEntry, PredictionSet, CONDITIONS};
use crate::analysis::wilcoxon::{wilcoxon_signed_rank, WilcoxonMode, WilcoxonResult};
use crate::error::Result;
use crate::hitl::dense::Modality;
use crate::hitl::derive_seed;
use crate::hitl::profile::profiles;
use crate::sim::dense_sim::run_dense_sim;
use crate::sim::gsp_sim::{run_gsp_sim, GspSimReport};
use crate::sim::world::{oracle_match_rating, OracleWorld};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    pub raters_per_node: usize,
    pub max_iterations: usize,
    pub dense_ratings_per_cell: u32,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            raters_per_node: 5,
            max_iterations: 16,
            dense_ratings_per_cell: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub stimuli: Vec<String>,
    /// Oracle rating per condition, aligned with `stimuli`.
    pub ratings: BTreeMap<Condition, Vec<u8>>,
    pub means: BTreeMap<Condition, f64>,
    pub matched_vs_random: WilcoxonResult,
    pub predictions: Vec<PredictionSet>,
    pub gsp: GspSimReport,
}

impl PipelineReport {
    pub fn mean(&self, c: Condition) -> f64 {
        self.means[&c]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("stimulus");
        for c in CONDITIONS {
            s.push_str(&format!(",{}", serde_json::to_value(c).expect("enum").as_str().expect("str")));
        }
        s.push('\n');
        for (i, id) in self.stimuli.iter().enumerate() {
            s.push_str(id);
            for c in CONDITIONS {
                s.push_str(&format!(",{}", self.ratings[&c][i]));
            }
            s.push('\n');
        }
        s
    }
}

/// GSP chains for every world stimulus, dense image profiles from simulated
/// raters, the five prediction conditions per stimulus, then oracle match
/// ratings of each condition's voice.
pub fn run_pipeline(world: &OracleWorld, params: &PipelineParams, seed: u64) -> Result<PipelineReport> {
    let all: Vec<usize> = (0..world.stimuli.len()).collect();
    let gsp = run_gsp_sim(world, &all, params.raters_per_node, params.max_iterations, derive_seed(seed, &[1]))?;

    let truth: BTreeMap<String, Vec<f64>> = world
        .stimuli
        .iter()
        .cloned()
        .zip(world.features.iter().cloned())
        .collect();
    let dense = run_dense_sim(
        &truth,
        Modality::Image,
        params.dense_ratings_per_cell,
        world.params.rating_noise,
        derive_seed(seed, &[2]),
    )?;
    let profs = profiles(dense.ratings(), Modality::Image)?;

    let corpus: Vec<CorpusEntry> = gsp
        .experiment
        .chains
        .iter()
        .map(|c| CorpusEntry {
            stimulus_id: c.stimulus_id.clone(),
            profile: profs[&c.stimulus_id].clone(),
            chain_configs: c.configs().cloned().collect(),
            final_config: c.final_config().clone(),
        })
        .collect();

    let mut ratings: BTreeMap<Condition, Vec<u8>> = CONDITIONS.iter().map(|&c| (c, Vec::new())).collect();
    let mut predictions = Vec::new();
    for (i, entry) in corpus.iter().enumerate() {
        let set = predict_conditions(&entry.profile, &corpus, &world.profile, derive_seed(seed, &[3, i as u64]))?;
        for c in CONDITIONS {
            let cfg = set.get(c).expect("in-corpus target has every condition");
            ratings.get_mut(&c).expect("all conditions").push(oracle_match_rating(world, i, cfg));
        }
        predictions.push(set);
    }
    let means = ratings
        .iter()
        .map(|(&c, v)| (c, v.iter().map(|&x| x as f64).sum::<f64>() / v.len().max(1) as f64))
        .collect();
    let as_f64 = |c: Condition| -> Vec<f64> { ratings[&c].iter().map(|&x| x as f64).collect() };
    let matched_vs_random = wilcoxon_signed_rank(
        &as_f64(Condition::Matched),
        &as_f64(Condition::Random),
        WilcoxonMode::Auto,
    )?;
    Ok(PipelineReport {
        stimuli: world.stimuli.clone(),
        ratings,
        means,
        matched_vs_random,
        predictions,
        gsp: gsp.report,
    })
}
