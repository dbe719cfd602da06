use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hitl::gsp::{mean_standardized_diff, GspCommand, GspExperiment, GspParams};
use crate::hitl::derive_seed;
use crate::sim::world::{grid_distance, oracle_match_rating, oracle_slider_response, OracleWorld};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub stimulus_id: String,
    pub initial_distance: f64,
    pub final_distance: f64,
    /// First node index whose config equals the ideal voice.
    pub converged_at: Option<usize>,
    /// Oracle match rating of every node's config, node 0 first.
    pub ratings: Vec<u8>,
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GspSimReport {
    pub sigma: f64,
    pub raters_per_node: usize,
    pub max_iterations: usize,
    /// Mean standardized slider difference per iteration.
    pub mean_standardized_diff: Vec<f64>,
    /// Mean distance-to-ideal per node index.
    pub mean_distance: Vec<f64>,
    /// Mean oracle match rating per node index.
    pub mean_rating: Vec<f64>,
    pub chains: Vec<ChainSummary>,
}

impl GspSimReport {
    /// Largest `converged_at` when every chain converged.
    pub fn all_converged_within(&self) -> Option<usize> {
        self.chains.iter().map(|c| c.converged_at).try_fold(0, |m, c| c.map(|c| m.max(c)))
    }

    pub fn mean_final_distance(&self) -> f64 {
        self.chains.iter().map(|c| c.final_distance).sum::<f64>() / self.chains.len().max(1) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,mean_standardized_diff,mean_distance,mean_rating\n");
        for i in 0..self.mean_distance.len() {
            let diff = self
                .mean_standardized_diff
                .get(i)
                .map_or(String::new(), |d| d.to_string());
            s.push_str(&format!("{i},{diff},{},{}\n", self.mean_distance[i], self.mean_rating[i]));
        }
        s
    }
}

pub struct GspSimRun {
    pub experiment: GspExperiment,
    pub log: Vec<GspCommand>,
    pub report: GspSimReport,
}

/// Drive a full GSP experiment over `stimuli` (world indices) with oracle
/// raters. Participants come from a rotating pool; a participant that is
/// capped or has no eligible slot is replaced by a fresh one.
pub fn run_gsp_sim(
    world: &OracleWorld,
    stimuli: &[usize],
    raters_per_node: usize,
    max_iterations: usize,
    seed: u64,
) -> Result<GspSimRun> {
    let params = GspParams {
        raters_per_node,
        max_iterations,
        ..GspParams::default()
    };
    let ids: Vec<String> = stimuli.iter().map(|&i| world.stimuli[i].clone()).collect();
    let mut exp = GspExperiment::new(&ids, params, world.profile.clone(), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x51]));
    let mut log = Vec::new();
    let pool = raters_per_node.max(1) * 4;
    let mut base = 0usize;
    let mut turn = 0usize;
    let mut misses = 0usize;
    while !exp.is_complete() {
        let participant = format!("agent-{:05}", base + turn % pool);
        turn += 1;
        let cmd = GspCommand::NextTrial {
            participant: participant.clone(),
            at_ms: 0,
        };
        let trial = match exp.next_trial(&participant, 0) {
            Ok(t) => t,
            Err(Error::ParticipantCap(_) | Error::NoOpenSlot) => {
                misses += 1;
                if misses > pool {
                    base += pool;
                    misses = 0;
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        misses = 0;
        log.push(cmd);
        let stim = stimuli[trial.chain];
        let position = oracle_slider_response(world, stim, &trial.base_config, trial.active_dim, &mut rng);
        exp.respond(trial.trial_id, position)?;
        log.push(GspCommand::Respond {
            trial: trial.trial_id,
            position,
        });
    }

    let specs = exp.specs();
    let chains: Vec<ChainSummary> = exp
        .chains
        .iter()
        .zip(stimuli)
        .map(|(c, &s)| {
            let distances: Vec<f64> = c.configs().map(|cfg| grid_distance(world, s, cfg)).collect();
            ChainSummary {
                stimulus_id: c.stimulus_id.clone(),
                initial_distance: distances[0],
                final_distance: *distances.last().expect("chain has nodes"),
                converged_at: distances.iter().position(|&d| d == 0.0),
                ratings: c.configs().map(|cfg| oracle_match_rating(world, s, cfg)).collect(),
                distances,
            }
        })
        .collect();
    let len = chains.iter().map(|c| c.distances.len()).max().unwrap_or(0);
    let mean_at = |f: &dyn Fn(&ChainSummary, usize) -> Option<f64>| -> Vec<f64> {
        (0..len)
            .map(|i| {
                let v: Vec<f64> = chains.iter().filter_map(|c| f(c, i)).collect();
                v.iter().sum::<f64>() / v.len().max(1) as f64
            })
            .collect()
    };
    let report = GspSimReport {
        sigma: world.params.sigma,
        raters_per_node,
        max_iterations,
        mean_standardized_diff: mean_standardized_diff(&exp.chains, &specs)?,
        mean_distance: mean_at(&|c, i| c.distances.get(i).copied()),
        mean_rating: mean_at(&|c, i| c.ratings.get(i).map(|&r| r as f64)),
        chains,
    };
    Ok(GspSimRun {
        experiment: exp,
        log,
        report,
    })
}
