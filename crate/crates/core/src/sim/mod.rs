//! Simulated participants: an oracle world with known ideal voices, slider,
//! dense and tag raters, and the end-to-end prediction pipeline.

pub mod dense_sim;
pub mod gsp_sim;
pub mod pipeline;
pub mod tag_sim;
pub mod world;

use serde::{Deserialize, Serialize};

pub use dense_sim::run_dense_sim;
pub use gsp_sim::{run_gsp_sim, GspSimReport};
pub use pipeline::{run_pipeline, PipelineParams, PipelineReport};
pub use tag_sim::{run_tag_sim, TagSimReport};
pub use world::{
    grid_distance, oracle_match_rating, oracle_slider_response, OracleWorld, WorldKind, WorldParams,
};

use crate::error::Result;
use crate::hitl::derive_seed;

/// Input of `simulate`: one world plus which protocols to run on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub seed: u64,
    pub world: WorldParams,
    pub raters_per_node: usize,
    pub max_iterations: usize,
    pub pipeline: bool,
    pub dense_ratings_per_cell: u32,
    /// Run STEP-Tag with this many annotators per stimulus.
    pub tag_participants: Option<usize>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 1,
            world: WorldParams::default(),
            raters_per_node: 5,
            max_iterations: 16,
            pipeline: false,
            dense_ratings_per_cell: 5,
            tag_participants: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub gsp: GspSimReport,
    /// Largest iteration at which a chain first hit its ideal voice, when all did.
    pub converged_within: Option<usize>,
    pub pipeline: Option<PipelineReport>,
    pub tags: Option<TagSimReport>,
}

pub fn run_scenario(s: &Scenario) -> Result<ScenarioReport> {
    let world = OracleWorld::new(s.world.clone(), s.seed);
    let all: Vec<usize> = (0..world.stimuli.len()).collect();
    let gsp = run_gsp_sim(&world, &all, s.raters_per_node, s.max_iterations, derive_seed(s.seed, &[0x10]))?.report;
    let pipeline = if s.pipeline {
        let p = PipelineParams {
            raters_per_node: s.raters_per_node,
            max_iterations: s.max_iterations,
            dense_ratings_per_cell: s.dense_ratings_per_cell,
        };
        Some(run_pipeline(&world, &p, derive_seed(s.seed, &[0x11]))?)
    } else {
        None
    };
    let tags = match s.tag_participants {
        Some(n) => Some(run_tag_sim(&world, &all, n, derive_seed(s.seed, &[0x12]))?.report(&world)),
        None => None,
    };
    Ok(ScenarioReport {
        scenario: s.clone(),
        converged_within: gsp.all_converged_within(),
        gsp,
        pipeline,
        tags,
    })
}
