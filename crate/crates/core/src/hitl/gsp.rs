//! Gibbs Sampling with People: per-stimulus chains where each iteration
//! exposes one slider to a small group of raters and carries their aggregate
//! forward.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hitl::{derive_seed, TrialId, DEFAULT_CLAIM_TIMEOUT_MS};
use crate::voice_space::{
    slot_for_position, EffectProfile, SliderSpec, VoiceConfig, GRID_RESOLUTION, SLIDER_COUNT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reshuffle {
    /// New permutation of all sliders at every cycle start.
    #[default]
    PerCycle,
    /// Independent draw each iteration, never repeating the previous slider.
    PerIteration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GspParams {
    pub raters_per_node: usize,
    pub max_iterations: usize,
    /// Distinct stimuli one participant may visit.
    pub participant_cap: usize,
    pub claim_timeout_ms: u64,
    pub reshuffle: Reshuffle,
}

impl Default for GspParams {
    fn default() -> Self {
        Self {
            raters_per_node: 5,
            max_iterations: 16,
            participant_cap: 20,
            claim_timeout_ms: DEFAULT_CLAIM_TIMEOUT_MS,
            reshuffle: Reshuffle::PerCycle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GspResponse {
    pub participant: String,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainNode {
    pub iteration: usize,
    pub base_config: VoiceConfig,
    pub active_dim: usize,
    pub responses: Vec<GspResponse>,
    /// Aggregated grid position, set once all raters answered.
    pub aggregate: Option<usize>,
    /// Seed used to break a majority tie on the effect slider.
    pub tie_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainStatus {
    Active,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub stimulus_id: String,
    pub seed: u64,
    /// Slider order of the current cycle.
    pub dim_order: [usize; SLIDER_COUNT],
    pub nodes: Vec<ChainNode>,
    pub status: ChainStatus,
    pub max_iterations: usize,
    pub raters_per_node: usize,
    pub reshuffle: Reshuffle,
}

/// Permutation of the sliders for `cycle` of a chain seeded with `seed`.
pub fn cycle_order(seed: u64, cycle: usize) -> [usize; SLIDER_COUNT] {
    let mut order: [usize; SLIDER_COUNT] = std::array::from_fn(|i| i);
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1, cycle as u64])));
    order
}

fn median_position(positions: &[usize]) -> usize {
    let mut p = positions.to_vec();
    p.sort_unstable();
    // lower median for even counts keeps the result an observed position
    p[(p.len() - 1) / 2]
}

/// Aggregate one node's responses. Continuous sliders take the median
/// position; the effect selector takes the majority slot, ties broken by a
/// draw from `tie_seed`. The winning slot is reported as the lowest position
/// any rater chose for it, so only played values propagate.
pub fn gsp_aggregate(
    positions: &[usize],
    expected: usize,
    spec: &SliderSpec,
    tie_seed: u64,
) -> Result<usize> {
    if positions.len() != expected || expected == 0 {
        return Err(Error::WrongResponseCount {
            expected,
            got: positions.len(),
        });
    }
    if !spec.is_categorical() {
        return Ok(median_position(positions));
    }
    let n_slots = spec.hi as usize + 1;
    let mut votes: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for &p in positions {
        let e = votes.entry(slot_for_position(p, n_slots)).or_insert((0, p));
        e.0 += 1;
        e.1 = e.1.min(p);
    }
    let best = votes.values().map(|v| v.0).max().expect("non-empty");
    let tied: Vec<(usize, usize)> = votes
        .iter()
        .filter(|(_, v)| v.0 == best)
        .map(|(&slot, v)| (slot, v.1))
        .collect();
    let pick = if tied.len() == 1 {
        0
    } else {
        ChaCha8Rng::seed_from_u64(tie_seed).random_range(0..tied.len())
    };
    Ok(tied[pick].1)
}

impl Chain {
    pub fn new(stimulus_id: &str, initial: VoiceConfig, seed: u64, params: &GspParams) -> Self {
        let dim_order = cycle_order(seed, 0);
        let first_dim = match params.reshuffle {
            Reshuffle::PerCycle => dim_order[0],
            Reshuffle::PerIteration => Self::draw_dim(seed, 0, None),
        };
        Self {
            stimulus_id: stimulus_id.to_string(),
            seed,
            dim_order,
            nodes: vec![ChainNode {
                iteration: 0,
                base_config: initial,
                active_dim: first_dim,
                responses: Vec::new(),
                aggregate: None,
                tie_seed: None,
            }],
            status: ChainStatus::Active,
            max_iterations: params.max_iterations,
            raters_per_node: params.raters_per_node,
            reshuffle: params.reshuffle,
        }
    }

    fn draw_dim(seed: u64, iteration: usize, previous: Option<usize>) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[2, iteration as u64]));
        let choices: Vec<usize> = (0..SLIDER_COUNT).filter(|&d| Some(d) != previous).collect();
        choices[rng.random_range(0..choices.len())]
    }

    pub fn current(&self) -> &ChainNode {
        self.nodes.last().expect("chain has a node")
    }

    pub fn is_complete(&self) -> bool {
        self.status == ChainStatus::Complete
    }

    /// Number of completed iterations.
    pub fn iterations(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn final_config(&self) -> &VoiceConfig {
        &self.current().base_config
    }

    pub fn configs(&self) -> impl Iterator<Item = &VoiceConfig> {
        self.nodes.iter().map(|n| &n.base_config)
    }

    /// Record one rater's grid position for the current node. Aggregates and
    /// advances when the node is full; returns the aggregate in that case.
    pub fn submit(
        &mut self,
        participant: &str,
        position: usize,
        specs: &[SliderSpec; SLIDER_COUNT],
    ) -> Result<Option<usize>> {
        if self.is_complete() {
            return Err(Error::ChainComplete(self.stimulus_id.clone()));
        }
        if position >= GRID_RESOLUTION {
            return Err(Error::OffGrid(position as f64));
        }
        let k = self.raters_per_node;
        let node = self.nodes.last_mut().expect("chain has a node");
        if node.responses.iter().any(|r| r.participant == participant) {
            return Err(Error::DuplicateResponse {
                participant: participant.to_string(),
                target: format!("{}#{}", self.stimulus_id, node.iteration),
            });
        }
        if node.responses.len() >= k {
            return Err(Error::NoOpenSlot);
        }
        node.responses.push(GspResponse {
            participant: participant.to_string(),
            position,
        });
        if node.responses.len() < k {
            return Ok(None);
        }
        let agg = self.aggregate(specs)?;
        self.advance(specs)?;
        Ok(Some(agg))
    }

    /// Aggregate the current node (must hold exactly `raters_per_node` responses).
    pub fn aggregate(&mut self, specs: &[SliderSpec; SLIDER_COUNT]) -> Result<usize> {
        let k = self.raters_per_node;
        let tie_seed = derive_seed(self.seed, &[3, self.nodes.len() as u64 - 1]);
        let node = self.nodes.last_mut().expect("chain has a node");
        let positions: Vec<usize> = node.responses.iter().map(|r| r.position).collect();
        let agg = gsp_aggregate(&positions, k, &specs[node.active_dim], tie_seed)?;
        node.aggregate = Some(agg);
        if specs[node.active_dim].is_categorical() {
            node.tie_seed = Some(tie_seed);
        }
        Ok(agg)
    }

    /// Append the next node: previous config with the active slider set to
    /// the aggregate. Completes the chain at `max_iterations`.
    pub fn advance(&mut self, specs: &[SliderSpec; SLIDER_COUNT]) -> Result<()> {
        if self.is_complete() {
            return Err(Error::ChainComplete(self.stimulus_id.clone()));
        }
        let node = self.current();
        let agg = node.aggregate.ok_or(Error::NotAggregated)?;
        let config = node.base_config.with_position(specs, node.active_dim, agg)?;
        let iteration = node.iteration + 1;
        let prev_dim = node.active_dim;
        let active_dim = match self.reshuffle {
            Reshuffle::PerCycle => {
                let step = iteration % SLIDER_COUNT;
                if step == 0 {
                    self.dim_order = cycle_order(self.seed, iteration / SLIDER_COUNT);
                }
                self.dim_order[step]
            }
            Reshuffle::PerIteration => Self::draw_dim(self.seed, iteration, Some(prev_dim)),
        };
        self.nodes.push(ChainNode {
            iteration,
            base_config: config,
            active_dim,
            responses: Vec::new(),
            aggregate: None,
            tie_seed: None,
        });
        if self.iterations() >= self.max_iterations {
            self.status = ChainStatus::Complete;
        }
        Ok(())
    }
}

/// Per-iteration change of the active slider between consecutive nodes,
/// divided by the slider's range. The effect selector counts 1 for a slot
/// change and 0 otherwise.
pub fn standardized_diff(chain: &Chain, specs: &[SliderSpec; SLIDER_COUNT]) -> Result<Vec<f64>> {
    if chain.nodes.len() < 2 {
        return Err(Error::TooFew {
            what: "chain nodes",
            needed: 2,
            got: chain.nodes.len(),
        });
    }
    Ok(chain
        .nodes
        .windows(2)
        .map(|w| {
            let d = w[0].active_dim;
            let spec = &specs[d];
            let (a, b) = (&w[0].base_config, &w[1].base_config);
            if spec.is_categorical() {
                if a.effect_id == b.effect_id {
                    0.0
                } else {
                    1.0
                }
            } else {
                (b.value(d) - a.value(d)).abs() / spec.range()
            }
        })
        .collect())
}

/// Mean standardized difference per iteration across chains. Chains shorter
/// than the longest contribute only to the iterations they reached.
pub fn mean_standardized_diff(chains: &[Chain], specs: &[SliderSpec; SLIDER_COUNT]) -> Result<Vec<f64>> {
    let series: Vec<Vec<f64>> = chains
        .iter()
        .map(|c| standardized_diff(c, specs))
        .collect::<Result<_>>()?;
    let len = series.iter().map(Vec::len).max().unwrap_or(0);
    Ok((0..len)
        .map(|i| {
            let vals: Vec<f64> = series.iter().filter_map(|s| s.get(i).copied()).collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GspClaim {
    pub chain: usize,
    pub iteration: usize,
    pub participant: String,
    pub expires_at_ms: u64,
}

/// What a participant is asked to do: move `active_dim` starting from
/// `base_config`, choosing one of `GRID_RESOLUTION` positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GspTrial {
    pub trial_id: TrialId,
    pub chain: usize,
    pub stimulus_id: String,
    pub iteration: usize,
    pub base_config: VoiceConfig,
    pub active_dim: usize,
    pub current_position: usize,
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GspOutcome {
    pub chain: usize,
    pub iteration: usize,
    pub aggregate: Option<usize>,
    pub chain_complete: bool,
}

/// All chains of one experiment plus trial claims.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GspExperiment {
    pub params: GspParams,
    pub profile: EffectProfile,
    pub chains: Vec<Chain>,
    pub claims: BTreeMap<TrialId, GspClaim>,
    pub answered: BTreeSet<TrialId>,
    pub visited: BTreeMap<String, BTreeSet<usize>>,
    pub next_trial_id: TrialId,
}

impl GspExperiment {
    /// One chain per stimulus, each starting from a uniformly random grid
    /// config drawn from `seed`.
    pub fn new(stimuli: &[String], params: GspParams, profile: EffectProfile, seed: u64) -> Self {
        let chains = stimuli
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let chain_seed = derive_seed(seed, &[0, i as u64]);
                let init = crate::voice_space::random_config_in(&profile, chain_seed);
                Chain::new(s, init, chain_seed, &params)
            })
            .collect();
        Self {
            params,
            profile,
            chains,
            claims: BTreeMap::new(),
            answered: BTreeSet::new(),
            visited: BTreeMap::new(),
            next_trial_id: 1,
        }
    }

    pub fn specs(&self) -> [SliderSpec; SLIDER_COUNT] {
        self.profile.specs()
    }

    pub fn is_complete(&self) -> bool {
        self.chains.iter().all(Chain::is_complete)
    }

    fn trial_for(&self, id: TrialId, claim: &GspClaim) -> GspTrial {
        let chain = &self.chains[claim.chain];
        let node = chain.current();
        GspTrial {
            trial_id: id,
            chain: claim.chain,
            stimulus_id: chain.stimulus_id.clone(),
            iteration: node.iteration,
            base_config: node.base_config.clone(),
            active_dim: node.active_dim,
            current_position: node.base_config.position(&self.specs(), node.active_dim),
            resolution: GRID_RESOLUTION,
        }
    }

    /// Claim an open rater slot for `participant`. A participant holding a
    /// live claim gets it back unchanged.
    pub fn next_trial(&mut self, participant: &str, now_ms: u64) -> Result<GspTrial> {
        if self.is_complete() {
            return Err(Error::ExperimentComplete);
        }
        self.claims.retain(|_, c| c.expires_at_ms > now_ms);
        if let Some((&id, c)) = self.claims.iter().find(|(_, c)| c.participant == participant) {
            let c = c.clone();
            return Ok(self.trial_for(id, &c));
        }
        let visited = self.visited.get(participant);
        let at_cap = visited.is_some_and(|v| v.len() >= self.params.participant_cap);
        let mut capped_out = false;
        let mut best: Option<usize> = None;
        for (i, chain) in self.chains.iter().enumerate() {
            if chain.is_complete() {
                continue;
            }
            let node = chain.current();
            if node.responses.iter().any(|r| r.participant == participant) {
                continue;
            }
            let held = self
                .claims
                .values()
                .filter(|c| c.chain == i && c.iteration == node.iteration)
                .count();
            if node.responses.len() + held >= chain.raters_per_node {
                continue;
            }
            if at_cap && !visited.is_some_and(|v| v.contains(&i)) {
                capped_out = true;
                continue;
            }
            // least advanced chain first keeps chains in step
            if best.is_none_or(|b| chain.nodes.len() < self.chains[b].nodes.len()) {
                best = Some(i);
            }
        }
        let Some(i) = best else {
            return Err(if capped_out {
                Error::ParticipantCap(participant.to_string())
            } else {
                Error::NoOpenSlot
            });
        };
        let id = self.next_trial_id;
        self.next_trial_id += 1;
        let claim = GspClaim {
            chain: i,
            iteration: self.chains[i].current().iteration,
            participant: participant.to_string(),
            expires_at_ms: now_ms + self.params.claim_timeout_ms,
        };
        self.visited.entry(participant.to_string()).or_default().insert(i);
        let trial = self.trial_for(id, &claim);
        self.claims.insert(id, claim);
        Ok(trial)
    }

    /// Submit a grid position for a claimed trial.
    pub fn respond(&mut self, trial: TrialId, position: usize) -> Result<GspOutcome> {
        if self.answered.contains(&trial) {
            return Err(Error::DuplicateResponse {
                participant: String::new(),
                target: format!("trial {trial}"),
            });
        }
        let claim = self.claims.get(&trial).ok_or(Error::UnknownTrial(trial))?.clone();
        if position >= GRID_RESOLUTION {
            return Err(Error::OffGrid(position as f64));
        }
        let specs = self.specs();
        let chain = &mut self.chains[claim.chain];
        if chain.current().iteration != claim.iteration {
            return Err(Error::NotClaimed(claim.participant));
        }
        let aggregate = chain.submit(&claim.participant, position, &specs)?;
        self.claims.remove(&trial);
        self.answered.insert(trial);
        Ok(GspOutcome {
            chain: claim.chain,
            iteration: claim.iteration,
            aggregate,
            chain_complete: chain.is_complete(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum GspCommand {
    NextTrial { participant: String, at_ms: u64 },
    Respond { trial: TrialId, position: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GspReply {
    Trial(GspTrial),
    Outcome(GspOutcome),
}

impl GspExperiment {
    pub fn apply(&mut self, cmd: &GspCommand) -> Result<GspReply> {
        match cmd {
            GspCommand::NextTrial { participant, at_ms } => {
                self.next_trial(participant, *at_ms).map(GspReply::Trial)
            }
            GspCommand::Respond { trial, position } => {
                self.respond(*trial, *position).map(GspReply::Outcome)
            }
        }
    }
}
