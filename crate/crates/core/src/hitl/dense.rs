//! Dense rating on the fixed 40-label vocabulary. Each trial shows one
//! stimulus with five dimensions; assignment keeps per-cell counts level.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hitl::{derive_seed, TrialId};
use crate::labels::{dimension_index, DENSE_DIMENSIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Image,
    Voice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub stimulus_id: String,
    pub modality: Modality,
    pub dimension: String,
    pub participant: String,
    pub value: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenseParams {
    pub dims_per_trial: usize,
    pub max_trials: usize,
}

impl Default for DenseParams {
    fn default() -> Self {
        Self {
            dims_per_trial: 5,
            max_trials: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseTrial {
    pub trial_id: TrialId,
    pub participant: String,
    pub stimulus_id: String,
    pub modality: Modality,
    pub dimensions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseExperiment {
    pub params: DenseParams,
    pub modality: Modality,
    pub seed: u64,
    pub stimuli: Vec<String>,
    /// Recorded ratings per (stimulus, dimension).
    pub counts: Vec<Vec<u32>>,
    /// Recorded plus outstanding assignments, used for balancing.
    pub load: Vec<Vec<u32>>,
    pub seen: BTreeSet<(String, usize, usize)>,
    pub trials_per_participant: BTreeMap<String, usize>,
    pub pending: BTreeMap<TrialId, DenseTrial>,
    pub ratings: Vec<RatingRecord>,
    pub next_trial_id: TrialId,
}

impl DenseExperiment {
    pub fn new(stimuli: &[String], modality: Modality, params: DenseParams, seed: u64) -> Self {
        let n = DENSE_DIMENSIONS.len();
        Self {
            params,
            modality,
            seed,
            stimuli: stimuli.to_vec(),
            counts: vec![vec![0; n]; stimuli.len()],
            load: vec![vec![0; n]; stimuli.len()],
            seen: BTreeSet::new(),
            trials_per_participant: BTreeMap::new(),
            pending: BTreeMap::new(),
            ratings: Vec::new(),
            next_trial_id: 1,
        }
    }

    pub fn total_ratings(&self) -> u64 {
        self.counts.iter().flatten().map(|&c| c as u64).sum()
    }

    /// Pick the stimulus whose least-covered unseen dimensions are least
    /// covered overall, then its `dims_per_trial` lowest-load dimensions.
    /// Ties are broken by a seeded shuffle.
    pub fn assign(&mut self, participant: &str) -> Result<DenseTrial> {
        let used = self.trials_per_participant.get(participant).copied().unwrap_or(0);
        if used >= self.params.max_trials {
            return Err(Error::ParticipantCap(participant.to_string()));
        }
        let k = self.params.dims_per_trial;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[self.next_trial_id]));
        let mut order: Vec<usize> = (0..self.stimuli.len()).collect();
        order.shuffle(&mut rng);

        let mut best: Option<(u64, usize, Vec<usize>)> = None;
        for s in order {
            let mut dims: Vec<usize> = (0..DENSE_DIMENSIONS.len())
                .filter(|&d| !self.seen.contains(&(participant.to_string(), s, d)))
                .collect();
            if dims.len() < k {
                continue;
            }
            dims.shuffle(&mut rng);
            dims.sort_by_key(|&d| self.load[s][d]);
            dims.truncate(k);
            let cost: u64 = dims.iter().map(|&d| self.load[s][d] as u64).sum();
            if best.as_ref().is_none_or(|b| cost < b.0) {
                best = Some((cost, s, dims));
            }
        }
        let (_, s, mut dims) = best.ok_or(Error::NoOpenSlot)?;
        dims.sort_unstable();
        for &d in &dims {
            self.load[s][d] += 1;
            self.seen.insert((participant.to_string(), s, d));
        }
        *self.trials_per_participant.entry(participant.to_string()).or_default() += 1;
        let trial = DenseTrial {
            trial_id: self.next_trial_id,
            participant: participant.to_string(),
            stimulus_id: self.stimuli[s].clone(),
            modality: self.modality,
            dimensions: dims.iter().map(|&d| DENSE_DIMENSIONS[d].to_string()).collect(),
        };
        self.next_trial_id += 1;
        self.pending.insert(trial.trial_id, trial.clone());
        Ok(trial)
    }

    /// Record one value per assigned dimension, in any order.
    pub fn submit(&mut self, trial: TrialId, values: &BTreeMap<String, u8>) -> Result<Vec<RatingRecord>> {
        let t = self.pending.get(&trial).ok_or(Error::UnknownTrial(trial))?;
        if values.len() != t.dimensions.len() {
            return Err(Error::WrongResponseCount {
                expected: t.dimensions.len(),
                got: values.len(),
            });
        }
        for (dim, &v) in values {
            if !t.dimensions.contains(dim) {
                return Err(Error::UnknownDimension(dim.clone()));
            }
            if !(1..=5).contains(&v) {
                return Err(Error::InvalidRating(v));
            }
        }
        let t = self.pending.remove(&trial).expect("checked");
        let s = self.stimuli.iter().position(|x| *x == t.stimulus_id).expect("known stimulus");
        let mut out = Vec::new();
        for dim in &t.dimensions {
            let d = dimension_index(dim).expect("assigned label");
            self.counts[s][d] += 1;
            let rec = RatingRecord {
                stimulus_id: t.stimulus_id.clone(),
                modality: t.modality,
                dimension: dim.clone(),
                participant: t.participant.clone(),
                value: values[dim],
            };
            self.ratings.push(rec.clone());
            out.push(rec);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum DenseCommand {
    Assign { participant: String },
    Submit { trial: TrialId, values: BTreeMap<String, u8> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DenseReply {
    Trial(DenseTrial),
    Recorded(Vec<RatingRecord>),
}

impl DenseExperiment {
    pub fn apply(&mut self, cmd: &DenseCommand) -> Result<DenseReply> {
        match cmd {
            DenseCommand::Assign { participant } => self.assign(participant).map(DenseReply::Trial),
            DenseCommand::Submit { trial, values } => self.submit(*trial, values).map(DenseReply::Recorded),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(n: usize) -> DenseExperiment {
        let stimuli: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        DenseExperiment::new(&stimuli, Modality::Voice, DenseParams::default(), 3)
    }

    fn answer(t: &DenseTrial, v: u8) -> BTreeMap<String, u8> {
        t.dimensions.iter().map(|d| (d.clone(), v)).collect()
    }

    #[test]
    fn five_distinct_dims_and_no_repeats() {
        let mut e = exp(2);
        let mut pairs = BTreeSet::new();
        for _ in 0..16 {
            let t = e.assign("p").unwrap();
            let dims: BTreeSet<_> = t.dimensions.iter().cloned().collect();
            assert_eq!(dims.len(), 5);
            for d in dims {
                assert!(pairs.insert((t.stimulus_id.clone(), d)));
            }
        }
        // 2 stimuli x 40 dims / 5 = 16 trials exhaust the participant
        assert!(matches!(e.assign("p"), Err(Error::NoOpenSlot)));
    }

    #[test]
    fn cap_is_enforced() {
        let mut e = exp(20);
        for _ in 0..60 {
            e.assign("p").unwrap();
        }
        assert!(matches!(e.assign("p"), Err(Error::ParticipantCap(_))));
    }

    #[test]
    fn submit_validates() {
        let mut e = exp(3);
        let t = e.assign("p").unwrap();
        assert!(matches!(e.submit(t.trial_id, &answer(&t, 6)), Err(Error::InvalidRating(6))));
        let mut partial = answer(&t, 3);
        partial.pop_first();
        assert!(e.submit(t.trial_id, &partial).is_err());
        let recs = e.submit(t.trial_id, &answer(&t, 3)).unwrap();
        assert_eq!(recs.len(), 5);
        assert_eq!(e.total_ratings(), 5);
        assert!(matches!(e.submit(t.trial_id, &answer(&t, 3)), Err(Error::UnknownTrial(_))));
    }
}
