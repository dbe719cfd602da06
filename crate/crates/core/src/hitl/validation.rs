//! Match-rating trials: participants rate how well a voice suits a stimulus
//! on 1..5. Used to compare prediction conditions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hitl::TrialId;
use crate::voice_space::VoiceConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationItem {
    pub stimulus_id: String,
    /// Free label, e.g. a prediction condition.
    pub condition: String,
    pub config: VoiceConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationRating {
    pub item: usize,
    pub participant: String,
    pub rating: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationTrial {
    pub trial_id: TrialId,
    pub item: usize,
    pub stimulus_id: String,
    pub config: VoiceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationClaim {
    pub item: usize,
    pub participant: String,
    pub expires_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationExperiment {
    pub items: Vec<ValidationItem>,
    pub raters_per_item: usize,
    pub claim_timeout_ms: u64,
    pub ratings: Vec<ValidationRating>,
    pub claims: BTreeMap<TrialId, ValidationClaim>,
    pub answered: BTreeSet<TrialId>,
    pub next_trial_id: TrialId,
}

impl ValidationExperiment {
    pub fn new(items: Vec<ValidationItem>, raters_per_item: usize, claim_timeout_ms: u64) -> Self {
        Self {
            items,
            raters_per_item,
            claim_timeout_ms,
            ratings: Vec::new(),
            claims: BTreeMap::new(),
            answered: BTreeSet::new(),
            next_trial_id: 1,
        }
    }

    fn count(&self, item: usize) -> usize {
        self.ratings.iter().filter(|r| r.item == item).count()
    }

    pub fn is_complete(&self) -> bool {
        (0..self.items.len()).all(|i| self.count(i) >= self.raters_per_item)
    }

    fn view(&self, id: TrialId, item: usize) -> ValidationTrial {
        ValidationTrial {
            trial_id: id,
            item,
            stimulus_id: self.items[item].stimulus_id.clone(),
            config: self.items[item].config.clone(),
        }
    }

    /// Least-rated open item the participant has not rated yet.
    pub fn next_trial(&mut self, participant: &str, now_ms: u64) -> Result<ValidationTrial> {
        if self.is_complete() {
            return Err(Error::ExperimentComplete);
        }
        self.claims.retain(|_, c| c.expires_at_ms > now_ms);
        if let Some((&id, c)) = self.claims.iter().find(|(_, c)| c.participant == participant) {
            return Ok(self.view(id, c.item));
        }
        let best = (0..self.items.len())
            .filter(|&i| !self.ratings.iter().any(|r| r.item == i && r.participant == participant))
            .map(|i| (i, self.count(i) + self.claims.values().filter(|c| c.item == i).count()))
            .filter(|&(_, load)| load < self.raters_per_item)
            .min_by_key(|&(i, load)| (load, i))
            .map(|(i, _)| i)
            .ok_or(Error::NoOpenSlot)?;
        let id = self.next_trial_id;
        self.next_trial_id += 1;
        self.claims.insert(
            id,
            ValidationClaim {
                item: best,
                participant: participant.to_string(),
                expires_at_ms: now_ms + self.claim_timeout_ms,
            },
        );
        Ok(self.view(id, best))
    }

    pub fn respond(&mut self, trial: TrialId, rating: u8) -> Result<ValidationRating> {
        if self.answered.contains(&trial) {
            return Err(Error::DuplicateResponse {
                participant: String::new(),
                target: format!("trial {trial}"),
            });
        }
        if !(1..=5).contains(&rating) {
            return Err(Error::InvalidRating(rating));
        }
        let claim = self.claims.remove(&trial).ok_or(Error::UnknownTrial(trial))?;
        let r = ValidationRating {
            item: claim.item,
            participant: claim.participant,
            rating,
        };
        self.ratings.push(r.clone());
        self.answered.insert(trial);
        Ok(r)
    }

    /// Mean rating per condition label.
    pub fn condition_means(&self) -> BTreeMap<String, f64> {
        let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for r in &self.ratings {
            let e = acc.entry(self.items[r.item].condition.clone()).or_default();
            e.0 += r.rating as f64;
            e.1 += 1;
        }
        acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ValidationCommand {
    NextTrial { participant: String, at_ms: u64 },
    Respond { trial: TrialId, rating: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValidationReply {
    Trial(ValidationTrial),
    Rating(ValidationRating),
}

impl ValidationExperiment {
    pub fn apply(&mut self, cmd: &ValidationCommand) -> Result<ValidationReply> {
        match cmd {
            ValidationCommand::NextTrial { participant, at_ms } => {
                self.next_trial(participant, *at_ms).map(ValidationReply::Trial)
            }
            ValidationCommand::Respond { trial, rating } => self.respond(*trial, *rating).map(ValidationReply::Rating),
        }
    }
}
