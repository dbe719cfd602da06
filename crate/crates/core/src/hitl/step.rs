//! STEP-Tag: stimuli are annotated sequentially by a fixed number of
//! participants, each of whom may create tags, star-rate visible tags and
//! flag inappropriate ones.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hitl::{TrialId, DEFAULT_CLAIM_TIMEOUT_MS};
use crate::labels::LITERATURE_TERMS;

pub const MAX_TAG_LEN: usize = 40;
pub const AUTOCOMPLETE_LIMIT: usize = 10;

/// Trim, lowercase and collapse inner whitespace. Tags may contain letters,
/// hyphens and single spaces, at most 40 characters.
pub fn normalize_tag(raw: &str) -> Result<String> {
    let text = raw
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    let ok = !text.is_empty()
        && text.chars().count() <= MAX_TAG_LEN
        && text.chars().all(|c| c.is_alphabetic() || c == '-' || c == ' ')
        && text.chars().any(char::is_alphabetic);
    if ok {
        Ok(text)
    } else {
        Err(Error::MalformedTag(raw.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagStatus {
    Visible,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagRecord {
    pub text: String,
    pub created_by: String,
    pub stars: Vec<u8>,
    pub flags: usize,
    pub flagged_by: BTreeSet<String>,
    pub status: TagStatus,
    /// How many times the tag was (re)created on this stimulus.
    pub generation: usize,
}

impl TagRecord {
    fn fresh(text: &str, creator: &str, generation: usize) -> Self {
        Self {
            text: text.to_string(),
            created_by: creator.to_string(),
            stars: Vec::new(),
            flags: 0,
            flagged_by: BTreeSet::new(),
            status: TagStatus::Visible,
            generation,
        }
    }

    pub fn is_visible(&self) -> bool {
        self.status == TagStatus::Visible
    }

    pub fn mean_stars(&self) -> Option<f64> {
        if self.stars.is_empty() {
            None
        } else {
            Some(self.stars.iter().map(|&s| s as f64).sum::<f64>() / self.stars.len() as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum TagAction {
    Create { text: String },
    Rate { text: String, stars: u8 },
    Flag { text: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepParams {
    pub participants_per_stimulus: usize,
    pub flags_to_remove: usize,
    pub claim_timeout_ms: u64,
}

impl Default for StepParams {
    fn default() -> Self {
        Self {
            participants_per_stimulus: 10,
            flags_to_remove: 2,
            claim_timeout_ms: DEFAULT_CLAIM_TIMEOUT_MS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepHolder {
    pub trial: TrialId,
    pub participant: String,
    pub expires_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStimulus {
    pub id: String,
    pub tags: BTreeMap<String, TagRecord>,
    pub holder: Option<StepHolder>,
    pub annotators: Vec<String>,
}

impl StepStimulus {
    pub fn visible_tags(&self) -> impl Iterator<Item = &TagRecord> {
        self.tags.values().filter(|t| t.is_visible())
    }

    fn apply(&mut self, participant: &str, action: &TagAction, flags_to_remove: usize) -> Result<()> {
        match action {
            TagAction::Create { text } => {
                let text = normalize_tag(text)?;
                match self.tags.get_mut(&text) {
                    Some(t) if t.is_visible() => return Err(Error::TagExists(text)),
                    Some(t) => *t = TagRecord::fresh(&text, participant, t.generation + 1),
                    None => {
                        self.tags.insert(text.clone(), TagRecord::fresh(&text, participant, 1));
                    }
                }
            }
            TagAction::Rate { text, stars } => {
                if !(1..=5).contains(stars) {
                    return Err(Error::InvalidStars(*stars));
                }
                let text = normalize_tag(text)?;
                match self.tags.get_mut(&text) {
                    Some(t) if t.is_visible() => t.stars.push(*stars),
                    _ => return Err(Error::TagNotVisible(text)),
                }
            }
            TagAction::Flag { text } => {
                let text = normalize_tag(text)?;
                let t = match self.tags.get_mut(&text) {
                    Some(t) if t.is_visible() => t,
                    _ => return Err(Error::TagNotVisible(text)),
                };
                if !t.flagged_by.insert(participant.to_string()) {
                    return Err(Error::DuplicateFlag {
                        participant: participant.to_string(),
                        tag: text,
                    });
                }
                t.flags += 1;
                if t.flags >= flags_to_remove {
                    t.status = TagStatus::Removed;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrial {
    pub trial_id: TrialId,
    pub stimulus_id: String,
    pub position: usize,
    pub visible_tags: Vec<TagRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub stimulus_id: String,
    pub annotators: usize,
    pub stimulus_complete: bool,
    pub visible_tags: Vec<String>,
}

/// One STEP-Tag experiment over a fixed stimulus list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTag {
    pub params: StepParams,
    pub stimuli: Vec<StepStimulus>,
    /// Creations per tag text across the experiment (autocomplete ranking).
    pub usage: BTreeMap<String, usize>,
    pub answered: BTreeSet<TrialId>,
    pub next_trial_id: TrialId,
}

impl StepTag {
    pub fn new(stimuli: &[String], params: StepParams) -> Self {
        Self {
            params,
            stimuli: stimuli
                .iter()
                .map(|id| StepStimulus {
                    id: id.clone(),
                    tags: BTreeMap::new(),
                    holder: None,
                    annotators: Vec::new(),
                })
                .collect(),
            usage: BTreeMap::new(),
            answered: BTreeSet::new(),
            next_trial_id: 1,
        }
    }

    pub fn stimulus(&self, id: &str) -> Result<&StepStimulus> {
        self.stimuli
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::UnknownStimulus(id.to_string()))
    }

    fn stimulus_done(&self, s: &StepStimulus) -> bool {
        s.annotators.len() >= self.params.participants_per_stimulus
    }

    pub fn is_complete(&self) -> bool {
        self.stimuli.iter().all(|s| self.stimulus_done(s))
    }

    fn trial_view(&self, idx: usize) -> StepTrial {
        let s = &self.stimuli[idx];
        StepTrial {
            trial_id: s.holder.as_ref().expect("held").trial,
            stimulus_id: s.id.clone(),
            position: s.annotators.len(),
            visible_tags: s.visible_tags().cloned().collect(),
        }
    }

    /// Take the slot of the first stimulus that is free, unfinished and not
    /// yet annotated by `participant`.
    pub fn next_trial(&mut self, participant: &str, now_ms: u64) -> Result<StepTrial> {
        if self.is_complete() {
            return Err(Error::ExperimentComplete);
        }
        for s in &mut self.stimuli {
            if s.holder.as_ref().is_some_and(|h| h.expires_at_ms <= now_ms) {
                s.holder = None;
            }
        }
        if let Some(i) = self
            .stimuli
            .iter()
            .position(|s| s.holder.as_ref().is_some_and(|h| h.participant == participant))
        {
            return Ok(self.trial_view(i));
        }
        let Some(i) = (0..self.stimuli.len()).find(|&i| {
            let s = &self.stimuli[i];
            s.holder.is_none()
                && !self.stimulus_done(s)
                && !s.annotators.iter().any(|a| a == participant)
        }) else {
            return Err(Error::NoOpenSlot);
        };
        let trial = self.next_trial_id;
        self.next_trial_id += 1;
        self.stimuli[i].holder = Some(StepHolder {
            trial,
            participant: participant.to_string(),
            expires_at_ms: now_ms + self.params.claim_timeout_ms,
        });
        Ok(self.trial_view(i))
    }

    /// Apply a batch of actions atomically: either all succeed or none is
    /// recorded. Submitting releases the slot to the next annotator.
    pub fn submit(&mut self, trial: TrialId, actions: &[TagAction]) -> Result<StepOutcome> {
        if self.answered.contains(&trial) {
            return Err(Error::DuplicateResponse {
                participant: String::new(),
                target: format!("trial {trial}"),
            });
        }
        let idx = self
            .stimuli
            .iter()
            .position(|s| s.holder.as_ref().is_some_and(|h| h.trial == trial))
            .ok_or(Error::UnknownTrial(trial))?;
        let participant = self.stimuli[idx].holder.as_ref().expect("held").participant.clone();
        let mut draft = self.stimuli[idx].clone();
        let mut created = Vec::new();
        for a in actions {
            draft.apply(&participant, a, self.params.flags_to_remove)?;
            if let TagAction::Create { text } = a {
                created.push(normalize_tag(text)?);
            }
        }
        draft.holder = None;
        draft.annotators.push(participant);
        for t in created {
            *self.usage.entry(t).or_default() += 1;
        }
        self.stimuli[idx] = draft;
        self.answered.insert(trial);
        let s = &self.stimuli[idx];
        Ok(StepOutcome {
            stimulus_id: s.id.clone(),
            annotators: s.annotators.len(),
            stimulus_complete: self.stimulus_done(s),
            visible_tags: s.visible_tags().map(|t| t.text.clone()).collect(),
        })
    }

    /// Prefix completions from tags created in this experiment and the
    /// literature term list: exact match first, then by creation count, then
    /// alphabetically; at most 10.
    pub fn autocomplete(&self, prefix: &str) -> Vec<String> {
        autocomplete(&self.usage, prefix)
    }
}

pub fn autocomplete(usage: &BTreeMap<String, usize>, prefix: &str) -> Vec<String> {
    let p = prefix.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    if p.is_empty() {
        return Vec::new();
    }
    let mut pool: BTreeMap<&str, usize> = LITERATURE_TERMS.iter().map(|&t| (t, 0)).collect();
    for (t, &n) in usage {
        *pool.entry(t.as_str()).or_default() += n;
    }
    let mut hits: Vec<(&str, usize)> = pool.into_iter().filter(|(t, _)| t.starts_with(&p)).collect();
    hits.sort_by(|a, b| {
        (b.0 == p)
            .cmp(&(a.0 == p))
            .then(b.1.cmp(&a.1))
            .then(a.0.cmp(b.0))
    });
    hits.into_iter().take(AUTOCOMPLETE_LIMIT).map(|(t, _)| t.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum StepCommand {
    NextTrial { participant: String, at_ms: u64 },
    Submit { trial: TrialId, actions: Vec<TagAction> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepReply {
    Trial(StepTrial),
    Outcome(StepOutcome),
}

impl StepTag {
    pub fn apply(&mut self, cmd: &StepCommand) -> Result<StepReply> {
        match cmd {
            StepCommand::NextTrial { participant, at_ms } => {
                self.next_trial(participant, *at_ms).map(StepReply::Trial)
            }
            StepCommand::Submit { trial, actions } => self.submit(*trial, actions).map(StepReply::Outcome),
        }
    }

    /// Fold a command log over a fresh experiment. Commands that failed when
    /// first issued fail again and leave no trace, as they did originally.
    pub fn replay(stimuli: &[String], params: StepParams, log: &[StepCommand]) -> Self {
        let mut s = Self::new(stimuli, params);
        for c in log {
            let _ = s.apply(c);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn create(t: &str) -> TagAction {
        TagAction::Create { text: t.into() }
    }

    fn flag(t: &str) -> TagAction {
        TagAction::Flag { text: t.into() }
    }

    fn one() -> StepTag {
        StepTag::new(&["r1".to_string()], StepParams::default())
    }

    fn turn(s: &mut StepTag, who: &str, actions: &[TagAction]) -> Result<StepOutcome> {
        let t = s.next_trial(who, 0)?;
        s.submit(t.trial_id, actions)
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_tag("Friendly ").unwrap(), "friendly");
        assert_eq!(normalize_tag("  Sci-Fi   Robot").unwrap(), "sci-fi robot");
        assert!(normalize_tag("").is_err());
        assert!(normalize_tag("r2d2").is_err());
        assert!(normalize_tag("<script>").is_err());
        assert!(normalize_tag(&"a".repeat(41)).is_err());
        assert!(normalize_tag(&"a".repeat(40)).is_ok());
    }

    #[test]
    fn two_flags_remove_and_recreate_resets() {
        let mut s = one();
        turn(&mut s, "a", &[create("Creepy"), TagAction::Rate { text: "creepy".into(), stars: 4 }]).unwrap();
        turn(&mut s, "b", &[flag("creepy")]).unwrap();
        assert!(s.stimuli[0].tags["creepy"].is_visible());
        turn(&mut s, "c", &[flag("creepy")]).unwrap();
        assert_eq!(s.stimuli[0].tags["creepy"].status, TagStatus::Removed);
        turn(&mut s, "d", &[create("creepy")]).unwrap();
        let t = &s.stimuli[0].tags["creepy"];
        assert!(t.is_visible());
        assert_eq!((t.flags, t.stars.len(), t.generation), (0, 0, 2));
    }

    #[test]
    fn batch_is_atomic() {
        let mut s = one();
        turn(&mut s, "a", &[create("shiny")]).unwrap();
        let t = s.next_trial("b", 0).unwrap();
        let err = s.submit(t.trial_id, &[create("boxy"), TagAction::Rate { text: "nope".into(), stars: 3 }]);
        assert!(matches!(err, Err(Error::TagNotVisible(_))));
        assert!(!s.stimuli[0].tags.contains_key("boxy"));
        // slot still held by b
        s.submit(t.trial_id, &[]).unwrap();
    }

    #[test]
    fn same_participant_cannot_double_flag() {
        let mut s = one();
        turn(&mut s, "a", &[create("odd")]).unwrap();
        let t = s.next_trial("b", 0).unwrap();
        assert!(matches!(
            s.submit(t.trial_id, &[flag("odd"), flag("odd")]),
            Err(Error::DuplicateFlag { .. })
        ));
    }

    #[test]
    fn sequential_slot_and_completion() {
        let mut s = one();
        let t = s.next_trial("a", 0).unwrap();
        assert!(matches!(s.next_trial("b", 0), Err(Error::NoOpenSlot)));
        s.submit(t.trial_id, &[]).unwrap();
        assert!(matches!(s.next_trial("a", 0), Err(Error::NoOpenSlot)));
        for i in 1..10 {
            turn(&mut s, &format!("p{i}"), &[]).unwrap();
        }
        assert!(s.is_complete());
        assert!(matches!(s.next_trial("z", 0), Err(Error::ExperimentComplete)));
    }

    #[test]
    fn autocomplete_ranking() {
        let mut usage = BTreeMap::new();
        assert!(autocomplete(&usage, "frien").contains(&"friendly".to_string()));
        assert!(autocomplete(&usage, "zzz").is_empty());
        usage.insert("fuzzy".to_string(), 1);
        let hits = autocomplete(&usage, "fu");
        assert_eq!(hits[0], "fuzzy");
        assert!(hits.len() <= AUTOCOMPLETE_LIMIT);
    }

    #[test]
    fn replay_matches() {
        let stimuli = vec!["r1".to_string(), "r2".to_string()];
        let log = vec![
            StepCommand::NextTrial { participant: "a".into(), at_ms: 5 },
            StepCommand::Submit { trial: 1, actions: vec![create("loud")] },
            StepCommand::NextTrial { participant: "b".into(), at_ms: 9 },
            StepCommand::Submit { trial: 2, actions: vec![flag("loud")] },
        ];
        let mut live = StepTag::new(&stimuli, StepParams::default());
        for c in &log {
            live.apply(c).unwrap();
        }
        assert_eq!(StepTag::replay(&stimuli, StepParams::default(), &log), live);
    }
}
