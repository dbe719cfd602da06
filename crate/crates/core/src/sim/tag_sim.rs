use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hitl::derive_seed;
use crate::hitl::step::{StepCommand, StepParams, StepTag, TagAction};
use crate::sim::world::{tag_applies, OracleWorld};

pub struct TagSimRun {
    pub experiment: StepTag,
    pub log: Vec<StepCommand>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagSimReport {
    pub stimuli: usize,
    pub visible_tags: usize,
    pub removed_tags: usize,
    /// Mean tag-applies probability of visible tags minus that of removed ones.
    pub fit_gap: f64,
}

/// STEP-Tag over `stimuli` (world indices). Each simulated annotator stars
/// every visible tag by how well it fits, flags clear misfits, and adds up to
/// two new tags drawn from the world lexicon.
pub fn run_tag_sim(world: &OracleWorld, stimuli: &[usize], participants_per_stimulus: usize, seed: u64) -> Result<TagSimRun> {
    let ids: Vec<String> = stimuli.iter().map(|&i| world.stimuli[i].clone()).collect();
    let params = StepParams {
        participants_per_stimulus,
        ..StepParams::default()
    };
    let mut exp = StepTag::new(&ids, params);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x7a]));
    let mut log = Vec::new();
    let mut participant = 0usize;
    while !exp.is_complete() {
        let pid = format!("tagger-{participant:05}");
        let trial = match exp.next_trial(&pid, 0) {
            Ok(t) => t,
            Err(Error::NoOpenSlot) => {
                participant += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        log.push(StepCommand::NextTrial {
            participant: pid.clone(),
            at_ms: 0,
        });
        let f = &world.features[stimuli[ids.iter().position(|s| *s == trial.stimulus_id).expect("own stimulus")]];
        let fit = |text: &str| {
            world
                .lexicon
                .iter()
                .find(|t| t.text == text)
                .map_or(0.5, |t| tag_applies(t, f))
        };
        let mut actions = Vec::new();
        for tag in &trial.visible_tags {
            let p = fit(&tag.text);
            if p < 0.15 && rng.random_bool(0.8) {
                actions.push(TagAction::Flag { text: tag.text.clone() });
            } else {
                let stars = (1.0 + 4.0 * p + rng.random_range(-0.5..0.5)).round().clamp(1.0, 5.0) as u8;
                actions.push(TagAction::Rate {
                    text: tag.text.clone(),
                    stars,
                });
            }
        }
        let visible: BTreeSet<&str> = trial.visible_tags.iter().map(|t| t.text.as_str()).collect();
        let mut created = BTreeSet::new();
        for _ in 0..2 {
            // mostly fitting tags, occasionally a random one
            let candidates: Vec<&str> = world
                .lexicon
                .iter()
                .filter(|t| !visible.contains(t.text.as_str()) && !created.contains(t.text.as_str()))
                .filter(|t| rng.random_bool(0.1) || tag_applies(t, f) > 0.8)
                .map(|t| t.text.as_str())
                .collect();
            if candidates.is_empty() {
                break;
            }
            let pick = candidates[rng.random_range(0..candidates.len())];
            created.insert(pick);
            actions.push(TagAction::Create { text: pick.to_string() });
        }
        exp.submit(trial.trial_id, &actions)?;
        log.push(StepCommand::Submit {
            trial: trial.trial_id,
            actions,
        });
        participant += 1;
    }
    Ok(TagSimRun { experiment: exp, log })
}

impl TagSimRun {
    /// Visible tag set per stimulus, in stimulus order.
    pub fn tag_sets(&self) -> Vec<BTreeSet<String>> {
        self.experiment
            .stimuli
            .iter()
            .map(|s| s.visible_tags().map(|t| t.text.clone()).collect())
            .collect()
    }

    pub fn report(&self, world: &OracleWorld) -> TagSimReport {
        let (mut vis, mut rem) = (Vec::new(), Vec::new());
        for s in &self.experiment.stimuli {
            let Some(i) = world.index_of(&s.id) else { continue };
            for t in s.tags.values() {
                let p = world
                    .lexicon
                    .iter()
                    .find(|l| l.text == t.text)
                    .map_or(0.5, |l| tag_applies(l, &world.features[i]));
                if t.is_visible() {
                    vis.push(p);
                } else {
                    rem.push(p);
                }
            }
        }
        let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        TagSimReport {
            stimuli: self.experiment.stimuli.len(),
            visible_tags: vis.len(),
            removed_tags: rem.len(),
            fit_gap: mean(&vis) - mean(&rem),
        }
    }
}
