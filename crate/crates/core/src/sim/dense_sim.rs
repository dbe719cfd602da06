use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hitl::dense::{DenseCommand, DenseExperiment, DenseParams, Modality, RatingRecord};
use crate::hitl::derive_seed;
use crate::labels::dimension_index;
use crate::sim::world::oracle_dense_rating;

pub struct DenseSimRun {
    pub experiment: DenseExperiment,
    pub log: Vec<DenseCommand>,
}

impl DenseSimRun {
    pub fn ratings(&self) -> &[RatingRecord] {
        &self.experiment.ratings
    }
}

/// Dense rating with simulated raters until every (stimulus, dimension) cell
/// holds at least `ratings_per_cell` values. `truth` maps stimulus id to its
/// 40 true attribute values.
pub fn run_dense_sim(
    truth: &BTreeMap<String, Vec<f64>>,
    modality: Modality,
    ratings_per_cell: u32,
    noise: f64,
    seed: u64,
) -> Result<DenseSimRun> {
    let ids: Vec<String> = truth.keys().cloned().collect();
    let params = DenseParams::default();
    let mut exp = DenseExperiment::new(&ids, modality, params.clone(), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0xd1]));
    let mut log = Vec::new();
    let mut participant = 0usize;
    let done = |e: &DenseExperiment| e.counts.iter().flatten().all(|&c| c >= ratings_per_cell);
    while !done(&exp) {
        let pid = format!("rater-{participant:05}");
        let trial = match exp.assign(&pid) {
            Ok(t) => t,
            Err(Error::ParticipantCap(_) | Error::NoOpenSlot) => {
                participant += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        log.push(DenseCommand::Assign { participant: pid });
        let f = &truth[&trial.stimulus_id];
        let values: BTreeMap<String, u8> = trial
            .dimensions
            .iter()
            .map(|d| {
                let idx = dimension_index(d).expect("canonical dimension");
                (d.clone(), oracle_dense_rating(f[idx], noise, &mut rng))
            })
            .collect();
        exp.submit(trial.trial_id, &values)?;
        log.push(DenseCommand::Submit {
            trial: trial.trial_id,
            values,
        });
    }
    Ok(DenseSimRun { experiment: exp, log })
}
