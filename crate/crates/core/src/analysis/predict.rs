//! Voice proposals for a target stimulus under the five conditions matched,
//! closest, selected, worst and random.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::matrix::cosine;
use crate::error::{Error, Result};
use crate::hitl::derive_seed;
use crate::hitl::profile::PerceptualProfile;
use crate::voice_space::{
    position_for_slot, random_config_in, EffectProfile, SliderSpec, VoiceConfig, AMOUNT_DIM, EFFECT_DIM,
    GRID_RESOLUTION, SLIDER_COUNT,
};

pub const WORST_RESTARTS: usize = 32;

/// Continuous sliders in vector order: five latent, speed, effect amount.
pub const CONTINUOUS_DIMS: [usize; 7] = [0, 1, 2, 3, 4, 5, AMOUNT_DIM];

/// Slider-space embedding: each continuous slider mapped linearly so its
/// range spans [-1, 1] (centred on the grid midpoint), followed by a unit
/// one-hot block for the effect slot.
pub fn slider_vector(config: &VoiceConfig, specs: &[SliderSpec; SLIDER_COUNT]) -> Vec<f64> {
    let n_slots = specs[EFFECT_DIM].hi as usize + 1;
    let mut v: Vec<f64> = CONTINUOUS_DIMS
        .iter()
        .map(|&d| {
            let s = &specs[d];
            2.0 * (config.value(d) - s.lo) / s.range() - 1.0
        })
        .collect();
    v.extend((0..n_slots).map(|k| if k == config.effect_id { 1.0 } else { 0.0 }));
    v
}

pub fn slider_cosine(a: &VoiceConfig, b: &VoiceConfig, specs: &[SliderSpec; SLIDER_COUNT]) -> f64 {
    cosine(&slider_vector(a, specs), &slider_vector(b, specs))
}

/// A reduced or full slider grid: `n_cont` continuous coordinates with
/// `levels` positions each, plus one categorical coordinate with `n_slots`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    pub n_cont: usize,
    pub levels: usize,
    pub n_slots: usize,
}

impl GridShape {
    pub fn voice(n_slots: usize) -> Self {
        Self {
            n_cont: CONTINUOUS_DIMS.len(),
            levels: GRID_RESOLUTION,
            n_slots,
        }
    }

    pub fn vector(&self, cont: &[usize], slot: usize) -> Vec<f64> {
        let mut v: Vec<f64> = cont
            .iter()
            .map(|&l| 2.0 * l as f64 / (self.levels - 1) as f64 - 1.0)
            .collect();
        v.extend((0..self.n_slots).map(|k| if k == slot { 1.0 } else { 0.0 }));
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub cont: Vec<usize>,
    pub slot: usize,
    pub cosine: f64,
}

fn descend(target: &[f64], shape: &GridShape, mut p: GridPoint) -> GridPoint {
    loop {
        let before = p.cosine;
        for c in 0..=shape.n_cont {
            let options = if c < shape.n_cont { shape.levels } else { shape.n_slots };
            for o in 0..options {
                let mut cont = p.cont.clone();
                let mut slot = p.slot;
                if c < shape.n_cont {
                    cont[c] = o;
                } else {
                    slot = o;
                }
                let cs = cosine(target, &shape.vector(&cont, slot));
                if cs < p.cosine - 1e-15 {
                    p = GridPoint { cont, slot, cosine: cs };
                }
            }
        }
        if p.cosine >= before - 1e-15 {
            return p;
        }
    }
}

/// Minimizers of the separable surrogate `t.x + lambda |x|^2` over every
/// interval of `lambda > 0` between breakpoints. The cosine minimizer sits on
/// the lower convex hull of the points `(|x|^2, t.x)`, so it is one of these
/// whenever the minimum is negative.
pub fn lambda_path(target: &[f64], shape: &GridShape) -> Vec<GridPoint> {
    let level = |l: usize| 2.0 * l as f64 / (shape.levels - 1) as f64 - 1.0;
    let t = &target[..shape.n_cont];
    let slot = (0..shape.n_slots)
        .min_by(|&a, &b| target[shape.n_cont + a].partial_cmp(&target[shape.n_cont + b]).unwrap())
        .unwrap_or(0);
    let mut breaks = vec![0.0];
    for &ti in t {
        for a in 0..shape.levels {
            for b in a + 1..shape.levels {
                let sum = level(a) + level(b);
                if sum.abs() > 1e-12 {
                    let lam = -ti / sum;
                    if lam > 0.0 && lam.is_finite() {
                        breaks.push(lam);
                    }
                }
            }
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let mut probes: Vec<f64> = breaks.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    probes.push(breaks.last().copied().unwrap_or(0.0) * 2.0 + 1.0);
    probes.push(breaks.get(1).copied().unwrap_or(1.0) * 0.5);
    let mut out: Vec<GridPoint> = probes
        .into_iter()
        .map(|lam| {
            let cont: Vec<usize> = t
                .iter()
                .map(|&ti| {
                    (0..shape.levels)
                        .min_by(|&a, &b| {
                            let f = |l: usize| ti * level(l) + lam * level(l).powi(2);
                            f(a).partial_cmp(&f(b)).unwrap()
                        })
                        .unwrap()
                })
                .collect();
            let cs = cosine(target, &shape.vector(&cont, slot));
            GridPoint { cont, slot, cosine: cs }
        })
        .collect();
    out.dedup();
    out
}

/// Grid point of minimum cosine similarity to `target`: coordinate descent
/// from the best `lambda_path` candidate and from `restarts` random starts.
pub fn worst_search<R: Rng + ?Sized>(target: &[f64], shape: &GridShape, restarts: usize, rng: &mut R) -> GridPoint {
    let mut starts: Vec<GridPoint> = lambda_path(target, shape)
        .into_iter()
        .min_by(|a, b| a.cosine.partial_cmp(&b.cosine).unwrap())
        .into_iter()
        .collect();
    for _ in 0..restarts {
        let cont: Vec<usize> = (0..shape.n_cont).map(|_| rng.random_range(0..shape.levels)).collect();
        let slot = rng.random_range(0..shape.n_slots);
        let cs = cosine(target, &shape.vector(&cont, slot));
        starts.push(GridPoint { cont, slot, cosine: cs });
    }
    starts
        .into_iter()
        .map(|p| descend(target, shape, p))
        .min_by(|a, b| a.cosine.partial_cmp(&b.cosine).unwrap())
        .expect("at least one start")
}

/// Exhaustive minimum; only sensible on small grids.
pub fn worst_exhaustive(target: &[f64], shape: &GridShape) -> GridPoint {
    let mut best: Option<GridPoint> = None;
    let total = shape.levels.pow(shape.n_cont as u32);
    for code in 0..total {
        let mut c = code;
        let cont: Vec<usize> = (0..shape.n_cont)
            .map(|_| {
                let l = c % shape.levels;
                c /= shape.levels;
                l
            })
            .collect();
        for slot in 0..shape.n_slots {
            let cs = cosine(target, &shape.vector(&cont, slot));
            if best.as_ref().is_none_or(|b| cs < b.cosine) {
                best = Some(GridPoint {
                    cont: cont.clone(),
                    slot,
                    cosine: cs,
                });
            }
        }
    }
    best.expect("non-empty grid")
}

fn config_from_grid(p: &GridPoint, profile: &EffectProfile) -> VoiceConfig {
    let specs = profile.specs();
    let n_slots = profile.len();
    let mut positions = [0usize; SLIDER_COUNT];
    for (i, &d) in CONTINUOUS_DIMS.iter().enumerate() {
        positions[d] = p.cont[i];
    }
    positions[EFFECT_DIM] = position_for_slot(p.slot, n_slots);
    VoiceConfig::from_positions(&specs, &positions, &profile.name)
}

/// The slider config least similar (cosine) to `reference`.
pub fn worst_config(reference: &VoiceConfig, profile: &EffectProfile, restarts: usize, seed: u64) -> (VoiceConfig, f64) {
    let specs = profile.specs();
    let target = slider_vector(reference, &specs);
    let shape = GridShape::voice(profile.len());
    let p = worst_search(&target, &shape, restarts, &mut ChaCha8Rng::seed_from_u64(seed));
    (config_from_grid(&p, profile), p.cosine)
}

/// One corpus stimulus: its profile in the modality used for similarity, the
/// configs of every node of its GSP chain, and the chain's final voice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub stimulus_id: String,
    pub profile: PerceptualProfile,
    pub chain_configs: Vec<VoiceConfig>,
    pub final_config: VoiceConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Matched,
    Closest,
    Selected,
    Worst,
    Random,
}

pub const CONDITIONS: [Condition; 5] = [
    Condition::Matched,
    Condition::Closest,
    Condition::Selected,
    Condition::Worst,
    Condition::Random,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVoice {
    pub config: VoiceConfig,
    /// Stimulus whose chain supplied the voice, if any.
    pub source: Option<String>,
    /// Space the choice was made in: perceptual, slider or grid.
    pub space: String,
    /// Cosine similarity that decided the choice.
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub target: String,
    pub closest_stimulus: String,
    pub conditions: BTreeMap<Condition, ConditionVoice>,
}

impl PredictionSet {
    pub fn get(&self, c: Condition) -> Option<&VoiceConfig> {
        self.conditions.get(&c).map(|v| &v.config)
    }
}

/// Corpus entry most similar (cosine over profiles) to `target`, skipping
/// the entry with the target's own id.
pub fn closest_stimulus<'a>(target: &PerceptualProfile, corpus: &'a [CorpusEntry]) -> Result<(&'a CorpusEntry, f64)> {
    let t = target.vector()?;
    let mut best: Option<(&CorpusEntry, f64)> = None;
    for e in corpus.iter().filter(|e| e.stimulus_id != target.stimulus_id) {
        let c = cosine(&t, &e.profile.vector()?);
        if best.is_none_or(|b| c > b.1) {
            best = Some((e, c));
        }
    }
    best.ok_or(Error::TooFew {
        what: "other corpus stimuli",
        needed: 1,
        got: 0,
    })
}

/// Nearest voice to `anchor` that appears in no node of the `excluded`
/// chains. Candidates are all node configs of the remaining chains; when
/// there are none, the anchor's grid neighbours are used.
pub fn selected_config(
    anchor: &VoiceConfig,
    excluded: &[&CorpusEntry],
    corpus: &[CorpusEntry],
    profile: &EffectProfile,
) -> (VoiceConfig, Option<String>, f64) {
    let specs = profile.specs();
    let banned = |c: &VoiceConfig| excluded.iter().any(|e| e.chain_configs.contains(c));
    let mut best: Option<(VoiceConfig, Option<String>, f64)> = None;
    for e in corpus {
        if excluded.iter().any(|x| x.stimulus_id == e.stimulus_id) {
            continue;
        }
        for c in &e.chain_configs {
            if banned(c) {
                continue;
            }
            let s = slider_cosine(anchor, c, &specs);
            if best.as_ref().is_none_or(|b| s > b.2) {
                best = Some((c.clone(), Some(e.stimulus_id.clone()), s));
            }
        }
    }
    if let Some(b) = best {
        return b;
    }
    let pos = anchor.positions(&specs);
    let mut neighbours = Vec::new();
    for d in 0..SLIDER_COUNT {
        if d == EFFECT_DIM {
            for slot in 0..profile.len() {
                if slot != anchor.effect_id {
                    let mut p = pos;
                    p[d] = position_for_slot(slot, profile.len());
                    neighbours.push(p);
                }
            }
        } else {
            for step in [-1i64, 1] {
                let q = pos[d] as i64 + step;
                if (0..GRID_RESOLUTION as i64).contains(&q) {
                    let mut p = pos;
                    p[d] = q as usize;
                    neighbours.push(p);
                }
            }
        }
    }
    neighbours
        .into_iter()
        .map(|p| VoiceConfig::from_positions(&specs, &p, &profile.name))
        .filter(|c| !banned(c))
        .map(|c| {
            let s = slider_cosine(anchor, &c, &specs);
            (c, None, s)
        })
        .max_by(|a, b| a.2.partial_cmp(&b.2).unwrap())
        .unwrap_or((anchor.clone(), None, 1.0))
}

/// All five conditions for `target`. When the target is in the corpus,
/// `matched` is its own final voice and `worst` is least similar to it;
/// otherwise `matched` is absent and `worst` is measured against `closest`.
pub fn predict_conditions(
    target: &PerceptualProfile,
    corpus: &[CorpusEntry],
    profile: &EffectProfile,
    seed: u64,
) -> Result<PredictionSet> {
    if corpus.len() < 2 {
        return Err(Error::TooFew {
            what: "corpus stimuli",
            needed: 2,
            got: corpus.len(),
        });
    }
    target.vector()?;
    let own = corpus.iter().find(|e| e.stimulus_id == target.stimulus_id);
    let (closest, sim) = closest_stimulus(target, corpus)?;
    let mut conditions = BTreeMap::new();
    if let Some(o) = own {
        conditions.insert(
            Condition::Matched,
            ConditionVoice {
                config: o.final_config.clone(),
                source: Some(o.stimulus_id.clone()),
                space: "chain".into(),
                similarity: None,
            },
        );
    }
    conditions.insert(
        Condition::Closest,
        ConditionVoice {
            config: closest.final_config.clone(),
            source: Some(closest.stimulus_id.clone()),
            space: "perceptual".into(),
            similarity: Some(sim),
        },
    );
    let excluded: Vec<&CorpusEntry> = own.into_iter().chain([closest]).collect();
    let (sel, sel_src, sel_sim) = selected_config(&closest.final_config, &excluded, corpus, profile);
    conditions.insert(
        Condition::Selected,
        ConditionVoice {
            config: sel,
            source: sel_src,
            space: "slider".into(),
            similarity: Some(sel_sim),
        },
    );
    let reference = own.map_or(&closest.final_config, |o| &o.final_config);
    let (worst, worst_sim) = worst_config(reference, profile, WORST_RESTARTS, derive_seed(seed, &[1]));
    conditions.insert(
        Condition::Worst,
        ConditionVoice {
            config: worst,
            source: None,
            space: "slider".into(),
            similarity: Some(worst_sim),
        },
    );
    conditions.insert(
        Condition::Random,
        ConditionVoice {
            config: random_config_in(profile, derive_seed(seed, &[2])),
            source: None,
            space: "grid".into(),
            similarity: None,
        },
    );
    Ok(PredictionSet {
        target: target.stimulus_id.clone(),
        closest_stimulus: closest.stimulus_id.clone(),
        conditions,
    })
}

/// Corpus stimulus nearest (Euclidean) to a point in factor-score space.
pub fn nearest_by_scores<'a>(point: &[f64], corpus: &'a [(String, Vec<f64>)]) -> Option<(&'a str, f64)> {
    corpus
        .iter()
        .map(|(id, s)| {
            let d = s.iter().zip(point).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            (id.as_str(), d)
        })
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slider_vector_layout() {
        let p = EffectProfile::standard();
        let specs = p.specs();
        let cfg = VoiceConfig::from_positions(&specs, &[0, 15, 0, 15, 0, 15, 4, 15], "default");
        let v = slider_vector(&cfg, &specs);
        assert_eq!(v.len(), 15);
        assert_eq!(&v[..7], &[-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 1.0]);
        assert_eq!(v[7 + 2], 1.0);
        assert_eq!(v[7..].iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn grid_vector_matches_config_vector() {
        let p = EffectProfile::standard();
        let specs = p.specs();
        let gp = GridPoint {
            cont: vec![3, 7, 0, 15, 9, 1, 12],
            slot: 5,
            cosine: 0.0,
        };
        let cfg = config_from_grid(&gp, &p);
        let a = slider_vector(&cfg, &specs);
        let b = GridShape::voice(8).vector(&gp.cont, gp.slot);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
