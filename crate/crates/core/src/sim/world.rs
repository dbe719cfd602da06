use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::hitl::derive_seed;
use crate::labels::{DENSE_DIMENSIONS, LITERATURE_TERMS};
use crate::voice_space::{
    position_for_slot, slot_for_position, EffectProfile, Positions, VoiceConfig, EFFECT_DIM, GRID_RESOLUTION,
    SLIDER_COUNT,
};

pub const N_FEATURES: usize = DENSE_DIMENSIONS.len();
const TOP: f64 = (GRID_RESOLUTION - 1) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldKind {
    /// Ideal slider = clamp(linear score).
    #[default]
    Linear,
    /// Ideal slider = tanh of a linear score plus a pairwise feature product.
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldParams {
    pub n_stimuli: usize,
    pub n_latent: usize,
    pub n_clusters: usize,
    /// Within-cluster spread of the latent factors (cluster centres have unit spread).
    pub cluster_spread: f64,
    /// Slider rater noise in grid steps.
    pub sigma: f64,
    /// Dense rater noise on the 1..5 scale.
    pub rating_noise: f64,
    /// Width of the match-rating curve in normalized grid distance.
    pub match_tau: f64,
    pub lexicon_size: usize,
    pub kind: WorldKind,
    pub profile: String,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            n_stimuli: 30,
            n_latent: 7,
            n_clusters: 6,
            cluster_spread: 0.5,
            sigma: 1.0,
            rating_noise: 0.7,
            match_tau: 0.2,
            lexicon_size: 80,
            kind: WorldKind::Linear,
            profile: "default".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagTerm {
    pub text: String,
    pub feature: usize,
    /// +1 when high feature values make the tag apply, -1 for low.
    pub sign: f64,
}

/// Ground truth for simulated participants: what each stimulus "is" and which
/// voice suits it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleWorld {
    pub params: WorldParams,
    pub seed: u64,
    pub profile: EffectProfile,
    pub stimuli: Vec<String>,
    pub cluster: Vec<usize>,
    /// True attributes on the 1..5 rating scale, one row per stimulus.
    pub features: Vec<Vec<f64>>,
    /// Continuous-slider weights (dims 0..5 and amount), each row over the features.
    pub weights: Vec<Vec<f64>>,
    pub weight_scale: Vec<f64>,
    /// Effect-slot score weights.
    pub effect_weights: Vec<Vec<f64>>,
    pub ideal: Vec<Positions>,
    pub lexicon: Vec<TagTerm>,
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Slider dims driven by the linear map, in weight-row order.
const MAPPED_DIMS: [usize; 7] = [0, 1, 2, 3, 4, 5, 7];

impl OracleWorld {
    pub fn new(params: WorldParams, seed: u64) -> Self {
        let profile = EffectProfile::by_name(&params.profile).unwrap_or_else(EffectProfile::standard);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x0a]));
        let k = params.n_latent.max(1);

        let loadings: Vec<Vec<f64>> = (0..N_FEATURES)
            .map(|_| (0..k).map(|_| 0.3 * normal(&mut rng)).collect())
            .collect();
        let centres: Vec<Vec<f64>> = (0..params.n_clusters.max(1))
            .map(|_| (0..k).map(|_| normal(&mut rng)).collect())
            .collect();
        let mut cluster = Vec::new();
        let mut features = Vec::new();
        for i in 0..params.n_stimuli {
            let c = i % centres.len();
            let z: Vec<f64> = centres[c]
                .iter()
                .map(|m| m + params.cluster_spread * normal(&mut rng))
                .collect();
            let f: Vec<f64> = loadings
                .iter()
                .map(|a| (3.0 + dot(a, &z) + 0.2 * normal(&mut rng)).clamp(1.0, 5.0))
                .collect();
            cluster.push(c);
            features.push(f);
        }

        // population covariance of features (ignoring the clamp) scales each map
        let latent_var = 1.0 + params.cluster_spread.powi(2);
        let cov = |i: usize, j: usize| {
            latent_var * dot(&loadings[i], &loadings[j]) + if i == j { 0.04 } else { 0.0 }
        };
        let mut wrng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x0b]));
        let weights: Vec<Vec<f64>> = MAPPED_DIMS
            .iter()
            .map(|_| (0..N_FEATURES).map(|_| normal(&mut wrng)).collect())
            .collect();
        let weight_scale: Vec<f64> = weights
            .iter()
            .map(|w| {
                let mut v = 0.0;
                for i in 0..N_FEATURES {
                    for j in 0..N_FEATURES {
                        v += w[i] * w[j] * cov(i, j);
                    }
                }
                v.sqrt().max(1e-12)
            })
            .collect();
        let effect_weights: Vec<Vec<f64>> = (0..profile.len())
            .map(|_| (0..N_FEATURES).map(|_| normal(&mut wrng)).collect())
            .collect();

        let mut trng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x0c]));
        let mut terms: Vec<&str> = LITERATURE_TERMS.to_vec();
        rand::seq::SliceRandom::shuffle(terms.as_mut_slice(), &mut trng);
        let lexicon = terms
            .into_iter()
            .take(params.lexicon_size.min(LITERATURE_TERMS.len()))
            .enumerate()
            .map(|(i, t)| TagTerm {
                text: t.to_string(),
                feature: trng.random_range(0..N_FEATURES),
                sign: if i % 2 == 0 { 1.0 } else { -1.0 },
            })
            .collect();

        let mut world = Self {
            params,
            seed,
            profile,
            stimuli: (0..features.len()).map(|i| format!("robot-{i:03}")).collect(),
            cluster,
            features,
            weights,
            weight_scale,
            effect_weights,
            ideal: Vec::new(),
            lexicon,
        };
        world.ideal = (0..world.features.len())
            .map(|i| world.ideal_for_features(&world.features[i]))
            .collect();
        world
    }

    pub fn n_slots(&self) -> usize {
        self.profile.len()
    }

    /// Ideal grid positions for an attribute vector.
    pub fn ideal_for_features(&self, f: &[f64]) -> Positions {
        let centred: Vec<f64> = f.iter().map(|v| v - 3.0).collect();
        let mut pos = [0usize; SLIDER_COUNT];
        for (r, &d) in MAPPED_DIMS.iter().enumerate() {
            let s = dot(&self.weights[r], &centred) / self.weight_scale[r];
            let x = match self.params.kind {
                WorldKind::Linear => (0.6 * s).clamp(-1.0, 1.0),
                WorldKind::Nonlinear => {
                    let a = centred[r % N_FEATURES];
                    let b = centred[(r * 7 + 3) % N_FEATURES];
                    (1.2 * s + 0.5 * a * b).tanh()
                }
            };
            pos[d] = ((x + 1.0) / 2.0 * TOP).round() as usize;
        }
        let slot = self
            .effect_weights
            .iter()
            .map(|w| dot(w, &centred))
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map_or(0, |(i, _)| i);
        pos[EFFECT_DIM] = position_for_slot(slot, self.n_slots());
        pos
    }

    pub fn ideal_config(&self, stimulus: usize) -> VoiceConfig {
        VoiceConfig::from_positions(&self.profile.specs(), &self.ideal[stimulus], &self.profile.name)
    }

    pub fn index_of(&self, stimulus_id: &str) -> Option<usize> {
        self.stimuli.iter().position(|s| s == stimulus_id)
    }
}

/// Normalized grid distance in [0, 1]: mean over sliders of |position
/// difference| / 15, with the effect selector counting 0 (same slot) or 1.
pub fn grid_distance(world: &OracleWorld, stimulus: usize, config: &VoiceConfig) -> f64 {
    positions_distance(&world.ideal[stimulus], &config.positions(&world.profile.specs()), world.n_slots())
}

pub fn positions_distance(a: &Positions, b: &Positions, n_slots: usize) -> f64 {
    let mut total = 0.0;
    for d in 0..SLIDER_COUNT {
        total += if d == EFFECT_DIM {
            (slot_for_position(a[d], n_slots) != slot_for_position(b[d], n_slots)) as u8 as f64
        } else {
            a[d].abs_diff(b[d]) as f64 / TOP
        };
    }
    total / SLIDER_COUNT as f64
}

/// Ideal position for `active_dim` plus rounded Gaussian noise of
/// `sigma` grid steps, clamped to the grid. The base config is irrelevant to
/// the oracle.
pub fn oracle_slider_response<R: Rng + ?Sized>(
    world: &OracleWorld,
    stimulus: usize,
    _base_config: &VoiceConfig,
    active_dim: usize,
    rng: &mut R,
) -> usize {
    let ideal = world.ideal[stimulus][active_dim] as f64;
    let noise = if world.params.sigma > 0.0 {
        (world.params.sigma * normal(rng)).round()
    } else {
        0.0
    };
    (ideal + noise).clamp(0.0, TOP) as usize
}

/// 1..5 rating, decreasing in grid distance from the ideal voice.
pub fn oracle_match_rating(world: &OracleWorld, stimulus: usize, config: &VoiceConfig) -> u8 {
    rating_for_distance(grid_distance(world, stimulus, config), world.params.match_tau)
}

pub fn rating_for_distance(d: f64, tau: f64) -> u8 {
    1 + (4.0 * (-(d / tau).powi(2)).exp()).round() as u8
}

/// One dense rating of `feature` for a stimulus: the true value plus noise,
/// rounded and clamped to 1..5.
pub fn oracle_dense_rating<R: Rng + ?Sized>(true_value: f64, noise: f64, rng: &mut R) -> u8 {
    (true_value + noise * normal(rng)).round().clamp(1.0, 5.0) as u8
}

/// Probability that `term` describes a stimulus with attributes `f`.
pub fn tag_applies(term: &TagTerm, f: &[f64]) -> f64 {
    1.0 / (1.0 + (-3.0 * term.sign * (f[term.feature] - 3.0)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_on_grid_and_deterministic() {
        let w = OracleWorld::new(WorldParams::default(), 3);
        assert_eq!(w, OracleWorld::new(WorldParams::default(), 3));
        for p in &w.ideal {
            assert!(p.iter().all(|&x| x < GRID_RESOLUTION));
        }
        for i in 0..w.stimuli.len() {
            assert_eq!(grid_distance(&w, i, &w.ideal_config(i)), 0.0);
            assert_eq!(oracle_match_rating(&w, i, &w.ideal_config(i)), 5);
        }
    }

    #[test]
    fn rating_extremes() {
        assert_eq!(rating_for_distance(0.0, 0.25), 5);
        assert_eq!(rating_for_distance(1.0, 0.25), 1);
    }
}
