//! Human-in-the-loop protocols as explicit state machines. Every mutation
//! takes its wall-clock time as an argument, so a log of commands replays to
//! the same state.

pub mod dense;
pub mod gsp;
pub mod profile;
pub mod step;
pub mod validation;

pub use dense::{DenseCommand, DenseExperiment, DenseParams, DenseTrial, Modality, RatingRecord};
pub use gsp::{
    gsp_aggregate, standardized_diff, Chain, ChainNode, ChainStatus, GspCommand, GspExperiment,
    GspParams, GspTrial, Reshuffle,
};
pub use profile::{profile, profiles, PerceptualProfile};
pub use step::{StepCommand, StepParams, StepTag, TagAction, TagRecord, TagStatus};
pub use validation::{ValidationCommand, ValidationExperiment, ValidationItem};

pub type TrialId = u64;

pub const DEFAULT_CLAIM_TIMEOUT_MS: u64 = 10 * 60 * 1000;

/// Mix `parts` into `seed` (splitmix64 finalizer per word).
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut h = seed;
    for &p in parts {
        h = h.wrapping_add(p.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}
