pub mod analysis;
pub mod dsp;
pub mod error;
pub mod hitl;
pub mod labels;
pub mod sim;
pub mod voice_space;

pub use error::{Error, Result};
pub use voice_space::{EffectKind, EffectProfile, SliderSpec, VoiceConfig, VoiceSpace};
