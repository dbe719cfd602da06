//! Synthesis backends, time-scale modification and the effect rack.

pub mod audio;
pub mod effects;
pub mod params;
pub mod rack;
pub mod stft;
pub mod stretch;
pub mod synth;

pub use audio::{AudioBuffer, DEFAULT_SAMPLE_RATE};
pub use effects::{fx_flanger, fx_pitch, fx_quality, fx_timeshift, fx_tremolo, fx_vocoder};
pub use params::EffectParams;
pub use rack::{apply_effect, apply_rack, render_voice};
pub use stretch::time_stretch;
pub use synth::{render_stub_voice, StubBackend, StubVoice, SubprocessBackend, SynthBackend};
