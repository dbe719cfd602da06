//! Sequential effect rack: tempo, then the one selected effect, then peak
//! normalization to -1 dBFS.

use crate::dsp::audio::AudioBuffer;
use crate::dsp::effects::{fx_flanger, fx_pitch, fx_quality, fx_timeshift, fx_tremolo, fx_vocoder};
use crate::dsp::params::EffectParams;
use crate::dsp::stretch::time_stretch;
use crate::dsp::synth::SynthBackend;
use crate::error::Result;
use crate::voice_space::{EffectKind, EffectProfile, VoiceConfig};

pub const OUTPUT_PEAK_DBFS: f64 = -1.0;

/// Apply one effect at a physical amount (ms for timeshift).
pub fn apply_effect(
    audio: &AudioBuffer,
    kind: EffectKind,
    amount: f64,
    params: &EffectParams,
    seed: u64,
) -> Result<AudioBuffer> {
    match kind {
        EffectKind::Pitch => fx_pitch(audio, amount, params),
        EffectKind::Quality => fx_quality(audio, amount, seed, params),
        EffectKind::Timeshift => fx_timeshift(audio, amount),
        EffectKind::Vocoder => fx_vocoder(audio, amount, params),
        EffectKind::Flanger(t) => fx_flanger(audio, t, amount, params),
        EffectKind::Tremolo => fx_tremolo(audio, amount, params),
    }
}

/// Rack output before normalization.
pub fn apply_rack_raw(
    audio: &AudioBuffer,
    config: &VoiceConfig,
    profile: &EffectProfile,
    seed: u64,
) -> Result<AudioBuffer> {
    let stretched = time_stretch(audio, config.speed)?;
    let slot = profile.slot(config.effect_id)?;
    let amount = config.physical_amount(profile)?;
    apply_effect(&stretched, slot.kind, amount, &profile.params, seed)
}

pub fn apply_rack(
    audio: &AudioBuffer,
    config: &VoiceConfig,
    profile: &EffectProfile,
    seed: u64,
) -> Result<AudioBuffer> {
    Ok(apply_rack_raw(audio, config, profile, seed)?.normalized_dbfs(OUTPUT_PEAK_DBFS))
}

/// Backend render followed by the rack.
pub fn render_voice(
    backend: &dyn SynthBackend,
    config: &VoiceConfig,
    text: &str,
    profile: &EffectProfile,
    sample_rate: u32,
    seed: u64,
) -> Result<AudioBuffer> {
    let dry = backend.render(config, text, sample_rate)?;
    apply_rack(&dry, config, profile, seed)
}
