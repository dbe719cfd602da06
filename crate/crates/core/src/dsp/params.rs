//! Fixed effect parameters and amount upper bounds.

use serde::{Deserialize, Serialize};

/// Upper bounds on the physical effect amount. Lower bounds are always 0.
pub mod bounds {
    pub const PITCH: f64 = 0.5;
    pub const TREMOLO: f64 = 0.4;
    pub const QUALITY: f64 = 1.0;
    /// Milliseconds of delay rather than a mix ratio.
    pub const TIMESHIFT_MS: f64 = 45.0;
    pub const VOCODER: f64 = 0.35;
    pub const FLANGER: f64 = 0.78;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlangerParams {
    /// Base delay, ms.
    pub delay: f64,
    /// LFO sweep depth, ms.
    pub depth: f64,
    /// LFO rate, Hz. Zero freezes the LFO at the midpoint of its sweep.
    pub frequency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VocoderParams {
    /// Carrier fundamental in Hz.
    pub carrier_frequency: f64,
    /// Sawtooth share of the carrier; 1.0 is a full sawtooth, 0.0 a pure sine.
    pub harmonics: f64,
    pub bands: usize,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectParams {
    /// Flanger types 1..=5, indexed from 0.
    pub flanger: [FlangerParams; 5],
    pub vocoder: VocoderParams,
    pub tremolo_rate_hz: f64,
    pub pitch_interval_semitones: f64,
    pub stft_window: usize,
    pub stft_hop: usize,
}

impl Default for EffectParams {
    fn default() -> Self {
        let fl = |delay, depth, frequency| FlangerParams {
            delay,
            depth,
            frequency,
        };
        Self {
            flanger: [
                fl(1.0, 10.0, 5.0),
                fl(0.0, 50.0, 0.0),
                fl(20.0, 20.0, 5.0),
                fl(1.0, 10.0, 25.0),
                fl(10.0, 0.0, 0.0),
            ],
            vocoder: VocoderParams {
                carrier_frequency: 30.0,
                harmonics: 1.0,
                bands: 16,
                band_lo_hz: 80.0,
                band_hi_hz: 8000.0,
            },
            tremolo_rate_hz: 8.0,
            pitch_interval_semitones: 5.0,
            stft_window: 1024,
            stft_hop: 256,
        }
    }
}

impl EffectParams {
    pub fn flanger_type(&self, kind: u8) -> Option<&FlangerParams> {
        if (1..=5).contains(&kind) {
            Some(&self.flanger[kind as usize - 1])
        } else {
            None
        }
    }
}
