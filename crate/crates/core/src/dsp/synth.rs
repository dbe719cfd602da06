//! Synthesis backends.
//!
//! The built-in [`StubVoice`] is a parallel formant synthesizer: a harmonic
//! source at `f0` (with vibrato) and a breath-noise source drive a glottal
//! resonance plus three vocal-tract resonators whose centre frequencies scale
//! with `formant_scale`. A syllable envelope seeded from the text gives it a
//! speech-like rhythm. External TTS engines plug in through
//! [`SubprocessBackend`].

use std::f64::consts::PI;
use std::io::Write;
use std::process::{Command, Stdio};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dsp::audio::{AudioBuffer, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::voice_space::{to_synth_params, SynthParams, VoiceConfig};

const FORMANTS_HZ: [f64; 3] = [500.0, 1500.0, 2500.0];
const FORMANT_BW_HZ: [f64; 3] = [80.0, 120.0, 160.0];
const FORMANT_GAIN: [f64; 3] = [0.5, 0.3, 0.18];
const VIBRATO_RATE_HZ: f64 = 5.5;
const AMP_BLOCK: usize = 32;

/// Anything that turns a voice config and a sentence into audio.
pub trait SynthBackend: Send + Sync {
    fn render(&self, config: &VoiceConfig, text: &str, sample_rate: u32) -> Result<AudioBuffer>;
}

/// 64-bit seed derived from the utterance text.
pub fn text_seed(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Duration used when no hint is given: about 75 ms per character, 1-6 s.
pub fn default_duration(text: &str) -> f64 {
    (text.chars().count() as f64 * 0.075).clamp(1.0, 6.0)
}

/// Normalized magnitude of a second-order resonance at `f` (peak 1 at `centre`).
pub fn resonance(f: f64, centre: f64, bandwidth: f64) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    let x = (centre * centre - f * f) / (bandwidth * f);
    1.0 / (1.0 + x * x).sqrt()
}

/// RBJ band-pass biquad with 0 dB peak gain.
#[derive(Debug, Clone)]
pub struct Biquad {
    b0: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl Biquad {
    pub fn bandpass(centre: f64, q: f64, sample_rate: f64) -> Self {
        let w0 = 2.0 * PI * centre / sample_rate;
        let alpha = w0.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b0: alpha / a0,
            b2: -alpha / a0,
            a1: -2.0 * w0.cos() / a0,
            a2: (1.0 - alpha) / a0,
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
        }
    }

    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.b2 * self.x2 - self.a1 * self.y1 - self.a2 * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }

    pub fn run(&mut self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.process(x)).collect()
    }
}

/// Syllable amplitude envelope: raised-cosine onsets and offsets separated by
/// short gaps, leading and trailing silence.
fn syllable_envelope(n: usize, sr: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut env = vec![0.0; n];
    let ramp = (0.025 * sr) as usize;
    let mut pos = (0.05 * sr) as usize;
    let tail = (0.05 * sr) as usize;
    while pos + 2 * ramp < n.saturating_sub(tail) {
        let len = (rng.random_range(0.12..0.26) * sr) as usize;
        let end = (pos + len).min(n - tail);
        let level = rng.random_range(0.7..1.0);
        let dur = end - pos;
        let r = ramp.min(dur / 2).max(1);
        for i in 0..dur {
            let g = if i < r {
                0.5 - 0.5 * (PI * i as f64 / r as f64).cos()
            } else if i >= dur - r {
                0.5 - 0.5 * (PI * (dur - i) as f64 / r as f64).cos()
            } else {
                1.0
            };
            env[pos + i] = level * g;
        }
        pos = end + (rng.random_range(0.03..0.09) * sr) as usize;
    }
    env
}

/// Deterministic parametric pseudo-voice.
#[derive(Debug, Clone, Copy)]
pub struct StubVoice {
    pub sample_rate: u32,
}

impl Default for StubVoice {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

impl StubVoice {
    /// Render `text` for about `duration` seconds (`<= 0` picks a length from
    /// the text). Output peaks at -1 dBFS.
    pub fn render(&self, params: &SynthParams, text: &str, duration: f64) -> Result<AudioBuffer> {
        if text.trim().is_empty() {
            return Err(Error::EmptyUtterance);
        }
        let sr = self.sample_rate as f64;
        let duration = if duration > 0.0 {
            duration
        } else {
            default_duration(text)
        };
        let n = (duration * sr).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(text_seed(text));
        let env = syllable_envelope(n, sr, &mut rng);

        let formants: Vec<(f64, f64)> = FORMANTS_HZ
            .iter()
            .zip(FORMANT_BW_HZ)
            .map(|(&f, b)| (f * params.formant_scale, b * params.formant_scale))
            .collect();

        // harmonic branch
        let f0 = params.f0_hz;
        let vib = params.vibrato_cents / 1200.0;
        let f_max = f0 * 2f64.powf(vib);
        let n_harm = ((0.45 * sr) / f_max).floor().max(1.0) as usize;
        let phases: Vec<f64> = (0..n_harm)
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect();
        let glottal_bw = 0.5 * f0;
        let mut voiced = vec![0.0; n];
        let mut amps = vec![0.0; n_harm];
        let mut phi = 0.0;
        for (i, v) in voiced.iter_mut().enumerate() {
            let t = i as f64 / sr;
            let f = f0 * 2f64.powf(vib * (2.0 * PI * VIBRATO_RATE_HZ * t).sin());
            if i % AMP_BLOCK == 0 {
                for (h, a) in amps.iter_mut().enumerate() {
                    let fh = f * (h + 1) as f64;
                    let tilt = 10f64.powf(params.tilt_db_per_octave * ((h + 1) as f64).log2() / 20.0);
                    let mut g = resonance(fh, f0, glottal_bw);
                    for (k, &(fc, bw)) in formants.iter().enumerate() {
                        g += FORMANT_GAIN[k] * resonance(fh, fc, bw);
                    }
                    *a = if fh < 0.49 * sr { g * tilt } else { 0.0 };
                }
            }
            phi += 2.0 * PI * f / sr;
            if phi > 2.0 * PI * 1e6 {
                phi -= 2.0 * PI * 1e6;
            }
            let mut s = 0.0;
            for (h, a) in amps.iter().enumerate() {
                if *a > 0.0 {
                    s += a * ((h + 1) as f64 * phi + phases[h]).sin();
                }
            }
            *v = s;
        }

        // breath branch: white noise through the same resonators
        let noise: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut breath = vec![0.0; n];
        for (k, &(fc, bw)) in formants.iter().enumerate() {
            if fc < 0.49 * sr {
                let mut bq = Biquad::bandpass(fc, fc / bw, sr);
                for (b, x) in breath.iter_mut().zip(bq.run(&noise)) {
                    *b += FORMANT_GAIN[k] * x;
                }
            }
        }

        let rms = |x: &[f64]| (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
        let (rv, rb) = (rms(&voiced), rms(&breath));
        let gv = if rv > 0.0 { 1.0 / rv } else { 0.0 };
        let gb = if rb > 0.0 { params.breathiness / rb } else { 0.0 };
        let samples = (0..n)
            .map(|i| env[i] * (gv * voiced[i] + gb * breath[i]))
            .collect();
        Ok(AudioBuffer::new(samples, self.sample_rate).normalized_dbfs(-1.0))
    }
}

/// Built-in backend: latent sliders -> [`SynthParams`] -> [`StubVoice`].
#[derive(Debug, Clone, Copy, Default)]
pub struct StubBackend;

impl SynthBackend for StubBackend {
    fn render(&self, config: &VoiceConfig, text: &str, sample_rate: u32) -> Result<AudioBuffer> {
        StubVoice { sample_rate }.render(&to_synth_params(config), text, 0.0)
    }
}

/// Convenience wrapper over [`StubVoice`] at 22050 Hz.
pub fn render_stub_voice(params: &SynthParams, text: &str, duration: f64) -> Result<AudioBuffer> {
    StubVoice::default().render(params, text, duration)
}

#[derive(Serialize)]
struct BackendRequest<'a> {
    config: &'a VoiceConfig,
    text: &'a str,
    sample_rate: u32,
}

/// External engine: the program receives `{config, text, sample_rate}` as JSON
/// on stdin and must write a WAV stream to stdout.
#[derive(Debug, Clone)]
pub struct SubprocessBackend {
    pub program: String,
    pub args: Vec<String>,
}

impl SynthBackend for SubprocessBackend {
    fn render(&self, config: &VoiceConfig, text: &str, sample_rate: u32) -> Result<AudioBuffer> {
        if text.trim().is_empty() {
            return Err(Error::EmptyUtterance);
        }
        let request = serde_json::to_vec(&BackendRequest {
            config,
            text,
            sample_rate,
        })?;
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Backend(format!("spawn {}: {e}", self.program)))?;
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(&request)
            .map_err(|e| Error::Backend(e.to_string()))?;
        let out = child
            .wait_with_output()
            .map_err(|e| Error::Backend(e.to_string()))?;
        if !out.status.success() {
            return Err(Error::Backend(format!(
                "{} exited with {}: {}",
                self.program,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        AudioBuffer::from_wav_bytes(&out.stdout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voice_space::VoiceConfig;

    #[test]
    fn empty_text_is_rejected() {
        let p = to_synth_params(&VoiceConfig::default());
        assert_eq!(render_stub_voice(&p, "  ", 1.0), Err(Error::EmptyUtterance));
    }

    #[test]
    fn render_is_deterministic() {
        let p = to_synth_params(&VoiceConfig::default());
        let a = render_stub_voice(&p, "The birch canoe slid on the smooth planks.", 1.0).unwrap();
        let b = render_stub_voice(&p, "The birch canoe slid on the smooth planks.", 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 22050);
        assert!(a.peak() <= 1.0 && a.is_finite());
    }

    #[test]
    fn different_text_different_rhythm() {
        let p = to_synth_params(&VoiceConfig::default());
        let a = render_stub_voice(&p, "Glue the sheet to the dark blue background.", 1.0).unwrap();
        let b = render_stub_voice(&p, "These days a chicken leg is a rare dish.", 1.0).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn resonance_peaks_at_centre() {
        assert!((resonance(500.0, 500.0, 80.0) - 1.0).abs() < 1e-12);
        assert!(resonance(700.0, 500.0, 80.0) < 0.5);
    }

    #[test]
    fn biquad_passes_centre() {
        let sr = 22050.0;
        let mut bq = Biquad::bandpass(1000.0, 5.0, sr);
        let x: Vec<f64> = (0..22050)
            .map(|i| (2.0 * PI * 1000.0 * i as f64 / sr).sin())
            .collect();
        let y = bq.run(&x);
        let amp = y[11025..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((amp - 1.0).abs() < 0.01, "{amp}");
    }
}
