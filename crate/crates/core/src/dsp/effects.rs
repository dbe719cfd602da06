//! Effect primitives. Each takes the physical amount, checks it against the
//! effect's upper bound and returns a buffer of the same length.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::dsp::audio::AudioBuffer;
use crate::dsp::params::{bounds, EffectParams, VocoderParams};
use crate::dsp::stft::{Spectrogram, Stft};
use crate::dsp::stretch::pitch_shift;
use crate::dsp::synth::Biquad;
use crate::error::{Error, Result};

fn check(effect: &str, amount: f64, bound: f64) -> Result<()> {
    if amount.is_nan() || amount < 0.0 || amount > bound + 1e-12 {
        return Err(Error::BoundViolation {
            effect: effect.to_string(),
            amount,
            bound,
        });
    }
    Ok(())
}

fn mix(dry: &[f64], wet: &[f64], amount: f64) -> Vec<f64> {
    dry.iter()
        .zip(wet)
        .map(|(d, w)| (1.0 - amount) * d + amount * w)
        .collect()
}

/// Blend in two copies transposed up and down by the pitch interval (five
/// semitones each, a minor seventh apart):
/// `(1 - a) x + a/2 up + a/2 down`.
pub fn fx_pitch(audio: &AudioBuffer, amount: f64, params: &EffectParams) -> Result<AudioBuffer> {
    check("pitch", amount, bounds::PITCH)?;
    if amount == 0.0 {
        return Ok(audio.clone());
    }
    let stft = Stft::new(params.stft_window, params.stft_hop);
    let st = params.pitch_interval_semitones;
    let up = pitch_shift(&audio.samples, st, &stft);
    let down = pitch_shift(&audio.samples, -st, &stft);
    let samples = audio
        .samples
        .iter()
        .zip(up.iter().zip(&down))
        .map(|(x, (u, d))| (1.0 - amount) * x + 0.5 * amount * (u + d))
        .collect();
    Ok(AudioBuffer::new(samples, audio.sample_rate))
}

/// Magnitude-only resynthesis with uniformly random phases and no phase
/// refinement, mixed with the original by `amount`.
pub fn fx_quality(
    audio: &AudioBuffer,
    amount: f64,
    seed: u64,
    params: &EffectParams,
) -> Result<AudioBuffer> {
    check("quality", amount, bounds::QUALITY)?;
    if amount == 0.0 {
        return Ok(audio.clone());
    }
    let degraded = random_phase_resynthesis(&audio.samples, seed, params);
    Ok(AudioBuffer::new(
        mix(&audio.samples, &degraded, amount),
        audio.sample_rate,
    ))
}

/// STFT of `x` with every phase replaced by a uniform draw.
pub fn random_phase_spectrogram(x: &[f64], seed: u64, params: &EffectParams) -> Spectrogram {
    let stft = Stft::new(params.stft_window, params.stft_hop);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    stft.forward(x)
        .into_iter()
        .map(|frame| {
            frame
                .into_iter()
                .map(|c| Complex64::from_polar(c.norm(), rng.random_range(0.0..2.0 * PI)))
                .collect()
        })
        .collect()
}

pub fn random_phase_resynthesis(x: &[f64], seed: u64, params: &EffectParams) -> Vec<f64> {
    let stft = Stft::new(params.stft_window, params.stft_hop);
    stft.inverse(&random_phase_spectrogram(x, seed, params), x.len())
}

/// Delay in samples for `shift_ms` at `sample_rate`.
pub fn shift_samples(shift_ms: f64, sample_rate: u32) -> usize {
    (shift_ms / 1000.0 * sample_rate as f64).round() as usize
}

/// `0.5 x + 0.5 x(t - shift)`, truncated to the input length.
pub fn fx_timeshift(audio: &AudioBuffer, shift_ms: f64) -> Result<AudioBuffer> {
    check("timeshift", shift_ms, bounds::TIMESHIFT_MS)?;
    let d = shift_samples(shift_ms, audio.sample_rate);
    if d == 0 {
        return Ok(audio.clone());
    }
    let x = &audio.samples;
    let samples = (0..x.len())
        .map(|i| 0.5 * x[i] + if i >= d { 0.5 * x[i - d] } else { 0.0 })
        .collect();
    Ok(AudioBuffer::new(samples, audio.sample_rate))
}

/// Band-limited (PolyBLEP) sawtooth blended with a sine by `harmonics`.
pub fn carrier(freq: f64, harmonics: f64, len: usize, sample_rate: f64) -> Vec<f64> {
    let dt = freq / sample_rate;
    let blep = |t: f64| -> f64 {
        if t < dt {
            let t = t / dt;
            t + t - t * t - 1.0
        } else if t > 1.0 - dt {
            let t = (t - 1.0) / dt;
            t * t + t + t + 1.0
        } else {
            0.0
        }
    };
    let mut phase = 0.0;
    (0..len)
        .map(|_| {
            let saw = 2.0 * phase - 1.0 - blep(phase);
            let sine = (2.0 * PI * phase).sin();
            phase += dt;
            if phase >= 1.0 {
                phase -= 1.0;
            }
            harmonics * saw + (1.0 - harmonics) * sine
        })
        .collect()
}

/// Log-spaced band edges of the analysis filterbank, capped below Nyquist.
pub fn vocoder_bands(p: &VocoderParams, sample_rate: f64) -> Vec<(f64, f64)> {
    let ratio = p.band_hi_hz / p.band_lo_hz;
    (0..p.bands)
        .map(|i| {
            let lo = p.band_lo_hz * ratio.powf(i as f64 / p.bands as f64);
            let hi = p.band_lo_hz * ratio.powf((i + 1) as f64 / p.bands as f64);
            let centre = (lo * hi).sqrt();
            (centre, centre / (hi - lo))
        })
        .filter(|(c, _)| *c < 0.45 * sample_rate)
        .collect()
}

fn band_filter(x: &[f64], centre: f64, q: f64, sr: f64) -> Vec<f64> {
    // two cascaded sections for steeper skirts
    let y = Biquad::bandpass(centre, q, sr).run(x);
    Biquad::bandpass(centre, q, sr).run(&y)
}

fn envelope(x: &[f64], cutoff: f64, sr: f64) -> Vec<f64> {
    let a = (-2.0 * PI * cutoff / sr).exp();
    let (mut s1, mut s2) = (0.0, 0.0);
    // rectified mean of a sine is 2/pi of its peak; rescale to RMS
    let gain = PI / 2.0 / 2f64.sqrt();
    x.iter()
        .map(|v| {
            s1 = a * s1 + (1.0 - a) * v.abs();
            s2 = a * s2 + (1.0 - a) * s1;
            gain * s2
        })
        .collect()
}

/// Channel vocoder: band envelopes of the input modulate a fixed-pitch
/// carrier passed through the same filterbank.
pub fn vocode(x: &[f64], sample_rate: u32, p: &VocoderParams) -> Vec<f64> {
    let sr = sample_rate as f64;
    let car = carrier(p.carrier_frequency, p.harmonics, x.len(), sr);
    let mut out = vec![0.0; x.len()];
    if x.iter().all(|v| *v == 0.0) {
        return out;
    }
    for (centre, q) in vocoder_bands(p, sr) {
        let band = band_filter(x, centre, q, sr);
        let env = envelope(&band, 40.0, sr);
        let cb = band_filter(&car, centre, q, sr);
        let rms = (cb.iter().map(|v| v * v).sum::<f64>() / cb.len().max(1) as f64).sqrt();
        if rms < 1e-9 {
            continue;
        }
        for ((o, e), c) in out.iter_mut().zip(&env).zip(&cb) {
            *o += e * c / rms;
        }
    }
    out
}

pub fn fx_vocoder(audio: &AudioBuffer, amount: f64, params: &EffectParams) -> Result<AudioBuffer> {
    check("vocoder", amount, bounds::VOCODER)?;
    if amount == 0.0 {
        return Ok(audio.clone());
    }
    let voc = vocode(&audio.samples, audio.sample_rate, &params.vocoder);
    Ok(AudioBuffer::new(
        mix(&audio.samples, &voc, amount),
        audio.sample_rate,
    ))
}

/// Delay (ms) of flanger `kind` at time `t` seconds.
pub fn flanger_delay_ms(params: &EffectParams, kind: u8, t: f64) -> Result<f64> {
    let f = params.flanger_type(kind).ok_or(Error::UnknownFlanger(kind))?;
    Ok(f.delay + f.depth * (1.0 + (2.0 * PI * f.frequency * t).sin()) / 2.0)
}

/// Mix with a copy whose delay is swept by a sine LFO.
pub fn fx_flanger(
    audio: &AudioBuffer,
    kind: u8,
    amount: f64,
    params: &EffectParams,
) -> Result<AudioBuffer> {
    if params.flanger_type(kind).is_none() {
        return Err(Error::UnknownFlanger(kind));
    }
    check(&format!("flanger-{kind}"), amount, bounds::FLANGER)?;
    if amount == 0.0 {
        return Ok(audio.clone());
    }
    let sr = audio.sample_rate as f64;
    let x = &audio.samples;
    let wet: Vec<f64> = (0..x.len())
        .map(|i| {
            let t = i as f64 / sr;
            let d = flanger_delay_ms(params, kind, t).expect("checked") / 1000.0 * sr;
            let pos = i as f64 - d;
            let j = pos.floor();
            let frac = pos - j;
            let at = |k: f64| {
                if k < 0.0 || k as usize >= x.len() {
                    0.0
                } else {
                    x[k as usize]
                }
            };
            let (a, b) = (at(j), at(j + 1.0));
            a + frac * (b - a)
        })
        .collect();
    Ok(AudioBuffer::new(mix(x, &wet, amount), audio.sample_rate))
}

/// Amplitude modulation `x (1 - a (1 + sin(2 pi r t)) / 2)`.
pub fn fx_tremolo(audio: &AudioBuffer, amount: f64, params: &EffectParams) -> Result<AudioBuffer> {
    check("tremolo", amount, bounds::TREMOLO)?;
    let sr = audio.sample_rate as f64;
    let w = 2.0 * PI * params.tremolo_rate_hz / sr;
    let samples = audio
        .samples
        .iter()
        .enumerate()
        .map(|(i, x)| x * (1.0 - amount * (1.0 + (w * i as f64).sin()) / 2.0))
        .collect();
    Ok(AudioBuffer::new(samples, audio.sample_rate))
}
