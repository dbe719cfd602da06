//! Phase-vocoder time-scale modification and resampling-based pitch shifting.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::dsp::audio::AudioBuffer;
use crate::dsp::stft::Stft;
use crate::error::{Error, Result};
use crate::voice_space::SPEED_RANGE;

pub const WINDOW: usize = 1024;
pub const HOP: usize = 256;

fn wrap(phase: f64) -> f64 {
    phase - 2.0 * PI * ((phase + PI) / (2.0 * PI)).floor()
}

/// Tempo change by `rate` (>1 is faster) without range checks. The output
/// holds exactly `round(len / rate)` samples.
pub fn phase_vocoder(x: &[f64], rate: f64, stft: &Stft) -> Vec<f64> {
    assert!(rate > 0.0);
    let out_len = (x.len() as f64 / rate).round() as usize;
    if x.is_empty() {
        return Vec::new();
    }
    let spec = stft.forward(x);
    let bins = stft.bins();
    let n_frames = spec.len();
    let hop = stft.hop() as f64;
    let advance: Vec<f64> = (0..bins)
        .map(|k| 2.0 * PI * k as f64 * hop / stft.n_fft() as f64)
        .collect();
    let zero = vec![Complex64::new(0.0, 0.0); bins];
    let frame = |i: usize| if i < n_frames { &spec[i] } else { &zero };

    let mut phase: Vec<f64> = spec[0].iter().map(|c| c.arg()).collect();
    let mut out = Vec::new();
    let mut t: f64 = 0.0;
    let out_frames = out_len / stft.hop() + 1;
    while out.len() < out_frames {
        let i = t.floor() as usize;
        let alpha = t - i as f64;
        let (a, b) = (frame(i), frame(i + 1));
        let mut col = Vec::with_capacity(bins);
        for k in 0..bins {
            let mag = (1.0 - alpha) * a[k].norm() + alpha * b[k].norm();
            col.push(Complex64::from_polar(mag, phase[k]));
            let dphi = wrap(b[k].arg() - a[k].arg() - advance[k]);
            phase[k] += advance[k] + dphi;
        }
        out.push(col);
        t += rate;
    }
    stft.inverse(&out, out_len)
}

/// Tempo change that keeps pitch. Output duration is input duration / `speed`.
pub fn time_stretch(audio: &AudioBuffer, speed: f64) -> Result<AudioBuffer> {
    let (lo, hi) = SPEED_RANGE;
    if !(lo - 1e-9..=hi + 1e-9).contains(&speed) {
        return Err(Error::OutOfRange {
            what: "speed factor",
            value: speed,
            lo,
            hi,
        });
    }
    if (speed - 1.0).abs() < 1e-12 {
        return Ok(audio.clone());
    }
    let stft = Stft::new(WINDOW, HOP);
    Ok(AudioBuffer::new(
        phase_vocoder(&audio.samples, speed, &stft),
        audio.sample_rate,
    ))
}

/// Cubic (Catmull-Rom) resampling of `x` to `out_len` samples.
pub fn resample_to_len(x: &[f64], out_len: usize) -> Vec<f64> {
    if x.is_empty() || out_len == 0 {
        return vec![0.0; out_len];
    }
    let ratio = x.len() as f64 / out_len as f64;
    let at = |i: isize| -> f64 {
        if i < 0 || i as usize >= x.len() {
            0.0
        } else {
            x[i as usize]
        }
    };
    (0..out_len)
        .map(|j| {
            let pos = j as f64 * ratio;
            let i = pos.floor() as isize;
            let t = pos - i as f64;
            let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
            p1 + 0.5
                * t
                * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)))
        })
        .collect()
}

/// Transpose by `semitones` keeping duration: stretch by the inverse ratio,
/// then resample back to the original length.
pub fn pitch_shift(x: &[f64], semitones: f64, stft: &Stft) -> Vec<f64> {
    let ratio = 2f64.powf(semitones / 12.0);
    let stretched = phase_vocoder(x, 1.0 / ratio, stft);
    resample_to_len(&stretched, x.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::audio::DEFAULT_SAMPLE_RATE;

    /// Autocorrelation f0 estimate over the middle of the buffer.
    fn acf_f0(x: &[f64], sr: f64) -> f64 {
        let mid = &x[x.len() / 4..x.len() * 3 / 4];
        let (min_lag, max_lag) = ((sr / 1000.0) as usize, (sr / 50.0) as usize);
        let r = |lag: usize| -> f64 {
            mid[..mid.len() - lag]
                .iter()
                .zip(&mid[lag..])
                .map(|(a, b)| a * b)
                .sum()
        };
        let mut best = (min_lag, f64::MIN);
        for lag in min_lag..max_lag {
            let v = r(lag);
            if v > best.1 {
                best = (lag, v);
            }
        }
        // parabolic refinement
        let l = best.0;
        let (a, b, c) = (r(l - 1), r(l), r(l + 1));
        let shift = 0.5 * (a - c) / (a - 2.0 * b + c);
        sr / (l as f64 + shift)
    }

    #[test]
    fn identity_speed_keeps_length() {
        let buf = AudioBuffer::sine(220.0, 0.5, 22050, DEFAULT_SAMPLE_RATE);
        assert_eq!(time_stretch(&buf, 1.0).unwrap().len(), 22050);
    }

    #[test]
    fn fast_speed_length() {
        let buf = AudioBuffer::sine(220.0, 0.5, 22050, DEFAULT_SAMPLE_RATE);
        let out = time_stretch(&buf, 1.53).unwrap();
        let expected = 22050.0 / 1.53; // 14411.8
        assert!((out.len() as f64 - expected).abs() <= 0.02 * expected);
    }

    #[test]
    fn slow_speed_keeps_pitch() {
        let buf = AudioBuffer::sine(220.0, 0.5, 22050, DEFAULT_SAMPLE_RATE);
        let out = time_stretch(&buf, 0.46).unwrap();
        let f0 = acf_f0(&out.samples, 22050.0);
        assert!((f0 - 220.0).abs() < 5.0, "f0 = {f0}");
    }

    #[test]
    fn out_of_range_speed() {
        let buf = AudioBuffer::silence(100, DEFAULT_SAMPLE_RATE);
        assert!(matches!(
            time_stretch(&buf, 2.0),
            Err(Error::OutOfRange { .. })
        ));
        assert!(time_stretch(&buf, 0.3).is_err());
    }

    #[test]
    fn resample_preserves_constant() {
        let y = resample_to_len(&[1.0; 100], 60);
        assert!(y[1..58].iter().all(|v| (v - 1.0).abs() < 1e-12));
    }
}
