//! Signal-analysis oracles shared by integration and acceptance tests.
//! Built directly on rustfft; nothing here calls into the crate's DSP code.
#![allow(dead_code)]

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

pub fn fft(x: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(if i < x.len() { x[i] } else { 0.0 }, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf
}

/// Hann-windowed magnitude spectrum of `x` zero-padded (or truncated) to `n`.
pub fn magnitude_spectrum(x: &[f64], n: usize) -> Vec<f64> {
    let m = x.len().min(n);
    let w: Vec<f64> = (0..m)
        .map(|i| x[i] * (0.5 - 0.5 * (2.0 * PI * i as f64 / m as f64).cos()))
        .collect();
    fft(&w, n)[..n / 2 + 1].iter().map(|c| c.norm()).collect()
}

/// Parabolic interpolation of bin `k` on log magnitude.
pub fn interp_bin(mags: &[f64], k: usize) -> f64 {
    if k == 0 || k + 1 >= mags.len() {
        return k as f64;
    }
    let (a, b, c) = (
        mags[k - 1].max(1e-300).ln(),
        mags[k].max(1e-300).ln(),
        mags[k + 1].max(1e-300).ln(),
    );
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-300 {
        k as f64
    } else {
        k as f64 + 0.5 * (a - c) / denom
    }
}

/// Frequency of the strongest component within `[lo, hi]` Hz.
pub fn peak_in_band(mags: &[f64], sr: f64, n: usize, lo: f64, hi: f64) -> (f64, f64) {
    let df = sr / n as f64;
    let (k0, k1) = ((lo / df).floor() as usize, ((hi / df).ceil() as usize).min(mags.len() - 1));
    let k = (k0..=k1)
        .max_by(|&a, &b| mags[a].partial_cmp(&mags[b]).unwrap())
        .unwrap();
    (interp_bin(mags, k) * df, mags[k])
}

/// Local maxima above `rel` times the global maximum, strongest first.
pub fn peaks(mags: &[f64], sr: f64, n: usize, rel: f64) -> Vec<(f64, f64)> {
    let max = mags.iter().cloned().fold(0.0, f64::max);
    let df = sr / n as f64;
    let mut out: Vec<(f64, f64)> = (1..mags.len() - 1)
        .filter(|&k| mags[k] > mags[k - 1] && mags[k] >= mags[k + 1] && mags[k] > rel * max)
        .map(|k| (interp_bin(mags, k) * df, mags[k]))
        .collect();
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    out
}

/// Autocorrelation pitch estimate restricted to `[fmin, fmax]`.
pub fn acf_f0(x: &[f64], sr: f64, fmin: f64, fmax: f64) -> f64 {
    let (min_lag, max_lag) = ((sr / fmax).floor() as usize, (sr / fmin).ceil() as usize);
    let r = |lag: usize| -> f64 {
        x[..x.len() - lag]
            .iter()
            .zip(&x[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / (x.len() - lag) as f64
    };
    let vals: Vec<f64> = (min_lag..=max_lag + 1).map(r).collect();
    let max = vals[..vals.len() - 1].iter().cloned().fold(f64::MIN, f64::max);
    // first local maximum reaching 90% of the global one avoids octave errors
    let mut best = max_lag;
    for i in 1..vals.len() - 1 {
        if vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1] && vals[i] >= 0.9 * max {
            best = min_lag + i;
            break;
        }
    }
    let l = best;
    let (a, b, c) = (r(l - 1), r(l), r(l + 1));
    let denom = a - 2.0 * b + c;
    let shift = if denom.abs() > 1e-300 { 0.5 * (a - c) / denom } else { 0.0 };
    sr / (l as f64 + shift)
}

/// Lag in `[0, max_lag]` maximizing the cross-correlation of `y` against `x`.
pub fn xcorr_lag(x: &[f64], y: &[f64], max_lag: usize) -> usize {
    (0..=max_lag)
        .max_by(|&a, &b| {
            let c = |lag: usize| -> f64 {
                x.iter().zip(&y[lag..]).map(|(p, q)| p * q).sum::<f64>()
            };
            c(a).partial_cmp(&c(b)).unwrap()
        })
        .unwrap()
}

/// min over g of ||a - g b|| / ||a||.
pub fn rel_rms_after_gain(a: &[f64], b: &[f64]) -> f64 {
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let bb: f64 = b.iter().map(|y| y * y).sum();
    let aa: f64 = a.iter().map(|x| x * x).sum();
    let g = if bb > 0.0 { ab / bb } else { 0.0 };
    let err: f64 = a.iter().zip(b).map(|(x, y)| (x - g * y).powi(2)).sum();
    (err / aa).sqrt()
}

/// Magnitude of the analytic signal.
pub fn hilbert_envelope(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut spec = fft(x, n);
    for (k, c) in spec.iter_mut().enumerate() {
        let g = if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *c *= g;
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    spec.iter().map(|c| c.norm() / n as f64).collect()
}

pub fn variance(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
}

/// Harmonic-rich tone gliding linearly from `f_start` to `f_end` Hz.
pub fn glide(f_start: f64, f_end: f64, len: usize, sr: f64) -> Vec<f64> {
    let mut phase = 0.0;
    (0..len)
        .map(|i| {
            let f = f_start + (f_end - f_start) * i as f64 / len as f64;
            phase += 2.0 * PI * f / sr;
            (1..=5).map(|h| (h as f64 * phase).sin() / h as f64).sum::<f64>() * 0.4
        })
        .collect()
}

/// Frame-wise pitch track with `frame` samples and `hop` spacing.
pub fn f0_track(x: &[f64], sr: f64, frame: usize, hop: usize, fmin: f64, fmax: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut s = 0;
    while s + frame <= x.len() {
        out.push(acf_f0(&x[s..s + frame], sr, fmin, fmax));
        s += hop;
    }
    out
}

/// Local minima of `|H|` below `hi` Hz, interpolated.
pub fn notches(mags: &[f64], sr: f64, n: usize, hi: f64) -> Vec<f64> {
    let df = sr / n as f64;
    let kmax = ((hi / df) as usize).min(mags.len() - 2);
    let inv: Vec<f64> = mags.iter().map(|m| 1.0 / m.max(1e-12)).collect();
    (1..kmax)
        .filter(|&k| mags[k] < mags[k - 1] && mags[k] <= mags[k + 1])
        .map(|k| interp_bin(&inv, k) * df)
        .collect()
}
