//! Short-time Fourier transform with a periodic Hann window and centered frames.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub type Spectrogram = Vec<Vec<Complex64>>;

pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

pub struct Stft {
    window: Vec<f64>,
    hop: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Stft {
    pub fn new(window: usize, hop: usize) -> Self {
        assert!(window >= 2 && hop >= 1 && hop <= window);
        let mut planner = FftPlanner::new();
        Self {
            window: hann(window),
            hop,
            fwd: planner.plan_fft_forward(window),
            inv: planner.plan_fft_inverse(window),
        }
    }

    pub fn n_fft(&self) -> usize {
        self.window.len()
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn bins(&self) -> usize {
        self.n_fft() / 2 + 1
    }

    fn pad(&self) -> usize {
        self.n_fft() / 2
    }

    pub fn n_frames(&self, len: usize) -> usize {
        len / self.hop + 1
    }

    /// Frames of `bins()` complex coefficients. Frame `t` is centered on
    /// sample `t * hop`; the signal is zero-padded at both ends.
    pub fn forward(&self, x: &[f64]) -> Spectrogram {
        let n = self.n_fft();
        let pad = self.pad();
        let frames = self.n_frames(x.len());
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut out = Vec::with_capacity(frames);
        for t in 0..frames {
            let start = (t * self.hop) as isize - pad as isize;
            for (i, b) in buf.iter_mut().enumerate() {
                let idx = start + i as isize;
                let v = if idx >= 0 && (idx as usize) < x.len() {
                    x[idx as usize]
                } else {
                    0.0
                };
                *b = Complex64::new(v * self.window[i], 0.0);
            }
            self.fwd.process(&mut buf);
            out.push(buf[..self.bins()].to_vec());
        }
        out
    }

    /// Weighted overlap-add inverse, normalized by the summed squared window.
    pub fn inverse(&self, spec: &Spectrogram, len: usize) -> Vec<f64> {
        let n = self.n_fft();
        let pad = self.pad();
        let total = pad + len + n;
        let mut acc = vec![0.0; total.max((spec.len().saturating_sub(1)) * self.hop + n)];
        let mut wsum = vec![0.0; acc.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (t, frame) in spec.iter().enumerate() {
            for k in 0..n {
                buf[k] = if k < frame.len() {
                    frame[k]
                } else {
                    frame[n - k].conj()
                };
            }
            // DC and Nyquist must be real for a real signal
            buf[0].im = 0.0;
            if n % 2 == 0 {
                buf[n / 2].im = 0.0;
            }
            self.inv.process(&mut buf);
            let start = t * self.hop;
            for i in 0..n {
                let w = self.window[i];
                acc[start + i] += buf[i].re / n as f64 * w;
                wsum[start + i] += w * w;
            }
        }
        (0..len)
            .map(|i| {
                let j = i + pad;
                if j < acc.len() && wsum[j] > 1e-10 {
                    acc[j] / wsum[j]
                } else {
                    0.0
                }
            })
            .collect()
    }
}
