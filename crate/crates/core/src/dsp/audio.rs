use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 22050;

/// Mono PCM block. Samples are nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self::new(vec![0.0; len], sample_rate)
    }

    /// Sine tone of `freq` Hz at amplitude `amp`.
    pub fn sine(freq: f64, amp: f64, len: usize, sample_rate: u32) -> Self {
        let w = 2.0 * std::f64::consts::PI * freq / sample_rate as f64;
        Self::new(
            (0..len).map(|i| amp * (w * i as f64).sin()).collect(),
            sample_rate,
        )
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.len() as f64).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|s| s.is_finite())
    }

    /// Scale so the peak equals `target`. Silent buffers are left alone.
    pub fn normalize_peak(&mut self, target: f64) {
        let peak = self.peak();
        if peak > 0.0 {
            let g = target / peak;
            self.samples.iter_mut().for_each(|s| *s *= g);
        }
    }

    pub fn normalized_dbfs(mut self, dbfs: f64) -> Self {
        self.normalize_peak(10f64.powf(dbfs / 20.0));
        self
    }

    fn spec(&self) -> hound::WavSpec {
        hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        }
    }

    fn to_i16(s: f64) -> i16 {
        (s.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16
    }

    /// 16-bit PCM mono RIFF/WAVE, little-endian.
    pub fn to_wav_bytes(&self) -> Result<Vec<u8>> {
        let mut cur = Cursor::new(Vec::new());
        {
            let mut w = hound::WavWriter::new(&mut cur, self.spec())?;
            for &s in &self.samples {
                w.write_sample(Self::to_i16(s))?;
            }
            w.finalize()?;
        }
        Ok(cur.into_inner())
    }

    pub fn from_wav_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = hound::WavReader::new(Cursor::new(bytes))?;
        Self::read_from(&mut r)
    }

    fn read_from<R: std::io::Read>(r: &mut hound::WavReader<R>) -> Result<Self> {
        let spec = r.spec();
        let channels = spec.channels as usize;
        let raw: Vec<f64> = match spec.sample_format {
            hound::SampleFormat::Int => {
                let scale = (1i64 << (spec.bits_per_sample - 1)) as f64;
                r.samples::<i32>()
                    .map(|s| s.map(|v| v as f64 / scale))
                    .collect::<std::result::Result<_, _>>()?
            }
            hound::SampleFormat::Float => r
                .samples::<f32>()
                .map(|s| s.map(|v| v as f64))
                .collect::<std::result::Result<_, _>>()?,
        };
        if channels == 0 {
            return Err(Error::Invalid("wav with zero channels".into()));
        }
        // downmix
        let samples = raw
            .chunks(channels)
            .map(|c| c.iter().sum::<f64>() / channels as f64)
            .collect();
        Ok(Self::new(samples, spec.sample_rate))
    }

    pub fn write_wav(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_wav_bytes()?)?;
        Ok(())
    }

    pub fn read_wav(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = hound::WavReader::open(path)?;
        Self::read_from(&mut r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wav_header_is_pcm16_mono() {
        let buf = AudioBuffer::sine(440.0, 0.5, 100, DEFAULT_SAMPLE_RATE);
        let bytes = buf.to_wav_bytes().unwrap();
        assert_eq!(&bytes[0..4], b"RIFF");
        assert_eq!(&bytes[8..12], b"WAVE");
        // fmt chunk: PCM, 1 channel, 22050 Hz, 16 bits
        assert_eq!(u16::from_le_bytes([bytes[20], bytes[21]]), 1);
        assert_eq!(u16::from_le_bytes([bytes[22], bytes[23]]), 1);
        assert_eq!(
            u32::from_le_bytes([bytes[24], bytes[25], bytes[26], bytes[27]]),
            22050
        );
        assert_eq!(u16::from_le_bytes([bytes[34], bytes[35]]), 16);
        assert_eq!(bytes.len(), 44 + 200);
    }

    #[test]
    fn wav_roundtrip_within_quantization() {
        let buf = AudioBuffer::sine(220.0, 0.9, 2000, DEFAULT_SAMPLE_RATE);
        let back = AudioBuffer::from_wav_bytes(&buf.to_wav_bytes().unwrap()).unwrap();
        assert_eq!(back.len(), buf.len());
        for (a, b) in buf.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() < 1.0 / 16384.0);
        }
    }

    #[test]
    fn normalize_leaves_silence() {
        let mut s = AudioBuffer::silence(10, 8000);
        s.normalize_peak(0.9);
        assert_eq!(s.peak(), 0.0);
    }
}
