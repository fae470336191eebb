//! Signal containers and the transforms everything else is built on.

mod dct;
pub(crate) mod envelope;
pub(crate) mod fft;
pub(crate) mod resample;
pub(crate) mod stft;
pub mod wav;

pub use dct::{dct2, idct2};
pub use envelope::rms_envelope;
pub use resample::resample;
pub use stft::{hann_window, stft, ComplexStft, Spectrogram};
pub use wav::{read_wav, write_wav, BitDepth, WavInfo};

use crate::error::{Error, Result};

/// Sample rate every model renders and analyses at.
pub const MODEL_RATE: u32 = 24_000;

/// Mono samples tagged with their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    /// Wraps `samples`, rejecting a zero rate or any non-finite sample.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// For internal producers whose output is finite by construction.
    pub(crate) fn from_parts(samples: Vec<f64>, sample_rate: u32) -> Self {
        debug_assert!(sample_rate > 0);
        debug_assert!(samples.iter().all(|s| s.is_finite()));
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self::from_parts(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    /// Copy truncated or zero-padded to exactly `len` samples.
    pub fn fitted_to(&self, len: usize) -> Self {
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        Self::from_parts(samples, self.sample_rate)
    }

    /// Sub-range `[start, end)`, clamped to the buffer.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let end = end.min(self.samples.len());
        let start = start.min(end);
        Self::from_parts(self.samples[start..end].to_vec(), self.sample_rate)
    }

    /// Element-wise sum. The shorter operand is treated as zero-padded.
    pub fn mix(&self, other: &AudioBuffer) -> Result<Self> {
        if self.sample_rate != other.sample_rate {
            return Err(Error::invalid(format!(
                "cannot mix {} Hz with {} Hz",
                self.sample_rate, other.sample_rate
            )));
        }
        let len = self.len().max(other.len());
        let samples = (0..len)
            .map(|i| {
                self.samples.get(i).copied().unwrap_or(0.0)
                    + other.samples.get(i).copied().unwrap_or(0.0)
            })
            .collect();
        Ok(Self::from_parts(samples, self.sample_rate))
    }
}
