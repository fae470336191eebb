use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::{fft, AudioBuffer};
use crate::error::{Error, Result};

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let s = (PI * i as f64 / n as f64).sin();
            s * s
        })
        .collect()
}

/// Magnitude spectrogram, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    magnitudes: Vec<f64>,
    frames: usize,
    bins: usize,
    window_size: usize,
    hop: usize,
    sample_rate: u32,
}

impl Spectrogram {
    pub(crate) fn from_parts(
        magnitudes: Vec<f64>,
        frames: usize,
        window_size: usize,
        hop: usize,
        sample_rate: u32,
    ) -> Self {
        let bins = window_size / 2 + 1;
        debug_assert_eq!(magnitudes.len(), frames * bins);
        Self {
            magnitudes,
            frames,
            bins,
            window_size,
            hop,
            sample_rate,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Frequency distance between adjacent bins, in Hz.
    pub fn bin_spacing(&self) -> f64 {
        self.sample_rate as f64 / self.window_size as f64
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.magnitudes[i * self.bins..(i + 1) * self.bins]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn get(&self, frame: usize, bin: usize) -> f64 {
        self.magnitudes[frame * self.bins + bin]
    }
}

/// Number of frames for `len` samples: `ceil(max(len - window, 0) / hop) + 1`.
pub(crate) fn frame_count(len: usize, window: usize, hop: usize) -> usize {
    len.saturating_sub(window).div_ceil(hop) + 1
}

/// Hann-windowed magnitude STFT. Frames start at sample 0 and the last frame
/// is zero-padded.
pub fn stft(signal: &AudioBuffer, window_size: usize, hop: usize) -> Result<Spectrogram> {
    if !window_size.is_power_of_two() || window_size < 2 {
        return Err(Error::invalid(format!(
            "window size {window_size} is not a power of two"
        )));
    }
    if hop == 0 || hop > window_size {
        return Err(Error::invalid(format!(
            "hop {hop} must be in 1..={window_size}"
        )));
    }
    if signal.is_empty() {
        return Err(Error::invalid("cannot take the STFT of an empty signal"));
    }
    Ok(magnitude_stft(
        signal.samples(),
        window_size,
        hop,
        signal.sample_rate(),
    ))
}

/// Unchecked core of [`stft`], shared with the loss functions.
pub(crate) fn magnitude_stft(
    samples: &[f64],
    window_size: usize,
    hop: usize,
    sample_rate: u32,
) -> Spectrogram {
    let window = hann_window(window_size);
    let frames = frame_count(samples.len(), window_size, hop);
    let bins = window_size / 2 + 1;
    let plan = fft::forward_real(window_size);
    let mut input = plan.make_input_vec();
    let mut output = plan.make_output_vec();
    let mut scratch = plan.make_scratch_vec();
    let mut magnitudes = Vec::with_capacity(frames * bins);
    for f in 0..frames {
        let start = f * hop;
        for (i, slot) in input.iter_mut().enumerate() {
            *slot = samples.get(start + i).copied().unwrap_or(0.0) * window[i];
        }
        plan.process_with_scratch(&mut input, &mut output, &mut scratch)
            .expect("fft buffer sizes come from the plan");
        magnitudes.extend(output.iter().map(|c| c.norm()));
    }
    Spectrogram::from_parts(magnitudes, frames, window_size, hop, sample_rate)
}

/// Complex STFT with enough zero padding on both ends that every input sample
/// is covered by the full set of overlapping frames, so [`ComplexStft::synthesize`]
/// reconstructs the input exactly.
#[derive(Debug, Clone)]
pub struct ComplexStft {
    pub(crate) frames: Vec<Vec<Complex64>>,
    window_size: usize,
    hop: usize,
    pad: usize,
    len: usize,
}

impl ComplexStft {
    pub fn analyze(samples: &[f64], window_size: usize, hop: usize) -> Result<Self> {
        if !window_size.is_power_of_two() || hop == 0 || hop > window_size {
            return Err(Error::invalid(format!(
                "bad STFT geometry: window {window_size}, hop {hop}"
            )));
        }
        let pad = window_size - hop;
        let padded_len = pad + samples.len() + pad;
        let frames = frame_count(padded_len, window_size, hop);
        let window = hann_window(window_size);
        let plan = fft::forward_real(window_size);
        let mut input = plan.make_input_vec();
        let mut scratch = plan.make_scratch_vec();
        let mut out = Vec::with_capacity(frames);
        for f in 0..frames {
            let start = f * hop;
            for (i, slot) in input.iter_mut().enumerate() {
                let p = start + i;
                *slot = if p >= pad && p - pad < samples.len() {
                    samples[p - pad] * window[i]
                } else {
                    0.0
                };
            }
            let mut spectrum = plan.make_output_vec();
            plan.process_with_scratch(&mut input, &mut spectrum, &mut scratch)
                .expect("fft buffer sizes come from the plan");
            out.push(spectrum);
        }
        Ok(Self {
            frames: out,
            window_size,
            hop,
            pad,
            len: samples.len(),
        })
    }

    pub fn frames(&self) -> usize {
        self.frames.len()
    }

    pub fn bins(&self) -> usize {
        self.window_size / 2 + 1
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn magnitude(&self, frame: usize, bin: usize) -> f64 {
        self.frames[frame][bin].norm()
    }

    /// Copy of this STFT with each bin scaled by `mask(frame, bin)`.
    pub fn masked(&self, mask: impl Fn(usize, usize) -> f64) -> Self {
        let frames = self
            .frames
            .iter()
            .enumerate()
            .map(|(f, spec)| {
                spec.iter()
                    .enumerate()
                    .map(|(b, c)| c * mask(f, b))
                    .collect()
            })
            .collect();
        Self {
            frames,
            ..self.clone_geometry()
        }
    }

    fn clone_geometry(&self) -> Self {
        Self {
            frames: Vec::new(),
            window_size: self.window_size,
            hop: self.hop,
            pad: self.pad,
            len: self.len,
        }
    }

    /// Weighted overlap-add inverse (Hann synthesis, normalised by the summed
    /// squared window).
    pub fn synthesize(&self) -> Vec<f64> {
        let n = self.window_size;
        let window = hann_window(n);
        let plan = fft::inverse_real(n);
        let mut scratch = plan.make_scratch_vec();
        let mut frame_out = plan.make_output_vec();
        let padded_len = (self.frames.len() - 1) * self.hop + n;
        let mut acc = vec![0.0; padded_len];
        let mut norm = vec![0.0; padded_len];
        for (f, spec) in self.frames.iter().enumerate() {
            let mut spec = spec.clone();
            // DC and Nyquist of a real signal have no imaginary part
            spec[0].im = 0.0;
            spec[n / 2].im = 0.0;
            plan.process_with_scratch(&mut spec, &mut frame_out, &mut scratch)
                .expect("fft buffer sizes come from the plan");
            let start = f * self.hop;
            for i in 0..n {
                acc[start + i] += frame_out[i] / n as f64 * window[i];
                norm[start + i] += window[i] * window[i];
            }
        }
        (0..self.len)
            .map(|i| {
                let p = i + self.pad;
                if norm[p] > 1e-12 {
                    acc[p] / norm[p]
                } else {
                    0.0
                }
            })
            .collect()
    }
}
