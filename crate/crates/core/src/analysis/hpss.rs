use serde::{Deserialize, Serialize};

use crate::audio::stft::ComplexStft;
use crate::audio::{AudioBuffer, Spectrogram};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HpssConfig {
    pub window: usize,
    pub hop: usize,
    /// Median length across frames, for the harmonic estimate.
    pub harmonic_median: usize,
    /// Median length across bins, for the percussive estimate.
    pub percussive_median: usize,
    pub margin: f64,
    /// Soft ratio masks in place of binary ones.
    pub soft: bool,
}

impl Default for HpssConfig {
    fn default() -> Self {
        Self {
            window: 1024,
            hop: 256,
            harmonic_median: 31,
            percussive_median: 31,
            margin: 8.0,
            soft: false,
        }
    }
}

impl HpssConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin >= 1.0 && self.margin.is_finite()) {
            return Err(Error::invalid(format!(
                "HPSS margin must be >= 1, got {}",
                self.margin
            )));
        }
        if !self.window.is_power_of_two() || self.hop == 0 || self.hop > self.window {
            return Err(Error::invalid(format!(
                "bad HPSS geometry: window {}, hop {}",
                self.window, self.hop
            )));
        }
        if self.harmonic_median == 0 || self.percussive_median == 0 {
            return Err(Error::invalid("HPSS median lengths must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub harmonic: AudioBuffer,
    pub transient: AudioBuffer,
    /// Time-domain inverse of the bins assigned to neither mask.
    pub noise: AudioBuffer,
    pub noise_spectrogram: Spectrogram,
}

/// Median of the values within `half` of each index, truncated at the ends.
fn running_median(values: &[f64], len: usize, out: &mut [f64], scratch: &mut Vec<f64>) {
    let half = len / 2;
    for (i, o) in out.iter_mut().enumerate().take(values.len()) {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(values.len());
        scratch.clear();
        scratch.extend_from_slice(&values[lo..hi]);
        let mid = scratch.len() / 2;
        let (_, m, _) = scratch.select_nth_unstable_by(mid, f64::total_cmp);
        *o = *m;
    }
}

/// Masks `(harmonic, percussive)` for one bin given both median estimates.
fn masks(h: f64, p: f64, config: &HpssConfig) -> (f64, f64) {
    let m = config.margin;
    if config.soft {
        let (h2, p2) = (h * h, p * p);
        let mh = if h2 + m * m * p2 > 0.0 {
            h2 / (h2 + m * m * p2)
        } else {
            0.0
        };
        let mp = if p2 + m * m * h2 > 0.0 {
            p2 / (p2 + m * m * h2)
        } else {
            0.0
        };
        (mh, mp)
    } else {
        ((h > m * p) as u8 as f64, (p > m * h) as u8 as f64)
    }
}

/// Harmonic and percussive masks, frame-major (`frame * bins + bin`).
#[derive(Debug, Clone, PartialEq)]
pub struct HpssMasks {
    pub frames: usize,
    pub bins: usize,
    pub harmonic: Vec<f64>,
    pub percussive: Vec<f64>,
}

fn check_input(signal: &AudioBuffer, config: &HpssConfig) -> Result<()> {
    config.validate()?;
    if signal.len() < config.window {
        return Err(Error::invalid(format!(
            "signal of {} samples is shorter than the {}-sample HPSS window",
            signal.len(),
            config.window
        )));
    }
    Ok(())
}

fn compute_masks(mag: &[f64], frames: usize, bins: usize, config: &HpssConfig) -> HpssMasks {
    let mut scratch = Vec::new();
    let mut harm = vec![0.0; frames * bins];
    let mut column = vec![0.0; frames];
    let mut filtered = vec![0.0; frames];
    for b in 0..bins {
        for f in 0..frames {
            column[f] = mag[f * bins + b];
        }
        running_median(&column, config.harmonic_median, &mut filtered, &mut scratch);
        for f in 0..frames {
            harm[f * bins + b] = filtered[f];
        }
    }
    let mut perc = vec![0.0; frames * bins];
    for f in 0..frames {
        let row = &mag[f * bins..(f + 1) * bins];
        running_median(
            row,
            config.percussive_median,
            &mut perc[f * bins..(f + 1) * bins],
            &mut scratch,
        );
    }
    let mut harmonic = vec![0.0; frames * bins];
    let mut percussive = vec![0.0; frames * bins];
    for i in 0..frames * bins {
        (harmonic[i], percussive[i]) = masks(harm[i], perc[i], config);
    }
    HpssMasks {
        frames,
        bins,
        harmonic,
        percussive,
    }
}

fn magnitudes(spec: &ComplexStft) -> Vec<f64> {
    let (frames, bins) = (spec.frames(), spec.bins());
    (0..frames)
        .flat_map(|f| (0..bins).map(move |b| (f, b)))
        .map(|(f, b)| spec.magnitude(f, b))
        .collect()
}

/// The masks [`hpss_decompose`] applies to `signal`.
pub fn hpss_masks(signal: &AudioBuffer, config: &HpssConfig) -> Result<HpssMasks> {
    check_input(signal, config)?;
    let spec = ComplexStft::analyze(signal.samples(), config.window, config.hop)?;
    Ok(compute_masks(
        &magnitudes(&spec),
        spec.frames(),
        spec.bins(),
        config,
    ))
}

/// Splits `signal` into harmonic, percussive and residual parts by median
/// filtering its spectrogram along time and frequency.
pub fn hpss_decompose(signal: &AudioBuffer, config: &HpssConfig) -> Result<Decomposition> {
    check_input(signal, config)?;
    let spec = ComplexStft::analyze(signal.samples(), config.window, config.hop)?;
    let (frames, bins) = (spec.frames(), spec.bins());
    let mag = magnitudes(&spec);
    let HpssMasks {
        harmonic: mask_h,
        percussive: mask_p,
        ..
    } = compute_masks(&mag, frames, bins, config);
    let harmonic = spec.masked(|f, b| mask_h[f * bins + b]).synthesize();
    let transient = spec.masked(|f, b| mask_p[f * bins + b]).synthesize();
    let noise = spec
        .masked(|f, b| (1.0 - mask_h[f * bins + b] - mask_p[f * bins + b]).max(0.0))
        .synthesize();
    let residual: Vec<f64> = mag
        .iter()
        .enumerate()
        .map(|(i, m)| (m - m * mask_h[i] - m * mask_p[i]).max(0.0))
        .collect();
    let rate = signal.sample_rate();
    Ok(Decomposition {
        harmonic: AudioBuffer::from_parts(harmonic, rate),
        transient: AudioBuffer::from_parts(transient, rate),
        noise: AudioBuffer::from_parts(noise, rate),
        noise_spectrogram: Spectrogram::from_parts(
            residual,
            frames,
            config.window,
            config.hop,
            rate,
        ),
    })
}

/// Block length used to locate the transient onset.
pub const ONSET_BLOCK: usize = 256;
/// Fraction of the loudest block's energy that marks the onset.
pub const ONSET_THRESHOLD: f64 = 0.1;

/// `len` samples of `percussive` starting at its onset: the first block
/// whose energy reaches a tenth of the loudest block. Zero-padded at the end.
pub fn transient_target(percussive: &AudioBuffer, len: usize) -> (usize, AudioBuffer) {
    let x = percussive.samples();
    let energies: Vec<f64> = x
        .chunks(ONSET_BLOCK)
        .map(|c| c.iter().map(|v| v * v).sum())
        .collect();
    let peak = energies.iter().cloned().fold(0.0, f64::max);
    let onset = if peak > 0.0 {
        energies
            .iter()
            .position(|e| *e >= ONSET_THRESHOLD * peak)
            .unwrap_or(0)
            * ONSET_BLOCK
    } else {
        0
    };
    let mut clip: Vec<f64> = x[onset.min(x.len())..].iter().take(len).copied().collect();
    clip.resize(len, 0.0);
    (
        onset,
        AudioBuffer::from_parts(clip, percussive.sample_rate()),
    )
}
