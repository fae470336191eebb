//! Training objectives: normalised multi-resolution STFT loss, MAE of RMS
//! envelopes, and cent deviation of partial frequencies.

use serde::{Deserialize, Serialize};

use crate::audio::envelope::rms_frames;
use crate::audio::stft::magnitude_stft;
use crate::audio::{AudioBuffer, Spectrogram};
use crate::error::{Error, Result};

pub const HARMONIC_WINDOWS: [usize; 5] = [256, 512, 1024, 2048, 4096];
pub const TRANSIENT_WINDOWS: [usize; 4] = [32, 64, 128, 256];
pub const NOISE_WINDOWS: [usize; 5] = [32, 64, 128, 256, 512];
pub const TRICHORD_WINDOWS: [usize; 3] = [256, 512, 1024];

/// Frames overlap by 25% of their length.
pub const STFT_OVERLAP: f64 = 0.25;
pub const RMS_WINDOW: usize = 60;
pub const RMS_OVERLAP: f64 = 0.25;
pub const CENT_PARTIALS: usize = 6;
/// Floor applied to the target norm when the target is silent.
pub const NORM_FLOOR: f64 = 1e-8;

pub fn loss_hop(window: usize) -> usize {
    ((window as f64 * (1.0 - STFT_OVERLAP)).round() as usize).max(1)
}

/// Result of one multi-resolution STFT comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StftLoss {
    /// Mean of `per_resolution`.
    pub value: f64,
    pub per_resolution: Vec<(usize, f64)>,
    /// The target had (near) zero energy and the norm floor was used.
    pub silent_target: bool,
}

/// All loss terms of one evaluation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub stft_loss: f64,
    pub rms_loss: f64,
    pub cent_loss: f64,
    pub per_resolution: Vec<(usize, f64)>,
}

impl LossReport {
    pub fn csv_header(&self) -> String {
        let mut cols = vec![
            "stft_loss".to_string(),
            "rms_loss".into(),
            "cent_loss".into(),
        ];
        cols.extend(self.per_resolution.iter().map(|(w, _)| format!("stft_{w}")));
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![
            format!("{:e}", self.stft_loss),
            format!("{:e}", self.rms_loss),
            format!("{:e}", self.cent_loss),
        ];
        cols.extend(self.per_resolution.iter().map(|(_, v)| format!("{v:e}")));
        cols.join(",")
    }
}

fn padded(x: &[f64], len: usize) -> std::borrow::Cow<'_, [f64]> {
    if x.len() == len {
        std::borrow::Cow::Borrowed(x)
    } else {
        let mut v = x.to_vec();
        v.resize(len, 0.0);
        std::borrow::Cow::Owned(v)
    }
}

struct ResolutionTarget {
    window: usize,
    spec: Spectrogram,
    norm: f64,
}

/// Target spectrograms cached for repeated comparisons against one target.
pub struct MultiResTarget {
    target_len: usize,
    sample_rate: u32,
    resolutions: Vec<ResolutionTarget>,
    silent: bool,
}

impl MultiResTarget {
    pub fn new(target: &[f64], sample_rate: u32, windows: &[usize]) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::invalid("need at least one STFT window"));
        }
        if let Some(w) = windows.iter().find(|w| !w.is_power_of_two() || **w < 2) {
            return Err(Error::invalid(format!("window {w} is not a power of two")));
        }
        if target.is_empty() {
            return Err(Error::invalid("empty target"));
        }
        let mut silent = false;
        let resolutions = windows
            .iter()
            .map(|&window| {
                let spec = magnitude_stft(target, window, loss_hop(window), sample_rate);
                let raw = spec.as_slice().iter().map(|m| m * m).sum::<f64>().sqrt();
                if raw < NORM_FLOOR {
                    silent = true;
                }
                ResolutionTarget {
                    window,
                    spec,
                    norm: raw.max(NORM_FLOOR),
                }
            })
            .collect();
        Ok(Self {
            target_len: target.len(),
            sample_rate,
            resolutions,
            silent,
        })
    }

    pub fn target_len(&self) -> usize {
        self.target_len
    }

    /// Compares `pred` (zero-padded or truncated to the target length) with
    /// the cached target.
    pub fn loss(&self, pred: &[f64]) -> StftLoss {
        let pred = padded(&pred[..pred.len().min(self.target_len)], self.target_len);
        let per_resolution: Vec<(usize, f64)> = self
            .resolutions
            .iter()
            .map(|r| {
                let p = magnitude_stft(&pred, r.window, loss_hop(r.window), self.sample_rate);
                let l1: f64 = r
                    .spec
                    .as_slice()
                    .iter()
                    .zip(p.as_slice())
                    .map(|(t, q)| (t - q).abs())
                    .sum();
                (r.window, l1 / r.norm)
            })
            .collect();
        let value = per_resolution.iter().map(|r| r.1).sum::<f64>() / per_resolution.len() as f64;
        StftLoss {
            value,
            per_resolution,
            silent_target: self.silent,
        }
    }
}

/// `mean_w ||S_t| - |S_p||_1 / ||S_t||_2`, Hann STFT with hop `0.75 w` per
/// window `w`. The shorter signal is zero-padded.
pub fn multires_stft_loss(
    pred: &AudioBuffer,
    target: &AudioBuffer,
    windows: &[usize],
) -> Result<StftLoss> {
    if pred.sample_rate() != target.sample_rate() {
        return Err(Error::invalid("pred and target sample rates differ"));
    }
    let len = pred.len().max(target.len()).max(1);
    let t = padded(target.samples(), len);
    let cached = MultiResTarget::new(&t, target.sample_rate(), windows)?;
    Ok(cached.loss(pred.samples()))
}

/// Mean absolute difference of the 60-sample, 25%-overlap RMS envelopes.
pub fn rms_mae_loss(pred: &AudioBuffer, target: &AudioBuffer) -> f64 {
    rms_mae(pred.samples(), target.samples())
}

pub(crate) fn rms_mae(pred: &[f64], target: &[f64]) -> f64 {
    let len = pred.len().max(target.len());
    if len == 0 {
        return 0.0;
    }
    let p = rms_frames(&padded(pred, len), RMS_WINDOW, RMS_OVERLAP);
    let t = rms_frames(&padded(target, len), RMS_WINDOW, RMS_OVERLAP);
    p.iter().zip(&t).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64
}

/// Cached RMS envelope of a target.
pub struct RmsTarget {
    envelope: Vec<f64>,
    len: usize,
}

impl RmsTarget {
    pub fn new(target: &[f64]) -> Self {
        Self {
            envelope: rms_frames(target, RMS_WINDOW, RMS_OVERLAP),
            len: target.len(),
        }
    }

    pub fn loss(&self, pred: &[f64]) -> f64 {
        if self.len == 0 {
            return 0.0;
        }
        let p = rms_frames(
            &padded(&pred[..pred.len().min(self.len)], self.len),
            RMS_WINDOW,
            RMS_OVERLAP,
        );
        p.iter()
            .zip(&self.envelope)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / p.len() as f64
    }
}

/// Mean absolute deviation in cents over the first `count` partials.
pub fn cent_loss(pred: &[f64], target: &[f64], count: usize) -> Result<f64> {
    if count == 0 {
        return Err(Error::invalid("cent loss needs at least one partial"));
    }
    if pred.len() < count || target.len() < count {
        return Err(Error::invalid(format!(
            "cent loss needs {count} partials, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let mut sum = 0.0;
    for (p, t) in pred[..count].iter().zip(&target[..count]) {
        if !(*p > 0.0 && *t > 0.0) {
            return Err(Error::invalid(format!("non-positive frequency ({p}, {t})")));
        }
        sum += (1200.0 * (p / t).log2()).abs();
    }
    Ok(sum / count as f64)
}
