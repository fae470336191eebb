use super::AudioBuffer;
use crate::error::{Error, Result};

/// Frame-wise root-mean-square values. Frames are `window` long and advance by
/// `round(window * (1 - overlap_fraction))`; only whole frames are emitted,
/// except that a signal shorter than one window yields a single frame over
/// the whole signal.
pub fn rms_envelope(
    signal: &AudioBuffer,
    window: usize,
    overlap_fraction: f64,
) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::invalid("rms window must be at least one sample"));
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(Error::invalid(format!(
            "overlap fraction {overlap_fraction} not in [0, 1)"
        )));
    }
    Ok(rms_frames(signal.samples(), window, overlap_fraction))
}

pub(crate) fn rms_hop(window: usize, overlap_fraction: f64) -> usize {
    ((window as f64 * (1.0 - overlap_fraction)).round() as usize).max(1)
}

pub(crate) fn rms_frames(samples: &[f64], window: usize, overlap_fraction: f64) -> Vec<f64> {
    if samples.is_empty() {
        return Vec::new();
    }
    let rms =
        |frame: &[f64]| (frame.iter().map(|s| s * s).sum::<f64>() / frame.len() as f64).sqrt();
    if window > samples.len() {
        return vec![rms(samples)];
    }
    let hop = rms_hop(window, overlap_fraction);
    let count = (samples.len() - window) / hop + 1;
    (0..count)
        .map(|f| rms(&samples[f * hop..f * hop + window]))
        .collect()
}
