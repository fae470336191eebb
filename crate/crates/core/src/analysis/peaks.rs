use serde::{Deserialize, Serialize};

use crate::audio::fft::forward_real;
use crate::audio::{hann_window, AudioBuffer};
use crate::error::{Error, Result};

/// Minimum FFT length for peak search.
pub const PEAK_FFT: usize = 16_384;
/// Seconds of signal analysed from the start.
pub const PEAK_ANALYSIS_SECS: f64 = 2.0;
/// Half-width of the search region, as a fraction of the F0 hint.
pub const PEAK_SEARCH: f64 = 0.35;
/// Peaks quieter than this are reported missing.
pub const PEAK_FLOOR_DB: f64 = -80.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakEstimate {
    pub partial: usize,
    pub frequency: f64,
    /// Level relative to a full-scale sine.
    pub magnitude_db: f64,
}

/// Windowed, zero-padded magnitude spectrum of the analysis segment, scaled
/// so a full-scale sine reads 1.0.
pub(crate) struct PeakSpectrum {
    pub magnitudes: Vec<f64>,
    pub bin_hz: f64,
}

impl PeakSpectrum {
    pub fn new(signal: &AudioBuffer) -> Result<Self> {
        let take = ((PEAK_ANALYSIS_SECS * signal.sample_rate() as f64) as usize).min(signal.len());
        if take < 2 {
            return Err(Error::invalid("signal too short for peak analysis"));
        }
        let n = PEAK_FFT.max(take.next_power_of_two());
        let window = hann_window(take);
        let gain = 2.0 / window.iter().sum::<f64>();
        let plan = forward_real(n);
        let mut input = vec![0.0; n];
        for (i, (s, w)) in signal.samples()[..take].iter().zip(&window).enumerate() {
            input[i] = s * w;
        }
        let mut spectrum = plan.make_output_vec();
        plan.process(&mut input, &mut spectrum)
            .expect("plan-sized buffers");
        Ok(Self {
            magnitudes: spectrum.iter().map(|c| c.norm() * gain).collect(),
            bin_hz: signal.sample_rate() as f64 / n as f64,
        })
    }

    /// Strongest local maximum in `[lo, hi]` Hz, refined by a parabola through
    /// the log magnitudes of it and its neighbours.
    pub fn peak_in(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let last = self.magnitudes.len() - 2;
        let a = ((lo / self.bin_hz).ceil() as usize).max(1);
        let b = ((hi / self.bin_hz).floor() as usize).min(last);
        if a > b {
            return None;
        }
        let k = (a..=b).max_by(|x, y| self.magnitudes[*x].total_cmp(&self.magnitudes[*y]))?;
        let db = |i: usize| 20.0 * self.magnitudes[i].max(1e-300).log10();
        let (l, c, r) = (db(k - 1), db(k), db(k + 1));
        let denom = l - 2.0 * c + r;
        let delta = if denom < 0.0 {
            (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let level = c - 0.25 * (l - r) * delta;
        Some(((k as f64 + delta) * self.bin_hz, level))
    }
}

/// Peaks of partials `1..=count` near multiples of `f0_hint`.
pub fn estimate_partial_peaks(
    signal: &AudioBuffer,
    f0_hint: f64,
    count: usize,
) -> Result<Vec<PeakEstimate>> {
    if !(f0_hint > 0.0 && f0_hint.is_finite()) || count == 0 {
        return Err(Error::invalid(
            "peak search needs a positive F0 hint and count",
        ));
    }
    let spectrum = PeakSpectrum::new(signal)?;
    (1..=count)
        .map(|m| {
            let centre = m as f64 * f0_hint;
            let half = PEAK_SEARCH * f0_hint;
            match spectrum.peak_in(centre - half, centre + half) {
                Some((frequency, magnitude_db)) if magnitude_db >= PEAK_FLOOR_DB => {
                    Ok(PeakEstimate {
                        partial: m,
                        frequency,
                        magnitude_db,
                    })
                }
                _ => Err(Error::MissingPartial { m }),
            }
        })
        .collect()
}
