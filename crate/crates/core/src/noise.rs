//! Residual noise: seeded Gaussian noise shaped frame by frame by a
//! 129-bin magnitude filter, scaled and overlap-added.

use realfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio::fft::{forward_real, inverse_real};
use crate::audio::stft::magnitude_stft;
use crate::audio::{hann_window, AudioBuffer, MODEL_RATE};
use crate::error::{Error, Result};
use crate::fitting::{minimize, EpochRecord, Evaluation, OptimizerConfig};
use crate::losses::{LossReport, MultiResTarget, RmsTarget, NOISE_WINDOWS};

/// DFT length of the noise filter.
pub const NOISE_FFT: usize = 256;
/// One-sided bins of the noise filter.
pub const NOISE_BINS: usize = NOISE_FFT / 2 + 1;
/// Hop between synthesis frames (50% overlap).
pub const NOISE_HOP: usize = NOISE_FFT / 2;
/// Default length of one control frame in samples.
pub const DEFAULT_NOISE_FRAME: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub frame_size: usize,
    /// `frames x 129` filter magnitudes.
    pub filter_magnitudes: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub seed: u64,
    /// Distinguishes notes sharing a seed.
    #[serde(default)]
    pub stream: u64,
}

impl NoiseModel {
    /// A model that renders silence over `frames` control frames.
    pub fn silent(frames: usize, frame_size: usize) -> Self {
        Self {
            frame_size,
            filter_magnitudes: vec![vec![0.0; NOISE_BINS]; frames],
            means: vec![0.0; frames],
            amplitudes: vec![0.0; frames],
            seed: 0,
            stream: 0,
        }
    }

    pub fn frames(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_size == 0 {
            return Err(Error::invalid("noise frame_size must be at least 1"));
        }
        let n = self.amplitudes.len();
        if self.means.len() != n || self.filter_magnitudes.len() != n {
            return Err(Error::invalid(format!(
                "noise arrays disagree: {} amplitudes, {} means, {} filter frames",
                n,
                self.means.len(),
                self.filter_magnitudes.len()
            )));
        }
        for (i, row) in self.filter_magnitudes.iter().enumerate() {
            if row.len() != NOISE_BINS {
                return Err(Error::invalid(format!(
                    "noise filter frame {i} has {} bins, expected {NOISE_BINS}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid(format!(
                    "noise filter frame {i} has a negative or non-finite bin"
                )));
            }
        }
        if self.amplitudes.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::invalid("noise amplitudes must lie in [0, 1]"));
        }
        if self.means.iter().any(|m| !(-1.0..=1.0).contains(m)) {
            return Err(Error::invalid("noise means must lie in [-1, 1]"));
        }
        Ok(())
    }

    /// Control parameters at sample position `pos`, linearly interpolated
    /// between control-frame centres. `None` past the last frame.
    fn control_at(&self, pos: f64, eta: &mut [f64]) -> Option<(f64, f64)> {
        let n = self.frames();
        if n == 0 || pos < 0.0 || pos >= (n * self.frame_size) as f64 {
            return None;
        }
        let t = (pos / self.frame_size as f64 - 0.5).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 1);
        let j = (i + 1).min(n - 1);
        let w = t - i as f64;
        let (ri, rj) = (&self.filter_magnitudes[i], &self.filter_magnitudes[j]);
        for (k, e) in eta.iter_mut().enumerate() {
            *e = ri[k] + w * (rj[k] - ri[k]);
        }
        let lerp = |v: &[f64]| v[i] + w * (v[j] - v[i]);
        Some((lerp(&self.means), lerp(&self.amplitudes)))
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform in (0, 1].
fn unit(key: u64) -> f64 {
    ((splitmix(key) >> 11) + 1) as f64 / (1u64 << 53) as f64
}

/// Fills `out` with unit-variance Gaussian draws for one synthesis frame.
/// Each value depends only on `(seed, stream, frame, index)`.
pub(crate) fn gaussian_frame(seed: u64, stream: u64, frame: u64, out: &mut [f64]) {
    let base = splitmix(splitmix(splitmix(seed) ^ stream) ^ frame);
    for (pair, chunk) in out.chunks_mut(2).enumerate() {
        let k = base ^ splitmix(pair as u64);
        let u1 = unit(k);
        let u2 = unit(k ^ 0x5851_f42d_4c95_7f2d);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        chunk[0] = r * theta.cos();
        if chunk.len() > 1 {
            chunk[1] = r * theta.sin();
        }
    }
}

/// Hann synthesis window scaled so overlapping frames of independent
/// noise sum to constant variance.
fn synthesis_window() -> Vec<f64> {
    let w = hann_window(NOISE_FFT);
    (0..NOISE_FFT)
        .map(|o| w[o] / (w[o] * w[o] + w[(o + NOISE_HOP) % NOISE_FFT].powi(2)).sqrt())
        .collect()
}

/// Renders `duration` samples of shaped noise at the model rate.
pub fn render_noise(model: &NoiseModel, duration: usize) -> Result<AudioBuffer> {
    model.validate()?;
    if duration == 0 {
        return Err(Error::invalid("noise duration must be at least 1 sample"));
    }
    let window = synthesis_window();
    let r2c = forward_real(NOISE_FFT);
    let c2r = inverse_real(NOISE_FFT);
    let frames = duration.div_ceil(NOISE_HOP) + 1;
    let mut out = vec![0.0; (frames + 1) * NOISE_HOP];
    let mut frame = vec![0.0; NOISE_FFT];
    let mut spectrum = vec![Complex64::new(0.0, 0.0); NOISE_BINS];
    let mut eta = vec![0.0; NOISE_BINS];
    for r in 0..frames {
        // Frame r covers samples [(r - 1) * hop, (r + 1) * hop).
        let centre = (r * NOISE_HOP) as f64;
        let Some((mean, amp)) = model.control_at(centre, &mut eta) else {
            continue;
        };
        if amp == 0.0 {
            continue;
        }
        gaussian_frame(model.seed, model.stream, r as u64, &mut frame);
        frame.iter_mut().for_each(|v| *v += mean);
        r2c.process(&mut frame, &mut spectrum)
            .expect("fixed-size FFT");
        for (s, e) in spectrum.iter_mut().zip(&eta) {
            *s *= *e;
        }
        spectrum[0].im = 0.0;
        spectrum[NOISE_BINS - 1].im = 0.0;
        c2r.process(&mut spectrum, &mut frame)
            .expect("fixed-size FFT");
        let scale = amp / NOISE_FFT as f64;
        // out is offset by one hop so frame 0 starts at index 0.
        let start = r * NOISE_HOP;
        for (o, v) in frame.iter().enumerate() {
            out[start + o] += v * window[o] * scale;
        }
    }
    let samples = out[NOISE_HOP..NOISE_HOP + duration].to_vec();
    Ok(AudioBuffer::from_parts(samples, MODEL_RATE))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseFitConfig {
    pub optimizer: OptimizerConfig,
    pub frame_size: usize,
    /// Number of equal-width bands whose gains are refined.
    pub bands: usize,
    pub seed: u64,
    pub stream: u64,
}

impl Default for NoiseFitConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig {
                max_epochs: 10,
                ..OptimizerConfig::default()
            },
            frame_size: DEFAULT_NOISE_FRAME,
            bands: 8,
            seed: 0,
            stream: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseFit {
    pub model: NoiseModel,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub silent_target: bool,
    pub history: Vec<EpochRecord>,
}

/// Per-control-frame filter and RMS measured from `target`. Filters are
/// normalized so a unit amplitude renders unit variance.
fn initial_model(target: &[f64], config: &NoiseFitConfig) -> NoiseModel {
    let frames = target.len().div_ceil(config.frame_size);
    let spec = magnitude_stft(target, NOISE_FFT, NOISE_HOP, MODEL_RATE);
    let white_power: f64 = hann_window(NOISE_FFT).iter().map(|w| w * w).sum();
    let mut model = NoiseModel::silent(frames, config.frame_size);
    model.seed = config.seed;
    model.stream = config.stream;
    for c in 0..frames {
        let lo = c * config.frame_size;
        let hi = (lo + config.frame_size).min(target.len());
        let seg = &target[lo..hi];
        let rms = (seg.iter().map(|v| v * v).sum::<f64>() / seg.len() as f64).sqrt();
        // Analysis frames whose centres fall inside this control frame.
        let mut power = vec![0.0; NOISE_BINS];
        let mut count = 0usize;
        for f in 0..spec.frames() {
            let centre = f * NOISE_HOP + NOISE_FFT / 2;
            if (lo..hi).contains(&centre) || (count == 0 && f + 1 == spec.frames()) {
                for (p, m) in power.iter_mut().zip(spec.frame(f)) {
                    *p += m * m;
                }
                count += 1;
            }
        }
        if count == 0 || rms == 0.0 {
            continue;
        }
        let mut eta: Vec<f64> = power
            .iter()
            .map(|p| (p / count as f64 / white_power).sqrt())
            .collect();
        let mean_sq = mirrored_mean_square(&eta);
        if mean_sq > 0.0 {
            let norm = mean_sq.sqrt();
            eta.iter_mut().for_each(|e| *e /= norm);
            model.filter_magnitudes[c] = eta;
            model.amplitudes[c] = rms.min(1.0);
        }
    }
    model
}

/// Mean of `|eta|^2` over the full conjugate-symmetric spectrum.
fn mirrored_mean_square(eta: &[f64]) -> f64 {
    let last = eta.len() - 1;
    let inner: f64 = eta[1..last].iter().map(|e| e * e).sum();
    (eta[0] * eta[0] + eta[last] * eta[last] + 2.0 * inner) / NOISE_FFT as f64
}

/// Applies a global log-gain and per-band log-gains to `base`.
fn apply_gains(base: &NoiseModel, params: &[f64], bands: usize) -> NoiseModel {
    let mut model = base.clone();
    let gain = params[0].exp();
    for a in &mut model.amplitudes {
        *a = (*a * gain).clamp(0.0, 1.0);
    }
    for row in &mut model.filter_magnitudes {
        for (k, e) in row.iter_mut().enumerate() {
            let band = (k * bands / NOISE_BINS).min(bands - 1);
            *e *= params[1 + band].exp();
        }
    }
    model
}

/// Fits a noise model to `target` at the model rate.
pub fn fit_noise(target: &AudioBuffer, config: &NoiseFitConfig) -> Result<NoiseFit> {
    if target.sample_rate() != MODEL_RATE {
        return Err(Error::invalid(format!(
            "noise target must be at {MODEL_RATE} Hz, got {}",
            target.sample_rate()
        )));
    }
    if config.frame_size == 0 || config.bands == 0 || config.bands > NOISE_BINS {
        return Err(Error::invalid(
            "noise fit needs frame_size >= 1 and 1..=129 bands",
        ));
    }
    let samples = target.samples();
    let frames = samples.len().div_ceil(config.frame_size);
    if samples.iter().all(|v| *v == 0.0) {
        let mut model = NoiseModel::silent(frames, config.frame_size);
        model.seed = config.seed;
        model.stream = config.stream;
        return Ok(NoiseFit {
            model,
            initial_loss: 0.0,
            final_loss: 0.0,
            silent_target: true,
            history: Vec::new(),
        });
    }
    let base = initial_model(samples, config);
    let stft_target = MultiResTarget::new(samples, MODEL_RATE, &NOISE_WINDOWS)?;
    let rms_target = RmsTarget::new(samples);
    let bands = config.bands;
    let evaluate = |p: &[f64]| -> Evaluation {
        let model = apply_gains(&base, p, bands);
        let y = render_noise(&model, samples.len()).expect("validated model");
        let stft = stft_target.loss(y.samples());
        let rms = rms_target.loss(y.samples());
        Evaluation {
            total: stft.value + rms,
            report: LossReport {
                stft_loss: stft.value,
                rms_loss: rms,
                per_resolution: stft.per_resolution,
                ..LossReport::default()
            },
        }
    };
    let train = |p: &[f64]| evaluate(p).total;
    let result = minimize(
        "noise",
        &train,
        &evaluate,
        &|_: &mut [f64]| {},
        vec![0.0; 1 + bands],
        &config.optimizer,
    )?;
    Ok(NoiseFit {
        model: apply_gains(&base, &result.params, bands),
        initial_loss: result.initial_loss,
        final_loss: result.best_loss,
        silent_target: false,
        history: result.history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::stft;

    fn flat_model(frames: usize, eta: Vec<f64>, amp: f64) -> NoiseModel {
        NoiseModel {
            frame_size: DEFAULT_NOISE_FRAME,
            filter_magnitudes: vec![eta; frames],
            means: vec![0.0; frames],
            amplitudes: vec![amp; frames],
            seed: 42,
            stream: 7,
        }
    }

    fn frame_rms(y: &[f64], len: usize) -> Vec<f64> {
        y.chunks_exact(len)
            .map(|c| (c.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt())
            .collect()
    }

    #[test]
    fn gaussian_draws_have_unit_moments() {
        let mut all = Vec::new();
        let mut buf = vec![0.0; NOISE_FFT];
        for f in 0..400 {
            gaussian_frame(3, 0, f, &mut buf);
            all.extend_from_slice(&buf);
        }
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn streams_and_frames_differ() {
        let (mut a, mut b, mut c) = (vec![0.0; 8], vec![0.0; 8], vec![0.0; 8]);
        gaussian_frame(1, 0, 0, &mut a);
        gaussian_frame(1, 1, 0, &mut b);
        gaussian_frame(1, 0, 1, &mut c);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn flat_filter_matches_white_frame_rms() {
        let frames = 100 * NOISE_FFT / DEFAULT_NOISE_FRAME + 1;
        let y = render_noise(
            &flat_model(frames, vec![1.0; NOISE_BINS], 1.0),
            100 * NOISE_FFT,
        )
        .unwrap();
        let rms = frame_rms(y.samples(), NOISE_FFT);
        let mean = rms.iter().sum::<f64>() / rms.len() as f64;
        // Unfiltered Gaussian reference frames from the same generator.
        let mut buf = vec![0.0; NOISE_FFT];
        let reference = (0..100u64)
            .map(|f| {
                gaussian_frame(99, 0, f, &mut buf);
                (buf.iter().map(|v| v * v).sum::<f64>() / NOISE_FFT as f64).sqrt()
            })
            .sum::<f64>()
            / 100.0;
        assert!(
            (mean / reference - 1.0).abs() <= 0.10,
            "{mean} vs {reference}"
        );
    }

    #[test]
    fn zero_amplitude_is_silent() {
        let y = render_noise(&flat_model(4, vec![1.0; NOISE_BINS], 0.0), 6000).unwrap();
        assert!(y.samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn one_hot_filter_is_band_limited() {
        let k = 40;
        let mut eta = vec![0.0; NOISE_BINS];
        eta[k] = 1.0;
        let y = render_noise(&flat_model(12, eta, 1.0), 24_000).unwrap();
        let s = stft(&y, 256, 128).unwrap();
        let mut inside = 0.0;
        let mut total = 0.0;
        for f in 0..s.frames() {
            for b in 0..s.bins() {
                let p = s.get(f, b).powi(2);
                total += p;
                if b.abs_diff(k) <= 2 {
                    inside += p;
                }
            }
        }
        assert!(inside / total >= 0.95, "{}", inside / total);
    }

    #[test]
    fn renders_are_deterministic_and_seed_dependent() {
        let m = flat_model(5, vec![0.5; NOISE_BINS], 0.3);
        let a = render_noise(&m, 10_000).unwrap();
        let b = render_noise(&m, 10_000).unwrap();
        assert_eq!(a.samples(), b.samples());
        let mut other = m.clone();
        other.seed += 1;
        assert_ne!(render_noise(&other, 10_000).unwrap().samples(), a.samples());
    }

    #[test]
    fn rms_scales_linearly_with_amplitude() {
        let len: usize = 24_000;
        let frames = len.div_ceil(DEFAULT_NOISE_FRAME);
        let full = render_noise(&flat_model(frames, vec![1.0; NOISE_BINS], 1.0), len).unwrap();
        let rms_full = (full.energy() / len as f64).sqrt();
        for a in [0.1, 0.25, 0.5] {
            let mut m = flat_model(frames, vec![1.0; NOISE_BINS], a);
            m.seed = 1000 + (a * 100.0) as u64;
            let y = render_noise(&m, len).unwrap();
            let rms = (y.energy() / len as f64).sqrt();
            assert!((rms / (a * rms_full) - 1.0).abs() <= 0.10, "a={a}: {rms}");
        }
    }

    #[test]
    fn long_run_spectrum_follows_filter() {
        let eta: Vec<f64> = (0..NOISE_BINS)
            .map(|k| {
                let x = k as f64 / NOISE_BINS as f64;
                0.2 + (-(x - 0.3).powi(2) / 0.02).exp()
            })
            .collect();
        let len = 10 * MODEL_RATE as usize;
        let y = render_noise(
            &flat_model(len.div_ceil(DEFAULT_NOISE_FRAME), eta.clone(), 0.5),
            len,
        )
        .unwrap();
        let s = stft(&y, NOISE_FFT, NOISE_HOP).unwrap();
        let avg: Vec<f64> = (0..NOISE_BINS)
            .map(|b| (0..s.frames()).map(|f| s.get(f, b)).sum::<f64>() / s.frames() as f64)
            .collect();
        let ratios: Vec<f64> = (1..NOISE_BINS - 1)
            .map(|k| 20.0 * (avg[k] / eta[k]).log10())
            .collect();
        let centre = ratios.iter().sum::<f64>() / ratios.len() as f64;
        for (i, r) in ratios.iter().enumerate() {
            assert!(
                (r - centre).abs() <= 1.5,
                "bin {}: {:.2} dB",
                i + 1,
                r - centre
            );
        }
    }

    #[test]
    fn control_frames_outside_range_are_silent() {
        let y = render_noise(
            &flat_model(1, vec![1.0; NOISE_BINS], 1.0),
            3 * DEFAULT_NOISE_FRAME,
        )
        .unwrap();
        assert!(y.samples()[DEFAULT_NOISE_FRAME + NOISE_HOP..]
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn invalid_models_are_rejected() {
        let mut m = flat_model(2, vec![1.0; NOISE_BINS], 1.0);
        m.amplitudes[0] = 1.5;
        assert!(render_noise(&m, 100).is_err());
        let mut m = flat_model(2, vec![1.0; NOISE_BINS], 1.0);
        m.filter_magnitudes[1].pop();
        assert!(m.validate().is_err());
        let mut m = flat_model(2, vec![1.0; NOISE_BINS], 1.0);
        m.means[1] = -2.0;
        assert!(m.validate().is_err());
    }

    fn band_energies_db(y: &[f64]) -> Vec<f64> {
        let s = magnitude_stft(y, NOISE_FFT, NOISE_HOP, MODEL_RATE);
        (0..8)
            .map(|band| {
                let e: f64 = (0..s.frames())
                    .map(|f| {
                        (band * 16..band * 16 + 16)
                            .map(|b| s.get(f, b).powi(2))
                            .sum::<f64>()
                    })
                    .sum();
                10.0 * e.log10()
            })
            .collect()
    }

    #[test]
    fn self_target_band_energies_within_1_db() {
        let len = 2 * MODEL_RATE as usize;
        let eta: Vec<f64> = (0..NOISE_BINS)
            .map(|k| 1.5 - k as f64 / NOISE_BINS as f64)
            .collect();
        let mut known = flat_model(len.div_ceil(DEFAULT_NOISE_FRAME), eta, 0.2);
        known.seed = 5;
        known.stream = 0;
        for (i, a) in known.amplitudes.iter_mut().enumerate() {
            *a = 0.2 * (-(i as f64) / 10.0).exp();
        }
        let target = render_noise(&known, len).unwrap();
        let config = NoiseFitConfig {
            seed: 5,
            optimizer: OptimizerConfig {
                max_epochs: 3,
                ..Default::default()
            },
            ..Default::default()
        };
        let fit = fit_noise(&target, &config).unwrap();
        assert!(fit.final_loss <= fit.initial_loss);
        let y = render_noise(&fit.model, len).unwrap();
        for (a, b) in band_energies_db(y.samples())
            .iter()
            .zip(band_energies_db(target.samples()))
        {
            assert!((a - b).abs() <= 1.0, "{a:.2} vs {b:.2}");
        }
    }

    #[test]
    fn pinkish_target_gives_decreasing_filter() {
        let len = MODEL_RATE as usize;
        let eta: Vec<f64> = (0..NOISE_BINS)
            .map(|k| 1.0 / ((k + 1) as f64).sqrt())
            .collect();
        let mut source = flat_model(len.div_ceil(DEFAULT_NOISE_FRAME), eta, 0.3);
        source.seed = 77;
        let target = render_noise(&source, len).unwrap();
        let config = NoiseFitConfig {
            optimizer: OptimizerConfig {
                max_epochs: 2,
                ..Default::default()
            },
            ..Default::default()
        };
        let fit = fit_noise(&target, &config).unwrap();
        let mean_eta: Vec<f64> = (0..NOISE_BINS)
            .map(|k| {
                fit.model
                    .filter_magnitudes
                    .iter()
                    .map(|r| r[k])
                    .sum::<f64>()
            })
            .collect();
        assert!(spearman(&mean_eta) < 0.0);
    }

    /// Rank correlation between bin index and value.
    fn spearman(values: &[f64]) -> f64 {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
        let mut rank = vec![0.0; n];
        for (r, i) in order.into_iter().enumerate() {
            rank[i] = r as f64;
        }
        let d2: f64 = rank
            .iter()
            .enumerate()
            .map(|(i, r)| (i as f64 - r).powi(2))
            .sum();
        1.0 - 6.0 * d2 / (n as f64 * (n as f64 * n as f64 - 1.0))
    }

    #[test]
    fn silent_target_gives_zero_amplitudes() {
        let fit = fit_noise(
            &AudioBuffer::silence(5000, MODEL_RATE),
            &NoiseFitConfig::default(),
        )
        .unwrap();
        assert!(fit.silent_target);
        assert!(fit.model.amplitudes.iter().all(|a| *a == 0.0));
        assert_eq!(fit.model.frames(), 3);
    }
}
