//! Attack transient stored as a 1300-coefficient DCT vector and rendered
//! through the inverse DCT.

use serde::{Deserialize, Serialize};

use crate::audio::{dct2, idct2, AudioBuffer, MODEL_RATE};
use crate::error::{Error, Result};
use crate::fitting::{minimize, EpochRecord, Evaluation, OptimizerConfig};
use crate::losses::{LossReport, MultiResTarget, TRANSIENT_WINDOWS};

/// Length of the transient in samples (and of its DCT vector).
pub const TRANSIENT_LEN: usize = 1300;

/// Starting losses at or below this are treated as an exact fit.
const CONVERGED_LOSS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientModel {
    pub dct_vector: Vec<f64>,
    pub gain: f64,
}

impl TransientModel {
    pub fn new(dct_vector: Vec<f64>, gain: f64) -> Result<Self> {
        let m = Self { dct_vector, gain };
        m.validate()?;
        Ok(m)
    }

    pub fn silent() -> Self {
        Self {
            dct_vector: vec![0.0; TRANSIENT_LEN],
            gain: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dct_vector.len() != TRANSIENT_LEN {
            return Err(Error::invalid(format!(
                "transient DCT vector has {} entries, expected {TRANSIENT_LEN}",
                self.dct_vector.len()
            )));
        }
        if self.dct_vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite transient coefficient"));
        }
        if !(self.gain >= 0.0 && self.gain.is_finite()) {
            return Err(Error::invalid("transient gain must be non-negative"));
        }
        Ok(())
    }

    /// The 1300 time-domain samples, gain applied.
    pub fn waveform(&self) -> Vec<f64> {
        idct2(&self.dct_vector)
            .expect("validated vector is non-empty")
            .into_iter()
            .map(|v| v * self.gain)
            .collect()
    }
}

/// `gain * idct2(dct_vector)` followed by zeros up to `total_duration`.
pub fn render_transient(model: &TransientModel, total_duration: usize) -> Result<AudioBuffer> {
    model.validate()?;
    if total_duration < TRANSIENT_LEN {
        return Err(Error::invalid(format!(
            "transient needs at least {TRANSIENT_LEN} samples, got {total_duration}"
        )));
    }
    let mut out = model.waveform();
    out.resize(total_duration, 0.0);
    Ok(AudioBuffer::from_parts(out, MODEL_RATE))
}

/// Which representation the STFT loss compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransientLossDomain {
    /// DCT vectors are compared directly, as sequences.
    #[default]
    Dct,
    /// The rendered 1300-sample waveforms are compared.
    Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransientFitConfig {
    pub optimizer: OptimizerConfig,
    pub domain: TransientLossDomain,
    /// Weight of an L2 penalty pulling coefficients toward zero.
    pub l2_shrinkage: f64,
}

impl Default for TransientFitConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig {
                max_epochs: 20,
                ..OptimizerConfig::default()
            },
            domain: TransientLossDomain::Dct,
            l2_shrinkage: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransientFit {
    pub model: TransientModel,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub silent_target: bool,
    pub history: Vec<EpochRecord>,
}

/// Fits a transient to `target` (truncated or zero-padded to 1300 samples),
/// starting from the target's own DCT.
pub fn fit_transient(target: &AudioBuffer, config: &TransientFitConfig) -> Result<TransientFit> {
    let clip = target.fitted_to(TRANSIENT_LEN);
    if clip.samples().iter().all(|s| *s == 0.0) {
        return Ok(TransientFit {
            model: TransientModel::silent(),
            initial_loss: 0.0,
            final_loss: 0.0,
            silent_target: true,
            history: Vec::new(),
        });
    }
    let init = dct2(clip.samples())?;
    let reference = match config.domain {
        TransientLossDomain::Dct => init.clone(),
        TransientLossDomain::Time => clip.samples().to_vec(),
    };
    let cached = MultiResTarget::new(&reference, target.sample_rate(), &TRANSIENT_WINDOWS)?;
    let domain = config.domain;
    let shrink = config.l2_shrinkage;
    let evaluate = |p: &[f64]| -> Evaluation {
        let stft = match domain {
            TransientLossDomain::Dct => cached.loss(p),
            TransientLossDomain::Time => cached.loss(&idct2(p).expect("non-empty")),
        };
        let penalty = shrink * p.iter().map(|v| v * v).sum::<f64>() / p.len() as f64;
        Evaluation {
            total: stft.value + penalty,
            report: LossReport {
                stft_loss: stft.value,
                per_resolution: stft.per_resolution,
                ..LossReport::default()
            },
        }
    };
    let start = evaluate(&init).total;
    if start <= CONVERGED_LOSS {
        return Ok(TransientFit {
            model: TransientModel {
                dct_vector: init,
                gain: 1.0,
            },
            initial_loss: start,
            final_loss: start,
            silent_target: false,
            history: Vec::new(),
        });
    }
    let train = |p: &[f64]| evaluate(p).total;
    let result = minimize(
        "transient",
        &train,
        &evaluate,
        &|_: &mut [f64]| {},
        init,
        &config.optimizer,
    )?;
    Ok(TransientFit {
        model: TransientModel {
            dct_vector: result.params,
            gain: 1.0,
        },
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
    use crate::losses::multires_stft_loss;

    fn noise_burst(len: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..len)
            .map(|i| {
                s = s
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                let u = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                u * (-(i as f64) / 300.0).exp()
            })
            .collect()
    }

    #[test]
    fn zero_vector_is_silent() {
        let y = render_transient(
            &TransientModel::new(vec![0.0; TRANSIENT_LEN], 1.0).unwrap(),
            5000,
        )
        .unwrap();
        assert!(y.samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn one_hot_is_a_cosine_burst_then_zero() {
        let mut c = vec![0.0; TRANSIENT_LEN];
        c[40] = 1.0;
        let y = render_transient(&TransientModel::new(c, 1.0).unwrap(), 4000).unwrap();
        let burst = &y.samples()[..TRANSIENT_LEN];
        assert!(burst.iter().map(|v| v * v).sum::<f64>() > 0.99);
        assert!(y.samples()[TRANSIENT_LEN..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn dct_of_clip_reproduces_clip() {
        let clip = noise_burst(TRANSIENT_LEN, 3);
        let model = TransientModel::new(dct2(&clip).unwrap(), 1.0).unwrap();
        let y = render_transient(&model, TRANSIENT_LEN).unwrap();
        let err = clip
            .iter()
            .zip(y.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-9);
    }

    #[test]
    fn energy_independent_of_duration() {
        let model =
            TransientModel::new(dct2(&noise_burst(TRANSIENT_LEN, 9)).unwrap(), 0.7).unwrap();
        let a = render_transient(&model, 1300).unwrap().energy();
        let b = render_transient(&model, 24_000).unwrap().energy();
        assert_eq!(a, b);
    }

    #[test]
    fn short_duration_is_rejected() {
        assert!(render_transient(&TransientModel::silent(), 1299).is_err());
        assert!(TransientModel::new(vec![0.0; 10], 1.0).is_err());
    }

    #[test]
    fn self_target_and_fixed_point() {
        let known =
            TransientModel::new(dct2(&noise_burst(TRANSIENT_LEN, 5)).unwrap(), 1.0).unwrap();
        let target = render_transient(&known, 3000).unwrap();
        for domain in [TransientLossDomain::Dct, TransientLossDomain::Time] {
            let fit = fit_transient(
                &target,
                &TransientFitConfig {
                    domain,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(fit.final_loss <= 1e-10, "{domain:?}: {}", fit.final_loss);
            assert!(fit.final_loss <= fit.initial_loss);
            let y = render_transient(&fit.model, 3000).unwrap();
            let l = multires_stft_loss(&y, &target, &TRANSIENT_WINDOWS).unwrap();
            assert!(l.value <= 1e-6);
        }
    }

    #[test]
    fn shrinkage_never_increases_the_objective() {
        let target = AudioBuffer::new(noise_burst(TRANSIENT_LEN, 11), MODEL_RATE).unwrap();
        let config = TransientFitConfig {
            l2_shrinkage: 0.5,
            optimizer: OptimizerConfig {
                max_epochs: 3,
                ..Default::default()
            },
            ..Default::default()
        };
        let fit = fit_transient(&target, &config).unwrap();
        assert!(fit.final_loss <= fit.initial_loss);
        assert!(fit.initial_loss > 0.0);
    }

    #[test]
    fn white_noise_burst_band_envelope_within_3_db() {
        let target = AudioBuffer::new(noise_burst(TRANSIENT_LEN, 21), MODEL_RATE).unwrap();
        let fit = fit_transient(&target, &TransientFitConfig::default()).unwrap();
        let y = render_transient(&fit.model, TRANSIENT_LEN).unwrap();
        let st = stft(&target, 256, 192).unwrap();
        let sy = stft(&y, 256, 192).unwrap();
        let band_energy = |s: &crate::audio::Spectrogram, band: usize| -> f64 {
            (0..s.frames())
                .map(|f| {
                    (band * 8..band * 8 + 8)
                        .map(|b| s.get(f, b).powi(2))
                        .sum::<f64>()
                })
                .sum()
        };
        let total: f64 = (0..16).map(|b| band_energy(&st, b)).sum();
        for band in 0..16 {
            let et = band_energy(&st, band);
            if 10.0 * (et / total).log10() < -40.0 {
                continue;
            }
            let diff = 10.0 * (band_energy(&sy, band) / et).log10();
            assert!(diff.abs() <= 3.0, "band {band}: {diff:.2} dB");
        }
    }

    #[test]
    fn silent_target_gives_zero_model() {
        let fit = fit_transient(
            &AudioBuffer::silence(2000, MODEL_RATE),
            &TransientFitConfig::default(),
        )
        .unwrap();
        assert!(fit.silent_target);
        assert_eq!(fit.model, TransientModel::silent());
    }
}
