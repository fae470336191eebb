//! Whole-note fitting: partial frequencies first, then amplitudes and
//! damping, then the transient and noise components.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{fingerprint, minimize, minimize_local, EpochRecord, Evaluation, OptimizerConfig};
use crate::analysis::{
    fit_damping, track_each, track_partials, transient_target, Decomposition, PartialTrack,
    TrackerConfig,
};
use crate::audio::{AudioBuffer, MODEL_RATE};
use crate::error::{Error, Result};
use crate::harmonic::{
    add_partial, clip_amplitude, decay_rates, default_partial_count, note_partial_sets,
    partial_frequencies, partial_frequency, render_partial_sets, DampingCoeffs, PolarizationParams,
    MAX_DETUNING, PHANTOM_MIN_RATIO,
};
use crate::losses::{
    cent_loss, LossReport, MultiResTarget, RmsTarget, CENT_PARTIALS, HARMONIC_WINDOWS,
};
use crate::model::{NoteMetadata, NoteModel};
use crate::noise::{fit_noise, NoiseFitConfig};
use crate::transient::{fit_transient, TransientFitConfig, TRANSIENT_LEN};

/// Cent loss below which stage 1 counts as converged; a single Adam step in
/// the detuning moves the loss by about 1e-3 cents.
pub const STAGE1_TARGET_CENTS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoteFitConfig {
    /// Inharmonicity and detuning against the cent loss.
    pub stage1: OptimizerConfig,
    /// Amplitudes and damping against the spectral and RMS losses.
    pub stage2: OptimizerConfig,
    pub tracker: TrackerConfig,
    /// Fraction of the note, at its end, held out for validation in stage 2.
    pub validation_fraction: f64,
    pub phantoms: bool,
    /// Stop after stage 1, leaving amplitudes, damping, transient and noise
    /// as given.
    pub stage1_only: bool,
    pub transient: TransientFitConfig,
    pub noise: NoiseFitConfig,
}

impl Default for NoteFitConfig {
    fn default() -> Self {
        Self {
            stage1: OptimizerConfig {
                target_loss: STAGE1_TARGET_CENTS,
                ..OptimizerConfig::default()
            },
            stage2: OptimizerConfig {
                max_epochs: 200,
                ..OptimizerConfig::default()
            },
            tracker: TrackerConfig::default(),
            validation_fraction: 0.2,
            phantoms: true,
            stage1_only: false,
            transient: TransientFitConfig::default(),
            noise: NoiseFitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageSummary {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone)]
pub struct NoteFit {
    pub model: NoteModel,
    pub history: Vec<EpochRecord>,
    pub stage1: StageSummary,
    pub stage2: StageSummary,
    pub transient: StageSummary,
    pub noise: StageSummary,
    /// Final cent deviation between fitted and measured partials.
    pub cent_loss: f64,
    pub report: LossReport,
    pub tracks: Vec<PartialTrack>,
}

/// The signal the decomposition was made from. With hard masks the three
/// parts sum back to it exactly.
pub fn recombine(targets: &Decomposition) -> AudioBuffer {
    let samples = targets
        .harmonic
        .samples()
        .iter()
        .zip(targets.transient.samples())
        .zip(targets.noise.samples())
        .map(|((h, t), n)| h + t + n)
        .collect();
    AudioBuffer::from_parts(samples, targets.harmonic.sample_rate())
}

/// A starting model measured from `signal`: fundamental, detuning, per-partial
/// amplitudes and damping from tracked partials, with the given inharmonicity.
pub fn initial_model(
    signal: &AudioBuffer,
    key_id: u8,
    velocity: u8,
    f0_hint: f64,
    inharmonicity: f64,
    tracker: &TrackerConfig,
) -> Result<(NoteModel, Vec<PartialTrack>)> {
    if signal.sample_rate() != MODEL_RATE {
        return Err(Error::invalid(format!("fitting runs at {MODEL_RATE} Hz")));
    }
    let first = track_partials(signal, f0_hint, inharmonicity, 1, tracker)?;
    let f0 = first[0].low().frequency / (1.0 + inharmonicity);
    let count = default_partial_count(f0_hint, inharmonicity, MODEL_RATE);
    let tracks: Vec<PartialTrack> = track_each(signal, f0, inharmonicity, count, tracker)?
        .into_iter()
        .filter_map(Result::ok)
        .collect();
    // Above the phantom floor the band also holds longitudinal components,
    // so only lower partials inform the decay and detuning estimates.
    let floor = PHANTOM_MIN_RATIO * f0;
    let mut alpha_v = vec![0.0; count];
    let mut alpha_h = vec![0.0; count];
    let mut detunings = Vec::new();
    let (mut points_v, mut points_h) = (Vec::new(), Vec::new());
    for t in &tracks {
        let i = t.partial - 1;
        let clean = t.high().frequency < floor;
        alpha_v[i] = t.low().amplitude.clamp(-1.0, 1.0);
        if clean {
            points_v.push((t.low().frequency, t.low().decay.max(0.0)));
        }
        if t.is_split() {
            alpha_h[i] = t.high().amplitude.clamp(-1.0, 1.0);
            if clean {
                points_h.push((t.high().frequency, t.high().decay.max(0.0)));
            }
            let stretch = t.partial as f64 * (1.0 + inharmonicity * (t.partial * t.partial) as f64);
            let detuning = (t.high().frequency - t.low().frequency) / stretch;
            if t.partial <= CENT_PARTIALS && detuning <= MAX_DETUNING {
                detunings.push(detuning);
            }
        }
    }
    let delta_f = median(&mut detunings)
        .unwrap_or(0.0)
        .clamp(-MAX_DETUNING, MAX_DETUNING);
    let damping = fit_damping(&points_v).unwrap_or(DampingCoeffs::new(1.0, 0.0, 0.0, 0.0));
    let damping_h = if points_h.len() >= 4 {
        fit_damping(&points_h).unwrap_or(damping)
    } else {
        damping
    };
    let params = PolarizationParams {
        f0,
        inharmonicity,
        delta_f,
        alpha_v,
        alpha_h,
    };
    let mut model = NoteModel::new(key_id, velocity, params, damping)?;
    model.damping_h = damping_h;
    Ok((model, tracks))
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Measured and predicted frequencies paired for the cent loss.
fn paired_frequencies(
    tracks: &[PartialTrack],
    f0: f64,
    b: f64,
    delta_f: f64,
) -> (Vec<f64>, Vec<f64>) {
    let (mut pred, mut meas) = (Vec::new(), Vec::new());
    for t in tracks {
        let fv = partial_frequency(f0, b, t.partial);
        let fh = partial_frequency(f0 + delta_f, b, t.partial);
        if t.is_split() {
            let (lo, hi) = if delta_f >= 0.0 { (fv, fh) } else { (fh, fv) };
            pred.extend([lo, hi]);
            meas.extend([t.low().frequency, t.high().frequency]);
        } else {
            let f = t.low().frequency;
            pred.push(if (fv - f).abs() <= (fh - f).abs() {
                fv
            } else {
                fh
            });
            meas.push(f);
        }
    }
    (pred, meas)
}

struct Stage1 {
    b_scale: f64,
}

impl Stage1 {
    fn decode(&self, p: &[f64]) -> (f64, f64) {
        (self.b_scale * p[0], MAX_DETUNING * p[1].tanh())
    }

    fn encode(&self, b: f64, delta_f: f64) -> Vec<f64> {
        let ratio = (delta_f / MAX_DETUNING).clamp(-0.999_999, 0.999_999);
        vec![b / self.b_scale, ratio.atanh()]
    }
}

/// Amplitude monomial multiplying one cached waveform. Indices address the
/// concatenation `[alpha_v, alpha_h]`.
#[derive(Debug, Clone, Copy)]
enum Coef {
    Linear(usize),
    Square(usize),
    Product(usize, usize),
}

impl Coef {
    fn value(self, alpha: &[f64]) -> f64 {
        let a = |i: usize| clip_amplitude(alpha[i]);
        match self {
            Coef::Linear(i) => a(i),
            Coef::Square(i) => a(i) * a(i),
            Coef::Product(i, j) => a(i) * a(j),
        }
    }

    fn indices(self) -> [usize; 2] {
        match self {
            Coef::Linear(i) | Coef::Square(i) => [i, i],
            Coef::Product(i, j) => [i, j],
        }
    }
}

/// Unit-amplitude waveforms of every partial at fixed frequencies and
/// decays, so amplitude changes cost one pass over the touched terms.
struct HarmonicBasis {
    terms: Vec<(Coef, Vec<f64>)>,
    touching: Vec<Vec<usize>>,
}

impl HarmonicBasis {
    fn new(model: &NoteModel, len: usize, phantoms: bool) -> Result<Self> {
        let h = model.partials;
        let nyquist = MODEL_RATE as f64 / 2.0;
        let mut sources = Vec::new();
        for (offset, f0, damping) in [
            (0, model.f0, &model.damping),
            (h, model.f0 + model.delta_f, &model.damping_h),
        ] {
            let freqs = partial_frequencies(f0, model.inharmonicity, h, nyquist)?;
            let decays = decay_rates(&freqs, &damping.abs(), MODEL_RATE);
            sources.push((offset, freqs, decays));
        }
        let mut specs: Vec<(Coef, f64, f64)> = Vec::new();
        for (offset, freqs, decays) in &sources {
            for m in 0..freqs.len() {
                specs.push((Coef::Linear(offset + m), freqs[m], decays[m]));
            }
        }
        if phantoms {
            let floor = PHANTOM_MIN_RATIO * model.f0;
            let admit = |f: f64| f >= floor && f < nyquist;
            for (offset, freqs, decays) in &sources {
                for m in 0..freqs.len() {
                    if admit(2.0 * freqs[m]) {
                        specs.push((Coef::Square(offset + m), 2.0 * freqs[m], 2.0 * decays[m]));
                    }
                }
                for m in 0..freqs.len().saturating_sub(1) {
                    let decay = decays[m] + decays[m + 1];
                    for f in [freqs[m] + freqs[m + 1], freqs[m + 1] - freqs[m]] {
                        if admit(f) {
                            specs.push((Coef::Product(offset + m, offset + m + 1), f, decay));
                        }
                    }
                }
            }
        }
        let mut terms = Vec::with_capacity(specs.len());
        let mut touching = vec![Vec::new(); 2 * h];
        for (coef, f, decay) in specs {
            let mut wave = vec![0.0; len];
            add_partial(&mut wave, f, 1.0, decay, MODEL_RATE);
            let end = wave.iter().rposition(|v| *v != 0.0).map_or(0, |i| i + 1);
            wave.truncate(end);
            let [i, j] = coef.indices();
            touching[i].push(terms.len());
            if j != i {
                touching[j].push(terms.len());
            }
            terms.push((coef, wave));
        }
        Ok(Self { terms, touching })
    }

    fn signal(&self, alpha: &[f64], len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (coef, wave) in &self.terms {
            let c = coef.value(alpha);
            out.iter_mut().zip(wave).for_each(|(o, w)| *o += c * w);
        }
        out
    }
}

/// Stage-2 parameter vector: `[alpha_v, alpha_h, theta_v(4), theta_h(4)]`
/// with damping coefficient `i` equal to `scale_i * |theta_i|`.
struct Stage2 {
    base: NoteModel,
    scale_v: [f64; 4],
    scale_h: [f64; 4],
}

/// Smallest damping scales, so a zero coefficient can still move.
const DAMPING_FLOOR: [f64; 4] = [1e-2, 1e-4, 1e-12, 1e-6];

impl Stage2 {
    fn new(base: NoteModel) -> Self {
        let scale = |d: &DampingCoeffs| {
            let b = d.to_array();
            std::array::from_fn(|i| b[i].abs().max(DAMPING_FLOOR[i]))
        };
        Self {
            scale_v: scale(&base.damping),
            scale_h: scale(&base.damping_h),
            base,
        }
    }

    fn encode(&self) -> Vec<f64> {
        let mut p = self.base.alpha_v.clone();
        p.extend(&self.base.alpha_h);
        let (bv, bh) = (self.base.damping.to_array(), self.base.damping_h.to_array());
        p.extend((0..4).map(|i| bv[i].abs() / self.scale_v[i]));
        p.extend((0..4).map(|i| bh[i].abs() / self.scale_h[i]));
        p
    }

    fn decode(&self, p: &[f64]) -> NoteModel {
        let h = self.base.partials;
        let mut m = self.base.clone();
        m.alpha_v = p[..h].iter().map(|a| clip_amplitude(*a)).collect();
        m.alpha_h = p[h..2 * h].iter().map(|a| clip_amplitude(*a)).collect();
        m.damping = DampingCoeffs::from_array(std::array::from_fn(|i| {
            self.scale_v[i] * p[2 * h + i].abs()
        }));
        m.damping_h = DampingCoeffs::from_array(std::array::from_fn(|i| {
            self.scale_h[i] * p[2 * h + 4 + i].abs()
        }));
        m
    }
}

fn render_harmonic_of(model: &NoteModel, len: usize, phantoms: bool) -> Vec<f64> {
    let sets = note_partial_sets(
        &model.polarization_params(),
        &model.damping,
        &model.damping_h,
        MODEL_RATE,
        phantoms,
    )
    .expect("decoded models are valid");
    render_partial_sets(&sets, len, MODEL_RATE)
}

struct SpectralTarget {
    stft: MultiResTarget,
    rms: RmsTarget,
}

impl SpectralTarget {
    fn new(samples: &[f64]) -> Result<Self> {
        Ok(Self {
            stft: MultiResTarget::new(samples, MODEL_RATE, &HARMONIC_WINDOWS)?,
            rms: RmsTarget::new(samples),
        })
    }

    fn evaluate(&self, pred: &[f64]) -> Evaluation {
        let stft = self.stft.loss(pred);
        let rms = self.rms.loss(pred);
        Evaluation {
            total: stft.value + rms,
            report: LossReport {
                stft_loss: stft.value,
                rms_loss: rms,
                per_resolution: stft.per_resolution,
                ..LossReport::default()
            },
        }
    }
}

fn summary(initial: f64, last: f64, history: &[EpochRecord]) -> StageSummary {
    StageSummary {
        initial_loss: initial,
        final_loss: last,
        epochs: history.len(),
    }
}

/// Fits every parameter of `init` to the decomposed recording `targets`.
pub fn fit_note(
    targets: &Decomposition,
    init: &NoteModel,
    config: &NoteFitConfig,
) -> Result<NoteFit> {
    init.validate()?;
    if targets.harmonic.sample_rate() != MODEL_RATE {
        return Err(Error::invalid(format!("fitting runs at {MODEL_RATE} Hz")));
    }
    if !(config.validation_fraction > 0.0 && config.validation_fraction < 1.0) {
        return Err(Error::invalid("validation fraction must lie in (0, 1)"));
    }
    let full = recombine(targets);
    let len = full.len();
    let mut history = Vec::new();

    // Stage 1: inharmonicity and detuning.
    let tracks: Vec<PartialTrack> = track_each(
        &full,
        init.f0,
        init.inharmonicity,
        CENT_PARTIALS,
        &config.tracker,
    )?
    .into_iter()
    .filter_map(Result::ok)
    .collect();
    if tracks.len() < 2 {
        return Err(Error::EstimationFailed(format!(
            "only {} of the first {CENT_PARTIALS} partials could be tracked",
            tracks.len()
        )));
    }
    // F0 follows the lower pole of the first partial as B and the detuning
    // move; without a first partial it stays at the initial value.
    let first_low = tracks
        .iter()
        .find(|t| t.partial == 1)
        .map(|t| t.low().frequency);
    let fundamental = |b: f64, df: f64| match first_low {
        Some(f) => f / (1.0 + b) - df.min(0.0),
        None => init.f0,
    };
    let stage1 = Stage1 {
        b_scale: init.inharmonicity.max(1e-5),
    };
    let cents = |p: &[f64]| -> f64 {
        let (b, df) = stage1.decode(p);
        let (pred, meas) = paired_frequencies(&tracks, fundamental(b, df), b, df);
        cent_loss(&pred, &meas, pred.len()).unwrap_or(f64::INFINITY)
    };
    let cents_eval = |p: &[f64]| -> Evaluation {
        let total = cents(p);
        Evaluation {
            total,
            report: LossReport {
                cent_loss: total,
                ..LossReport::default()
            },
        }
    };
    let project1 = |p: &mut [f64]| p[0] = p[0].max(0.0);
    let s1 = minimize(
        "stage1",
        &cents,
        &cents_eval,
        &project1,
        stage1.encode(init.inharmonicity, init.delta_f),
        &config.stage1,
    )?;
    let (b, delta_f) = stage1.decode(&s1.params);
    let stage1_summary = summary(s1.initial_loss, s1.best_loss, &s1.history);
    history.extend(s1.history);
    let mut model = init.clone();
    model.f0 = fundamental(b, delta_f);
    model.inharmonicity = b;
    model.delta_f = delta_f;
    if config.stage1_only {
        let untouched = StageSummary {
            initial_loss: 0.0,
            final_loss: 0.0,
            epochs: 0,
        };
        return Ok(NoteFit {
            model,
            history,
            stage1: stage1_summary,
            stage2: untouched,
            transient: untouched,
            noise: untouched,
            cent_loss: s1.best_loss,
            report: LossReport {
                cent_loss: s1.best_loss,
                ..LossReport::default()
            },
            tracks,
        });
    }

    // Stage 2: amplitudes and damping on the harmonic target.
    let split = ((1.0 - config.validation_fraction) * len as f64).round() as usize;
    let split = split.clamp(1, len.saturating_sub(1).max(1));
    let harmonic = targets.harmonic.samples();
    let train_target = SpectralTarget::new(&harmonic[..split])?;
    let valid_target = SpectralTarget::new(&harmonic[split..])?;
    let stage2 = Stage2::new(model.clone());
    let h = model.partials;
    let phantoms = config.phantoms;
    let local = |centre: &[f64]| {
        let centre_model = stage2.decode(centre);
        let basis =
            HarmonicBasis::new(&centre_model, split, phantoms).expect("decoded models are valid");
        let base_signal = basis.signal(&centre[..2 * h], split);
        let centre = centre.to_vec();
        let (stage2, train_target, basis) = (&stage2, &train_target, basis);
        move |p: &[f64]| -> f64 {
            let changed: Vec<usize> = (0..p.len()).filter(|i| p[*i] != centre[*i]).collect();
            if changed.iter().all(|i| *i < 2 * h) {
                let mut signal = base_signal.clone();
                let terms: BTreeSet<usize> = changed
                    .iter()
                    .flat_map(|i| basis.touching[*i].iter().copied())
                    .collect();
                for t in terms {
                    let (coef, wave) = &basis.terms[t];
                    let delta = coef.value(&p[..2 * h]) - coef.value(&centre[..2 * h]);
                    signal
                        .iter_mut()
                        .zip(wave)
                        .for_each(|(o, w)| *o += delta * w);
                }
                train_target.evaluate(&signal).total
            } else {
                train_target
                    .evaluate(&render_harmonic_of(&stage2.decode(p), split, phantoms))
                    .total
            }
        }
    };
    let validate = |p: &[f64]| -> Evaluation {
        let y = render_harmonic_of(&stage2.decode(p), len, phantoms);
        valid_target.evaluate(&y[split..])
    };
    let project2 = |p: &mut [f64]| {
        for a in &mut p[..2 * h] {
            *a = a.clamp(-1.0, 1.0);
        }
        for t in &mut p[2 * h..] {
            *t = t.abs();
        }
    };
    let s2 = minimize_local(
        "stage2",
        &local,
        &validate,
        &project2,
        stage2.encode(),
        &config.stage2,
    )?;
    let stage2_summary = summary(s2.initial_loss, s2.best_loss, &s2.history);
    history.extend(s2.history);
    let mut model = stage2.decode(&s2.params);

    // Transient and noise.
    let (_, transient_clip) = transient_target(&targets.transient, TRANSIENT_LEN);
    let tf = fit_transient(&transient_clip, &config.transient)?;
    history.extend(tf.history.iter().cloned());
    model.transient = tf.model;
    let mut noise_config = config.noise.clone();
    noise_config.stream = model.key_id as u64 * 128 + model.velocity as u64;
    let nf = fit_noise(&targets.noise, &noise_config)?;
    history.extend(nf.history.iter().cloned());
    model.noise = nf.model;
    model.metadata = NoteMetadata {
        sample_rate: MODEL_RATE,
        hpss: init.metadata.hpss.clone(),
        fit_config_hash: fingerprint(config),
    };
    model.validate()?;

    let report = LossReport {
        cent_loss: s1.best_loss,
        ..s2.best_report
    };
    Ok(NoteFit {
        model,
        history,
        stage1: stage1_summary,
        stage2: stage2_summary,
        transient: StageSummary {
            initial_loss: tf.initial_loss,
            final_loss: tf.final_loss,
            epochs: tf.history.len(),
        },
        noise: StageSummary {
            initial_loss: nf.initial_loss,
            final_loss: nf.final_loss,
            epochs: nf.history.len(),
        },
        cent_loss: s1.best_loss,
        report,
        tracks,
    })
}
