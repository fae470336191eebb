//! Narrow-band partial measurement: each partial is shifted to baseband,
//! low-pass filtered, decimated and fitted with one or two damped complex
//! exponentials by linear prediction.

use std::f64::consts::PI;

use realfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio::resample::bessel_i0;
use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::harmonic::partial_frequency;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// Seconds skipped at the start, where recordings carry the hammer attack.
    pub skip_secs: f64,
    /// Seconds analysed after the skip.
    pub max_secs: f64,
    /// Stop-band attenuation of the band filter in dB.
    pub attenuation_db: f64,
    /// Weaker pole amplitude, relative to the stronger, below which a
    /// partial is reported with a single pole.
    pub min_pole_ratio: f64,
    /// A pole pair is replaced by one pole when either pole alone carries
    /// more than this multiple of the band energy.
    pub max_pole_energy: f64,
    /// Fraction of the band energy the poles must explain; below it the
    /// partial is reported missing.
    pub min_explained: f64,
    /// Largest decay, in dB, a pole may be extrapolated over from the start
    /// of the file to the first filtered sample. Poles decaying faster are
    /// dropped, since their initial amplitude is not measurable.
    pub max_extrapolation_db: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            skip_secs: 0.05,
            max_secs: 4.0,
            attenuation_db: 140.0,
            min_pole_ratio: 1e-3,
            max_pole_energy: 4.0,
            min_explained: 0.5,
            max_extrapolation_db: 40.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedPole {
    pub frequency: f64,
    /// Exponential decay rate per second.
    pub decay: f64,
    /// Amplitude of the zero-phase sine `a e^{-decay t} sin(2 pi f t)` that
    /// best matches the pole; the sign comes from its phase.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialTrack {
    pub partial: usize,
    /// One or two poles, sorted by frequency.
    pub poles: Vec<TrackedPole>,
}

impl PartialTrack {
    pub fn low(&self) -> &TrackedPole {
        &self.poles[0]
    }

    pub fn high(&self) -> &TrackedPole {
        self.poles.last().expect("tracks hold at least one pole")
    }

    pub fn is_split(&self) -> bool {
        self.poles.len() == 2
    }
}

/// Kaiser-windowed sinc low-pass with unit DC gain.
fn lowpass(cutoff: f64, transition: f64, attenuation_db: f64) -> Vec<f64> {
    let beta = if attenuation_db > 50.0 {
        0.1102 * (attenuation_db - 8.7)
    } else {
        0.5842 * (attenuation_db - 21.0).max(0.0).powf(0.4)
            + 0.07886 * (attenuation_db - 21.0).max(0.0)
    };
    let taps = (((attenuation_db - 8.0) / (2.285 * 2.0 * PI * transition)).ceil() as usize) | 1;
    let mid = (taps / 2) as f64;
    let norm = bessel_i0(beta);
    let mut h: Vec<f64> = (0..taps)
        .map(|j| {
            let t = j as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            let r = t / mid;
            sinc * bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / norm
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h
}

struct Baseband {
    samples: Vec<Complex64>,
    /// Input index of the newest sample feeding output 0.
    first_time: usize,
    decimation: usize,
}

/// Filtered, decimated baseband samples around `centre` Hz. Only outputs
/// whose filter support lies entirely inside `[start, end)` are produced.
fn baseband(
    x: &[f64],
    sample_rate: f64,
    centre: f64,
    h: &[f64],
    decimation: usize,
    start: usize,
    end: usize,
) -> Baseband {
    let step = -2.0 * PI * centre / sample_rate;
    let shifted: Vec<Complex64> = x[..end]
        .iter()
        .enumerate()
        .map(|(n, v)| Complex64::from_polar(*v, step * n as f64))
        .collect();
    let first_time = start + h.len() - 1;
    let samples = (first_time..end)
        .step_by(decimation)
        .map(|t| {
            let window = &shifted[t + 1 - h.len()..=t];
            window.iter().rev().zip(h).map(|(s, c)| s * c).sum()
        })
        .collect();
    Baseband {
        samples,
        first_time,
        decimation,
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Least squares `sum_j x_j * cols[j] ~ rhs` by Gram-Schmidt QR with one
/// reorthogonalization pass. `None` when a column is numerically dependent
/// on the earlier ones.
fn lstsq(cols: &[Vec<Complex64>], rhs: &[Complex64], rel_tol: f64) -> Option<Vec<Complex64>> {
    let n = cols.len();
    let mut q: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut r = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for (j, col) in cols.iter().enumerate() {
        let mut w = col.clone();
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = dot(qi, &w);
                w.iter_mut().zip(qi).for_each(|(x, qv)| *x -= c * qv);
                r[i][j] += c;
            }
        }
        let len = norm(&w);
        if !(len > rel_tol * norm(col)) {
            return None;
        }
        r[j][j] = Complex64::new(len, 0.0);
        q.push(w.into_iter().map(|x| x / len).collect());
    }
    let mut x: Vec<Complex64> = q.iter().map(|qi| dot(qi, rhs)).collect();
    for j in (0..n).rev() {
        for k in j + 1..n {
            let t = r[j][k] * x[k];
            x[j] -= t;
        }
        x[j] /= r[j][j];
    }
    Some(x)
}

fn powers(z: Complex64, len: usize) -> Vec<Complex64> {
    let mut p = Complex64::new(1.0, 0.0);
    (0..len)
        .map(|_| {
            let v = p;
            p *= z;
            v
        })
        .collect()
}

/// Least-squares amplitudes of `y[k] = sum c_i z_i^k`.
fn amplitudes(y: &[Complex64], poles: &[Complex64]) -> Option<Vec<Complex64>> {
    let cols: Vec<Vec<Complex64>> = poles.iter().map(|z| powers(*z, y.len())).collect();
    lstsq(&cols, y, 1e-12)
}

/// Energy of `c z^k` over `len` samples.
fn pole_energy(z: Complex64, c: Complex64, len: usize) -> f64 {
    let r2 = z.norm_sqr();
    let sum = if (r2 - 1.0).abs() < 1e-12 {
        len as f64
    } else {
        (1.0 - r2.powi(len as i32)) / (1.0 - r2)
    };
    c.norm_sqr() * sum
}

fn residual_norm(y: &[Complex64], poles: &[Complex64], amps: &[Complex64]) -> f64 {
    let mut fit = vec![Complex64::new(0.0, 0.0); y.len()];
    for (z, c) in poles.iter().zip(amps) {
        for (f, p) in fit.iter_mut().zip(powers(*z, y.len())) {
            *f += c * p;
        }
    }
    y.iter().zip(&fit).map(|(a, b)| (a - b).norm_sqr()).sum()
}

/// Gauss-Newton refinement of poles and amplitudes on the exponential model.
fn refine(
    y: &[Complex64],
    mut poles: Vec<Complex64>,
    mut amps: Vec<Complex64>,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let len = y.len();
    let mut cost = residual_norm(y, &poles, &amps);
    for _ in 0..30 {
        let mut cols = Vec::with_capacity(2 * poles.len());
        let mut fit = vec![Complex64::new(0.0, 0.0); len];
        for (z, c) in poles.iter().zip(&amps) {
            let pw = powers(*z, len);
            cols.push(
                (0..len)
                    .map(|k| {
                        if k == 0 {
                            Complex64::new(0.0, 0.0)
                        } else {
                            c * k as f64 * pw[k - 1]
                        }
                    })
                    .collect(),
            );
            for (f, p) in fit.iter_mut().zip(&pw) {
                *f += c * p;
            }
            cols.push(pw);
        }
        let resid: Vec<Complex64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
        let Some(step) = lstsq(&cols, &resid, 1e-14) else {
            break;
        };
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..8 {
            let trial_p: Vec<Complex64> = poles
                .iter()
                .enumerate()
                .map(|(i, z)| z + scale * step[2 * i])
                .collect();
            let trial_a: Vec<Complex64> = amps
                .iter()
                .enumerate()
                .map(|(i, c)| c + scale * step[2 * i + 1])
                .collect();
            let trial = residual_norm(y, &trial_p, &trial_a);
            if trial < cost {
                let rel = step.iter().step_by(2).map(|d| d.norm()).fold(0.0, f64::max) * scale;
                poles = trial_p;
                amps = trial_a;
                cost = trial;
                improved = rel > 1e-15;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (poles, amps)
}

/// Two-pole linear prediction; `None` when the data support only one pole.
fn two_poles(y: &[Complex64]) -> Option<[Complex64; 2]> {
    let n = y.len();
    let c = lstsq(&[y[1..n - 1].to_vec(), y[..n - 2].to_vec()], &y[2..], 1e-10)?;
    let disc = (c[0] * c[0] + 4.0 * c[1]).sqrt();
    let roots = [(c[0] + disc) / 2.0, (c[0] - disc) / 2.0];
    roots
        .iter()
        .all(|z| z.is_finite() && z.norm() > 0.0)
        .then_some(roots)
}

fn one_pole(y: &[Complex64]) -> Complex64 {
    let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
    for k in 1..y.len() {
        num += y[k - 1].conj() * y[k];
        den += y[k - 1].norm_sqr();
    }
    num / den
}

/// Two-pole start from linear prediction on `window`, if both poles are
/// stable and neither is negligible on the full data.
fn two_pole_start(
    y: &[Complex64],
    window: &[Complex64],
    config: &TrackerConfig,
) -> Option<(Vec<Complex64>, Vec<Complex64>)> {
    let poles = two_poles(window)?.to_vec();
    if poles.iter().any(|z| z.norm() > 1.0 + 1e-6) {
        return None;
    }
    let c = amplitudes(y, &poles)?;
    let (lo, hi) = (c[0].norm().min(c[1].norm()), c[0].norm().max(c[1].norm()));
    (lo >= config.min_pole_ratio * hi).then_some((poles, c))
}

/// Separations in Hz at which the one-pole fit is split into a pair.
const SPLITS_HZ: [f64; 5] = [0.1, 0.25, 0.5, 1.0, 2.0];

/// Refined poles and amplitudes with the lowest residual among the starts.
/// Linear prediction is biased by noise, so it is also run on the leading
/// half and quarter of the data, and the one-pole fit is split at several
/// separations. `hz_per_radian` converts pole angles to frequency.
fn initial_fit(
    y: &[Complex64],
    hz_per_radian: f64,
    config: &TrackerConfig,
) -> Option<(Vec<Complex64>, Vec<Complex64>)> {
    let mut starts: Vec<(Vec<Complex64>, Vec<Complex64>)> = [1, 2, 4]
        .iter()
        .map(|d| &y[..y.len() / d])
        .filter(|w| w.len() >= 16)
        .filter_map(|w| two_pole_start(y, w, config))
        .collect();
    let z = one_pole(y);
    if let Some(c) = amplitudes(y, &[z]) {
        starts.push((vec![z], c));
    }
    for hz in SPLITS_HZ {
        let half = Complex64::from_polar(1.0, 0.5 * hz / hz_per_radian);
        let pair = [z / half, z * half];
        if let Some(c) = amplitudes(y, &pair) {
            starts.push((pair.to_vec(), c));
        }
    }
    starts
        .into_iter()
        .map(|(p, c)| refine(y, p, c))
        .map(|(p, c)| (residual_norm(y, &p, &c), p, c))
        .filter(|(cost, _, _)| cost.is_finite())
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, p, c)| (p, c))
}

/// Measures partials `1..=count` of `signal` near their predicted frequencies
/// for fundamental `f0` and inharmonicity `b_hint`.
pub fn track_partials(
    signal: &AudioBuffer,
    f0: f64,
    b_hint: f64,
    count: usize,
    config: &TrackerConfig,
) -> Result<Vec<PartialTrack>> {
    track_each(signal, f0, b_hint, count, config)?
        .into_iter()
        .collect()
}

/// Like [`track_partials`], but reports each partial separately so one
/// missing partial does not discard the rest.
pub fn track_each(
    signal: &AudioBuffer,
    f0: f64,
    b_hint: f64,
    count: usize,
    config: &TrackerConfig,
) -> Result<Vec<Result<PartialTrack>>> {
    if !(f0 > 0.0 && f0.is_finite()) || !(b_hint >= 0.0) || count == 0 {
        return Err(Error::invalid(
            "partial tracking needs F0 > 0, B >= 0 and a partial count",
        ));
    }
    let sr = signal.sample_rate() as f64;
    let x = signal.samples();
    let start = ((config.skip_secs * sr) as usize).min(x.len());
    let end = (start + (config.max_secs * sr) as usize).min(x.len());
    let h = lowpass(0.5 * f0 / sr, 0.5 * f0 / sr, config.attenuation_db);
    let decimation = ((sr / (2.0 * f0)).floor() as usize).max(1);
    if end < start + h.len() + 8 * decimation {
        return Err(Error::invalid(format!(
            "signal too short to track partials of a {f0:.2} Hz note"
        )));
    }
    Ok((1..=count)
        .map(|m| {
            let centre = partial_frequency(f0, b_hint, m);
            if centre >= sr / 2.0 - f0 {
                return Err(Error::MissingPartial { m });
            }
            let bb = baseband(x, sr, centre, &h, decimation, start, end);
            let y = &bb.samples;
            let energy: f64 = y.iter().map(|v| v.norm_sqr()).sum();
            if !(energy > 0.0) {
                return Err(Error::MissingPartial { m });
            }
            let (mut poles, mut amps) =
                initial_fit(y, sr / (2.0 * PI * bb.decimation as f64), config)
                    .ok_or(Error::MissingPartial { m })?;
            // Poles beyond the filter cutoff, or negligible next to the
            // strongest, are artefacts of fitting two poles to one.
            let limit = 0.5 * f0 * 2.0 * PI * bb.decimation as f64 / sr;
            let strongest = amps.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let keep: Vec<usize> = (0..poles.len())
                .filter(|i| {
                    poles[*i].arg().abs() <= limit
                        && amps[*i].norm() >= config.min_pole_ratio * strongest
                })
                .collect();
            if keep.is_empty() {
                return Err(Error::MissingPartial { m });
            }
            if keep.len() < poles.len() {
                let z = poles[keep[0]];
                let c = amplitudes(y, &[z]).ok_or(Error::MissingPartial { m })?;
                (poles, amps) = refine(y, vec![z], c);
            }
            // Nearly cancelling pairs are ill-conditioned fits, not polarizations.
            let cancelling = poles.len() == 2
                && poles
                    .iter()
                    .zip(&amps)
                    .any(|(z, c)| pole_energy(*z, *c, y.len()) > config.max_pole_energy * energy);
            if cancelling {
                let z = one_pole(y);
                let c = amplitudes(y, &[z]).ok_or(Error::MissingPartial { m })?;
                (poles, amps) = refine(y, vec![z], c);
            }
            if residual_norm(y, &poles, &amps) > (1.0 - config.min_explained) * energy {
                return Err(Error::MissingPartial { m });
            }
            let d = bb.decimation as f64;
            let mut tracked: Vec<TrackedPole> = poles
                .iter()
                .zip(&amps)
                .map(|(z, c)| {
                    let decay_per_sample = -z.norm().ln() / d;
                    let offset = z.arg() / d;
                    // Undo the filter response and the time of the first output.
                    let p = Complex64::from_polar((-decay_per_sample).exp(), offset);
                    let pinv = p.inv();
                    let mut gain = Complex64::new(0.0, 0.0);
                    let mut pw = Complex64::new(1.0, 0.0);
                    for tap in &h {
                        gain += tap * pw;
                        pw *= pinv;
                    }
                    let at_zero = c / (gain * p.powf(bb.first_time as f64));
                    TrackedPole {
                        frequency: centre + offset * sr / (2.0 * PI),
                        decay: decay_per_sample * sr,
                        amplitude: 2.0 * at_zero.norm() * (-at_zero.im).signum(),
                    }
                })
                .collect();
            let horizon = bb.first_time as f64 / sr;
            tracked.retain(|p| {
                20.0 * std::f64::consts::LOG10_E * p.decay * horizon <= config.max_extrapolation_db
            });
            if tracked.is_empty() {
                return Err(Error::MissingPartial { m });
            }
            tracked.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
            Ok(PartialTrack {
                partial: m,
                poles: tracked,
            })
        })
        .collect::<Vec<_>>())
}
