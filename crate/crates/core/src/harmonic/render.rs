use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::partials::{decay_rates, partial_frequencies, DampingCoeffs};
use super::phantom::{phantom_partials, PartialFamily, PartialSet};
use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Bound on the horizontal detuning of fitted and stored models, in Hz.
/// Rendering itself accepts any detuning that keeps F0 + delta_f positive.
pub const MAX_DETUNING: f64 = 1.0;

/// Oscillators are re-anchored to the closed form this often so the
/// recursive rotation cannot drift.
const RESYNC_BLOCK: usize = 1024;

/// Amplitudes below this are treated as silent for the rest of the render.
const SILENT_AMPLITUDE: f64 = 1e-12;

/// Parameters of the two transverse polarizations of one note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationParams {
    pub f0: f64,
    pub inharmonicity: f64,
    /// Added to F0 for the horizontal polarization.
    pub delta_f: f64,
    pub alpha_v: Vec<f64>,
    pub alpha_h: Vec<f64>,
}

impl PolarizationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return Err(Error::invalid(format!(
                "F0 must be positive, got {}",
                self.f0
            )));
        }
        if !(self.inharmonicity >= 0.0 && self.inharmonicity.is_finite()) {
            return Err(Error::invalid("inharmonicity must be non-negative"));
        }
        if !(self.delta_f.is_finite() && self.f0 + self.delta_f > 0.0) {
            return Err(Error::invalid(format!(
                "detuning {} Hz leaves no positive horizontal F0",
                self.delta_f
            )));
        }
        if self.alpha_v.len() != self.alpha_h.len() || self.alpha_v.is_empty() {
            return Err(Error::invalid(
                "alpha_v and alpha_h must be non-empty and equally long",
            ));
        }
        if self
            .alpha_v
            .iter()
            .chain(&self.alpha_h)
            .any(|a| !a.is_finite())
        {
            return Err(Error::invalid("non-finite amplitude"));
        }
        Ok(())
    }

    pub fn partial_count(&self) -> usize {
        self.alpha_v.len()
    }
}

/// Amplitudes whose magnitude exceeds one are clipped to one.
pub(crate) fn clip_amplitude(a: f64) -> f64 {
    a.clamp(-1.0, 1.0)
}

fn polarization_set(
    f0: f64,
    inharmonicity: f64,
    alphas: &[f64],
    damping: &DampingCoeffs,
    sample_rate: u32,
    family: PartialFamily,
) -> Result<PartialSet> {
    let nyquist = sample_rate as f64 / 2.0;
    let frequencies = partial_frequencies(f0, inharmonicity, alphas.len(), nyquist)?;
    let amplitudes = alphas[..frequencies.len()]
        .iter()
        .map(|a| clip_amplitude(*a))
        .collect();
    let decay_rates = decay_rates(&frequencies, &damping.abs(), sample_rate);
    Ok(PartialSet {
        frequencies,
        amplitudes,
        decay_rates,
        family,
    })
}

/// The vertical (F0) and horizontal (F0 + delta_f) partial sets.
pub fn transverse_sets(
    params: &PolarizationParams,
    damping_v: &DampingCoeffs,
    damping_h: &DampingCoeffs,
    sample_rate: u32,
) -> Result<(PartialSet, PartialSet)> {
    params.validate()?;
    let v = polarization_set(
        params.f0,
        params.inharmonicity,
        &params.alpha_v,
        damping_v,
        sample_rate,
        PartialFamily::Vertical,
    )?;
    let h = polarization_set(
        params.f0 + params.delta_f,
        params.inharmonicity,
        &params.alpha_h,
        damping_h,
        sample_rate,
        PartialFamily::Horizontal,
    )?;
    Ok((v, h))
}

/// Every partial family of the note: both polarizations, plus the phantom
/// families when requested.
pub fn note_partial_sets(
    params: &PolarizationParams,
    damping_v: &DampingCoeffs,
    damping_h: &DampingCoeffs,
    sample_rate: u32,
    include_phantoms: bool,
) -> Result<Vec<PartialSet>> {
    let (v, h) = transverse_sets(params, damping_v, damping_h, sample_rate)?;
    let phantoms = if include_phantoms {
        phantom_partials(&v, &h, params.f0, sample_rate as f64 / 2.0)
    } else {
        Vec::new()
    };
    let mut sets = vec![v, h];
    sets.extend(phantoms);
    Ok(sets)
}

/// Adds `amplitude * exp(-decay n) * sin(2 pi freq n / rate)` to `out`.
pub fn add_partial(out: &mut [f64], freq: f64, amplitude: f64, decay: f64, sample_rate: u32) {
    if amplitude == 0.0 {
        return;
    }
    let omega = 2.0 * PI * freq / sample_rate as f64;
    let step = Complex64::from_polar((-decay).exp(), omega);
    for (b, block) in out.chunks_mut(RESYNC_BLOCK).enumerate() {
        let start = (b * RESYNC_BLOCK) as f64;
        let envelope = amplitude * (-decay * start).exp();
        if envelope.abs() < SILENT_AMPLITUDE {
            break;
        }
        let mut z = Complex64::from_polar(envelope, omega * start);
        for sample in block.iter_mut() {
            *sample += z.im;
            z *= step;
        }
    }
}

/// Sums every partial of every set into a buffer of `duration` samples.
pub fn render_partial_sets(sets: &[PartialSet], duration: usize, sample_rate: u32) -> Vec<f64> {
    let mut out = vec![0.0; duration];
    for set in sets {
        for i in 0..set.len() {
            add_partial(
                &mut out,
                set.frequencies[i],
                set.amplitudes[i],
                set.decay_rates[i],
                sample_rate,
            );
        }
    }
    out
}

/// The quasi-harmonic component: both polarizations with their own damping,
/// optionally with phantom partials. All phases start at zero.
pub fn render_harmonic(
    params: &PolarizationParams,
    damping_v: &DampingCoeffs,
    damping_h: &DampingCoeffs,
    duration: usize,
    sample_rate: u32,
    include_phantoms: bool,
) -> Result<AudioBuffer> {
    if duration == 0 {
        return Err(Error::invalid("duration must be at least one sample"));
    }
    let sets = note_partial_sets(params, damping_v, damping_h, sample_rate, include_phantoms)?;
    Ok(AudioBuffer::from_parts(
        render_partial_sets(&sets, duration, sample_rate),
        sample_rate,
    ))
}
