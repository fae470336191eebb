//! Full note rendering: harmonic, transient and noise components summed.

use crate::audio::{AudioBuffer, MODEL_RATE};
use crate::error::{Error, Result};
use crate::harmonic::{note_partial_sets, render_partial_sets};
use crate::model::NoteModel;
use crate::noise::render_noise;
use crate::transient::{render_transient, TRANSIENT_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    pub harmonic: bool,
    pub phantoms: bool,
    pub transient: bool,
    pub noise: bool,
    /// Overrides the noise seed stored in the model.
    pub seed: Option<u64>,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            harmonic: true,
            phantoms: true,
            transient: true,
            noise: true,
            seed: None,
        }
    }
}

impl RenderOptions {
    pub fn only_harmonic() -> Self {
        Self {
            transient: false,
            noise: false,
            ..Self::default()
        }
    }

    pub fn only_transient() -> Self {
        Self {
            harmonic: false,
            noise: false,
            ..Self::default()
        }
    }

    pub fn only_noise() -> Self {
        Self {
            harmonic: false,
            transient: false,
            ..Self::default()
        }
    }
}

/// The harmonic component alone.
pub fn render_note_harmonic(
    model: &NoteModel,
    duration: usize,
    phantoms: bool,
) -> Result<Vec<f64>> {
    let sets = note_partial_sets(
        &model.polarization_params(),
        &model.damping,
        &model.damping_h,
        MODEL_RATE,
        phantoms,
    )?;
    Ok(render_partial_sets(&sets, duration, MODEL_RATE))
}

/// Renders `duration` samples of `model` at the model rate. The output is
/// `harmonic + transient + noise`, each disabled part contributing zeros.
pub fn render_note(
    model: &NoteModel,
    duration: usize,
    options: &RenderOptions,
) -> Result<AudioBuffer> {
    model.validate()?;
    if duration < TRANSIENT_LEN {
        return Err(Error::invalid(format!(
            "notes need at least {TRANSIENT_LEN} samples, got {duration}"
        )));
    }
    let mut out = if options.harmonic {
        render_note_harmonic(model, duration, options.phantoms)?
    } else {
        vec![0.0; duration]
    };
    if options.transient {
        let t = render_transient(&model.transient, duration)?;
        out.iter_mut().zip(t.samples()).for_each(|(o, v)| *o += v);
    }
    if options.noise {
        let mut noise = model.noise.clone();
        if let Some(seed) = options.seed {
            noise.seed = seed;
        }
        let n = render_noise(&noise, duration)?;
        out.iter_mut().zip(n.samples()).for_each(|(o, v)| *o += v);
    }
    Ok(AudioBuffer::from_parts(out, MODEL_RATE))
}
