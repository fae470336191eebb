//! The quasi-harmonic component: stiff-string partials, frequency-dependent
//! damping, two polarizations and phantom partials.

mod partials;
mod phantom;
mod render;

pub(crate) use partials::partial_frequency;
pub use partials::{decay_rates, default_partial_count, partial_frequencies, DampingCoeffs};
pub use phantom::{
    phantom_partials, phantom_partials_above, PartialFamily, PartialSet, PHANTOM_MIN_RATIO,
};
pub(crate) use render::clip_amplitude;
pub use render::{
    add_partial, note_partial_sets, render_harmonic, render_partial_sets, transverse_sets,
    PolarizationParams, MAX_DETUNING,
};
