//! Targets and initial values extracted from recordings.

mod damping;
mod hpss;
mod inharmonicity;
mod peaks;
mod tracker;

pub use damping::fit_damping;
pub use hpss::{
    hpss_decompose, hpss_masks, transient_target, Decomposition, HpssConfig, HpssMasks,
    ONSET_BLOCK, ONSET_THRESHOLD,
};
pub use inharmonicity::{aggregate_b, estimate_b, pair_estimate, InharmonicityEstimate};
pub use peaks::{
    estimate_partial_peaks, PeakEstimate, PEAK_ANALYSIS_SECS, PEAK_FFT, PEAK_FLOOR_DB, PEAK_SEARCH,
};
pub use tracker::{track_each, track_partials, PartialTrack, TrackedPole, TrackerConfig};
