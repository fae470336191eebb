//! Finite-difference Adam fitting of note parameters.

mod adam;
mod config;
mod gradient;
mod note;
mod trainer;

pub use adam::{adam_step, clip_gradient, OptimState};
pub use config::{fingerprint, OptimizerConfig};
pub use gradient::{fd_gradient, FdGradient};
pub use note::{
    fit_note, initial_model, recombine, NoteFit, NoteFitConfig, StageSummary, STAGE1_TARGET_CENTS,
};
pub use trainer::{
    minimize, minimize_local, EpochRecord, Evaluation, Minimized, DIVERGENCE_FACTOR,
};
