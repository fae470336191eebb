#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod audio;
pub mod error;
pub mod fitting;
pub mod harmonic;
pub mod losses;
pub mod model;
pub mod noise;
pub mod synth;
pub mod transient;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/harmonic.md")]
    mod harmonic {}
    #[doc = include_str!("../../../book/src/transient-noise.md")]
    mod transient_noise {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/model-files.md")]
    mod model_files {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
