//! Classical ghost imaging simulation.
//!
//! Mask ensembles, the noisy bucket forward model, adjoint and iterative
//! reconstruction, closed-form SNR predictors and a shutterless CCD model.

pub mod analysis;
pub mod ccd;
pub mod ensemble;
pub mod error;
mod fft;
pub mod forward;
pub mod image;
pub mod masks;
pub mod recon;
pub mod seed;
pub mod stats;
pub mod types;

pub use ensemble::{ensemble_stats, MaskEnsemble, MaskFamily, MaskSource};
pub use error::{GiError, Result};
pub use image::Image;
pub use seed::{derive_seed, Seed};
pub use stats::image_stats;
pub use types::{BucketVector, NoiseKind, NoiseSpec};
