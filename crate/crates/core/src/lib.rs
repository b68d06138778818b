//! Guided-diffusion compositing engine.
//!
//! Core pieces: image grids and masks ([`grid`]), the low-pass filter algebra
//! ([`filter`]), noise schedules ([`schedule`]), time and blend masks
//! ([`time_mask`], [`mask_ops`]), the denoiser abstraction with an exact
//! Gaussian-mixture oracle ([`denoiser`]), the guided sampler
//! ([`sampler`]) and the client side of the model bridge ([`bridge`]).
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common choices.

pub mod bridge;
pub mod denoiser;
pub mod error;
pub mod filter;
pub mod grid;
pub mod image_io;
pub mod mask_ops;
pub mod paste;
pub mod resample;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod schedule;
pub mod time_mask;

pub use denoiser::{Condition, Denoiser, DenoiserRequest, GaussianMixture, NoisePrediction, OracleDenoiser};
pub use error::{Error, Result};
pub use filter::{blend_by_mask, blend_filter, low_pass, LowPassFilter};
pub use grid::{ImageGrid, Mask, Shape};
pub use mask_ops::{blur_outwards, default_p_blend, SmoothingFunction};
pub use resample::{Action, ResampleSchedule};
pub use sampler::{run_composite, run_composite_observed, sample, BlendSpace, GuidanceConfig, RunOutput, SamplerKind};
pub use scalar::Scalar;
pub use schedule::NoiseSchedule;
pub use time_mask::TimeMask;

pub type Grid = ImageGrid<f64>;
pub type Grid32 = ImageGrid<f32>;
pub type Mask64 = Mask<f64>;
pub type Mask32 = Mask<f32>;
pub type Schedule = NoiseSchedule<f64>;
pub type Schedule32 = NoiseSchedule<f32>;
pub type Oracle = OracleDenoiser<f64>;
