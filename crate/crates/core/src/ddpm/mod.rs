//! Denoising diffusion over fixed-length real vectors.
//!
//! The model is unconditional: it learns the pooled distribution of its
//! training vectors. Inputs are expected in normalized coordinates (roughly
//! `[-1, 1]`); mapping to and from circuit angles lives in [`crate::dataset`].

pub mod checkpoint;
pub mod model;
pub mod schedule;
pub mod train;

pub use checkpoint::Checkpoint;
pub use model::{ModelDims, NoisePredictor, ParamGroup};
pub use schedule::{build_schedule, forward_diffuse, NoiseSchedule};
pub use train::{denoise_step, sample, train, TrainConfig, TrainOutput};

/// Diffusion steps used by default.
pub const DEFAULT_STEPS: usize = 100;
