//! Diffusion-model warm starts for depth-3 QAOA on unweighted Max-Cut.
//!
//! The crate covers the whole pipeline: a dense statevector simulator for the
//! QAOA ansatz, Adam-driven multi-start parameter mining, a small denoising
//! diffusion model over the six circuit angles, corpus persistence, and the
//! head-to-head evaluation of diffusion-sampled against random
//! initializations.

pub mod adam;
pub mod dataset;
pub mod ddpm;
pub mod error;
pub mod eval;
pub mod graph;
pub mod qaoa_opt;
pub mod qsim;
pub mod seed;

pub use error::{Error, Result};
