//! A desk-scale laboratory for diffusion sampling with iterative
//! low-frequency noise refinement (FreeInit).
//!
//! The crate is organized bottom-up:
//!
//! * [`tensorio`]: video tensors, the counter-based Gaussian RNG, the `FIN1`
//!   tensor file format and PGM frame export.
//! * [`schedule`]: variance schedules and the forward diffusion process.
//! * [`spectral`]: centered 3D FFTs, low-pass masks and noise
//!   reinitialization.
//! * [`sampler`]: deterministic DDIM, classifier-free guidance and the
//!   FreeInit refinement loop.
//! * [`model`]: synthetic moving-blob videos and a small epsilon-prediction
//!   network trained with hand-written backprop.
//! * [`analysis`]: per-band SNR, temporal consistency, the low-frequency
//!   mixing study and ablation sweeps.
//! * [`cli`]: the experiment runner behind the `freeinit` binary.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod model;
pub mod sampler;
pub mod schedule;
pub mod spectral;
pub mod tensorio;

pub use error::{Error, Result};
pub use schedule::NoiseSchedule;
pub use tensorio::{RngState, Shape, VideoTensor};
