//! Tensor container, deterministic Gaussian RNG and on-disk persistence.

mod file;
mod pgm;
mod rng;
mod tensor;

pub use file::{load_raw, load_tensor, save_raw, save_tensor, RawTensor, MAGIC};
pub use pgm::export_frames_pgm;
pub use rng::{derive_seed, gaussian_tensor, RngState};
pub use tensor::{Shape, VideoTensor};
