//! Synthetic moving-blob videos and a small epsilon-prediction network
//! trained on them.

mod dataset;
mod net;
mod real;
mod train;
mod weights;

pub use dataset::{gen_dataset, Dataset, MotionClass, SyntheticVideoConfig};
pub use net::{timestep_features, NetConfig, Network, ParamEntry, Tape, ToyDenoiser};
pub use real::Real;
pub use train::{eval_loss, train, Adam, TrainConfig, TrainReport};
pub use weights::{load_model, save_model, ModelManifest, MANIFEST_FILE, MANIFEST_SCHEMA, WEIGHTS_FILE};
