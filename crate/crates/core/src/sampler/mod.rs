//! Deterministic DDIM sampling, classifier-free guidance and the FreeInit
//! refinement loop.

mod ddim;
mod freeinit;
mod oracle;

pub use ddim::{coarse_to_fine_steps, ddim_sample, ddim_step, guided_eps, make_step_plan, StepPlan};
pub use freeinit::{freeinit_sample, FreeInitConfig, FreeInitOutput};
pub use oracle::OracleModel;

use crate::error::Result;
use crate::tensorio::{Shape, VideoTensor};

/// An epsilon-prediction network.
///
/// `cond = None` asks for the unconditional prediction. Implementations
/// must be read-only so independent sampling runs can share one model.
pub trait EpsModel: Sync {
    /// Tensor shape the model was built for.
    fn shape(&self) -> Shape;

    fn predict_eps(&self, z_t: &VideoTensor, t: usize, cond: Option<usize>) -> Result<VideoTensor>;
}

impl<M: EpsModel + ?Sized> EpsModel for &M {
    fn shape(&self) -> Shape {
        (**self).shape()
    }

    fn predict_eps(&self, z_t: &VideoTensor, t: usize, cond: Option<usize>) -> Result<VideoTensor> {
        (**self).predict_eps(z_t, t, cond)
    }
}

/// Conditioning for one sampling pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guidance {
    pub class: Option<usize>,
    pub weight: f64,
}

impl Guidance {
    pub fn unconditional() -> Self {
        Guidance {
            class: None,
            weight: 0.0,
        }
    }

    pub fn class(class: usize, weight: f64) -> Self {
        Guidance {
            class: Some(class),
            weight,
        }
    }
}
