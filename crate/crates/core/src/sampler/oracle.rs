use super::EpsModel;
use crate::error::Result;
use crate::schedule::NoiseSchedule;
use crate::tensorio::{Shape, VideoTensor};

/// Exact denoiser for a dataset holding the single clip `z0`: at every `t`
/// it returns the noise that explains `z_t` given `z0`,
/// `(z_t - sqrt(abar_t) z0) / sqrt(1 - abar_t)`. Ignores the class.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleModel {
    z0: VideoTensor,
    schedule: NoiseSchedule,
}

impl OracleModel {
    pub fn new(z0: VideoTensor, schedule: NoiseSchedule) -> Self {
        OracleModel { z0, schedule }
    }

    pub fn z0(&self) -> &VideoTensor {
        &self.z0
    }
}

impl EpsModel for OracleModel {
    fn shape(&self) -> Shape {
        self.z0.shape()
    }

    fn predict_eps(&self, z_t: &VideoTensor, t: usize, _cond: Option<usize>) -> Result<VideoTensor> {
        z_t.ensure_shape(self.z0.shape())?;
        let ab = self.schedule.alpha_bar(t)?;
        let k = 1.0 / (1.0 - ab).sqrt();
        z_t.lin_comb(k, &self.z0, -ab.sqrt() * k)
    }
}
