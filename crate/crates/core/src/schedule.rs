//! Variance schedules and the forward diffusion process.
//!
//! Timesteps are 1-based: `t` ranges over `1..=T`, and `t = 0` denotes the
//! clean sample with `alpha_bar(0) = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorio::VideoTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `beta_t` evenly spaced.
    Linear,
    /// `sqrt(beta_t)` evenly spaced.
    ScaledLinear,
}

/// Serializable description of a schedule: `{kind, T, beta_start, beta_end}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    #[serde(rename = "T")]
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl ScheduleSpec {
    /// The `sd` preset: scaled-linear, 0.00085 to 0.012 over 1000 steps.
    pub const SD: ScheduleSpec = ScheduleSpec {
        kind: ScheduleKind::ScaledLinear,
        steps: 1000,
        beta_start: 0.00085,
        beta_end: 0.012,
    };

    pub const LINEAR: ScheduleSpec = ScheduleSpec {
        kind: ScheduleKind::Linear,
        steps: 1000,
        beta_start: 1e-4,
        beta_end: 0.02,
    };
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self::SD
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    spec: ScheduleSpec,
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(kind: ScheduleKind, steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        Self::from_spec(ScheduleSpec {
            kind,
            steps,
            beta_start,
            beta_end,
        })
    }

    pub fn sd() -> Self {
        Self::from_spec(ScheduleSpec::SD).expect("sd preset is valid")
    }

    pub fn from_spec(spec: ScheduleSpec) -> Result<Self> {
        let ScheduleSpec {
            kind,
            steps,
            beta_start,
            beta_end,
        } = spec;
        if steps == 0 {
            return Err(Error::param("T", "need at least one step"));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::param(
                "beta",
                format!("need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"),
            ));
        }
        let (lo, hi) = match kind {
            ScheduleKind::Linear => (beta_start, beta_end),
            ScheduleKind::ScaledLinear => (beta_start.sqrt(), beta_end.sqrt()),
        };
        let betas: Vec<f64> = (0..steps)
            .map(|i| {
                let x = if steps == 1 {
                    lo
                } else {
                    lo + (hi - lo) * i as f64 / (steps - 1) as f64
                };
                match kind {
                    ScheduleKind::Linear => x,
                    ScheduleKind::ScaledLinear => x * x,
                }
            })
            .collect();
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let alpha_bars = alphas
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(NoiseSchedule {
            spec,
            betas,
            alphas,
            alpha_bars,
        })
    }

    pub fn spec(&self) -> ScheduleSpec {
        self.spec
    }

    /// Number of diffusion steps `T`.
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// `alpha_bar` for `t = 1..=T`, stored 0-based.
    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn check_t(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::TimestepOutOfRange {
                t,
                max: self.steps(),
            });
        }
        Ok(())
    }

    /// `alpha_bar_t` for `t` in `0..=T`, with `alpha_bar_0 = 1`.
    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        match t {
            0 => Ok(1.0),
            _ => {
                self.check_t(t)?;
                Ok(self.alpha_bars[t - 1])
            }
        }
    }

    /// `alpha_bar_t / (1 - alpha_bar_t)`.
    pub fn snr_weight(&self, t: usize) -> Result<f64> {
        self.check_t(t)?;
        let ab = self.alpha_bars[t - 1];
        Ok(ab / (1.0 - ab))
    }

    /// `sqrt(alpha_bar_t) * z0 + sqrt(1 - alpha_bar_t) * eps`.
    pub fn q_sample(&self, z0: &VideoTensor, t: usize, eps: &VideoTensor) -> Result<VideoTensor> {
        self.check_t(t)?;
        let ab = self.alpha_bars[t - 1];
        z0.lin_comb(ab.sqrt(), eps, (1.0 - ab).sqrt())
    }
}
