use serde::{Deserialize, Serialize};

use super::ddim::{coarse_to_fine_steps, ddim_sample, make_step_plan};
use super::{EpsModel, Guidance};
use crate::error::{Error, Result};
use crate::schedule::NoiseSchedule;
use crate::spectral::{make_mask, reinitialize_noise, FilterSpec};
use crate::tensorio::{gaussian_tensor, RngState, VideoTensor};

/// Settings of one FreeInit run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreeInitConfig {
    /// Refinement iterations after the initial pass; 0 is plain sampling.
    pub iterations: usize,
    pub filter: FilterSpec,
    pub ddim_steps: usize,
    /// Scale the DDIM budget of refinement pass `i` as `round(i T / N)`.
    pub coarse_to_fine: bool,
    pub guidance_weight: f64,
    /// Diffuse with the original starting noise (true) or a fresh draw.
    pub reuse_eps: bool,
    /// Replace the high band with fresh noise; when off the diffused latent
    /// is used as is.
    pub noise_reinit: bool,
    /// Not part of the serialized form; experiments derive it from their
    /// root seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for FreeInitConfig {
    fn default() -> Self {
        FreeInitConfig {
            iterations: 4,
            filter: FilterSpec::gaussian(0.25),
            ddim_steps: 25,
            coarse_to_fine: false,
            guidance_weight: 7.5,
            reuse_eps: true,
            noise_reinit: true,
            seed: 0,
        }
    }
}

impl FreeInitConfig {
    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        if self.ddim_steps == 0 {
            return Err(Error::param("ddim_steps", "must be at least 1"));
        }
        if self.guidance_weight.is_nan() || self.guidance_weight < 0.0 {
            return Err(Error::param("guidance_weight", "must be non-negative"));
        }
        if self.coarse_to_fine && self.iterations > self.ddim_steps {
            return Err(Error::param(
                "iterations",
                "coarse-to-fine needs iterations <= ddim_steps",
            ));
        }
        Ok(())
    }

    /// DDIM step count for every pass `0..=iterations`.
    ///
    /// Pass 0 is the plain sample and always uses `ddim_steps`; with
    /// coarse-to-fine enabled, refinement pass `i` uses the `(i-1)`-th entry
    /// of [`coarse_to_fine_steps`].
    pub fn pass_steps(&self) -> Result<Vec<usize>> {
        let mut out = vec![self.ddim_steps];
        if self.coarse_to_fine && self.iterations > 0 {
            out.extend(coarse_to_fine_steps(self.ddim_steps, self.iterations)?);
            // collapsed duplicates keep the last budget
            while out.len() < self.iterations + 1 {
                out.push(self.ddim_steps);
            }
        } else {
            out.extend(std::iter::repeat_n(self.ddim_steps, self.iterations));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeInitOutput {
    /// Clean sample of the last pass.
    pub final_z0: VideoTensor,
    /// Clean sample of every pass, iteration 0 first.
    pub iterations: Vec<VideoTensor>,
    /// Starting latent fed to every pass.
    pub initial_noises: Vec<VideoTensor>,
    /// DDIM step count used by every pass.
    pub pass_steps: Vec<usize>,
}

/// Runs the denoise / diffuse / reinitialize loop.
///
/// Random streams derive from `config.seed`: `"eps"` for the starting
/// noise, `"eta:i"` for the high band of refinement `i` and `"renoise:i"`
/// for the diffusion noise when `reuse_eps` is off.
pub fn freeinit_sample<M: EpsModel + ?Sized>(
    model: &M,
    config: &FreeInitConfig,
    cond: Option<usize>,
    s: &NoiseSchedule,
) -> Result<FreeInitOutput> {
    config.validate()?;
    let shape = model.shape();
    let total = s.steps();
    let guidance = Guidance {
        class: cond,
        weight: config.guidance_weight,
    };
    let mask = make_mask(&config.filter, shape.frames, shape.height, shape.width);
    let pass_steps = config.pass_steps()?;

    let eps = gaussian_tensor(shape, &mut RngState::substream(config.seed, "eps"))?;
    let mut z = eps.clone();
    let mut iterations = Vec::with_capacity(config.iterations + 1);
    let mut initial_noises = Vec::with_capacity(config.iterations + 1);

    for (i, &steps) in pass_steps.iter().enumerate() {
        let plan = make_step_plan(total, steps)?;
        let z0 = ddim_sample(model, &z, &plan, guidance, s)?;
        initial_noises.push(z);
        if i == config.iterations {
            iterations.push(z0);
            break;
        }
        let diffusion_noise = if config.reuse_eps {
            eps.clone()
        } else {
            gaussian_tensor(shape, &mut RngState::substream(config.seed, &format!("renoise:{i}")))?
        };
        let z_t = s.q_sample(&z0, total, &diffusion_noise)?;
        iterations.push(z0);
        z = if config.noise_reinit {
            let eta = gaussian_tensor(shape, &mut RngState::substream(config.seed, &format!("eta:{i}")))?;
            reinitialize_noise(&z_t, &eta, &mask)?
        } else {
            z_t
        };
    }

    Ok(FreeInitOutput {
        final_z0: iterations.last().unwrap().clone(),
        iterations,
        initial_noises,
        pass_steps,
    })
}
