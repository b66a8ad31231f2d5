use serde::Serialize;

use super::consistency::temporal_consistency;
use crate::error::{Error, Result};
use crate::sampler::{ddim_sample, make_step_plan, EpsModel, Guidance};
use crate::schedule::NoiseSchedule;
use crate::spectral::{reinitialize_noise, FreqGrid, FrequencyMask};
use crate::tensorio::{gaussian_tensor, RngState, VideoTensor};

/// Ideal mask keeping the lowest-`d` bins that make up a fraction `ratio`
/// of the grid. Ties at the cutoff radius are kept together, so masks are
/// radially symmetric and nested in `ratio`.
pub fn keep_ratio_mask(grid: &FreqGrid, ratio: f64) -> Result<FrequencyMask> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::param("keep_ratio", format!("{ratio} outside [0, 1]")));
    }
    let n = grid.len();
    let need = (ratio * n as f64).ceil() as usize;
    let values = if need == 0 {
        vec![0.0; n]
    } else {
        let mut sorted = grid.d2().to_vec();
        sorted.sort_by(f64::total_cmp);
        let cutoff = sorted[need.min(n) - 1];
        grid.d2().iter().map(|&d2| if d2 <= cutoff { 1.0 } else { 0.0 }).collect()
    };
    FrequencyMask::new(grid.frames, grid.height, grid.width, values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingRow {
    pub keep_ratio: f64,
    pub bins_kept: usize,
    /// RMS distance to the output sampled from the unmodified `z_T`.
    pub distance: f64,
    pub consistency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingResult {
    pub rows: Vec<MixingRow>,
    pub outputs: Vec<VideoTensor>,
    /// Sample from the unmodified `z_T`.
    pub full: VideoTensor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingSettings {
    pub ddim_steps: usize,
    pub guidance: Guidance,
    pub seed: u64,
}

/// Diffuses `z0_real` to `z_T`, keeps a growing low band of it, fills the
/// rest with fresh noise and samples from each mixture.
///
/// Streams: `"eps"` diffuses the clip, `"eta"` supplies the high band.
pub fn mixing_experiment<M: EpsModel + ?Sized>(
    model: &M,
    z0_real: &VideoTensor,
    keep_ratios: &[f64],
    s: &NoiseSchedule,
    settings: MixingSettings,
) -> Result<MixingResult> {
    let shape = model.shape();
    z0_real.ensure_shape(shape)?;
    let grid = FreqGrid::new(shape.frames, shape.height, shape.width);
    let masks = keep_ratios
        .iter()
        .map(|&r| keep_ratio_mask(&grid, r))
        .collect::<Result<Vec<_>>>()?;
    let plan = make_step_plan(s.steps(), settings.ddim_steps)?;
    let eps = gaussian_tensor(shape, &mut RngState::substream(settings.seed, "eps"))?;
    let eta = gaussian_tensor(shape, &mut RngState::substream(settings.seed, "eta"))?;
    let z_t = s.q_sample(z0_real, s.steps(), &eps)?;
    let full = ddim_sample(model, &z_t, &plan, settings.guidance, s)?;

    let mut rows = Vec::with_capacity(masks.len());
    let mut outputs = Vec::with_capacity(masks.len());
    for (&ratio, mask) in keep_ratios.iter().zip(&masks) {
        let kept = mask.values().iter().filter(|&&v| v == 1.0).count();
        let start = if kept == grid.len() {
            z_t.clone()
        } else if kept == 0 {
            eta.clone()
        } else {
            reinitialize_noise(&z_t, &eta, mask)?
        };
        let out = if kept == grid.len() {
            full.clone()
        } else {
            ddim_sample(model, &start, &plan, settings.guidance, s)?
        };
        rows.push(MixingRow {
            keep_ratio: ratio,
            bins_kept: kept,
            distance: out.rms_distance(&full)?,
            consistency: temporal_consistency(&out)?,
        });
        outputs.push(out);
    }
    Ok(MixingResult { rows, outputs, full })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorio::Shape;

    #[test]
    fn masks_are_nested_and_sized() {
        let grid = FreqGrid::new(8, 16, 16);
        let ratios = [0.0, 0.1, 0.2, 0.5, 0.8, 1.0];
        let masks: Vec<_> = ratios.iter().map(|&r| keep_ratio_mask(&grid, r).unwrap()).collect();
        for (r, m) in ratios.iter().zip(&masks) {
            let kept = m.values().iter().filter(|&&v| v == 1.0).count();
            assert!(kept as f64 >= r * grid.len() as f64);
        }
        assert!(masks[0].values().iter().all(|&v| v == 0.0));
        assert!(masks[5].values().iter().all(|&v| v == 1.0));
        for pair in masks.windows(2) {
            for (a, b) in pair[0].values().iter().zip(pair[1].values()) {
                assert!(a <= b);
            }
        }
    }

    #[test]
    fn masks_are_symmetric() {
        let grid = FreqGrid::new(4, 8, 6);
        let m = keep_ratio_mask(&grid, 0.3).unwrap();
        for i in 0..grid.len() {
            assert_eq!(m.values()[i], m.values()[grid.mirror(i)]);
        }
    }

    struct Shrink(Shape);

    impl EpsModel for Shrink {
        fn shape(&self) -> Shape {
            self.0
        }

        fn predict_eps(&self, z_t: &VideoTensor, _t: usize, _cond: Option<usize>) -> Result<VideoTensor> {
            z_t.scale(0.5)
        }
    }

    #[test]
    fn full_ratio_has_zero_distance_and_empty_ratio_is_pure_noise() {
        let shape = Shape::new(4, 1, 8, 8).unwrap();
        let model = Shrink(shape);
        let s = NoiseSchedule::sd();
        let z0 = VideoTensor::from_fn(shape, |f, _, h, w| ((f + h + w) as f32 * 0.3).sin()).unwrap();
        let settings = MixingSettings {
            ddim_steps: 5,
            guidance: Guidance::unconditional(),
            seed: 3,
        };
        let r = mixing_experiment(&model, &z0, &[0.0, 0.2, 1.0], &s, settings).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.rows[2].distance, 0.0);
        let eta = gaussian_tensor(shape, &mut RngState::substream(3, "eta")).unwrap();
        let plan = make_step_plan(1000, 5).unwrap();
        let vanilla = ddim_sample(&model, &eta, &plan, Guidance::unconditional(), &s).unwrap();
        assert_eq!(r.outputs[0], vanilla);
        assert_eq!(r.rows[0].distance, vanilla.rms_distance(&r.full).unwrap());
    }

    #[test]
    fn rejects_bad_ratio() {
        let grid = FreqGrid::new(2, 2, 2);
        assert!(keep_ratio_mask(&grid, 1.5).is_err());
        assert!(keep_ratio_mask(&grid, -0.1).is_err());
    }
}
