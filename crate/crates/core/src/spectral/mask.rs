use serde::{Deserialize, Serialize};

use super::grid::FreqGrid;
use crate::error::{Error, Result};
use crate::tensorio::{RawTensor, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterFamily {
    Ideal,
    Gaussian,
    Butterworth,
}

impl FilterFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            FilterFamily::Ideal => "ideal",
            FilterFamily::Gaussian => "gaussian",
            FilterFamily::Butterworth => "butterworth",
        }
    }
}

impl std::str::FromStr for FilterFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" | "ilpf" => Ok(FilterFamily::Ideal),
            "gaussian" | "glpf" => Ok(FilterFamily::Gaussian),
            "butterworth" | "blpf" => Ok(FilterFamily::Butterworth),
            other => Err(Error::param("filter", format!("unknown family `{other}`"))),
        }
    }
}

/// Low-pass filter description. `d0` is the normalized stop frequency,
/// `order` only matters for Butterworth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSpec {
    pub family: FilterFamily,
    pub d0: f64,
    pub order: u32,
}

impl FilterSpec {
    pub const DEFAULT_ORDER: u32 = 4;

    pub fn new(family: FilterFamily, d0: f64, order: u32) -> Result<Self> {
        let spec = FilterSpec { family, d0, order };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(d0: f64) -> Self {
        FilterSpec {
            family: FilterFamily::Gaussian,
            d0,
            order: Self::DEFAULT_ORDER,
        }
    }

    pub fn ideal(d0: f64) -> Self {
        FilterSpec {
            family: FilterFamily::Ideal,
            d0,
            order: Self::DEFAULT_ORDER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d0 > 0.0 && self.d0 <= 1.0) {
            return Err(Error::param("d0", format!("must lie in (0, 1], got {}", self.d0)));
        }
        if self.order < 1 {
            return Err(Error::param("order", "must be at least 1"));
        }
        Ok(())
    }

    /// Response at squared normalized distance `d2`.
    pub fn response(&self, d2: f64) -> f64 {
        let d02 = self.d0 * self.d0;
        match self.family {
            FilterFamily::Ideal => {
                if d2 <= d02 {
                    1.0
                } else {
                    0.0
                }
            }
            FilterFamily::Gaussian => (-d2 / (2.0 * d02)).exp(),
            FilterFamily::Butterworth => 1.0 / (1.0 + (d2 / d02).powi(self.order as i32)),
        }
    }
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec::gaussian(0.25)
    }
}

/// Real mask over a centered `(F, H, W)` grid with values in `[0, 1]`,
/// broadcast over channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMask {
    frames: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl FrequencyMask {
    pub fn new(frames: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != frames * height * width {
            return Err(Error::LengthMismatch {
                expected: frames * height * width,
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param("mask", format!("value at {index} outside [0, 1]")));
        }
        Ok(FrequencyMask {
            frames,
            height,
            width,
            values,
        })
    }

    pub fn filled(frames: usize, height: usize, width: usize, value: f64) -> Self {
        Self::new(frames, height, width, vec![value; frames * height * width]).expect("value in [0, 1]")
    }

    /// Ideal mask keeping every bin with `d <= radius`.
    pub fn ideal_radius(grid: &FreqGrid, radius: f64) -> Self {
        let r2 = radius * radius;
        let values = grid.d2().iter().map(|&d2| if d2 <= r2 { 1.0 } else { 0.0 }).collect();
        FrequencyMask {
            frames: grid.frames,
            height: grid.height,
            width: grid.width,
            values,
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.frames, self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn complement(&self) -> FrequencyMask {
        FrequencyMask {
            values: self.values.iter().map(|v| 1.0 - v).collect(),
            ..self.clone()
        }
    }

    pub fn ensure_matches(&self, shape: Shape) -> Result<()> {
        if (self.frames, self.height, self.width) != (shape.frames, shape.height, shape.width) {
            return Err(Error::ShapeMismatch {
                expected: format!("mask grid ({}, {}, {})", self.frames, self.height, self.width),
                actual: shape.to_string(),
            });
        }
        Ok(())
    }

    /// Export as a 3-axis tensor `(F, H, W)` for inspection.
    pub fn to_raw(&self) -> RawTensor {
        RawTensor {
            dims: vec![self.frames, self.height, self.width],
            data: self.values.iter().map(|&v| v as f32).collect(),
        }
    }
}

pub fn make_mask(spec: &FilterSpec, frames: usize, height: usize, width: usize) -> FrequencyMask {
    let grid = FreqGrid::new(frames, height, width);
    FrequencyMask {
        frames,
        height,
        width,
        values: grid.d2().iter().map(|&d2| spec.response(d2)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dc(frames: usize, height: usize, width: usize) -> usize {
        ((frames / 2) * height + height / 2) * width + width / 2
    }

    #[test]
    fn every_family_is_one_at_dc() {
        for family in [FilterFamily::Ideal, FilterFamily::Gaussian, FilterFamily::Butterworth] {
            let m = make_mask(&FilterSpec::new(family, 0.25, 3).unwrap(), 8, 16, 16);
            assert_eq!(m.values()[dc(8, 16, 16)], 1.0);
        }
    }

    #[test]
    fn closed_forms() {
        let ideal = FilterSpec::ideal(0.25);
        assert_eq!(ideal.response(0.3 * 0.3), 0.0);
        assert_eq!(ideal.response(0.25 * 0.25), 1.0);
        let g = FilterSpec::gaussian(0.25);
        assert!((g.response(0.25 * 0.25) - 0.606_530_659_713).abs() < 1e-11);
        let b = FilterSpec::new(FilterFamily::Butterworth, 0.25, 2).unwrap();
        assert!((b.response(0.25 * 0.25) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gaussian_on_grid_bin() {
        // F = 8: temporal index 6 is f = 2, u = 0.5; the others sit at DC.
        let m = make_mask(&FilterSpec::gaussian(0.25), 8, 16, 16);
        let i = (6 * 16 + 8) * 16 + 8;
        assert!((m.values()[i] - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn single_frame_degenerates_to_2d() {
        let spec = FilterSpec::gaussian(0.25);
        let m = make_mask(&spec, 1, 8, 8);
        for h in 0..8 {
            for w in 0..8 {
                let uh = 2.0 * (h as f64 - 4.0) / 8.0;
                let uw = 2.0 * (w as f64 - 4.0) / 8.0;
                assert!((m.values()[h * 8 + w] - spec.response(uh * uh + uw * uw)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn masks_are_bounded_and_symmetric() {
        for family in [FilterFamily::Ideal, FilterFamily::Gaussian, FilterFamily::Butterworth] {
            for (f, h, w) in [(8, 32, 32), (5, 7, 6), (1, 9, 9)] {
                let m = make_mask(&FilterSpec::new(family, 0.4, 2).unwrap(), f, h, w);
                let g = FreqGrid::new(f, h, w);
                for i in 0..g.len() {
                    let v = m.values()[i];
                    assert!((0.0..=1.0).contains(&v));
                    assert_eq!(v, m.values()[g.mirror(i)]);
                }
            }
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(FilterSpec::new(FilterFamily::Gaussian, 0.0, 1).is_err());
        assert!(FilterSpec::new(FilterFamily::Gaussian, 1.5, 1).is_err());
        assert!(FilterSpec::new(FilterFamily::Butterworth, 0.5, 0).is_err());
        assert!(FilterSpec::new(FilterFamily::Ideal, 1.0, 1).is_ok());
        assert!("bogus".parse::<FilterFamily>().is_err());
        assert_eq!("glpf".parse::<FilterFamily>().unwrap(), FilterFamily::Gaussian);
    }

    #[test]
    fn mask_values_are_validated() {
        assert!(FrequencyMask::new(1, 1, 2, vec![0.5, 1.5]).is_err());
        assert!(FrequencyMask::new(1, 1, 2, vec![0.5]).is_err());
    }
}
