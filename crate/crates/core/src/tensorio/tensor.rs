use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extent of a video tensor, laid out `[frames, channels, height, width]`
/// in row-major order with `width` fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub frames: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn new(frames: usize, channels: usize, height: usize, width: usize) -> Result<Self> {
        let shape = Shape {
            frames,
            channels,
            height,
            width,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims().contains(&0) {
            return Err(Error::InvalidShape(self.dims().to_vec()));
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.frames, self.channels, self.height, self.width]
    }

    pub fn numel(&self) -> usize {
        self.frames * self.channels * self.height * self.width
    }

    /// Elements in one frame (all channels).
    pub fn frame_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn index(&self, f: usize, c: usize, h: usize, w: usize) -> usize {
        ((f * self.channels + c) * self.height + h) * self.width + w
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.frames, self.channels, self.height, self.width
        )
    }
}

/// Real-valued `[F, C, H, W]` array stored as `f32`.
///
/// Every constructor checks that the payload length matches the shape and
/// that all values are finite, so a `VideoTensor` in hand is always valid.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoTensor {
    shape: Shape,
    data: Vec<f32>,
}

impl VideoTensor {
    pub fn new(shape: Shape, data: Vec<f32>) -> Result<Self> {
        shape.validate()?;
        if data.len() != shape.numel() {
            return Err(Error::LengthMismatch {
                expected: shape.numel(),
                actual: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(VideoTensor { shape, data })
    }

    /// Builds a tensor from `f64` values, rounding each to `f32`.
    pub fn from_f64(shape: Shape, data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&v| v as f32).collect())
    }

    pub fn zeros(shape: Shape) -> Result<Self> {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: f32) -> Result<Self> {
        shape.validate()?;
        Self::new(shape, vec![value; shape.numel()])
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> f32) -> Result<Self> {
        shape.validate()?;
        let mut data = Vec::with_capacity(shape.numel());
        for fr in 0..shape.frames {
            for c in 0..shape.channels {
                for h in 0..shape.height {
                    for w in 0..shape.width {
                        data.push(f(fr, c, h, w));
                    }
                }
            }
        }
        Self::new(shape, data)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn get(&self, f: usize, c: usize, h: usize, w: usize) -> f32 {
        self.data[self.shape.index(f, c, h, w)]
    }

    /// All channels of frame `f`, contiguous.
    pub fn frame(&self, f: usize) -> &[f32] {
        let n = self.shape.frame_len();
        &self.data[f * n..(f + 1) * n]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn ensure_shape(&self, expected: Shape) -> Result<()> {
        if self.shape != expected {
            return Err(Error::ShapeMismatch {
                expected: expected.to_string(),
                actual: self.shape.to_string(),
            });
        }
        Ok(())
    }

    /// `a * self + b * other`, evaluated in `f64` per element.
    pub fn lin_comb(&self, a: f64, other: &VideoTensor, b: f64) -> Result<VideoTensor> {
        other.ensure_shape(self.shape)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&x, &y)| (a * f64::from(x) + b * f64::from(y)) as f32)
            .collect();
        VideoTensor::new(self.shape, data)
    }

    pub fn scale(&self, a: f64) -> Result<VideoTensor> {
        let data = self.data.iter().map(|&x| (a * f64::from(x)) as f32).collect();
        VideoTensor::new(self.shape, data)
    }

    pub fn sub(&self, other: &VideoTensor) -> Result<VideoTensor> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v) * f64::from(v)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v)).sum::<f64>() / self.numel() as f64
    }

    /// Population variance, accumulated in `f64`.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.data
            .iter()
            .map(|&v| (f64::from(v) - mean).powi(2))
            .sum::<f64>()
            / self.numel() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(f64::from(v).abs()))
    }

    /// Root-mean-square difference to `other`.
    pub fn rms_distance(&self, other: &VideoTensor) -> Result<f64> {
        other.ensure_shape(self.shape)?;
        let ss: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2))
            .sum();
        Ok((ss / self.numel() as f64).sqrt())
    }

    pub fn max_abs_diff(&self, other: &VideoTensor) -> Result<f64> {
        other.ensure_shape(self.shape)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (&a, &b)| m.max((f64::from(a) - f64::from(b)).abs())))
    }
}
