use std::fs;
use std::path::Path;

use super::tensor::VideoTensor;
use crate::error::{Error, Result};

/// Writes one binary P5 (maxval 255) image per frame as `frame_%04d.pgm`.
///
/// Values are mapped linearly from `[min, max]` onto `[0, 255]`, rounded
/// half-up and clamped.
pub fn export_frames_pgm(t: &VideoTensor, dir: impl AsRef<Path>, min: f64, max: f64) -> Result<()> {
    let shape = t.shape();
    if shape.channels != 1 {
        return Err(Error::UnsupportedChannels(shape.channels));
    }
    if min.is_nan() || max.is_nan() || min >= max {
        return Err(Error::param("min/max", format!("need min < max, got {min} >= {max}")));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let header = format!("P5\n{} {}\n255\n", shape.width, shape.height);
    for f in 0..shape.frames {
        let mut bytes = Vec::with_capacity(header.len() + shape.plane_len());
        bytes.extend_from_slice(header.as_bytes());
        bytes.extend(t.frame(f).iter().map(|&v| to_byte(f64::from(v), min, max)));
        let path = dir.join(format!("frame_{f:04}.pgm"));
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn to_byte(v: f64, min: f64, max: f64) -> u8 {
    let scaled = (v - min) / (max - min) * 255.0;
    (scaled + 0.5).floor().clamp(0.0, 255.0) as u8
}
