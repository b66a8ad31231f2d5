//! `FIN1` tensor container.
//!
//! ```text
//! magic   4 bytes   "FIN1"
//! ndim    u8
//! dims    ndim x u64 little-endian
//! payload prod(dims) x f32 little-endian, row-major
//! ```

use std::fs;
use std::path::Path;

use super::tensor::{Shape, VideoTensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FIN1";

/// An n-dimensional `f32` array as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl RawTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() || dims.len() > usize::from(u8::MAX) {
            return Err(Error::format("ndim", format!("{} dimensions", dims.len())));
        }
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(RawTensor { dims, data })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + 8 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::format("magic", "file shorter than 4 bytes"));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::format(
                "magic",
                format!("expected \"FIN1\", found {:?}", String::from_utf8_lossy(&bytes[..4])),
            ));
        }
        let ndim = *bytes
            .get(4)
            .ok_or_else(|| Error::format("ndim", "missing"))? as usize;
        if ndim == 0 {
            return Err(Error::format("ndim", "zero dimensions"));
        }
        let dims_end = 5 + 8 * ndim;
        if bytes.len() < dims_end {
            return Err(Error::format(
                "dims",
                format!("truncated: header needs {dims_end} bytes, file has {}", bytes.len()),
            ));
        }
        let dims: Vec<usize> = bytes[5..dims_end]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::format("dims", "element count overflows"))?;
        let payload = &bytes[dims_end..];
        let want = count
            .checked_mul(4)
            .ok_or_else(|| Error::format("dims", "payload size overflows"))?;
        if payload.len() < want {
            return Err(Error::format(
                "payload",
                format!(
                    "truncated: dims {dims:?} need {count} floats, found {}",
                    payload.len() / 4
                ),
            ));
        }
        if payload.len() > want {
            return Err(Error::format(
                "payload",
                format!("{} trailing bytes after {count} floats", payload.len() - want),
            ));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(RawTensor { dims, data })
    }
}

impl From<&VideoTensor> for RawTensor {
    fn from(t: &VideoTensor) -> Self {
        RawTensor {
            dims: t.shape().dims().to_vec(),
            data: t.data().to_vec(),
        }
    }
}

impl TryFrom<RawTensor> for VideoTensor {
    type Error = Error;

    fn try_from(raw: RawTensor) -> Result<Self> {
        if raw.dims.len() != 4 {
            return Err(Error::format(
                "ndim",
                format!("video tensors have 4 dimensions, file has {}", raw.dims.len()),
            ));
        }
        let shape = Shape::new(raw.dims[0], raw.dims[1], raw.dims[2], raw.dims[3])?;
        VideoTensor::new(shape, raw.data)
    }
}

pub fn save_raw(raw: &RawTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, raw.encode()).map_err(|e| Error::io(path, e))
}

pub fn load_raw(path: impl AsRef<Path>) -> Result<RawTensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    RawTensor::decode(&bytes)
}

pub fn save_tensor(t: &VideoTensor, path: impl AsRef<Path>) -> Result<()> {
    save_raw(&RawTensor::from(t), path)
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<VideoTensor> {
    VideoTensor::try_from(load_raw(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorio::{gaussian_tensor, RngState};

    fn field_of(err: Error) -> &'static str {
        match err {
            Error::Format { field, .. } => field,
            other => panic!("expected format error, got {other}"),
        }
    }

    #[test]
    fn round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.fin");
        let t = gaussian_tensor(Shape::new(3, 2, 5, 7).unwrap(), &mut RngState::new(1)).unwrap();
        save_tensor(&t, &path).unwrap();
        assert_eq!(load_tensor(&path).unwrap(), t);
        let len = std::fs::metadata(&path).unwrap().len() as usize;
        assert_eq!(len, 4 + 1 + 4 * 8 + 4 * t.numel());
    }

    #[test]
    fn bad_magic() {
        let mut bytes = RawTensor::new(vec![1], vec![0.0]).unwrap().encode();
        bytes[..4].copy_from_slice(b"XXXX");
        assert_eq!(field_of(RawTensor::decode(&bytes).unwrap_err()), "magic");
    }

    #[test]
    fn payload_short_by_one_float() {
        let raw = RawTensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = raw.encode();
        let err = RawTensor::decode(&bytes[..bytes.len() - 4]).unwrap_err();
        assert_eq!(field_of(err), "payload");
        assert!(RawTensor::decode(&bytes[..bytes.len() - 4])
            .unwrap_err()
            .to_string()
            .contains("truncated"));
    }

    #[test]
    fn truncated_header_and_trailing_bytes() {
        let bytes = RawTensor::new(vec![2, 2], vec![0.0; 4]).unwrap().encode();
        assert_eq!(field_of(RawTensor::decode(&bytes[..9]).unwrap_err()), "dims");
        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(field_of(RawTensor::decode(&long).unwrap_err()), "payload");
    }

    #[test]
    fn video_tensor_requires_four_dims() {
        let raw = RawTensor::new(vec![4, 4], vec![0.0; 16]).unwrap();
        assert_eq!(field_of(VideoTensor::try_from(raw).unwrap_err()), "ndim");
    }

    #[test]
    fn header_is_little_endian() {
        let bytes = RawTensor::new(vec![1, 2, 3, 1], vec![0.0; 6]).unwrap().encode();
        assert_eq!(&bytes[..5], b"FIN1\x04");
        assert_eq!(&bytes[5..13], &1u64.to_le_bytes());
        assert_eq!(&bytes[13..21], &2u64.to_le_bytes());
    }
}
