//! 3D spatio-temporal Fourier analysis, low-pass masks and noise
//! reinitialization.
//!
//! Conventions:
//!
//! * The transform runs over the `(frames, height, width)` axes of every
//!   channel independently; channels are never mixed.
//! * Forward is unnormalized, inverse carries `1 / (F*H*W)`.
//! * Spectra are stored centered: along an axis of length `N`, index `j`
//!   holds frequency `j - N/2` (integer division). Even lengths therefore
//!   keep their unpaired Nyquist bin at index 0.
//! * Normalized coordinates are `u = 2 f / N` per axis and the radial
//!   distance is `d = sqrt(u_t^2 + u_h^2 + u_w^2)`, so the corner of the
//!   cube sits at `d = sqrt(3)`. Each axis is normalized by its own length.

mod fft;
mod grid;
mod mask;

pub use fft::{fft3, ifft3, ifft3_with_residue, Spectrum};
pub use grid::FreqGrid;
pub use mask::{make_mask, FilterFamily, FilterSpec, FrequencyMask};

use crate::error::Result;
use crate::tensorio::VideoTensor;

/// `ifft3(fft3(x) * m)`.
pub fn low_pass(x: &VideoTensor, m: &FrequencyMask) -> Result<VideoTensor> {
    m.ensure_matches(x.shape())?;
    let mut s = fft3(x);
    s.apply_mask(m, false);
    Ok(ifft3(&s))
}

/// `ifft3(fft3(x) * (1 - m))`.
pub fn high_pass(x: &VideoTensor, m: &FrequencyMask) -> Result<VideoTensor> {
    m.ensure_matches(x.shape())?;
    let mut s = fft3(x);
    s.apply_mask(m, true);
    Ok(ifft3(&s))
}

/// Keeps the low band of `z_t` and takes the high band from `eta`:
/// `ifft3(fft3(z_t) * m + fft3(eta) * (1 - m))`.
pub fn reinitialize_noise(z_t: &VideoTensor, eta: &VideoTensor, m: &FrequencyMask) -> Result<VideoTensor> {
    eta.ensure_shape(z_t.shape())?;
    m.ensure_matches(z_t.shape())?;
    let mut low = fft3(z_t);
    let mut high = fft3(eta);
    low.apply_mask(m, false);
    high.apply_mask(m, true);
    low.add_assign(&high);
    Ok(ifft3(&low))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::tensorio::{gaussian_tensor, RngState, Shape};

    fn rand(shape: Shape, seed: u64) -> VideoTensor {
        gaussian_tensor(shape, &mut RngState::new(seed)).unwrap()
    }

    #[test]
    fn identity_and_empty_masks() {
        let shape = Shape::new(4, 2, 8, 6).unwrap();
        let x = rand(shape, 1);
        let ones = FrequencyMask::filled(4, 8, 6, 1.0);
        let zeros = FrequencyMask::filled(4, 8, 6, 0.0);
        assert!(low_pass(&x, &ones).unwrap().max_abs_diff(&x).unwrap() < 1e-5);
        assert!(high_pass(&x, &ones).unwrap().max_abs() < 1e-5);
        assert!(low_pass(&x, &zeros).unwrap().max_abs() < 1e-5);
    }

    #[test]
    fn low_plus_high_is_identity() {
        let shape = Shape::new(5, 1, 9, 8).unwrap();
        let x = rand(shape, 2);
        for family in [FilterFamily::Ideal, FilterFamily::Gaussian, FilterFamily::Butterworth] {
            let spec = FilterSpec::new(family, 0.3, 2).unwrap();
            let m = make_mask(&spec, 5, 9, 8);
            let lo = low_pass(&x, &m).unwrap();
            let hi = high_pass(&x, &m).unwrap();
            let sum = lo.lin_comb(1.0, &hi, 1.0).unwrap();
            assert!(sum.max_abs_diff(&x).unwrap() <= 1e-5);
        }
    }

    #[test]
    fn reinit_degenerate_masks() {
        let shape = Shape::new(4, 1, 8, 8).unwrap();
        let z = rand(shape, 3);
        let eta = rand(shape, 4);
        let ones = FrequencyMask::filled(4, 8, 8, 1.0);
        let zeros = FrequencyMask::filled(4, 8, 8, 0.0);
        assert!(reinitialize_noise(&z, &eta, &ones).unwrap().max_abs_diff(&z).unwrap() < 1e-5);
        assert!(reinitialize_noise(&z, &eta, &zeros).unwrap().max_abs_diff(&eta).unwrap() < 1e-5);
        let m = make_mask(&FilterSpec::gaussian(0.25), 4, 8, 8);
        assert!(reinitialize_noise(&z, &z, &m).unwrap().max_abs_diff(&z).unwrap() < 1e-5);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let z = rand(Shape::new(4, 1, 8, 8).unwrap(), 1);
        let eta = rand(Shape::new(4, 1, 8, 4).unwrap(), 1);
        let m = FrequencyMask::filled(4, 8, 8, 1.0);
        assert!(matches!(reinitialize_noise(&z, &eta, &m), Err(Error::ShapeMismatch { .. })));
        let bad = FrequencyMask::filled(2, 8, 8, 1.0);
        assert!(matches!(low_pass(&z, &bad), Err(Error::ShapeMismatch { .. })));
    }
}
