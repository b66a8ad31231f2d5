use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use super::mask::FrequencyMask;
use crate::tensorio::{Shape, VideoTensor};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

/// Complex spectrum of a video tensor, centered per axis, in the same
/// `[F, C, H, W]` layout as its source.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    shape: Shape,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn bin(&self, f: usize, c: usize, h: usize, w: usize) -> Complex64 {
        self.data[self.shape.index(f, c, h, w)]
    }

    /// Index into a `(F, H, W)` grid for flat spectrum index `i`.
    pub fn grid_index(&self, i: usize) -> usize {
        let s = self.shape;
        let plane = s.plane_len();
        let f = i / s.frame_len();
        (f * plane) + (i % plane)
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Multiplies by `m` (or `1 - m` when `complement`), broadcasting over
    /// channels.
    pub(crate) fn apply_mask(&mut self, m: &FrequencyMask, complement: bool) {
        let values = m.values();
        for i in 0..self.data.len() {
            let g = values[self.grid_index(i)];
            self.data[i] *= if complement { 1.0 - g } else { g };
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Spectrum) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

fn transform_axis(buf: &mut [Complex64], dims: [usize; 3], axis: usize, fft: &dyn Fft<f64>) {
    let [n0, n1, n2] = dims;
    match axis {
        2 => fft.process(buf),
        _ => {
            let (len, stride, outer, inner) = if axis == 1 {
                (n1, n2, n0, n2)
            } else {
                (n0, n1 * n2, 1, n1 * n2)
            };
            let mut line = vec![Complex64::default(); len];
            for o in 0..outer {
                for i in 0..inner {
                    let base = o * n1 * n2 + i;
                    for (k, v) in line.iter_mut().enumerate() {
                        *v = buf[base + k * stride];
                    }
                    fft.process(&mut line);
                    for (k, v) in line.iter().enumerate() {
                        buf[base + k * stride] = *v;
                    }
                }
            }
        }
    }
}

fn transform3(buf: &mut [Complex64], dims: [usize; 3], direction: FftDirection) {
    for axis in [2, 1, 0] {
        if dims[axis] > 1 {
            transform_axis(buf, dims, axis, plan(dims[axis], direction).as_ref());
        }
    }
}

/// Raw index feeding centered index `j` on an axis of length `n`.
fn uncentered(j: usize, n: usize) -> usize {
    (j + n - n / 2) % n
}

/// Forward 3D FFT over `(F, H, W)` per channel, unnormalized, centered.
pub fn fft3(x: &VideoTensor) -> Spectrum {
    let s = x.shape();
    let dims = [s.frames, s.height, s.width];
    let n = s.frames * s.plane_len();
    let mut out = vec![Complex64::default(); s.numel()];
    let mut buf = vec![Complex64::default(); n];
    for c in 0..s.channels {
        for f in 0..s.frames {
            for p in 0..s.plane_len() {
                buf[f * s.plane_len() + p] = Complex64::new(f64::from(x.data()[s.index(f, c, 0, 0) + p]), 0.0);
            }
        }
        transform3(&mut buf, dims, FftDirection::Forward);
        for f in 0..s.frames {
            let rf = uncentered(f, s.frames);
            for h in 0..s.height {
                let rh = uncentered(h, s.height);
                for w in 0..s.width {
                    let rw = uncentered(w, s.width);
                    out[s.index(f, c, h, w)] = buf[(rf * s.height + rh) * s.width + rw];
                }
            }
        }
    }
    Spectrum { shape: s, data: out }
}

/// Inverse of [`fft3`] together with the largest discarded imaginary part.
pub fn ifft3_with_residue(spec: &Spectrum) -> (VideoTensor, f64) {
    let s = spec.shape;
    let dims = [s.frames, s.height, s.width];
    let n = s.frames * s.plane_len();
    let scale = 1.0 / n as f64;
    let mut out = vec![0.0f64; s.numel()];
    let mut residue = 0.0f64;
    let mut buf = vec![Complex64::default(); n];
    for c in 0..s.channels {
        for f in 0..s.frames {
            let rf = uncentered(f, s.frames);
            for h in 0..s.height {
                let rh = uncentered(h, s.height);
                for w in 0..s.width {
                    let rw = uncentered(w, s.width);
                    buf[(rf * s.height + rh) * s.width + rw] = spec.data[s.index(f, c, h, w)];
                }
            }
        }
        transform3(&mut buf, dims, FftDirection::Inverse);
        for f in 0..s.frames {
            for p in 0..s.plane_len() {
                let z = buf[f * s.plane_len() + p] * scale;
                residue = residue.max(z.im.abs());
                out[s.index(f, c, 0, 0) + p] = z.re;
            }
        }
    }
    let t = VideoTensor::from_f64(s, &out).expect("inverse of a finite spectrum is finite");
    (t, residue)
}

/// Inverse 3D FFT; the imaginary residue is discarded.
pub fn ifft3(spec: &Spectrum) -> VideoTensor {
    ifft3_with_residue(spec).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorio::{gaussian_tensor, RngState};

    fn rel_l2(a: &VideoTensor, b: &VideoTensor) -> f64 {
        (a.sub(b).unwrap().sum_sq() / b.sum_sq()).sqrt()
    }

    #[test]
    fn constant_maps_to_dc_only() {
        let s = Shape::new(4, 2, 6, 5).unwrap();
        let x = VideoTensor::filled(s, 1.5).unwrap();
        let spec = fft3(&x);
        let n = (4 * 6 * 5) as f64;
        for f in 0..4 {
            for c in 0..2 {
                for h in 0..6 {
                    for w in 0..5 {
                        let z = spec.bin(f, c, h, w);
                        if (f, h, w) == (2, 3, 2) {
                            assert!((z.re - 1.5 * n).abs() < 1e-9 && z.im.abs() < 1e-9);
                        } else {
                            assert!(z.norm() < 1e-9);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn impulse_has_flat_magnitude() {
        let s = Shape::new(4, 1, 8, 8).unwrap();
        let x = VideoTensor::from_fn(s, |f, _, h, w| if (f, h, w) == (1, 3, 5) { 1.0 } else { 0.0 }).unwrap();
        let spec = fft3(&x);
        assert!(spec.data().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn round_trip_and_parseval() {
        for shape in [(8, 1, 32, 32), (5, 3, 7, 6), (1, 1, 16, 16)] {
            let s = Shape::new(shape.0, shape.1, shape.2, shape.3).unwrap();
            let x = gaussian_tensor(s, &mut RngState::new(9)).unwrap();
            let spec = fft3(&x);
            let (back, residue) = ifft3_with_residue(&spec);
            assert!(rel_l2(&back, &x) <= 1e-5);
            assert!(residue <= 1e-5);
            let n = (s.frames * s.plane_len()) as f64;
            let lhs = x.sum_sq();
            assert!(((spec.energy() / n - lhs) / lhs).abs() <= 1e-4);
        }
    }

    #[test]
    fn real_input_spectrum_is_conjugate_symmetric() {
        use super::super::grid::FreqGrid;
        let s = Shape::new(6, 1, 8, 5).unwrap();
        let x = gaussian_tensor(s, &mut RngState::new(2)).unwrap();
        let spec = fft3(&x);
        let g = FreqGrid::new(6, 8, 5);
        for i in 0..g.len() {
            let a = spec.data()[i];
            let b = spec.data()[g.mirror(i)];
            assert!((a - b.conj()).norm() < 1e-9);
        }
    }
}
