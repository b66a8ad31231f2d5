use serde::Serialize;

use super::bands::{Band, BandSpec};
use crate::error::{Error, Result};
use crate::schedule::{NoiseSchedule, ScheduleSpec};
use crate::spectral::{fft3, FreqGrid};
use crate::tensorio::VideoTensor;

/// Per-band SNR curves. `snr_db[j][k]` is band `j` at `ts[k]`; a band whose
/// signal energy is zero reads `-inf` (written as `null` in JSON).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub schedule: ScheduleSpec,
    pub shape: [usize; 4],
    pub dataset_id: String,
    pub samples: usize,
    pub bands: Vec<Band>,
    pub ts: Vec<usize>,
    pub signal_energy: Vec<f64>,
    pub noise_energy: Vec<f64>,
    pub snr_db: Vec<Vec<f64>>,
}

impl SpectrumReport {
    pub fn band_curve(&self, band: usize) -> &[f64] {
        &self.snr_db[band]
    }
}

/// Squared spectral magnitude summed per band, pooled over channels.
pub fn band_energies(x: &VideoTensor, bands: &BandSpec) -> Result<Vec<f64>> {
    let shape = x.shape();
    let grid = FreqGrid::new(shape.frames, shape.height, shape.width);
    let assign = bands.assign(&grid)?;
    let spec = fft3(x);
    let mut out = vec![0.0; bands.len()];
    for (i, z) in spec.data().iter().enumerate() {
        out[assign[spec.grid_index(i)]] += z.norm_sqr();
    }
    Ok(out)
}

/// SNR of `z_t = sqrt(abar) z0 + sqrt(1 - abar) eps` per band and timestep.
pub fn snr_report(
    z0: &VideoTensor,
    eps: &VideoTensor,
    s: &NoiseSchedule,
    bands: &BandSpec,
    ts: &[usize],
) -> Result<SpectrumReport> {
    snr_report_pooled(&[(z0, eps)], s, bands, ts, "single")
}

/// As [`snr_report`] with signal and noise energies summed over all pairs
/// before forming the ratio.
pub fn snr_report_pooled(
    pairs: &[(&VideoTensor, &VideoTensor)],
    s: &NoiseSchedule,
    bands: &BandSpec,
    ts: &[usize],
    dataset_id: &str,
) -> Result<SpectrumReport> {
    let (first, _) = pairs.first().ok_or_else(|| Error::param("snr", "no samples"))?;
    let shape = first.shape();
    let mut signal = vec![0.0; bands.len()];
    let mut noise = vec![0.0; bands.len()];
    for (z0, eps) in pairs {
        z0.ensure_shape(shape)?;
        eps.ensure_shape(shape)?;
        for (acc, e) in signal.iter_mut().zip(band_energies(z0, bands)?) {
            *acc += e;
        }
        for (acc, e) in noise.iter_mut().zip(band_energies(eps, bands)?) {
            *acc += e;
        }
    }
    if let Some(j) = noise.iter().position(|&e| e <= 0.0) {
        let b = bands.bands()[j];
        return Err(Error::param("eps", format!("zero noise energy in band [{}, {})", b.lo, b.hi)));
    }
    let weights = ts.iter().map(|&t| s.snr_weight(t)).collect::<Result<Vec<_>>>()?;
    let snr_db = signal
        .iter()
        .zip(&noise)
        .map(|(sig, n)| weights.iter().map(|w| 10.0 * (w * sig / n).log10()).collect())
        .collect();
    Ok(SpectrumReport {
        schedule: s.spec(),
        shape: shape.dims(),
        dataset_id: dataset_id.to_string(),
        samples: pairs.len(),
        bands: bands.bands().to_vec(),
        ts: ts.to_vec(),
        signal_energy: signal,
        noise_energy: noise,
        snr_db,
    })
}
