use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::FreqGrid;

/// Largest normalized radial frequency, the corner of the spectral cube.
pub const D_MAX: f64 = 1.732_050_807_568_877_2;

/// A normalized-frequency interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

/// Contiguous bands covering `[0, sqrt(3)]`. The last band is closed at the
/// top so the corner bin belongs to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Band>", into = "Vec<Band>")]
pub struct BandSpec {
    bands: Vec<Band>,
}

impl BandSpec {
    pub fn new(bands: Vec<Band>) -> Result<Self> {
        let first = bands.first().ok_or_else(|| Error::param("bands", "need at least one band"))?;
        if first.lo != 0.0 {
            return Err(Error::param("bands", "first band must start at 0"));
        }
        for b in &bands {
            if !(b.lo.is_finite() && b.hi.is_finite() && b.lo < b.hi) {
                return Err(Error::param("bands", format!("invalid band [{}, {})", b.lo, b.hi)));
            }
        }
        for pair in bands.windows(2) {
            if pair[0].hi != pair[1].lo {
                return Err(Error::param("bands", "bands must be contiguous and non-overlapping"));
            }
        }
        if bands.last().unwrap().hi < D_MAX {
            return Err(Error::param("bands", "bands must cover up to sqrt(3)"));
        }
        Ok(BandSpec { bands })
    }

    /// Bands split at the given interior edges.
    pub fn from_edges(edges: &[f64]) -> Result<Self> {
        let mut cuts = vec![0.0];
        cuts.extend_from_slice(edges);
        cuts.push(D_MAX);
        Self::new(cuts.windows(2).map(|w| Band { lo: w[0], hi: w[1] }).collect())
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// Band index of a bin at normalized distance `d`.
    pub fn band_of(&self, d: f64) -> Option<usize> {
        let last = self.bands.len() - 1;
        self.bands
            .iter()
            .position(|b| d >= b.lo && d < b.hi)
            .or_else(|| (d <= self.bands[last].hi + 1e-12 && d >= self.bands[last].lo).then_some(last))
    }

    /// Band index of every grid bin; fails if a band is empty on this grid.
    pub fn assign(&self, grid: &FreqGrid) -> Result<Vec<usize>> {
        let mut counts = vec![0usize; self.bands.len()];
        let idx: Vec<usize> = (0..grid.len())
            .map(|i| {
                let b = self.band_of(grid.d(i)).expect("bands cover [0, sqrt(3)]");
                counts[b] += 1;
                b
            })
            .collect();
        if let Some(j) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyBand {
                lo: self.bands[j].lo,
                hi: self.bands[j].hi,
            });
        }
        Ok(idx)
    }
}

impl Default for BandSpec {
    fn default() -> Self {
        Self::from_edges(&[0.25, 0.5, 1.0]).expect("valid default edges")
    }
}

impl TryFrom<Vec<Band>> for BandSpec {
    type Error = Error;

    fn try_from(bands: Vec<Band>) -> Result<Self> {
        Self::new(bands)
    }
}

impl From<BandSpec> for Vec<Band> {
    fn from(b: BandSpec) -> Self {
        b.bands
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_has_four_bands() {
        let b = BandSpec::default();
        assert_eq!(b.len(), 4);
        assert_eq!(b.bands()[3], Band { lo: 1.0, hi: D_MAX });
        assert_eq!(b.band_of(0.0), Some(0));
        assert_eq!(b.band_of(0.25), Some(1));
        assert_eq!(b.band_of(3f64.sqrt()), Some(3));
    }

    #[test]
    fn assigns_every_bin() {
        let grid = FreqGrid::new(8, 32, 32);
        let idx = BandSpec::default().assign(&grid).unwrap();
        for b in 0..4 {
            assert!(idx.contains(&b));
        }
    }

    #[test]
    fn empty_band_is_an_error() {
        let grid = FreqGrid::new(2, 2, 2);
        // bins sit at d in {0, 1, sqrt 2, sqrt 3}
        let spec = BandSpec::from_edges(&[0.1, 0.2]).unwrap();
        assert!(matches!(spec.assign(&grid), Err(Error::EmptyBand { .. })));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(BandSpec::new(vec![]).is_err());
        assert!(BandSpec::from_edges(&[0.5, 0.25]).is_err());
        assert!(BandSpec::new(vec![Band { lo: 0.1, hi: 2.0 }]).is_err());
        assert!(BandSpec::new(vec![Band { lo: 0.0, hi: 1.0 }]).is_err());
        assert!(BandSpec::new(vec![Band { lo: 0.0, hi: 0.5 }, Band { lo: 0.6, hi: 2.0 }]).is_err());
    }

    #[test]
    fn serde_round_trip_validates() {
        let b = BandSpec::default();
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(serde_json::from_str::<BandSpec>(&json).unwrap(), b);
        assert!(serde_json::from_str::<BandSpec>(r#"[{"lo":0.2,"hi":2.0}]"#).is_err());
    }
}
