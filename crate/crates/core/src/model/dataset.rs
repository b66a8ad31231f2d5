//! Smooth moving blobs on a periodic background, rendered on a torus.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorio::{derive_seed, RngState, Shape, VideoTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionClass {
    Static,
    DriftLeft,
    DriftRight,
    Orbit,
}

impl MotionClass {
    pub const ALL: [MotionClass; 4] = [
        MotionClass::Static,
        MotionClass::DriftLeft,
        MotionClass::DriftRight,
        MotionClass::Orbit,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MotionClass::Static => "static",
            MotionClass::DriftLeft => "drift_left",
            MotionClass::DriftRight => "drift_right",
            MotionClass::Orbit => "orbit",
        }
    }
}

impl fmt::Display for MotionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MotionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MotionClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::param("motion class", format!("unknown class {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticVideoConfig {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub n_videos: usize,
    /// Video `i` gets class `classes[i % classes.len()]`.
    pub classes: Vec<MotionClass>,
    pub blobs_min: usize,
    pub blobs_max: usize,
    /// Gaussian blob radius range in pixels.
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Speed range in pixels per frame.
    pub velocity_min: f64,
    pub velocity_max: f64,
    pub background_amplitude: f64,
    /// Standard deviation of the per-frame positional jitter in pixels.
    pub jitter: f64,
    /// Not part of the serialized form; experiments derive it from their
    /// root seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SyntheticVideoConfig {
    fn default() -> Self {
        SyntheticVideoConfig {
            frames: 8,
            height: 32,
            width: 32,
            n_videos: 2000,
            classes: MotionClass::ALL.to_vec(),
            blobs_min: 1,
            blobs_max: 3,
            sigma_min: 2.5,
            sigma_max: 5.0,
            velocity_min: 0.5,
            velocity_max: 1.5,
            background_amplitude: 0.3,
            jitter: 0.15,
            seed: 0,
        }
    }
}

impl SyntheticVideoConfig {
    pub fn shape(&self) -> Result<Shape> {
        Shape::new(self.frames, 1, self.height, self.width)
    }

    pub fn validate(&self) -> Result<()> {
        self.shape()?;
        if self.n_videos == 0 {
            return Err(Error::param("n_videos", "must be positive"));
        }
        if self.classes.is_empty() {
            return Err(Error::param("classes", "need at least one motion class"));
        }
        if self.blobs_min == 0 || self.blobs_min > self.blobs_max {
            return Err(Error::param("blobs", "need 1 <= blobs_min <= blobs_max"));
        }
        let ranges = [
            ("sigma", self.sigma_min, self.sigma_max, true),
            ("velocity", self.velocity_min, self.velocity_max, false),
        ];
        for (name, lo, hi, strict) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && (lo > 0.0 || !strict && lo >= 0.0)) {
                return Err(Error::param(name, format!("invalid range [{lo}, {hi}]")));
            }
        }
        if !(self.background_amplitude.is_finite() && self.background_amplitude >= 0.0) {
            return Err(Error::param("background_amplitude", "must be finite and non-negative"));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(Error::param("jitter", "must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub videos: Vec<VideoTensor>,
    /// Index into the generating config's `classes`.
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
struct Blob {
    x: f64,
    y: f64,
    sigma: f64,
    amplitude: f64,
}

/// Signed offset `a - b` wrapped into `[-n/2, n/2)`.
fn wrap(a: f64, b: f64, n: f64) -> f64 {
    (a - b + n / 2.0).rem_euclid(n) - n / 2.0
}

struct Scene {
    blobs: Vec<Blob>,
    kx: f64,
    ky: f64,
    phase: f64,
    amplitude: f64,
    base: f64,
}

impl Scene {
    fn value(&self, x: f64, y: f64, w: f64, h: f64, blob_offsets: &[(f64, f64)]) -> f64 {
        let mut v = self.base
            + self.amplitude * (2.0 * PI * (self.kx * x / w + self.ky * y / h) + self.phase).cos();
        for (b, (ox, oy)) in self.blobs.iter().zip(blob_offsets) {
            let dx = wrap(x, b.x + ox, w);
            let dy = wrap(y, b.y + oy, h);
            v += b.amplitude * (-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma)).exp();
        }
        v.clamp(-1.0, 1.0)
    }
}

fn uniform(rng: &mut RngState, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_uniform()
}

fn render(cfg: &SyntheticVideoConfig, class: MotionClass, rng: &mut RngState) -> Result<VideoTensor> {
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let n_blobs = cfg.blobs_min + rng.next_below(cfg.blobs_max - cfg.blobs_min + 1);
    let blobs: Vec<Blob> = (0..n_blobs)
        .map(|_| Blob {
            x: uniform(rng, 0.0, w),
            y: uniform(rng, 0.0, h),
            sigma: uniform(rng, cfg.sigma_min, cfg.sigma_max),
            amplitude: uniform(rng, 0.8, 1.4),
        })
        .collect();
    let scene = Scene {
        blobs,
        kx: rng.next_below(2) as f64,
        ky: rng.next_below(2) as f64,
        phase: uniform(rng, 0.0, 2.0 * PI),
        amplitude: cfg.background_amplitude,
        base: -0.6,
    };
    let speed = uniform(rng, cfg.velocity_min, cfg.velocity_max);
    let spin = if rng.next_below(2) == 0 { 1.0 } else { -1.0 };
    let mut data = Vec::with_capacity(cfg.frames * cfg.height * cfg.width);
    for k in 0..cfg.frames {
        let (jx, jy) = if cfg.jitter > 0.0 {
            (cfg.jitter * rng.next_normal(), cfg.jitter * rng.next_normal())
        } else {
            (0.0, 0.0)
        };
        // whole-scene shift for drift, per-blob offsets for orbit
        let mut shift = (jx, jy);
        let mut offsets = vec![(0.0, 0.0); scene.blobs.len()];
        match class {
            MotionClass::Static => {}
            MotionClass::DriftLeft => shift.0 -= k as f64 * speed,
            MotionClass::DriftRight => shift.0 += k as f64 * speed,
            MotionClass::Orbit => {
                for (o, b) in offsets.iter_mut().zip(&scene.blobs) {
                    let rx = wrap(b.x, w / 2.0, w);
                    let ry = wrap(b.y, h / 2.0, h);
                    let r = rx.hypot(ry).max(2.0);
                    let angle = spin * k as f64 * speed / r;
                    let (s, c) = angle.sin_cos();
                    *o = (rx * c - ry * s - rx, rx * s + ry * c - ry);
                }
            }
        }
        for y in 0..cfg.height {
            for x in 0..cfg.width {
                let sx = (x as f64 - shift.0).rem_euclid(w);
                let sy = (y as f64 - shift.1).rem_euclid(h);
                data.push(scene.value(sx, sy, w, h, &offsets) as f32);
            }
        }
    }
    VideoTensor::new(cfg.shape()?, data)
}

/// Generates the dataset. Each video draws from its own substream of the
/// config seed, so the set is deterministic and prefix-stable in `n_videos`.
pub fn gen_dataset(cfg: &SyntheticVideoConfig) -> Result<Dataset> {
    cfg.validate()?;
    let root = derive_seed(cfg.seed, "dataset");
    let mut videos = Vec::with_capacity(cfg.n_videos);
    let mut labels = Vec::with_capacity(cfg.n_videos);
    for i in 0..cfg.n_videos {
        let label = i % cfg.classes.len();
        let mut rng = RngState::substream(root, &format!("video:{i}"));
        videos.push(render(cfg, cfg.classes[label], &mut rng)?);
        labels.push(label);
    }
    Ok(Dataset { videos, labels })
}
