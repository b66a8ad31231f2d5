use crate::error::{Error, Result};
use crate::tensorio::VideoTensor;

/// Frame-to-first-frame similarity with zero-variance frames flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct Consistency {
    pub score: f64,
    /// Frames (0-based) with no variation; their similarity counts as 0.
    pub flat_frames: Vec<usize>,
}

fn centered(frame: &[f32]) -> Vec<f64> {
    let mean = frame.iter().map(|&v| f64::from(v)).sum::<f64>() / frame.len() as f64;
    frame.iter().map(|&v| f64::from(v) - mean).collect()
}

pub fn temporal_consistency_detailed(v: &VideoTensor) -> Result<Consistency> {
    let frames = v.shape().frames;
    if frames < 2 {
        return Err(Error::param("frames", "temporal consistency needs at least 2 frames"));
    }
    let first = centered(v.frame(0));
    let first_norm = first.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut flat_frames = Vec::new();
    if first_norm == 0.0 {
        flat_frames.push(0);
    }
    let mut total = 0.0;
    for k in 1..frames {
        let other = centered(v.frame(k));
        let norm = other.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            flat_frames.push(k);
        }
        if norm == 0.0 || first_norm == 0.0 {
            continue;
        }
        let dot: f64 = first.iter().zip(&other).map(|(a, b)| a * b).sum();
        total += (dot / (first_norm * norm)).clamp(-1.0, 1.0);
    }
    Ok(Consistency {
        score: total / (frames - 1) as f64,
        flat_frames,
    })
}

/// Mean cosine similarity between the mean-subtracted first frame and each
/// later frame.
pub fn temporal_consistency(v: &VideoTensor) -> Result<f64> {
    Ok(temporal_consistency_detailed(v)?.score)
}
