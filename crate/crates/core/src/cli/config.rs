use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{AblationGrid, BandSpec};
use crate::error::{Error, Result};
use crate::model::{NetConfig, SyntheticVideoConfig, TrainConfig};
use crate::sampler::FreeInitConfig;
use crate::schedule::ScheduleSpec;

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: usize,
    pub res_blocks: usize,
    pub time_features: usize,
    pub train: TrainConfig,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            hidden: 32,
            res_blocks: 2,
            time_features: 32,
            train: TrainConfig {
                epochs: 2,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    /// Class to condition on; `null` samples unconditionally.
    pub class: Option<usize>,
    /// Also write every output clip as PGM frames.
    pub pgm_frames: bool,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection {
            class: Some(0),
            pgm_frames: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub bands: BandSpec,
    pub snr_timesteps: Vec<usize>,
    /// Number of dataset clips pooled by `snr`.
    pub snr_videos: usize,
    pub mix_ratios: Vec<f64>,
    /// Dataset clip used as the real sample by `mix`.
    pub mix_video: usize,
    pub ablation: AblationGrid,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            bands: BandSpec::default(),
            snr_timesteps: vec![1, 50, 100, 200, 300, 400, 500, 600, 700, 800, 900, 1000],
            snr_videos: 64,
            mix_ratios: vec![0.0, 0.2, 0.5, 0.8, 1.0],
            mix_video: 0,
            ablation: AblationGrid::default(),
        }
    }
}

/// Everything an experiment needs besides the code. Every field has a
/// default, so `{}` is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: SyntheticVideoConfig,
    pub schedule: ScheduleSpec,
    pub model: ModelSection,
    pub freeinit: FreeInitConfig,
    pub sampler: SamplerSection,
    pub analysis: AnalysisSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema: CONFIG_SCHEMA,
            seed: 0,
            output_dir: PathBuf::from("freeinit-out"),
            dataset: SyntheticVideoConfig::default(),
            schedule: ScheduleSpec::SD,
            model: ModelSection::default(),
            freeinit: FreeInitConfig::default(),
            sampler: SamplerSection::default(),
            analysis: AnalysisSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema != CONFIG_SCHEMA {
            return Err(Error::Config(format!(
                "unsupported schema {} (expected {CONFIG_SCHEMA})",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    /// Dataset config with the experiment's root seed.
    pub fn dataset_config(&self) -> SyntheticVideoConfig {
        SyntheticVideoConfig {
            seed: self.seed,
            ..self.dataset.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.model.train.clone()
        }
    }

    pub fn freeinit_config(&self) -> FreeInitConfig {
        FreeInitConfig {
            seed: self.seed,
            ..self.freeinit
        }
    }

    pub fn net_config(&self) -> NetConfig {
        NetConfig {
            frames: self.dataset.frames,
            channels: 1,
            height: self.dataset.height,
            width: self.dataset.width,
            hidden: self.model.hidden,
            res_blocks: self.model.res_blocks,
            time_features: self.model.time_features,
            classes: self.dataset.classes.len(),
            timesteps: self.schedule.steps,
        }
    }

    pub fn model_dir(&self) -> PathBuf {
        self.output_dir.join("model")
    }

    /// Checks every section without running anything.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.dataset_config().validate().map_err(wrap)?;
        crate::schedule::NoiseSchedule::from_spec(self.schedule).map_err(wrap)?;
        self.net_config().validate().map_err(wrap)?;
        self.train_config().validate().map_err(wrap)?;
        self.freeinit.validate().map_err(wrap)?;
        self.analysis.ablation.validate().map_err(wrap)?;
        if let Some(c) = self.sampler.class {
            if c >= self.dataset.classes.len() {
                return Err(Error::Config(format!(
                    "sampler.class {c} out of range for {} classes",
                    self.dataset.classes.len()
                )));
            }
        }
        if self.analysis.mix_video >= self.dataset.n_videos {
            return Err(Error::Config("analysis.mix_video is past the end of the dataset".into()));
        }
        if self.analysis.snr_videos == 0 || self.analysis.snr_timesteps.is_empty() {
            return Err(Error::Config("snr needs at least one video and one timestep".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn round_trips() {
        let mut cfg = ExperimentConfig {
            seed: 9,
            ..Default::default()
        };
        cfg.freeinit.iterations = 2;
        cfg.analysis.mix_ratios = vec![0.0, 1.0];
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn defaults_follow_the_reference_settings() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.freeinit.guidance_weight, 7.5);
        assert_eq!(cfg.freeinit.filter, crate::spectral::FilterSpec::gaussian(0.25));
        assert_eq!(cfg.freeinit.iterations, 4);
        assert_eq!(cfg.freeinit.ddim_steps, 25);
        assert_eq!(cfg.schedule, ScheduleSpec::SD);
        assert_eq!(cfg.net_config().shape().dims(), [8, 1, 32, 32]);
    }

    #[test]
    fn unknown_keys_and_bad_schema_are_rejected() {
        assert!(matches!(ExperimentConfig::from_json(r#"{"sed": 1}"#), Err(Error::Config(_))));
        assert!(ExperimentConfig::from_json(r#"{"freeinit": {"iters": 1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"dataset": {"seed": 1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"schema": 2}"#).is_err());
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = ExperimentConfig::load("/nonexistent/exp.json").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/exp.json"));
    }
}
