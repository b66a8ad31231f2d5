//! `model.fin` (flat parameters) plus `model.json` (manifest).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::{NetConfig, Network, ParamEntry};
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::schedule::ScheduleSpec;
use crate::tensorio::{load_raw, save_raw, RawTensor};

pub const WEIGHTS_FILE: &str = "model.fin";
pub const MANIFEST_FILE: &str = "model.json";
pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelManifest {
    pub schema: u32,
    pub net: NetConfig,
    pub layers: Vec<ParamEntry>,
    pub seed: u64,
    pub schedule: ScheduleSpec,
    pub training: Option<TrainConfig>,
}

pub fn save_model(
    net: &Network<f32>,
    schedule: ScheduleSpec,
    seed: u64,
    training: Option<&TrainConfig>,
    dir: impl AsRef<Path>,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let raw = RawTensor::new(vec![net.num_params()], net.params().to_vec())?;
    save_raw(&raw, dir.join(WEIGHTS_FILE))?;
    let manifest = ModelManifest {
        schema: MANIFEST_SCHEMA,
        net: *net.config(),
        layers: net.entries().to_vec(),
        seed,
        schedule,
        training: training.cloned(),
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// Loads a model directory. Missing files are reported as
/// [`Error::MissingArtifact`].
pub fn load_model(dir: impl AsRef<Path>) -> Result<(Network<f32>, ModelManifest)> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let weights_path = dir.join(WEIGHTS_FILE);
    for p in [&manifest_path, &weights_path] {
        if !p.is_file() {
            return Err(Error::MissingArtifact(p.clone()));
        }
    }
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: ModelManifest = serde_json::from_str(&text)?;
    if manifest.schema != MANIFEST_SCHEMA {
        return Err(Error::format("schema", format!("unsupported manifest schema {}", manifest.schema)));
    }
    let raw = load_raw(&weights_path)?;
    if raw.dims.len() != 1 {
        return Err(Error::format("dims", "weights must be a flat vector"));
    }
    let net = Network::from_params(manifest.net, raw.data)?;
    if net.entries() != manifest.layers.as_slice() {
        return Err(Error::format("layers", "manifest layer table does not match the network config"));
    }
    Ok((net, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::ScheduleSpec;
    use crate::tensorio::RngState;

    fn cfg() -> NetConfig {
        NetConfig {
            frames: 2,
            channels: 1,
            height: 4,
            width: 4,
            hidden: 3,
            res_blocks: 1,
            time_features: 4,
            classes: 2,
            timesteps: 1000,
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut net = Network::<f32>::new(cfg(), 5).unwrap();
        let mut rng = RngState::new(0);
        for v in net.params_mut() {
            *v = rng.next_normal() as f32;
        }
        let train = TrainConfig::default();
        save_model(&net, ScheduleSpec::SD, 5, Some(&train), dir.path()).unwrap();
        let (back, manifest) = load_model(dir.path()).unwrap();
        assert_eq!(back, net);
        assert_eq!(manifest.seed, 5);
        assert_eq!(manifest.training, Some(train));
        assert_eq!(manifest.layers[0].name, "conv_in.weight");
    }

    #[test]
    fn missing_files_are_missing_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::MissingArtifact(_))));
        let net = Network::<f32>::new(cfg(), 0).unwrap();
        save_model(&net, ScheduleSpec::SD, 0, None, dir.path()).unwrap();
        fs::remove_file(dir.path().join(WEIGHTS_FILE)).unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::MissingArtifact(_))));
    }

    #[test]
    fn rejects_length_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let net = Network::<f32>::new(cfg(), 0).unwrap();
        save_model(&net, ScheduleSpec::SD, 0, None, dir.path()).unwrap();
        save_raw(&RawTensor::new(vec![3], vec![0.0; 3]).unwrap(), dir.path().join(WEIGHTS_FILE)).unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::LengthMismatch { .. })));
    }
}
