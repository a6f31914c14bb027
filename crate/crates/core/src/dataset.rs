//! On-disk synthetic datasets: `config.json` plus, per frame,
//! `frame_NNNNN.adc.rdt` (raw samples) and `frame_NNNNN.scene.json` (truth).

use std::path::{Path, PathBuf};

use crate::config::{RadarConfig, ValidatedConfig};
use crate::dsp::{range_doppler_transform, WindowKind};
use crate::error::{Error, Result};
use crate::format::{write_atomic, TensorFile};
use crate::mimo::rd_to_channels;
use crate::nn::gt::encode_ground_truth;
use crate::nn::train::Sample;
use crate::sim::{synthesize_adc, AdcFrame, Scene};

pub const CONFIG_FILE: &str = "config.json";

fn frame_paths(dir: &Path, i: usize) -> (PathBuf, PathBuf) {
    (dir.join(format!("frame_{i:05}.adc.rdt")), dir.join(format!("frame_{i:05}.scene.json")))
}

/// Simulates and writes every scene.
pub fn write_dataset(dir: impl AsRef<Path>, cfg: &ValidatedConfig, scenes: &[Scene]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_atomic(dir.join(CONFIG_FILE), cfg.to_json_string().as_bytes())?;
    for (i, scene) in scenes.iter().enumerate() {
        let (adc, truth) = frame_paths(dir, i);
        synthesize_adc(scene, cfg)?.to_tensor_file().write(adc)?;
        write_atomic(truth, serde_json::to_string_pretty(scene)?.as_bytes())?;
    }
    Ok(())
}

/// Reads a dataset and turns each frame into a network sample (Hann window).
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(ValidatedConfig, Vec<Sample>)> {
    let dir = dir.as_ref();
    let cfg = RadarConfig::from_json_file(dir.join(CONFIG_FILE))?.validate()?;
    let mut samples = Vec::new();
    for i in 0.. {
        let (adc, truth) = frame_paths(dir, i);
        if !adc.exists() {
            break;
        }
        let scene = Scene::from_json_file(&truth)?;
        let frame = AdcFrame::from_tensor_file(&TensorFile::read(&adc)?, &cfg)?;
        let rd = range_doppler_transform(&frame, WindowKind::Hann)?;
        samples.push(Sample { input: rd_to_channels(&rd), truth: encode_ground_truth(&scene, &cfg)?, scene });
    }
    if samples.is_empty() {
        return Err(Error::InvalidConfig(format!("no frames in {}", dir.display())));
    }
    Ok((cfg, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::train::{prepare_sample, SceneSampler};

    #[test]
    fn round_trip_matches_in_memory_samples() {
        let cfg = RadarConfig::toy().validate().unwrap();
        let scenes = SceneSampler::default().scenes(&cfg, 3, 9);
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &cfg, &scenes).unwrap();
        let (loaded_cfg, samples) = load_dataset(dir.path()).unwrap();
        assert_eq!(loaded_cfg, cfg);
        assert_eq!(samples.len(), 3);
        for (s, scene) in samples.iter().zip(scenes) {
            let direct = prepare_sample(scene, &cfg).unwrap();
            assert_eq!(s.scene, direct.scene);
            assert_eq!(s.truth, direct.truth);
            // the file stores samples as f32 pairs
            let err = s.input.data().iter().zip(direct.input.data()).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
            assert!(err < 1e-3, "{err}");
        }
    }

    #[test]
    fn empty_directory_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path().join(CONFIG_FILE), RadarConfig::toy().to_json_string().as_bytes()).unwrap();
        assert!(load_dataset(dir.path()).is_err());
    }
}
