//! Model checkpoints: a directory holding `manifest.json` and `weights.rdt`,
//! the latter a concatenation of `RDT1` records, one per named tensor.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RadarConfig;
use crate::error::{Error, Result};
use crate::format::{write_atomic, DType, TensorData, TensorFile};
use crate::nn::model::{FftRadNet, ModelSpec};
use crate::nn::tensor::Scalar;

pub const MANIFEST: &str = "manifest.json";
pub const WEIGHTS: &str = "weights.rdt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 4],
    pub dtype: DType,
    /// Byte offset of the record within the weights file.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub config: RadarConfig,
    pub spec: ModelSpec,
    pub tensors: Vec<TensorEntry>,
}

fn to_data<T: Scalar>(values: &[T]) -> TensorData {
    match T::DTYPE {
        DType::F64 => TensorData::F64(values.iter().map(|v| v.f64()).collect()),
        _ => TensorData::F32(values.iter().map(|v| v.f64() as f32).collect()),
    }
}

pub fn save_checkpoint<T: Scalar>(model: &mut FftRadNet<T>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut blob = Vec::new();
    let mut tensors = Vec::new();
    let mut failure = None;
    model.visit(&mut |name, t, _| {
        match TensorFile::new(t.shape().to_vec(), to_data(t.data())) {
            Ok(tf) => {
                tensors.push(TensorEntry { name: name.to_string(), shape: t.shape(), dtype: tf.dtype(), offset: blob.len() });
                blob.extend_from_slice(&tf.encode());
            }
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let manifest = Manifest { config: model.config.config().clone(), spec: model.spec.clone(), tensors };
    write_atomic(dir.join(WEIGHTS), &blob)?;
    write_atomic(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?.as_bytes())
}

pub fn load_checkpoint<T: Scalar>(dir: impl AsRef<Path>) -> Result<FftRadNet<T>> {
    let dir = dir.as_ref();
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST))?)?;
    let blob = std::fs::read(dir.join(WEIGHTS))?;
    let cfg = manifest.config.clone().validate()?;
    let mut model = FftRadNet::<T>::new(&manifest.spec, &cfg, 0)?;

    let mut stored = BTreeMap::new();
    for e in &manifest.tensors {
        let bytes = blob.get(e.offset..).ok_or_else(|| Error::Format(format!("{}: offset past end", e.name)))?;
        let (tf, _) = TensorFile::decode(bytes)?;
        tf.expect_dims(&e.shape, &e.name)?;
        let values: Vec<f64> = match tf.data {
            TensorData::F32(v) => v.into_iter().map(f64::from).collect(),
            TensorData::F64(v) => v,
            TensorData::Complex64(_) => return Err(Error::Format(format!("{}: complex weights", e.name))),
        };
        stored.insert(e.name.clone(), (e.shape, values));
    }

    let mut failure = None;
    let mut seen = 0;
    model.visit(&mut |name, t, _| match stored.get(name) {
        Some((shape, values)) if *shape == t.shape() => {
            seen += 1;
            for (dst, &v) in t.data_mut().iter_mut().zip(values) {
                *dst = T::of(v);
            }
        }
        Some((shape, _)) => {
            failure.get_or_insert(Error::ShapeMismatch(format!("{name}: stored {shape:?}, model {:?}", t.shape())));
        }
        None => {
            failure.get_or_insert(Error::Format(format!("checkpoint lacks `{name}`")));
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    if seen != stored.len() {
        return Err(Error::Format(format!("checkpoint has {} tensors, model uses {seen}", stored.len())));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::module::Mode;
    use crate::nn::train::{prepare_sample, SceneSampler};

    #[test]
    fn round_trip_preserves_outputs() {
        let cfg = crate::config::RadarConfig::toy().validate().unwrap();
        let mut model = FftRadNet::<f32>::new(&ModelSpec::toy(), &cfg, 5).unwrap();
        let x = prepare_sample(SceneSampler::default().sample(&cfg, 1), &cfg).unwrap().input;
        // one training pass moves the batch-norm running statistics
        model.forward(&x, Mode::Train).unwrap();
        let before = model.forward(&x, Mode::Eval).unwrap();

        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&mut model, dir.path()).unwrap();
        let mut loaded = load_checkpoint::<f32>(dir.path()).unwrap();
        let after = loaded.forward(&x, Mode::Eval).unwrap();
        assert_eq!(before.clas.data(), after.clas.data());
        assert_eq!(before.seg.data(), after.seg.data());

        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST)).unwrap()).unwrap();
        assert!(manifest.tensors.iter().any(|t| t.name.contains("running_mean")));
        assert_eq!(manifest.tensors[0].offset, 0);
    }

    #[test]
    fn missing_tensor_is_an_error() {
        let cfg = crate::config::RadarConfig::toy().validate().unwrap();
        let mut model = FftRadNet::<f32>::new(&ModelSpec::toy(), &cfg, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&mut model, dir.path()).unwrap();
        let path = dir.path().join(MANIFEST);
        let mut manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        manifest.tensors.pop();
        std::fs::write(&path, serde_json::to_string(&manifest).unwrap()).unwrap();
        assert!(load_checkpoint::<f32>(dir.path()).is_err());
    }
}
