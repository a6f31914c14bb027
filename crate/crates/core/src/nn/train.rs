//! Synthetic datasets and the training loop.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ValidatedConfig;
use crate::dsp::{range_doppler_transform, WindowKind};
use crate::error::{Error, Result};
use crate::mimo::rd_to_channels;
use crate::nn::gt::{encode_ground_truth, GroundTruth};
use crate::nn::loss::{mtl_loss_logits, LossValues, Targets, TrainConfig};
use crate::nn::model::{FftRadNet, ModelSpec};
use crate::nn::module::Mode;
use crate::nn::optim::Adam;
use crate::nn::tensor::{Scalar, Tensor};
use crate::sim::{synthesize_adc, PointTarget, Scene};

/// Distribution of random single/two-target scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSampler {
    pub noise_sigma: f64,
    pub amplitude: (f64, f64),
    /// Targets are kept this far from the range limits, m.
    pub range_margin: f64,
    /// Fraction of the half field of view used for azimuths.
    pub azimuth_fraction: f64,
    /// Fraction of `d_max / 2` used for velocities.
    pub velocity_fraction: f64,
    pub two_target_prob: f64,
    /// Minimum Cartesian distance between two targets, m.
    pub min_separation: f64,
}

impl Default for SceneSampler {
    fn default() -> Self {
        Self {
            noise_sigma: 1.0,
            amplitude: (0.5, 2.0),
            range_margin: 1.0,
            azimuth_fraction: 0.95,
            velocity_fraction: 0.9,
            two_target_prob: 0.5,
            min_separation: 4.5,
        }
    }
}

impl SceneSampler {
    fn target(&self, cfg: &ValidatedConfig, rng: &mut impl Rng) -> PointTarget {
        let half_fov = self.azimuth_fraction * cfg.azimuth_fov / 2.0;
        let v_max = self.velocity_fraction * cfg.d_max / 2.0;
        PointTarget {
            range: rng.random_range(self.range_margin..cfg.max_range - self.range_margin),
            velocity: rng.random_range(-v_max..v_max),
            azimuth: rng.random_range(-half_fov..=half_fov),
            elevation: 0.0,
            amplitude: rng.random_range(self.amplitude.0..=self.amplitude.1),
        }
    }

    pub fn sample(&self, cfg: &ValidatedConfig, seed: u64) -> Scene {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let first = self.target(cfg, &mut rng);
        let mut targets = vec![first];
        if rng.random_bool(self.two_target_prob) {
            let (x0, y0) = first.cartesian();
            // Rejection sampling; gives up quietly if the space is too small.
            for _ in 0..1000 {
                let t = self.target(cfg, &mut rng);
                let (x, y) = t.cartesian();
                if (x - x0).hypot(y - y0) >= self.min_separation {
                    targets.push(t);
                    break;
                }
            }
        }
        Scene { noise_sigma: self.noise_sigma, seed: rng.random(), targets }
    }

    /// `n` scenes; scene `i` depends only on `(seed, i)`.
    pub fn scenes(&self, cfg: &ValidatedConfig, n: usize, seed: u64) -> Vec<Scene> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample(cfg, rng.random())).collect()
    }
}

/// Network input, targets, and the scene they came from.
#[derive(Debug, Clone)]
pub struct Sample {
    pub input: Tensor<f32>,
    pub truth: GroundTruth,
    pub scene: Scene,
}

pub fn prepare_sample(scene: Scene, cfg: &ValidatedConfig) -> Result<Sample> {
    let rd = range_doppler_transform(&synthesize_adc(&scene, cfg)?, WindowKind::Hann)?;
    Ok(Sample { input: rd_to_channels(&rd), truth: encode_ground_truth(&scene, cfg)?, scene })
}

pub fn prepare_samples(scenes: Vec<Scene>, cfg: &ValidatedConfig) -> Result<Vec<Sample>> {
    scenes.into_iter().map(|s| prepare_sample(s, cfg)).collect()
}

/// Concatenates batch-1 tensors along the batch axis.
pub fn stack<T: Scalar>(items: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let Some(first) = items.first() else {
        return Err(Error::ShapeMismatch("empty batch".into()));
    };
    let [_, c, h, w] = first.shape();
    let mut data = Vec::with_capacity(items.len() * c * h * w);
    for t in items {
        t.ensure_shape([1, c, h, w], "batch item")?;
        data.extend_from_slice(t.data());
    }
    Tensor::from_vec([items.len(), c, h, w], data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    pub step: usize,
    pub l_det: f64,
    pub l_free: f64,
    pub l_mtl: f64,
    pub lr: f64,
}

pub fn write_log_csv(rows: &[LogRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub struct Trainer<T: Scalar> {
    pub model: FftRadNet<T>,
    pub config: TrainConfig,
    pub optimizer: Adam,
    pub log: Vec<LogRow>,
    step: usize,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: FftRadNet<T>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let optimizer = Adam::new(config.learning_rate);
        Ok(Self { model, config, optimizer, log: Vec::new(), step: 0 })
    }

    /// Forward, backward and one Adam update on a batch; returns the losses
    /// before the update.
    pub fn step(&mut self, batch: &[&Sample], epoch: usize) -> Result<LossValues> {
        let inputs: Vec<Tensor<T>> = batch.iter().map(|s| s.input.cast()).collect();
        let x = stack(&inputs.iter().collect::<Vec<_>>())?;
        let y = Targets::stack(&batch.iter().map(|s| &s.truth).collect::<Vec<_>>())?;

        self.model.zero_grad();
        let out = self.model.forward(&x, Mode::Train)?;
        let (loss, grads) = mtl_loss_logits(&out, &y, &self.config)?;
        self.model.backward(&grads)?;
        self.optimizer.lr = self.config.learning_rate_at(epoch);
        let model = &mut self.model;
        self.optimizer.step(|f| model.visit(f));

        self.step += 1;
        self.log.push(LogRow {
            epoch,
            step: self.step,
            l_det: loss.l_det,
            l_free: loss.l_free,
            l_mtl: loss.l_mtl,
            lr: self.optimizer.lr,
        });
        Ok(loss)
    }

    /// One pass over `data` in an order fixed by `(config.seed, epoch)`;
    /// returns the mean per-batch losses.
    pub fn epoch(&mut self, data: &[Sample], epoch: usize) -> Result<LossValues> {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.config.seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)));
        let mut total = LossValues::default();
        let mut batches = 0;
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &data[i]).collect();
            let l = self.step(&batch, epoch)?;
            total.l_det += l.l_det;
            total.l_free += l.l_free;
            total.l_mtl += l.l_mtl;
            batches += 1;
        }
        let n = batches.max(1) as f64;
        Ok(LossValues { l_det: total.l_det / n, l_free: total.l_free / n, l_mtl: total.l_mtl / n })
    }

    pub fn write_log(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        write_log_csv(&self.log, &mut buf)?;
        crate::format::write_atomic(path.as_ref(), &buf)
    }
}

/// Runs the model in evaluation mode over `data` in batches.
pub fn predict<T: Scalar>(model: &mut FftRadNet<T>, data: &[Sample], batch_size: usize) -> Result<Vec<crate::nn::model::HeadOutputs<f64>>> {
    let mut out = Vec::with_capacity(data.len());
    for chunk in data.chunks(batch_size.max(1)) {
        let inputs: Vec<Tensor<T>> = chunk.iter().map(|s| s.input.cast()).collect();
        let x = stack(&inputs.iter().collect::<Vec<_>>())?;
        let y = model.forward(&x, Mode::Eval)?;
        for b in 0..chunk.len() {
            let pick = |t: &Tensor<T>| {
                let [_, c, h, w] = t.shape();
                Tensor::from_vec([1, c, h, w], t.item(b).iter().map(|v| v.f64()).collect()).expect("shape matches")
            };
            out.push(crate::nn::model::HeadOutputs { clas: pick(&y.clas), reg: pick(&y.reg), seg: pick(&y.seg) });
        }
    }
    Ok(out)
}

/// Builds a fresh single-precision model (seeded by `tc.seed`) and trains it
/// for `tc.epochs`; `on_epoch` sees the mean losses of every epoch.
pub fn train_model(
    spec: &ModelSpec,
    cfg: &ValidatedConfig,
    tc: TrainConfig,
    data: &[Sample],
    mut on_epoch: impl FnMut(usize, &LossValues),
) -> Result<Trainer<f32>> {
    let model = FftRadNet::<f32>::new(spec, cfg, tc.seed)?;
    let mut trainer = Trainer::new(model, tc)?;
    for epoch in 0..trainer.config.epochs {
        let l = trainer.epoch(data, epoch)?;
        on_epoch(epoch, &l);
    }
    Ok(trainer)
}
