//! Synthetic raw ADC frames for scenes of point reflectors.
//!
//! Signal model, per target, receiver `r`, chirp `c` and fast-time sample `s`:
//!
//! ```text
//! a * sum_t exp(j2pi (R s / b_r + (D + t*delta) c / b_d)) * steer(v(t, r), az, el)
//! ```
//!
//! with `R = range / range_res`, `D = velocity / doppler_res` (both real
//! valued), transmitters `t = 1..=n_tx` and virtual antenna index
//! `v = (t - 1) * n_rx + (r - 1)`. The array is a half-wavelength uniform
//! linear array in azimuth; odd transmitters sit half a wavelength higher,
//! which is the only source of elevation diversity.
//!
//! Noise is circular complex Gaussian drawn from `ChaCha8Rng` seeded with the
//! scene seed, so frames are reproducible bit for bit.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::{Complex32, Complex64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::ValidatedConfig;
use crate::error::{Error, Result};
use crate::format::{TensorData, TensorFile};

/// A point reflector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointTarget {
    /// Meters.
    pub range: f64,
    /// Radial velocity, m/s.
    pub velocity: f64,
    /// Degrees, positive to the left.
    pub azimuth: f64,
    /// Degrees.
    pub elevation: f64,
    /// Linear reflectivity.
    pub amplitude: f64,
}

impl PointTarget {
    pub fn new(range: f64, velocity: f64, azimuth: f64) -> Self {
        Self { range, velocity, azimuth, elevation: 0.0, amplitude: 1.0 }
    }

    /// Forward (x) and lateral (y) position in meters.
    pub fn cartesian(&self) -> (f64, f64) {
        let az = self.azimuth.to_radians();
        (self.range * az.cos(), self.range * az.sin())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub noise_sigma: f64,
    pub seed: u64,
    pub targets: Vec<PointTarget>,
}

impl Scene {
    pub fn noiseless(targets: Vec<PointTarget>) -> Self {
        Self { noise_sigma: 0.0, seed: 0, targets }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self, cfg: &ValidatedConfig) -> Result<()> {
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidScene("noise_sigma must be finite and >= 0".into()));
        }
        for (i, t) in self.targets.iter().enumerate() {
            let bad = |what: &str| Err(Error::InvalidScene(format!("target {i}: {what}")));
            let fields = [t.range, t.velocity, t.azimuth, t.elevation, t.amplitude];
            if fields.iter().any(|v| !v.is_finite()) {
                return bad("non-finite field");
            }
            if !(0.0..cfg.max_range).contains(&t.range) {
                return bad("range outside [0, max_range)");
            }
            if t.velocity.abs() >= cfg.d_max / 2.0 {
                return bad("|velocity| >= d_max / 2");
            }
            if t.azimuth.abs() > cfg.azimuth_fov / 2.0 {
                return bad("azimuth outside field of view");
            }
            if t.elevation.abs() > cfg.elevation_fov / 2.0 {
                return bad("elevation outside field of view");
            }
            if t.amplitude < 0.0 {
                return bad("negative amplitude");
            }
        }
        Ok(())
    }
}

/// Raw complex samples, laid out `(n_rx, b_d chirps, b_r samples)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AdcFrame {
    pub samples: Vec<Complex64>,
    pub config: ValidatedConfig,
}

impl AdcFrame {
    pub fn zeros(config: &ValidatedConfig) -> Self {
        let n = config.n_rx * config.b_d * config.b_r;
        Self { samples: vec![Complex64::new(0.0, 0.0); n], config: config.clone() }
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.config.n_rx, self.config.b_d, self.config.b_r]
    }

    pub fn from_samples(samples: Vec<Complex64>, config: &ValidatedConfig) -> Result<Self> {
        let n = config.n_rx * config.b_d * config.b_r;
        if samples.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "adc frame has {} samples, config expects {n}",
                samples.len()
            )));
        }
        if samples.iter().any(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::Numerical("non-finite adc sample".into()));
        }
        Ok(Self { samples, config: config.clone() })
    }

    #[inline]
    pub fn index(&self, rx: usize, chirp: usize, sample: usize) -> usize {
        (rx * self.config.b_d + chirp) * self.config.b_r + sample
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Tensor-file form, dims `(n_rx, b_d, b_r)`, complex64.
    pub fn to_tensor_file(&self) -> TensorFile {
        let data = self.samples.iter().map(|s| Complex32::new(s.re as f32, s.im as f32)).collect();
        TensorFile::new(self.shape().to_vec(), TensorData::Complex64(data)).expect("shape matches")
    }

    pub fn from_tensor_file(tf: &TensorFile, config: &ValidatedConfig) -> Result<Self> {
        tf.expect_dims(&[config.n_rx, config.b_d, config.b_r], "adc frame")?;
        let TensorData::Complex64(v) = &tf.data else {
            return Err(Error::Format("adc frame must be complex64".into()));
        };
        Self::from_samples(v.iter().map(|s| Complex64::new(s.re as f64, s.im as f64)).collect(), config)
    }
}

/// Unit phasor of virtual antenna `(tx, rx)` (zero-based) for a plane wave
/// arriving from `(azimuth, elevation)` degrees.
pub fn steering(cfg: &ValidatedConfig, tx: usize, rx: usize, azimuth: f64, elevation: f64) -> Complex64 {
    let v = (tx * cfg.n_rx + rx) as f64;
    let z = (tx % 2) as f64;
    let phase = PI * (v * azimuth.to_radians().sin() + z * elevation.to_radians().sin());
    Complex64::from_polar(1.0, phase)
}

/// Full virtual-array steering vector, ordered `tx * n_rx + rx`.
pub fn steering_vector(cfg: &ValidatedConfig, azimuth: f64, elevation: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(cfg.virtual_antennas());
    for tx in 0..cfg.n_tx {
        for rx in 0..cfg.n_rx {
            out.push(steering(cfg, tx, rx, azimuth, elevation));
        }
    }
    out
}

fn add_target(frame: &mut AdcFrame, cfg: &ValidatedConfig, t: &PointTarget) {
    let (b_r, b_d) = (cfg.b_r, cfg.b_d);
    let range_bin = t.range / cfg.range_res;
    let doppler_bin = t.velocity / cfg.doppler_res;
    let delta = cfg.dilation() as f64;

    let fast: Vec<Complex64> = (0..b_r)
        .map(|s| Complex64::from_polar(1.0, 2.0 * PI * range_bin * s as f64 / b_r as f64))
        .collect();
    let steer = steering_vector(cfg, t.azimuth, t.elevation);

    for rx in 0..cfg.n_rx {
        for c in 0..b_d {
            let mut slow = Complex64::new(0.0, 0.0);
            for tx in 0..cfg.n_tx {
                let k = (tx + 1) as f64;
                let phase = 2.0 * PI * (doppler_bin + k * delta) * c as f64 / b_d as f64;
                slow += Complex64::from_polar(1.0, phase) * steer[tx * cfg.n_rx + rx];
            }
            slow *= t.amplitude;
            let base = frame.index(rx, c, 0);
            for (dst, f) in frame.samples[base..base + b_r].iter_mut().zip(&fast) {
                *dst += slow * f;
            }
        }
    }
}

/// Simulates one frame of raw ADC samples.
pub fn synthesize_adc(scene: &Scene, cfg: &ValidatedConfig) -> Result<AdcFrame> {
    scene.validate(cfg)?;
    let mut frame = AdcFrame::zeros(cfg);
    for t in &scene.targets {
        add_target(&mut frame, cfg, t);
    }
    if scene.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
        let normal = Normal::new(0.0, scene.noise_sigma / 2f64.sqrt())
            .map_err(|e| Error::InvalidScene(e.to_string()))?;
        for s in frame.samples.iter_mut() {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            *s += Complex64::new(re, im);
        }
    }
    Ok(frame)
}

/// Doppler indices (FFT-shifted axis) of the `n_tx` replicas of a reflector
/// whose own Doppler index is `base`: `(base + k * delta) mod b_d`, `k = 1..=n_tx`.
pub fn replica_doppler_bins(base: i64, cfg: &ValidatedConfig) -> Vec<usize> {
    let b_d = cfg.b_d as i64;
    let delta = cfg.dilation() as i64;
    (1..=cfg.n_tx as i64).map(|k| (base + k * delta).rem_euclid(b_d) as usize).collect()
}

/// Range-Doppler cells where a target's replicas appear after processing,
/// as `(range_bin, doppler_bin)` with the Doppler axis FFT-shifted.
pub fn expected_rd_positions(target: &PointTarget, cfg: &ValidatedConfig) -> Vec<(usize, usize)> {
    let range_bin = (target.range / cfg.range_res).round() as usize;
    let base = (target.velocity / cfg.doppler_res).round() as i64 + (cfg.b_d / 2) as i64;
    replica_doppler_bins(base, cfg).into_iter().map(|d| (range_bin, d)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RadarConfig;

    fn toy() -> ValidatedConfig {
        RadarConfig::toy().validate().unwrap()
    }

    #[test]
    fn single_target_bounded_by_tx_count() {
        let cfg = toy();
        let scene = Scene::noiseless(vec![PointTarget::new(5.3, 1.7, 12.0)]);
        let frame = synthesize_adc(&scene, &cfg).unwrap();
        let bound = cfg.n_tx as f64 + 1e-9;
        assert!(frame.samples.iter().all(|s| s.norm() <= bound));
        assert!(frame.energy() > 0.0);
    }

    #[test]
    fn empty_scene_is_zero() {
        let cfg = toy();
        let frame = synthesize_adc(&Scene::noiseless(vec![]), &cfg).unwrap();
        assert!(frame.samples.iter().all(|s| s.norm_sqr() == 0.0));
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let cfg = toy();
        let scene = Scene { noise_sigma: 0.3, seed: 7, targets: vec![PointTarget::new(3.0, 0.0, 0.0)] };
        let a = synthesize_adc(&scene, &cfg).unwrap();
        let b = synthesize_adc(&scene, &cfg).unwrap();
        assert_eq!(a, b);
        let other = synthesize_adc(&Scene { seed: 8, ..scene }, &cfg).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn invalid_scenes_rejected() {
        let cfg = toy();
        for t in [
            PointTarget::new(cfg.max_range, 0.0, 0.0),
            PointTarget::new(-0.1, 0.0, 0.0),
            PointTarget::new(1.0, cfg.d_max / 2.0, 0.0),
            PointTarget::new(1.0, 0.0, 50.0),
            PointTarget { amplitude: -1.0, ..PointTarget::new(1.0, 0.0, 0.0) },
            PointTarget { elevation: 1.0, ..PointTarget::new(1.0, 0.0, 0.0) },
        ] {
            let err = synthesize_adc(&Scene::noiseless(vec![t]), &cfg).unwrap_err();
            assert!(matches!(err, Error::InvalidScene(_)), "{t:?}");
        }
    }

    fn three_tx_dilation_64() -> ValidatedConfig {
        let mut c = RadarConfig::paper();
        c.n_tx = 3;
        c.doppler_shift = c.d_max / 4.0;
        c.validate().unwrap()
    }

    #[test]
    fn replica_bins_follow_dilation() {
        let cfg = three_tx_dilation_64();
        assert_eq!(cfg.dilation(), 64);
        assert_eq!(replica_doppler_bins(10, &cfg), vec![74, 138, 202]);
    }

    #[test]
    fn single_tx_single_replica() {
        let mut c = three_tx_dilation_64().into_inner();
        c.n_tx = 1;
        let cfg = c.validate().unwrap();
        assert_eq!(replica_doppler_bins(0, &cfg), vec![64]);
    }

    #[test]
    fn replica_wraps_modulo_doppler_period() {
        let cfg = three_tx_dilation_64();
        let b = replica_doppler_bins(cfg.b_d as i64 - 64, &cfg);
        assert_eq!(b[0], 0);
    }

    #[test]
    fn expected_positions_use_shifted_axis() {
        let cfg = toy();
        // 10 m / 0.1 m -> range bin 100; -2 m/s -> -8 bins -> shifted index 24.
        let pos = expected_rd_positions(&PointTarget::new(10.0, -2.0, 0.0), &cfg);
        assert_eq!(pos, vec![(100, 40), (100, 56), (100, 8), (100, 24)]);
    }

    #[test]
    fn boresight_steering_is_all_ones() {
        let cfg = RadarConfig::paper().validate().unwrap();
        for s in steering_vector(&cfg, 0.0, 0.0) {
            assert!((s - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }
}
