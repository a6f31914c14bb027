use std::str::FromStr;

use num_complex::{Complex32, Complex64};
use rustfft::FftPlanner;

use crate::config::ValidatedConfig;
use crate::error::{Error, Result};
use crate::format::{TensorData, TensorFile};
use crate::sim::AdcFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowKind {
    Rectangular,
    #[default]
    Hann,
}

impl FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rect" | "rectangular" => Ok(WindowKind::Rectangular),
            "hann" => Ok(WindowKind::Hann),
            other => Err(Error::InvalidConfig(format!("unknown window '{other}', expected hann|rect"))),
        }
    }
}

impl WindowKind {
    /// Periodic window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; n],
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Complex range-Doppler cube laid out `(b_r, b_d, n_rx)`; Doppler is
/// FFT-shifted so index `b_d / 2` is zero velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct RdTensor {
    pub data: Vec<Complex64>,
    pub config: ValidatedConfig,
}

impl RdTensor {
    pub fn zeros(config: &ValidatedConfig) -> Self {
        Self { data: vec![Complex64::default(); config.b_r * config.b_d * config.n_rx], config: config.clone() }
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.config.b_r, self.config.b_d, self.config.n_rx]
    }

    #[inline]
    pub fn index(&self, r: usize, d: usize, rx: usize) -> usize {
        (r * self.config.b_d + d) * self.config.n_rx + rx
    }

    #[inline]
    pub fn at(&self, r: usize, d: usize, rx: usize) -> Complex64 {
        self.data[self.index(r, d, rx)]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Power summed over receivers, laid out `(b_r, b_d)`.
    pub fn power_map(&self) -> Vec<f64> {
        self.data.chunks(self.config.n_rx).map(|c| c.iter().map(|v| v.norm_sqr()).sum()).collect()
    }

    pub fn to_tensor_file(&self) -> TensorFile {
        let data = self.data.iter().map(|s| Complex32::new(s.re as f32, s.im as f32)).collect();
        TensorFile::new(self.shape().to_vec(), TensorData::Complex64(data)).expect("shape matches")
    }

    pub fn from_tensor_file(tf: &TensorFile, config: &ValidatedConfig) -> Result<Self> {
        tf.expect_dims(&[config.b_r, config.b_d, config.n_rx], "range-doppler tensor")?;
        let TensorData::Complex64(v) = &tf.data else {
            return Err(Error::Format("range-doppler tensor must be complex64".into()));
        };
        let data: Vec<Complex64> = v.iter().map(|s| Complex64::new(s.re as f64, s.im as f64)).collect();
        if data.iter().any(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::Numerical("non-finite range-doppler value".into()));
        }
        Ok(Self { data, config: config.clone() })
    }
}

/// Windowed, unitary range FFT then Doppler FFT for every receiver.
pub fn range_doppler_transform(frame: &AdcFrame, window: WindowKind) -> Result<RdTensor> {
    let cfg = &frame.config;
    let (b_r, b_d, n_rx) = (cfg.b_r, cfg.b_d, cfg.n_rx);
    if frame.samples.len() != n_rx * b_d * b_r {
        return Err(Error::ShapeMismatch(format!(
            "frame has {} samples, expected {}",
            frame.samples.len(),
            n_rx * b_d * b_r
        )));
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft_r = planner.plan_fft_forward(b_r);
    let fft_d = planner.plan_fft_forward(b_d);
    let wr = window.coefficients(b_r);
    let wd = window.coefficients(b_d);
    let (sr, sd) = (1.0 / (b_r as f64).sqrt(), 1.0 / (b_d as f64).sqrt());

    let mut out = RdTensor::zeros(cfg);
    let mut chirps = vec![Complex64::default(); b_d * b_r];
    let mut column = vec![Complex64::default(); b_d];
    for rx in 0..n_rx {
        // range FFT per chirp, window on both axes applied up front
        for c in 0..b_d {
            let src = &frame.samples[frame.index(rx, c, 0)..][..b_r];
            let dst = &mut chirps[c * b_r..(c + 1) * b_r];
            for ((o, &s), &w) in dst.iter_mut().zip(src).zip(&wr) {
                *o = s * (w * wd[c] * sr);
            }
            fft_r.process(dst);
        }
        for r in 0..b_r {
            for (c, v) in column.iter_mut().enumerate() {
                *v = chirps[c * b_r + r] * sd;
            }
            fft_d.process(&mut column);
            for (d, &v) in column.iter().enumerate() {
                let shifted = (d + b_d / 2) % b_d;
                let i = out.index(r, shifted, rx);
                out.data[i] = v;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RadarConfig;
    use crate::sim::{expected_rd_positions, synthesize_adc, PointTarget, Scene};

    fn argmax(v: &[f64]) -> usize {
        v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0
    }

    #[test]
    fn tone_lands_on_range_bin_at_zero_doppler() {
        let cfg = RadarConfig::toy().validate().unwrap();
        let mut frame = AdcFrame::zeros(&cfg);
        for rx in 0..cfg.n_rx {
            for c in 0..cfg.b_d {
                for s in 0..cfg.b_r {
                    let i = frame.index(rx, c, s);
                    frame.samples[i] = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 50.0 * s as f64 / cfg.b_r as f64);
                }
            }
        }
        let rd = range_doppler_transform(&frame, WindowKind::Rectangular).unwrap();
        let p = rd.power_map();
        assert_eq!(argmax(&p), 50 * cfg.b_d + cfg.b_d / 2);
        let total: f64 = p.iter().sum();
        assert!((p[argmax(&p)] - total).abs() < 1e-9 * total);
    }

    #[test]
    fn zero_frame_gives_zero_tensor() {
        let cfg = RadarConfig::toy().validate().unwrap();
        let rd = range_doppler_transform(&AdcFrame::zeros(&cfg), WindowKind::Hann).unwrap();
        assert!(rd.data.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn replica_peaks_sit_at_expected_positions() {
        let cfg = RadarConfig::toy().validate().unwrap();
        let t = PointTarget::new(7.3, 2.1, 12.0);
        let rd = range_doppler_transform(&synthesize_adc(&Scene::noiseless(vec![t]), &cfg).unwrap(), WindowKind::Hann).unwrap();
        for (r, d) in expected_rd_positions(&t, &cfg) {
            for rx in 0..cfg.n_rx {
                let col: Vec<f64> = (0..cfg.b_d).map(|dd| rd.at(r, dd, rx).norm_sqr()).collect();
                // each replica is a local maximum of its Doppler neighbourhood
                let lo = col[(d + cfg.b_d - 1) % cfg.b_d];
                let hi = col[(d + 1) % cfg.b_d];
                assert!(col[d] >= lo && col[d] >= hi, "replica at {d}");
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let cfg = RadarConfig::toy().validate().unwrap();
        let mut rd = RdTensor::zeros(&cfg);
        rd.data[5] = Complex64::new(1.5, -0.25);
        let back = RdTensor::from_tensor_file(&rd.to_tensor_file(), &cfg).unwrap();
        assert_eq!(back, rd);
        let other = RadarConfig::paper().validate().unwrap();
        assert!(RdTensor::from_tensor_file(&rd.to_tensor_file(), &other).is_err());
    }
}
