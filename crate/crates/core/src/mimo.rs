//! De-interleaving of Doppler-multiplexed transmitter replicas.
//!
//! Transmitter `t` (1-based) shifts every reflector by `t * delta` Doppler
//! bins. Reading column `(d + t * delta) mod b_d` for each `t` therefore
//! lines all replicas of a reflector with base Doppler index `d` up in a
//! single output column `d`, one channel group per transmitter.

use num_complex::Complex64;

use crate::config::ValidatedConfig;
use crate::dsp::RdTensor;
use crate::error::{Error, Result};
use crate::format::{TensorData, TensorFile};
use crate::nn::{Conv2d, Padding, Scalar, Tensor};

/// Real/imaginary stacked replicas, laid out `(2 * n_tx * n_rx, b_r, b_d)`.
///
/// Channel `2 * ((t - 1) * n_rx + rx)` holds the real part, the next one the
/// imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct DeinterleavedTensor {
    pub data: Vec<f64>,
    pub config: ValidatedConfig,
}

impl DeinterleavedTensor {
    pub fn channels(&self) -> usize {
        2 * self.config.virtual_antennas()
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels(), self.config.b_r, self.config.b_d]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let [c, h, w] = self.shape();
        Tensor::from_vec([1, c, h, w], self.data.iter().map(|&v| T::of(v)).collect()).expect("shape matches")
    }

    pub fn to_tensor_file(&self) -> TensorFile {
        TensorFile::new(self.shape().to_vec(), TensorData::F64(self.data.clone())).expect("shape matches")
    }
}

fn check(rd: &RdTensor, cfg: &ValidatedConfig) -> Result<()> {
    if rd.config != *cfg || rd.data.len() != cfg.b_r * cfg.b_d * cfg.n_rx {
        return Err(Error::ConfigMismatch("range-doppler tensor was built for another config".into()));
    }
    Ok(())
}

pub fn deinterleave(rd: &RdTensor) -> Result<DeinterleavedTensor> {
    let cfg = &rd.config;
    check(rd, cfg)?;
    let (b_r, b_d, n_rx, delta) = (cfg.b_r, cfg.b_d, cfg.n_rx, cfg.dilation());
    let plane = b_r * b_d;
    let mut data = vec![0.0; 2 * cfg.virtual_antennas() * plane];
    for t in 0..cfg.n_tx {
        let shift = (t + 1) * delta;
        for rx in 0..n_rx {
            let ch = 2 * (t * n_rx + rx);
            for r in 0..b_r {
                for d in 0..b_d {
                    let v = rd.at(r, (d + shift) % b_d, rx);
                    data[ch * plane + r * b_d + d] = v.re;
                    data[(ch + 1) * plane + r * b_d + d] = v.im;
                }
            }
        }
    }
    Ok(DeinterleavedTensor { data, config: cfg.clone() })
}

/// The `n_tx * n_rx` virtual-array measurement of a reflector whose base
/// Doppler index is `d`, ordered `(t - 1) * n_rx + rx`.
pub fn gather_virtual(rd: &RdTensor, r: usize, d: usize) -> Result<Vec<Complex64>> {
    let cfg = &rd.config;
    if r >= cfg.b_r || d >= cfg.b_d {
        return Err(Error::CellOutOfRange { range: r, doppler: d });
    }
    let delta = cfg.dilation();
    let mut out = Vec::with_capacity(cfg.virtual_antennas());
    for t in 0..cfg.n_tx {
        let dd = (d + (t + 1) * delta) % cfg.b_d;
        for rx in 0..cfg.n_rx {
            out.push(rd.at(r, dd, rx));
        }
    }
    Ok(out)
}

/// Network input: receivers as stacked real/imaginary channels,
/// `(1, 2 * n_rx, b_r, b_d)`.
pub fn rd_to_channels<T: Scalar>(rd: &RdTensor) -> Tensor<T> {
    let cfg = &rd.config;
    let (b_r, b_d, n_rx) = (cfg.b_r, cfg.b_d, cfg.n_rx);
    let plane = b_r * b_d;
    let mut data = vec![T::zero(); 2 * n_rx * plane];
    for r in 0..b_r {
        for d in 0..b_d {
            for rx in 0..n_rx {
                let v = rd.at(r, d, rx);
                data[2 * rx * plane + r * b_d + d] = T::of(v.re);
                data[(2 * rx + 1) * plane + r * b_d + d] = T::of(v.im);
            }
        }
    }
    Tensor::from_vec([1, 2 * n_rx, b_r, b_d], data).expect("shape matches")
}

/// One-hot dilated convolution (kernel `1 x n_tx`, dilation `delta`, circular
/// Doppler padding) that reproduces [`deinterleave`] when applied to
/// [`rd_to_channels`].
pub fn atrous_equivalence_weights<T: Scalar>(cfg: &ValidatedConfig) -> Conv2d<T> {
    let (n_tx, n_rx, delta) = (cfg.n_tx, cfg.n_rx, cfg.dilation());
    let cin = 2 * n_rx;
    let cout = 2 * n_tx * n_rx;
    let mut w = Tensor::zeros([cout, cin, 1, n_tx]);
    for t in 0..n_tx {
        for rx in 0..n_rx {
            for part in 0..2 {
                w.set(2 * (t * n_rx + rx) + part, 2 * rx + part, 0, t, T::one());
            }
        }
    }
    Conv2d::from_weights(w, None)
        .expect("weights are well formed")
        .dilation(1, delta)
        .padding(Padding::Circular { h: 0, offset: -(delta as isize) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RadarConfig;
    use crate::dsp::{range_doppler_transform, WindowKind};
    use crate::sim::{synthesize_adc, PointTarget, Scene};

    fn single_tx() -> ValidatedConfig {
        RadarConfig { n_tx: 1, doppler_shift: 4.0, ..RadarConfig::toy() }.validate().unwrap()
    }

    #[test]
    fn single_transmitter_is_a_circular_shift() {
        let cfg = single_tx();
        let mut rd = RdTensor::zeros(&cfg);
        for (i, v) in rd.data.iter_mut().enumerate() {
            *v = Complex64::new(i as f64, -(i as f64));
        }
        let out = deinterleave(&rd).unwrap();
        let (b_d, plane) = (cfg.b_d, cfg.b_r * cfg.b_d);
        for rx in 0..cfg.n_rx {
            for d in 0..b_d {
                let src = rd.at(3, (d + 16) % b_d, rx);
                assert_eq!(out.data[2 * rx * plane + 3 * b_d + d], src.re);
                assert_eq!(out.data[(2 * rx + 1) * plane + 3 * b_d + d], src.im);
            }
        }
    }

    #[test]
    fn impulse_lands_once_per_group() {
        let cfg = RadarConfig::toy().validate().unwrap();
        let mut rd = RdTensor::zeros(&cfg);
        for rx in 0..cfg.n_rx {
            let i = rd.index(9, 20, rx);
            rd.data[i] = Complex64::new(1.0, 1.0);
        }
        let out = deinterleave(&rd).unwrap();
        let plane = cfg.b_r * cfg.b_d;
        for t in 0..cfg.n_tx {
            let group = &out.data[2 * t * cfg.n_rx * plane..2 * (t + 1) * cfg.n_rx * plane];
            let nz: Vec<usize> = group.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i % plane).collect();
            assert_eq!(nz.len(), 2 * cfg.n_rx);
            let d = (20 + cfg.b_d - (t + 1) * cfg.dilation()) % cfg.b_d;
            assert!(nz.iter().all(|&i| i == 9 * cfg.b_d + d));
        }
    }

    #[test]
    fn replicas_align_at_the_base_doppler() {
        let cfg = RadarConfig::toy().validate().unwrap();
        let t = PointTarget::new(6.0, -3.0, 0.0);
        let rd = range_doppler_transform(&synthesize_adc(&Scene::noiseless(vec![t]), &cfg).unwrap(), WindowKind::Hann).unwrap();
        let out = deinterleave(&rd).unwrap();
        let (b_d, plane) = (cfg.b_d, cfg.b_r * cfg.b_d);
        let r = 60;
        let base = cfg.doppler_index(-3.0).round() as usize;
        for t in 0..cfg.n_tx {
            let energy = |d: usize| -> f64 {
                (0..2 * cfg.n_rx).map(|c| out.data[(2 * t * cfg.n_rx + c) * plane + r * b_d + d].powi(2)).sum()
            };
            // in the toy config n_tx * delta = b_d, so every column on the comb
            // base + k delta holds some transmitter's replica at equal power
            let best = (0..b_d).max_by(|&a, &b| energy(a).total_cmp(&energy(b))).unwrap();
            assert_eq!(best % cfg.dilation(), base % cfg.dilation());
            assert!(energy(base) >= 0.999 * energy(best));
        }
    }

    #[test]
    fn gather_matches_deinterleaved_column() {
        let cfg = RadarConfig::toy().validate().unwrap();
        let mut rd = RdTensor::zeros(&cfg);
        for (i, v) in rd.data.iter_mut().enumerate() {
            *v = Complex64::new((i % 17) as f64, (i % 5) as f64);
        }
        let out = deinterleave(&rd).unwrap();
        let v = gather_virtual(&rd, 4, 33).unwrap();
        let plane = cfg.b_r * cfg.b_d;
        for (k, z) in v.iter().enumerate() {
            assert_eq!(out.data[2 * k * plane + 4 * cfg.b_d + 33], z.re);
            assert_eq!(out.data[(2 * k + 1) * plane + 4 * cfg.b_d + 33], z.im);
        }
        assert!(matches!(gather_virtual(&rd, cfg.b_r, 0), Err(Error::CellOutOfRange { .. })));
    }

    #[test]
    fn toy_weight_bank_shape() {
        let cfg = RadarConfig::toy().validate().unwrap();
        let conv = atrous_equivalence_weights::<f64>(&cfg);
        assert_eq!(conv.weight.shape(), [16, 4, 1, 4]);
    }
}
