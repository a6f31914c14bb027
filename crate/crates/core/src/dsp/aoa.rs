use num_complex::Complex64;

use crate::config::ValidatedConfig;
use crate::dsp::RdTensor;
use crate::error::{Error, Result};
use crate::mimo::gather_virtual;
use crate::sim::steering_vector;

/// Analytic steering vectors on the `(azimuth, elevation)` bin grid, laid out
/// `(b_a, b_e, n_tx * n_rx)`.
#[derive(Debug, Clone)]
pub struct CalibrationMatrix {
    pub steering: Vec<Complex64>,
    pub b_a: usize,
    pub b_e: usize,
    pub n_virtual: usize,
}

impl CalibrationMatrix {
    pub fn new(cfg: &ValidatedConfig) -> Self {
        let mut steering = Vec::with_capacity(cfg.b_a * cfg.b_e * cfg.virtual_antennas());
        for a in 0..cfg.b_a {
            for e in 0..cfg.b_e {
                steering.extend(steering_vector(cfg, cfg.azimuth_of_bin(a), cfg.elevation_of_bin(e)));
            }
        }
        Self { steering, b_a: cfg.b_a, b_e: cfg.b_e, n_virtual: cfg.virtual_antennas() }
    }

    pub fn vector(&self, a: usize, e: usize) -> &[Complex64] {
        let start = (a * self.b_e + e) * self.n_virtual;
        &self.steering[start..start + self.n_virtual]
    }

    /// `|<steering(a, e), m>|^2` over the whole grid, laid out `(b_a, b_e)`.
    pub fn correlate(&self, m: &[Complex64]) -> Vec<f64> {
        self.steering.chunks(self.n_virtual).map(|s| inner(s, m).norm_sqr()).collect()
    }

    /// Like [`correlate`](Self::correlate) restricted to one elevation bin.
    pub fn correlate_elevation(&self, m: &[Complex64], e: usize) -> Vec<f64> {
        (0..self.b_a).map(|a| inner(self.vector(a, e), m).norm_sqr()).collect()
    }
}

fn inner(s: &[Complex64], m: &[Complex64]) -> Complex64 {
    s.iter().zip(m).map(|(s, m)| s.conj() * m).sum()
}

#[derive(Debug, Clone)]
pub struct AoaMap {
    pub power: Vec<f64>,
    pub b_a: usize,
    pub b_e: usize,
}

impl AoaMap {
    /// Grid argmax as `(azimuth bin, elevation bin)`; the first maximum wins.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &p) in self.power.iter().enumerate() {
            if p > self.power[best] {
                best = i;
            }
        }
        (best / self.b_e, best % self.b_e)
    }

    pub fn max(&self) -> f64 {
        self.power.iter().copied().fold(0.0, f64::max)
    }
}

/// Angle power maps for reflectors at the given `(range, base Doppler)` cells.
pub fn aoa_correlate(rd: &RdTensor, calib: &CalibrationMatrix, cells: &[(usize, usize)]) -> Result<Vec<AoaMap>> {
    if calib.n_virtual != rd.config.virtual_antennas() {
        return Err(Error::ConfigMismatch("calibration matrix built for another array".into()));
    }
    cells
        .iter()
        .map(|&(r, d)| {
            let m = gather_virtual(rd, r, d)?;
            Ok(AoaMap { power: calib.correlate(&m), b_a: calib.b_a, b_e: calib.b_e })
        })
        .collect()
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if hi - lo < 1e-9 {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Continuous-angle refinement around grid bin `(a, e)` using analytic
/// steering; returns `(azimuth deg, elevation deg, coherent power)`.
pub fn refine_angle(cfg: &ValidatedConfig, m: &[Complex64], a: usize, e: usize) -> (f64, f64, f64) {
    let power = |az: f64, el: f64| inner(&steering_vector(cfg, az, el), m).norm_sqr();
    let half_fov = cfg.azimuth_fov / 2.0;
    let wa = cfg.azimuth_bin_width();
    let mut el = cfg.elevation_of_bin(e);
    let az0 = cfg.azimuth_of_bin(a);
    let (az, _) = golden_max(|x| power(x, el), (az0 - wa).max(-half_fov), (az0 + wa).min(half_fov));
    let mut best = power(az, el);
    if cfg.b_e > 1 && cfg.elevation_fov > 0.0 {
        let we = cfg.elevation_bin_width();
        let half = cfg.elevation_fov / 2.0;
        let (e2, p2) = golden_max(|x| power(az, x), (el - we).max(-half), (el + we).min(half));
        if p2 > best {
            el = e2;
            best = p2;
        }
    }
    (az, el, best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RadarConfig;
    use crate::dsp::{range_doppler_transform, WindowKind};
    use crate::sim::{synthesize_adc, PointTarget, Scene};

    #[test]
    fn calibration_entries_have_unit_modulus() {
        let cfg = RadarConfig::toy().validate().unwrap();
        let calib = CalibrationMatrix::new(&cfg);
        assert_eq!(calib.steering.len(), cfg.b_a * cfg.b_e * 8);
        assert!(calib.steering.iter().all(|s| (s.norm() - 1.0).abs() < 1e-9));
    }

    #[test]
    fn boresight_measurement_peaks_at_centre_bin() {
        let cfg = RadarConfig::toy().validate().unwrap();
        let calib = CalibrationMatrix::new(&cfg);
        let m = vec![Complex64::new(1.0, 0.0); 8];
        let map = AoaMap { power: calib.correlate(&m), b_a: cfg.b_a, b_e: cfg.b_e };
        assert_eq!(map.argmax(), (cfg.b_a / 2, 0));
        let zero = calib.correlate(&[Complex64::default(); 8]);
        assert!(zero.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn simulated_target_at_twenty_degrees() {
        let cfg = RadarConfig::toy().validate().unwrap();
        let t = PointTarget::new(5.0, 1.0, 20.0);
        let rd = range_doppler_transform(&synthesize_adc(&Scene::noiseless(vec![t]), &cfg).unwrap(), WindowKind::Hann).unwrap();
        let calib = CalibrationMatrix::new(&cfg);
        let d = cfg.doppler_index(1.0).round() as usize;
        let maps = aoa_correlate(&rd, &calib, &[(50, d)]).unwrap();
        let (a, _) = maps[0].argmax();
        assert!((cfg.azimuth_of_bin(a) - 20.0).abs() <= cfg.azimuth_bin_width());
        let m = gather_virtual(&rd, 50, d).unwrap();
        let (az, _, _) = refine_angle(&cfg, &m, a, 0);
        assert!((az - 20.0).abs() < 1e-3, "{az}");
        assert!(matches!(
            aoa_correlate(&rd, &calib, &[(cfg.b_r, 0)]),
            Err(Error::CellOutOfRange { .. })
        ));
    }
}
