use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ValidatedConfig;
use crate::dsp::{aoa::refine_angle, cfar_detect, AoaMap, CalibrationMatrix, CfarParams, RdTensor};
use crate::error::{Error, Result};
use crate::format::write_atomic;
use crate::mimo::gather_virtual;

pub const POINT_CLOUD_HEADER: &str = "range_m,doppler_mps,azimuth_deg,elevation_deg,power";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarPoint {
    #[serde(rename = "range_m")]
    pub range: f64,
    #[serde(rename = "doppler_mps")]
    pub doppler: f64,
    #[serde(rename = "azimuth_deg")]
    pub azimuth: f64,
    #[serde(rename = "elevation_deg")]
    pub elevation: f64,
    pub power: f64,
}

fn doppler_gap(a: usize, b: usize, delta: usize) -> usize {
    let m = (a + delta * 64 - b % delta) % delta;
    m.min(delta - m)
}

/// CFAR peaks grouped into reflectors, each localized in angle.
///
/// Peaks within one range bin of each other whose Doppler indices differ by a
/// multiple of the replica spacing (±1 bin) are treated as replicas of one
/// reflector. Its base Doppler is the hypothesis `seed - k * delta` whose
/// gathered virtual-array vector is most coherent with some steering vector.
pub fn extract_point_cloud(rd: &RdTensor, calib: &CalibrationMatrix, params: &CfarParams) -> Result<Vec<RadarPoint>> {
    let cfg = &rd.config;
    if calib.n_virtual != cfg.virtual_antennas() || calib.b_a != cfg.b_a || calib.b_e != cfg.b_e {
        return Err(Error::ConfigMismatch("calibration matrix built for another config".into()));
    }
    let power = rd.power_map();
    let mut peaks = cfar_detect(&power, cfg.b_r, cfg.b_d, params)?;
    peaks.sort_by(|a, b| power[b.0 * cfg.b_d + b.1].total_cmp(&power[a.0 * cfg.b_d + a.1]).then(a.cmp(b)));

    let delta = cfg.dilation();
    let mut taken = vec![false; peaks.len()];
    let mut cloud = Vec::new();
    for i in 0..peaks.len() {
        if taken[i] {
            continue;
        }
        let (r, d) = peaks[i];
        for (j, &(rj, dj)) in peaks.iter().enumerate().skip(i) {
            if r.abs_diff(rj) <= 1 && doppler_gap(dj, d, delta) <= 1 {
                taken[j] = true;
            }
        }
        cloud.push(localize(rd, calib, cfg, r, d)?);
    }
    Ok(cloud)
}

fn localize(rd: &RdTensor, calib: &CalibrationMatrix, cfg: &ValidatedConfig, r: usize, seed: usize) -> Result<RadarPoint> {
    let (b_d, delta) = (cfg.b_d, cfg.dilation());
    let mut best: Option<(usize, f64, f64, f64)> = None;
    for k in 1..=cfg.n_tx {
        let base = (seed + b_d * cfg.n_tx - k * delta) % b_d;
        let m = gather_virtual(rd, r, base)?;
        let map = AoaMap { power: calib.correlate(&m), b_a: calib.b_a, b_e: calib.b_e };
        let (a, e) = map.argmax();
        let (az, el, p) = refine_angle(cfg, &m, a, e);
        if best.is_none_or(|b| p > b.3) {
            best = Some((base, az, el, p));
        }
    }
    let (base, azimuth, elevation, power) = best.expect("at least one transmitter");
    Ok(RadarPoint {
        range: r as f64 * cfg.range_res,
        doppler: cfg.velocity_of_doppler_index(base),
        azimuth,
        elevation,
        power,
    })
}

/// Range-azimuth power map `(b_r, b_a)` at the boresight elevation bin: for
/// every range bin, the maximum over base Doppler of the angle power.
pub fn build_ra_map(rd: &RdTensor, calib: &CalibrationMatrix) -> Result<Vec<f64>> {
    let cfg = &rd.config;
    if calib.n_virtual != cfg.virtual_antennas() || calib.b_a != cfg.b_a || calib.b_e != cfg.b_e {
        return Err(Error::ConfigMismatch("calibration matrix built for another config".into()));
    }
    let e0 = cfg.elevation_bin(0.0);
    let mut map = vec![0.0f64; cfg.b_r * cfg.b_a];
    for r in 0..cfg.b_r {
        let row = &mut map[r * cfg.b_a..(r + 1) * cfg.b_a];
        for d in 0..cfg.b_d {
            let m = gather_virtual(rd, r, d)?;
            if m.iter().all(|v| v.norm_sqr() == 0.0) {
                continue;
            }
            for (dst, p) in row.iter_mut().zip(calib.correlate_elevation(&m, e0)) {
                *dst = (*dst).max(p);
            }
        }
    }
    Ok(map)
}

pub fn point_cloud_csv(points: &[RadarPoint]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(POINT_CLOUD_HEADER.split(','))
        .map_err(|e| Error::Format(e.to_string()))?;
    for p in points {
        w.serialize(p).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

pub fn write_point_cloud_csv(path: impl AsRef<Path>, points: &[RadarPoint]) -> Result<()> {
    write_atomic(path, &point_cloud_csv(points)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RadarConfig;
    use crate::dsp::{range_doppler_transform, WindowKind};
    use crate::sim::{synthesize_adc, PointTarget, Scene};

    fn rd_of(cfg: &ValidatedConfig, targets: Vec<PointTarget>) -> RdTensor {
        range_doppler_transform(&synthesize_adc(&Scene::noiseless(targets), cfg).unwrap(), WindowKind::Hann).unwrap()
    }

    #[test]
    fn empty_scene_gives_empty_cloud() {
        let cfg = RadarConfig::toy().validate().unwrap();
        let calib = CalibrationMatrix::new(&cfg);
        assert!(extract_point_cloud(&rd_of(&cfg, vec![]), &calib, &CfarParams::default()).unwrap().is_empty());
    }

    #[test]
    fn toy_targets_are_recovered() {
        let cfg = RadarConfig::toy().validate().unwrap();
        let calib = CalibrationMatrix::new(&cfg);
        let t = PointTarget::new(8.43, -5.3, -17.0);
        let cloud = extract_point_cloud(&rd_of(&cfg, vec![t]), &calib, &CfarParams::default()).unwrap();
        assert_eq!(cloud.len(), 1, "{cloud:?}");
        let p = cloud[0];
        assert!((p.range - t.range).abs() <= cfg.range_res);
        assert!((p.doppler - t.velocity).abs() <= cfg.doppler_res);
        assert!((p.azimuth - t.azimuth).abs() <= cfg.azimuth_bin_width());
    }

    #[test]
    fn paper_target_and_range_separation() {
        let cfg = RadarConfig::paper().validate().unwrap();
        let calib = CalibrationMatrix::new(&cfg);
        let t = PointTarget::new(30.0, 5.0, -10.0);
        let cloud = extract_point_cloud(&rd_of(&cfg, vec![t]), &calib, &CfarParams::default()).unwrap();
        assert_eq!(cloud.len(), 1, "{cloud:?}");
        let p = cloud[0];
        assert!((p.range - 30.0).abs() <= 0.2);
        assert!((p.doppler - 5.0).abs() <= cfg.doppler_res + 1e-9);
        assert!((p.azimuth + 10.0).abs() <= cfg.azimuth_bin_width());

        let two = vec![PointTarget::new(30.0, 5.0, -10.0), PointTarget::new(35.0, 5.0, -10.0)];
        let cloud = extract_point_cloud(&rd_of(&cfg, two), &calib, &CfarParams::default()).unwrap();
        assert_eq!(cloud.len(), 2, "{cloud:?}");
    }

    #[test]
    fn ra_map_of_boresight_target() {
        let cfg = RadarConfig::toy().validate().unwrap();
        let calib = CalibrationMatrix::new(&cfg);
        assert!(build_ra_map(&rd_of(&cfg, vec![]), &calib).unwrap().iter().all(|&v| v == 0.0));
        let map = build_ra_map(&rd_of(&cfg, vec![PointTarget::new(6.0, 0.0, 0.0)]), &calib).unwrap();
        let best = map.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!((best / cfg.b_a, best % cfg.b_a), (60, cfg.b_a / 2));
    }

    #[test]
    fn csv_header() {
        let bytes = point_cloud_csv(&[RadarPoint { range: 1.0, doppler: 0.5, azimuth: -3.0, elevation: 0.0, power: 2.0 }]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text.lines().next().unwrap(), POINT_CLOUD_HEADER);
        assert_eq!(text.lines().nth(1).unwrap(), "1.0,0.5,-3.0,0.0,2.0");
    }
}
