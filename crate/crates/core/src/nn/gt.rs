//! Dense training targets on the head grids.
//!
//! Detection cells are 4 range bins by 8 azimuth bins; segmentation cells are
//! 2 by 4. Azimuth cells tile the field of view from `-fov / 2`.
//!
//! Free space follows a synthetic convention: every segmentation cell whose
//! center lies within a quarter field of view of boresight (the central half
//! of the FoV, at any range) is free, except those inside a vehicle-sized
//! footprint around a target.

use crate::config::ValidatedConfig;
use crate::error::{Error, Result};
use crate::nn::loss::Targets;
use crate::nn::tensor::Tensor;
use crate::sim::{PointTarget, Scene};

/// Length (along x) and width (along y) of the box drawn around a target, m.
pub const FOOTPRINT: (f64, f64) = (4.0, 1.8);

/// A regular range-azimuth grid of `rows x cols` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGrid {
    pub rows: usize,
    pub cols: usize,
    /// Meters.
    pub cell_range: f64,
    /// Degrees.
    pub cell_azimuth: f64,
    /// Azimuth of the left edge of column 0, degrees.
    pub azimuth_start: f64,
}

impl CellGrid {
    fn with_factors(cfg: &ValidatedConfig, fr: usize, fa: usize) -> Self {
        Self {
            rows: cfg.b_r / fr,
            cols: cfg.b_a / fa,
            cell_range: fr as f64 * cfg.range_res,
            cell_azimuth: fa as f64 * cfg.azimuth_bin_width(),
            azimuth_start: -cfg.azimuth_fov / 2.0,
        }
    }

    /// The classification/regression grid, `(b_r / 4, b_a / 8)`.
    pub fn detection(cfg: &ValidatedConfig) -> Self {
        Self::with_factors(cfg, 4, 8)
    }

    /// The free-space grid, `(b_r / 2, b_a / 4)`.
    pub fn segmentation(cfg: &ValidatedConfig) -> Self {
        Self::with_factors(cfg, 2, 4)
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    /// Range and azimuth of the center of cell `(r, a)`.
    pub fn center(&self, r: usize, a: usize) -> (f64, f64) {
        ((r as f64 + 0.5) * self.cell_range, self.azimuth_start + (a as f64 + 0.5) * self.cell_azimuth)
    }

    /// Cell containing `(range, azimuth)`, if any. The far azimuth edge
    /// belongs to the last column.
    pub fn locate(&self, range: f64, azimuth: f64) -> Option<(usize, usize)> {
        let r = (range / self.cell_range).floor();
        let a = ((azimuth - self.azimuth_start) / self.cell_azimuth).floor();
        let a = if a as usize == self.cols && a >= 0.0 { a - 1.0 } else { a };
        if r < 0.0 || a < 0.0 || r as usize >= self.rows || a as usize >= self.cols {
            return None;
        }
        Some((r as usize, a as usize))
    }
}

/// Targets for one frame, each tensor with batch size 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub clas: Tensor<f64>,
    pub reg: Tensor<f64>,
    pub seg: Tensor<f64>,
}

/// Whether `(x, y)` lies inside the footprint box of `t`.
pub fn in_footprint(t: &PointTarget, x: f64, y: f64) -> bool {
    let (tx, ty) = t.cartesian();
    (x - tx).abs() <= FOOTPRINT.0 / 2.0 && (y - ty).abs() <= FOOTPRINT.1 / 2.0
}

pub fn encode_ground_truth(scene: &Scene, cfg: &ValidatedConfig) -> Result<GroundTruth> {
    let det = CellGrid::detection(cfg);
    let mut clas = Tensor::zeros([1, 1, det.rows, det.cols]);
    let mut reg = Tensor::zeros([1, 2, det.rows, det.cols]);
    for (i, t) in scene.targets.iter().enumerate() {
        let outside = !(t.range >= 0.0 && t.range < cfg.max_range && t.azimuth.abs() <= cfg.azimuth_fov / 2.0);
        let cell = det.locate(t.range, t.azimuth).filter(|_| !outside);
        let Some((r, a)) = cell else {
            return Err(Error::OutOfFieldOfView(format!("target {i} at {:.2} m, {:.2} deg", t.range, t.azimuth)));
        };
        // The first target claims a shared cell.
        if clas.at(0, 0, r, a) == 1.0 {
            continue;
        }
        let (cr, ca) = det.center(r, a);
        clas.set(0, 0, r, a, 1.0);
        reg.set(0, 0, r, a, (t.range - cr) / det.cell_range);
        reg.set(0, 1, r, a, (t.azimuth - ca) / det.cell_azimuth);
    }

    let grid = CellGrid::segmentation(cfg);
    let mut seg = Tensor::zeros([1, 1, grid.rows, grid.cols]);
    for r in 0..grid.rows {
        for a in 0..grid.cols {
            let (range, az) = grid.center(r, a);
            if az.abs() > cfg.azimuth_fov / 4.0 {
                continue;
            }
            let (x, y) = (range * az.to_radians().cos(), range * az.to_radians().sin());
            if !scene.targets.iter().any(|t| in_footprint(t, x, y)) {
                seg.set(0, 0, r, a, 1.0);
            }
        }
    }
    Ok(GroundTruth { clas, reg, seg })
}

impl Targets {
    /// Concatenates per-frame targets along the batch axis.
    pub fn stack(items: &[&GroundTruth]) -> Result<Self> {
        let cat = |f: &dyn Fn(&GroundTruth) -> &Tensor<f64>| -> Result<Tensor<f64>> {
            let [_, c, h, w] = f(items[0]).shape();
            let mut data = Vec::with_capacity(items.len() * c * h * w);
            for g in items {
                f(g).ensure_shape([1, c, h, w], "ground truth")?;
                data.extend_from_slice(f(g).data());
            }
            Tensor::from_vec([items.len(), c, h, w], data)
        };
        if items.is_empty() {
            return Err(Error::ShapeMismatch("empty batch".into()));
        }
        Ok(Self { clas: cat(&|g| &g.clas)?, reg: cat(&|g| &g.reg)?, seg: cat(&|g| &g.seg)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RadarConfig;

    fn toy() -> ValidatedConfig {
        RadarConfig::toy().validate().unwrap()
    }

    #[test]
    fn paper_cell_arithmetic() {
        let cfg = RadarConfig::paper().validate().unwrap();
        let gt = encode_ground_truth(&Scene::noiseless(vec![PointTarget::new(10.0, 0.0, 0.0)]), &cfg).unwrap();
        let grid = CellGrid::detection(&cfg);
        assert!((grid.cell_range - 0.8).abs() < 1e-12);
        let (r, a) = grid.locate(10.0, 0.0).unwrap();
        assert_eq!(r, 12);
        assert_eq!(gt.clas.at(0, 0, r, a), 1.0);
        assert!(gt.reg.at(0, 0, r, a).abs() < 1e-12);
        assert_eq!(gt.clas.sum(), 1.0);
    }

    #[test]
    fn empty_scene_has_no_positives() {
        let gt = encode_ground_truth(&Scene::noiseless(vec![]), &toy()).unwrap();
        assert_eq!(gt.clas.sum(), 0.0);
        assert_eq!(gt.clas.shape(), [1, 1, 32, 16]);
        assert_eq!(gt.seg.shape(), [1, 1, 64, 32]);
        // central half of the 32 columns is free at every range
        assert_eq!(gt.seg.sum(), 64.0 * 16.0);
    }

    #[test]
    fn two_targets_five_meters_apart() {
        let cfg = RadarConfig::paper().validate().unwrap();
        let scene = Scene::noiseless(vec![PointTarget::new(20.0, 1.0, 5.0), PointTarget::new(25.0, 1.0, 5.0)]);
        let gt = encode_ground_truth(&scene, &cfg).unwrap();
        assert_eq!(gt.clas.sum(), 2.0);
    }

    #[test]
    fn footprints_are_cut_from_free_space() {
        let cfg = toy();
        let t = PointTarget::new(8.0, 0.0, 0.0);
        let gt = encode_ground_truth(&Scene::noiseless(vec![t]), &cfg).unwrap();
        let grid = CellGrid::segmentation(&cfg);
        let (r, a) = grid.locate(8.0, 0.0).unwrap();
        assert_eq!(gt.seg.at(0, 0, r, a), 0.0);
        let (r, a) = grid.locate(3.0, 0.0).unwrap();
        assert_eq!(gt.seg.at(0, 0, r, a), 1.0);
        let (r, a) = grid.locate(3.0, 40.0).unwrap();
        assert_eq!(gt.seg.at(0, 0, r, a), 0.0);
    }

    #[test]
    fn out_of_view_is_rejected() {
        let cfg = toy();
        for t in [PointTarget::new(5.0, 0.0, 50.0), PointTarget::new(13.0, 0.0, 0.0)] {
            assert!(matches!(encode_ground_truth(&Scene::noiseless(vec![t]), &cfg), Err(Error::OutOfFieldOfView(_))));
        }
        // the field-of-view edge itself is inside
        assert!(encode_ground_truth(&Scene::noiseless(vec![PointTarget::new(5.0, 0.0, 45.0)]), &cfg).is_ok());
    }
}
