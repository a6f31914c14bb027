//! Decoding head outputs into detections, and scoring them.
//!
//! Matching renders every detection and truth as an axis-aligned
//! 4.0 m x 1.8 m Cartesian box (x forward) centered at its point. AP is the
//! exact step integral of the precision-recall curve over all score
//! thresholds.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::ValidatedConfig;
use crate::error::{Error, Result};
use crate::nn::gt::{CellGrid, FOOTPRINT};
use crate::nn::layers::sigmoid;
use crate::nn::loss::TrainConfig;
use crate::nn::model::{FftRadNet, HeadOutputs};
use crate::nn::tensor::{Scalar, Tensor};
use crate::nn::train::{predict, Sample};
use crate::sim::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Meters.
    pub range: f64,
    /// Degrees.
    pub azimuth: f64,
    pub score: f64,
}

impl Detection {
    pub fn cartesian(&self) -> (f64, f64) {
        polar_to_xy(self.range, self.azimuth)
    }
}

fn polar_to_xy(range: f64, azimuth: f64) -> (f64, f64) {
    let a = azimuth.to_radians();
    (range * a.cos(), range * a.sin())
}

/// Ground-truth position, range in meters and azimuth in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub range: f64,
    pub azimuth: f64,
}

impl Truth {
    pub fn from_scene(scene: &Scene) -> Vec<Truth> {
        scene.targets.iter().map(|t| Truth { range: t.range, azimuth: t.azimuth }).collect()
    }
}

/// IoU of two footprint boxes centered at `a` and `b` (Cartesian meters).
pub fn box_iou(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (l, w) = FOOTPRINT;
    let ix = (l - (a.0 - b.0).abs()).max(0.0);
    let iy = (w - (a.1 - b.1).abs()).max(0.0);
    let inter = ix * iy;
    inter / (2.0 * l * w - inter)
}

/// Detections from probability maps `clas` (1, 1, h, w) and `reg` (1, 2, h, w).
///
/// Every cell above `threshold` yields a point at its center plus the
/// denormalized offset, clamped to the grid; greedy NMS then drops any point
/// within `nms_radius` meters of a higher-scoring one.
pub fn decode(clas: &Tensor<f64>, reg: &Tensor<f64>, grid: &CellGrid, threshold: f64, nms_radius: f64) -> Result<Vec<Detection>> {
    clas.ensure_shape([1, 1, grid.rows, grid.cols], "classification map")?;
    reg.ensure_shape([1, 2, grid.rows, grid.cols], "regression map")?;
    let max_range = grid.rows as f64 * grid.cell_range;
    let az_end = grid.azimuth_start + grid.cols as f64 * grid.cell_azimuth;
    let mut cands = Vec::new();
    for r in 0..grid.rows {
        for a in 0..grid.cols {
            let score = clas.at(0, 0, r, a);
            if score <= threshold {
                continue;
            }
            let (cr, ca) = grid.center(r, a);
            cands.push(Detection {
                range: (cr + reg.at(0, 0, r, a) * grid.cell_range).clamp(0.0, max_range),
                azimuth: (ca + reg.at(0, 1, r, a) * grid.cell_azimuth).clamp(grid.azimuth_start, az_end),
                score,
            });
        }
    }
    // Stable: equal scores keep raster order.
    cands.sort_by(|p, q| q.score.total_cmp(&p.score));
    let mut kept: Vec<Detection> = Vec::new();
    for c in cands {
        let (x, y) = c.cartesian();
        if kept.iter().all(|k| {
            let (kx, ky) = k.cartesian();
            (x - kx).hypot(y - ky) > nms_radius
        }) {
            kept.push(c);
        }
    }
    Ok(kept)
}

/// [`decode`] applied to logit head outputs of a single frame.
pub fn decode_outputs(out: &HeadOutputs<f64>, cfg: &ValidatedConfig, threshold: f64, nms_radius: f64) -> Result<Vec<Detection>> {
    decode(&out.clas.map(sigmoid), &out.reg, &CellGrid::detection(cfg), threshold, nms_radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    /// Percent.
    pub ap: f64,
    /// Percent.
    pub ar: f64,
    /// Meters, over matched pairs; NaN without matches.
    pub range_mae: f64,
    /// Degrees, over matched pairs; NaN without matches.
    pub angle_mae: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub truths: usize,
}

/// Greedy matching in descending score order over a set of frames, each a
/// pair of (detections, truths). A detection matches the unmatched truth of
/// its own frame with the highest IoU, if that IoU reaches `iou_threshold`.
pub fn match_and_score(frames: &[(Vec<Detection>, Vec<Truth>)], iou_threshold: f64) -> Score {
    let mut order: Vec<(usize, usize)> =
        frames.iter().enumerate().flat_map(|(f, (d, _))| (0..d.len()).map(move |i| (f, i))).collect();
    order.sort_by(|&(fa, ia), &(fb, ib)| frames[fb].0[ib].score.total_cmp(&frames[fa].0[ia].score));

    let truths: usize = frames.iter().map(|(_, t)| t.len()).sum();
    let mut taken: Vec<Vec<bool>> = frames.iter().map(|(_, t)| vec![false; t.len()]).collect();
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut range_err, mut angle_err) = (0.0, 0.0);
    let (mut ap, mut last_recall) = (0.0, 0.0);

    let mut k = 0;
    while k < order.len() {
        // Detections with equal scores enter the curve together.
        let score = frames[order[k].0].0[order[k].1].score;
        while k < order.len() && frames[order[k].0].0[order[k].1].score == score {
            let (f, i) = order[k];
            let det = frames[f].0[i];
            let xy = det.cartesian();
            let best = frames[f]
                .1
                .iter()
                .enumerate()
                .filter(|(j, _)| !taken[f][*j])
                .map(|(j, t)| (j, box_iou(xy, polar_to_xy(t.range, t.azimuth))))
                .fold(None, |acc: Option<(usize, f64)>, (j, iou)| match acc {
                    Some((_, b)) if b >= iou => acc,
                    _ => Some((j, iou)),
                });
            match best {
                Some((j, iou)) if iou >= iou_threshold => {
                    taken[f][j] = true;
                    tp += 1;
                    range_err += (det.range - frames[f].1[j].range).abs();
                    angle_err += (det.azimuth - frames[f].1[j].azimuth).abs();
                }
                _ => fp += 1,
            }
            k += 1;
        }
        if truths > 0 {
            let recall = tp as f64 / truths as f64;
            ap += (recall - last_recall) * tp as f64 / (tp + fp) as f64;
            last_recall = recall;
        }
    }

    let (ap, ar) = if truths == 0 { (if fp == 0 { 100.0 } else { 0.0 }, 100.0) } else { (100.0 * ap, 100.0 * last_recall) };
    let mae = |s: f64| if tp == 0 { f64::NAN } else { s / tp as f64 };
    Score {
        ap,
        ar,
        range_mae: mae(range_err),
        angle_mae: mae(angle_err),
        true_positives: tp,
        false_positives: fp,
        truths,
    }
}

/// Cell counts of a binary free-space comparison; "positive" is free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SegCounts {
    pub both_free: usize,
    pub pred_only: usize,
    pub truth_only: usize,
    pub both_occupied: usize,
}

impl SegCounts {
    /// Adds the cells of rows lying entirely within `range_limit`.
    pub fn accumulate(&mut self, pred: &[bool], truth: &[bool], grid: &CellGrid, range_limit: f64) -> Result<()> {
        if pred.len() != grid.cells() || truth.len() != grid.cells() {
            return Err(Error::ShapeMismatch(format!(
                "segmentation masks of {} and {} cells on a {}x{} grid",
                pred.len(),
                truth.len(),
                grid.rows,
                grid.cols
            )));
        }
        let rows = (0..grid.rows).take_while(|&r| (r + 1) as f64 * grid.cell_range <= range_limit + 1e-9).count();
        for (&p, &t) in pred.iter().zip(truth).take(rows * grid.cols) {
            match (p, t) {
                (true, true) => self.both_free += 1,
                (true, false) => self.pred_only += 1,
                (false, true) => self.truth_only += 1,
                (false, false) => self.both_occupied += 1,
            }
        }
        Ok(())
    }

    /// Mean of the free and occupied IoUs, percent. An empty union counts as
    /// a perfect score for that class.
    pub fn miou(&self) -> f64 {
        let iou = |inter: usize| {
            let union = inter + self.pred_only + self.truth_only;
            if union == 0 {
                1.0
            } else {
                inter as f64 / union as f64
            }
        };
        50.0 * (iou(self.both_free) + iou(self.both_occupied))
    }
}

pub fn miou(pred: &[bool], truth: &[bool], grid: &CellGrid, range_limit: f64) -> Result<f64> {
    let mut c = SegCounts::default();
    c.accumulate(pred, truth, grid, range_limit)?;
    Ok(c.miou())
}

/// `ap * ar / (ap + ar)`. This is half the usual harmonic mean, kept as
/// defined for comparability with published figures.
pub fn f1(ap: f64, ar: f64) -> Result<f64> {
    if ap < 0.0 || ar < 0.0 || ap.is_nan() || ar.is_nan() {
        return Err(Error::InvalidConfig(format!("scores must be non-negative, got {ap} and {ar}")));
    }
    if ap == 0.0 && ar == 0.0 {
        return Err(Error::BothZero);
    }
    Ok(ap * ar / (ap + ar))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    /// Detection score cut. Defaults to the break-even score of the default
    /// focal loss (about 0.373): with positives down-weighted, a cell that is
    /// positive half of the time scores below 0.5.
    pub threshold: f64,
    pub nms_radius: f64,
    pub iou_threshold: f64,
    pub range_limit: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            threshold: TrainConfig::default().decision_threshold(),
            nms_radius: 2.0,
            iou_threshold: 0.5,
            range_limit: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ap: f64,
    pub ar: f64,
    pub f1: f64,
    pub range_mae: f64,
    pub angle_mae: f64,
    pub miou: f64,
}

/// Scores logit outputs against the scenes (and free-space masks) they came
/// from. Returns the report and the per-frame detections.
pub fn evaluate(
    outputs: &[HeadOutputs<f64>],
    scenes: &[Scene],
    seg_truth: &[&Tensor<f64>],
    cfg: &ValidatedConfig,
    params: &EvalParams,
) -> Result<(EvalReport, Vec<Vec<Detection>>)> {
    if outputs.len() != scenes.len() || outputs.len() != seg_truth.len() {
        return Err(Error::ShapeMismatch(format!("{} outputs for {} scenes", outputs.len(), scenes.len())));
    }
    let seg_grid = CellGrid::segmentation(cfg);
    let mut frames = Vec::with_capacity(outputs.len());
    let mut counts = SegCounts::default();
    for ((out, scene), truth) in outputs.iter().zip(scenes).zip(seg_truth) {
        frames.push((decode_outputs(out, cfg, params.threshold, params.nms_radius)?, Truth::from_scene(scene)));
        let pred: Vec<bool> = out.seg.data().iter().map(|&z| z > 0.0).collect();
        let truth: Vec<bool> = truth.data().iter().map(|&v| v >= 0.5).collect();
        counts.accumulate(&pred, &truth, &seg_grid, params.range_limit)?;
    }
    let s = match_and_score(&frames, params.iou_threshold);
    let report = EvalReport {
        ap: s.ap,
        ar: s.ar,
        f1: f1(s.ap, s.ar).unwrap_or(0.0),
        range_mae: s.range_mae,
        angle_mae: s.angle_mae,
        miou: counts.miou(),
    };
    Ok((report, frames.into_iter().map(|(d, _)| d).collect()))
}

/// Runs `model` over `data` and scores it against the samples' scenes and
/// free-space masks.
pub fn evaluate_model<T: Scalar>(
    model: &mut FftRadNet<T>,
    data: &[Sample],
    params: &EvalParams,
) -> Result<(EvalReport, Vec<Vec<Detection>>)> {
    let outputs = predict(model, data, 8)?;
    let scenes: Vec<Scene> = data.iter().map(|s| s.scene.clone()).collect();
    let seg: Vec<&Tensor<f64>> = data.iter().map(|s| &s.truth.seg).collect();
    let cfg = model.config.clone();
    evaluate(&outputs, &scenes, &seg, &cfg, params)
}

pub fn write_detections_csv(frames: &[Vec<Detection>], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frame_id", "range_m", "azimuth_deg", "score"]).map_err(|e| Error::Format(e.to_string()))?;
    for (f, dets) in frames.iter().enumerate() {
        for d in dets {
            w.write_record([f.to_string(), format!("{:.4}", d.range), format!("{:.4}", d.azimuth), format!("{:.6}", d.score)])
                .map_err(|e| Error::Format(e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RadarConfig;
    use crate::nn::gt::encode_ground_truth;
    use crate::sim::PointTarget;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy() -> ValidatedConfig {
        RadarConfig::toy().validate().unwrap()
    }

    fn det(range: f64, azimuth: f64, score: f64) -> Detection {
        Detection { range, azimuth, score }
    }

    #[test]
    fn single_cell_decodes_to_its_center() {
        let cfg = toy();
        let grid = CellGrid::detection(&cfg);
        let mut clas = Tensor::zeros([1, 1, grid.rows, grid.cols]);
        clas.set(0, 0, 5, 7, 0.9);
        let reg = Tensor::zeros([1, 2, grid.rows, grid.cols]);
        let d = decode(&clas, &reg, &grid, 0.5, 2.0).unwrap();
        let (r, a) = grid.center(5, 7);
        assert_eq!(d, vec![det(r, a, 0.9)]);
        assert!(decode(&Tensor::zeros(clas.shape()), &reg, &grid, 0.5, 2.0).unwrap().is_empty());
        assert!(matches!(decode(&clas, &Tensor::zeros([1, 2, 3, 3]), &grid, 0.5, 2.0), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn nms_keeps_the_strongest_neighbor() {
        let cfg = toy();
        let grid = CellGrid::detection(&cfg);
        let mut clas = Tensor::zeros([1, 1, grid.rows, grid.cols]);
        clas.set(0, 0, 10, 8, 0.7);
        clas.set(0, 0, 11, 8, 0.8);
        clas.set(0, 0, 25, 8, 0.6);
        let reg = Tensor::zeros([1, 2, grid.rows, grid.cols]);
        let d = decode(&clas, &reg, &grid, 0.5, 2.0).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].score, 0.8);
        assert_eq!(d[1].score, 0.6);
    }

    fn perfect_prediction(scene: &Scene, cfg: &ValidatedConfig) -> Vec<Detection> {
        let gt = encode_ground_truth(scene, cfg).unwrap();
        decode(&gt.clas, &gt.reg, &CellGrid::detection(cfg), 0.5, 2.0).unwrap()
    }

    #[test]
    fn ground_truth_round_trip() {
        let cfg = toy();
        let scene = Scene::noiseless(vec![PointTarget::new(4.37, 1.0, -12.3), PointTarget::new(10.05, -2.0, 30.9)]);
        let mut dets = perfect_prediction(&scene, &cfg);
        dets.sort_by(|a, b| a.range.total_cmp(&b.range));
        assert_eq!(dets.len(), 2);
        for (d, t) in dets.iter().zip(&scene.targets) {
            assert!((d.range - t.range).abs() <= cfg.range_res / 2.0);
            assert!((d.azimuth - t.azimuth).abs() <= cfg.azimuth_bin_width() / 2.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn perfect_reconstruction_scores_full_marks(
            targets in proptest::collection::vec((1.0f64..11.8, -44.0f64..44.0), 1..4)
        ) {
            let cfg = toy();
            let grid = CellGrid::detection(&cfg);
            let targets: Vec<PointTarget> = targets.into_iter().map(|(r, a)| PointTarget::new(r, 0.0, a)).collect();
            // well separated: cells more than two apart and outside each other's NMS radius
            for (i, p) in targets.iter().enumerate() {
                for q in &targets[..i] {
                    let (cp, cq) = (grid.locate(p.range, p.azimuth).unwrap(), grid.locate(q.range, q.azimuth).unwrap());
                    prop_assume!(cp.0.abs_diff(cq.0) > 2 || cp.1.abs_diff(cq.1) > 2);
                    let ((x0, y0), (x1, y1)) = (p.cartesian(), q.cartesian());
                    prop_assume!((x0 - x1).hypot(y0 - y1) > 2.5);
                }
            }
            let scene = Scene::noiseless(targets);
            let s = match_and_score(&[(perfect_prediction(&scene, &cfg), Truth::from_scene(&scene))], 0.5);
            prop_assert_eq!(s.ap, 100.0);
            prop_assert_eq!(s.ar, 100.0);
        }

        #[test]
        fn miou_is_symmetric_and_label_invariant(bits in proptest::collection::vec(any::<(bool, bool)>(), 64 * 32)) {
            let grid = CellGrid::segmentation(&toy());
            let (p, t): (Vec<bool>, Vec<bool>) = bits.into_iter().unzip();
            let m = miou(&p, &t, &grid, 50.0).unwrap();
            prop_assert_eq!(m, miou(&t, &p, &grid, 50.0).unwrap());
            let flip = |v: &[bool]| v.iter().map(|b| !b).collect::<Vec<_>>();
            prop_assert!((m - miou(&flip(&p), &flip(&t), &grid, 50.0).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=100.0).contains(&m));
        }

        #[test]
        fn ap_and_ar_fall_as_threshold_rises(seed in any::<u64>()) {
            let frames = random_frames(seed, 8);
            let mut last = (f64::INFINITY, f64::INFINITY);
            for cut in [0.0, 0.2, 0.4, 0.6, 0.8] {
                let kept: Vec<_> = frames.iter().map(|(d, t)| (d.iter().copied().filter(|x| x.score >= cut).collect(), t.clone())).collect();
                let s = match_and_score(&kept, 0.5);
                prop_assert!(s.ap <= last.0 + 1e-9 && s.ar <= last.1 + 1e-9);
                prop_assert!((0.0..=100.0).contains(&s.ap));
                last = (s.ap, s.ar);
            }
        }
    }

    #[test]
    fn trivial_scores() {
        let t = vec![Truth { range: 8.0, azimuth: 3.0 }];
        let s = match_and_score(&[(vec![det(8.0, 3.0, 0.9)], t.clone())], 0.5);
        assert_eq!((s.ap, s.ar, s.range_mae, s.angle_mae), (100.0, 100.0, 0.0, 0.0));
        let s = match_and_score(&[(vec![], t)], 0.5);
        assert_eq!(s.ar, 0.0);
    }

    #[test]
    fn box_iou_of_offset_boxes() {
        assert_eq!(box_iou((5.0, 0.0), (5.0, 0.0)), 1.0);
        // half-length overlap along x: 2.0 * 1.8 / (2 * 7.2 - 3.6)
        assert!((box_iou((5.0, 0.0), (7.0, 0.0)) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(box_iou((5.0, 0.0), (5.0, 2.0)), 0.0);
    }

    fn random_frames(seed: u64, n: usize) -> Vec<(Vec<Detection>, Vec<Truth>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let truths: Vec<Truth> =
                    (0..rng.random_range(0..3)).map(|_| Truth { range: rng.random_range(2.0..12.0), azimuth: rng.random_range(-40.0..40.0) }).collect();
                let mut dets = Vec::new();
                for t in &truths {
                    if rng.random_bool(0.8) {
                        dets.push(det(t.range + rng.random_range(-1.5..1.5), t.azimuth + rng.random_range(-3.0..3.0), rng.random_range(0.0..1.0)));
                    }
                }
                for _ in 0..rng.random_range(0..3) {
                    // quantized scores make ties likely
                    let score = (rng.random_range(0.0..1.0f64) * 10.0).round() / 10.0;
                    dets.push(det(rng.random_range(2.0..12.0), rng.random_range(-40.0..40.0), score));
                }
                (dets, truths)
            })
            .collect()
    }

    /// Precision and recall at every distinct threshold, recomputed from
    /// scratch, integrated as a step function.
    fn brute_force_ap(frames: &[(Vec<Detection>, Vec<Truth>)]) -> f64 {
        let mut cuts: Vec<f64> = frames.iter().flat_map(|(d, _)| d.iter().map(|x| x.score)).collect();
        cuts.sort_by(|a, b| b.total_cmp(a));
        cuts.dedup();
        let truths: usize = frames.iter().map(|(_, t)| t.len()).sum();
        let (mut ap, mut last_recall) = (0.0, 0.0);
        for cut in cuts {
            let kept: Vec<_> = frames.iter().map(|(d, t)| (d.iter().copied().filter(|x| x.score >= cut).collect::<Vec<_>>(), t.clone())).collect();
            let s = match_and_score(&kept, 0.5);
            let recall = s.true_positives as f64 / truths as f64;
            let precision = s.true_positives as f64 / (s.true_positives + s.false_positives) as f64;
            ap += (recall - last_recall) * precision;
            last_recall = recall;
        }
        100.0 * ap
    }

    #[test]
    fn ap_matches_brute_force_integration() {
        for seed in 0..10 {
            let frames = random_frames(seed, 20);
            let s = match_and_score(&frames, 0.5);
            assert!((s.ap - brute_force_ap(&frames)).abs() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn miou_cases() {
        let grid = CellGrid { rows: 4, cols: 4, cell_range: 1.0, cell_azimuth: 1.0, azimuth_start: 0.0 };
        let a: Vec<bool> = (0..16).map(|i| i % 4 < 2).collect();
        assert_eq!(miou(&a, &a, &grid, 50.0).unwrap(), 100.0);
        let not_a: Vec<bool> = a.iter().map(|b| !b).collect();
        assert_eq!(miou(&a, &not_a, &grid, 50.0).unwrap(), 0.0);
        // stripes: columns {0,1} vs {1,2} free. Free: 4 / 12; occupied: 4 / 12.
        let b: Vec<bool> = (0..16).map(|i| (1..3).contains(&(i % 4))).collect();
        assert!((miou(&a, &b, &grid, 50.0).unwrap() - 100.0 / 3.0).abs() < 1e-12);
        // rows beyond the limit are ignored
        let mut c = a.clone();
        c[15] = !c[15];
        assert_eq!(miou(&a, &c, &grid, 3.0).unwrap(), 100.0);
        assert!(matches!(miou(&a[..8], &a, &grid, 50.0), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn f1_cases() {
        assert_eq!(f1(50.0, 50.0).unwrap(), 25.0);
        assert!((f1(96.84, 82.18).unwrap() - 44.46).abs() < 0.01);
        assert_eq!(f1(80.0, 0.0).unwrap(), 0.0);
        assert!(matches!(f1(0.0, 0.0), Err(Error::BothZero)));
    }

    #[test]
    fn detections_csv_layout() {
        let mut buf = Vec::new();
        write_detections_csv(&[vec![det(4.0, -2.5, 0.75)], vec![]], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "frame_id,range_m,azimuth_deg,score\n0,4.0000,-2.5000,0.750000\n");
    }
}
