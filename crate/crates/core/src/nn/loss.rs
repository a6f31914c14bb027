//! Detection and free-space losses.
//!
//! Scalar functions take probabilities and validate them. The training path
//! works on logits and returns gradients w.r.t. the logits, which avoids
//! differentiating through a saturated sigmoid.
//!
//! The focal loss weights positives by `alpha` and negatives by 1, so that
//! `gamma = 0, alpha = 1` is exactly binary cross-entropy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::layers::sigmoid;
use crate::nn::model::HeadOutputs;
use crate::nn::tensor::{Scalar, Tensor};

const P_EPS: f64 = 1e-12;

fn check_prob(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    Ok(p.clamp(P_EPS, 1.0 - P_EPS))
}

pub fn bce(y: f64, p: f64) -> Result<f64> {
    let p = check_prob(p)?;
    Ok(-(y * p.ln() + (1.0 - y) * (1.0 - p).ln()))
}

pub fn focal(y: f64, p: f64, alpha: f64, gamma: f64) -> Result<f64> {
    let p = check_prob(p)?;
    Ok(if y >= 0.5 { -alpha * (1.0 - p).powf(gamma) * p.ln() } else { -p.powf(gamma) * (1.0 - p).ln() })
}

pub fn smooth_l1(x: f64) -> f64 {
    if x.abs() < 1.0 {
        0.5 * x * x
    } else {
        x.abs() - 0.5
    }
}

fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// BCE of `sigmoid(z)` and its derivative w.r.t. `z`.
pub fn bce_logit(y: f64, z: f64) -> (f64, f64) {
    (softplus(z) - y * z, sigmoid(z) - y)
}

/// Focal loss of `sigmoid(z)` and its derivative w.r.t. `z`.
pub fn focal_logit(y: f64, z: f64, alpha: f64, gamma: f64) -> (f64, f64) {
    let p = sigmoid(z);
    if y >= 0.5 {
        let (q, ln_p) = (1.0 - p, -softplus(-z));
        let w = q.powf(gamma);
        (-alpha * w * ln_p, alpha * w * (gamma * p * ln_p - q))
    } else {
        let (q, ln_q) = (1.0 - p, -softplus(z));
        let w = p.powf(gamma);
        (-w * ln_q, w * (p - gamma * q * ln_q))
    }
}

/// Loss weights and optimizer schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Weight of the free-space loss.
    pub lambda: f64,
    /// Weight of the regression loss.
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay applied every `decay_every` epochs.
    pub decay: f64,
    pub decay_every: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 100.0,
            beta: 100.0,
            gamma: 2.0,
            alpha: 0.25,
            learning_rate: 1e-4,
            decay: 0.9,
            decay_every: 10,
            epochs: 100,
            batch_size: 4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.lambda, self.beta, self.gamma, self.alpha, self.learning_rate, self.decay];
        if positive.iter().any(|v| !(*v >= 0.0) || !v.is_finite())
            || self.alpha <= 0.0
            || self.learning_rate <= 0.0
            || self.decay <= 0.0
            || self.decay_every == 0
            || self.batch_size == 0
        {
            return Err(Error::InvalidConfig("train config values must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let tc: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        tc.validate()?;
        Ok(tc)
    }

    /// Schedule for the desk-scale run on the toy preset: 30 epochs at a
    /// higher, faster-decaying rate. `lambda` is the default 100 spread over
    /// the 64 x 32 free-space cells of the toy grid, i.e. the default weight
    /// applied to a per-cell mean, and `beta` is lowered so the regression
    /// sum does not drown the classification gradient in the shared trunk.
    pub fn toy() -> Self {
        Self {
            lambda: 100.0 / 2048.0,
            beta: 10.0,
            learning_rate: 3e-3,
            decay: 0.7,
            decay_every: 5,
            epochs: 30,
            ..Self::default()
        }
    }

    /// Learning rate for zero-based `epoch`.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.decay.powi((epoch / self.decay_every) as i32)
    }

    /// The score at which this focal loss is indifferent between the labels.
    pub fn decision_threshold(&self) -> f64 {
        focal_break_even(self.alpha, self.gamma)
    }
}

/// Minimizer of `focal(1, p) + focal(0, p)` over `p`: the score a model
/// trained with this loss assigns to a cell that is positive half of the
/// time. 0.5 for BCE; below 0.5 whenever `alpha < 1`.
pub fn focal_break_even(alpha: f64, gamma: f64) -> f64 {
    // derivative of the objective; negative near 0, positive near 1
    let slope = |p: f64| {
        let q = 1.0 - p;
        alpha * gamma * q.powf(gamma - 1.0) * p.ln() - alpha * q.powf(gamma) / p - gamma * p.powf(gamma - 1.0) * q.ln()
            + p.powf(gamma) / q
    };
    let (mut a, mut b) = (1e-12, 1.0 - 1e-12);
    for _ in 0..100 {
        let m = (a + b) / 2.0;
        if slope(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    (a + b) / 2.0
}

/// Dense targets for a batch; `clas`/`seg` are 0/1 masks.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub clas: Tensor<f64>,
    pub reg: Tensor<f64>,
    pub seg: Tensor<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossValues {
    pub l_det: f64,
    pub l_free: f64,
    pub l_mtl: f64,
}

/// `sum focal(y_clas, p_clas) + beta * sum_{y_clas = 1} smooth-L1(y_reg - reg)`
/// on probability maps.
pub fn detection_loss(
    p_clas: &[f64],
    y_clas: &[f64],
    reg: &[f64],
    y_reg: &[f64],
    tc: &TrainConfig,
) -> Result<f64> {
    if p_clas.len() != y_clas.len() || reg.len() != y_reg.len() || reg.len() != 2 * p_clas.len() {
        return Err(Error::ShapeMismatch("detection loss inputs".into()));
    }
    let cells = p_clas.len();
    let mut total = 0.0;
    for (i, (&p, &y)) in p_clas.iter().zip(y_clas).enumerate() {
        total += focal(y, p, tc.alpha, tc.gamma)?;
        if y >= 0.5 {
            for k in 0..2 {
                total += tc.beta * smooth_l1(y_reg[k * cells + i] - reg[k * cells + i]);
            }
        }
    }
    Ok(total)
}

/// `sum BCE(y_seg, p_seg)` over the segmentation grid.
pub fn seg_loss(p_seg: &[f64], y_seg: &[f64]) -> Result<f64> {
    if p_seg.len() != y_seg.len() {
        return Err(Error::ShapeMismatch("segmentation loss inputs".into()));
    }
    p_seg.iter().zip(y_seg).map(|(&p, &y)| bce(y, p)).sum()
}

pub fn mtl_loss(l_det: f64, l_free: f64, lambda: f64) -> f64 {
    l_det + lambda * l_free
}

/// Multi-task loss summed over the batch, with gradients w.r.t. the head
/// outputs (logits for `clas` and `seg`).
pub fn mtl_loss_logits<T: Scalar>(out: &HeadOutputs<T>, y: &Targets, tc: &TrainConfig) -> Result<(LossValues, HeadOutputs<T>)> {
    out.clas.ensure_shape(y.clas.shape(), "classification map")?;
    out.reg.ensure_shape(y.reg.shape(), "regression map")?;
    out.seg.ensure_shape(y.seg.shape(), "segmentation map")?;
    let [n, _, h, w] = y.clas.shape();
    let cells = h * w;

    let mut l_det = 0.0;
    let mut g_clas = Tensor::zeros(out.clas.shape());
    let mut g_reg = Tensor::zeros(out.reg.shape());
    for b in 0..n {
        let (z, yc) = (out.clas.item(b), y.clas.item(b));
        let (r, yr) = (out.reg.item(b), y.reg.item(b));
        let gc = g_clas.item_mut(b);
        for i in 0..cells {
            let (l, g) = focal_logit(yc[i], z[i].f64(), tc.alpha, tc.gamma);
            l_det += l;
            gc[i] = T::of(g);
        }
        let gr = g_reg.item_mut(b);
        for i in (0..cells).filter(|&i| yc[i] >= 0.5) {
            for k in 0..2 {
                let d = r[k * cells + i].f64() - yr[k * cells + i];
                l_det += tc.beta * smooth_l1(d);
                gr[k * cells + i] = T::of(tc.beta * smooth_l1_grad(d));
            }
        }
    }

    let mut l_free = 0.0;
    let mut g_seg = Tensor::zeros(out.seg.shape());
    for ((g, &z), &ys) in g_seg.data_mut().iter_mut().zip(out.seg.data()).zip(y.seg.data()) {
        let (l, d) = bce_logit(ys, z.f64());
        l_free += l;
        *g = T::of(tc.lambda * d);
    }
    let values = LossValues { l_det, l_free, l_mtl: mtl_loss(l_det, l_free, tc.lambda) };
    if !values.l_mtl.is_finite() {
        return Err(Error::Numerical(format!("non-finite loss {values:?}")));
    }
    Ok((values, HeadOutputs { clas: g_clas, reg: g_reg, seg: g_seg }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::random_tensor;

    #[test]
    fn break_even_scores() {
        // gamma = 0: -alpha ln p - ln(1 - p) is minimal at alpha / (1 + alpha)
        assert!((focal_break_even(1.0, 0.0) - 0.5).abs() < 1e-9);
        assert!((focal_break_even(0.25, 0.0) - 0.2).abs() < 1e-9);
        // bounded scalar minimization of the same objective in double precision
        assert!((TrainConfig::default().decision_threshold() - 0.373387).abs() < 1e-5);
    }

    #[test]
    fn scalar_examples() {
        assert!((bce(1.0, 0.5).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(smooth_l1(0.5), 0.125);
        assert_eq!(smooth_l1(2.0), 1.5);
        let f = focal(1.0, 0.9, 0.25, 2.0).unwrap();
        let reference = 0.25 * 0.1f64.powi(2) * -(0.9f64.ln());
        assert!((f - reference).abs() < 1e-15);
        assert!((f - 2.634e-4).abs() < 1e-7);
        assert!(matches!(bce(1.0, 1.5), Err(Error::ProbabilityOutOfRange(_))));
        assert!(matches!(focal(0.0, -0.1, 0.25, 2.0), Err(Error::ProbabilityOutOfRange(_))));
    }

    #[test]
    fn logit_forms_agree_with_probability_forms() {
        for &z in &[-8.0, -1.3, 0.0, 0.4, 3.0, 12.0] {
            for &y in &[0.0, 1.0] {
                let p = sigmoid(z);
                assert!((bce_logit(y, z).0 - bce(y, p).unwrap()).abs() < 1e-9);
                assert!((focal_logit(y, z, 0.25, 2.0).0 - focal(y, p, 0.25, 2.0).unwrap()).abs() < 1e-9);
                let h = 1e-6;
                let fd = (focal_logit(y, z + h, 0.25, 2.0).0 - focal_logit(y, z - h, 0.25, 2.0).0) / (2.0 * h);
                assert!((focal_logit(y, z, 0.25, 2.0).1 - fd).abs() < 1e-6, "z {z} y {y}");
                let fd = (bce_logit(y, z + h).0 - bce_logit(y, z - h).0) / (2.0 * h);
                assert!((bce_logit(y, z).1 - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn focal_reduces_to_bce() {
        let tc = TrainConfig { gamma: 0.0, alpha: 1.0, beta: 0.0, ..TrainConfig::default() };
        let p: Vec<f64> = (0..20).map(|i| (i as f64 + 0.5) / 20.0).collect();
        let y: Vec<f64> = (0..20).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let det = detection_loss(&p, &y, &[0.0; 40], &[0.0; 40], &tc).unwrap();
        assert!((det - seg_loss(&p, &y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_leaves_detection_loss() {
        let clas = random_tensor([2, 1, 4, 4], 1);
        let reg = random_tensor([2, 2, 4, 4], 2);
        let seg = random_tensor([2, 1, 8, 8], 3);
        let mask = |t: &Tensor<f64>| t.map(|v| (v > 0.3) as u8 as f64);
        let y = Targets { clas: mask(&random_tensor([2, 1, 4, 4], 4)), reg: random_tensor([2, 2, 4, 4], 5), seg: mask(&random_tensor([2, 1, 8, 8], 6)) };
        let out = HeadOutputs { clas, reg, seg };
        let tc = TrainConfig { lambda: 0.0, ..TrainConfig::default() };
        let (v, _) = mtl_loss_logits(&out, &y, &tc).unwrap();
        assert_eq!(v.l_mtl, v.l_det);

        // and the logit path matches the probability path
        let p: Vec<f64> = out.clas.data().iter().map(|&z| sigmoid(z)).collect();
        let mut det = 0.0;
        for b in 0..2 {
            det += detection_loss(&p[b * 16..(b + 1) * 16], y.clas.item(b), out.reg.item(b), y.reg.item(b), &tc).unwrap();
        }
        assert!((det - v.l_det).abs() < 1e-9 * det.abs().max(1.0));
        let ps: Vec<f64> = out.seg.data().iter().map(|&z| sigmoid(z)).collect();
        assert!((seg_loss(&ps, y.seg.data()).unwrap() - v.l_free).abs() < 1e-9);
    }

    #[test]
    fn learning_rate_schedule() {
        let tc = TrainConfig::default();
        assert_eq!(tc.learning_rate_at(0), 1e-4);
        assert_eq!(tc.learning_rate_at(9), 1e-4);
        assert!((tc.learning_rate_at(10) - 0.9e-4).abs() < 1e-18);
        assert!((tc.learning_rate_at(25) - 0.81e-4).abs() < 1e-18);
    }
}
