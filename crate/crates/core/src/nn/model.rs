//! FFT-RadNet: MIMO pre-encoder, residual pyramid encoder, range-angle
//! decoder, and detection / free-space segmentation heads.
//!
//! Shapes for a `(n, 2 * n_rx, b_r, b_d)` input, with `A = b_a / 4`:
//!
//! ```text
//! pre-encoder    (n, pre_out, b_r, b_d)
//! pyramid x_i    (n, 4 * w_i, b_r / 2^i, b_d / 2^i)          i = 1..4
//! T_i            1x1 conv to A channels, channel <-> width swap:
//!                (n, b_d / 2^i, b_r / 2^i, A)                 i = 2..4
//! decoder        deconv(T4) ++ T3 -> block; deconv ++ T2 -> block
//! latent         (n, dec[1], b_r / 4, A)
//! detection      (n, 1, b_r / 4, b_a / 8), (n, 2, b_r / 4, b_a / 8)
//! segmentation   (n, 1, b_r / 2, b_a / 4)
//! ```
//!
//! Classification and segmentation maps are returned as logits; apply
//! [`sigmoid`](crate::nn::layers::sigmoid) for probabilities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ValidatedConfig;
use crate::error::{Error, Result};
use crate::mimo::atrous_equivalence_weights;
use crate::nn::block::{residual_stage, EXPANSION};
use crate::nn::conv::{Conv2d, ConvTranspose2d};
use crate::nn::layers::{conv_bn_relu, swap_channel_width, BatchNorm2d, Relu};
use crate::nn::module::{Cost, Mode, Module, ParamKind, Sequential};
use crate::nn::tensor::{Scalar, Tensor};

/// Architecture knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Channels after the 3x3 combine layer of the pre-encoder.
    pub pre_encoder_out_channels: usize,
    pub fpn_depths: [usize; 4],
    /// Bottleneck widths per stage; stage outputs are 4x wider.
    pub fpn_widths: [usize; 4],
    pub decoder_channels: [usize; 2],
    /// Azimuth width of the range-angle latent; must be `b_a / 4`.
    /// Derived from the config when absent.
    #[serde(default)]
    pub azimuth_width: Option<usize>,
    pub detection_widths: [usize; 4],
    pub segmentation_widths: [usize; 2],
}

impl ModelSpec {
    pub fn paper() -> Self {
        Self {
            pre_encoder_out_channels: 192,
            fpn_depths: [3, 6, 6, 3],
            fpn_widths: [64, 80, 96, 112],
            decoder_channels: [128, 256],
            azimuth_width: None,
            detection_widths: [144, 96, 96, 96],
            segmentation_widths: [128, 64],
        }
    }

    /// Desk-scale network for the toy preset.
    pub fn toy() -> Self {
        Self {
            pre_encoder_out_channels: 32,
            fpn_depths: [2, 2, 2, 1],
            fpn_widths: [16, 20, 24, 28],
            decoder_channels: [32, 48],
            azimuth_width: None,
            detection_widths: [48, 32, 32, 32],
            segmentation_widths: [16, 16],
        }
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Checks the spec against a radar config and returns the latent azimuth width.
    pub fn check(&self, cfg: &ValidatedConfig) -> Result<usize> {
        let bad = |m: String| Err(Error::SpecInconsistent(m));
        if cfg.b_r % 16 != 0 || cfg.b_d % 16 != 0 {
            return bad(format!("b_r = {} and b_d = {} must be multiples of 16", cfg.b_r, cfg.b_d));
        }
        if cfg.b_a % 8 != 0 {
            return bad(format!("b_a = {} must be a multiple of 8", cfg.b_a));
        }
        let a = cfg.b_a / 4;
        if let Some(w) = self.azimuth_width {
            if w != a {
                return bad(format!("azimuth_width {w} must equal b_a / 4 = {a}"));
            }
        }
        let pre = [self.pre_encoder_out_channels];
        let mut widths = pre
            .iter()
            .chain(&self.fpn_widths)
            .chain(&self.decoder_channels)
            .chain(&self.detection_widths)
            .chain(&self.segmentation_widths);
        if widths.any(|&w| w == 0) || self.fpn_depths.iter().any(|&d| d == 0) {
            return bad("all widths and depths must be positive".into());
        }
        Ok(a)
    }
}

/// Head outputs; `clas` and `seg` are logits.
#[derive(Debug, Clone)]
pub struct HeadOutputs<T> {
    pub clas: Tensor<T>,
    pub reg: Tensor<T>,
    pub seg: Tensor<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadShapes {
    pub clas: [usize; 4],
    pub reg: [usize; 4],
    pub seg: [usize; 4],
}

pub struct FftRadNet<T: Scalar> {
    pub spec: ModelSpec,
    pub config: ValidatedConfig,
    pre: Sequential<T>,
    stages: Vec<Sequential<T>>,
    lateral: Vec<Conv2d<T>>,
    deconv4: ConvTranspose2d<T>,
    block4: Sequential<T>,
    deconv3: ConvTranspose2d<T>,
    block3: Sequential<T>,
    trunk: Sequential<T>,
    clas: Conv2d<T>,
    reg: Conv2d<T>,
    seg_up: ConvTranspose2d<T>,
    seg: Sequential<T>,
    split: Option<([usize; 2], [usize; 2])>,
}

/// Builds the network with weights drawn from `ChaCha8Rng::seed_from_u64(seed)`.
pub fn build_fftradnet<T: Scalar>(spec: &ModelSpec, cfg: &ValidatedConfig, seed: u64) -> Result<FftRadNet<T>> {
    FftRadNet::new(spec, cfg, seed)
}

impl<T: Scalar> FftRadNet<T> {
    pub fn new(spec: &ModelSpec, cfg: &ValidatedConfig, seed: u64) -> Result<Self> {
        let a = spec.check(cfg)?;
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        let virt = 2 * cfg.virtual_antennas();
        let pre = Sequential::new()
            // starts as the exact de-interleaving gather and is trained from there
            .push(atrous_equivalence_weights::<T>(cfg).without_input_grad())
            .push(Conv2d::new(virt, spec.pre_encoder_out_channels, (3, 3), rng).same().no_bias())
            .push(BatchNorm2d::new(spec.pre_encoder_out_channels))
            .push(Relu::new());

        let mut stages = Vec::new();
        let mut c = spec.pre_encoder_out_channels;
        for (&w, &depth) in spec.fpn_widths.iter().zip(&spec.fpn_depths) {
            stages.push(residual_stage(c, w, depth, 2, rng));
            c = w * EXPANSION;
        }
        let outs = spec.fpn_widths.map(|w| w * EXPANSION);
        let lateral = (1..4).map(|i| Conv2d::new(outs[i], a, (1, 1), rng)).collect();

        let dopp = [cfg.b_d / 16, cfg.b_d / 8, cfg.b_d / 4];
        let [d0, d1] = spec.decoder_channels;
        let deconv4 = ConvTranspose2d::range_upsampler(dopp[0], dopp[0], rng);
        let block4 = two_conv_bn_relu(dopp[0] + dopp[1], d0, rng);
        let deconv3 = ConvTranspose2d::range_upsampler(d0, d0, rng);
        let block3 = two_conv_bn_relu(d0 + dopp[2], d1, rng);

        let [h0, h1, h2, h3] = spec.detection_widths;
        let trunk = Sequential::new()
            .push(conv_bn_relu(d1, h0, 3, (1, 1), rng))
            .push(conv_bn_relu(h0, h1, 3, (1, 2), rng))
            .push(conv_bn_relu(h1, h2, 3, (1, 1), rng))
            .push(conv_bn_relu(h2, h3, 3, (1, 1), rng));
        let mut clas = Conv2d::new(h3, 1, (3, 3), rng).same();
        // rare-positive prior so the focal loss starts near its optimum for background
        clas.bias.as_mut().expect("has bias").data_mut()[0] = T::of(-(99f64.ln()));
        let mut reg = Conv2d::new(h3, 2, (3, 3), rng).same();
        reg.weight = reg.weight.map(|v| v * T::of(0.1));

        let [s0, s1] = spec.segmentation_widths;
        let seg_up = ConvTranspose2d::range_upsampler(d1, d1, rng);
        let seg = Sequential::new()
            .push(conv_bn_relu(d1, s0, 3, (1, 1), rng))
            .push(conv_bn_relu(s0, s0, 3, (1, 1), rng))
            .push(conv_bn_relu(s0, s1, 3, (1, 1), rng))
            .push(conv_bn_relu(s1, s1, 3, (1, 1), rng))
            .push(Conv2d::new(s1, 1, (1, 1), rng));

        Ok(Self {
            spec: spec.clone(),
            config: cfg.clone(),
            pre,
            stages,
            lateral,
            deconv4,
            block4,
            deconv3,
            block3,
            trunk,
            clas,
            reg,
            seg_up,
            seg,
            split: None,
        })
    }

    pub fn input_shape(&self, batch: usize) -> [usize; 4] {
        [batch, 2 * self.config.n_rx, self.config.b_r, self.config.b_d]
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<HeadOutputs<T>> {
        x.ensure_shape(self.input_shape(x.shape()[0]), "network input")?;
        let mut h = self.pre.forward(x, mode)?;
        let mut pyramid = Vec::with_capacity(4);
        for stage in &mut self.stages {
            h = stage.forward(&h, mode)?;
            pyramid.push(h.clone());
        }
        let t: Vec<Tensor<T>> = self
            .lateral
            .iter_mut()
            .zip(&pyramid[1..])
            .map(|(l, x)| Ok(swap_channel_width(&l.forward(x, mode)?)))
            .collect::<Result<_>>()?;
        let (t2, t3, t4) = (&t[0], &t[1], &t[2]);

        let u4 = self.deconv4.forward(t4, mode)?;
        let s4 = self.block4.forward(&Tensor::concat_channels(&[&u4, t3])?, mode)?;
        let u3 = self.deconv3.forward(&s4, mode)?;
        let latent = self.block3.forward(&Tensor::concat_channels(&[&u3, t2])?, mode)?;
        self.split = Some(([u4.shape()[1], t3.shape()[1]], [u3.shape()[1], t2.shape()[1]]));

        let trunk = self.trunk.forward(&latent, mode)?;
        let clas = self.clas.forward(&trunk, mode)?;
        let reg = self.reg.forward(&trunk, mode)?;
        let seg = self.seg.forward(&self.seg_up.forward(&latent, mode)?, mode)?;
        Ok(HeadOutputs { clas, reg, seg })
    }

    /// Back-propagates head gradients (w.r.t. the logits) through the whole
    /// graph, accumulating parameter gradients; returns the input gradient.
    pub fn backward(&mut self, grads: &HeadOutputs<T>) -> Result<Tensor<T>> {
        let (s4_split, s3_split) =
            self.split.take().ok_or_else(|| Error::ShapeMismatch("network backward before forward".into()))?;
        let mut g_trunk = self.clas.backward(&grads.clas)?;
        g_trunk.add_assign(&self.reg.backward(&grads.reg)?)?;
        let mut g_latent = self.trunk.backward(&g_trunk)?;
        let g_seg = self.seg.backward(&grads.seg)?;
        g_latent.add_assign(&self.seg_up.backward(&g_seg)?)?;

        let g3 = self.block3.backward(&g_latent)?.split_channels(&s3_split)?;
        let g_s4 = self.deconv3.backward(&g3[0])?;
        let g4 = self.block4.backward(&g_s4)?.split_channels(&s4_split)?;
        let g_t4 = self.deconv4.backward(&g4[0])?;

        let g_t = [&g3[1], &g4[1], &g_t4];
        let mut g_pyr: Vec<Tensor<T>> = Vec::with_capacity(3);
        for (l, g) in self.lateral.iter_mut().zip(g_t) {
            g_pyr.push(l.backward(&swap_channel_width(g))?);
        }
        // stages 4..1, adding the lateral gradient of each pyramid level
        let mut g = self.stages[3].backward(&g_pyr[2])?;
        g.add_assign(&g_pyr[1])?;
        g = self.stages[2].backward(&g)?;
        g.add_assign(&g_pyr[0])?;
        g = self.stages[1].backward(&g)?;
        g = self.stages[0].backward(&g)?;
        self.pre.backward(&g)
    }

    /// Parameters and buffers with stable dotted names.
    pub fn visit(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind)) {
        self.pre.visit("pre", f);
        for (i, s) in self.stages.iter_mut().enumerate() {
            s.visit(&format!("fpn{}", i + 1), f);
        }
        for (i, l) in self.lateral.iter_mut().enumerate() {
            l.visit(&format!("lateral{}", i + 2), f);
        }
        self.deconv4.visit("dec.up4", f);
        self.block4.visit("dec.block4", f);
        self.deconv3.visit("dec.up3", f);
        self.block3.visit("dec.block3", f);
        self.trunk.visit("det.trunk", f);
        self.clas.visit("det.clas", f);
        self.reg.visit("det.reg", f);
        self.seg_up.visit("seg.up", f);
        self.seg.visit("seg.body", f);
    }

    pub fn zero_grad(&mut self) {
        self.visit(&mut |_, t, _| t.zero_grad());
    }

    pub fn parameter_count(&mut self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, t, kind| {
            if kind == ParamKind::Trainable {
                n += t.numel();
            }
        });
        n
    }

    /// Per-component cost for one input of `batch` frames, in execution order.
    pub fn cost_breakdown(&self, batch: usize) -> Result<Vec<(String, Cost)>> {
        let mut parts = Vec::new();
        let mut add = |name: &str, c: Cost| parts.push((name.to_string(), c));
        let pre = self.pre.cost(self.input_shape(batch))?;
        add("pre-encoder", pre);
        let mut shape = pre.out_shape;
        let mut pyramid = Vec::new();
        for (i, s) in self.stages.iter().enumerate() {
            let c = s.cost(shape)?;
            add(&format!("fpn{}", i + 1), c);
            shape = c.out_shape;
            pyramid.push(shape);
        }
        let mut t = Vec::new();
        for (i, l) in self.lateral.iter().enumerate() {
            let c = l.cost(pyramid[i + 1])?;
            add(&format!("lateral{}", i + 2), c);
            let [n, ch, h, w] = c.out_shape;
            t.push([n, w, h, ch]);
        }
        let u4 = self.deconv4.cost(t[2])?;
        let b4 = self.block4.cost(cat(u4.out_shape, t[1])?)?;
        let u3 = self.deconv3.cost(b4.out_shape)?;
        let b3 = self.block3.cost(cat(u3.out_shape, t[0])?)?;
        add("decoder", u4.then(b4).then(u3).then(b3));
        let latent = b3.out_shape;
        let trunk = self.trunk.cost(latent)?;
        let clas = self.clas.cost(trunk.out_shape)?;
        let reg = self.reg.cost(trunk.out_shape)?;
        add("detection-head", trunk.then(reg).then(clas));
        add("segmentation-head", self.seg_up.cost(latent)?.then(self.seg.cost(self.seg_up.cost(latent)?.out_shape)?));
        Ok(parts)
    }

    /// Total analytic cost; `out_shape` is that of the segmentation map.
    pub fn cost(&self, batch: usize) -> Result<Cost> {
        Ok(self.cost_breakdown(batch)?.into_iter().fold(Cost::default(), |acc, (_, c)| acc.then(c)))
    }

    pub fn head_shapes(&self, batch: usize) -> Result<HeadShapes> {
        let parts = self.cost_breakdown(batch)?;
        let find = |n: &str| parts.iter().find(|(name, _)| name == n).map(|p| p.1.out_shape).expect("component present");
        let clas = find("detection-head");
        Ok(HeadShapes { clas, reg: [clas[0], 2, clas[2], clas[3]], seg: find("segmentation-head") })
    }
}

fn cat(a: [usize; 4], b: [usize; 4]) -> Result<[usize; 4]> {
    if a[0] != b[0] || a[2..] != b[2..] {
        return Err(Error::ShapeMismatch(format!("cannot concatenate {a:?} and {b:?}")));
    }
    Ok([a[0], a[1] + b[1], a[2], a[3]])
}

fn two_conv_bn_relu<T: Scalar>(cin: usize, cout: usize, rng: &mut ChaCha8Rng) -> Sequential<T> {
    Sequential::new().push(conv_bn_relu(cin, cout, 3, (1, 1), rng)).push(conv_bn_relu(cout, cout, 3, (1, 1), rng))
}
