//! Normalization, activations and axis plumbing.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::conv::Conv2d;
use crate::nn::module::{join, Cost, Mode, Module, ParamKind, Sequential};
use crate::nn::tensor::{Scalar, Tensor};

fn missing_cache(layer: &str) -> Error {
    Error::ShapeMismatch(format!("{layer} backward before forward"))
}

/// Per-channel batch normalization over `(batch, height, width)`.
pub struct BatchNorm2d<T: Scalar> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    momentum: f64,
    eps: f64,
    cache: Option<BnCache<T>>,
}

struct BnCache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
    mode: Mode,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::full([1, channels, 1, 1], T::one()),
            beta: Tensor::zeros([1, channels, 1, 1]),
            running_mean: Tensor::zeros([1, channels, 1, 1]),
            running_var: Tensor::full([1, channels, 1, 1], T::one()),
            momentum: 0.1,
            eps: 1e-5,
            cache: None,
        }
    }

    fn channels(&self) -> usize {
        self.gamma.numel()
    }
}

impl<T: Scalar> Module<T> for BatchNorm2d<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let [n, c, h, w] = x.shape();
        if c != self.channels() {
            return Err(Error::ShapeMismatch(format!("batchnorm of {} channels got {c}", self.channels())));
        }
        let plane = h * w;
        let count = (n * plane) as f64;
        let (mean, var): (Vec<f64>, Vec<f64>) = match mode {
            Mode::Train => {
                let mut mean = vec![0.0; c];
                for (i, chunk) in x.data().chunks_exact(plane).enumerate() {
                    mean[i % c] += chunk.iter().map(|v| v.f64()).sum::<f64>();
                }
                mean.iter_mut().for_each(|m| *m /= count);
                let mut var = vec![0.0; c];
                for (i, chunk) in x.data().chunks_exact(plane).enumerate() {
                    let m = mean[i % c];
                    var[i % c] += chunk.iter().map(|v| (v.f64() - m) * (v.f64() - m)).sum::<f64>();
                }
                var.iter_mut().for_each(|v| *v /= count);
                let unbias = if count > 1.0 { count / (count - 1.0) } else { 1.0 };
                let mom = self.momentum;
                for ch in 0..c {
                    let rm = &mut self.running_mean.data_mut()[ch];
                    *rm = T::of((1.0 - mom) * rm.f64() + mom * mean[ch]);
                    let rv = &mut self.running_var.data_mut()[ch];
                    *rv = T::of((1.0 - mom) * rv.f64() + mom * var[ch] * unbias);
                }
                (mean, var)
            }
            Mode::Eval => (
                self.running_mean.data().iter().map(|v| v.f64()).collect(),
                self.running_var.data().iter().map(|v| v.f64()).collect(),
            ),
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::of(1.0 / (v + self.eps).sqrt())).collect();
        let mut xhat = vec![T::zero(); x.numel()];
        let mut out = vec![T::zero(); x.numel()];
        let planes = x.data().chunks_exact(plane).zip(xhat.chunks_exact_mut(plane)).zip(out.chunks_exact_mut(plane));
        for (i, ((src, xh), dst)) in planes.enumerate() {
            let ch = i % c;
            let (m, is, g, be) = (T::of(mean[ch]), inv_std[ch], self.gamma.data()[ch], self.beta.data()[ch]);
            for ((&v, h), o) in src.iter().zip(xh.iter_mut()).zip(dst.iter_mut()) {
                *h = (v - m) * is;
                *o = g * *h + be;
            }
        }
        self.cache = Some(BnCache { xhat: Tensor::from_vec(x.shape(), xhat)?, inv_std, mode });
        Tensor::from_vec(x.shape(), out)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let BnCache { xhat, inv_std, mode } = self.cache.take().ok_or_else(|| missing_cache("batchnorm"))?;
        grad_out.ensure_shape(xhat.shape(), "batchnorm grad")?;
        let [n, c, h, w] = xhat.shape();
        let plane = h * w;
        let count = T::of((n * plane) as f64);
        let mut sum_dy = vec![T::zero(); c];
        let mut sum_dy_xhat = vec![T::zero(); c];
        for b in 0..n {
            let (g, xh) = (grad_out.item(b), xhat.item(b));
            for ch in 0..c {
                let r = ch * plane..(ch + 1) * plane;
                for (&dy, &xv) in g[r.clone()].iter().zip(&xh[r]) {
                    sum_dy[ch] += dy;
                    sum_dy_xhat[ch] += dy * xv;
                }
            }
        }
        for ch in 0..c {
            self.gamma.grad_mut()[ch] += sum_dy_xhat[ch];
            self.beta.grad_mut()[ch] += sum_dy[ch];
        }
        let mut dx = Tensor::zeros(xhat.shape());
        for b in 0..n {
            let (g, xh) = (grad_out.item(b), xhat.item(b));
            let d = dx.item_mut(b);
            for ch in 0..c {
                let gamma = self.gamma.data()[ch];
                let is = inv_std[ch];
                let r = ch * plane..(ch + 1) * plane;
                match mode {
                    Mode::Train => {
                        let (mdy, mdyx) = (sum_dy[ch] / count, sum_dy_xhat[ch] / count);
                        for ((o, &dy), &xv) in d[r.clone()].iter_mut().zip(&g[r.clone()]).zip(&xh[r]) {
                            *o = gamma * is * (dy - mdy - xv * mdyx);
                        }
                    }
                    Mode::Eval => {
                        for (o, &dy) in d[r.clone()].iter_mut().zip(&g[r]) {
                            *o = gamma * is * dy;
                        }
                    }
                }
            }
        }
        Ok(dx)
    }

    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind)) {
        f(&join(prefix, "gamma"), &mut self.gamma, ParamKind::Trainable);
        f(&join(prefix, "beta"), &mut self.beta, ParamKind::Trainable);
        f(&join(prefix, "running_mean"), &mut self.running_mean, ParamKind::Buffer);
        f(&join(prefix, "running_var"), &mut self.running_var, ParamKind::Buffer);
    }

    fn cost(&self, input: [usize; 4]) -> Result<Cost> {
        if input[1] != self.channels() {
            return Err(Error::ShapeMismatch("batchnorm channels".into()));
        }
        // folded into the preceding convolution at inference
        Ok(Cost { flops: 0, params: 2 * self.channels() as u64, out_shape: input })
    }
}

#[derive(Default)]
pub struct Relu<T> {
    mask: Option<Vec<bool>>,
    shape: [usize; 4],
    _t: std::marker::PhantomData<T>,
}

impl<T: Scalar> Relu<T> {
    pub fn new() -> Self {
        Self { mask: None, shape: [0; 4], _t: std::marker::PhantomData }
    }
}

impl<T: Scalar> Module<T> for Relu<T> {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        self.mask = Some(x.data().iter().map(|&v| v > T::zero()).collect());
        self.shape = x.shape();
        Ok(x.map(|v| if v > T::zero() { v } else { T::zero() }))
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let mask = self.mask.take().ok_or_else(|| missing_cache("relu"))?;
        grad_out.ensure_shape(self.shape, "relu grad")?;
        let data = grad_out.data().iter().zip(&mask).map(|(&g, &m)| if m { g } else { T::zero() }).collect();
        Tensor::from_vec(self.shape, data)
    }

    fn visit(&mut self, _: &str, _: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind)) {}

    fn cost(&self, input: [usize; 4]) -> Result<Cost> {
        Ok(Cost { flops: 0, params: 0, out_shape: input })
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Default)]
pub struct Sigmoid<T> {
    out: Option<Tensor<T>>,
}

impl<T: Scalar> Sigmoid<T> {
    pub fn new() -> Self {
        Self { out: None }
    }
}

impl<T: Scalar> Module<T> for Sigmoid<T> {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let y = x.map(|v| T::of(sigmoid(v.f64())));
        self.out = Some(y.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.out.take().ok_or_else(|| missing_cache("sigmoid"))?;
        grad_out.ensure_shape(y.shape(), "sigmoid grad")?;
        let data = grad_out.data().iter().zip(y.data()).map(|(&g, &s)| g * s * (T::one() - s)).collect();
        Tensor::from_vec(y.shape(), data)
    }

    fn visit(&mut self, _: &str, _: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind)) {}

    fn cost(&self, input: [usize; 4]) -> Result<Cost> {
        Ok(Cost { flops: 0, params: 0, out_shape: input })
    }
}

/// Exchanges the channel and width axes: `(n, c, h, w) -> (n, w, h, c)`.
///
/// Used where the channel axis becomes the azimuth axis of a range-azimuth map.
#[derive(Default)]
pub struct SwapChannelWidth;

pub fn swap_channel_width<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let [n, c, h, w] = x.shape();
    let mut out = Tensor::zeros([n, w, h, c]);
    for b in 0..n {
        let src = x.item(b);
        let dst = out.item_mut(b);
        for ch in 0..c {
            for y in 0..h {
                for xw in 0..w {
                    dst[(xw * h + y) * c + ch] = src[(ch * h + y) * w + xw];
                }
            }
        }
    }
    out
}

impl<T: Scalar> Module<T> for SwapChannelWidth {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        Ok(swap_channel_width(x))
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(swap_channel_width(grad_out))
    }

    fn visit(&mut self, _: &str, _: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind)) {}

    fn cost(&self, [n, c, h, w]: [usize; 4]) -> Result<Cost> {
        Ok(Cost { flops: 0, params: 0, out_shape: [n, w, h, c] })
    }
}

/// Keeps columns `start..start + len` of the width axis.
pub struct WidthCrop {
    start: usize,
    len: usize,
    in_width: usize,
}

impl WidthCrop {
    pub fn new(start: usize, len: usize) -> Self {
        Self { start, len, in_width: 0 }
    }
}

impl<T: Scalar> Module<T> for WidthCrop {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let [n, c, h, w] = x.shape();
        if self.start + self.len > w {
            return Err(Error::ShapeMismatch(format!("crop {}+{} of width {w}", self.start, self.len)));
        }
        self.in_width = w;
        let mut out = Vec::with_capacity(n * c * h * self.len);
        for row in x.data().chunks(w) {
            out.extend_from_slice(&row[self.start..self.start + self.len]);
        }
        Tensor::from_vec([n, c, h, self.len], out)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let [n, c, h, w] = grad_out.shape();
        if w != self.len || self.in_width == 0 {
            return Err(missing_cache("crop"));
        }
        let mut dx = Tensor::zeros([n, c, h, self.in_width]);
        for (dst, src) in dx.data_mut().chunks_mut(self.in_width).zip(grad_out.data().chunks(w)) {
            dst[self.start..self.start + self.len].copy_from_slice(src);
        }
        Ok(dx)
    }

    fn visit(&mut self, _: &str, _: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind)) {}

    fn cost(&self, [n, c, h, w]: [usize; 4]) -> Result<Cost> {
        if self.start + self.len > w {
            return Err(Error::ShapeMismatch("crop exceeds width".into()));
        }
        Ok(Cost { flops: 0, params: 0, out_shape: [n, c, h, self.len] })
    }
}

/// `Conv(k x k, same padding, stride) -> BatchNorm -> ReLU`, conv without bias.
pub fn conv_bn_relu<T: Scalar>(
    cin: usize,
    cout: usize,
    k: usize,
    stride: (usize, usize),
    rng: &mut impl Rng,
) -> Sequential<T> {
    Sequential::new()
        .push(Conv2d::new(cin, cout, (k, k), rng).stride(stride.0, stride.1).same().no_bias())
        .push(BatchNorm2d::new(cout))
        .push(Relu::new())
}
