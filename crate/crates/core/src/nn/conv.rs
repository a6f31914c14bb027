//! 2-D convolution and transposed convolution via im2col + GEMM.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nn::module::{join, Cost, Mode, Module, ParamKind};
use crate::nn::tensor::{Scalar, Tensor};

/// Border handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Zero { h: usize, w: usize },
    /// Zero padding of `h` rows; the width axis wraps around and keeps its
    /// size. Tap `j` of output column `x` reads input column
    /// `(x + j * dilation_w - offset) mod W`. Requires unit width stride.
    Circular { h: usize, offset: isize },
}

impl Padding {
    pub fn none() -> Self {
        Padding::Zero { h: 0, w: 0 }
    }

    pub fn same(kh: usize, kw: usize) -> Self {
        Padding::Zero { h: kh / 2, w: kw / 2 }
    }
}

const SKIP: usize = usize::MAX;

/// Sliding-window geometry over one `(channels, height, width)` image.
#[derive(Debug, Clone)]
pub(crate) struct Geometry {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub oh: usize,
    pub ow: usize,
    /// `row_map[ki * oh + y]`: input row read by tap row `ki` at output row `y`.
    row_map: Vec<usize>,
    col_map: Vec<usize>,
}

fn axis_map(
    n_in: usize,
    n_out: usize,
    k: usize,
    stride: usize,
    dilation: usize,
    pad: usize,
) -> Vec<usize> {
    let mut map = Vec::with_capacity(k * n_out);
    for ki in 0..k {
        for o in 0..n_out {
            let i = (o * stride + ki * dilation) as isize - pad as isize;
            map.push(if i >= 0 && (i as usize) < n_in { i as usize } else { SKIP });
        }
    }
    map
}

fn out_len(n: usize, k: usize, stride: usize, dilation: usize, pad: usize) -> Result<usize> {
    let span = dilation * (k - 1) + 1;
    let padded = n + 2 * pad;
    if padded < span || stride == 0 {
        return Err(Error::ShapeMismatch(format!(
            "kernel span {span} larger than padded extent {padded}"
        )));
    }
    Ok((padded - span) / stride + 1)
}

impl Geometry {
    pub fn new(
        [c, h, w]: [usize; 3],
        (kh, kw): (usize, usize),
        (sh, sw): (usize, usize),
        (dh, dw): (usize, usize),
        padding: Padding,
    ) -> Result<Self> {
        if kh == 0 || kw == 0 || dh == 0 || dw == 0 {
            return Err(Error::ShapeMismatch("zero kernel size or dilation".into()));
        }
        match padding {
            Padding::Zero { h: ph, w: pw } => {
                let oh = out_len(h, kh, sh, dh, ph)?;
                let ow = out_len(w, kw, sw, dw, pw)?;
                Ok(Self {
                    c,
                    h,
                    w,
                    kh,
                    kw,
                    oh,
                    ow,
                    row_map: axis_map(h, oh, kh, sh, dh, ph),
                    col_map: axis_map(w, ow, kw, sw, dw, pw),
                })
            }
            Padding::Circular { h: ph, offset } => {
                if sw != 1 {
                    return Err(Error::ShapeMismatch("circular padding needs unit width stride".into()));
                }
                let oh = out_len(h, kh, sh, dh, ph)?;
                let ow = w;
                let mut col_map = Vec::with_capacity(kw * ow);
                for kj in 0..kw {
                    for x in 0..ow {
                        let i = (x as isize + (kj * dw) as isize - offset).rem_euclid(w as isize);
                        col_map.push(i as usize);
                    }
                }
                Ok(Self { c, h, w, kh, kw, oh, ow, row_map: axis_map(h, oh, kh, sh, dh, ph), col_map })
            }
        }
    }

    pub fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    pub fn positions(&self) -> usize {
        self.oh * self.ow
    }

    /// Unfolds `img` (`c x h x w`) into `cols` (`c*kh*kw x oh*ow`).
    pub fn im2col<T: Scalar>(&self, img: &[T], cols: &mut [T]) {
        let p = self.positions();
        for c in 0..self.c {
            let plane = &img[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..self.kh {
                let rmap = &self.row_map[ki * self.oh..(ki + 1) * self.oh];
                for kj in 0..self.kw {
                    let cmap = &self.col_map[kj * self.ow..(kj + 1) * self.ow];
                    let row = ((c * self.kh + ki) * self.kw + kj) * p;
                    let dst = &mut cols[row..row + p];
                    for (y, &iy) in rmap.iter().enumerate() {
                        let out = &mut dst[y * self.ow..(y + 1) * self.ow];
                        if iy == SKIP {
                            out.iter_mut().for_each(|v| *v = T::zero());
                            continue;
                        }
                        let src = &plane[iy * self.w..(iy + 1) * self.w];
                        for (o, &ix) in out.iter_mut().zip(cmap) {
                            *o = if ix == SKIP { T::zero() } else { src[ix] };
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Geometry::im2col`]: scatters `cols` back, accumulating into `img`.
    pub fn col2im<T: Scalar>(&self, cols: &[T], img: &mut [T]) {
        let p = self.positions();
        for c in 0..self.c {
            let plane = &mut img[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..self.kh {
                let rmap = &self.row_map[ki * self.oh..(ki + 1) * self.oh];
                for kj in 0..self.kw {
                    let cmap = &self.col_map[kj * self.ow..(kj + 1) * self.ow];
                    let row = ((c * self.kh + ki) * self.kw + kj) * p;
                    let src = &cols[row..row + p];
                    for (y, &iy) in rmap.iter().enumerate() {
                        if iy == SKIP {
                            continue;
                        }
                        let dst = &mut plane[iy * self.w..(iy + 1) * self.w];
                        for (&v, &ix) in src[y * self.ow..(y + 1) * self.ow].iter().zip(cmap) {
                            if ix != SKIP {
                                dst[ix] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn he_normal<T: Scalar>(shape: [usize; 4], fan_in: usize, rng: &mut impl Rng) -> Tensor<T> {
    let std = (2.0 / fan_in.max(1) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("valid std");
    let data = (0..shape.iter().product::<usize>()).map(|_| T::of(normal.sample(rng))).collect();
    Tensor::from_vec(shape, data).expect("shape matches")
}

/// Cross-correlation layer, weights `(out, in, kh, kw)`.
pub struct Conv2d<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
    stride: (usize, usize),
    dilation: (usize, usize),
    padding: Padding,
    input_grad: bool,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Conv2d<T> {
    /// He-initialized convolution with bias, unit stride and dilation, no padding.
    pub fn new(cin: usize, cout: usize, kernel: (usize, usize), rng: &mut impl Rng) -> Self {
        let weight = he_normal([cout, cin, kernel.0, kernel.1], cin * kernel.0 * kernel.1, rng);
        Self {
            weight,
            bias: Some(Tensor::zeros([1, cout, 1, 1])),
            stride: (1, 1),
            dilation: (1, 1),
            padding: Padding::none(),
            input_grad: true,
            input: None,
        }
    }

    pub fn from_weights(weight: Tensor<T>, bias: Option<Tensor<T>>) -> Result<Self> {
        let [cout, ..] = weight.shape();
        if let Some(b) = &bias {
            b.ensure_shape([1, cout, 1, 1], "conv bias")?;
        }
        Ok(Self { weight, bias, stride: (1, 1), dilation: (1, 1), padding: Padding::none(), input_grad: true, input: None })
    }

    pub fn stride(mut self, sh: usize, sw: usize) -> Self {
        self.stride = (sh, sw);
        self
    }

    pub fn dilation(mut self, dh: usize, dw: usize) -> Self {
        self.dilation = (dh, dw);
        self
    }

    pub fn padding(mut self, padding: Padding) -> Self {
        self.padding = padding;
        self
    }

    pub fn same(self) -> Self {
        let [_, _, kh, kw] = self.weight.shape();
        let (dh, dw) = self.dilation;
        self.padding(Padding::Zero { h: dh * (kh / 2), w: dw * (kw / 2) })
    }

    pub fn no_bias(mut self) -> Self {
        self.bias = None;
        self
    }

    /// Skips the input gradient in `backward` (returns zeros), for layers
    /// that read the network input directly.
    pub fn without_input_grad(mut self) -> Self {
        self.input_grad = false;
        self
    }

    /// For unit-stride, symmetric "same" convolutions the input gradient is
    /// itself a same convolution of the output gradient with the spatially
    /// flipped, channel-transposed kernel.
    fn flipped(&self) -> Option<Conv2d<T>> {
        let [cout, cin, kh, kw] = self.weight.shape();
        let (dh, dw) = self.dilation;
        let same = Padding::Zero { h: dh * (kh / 2), w: dw * (kw / 2) };
        if self.stride != (1, 1) || kh % 2 == 0 || kw % 2 == 0 || self.padding != same || (kh, kw) == (1, 1) {
            return None;
        }
        let w = self.weight.data();
        let mut f = Vec::with_capacity(w.len());
        for c in 0..cin {
            for o in 0..cout {
                for ki in 0..kh {
                    for kj in 0..kw {
                        f.push(w[((o * cin + c) * kh + (kh - 1 - ki)) * kw + (kw - 1 - kj)]);
                    }
                }
            }
        }
        let weight = Tensor::from_vec([cin, cout, kh, kw], f).ok()?;
        Some(Conv2d::from_weights(weight, None).ok()?.dilation(dh, dw).padding(same))
    }

    fn kernel(&self) -> (usize, usize) {
        let [_, _, kh, kw] = self.weight.shape();
        (kh, kw)
    }

    fn geometry(&self, input: [usize; 4]) -> Result<Geometry> {
        let [_, cin, h, w] = input;
        let [_, wcin, ..] = self.weight.shape();
        if cin != wcin {
            return Err(Error::ShapeMismatch(format!("conv expects {wcin} input channels, got {cin}")));
        }
        Geometry::new([cin, h, w], self.kernel(), self.stride, self.dilation, self.padding)
    }

    fn is_pointwise(&self) -> bool {
        self.kernel() == (1, 1) && self.stride == (1, 1) && self.padding == Padding::none()
    }

    /// Forward pass without caching, usable through a shared reference.
    pub fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let [n, ..] = x.shape();
        let g = self.geometry(x.shape())?;
        let [cout, ..] = self.weight.shape();
        let (k, p) = (g.rows(), g.positions());
        let mut out = Tensor::zeros([n, cout, g.oh, g.ow]);
        let pointwise = self.is_pointwise();
        let mut cols = if pointwise { Vec::new() } else { vec![T::zero(); k * p] };
        for b in 0..n {
            let src: &[T] = if pointwise {
                x.item(b)
            } else {
                g.im2col(x.item(b), &mut cols);
                &cols
            };
            let dst = out.item_mut(b);
            T::gemm(cout, k, p, T::one(), self.weight.data(), (k as isize, 1), src, (p as isize, 1), T::zero(), dst, (p as isize, 1));
            if let Some(bias) = &self.bias {
                for (plane, &bv) in dst.chunks_mut(p).zip(bias.data()) {
                    plane.iter_mut().for_each(|v| *v += bv);
                }
            }
        }
        Ok(out)
    }
}

impl<T: Scalar> Module<T> for Conv2d<T> {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let out = self.apply(x)?;
        self.input = Some(x.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.take().ok_or_else(|| Error::ShapeMismatch("conv backward before forward".into()))?;
        let g = self.geometry(x.shape())?;
        let [n, ..] = x.shape();
        let [cout, ..] = self.weight.shape();
        grad_out.ensure_shape([n, cout, g.oh, g.ow], "conv grad")?;
        let (k, p) = (g.rows(), g.positions());
        let pointwise = self.is_pointwise();
        let flipped = if self.input_grad { self.flipped() } else { None };
        let direct_dx = self.input_grad && !pointwise && flipped.is_none();
        let mut dx = Tensor::zeros(x.shape());
        let mut cols = if pointwise { Vec::new() } else { vec![T::zero(); k * p] };
        let mut dcols = if direct_dx { vec![T::zero(); k * p] } else { Vec::new() };
        for b in 0..n {
            let gout = grad_out.item(b);
            let src: &[T] = if pointwise {
                x.item(b)
            } else {
                g.im2col(x.item(b), &mut cols);
                &cols
            };
            {
                let (_, wgrad) = self.weight.value_and_grad_mut();
                T::gemm(cout, p, k, T::one(), gout, (p as isize, 1), src, (1, p as isize), T::one(), wgrad, (k as isize, 1));
            }
            if let Some(bias) = self.bias.as_mut() {
                let bgrad = bias.grad_mut();
                for (bg, plane) in bgrad.iter_mut().zip(gout.chunks(p)) {
                    *bg += plane.iter().copied().sum::<T>();
                }
            }
            if !self.input_grad || flipped.is_some() {
                continue;
            }
            if pointwise {
                T::gemm(k, cout, p, T::one(), self.weight.data(), (1, k as isize), gout, (p as isize, 1), T::zero(), dx.item_mut(b), (p as isize, 1));
            } else {
                T::gemm(k, cout, p, T::one(), self.weight.data(), (1, k as isize), gout, (p as isize, 1), T::zero(), &mut dcols, (p as isize, 1));
                g.col2im(&dcols, dx.item_mut(b));
            }
        }
        if let Some(f) = flipped {
            dx = f.apply(grad_out)?;
        }
        Ok(dx)
    }

    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind)) {
        f(&join(prefix, "weight"), &mut self.weight, ParamKind::Trainable);
        if let Some(b) = self.bias.as_mut() {
            f(&join(prefix, "bias"), b, ParamKind::Trainable);
        }
    }

    fn cost(&self, input: [usize; 4]) -> Result<Cost> {
        let g = self.geometry(input)?;
        let [cout, ..] = self.weight.shape();
        let macs = (input[0] * cout * g.rows() * g.positions()) as u64;
        let params = (self.weight.numel() + self.bias.as_ref().map_or(0, |b| b.numel())) as u64;
        Ok(Cost { flops: 2 * macs, params, out_shape: [input[0], cout, g.oh, g.ow] })
    }
}

/// Transposed convolution (the adjoint of [`Conv2d`]), weights `(in, out, kh, kw)`.
pub struct ConvTranspose2d<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
    stride: (usize, usize),
    padding: (usize, usize),
    output_padding: (usize, usize),
    input: Option<Tensor<T>>,
}

impl<T: Scalar> ConvTranspose2d<T> {
    pub fn new(cin: usize, cout: usize, kernel: (usize, usize), rng: &mut impl Rng) -> Self {
        let weight = he_normal([cin, cout, kernel.0, kernel.1], cin * kernel.0 * kernel.1, rng);
        Self {
            weight,
            bias: Some(Tensor::zeros([1, cout, 1, 1])),
            stride: (1, 1),
            padding: (0, 0),
            output_padding: (0, 0),
            input: None,
        }
    }

    /// 3x3 kernel that doubles the range (height) axis and keeps the width.
    pub fn range_upsampler(cin: usize, cout: usize, rng: &mut impl Rng) -> Self {
        Self::new(cin, cout, (3, 3), rng).stride(2, 1).padding(1, 1).output_padding(1, 0)
    }

    pub fn stride(mut self, sh: usize, sw: usize) -> Self {
        self.stride = (sh, sw);
        self
    }

    pub fn padding(mut self, ph: usize, pw: usize) -> Self {
        self.padding = (ph, pw);
        self
    }

    pub fn output_padding(mut self, oh: usize, ow: usize) -> Self {
        self.output_padding = (oh, ow);
        self
    }

    fn out_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let [_, _, kh, kw] = self.weight.shape();
        let (sh, sw) = self.stride;
        let (ph, pw) = self.padding;
        let (oph, opw) = self.output_padding;
        if oph >= sh || opw >= sw {
            return Err(Error::ShapeMismatch("output padding must be smaller than stride".into()));
        }
        if h == 0 || w == 0 {
            return Err(Error::ShapeMismatch("empty deconv input".into()));
        }
        let oh = ((h - 1) * sh + kh + oph).checked_sub(2 * ph);
        let ow = ((w - 1) * sw + kw + opw).checked_sub(2 * pw);
        match (oh, ow) {
            (Some(a), Some(b)) if a > 0 && b > 0 => Ok((a, b)),
            _ => Err(Error::ShapeMismatch("transposed conv output would be empty".into())),
        }
    }

    /// Geometry of the forward convolution this layer is the adjoint of.
    fn geometry(&self, input: [usize; 4]) -> Result<Geometry> {
        let [_, cin, h, w] = input;
        let [wcin, cout, kh, kw] = self.weight.shape();
        if cin != wcin {
            return Err(Error::ShapeMismatch(format!("deconv expects {wcin} input channels, got {cin}")));
        }
        let (oh, ow) = self.out_hw(h, w)?;
        let g = Geometry::new(
            [cout, oh, ow],
            (kh, kw),
            self.stride,
            (1, 1),
            Padding::Zero { h: self.padding.0, w: self.padding.1 },
        )?;
        debug_assert_eq!((g.oh, g.ow), (h, w));
        Ok(g)
    }
}

impl<T: Scalar> Module<T> for ConvTranspose2d<T> {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let g = self.geometry(x.shape())?;
        let [n, cin, ..] = x.shape();
        let [_, cout, ..] = self.weight.shape();
        let (k, p) = (g.rows(), g.positions());
        let mut out = Tensor::zeros([n, cout, g.h, g.w]);
        let mut cols = vec![T::zero(); k * p];
        for b in 0..n {
            T::gemm(k, cin, p, T::one(), self.weight.data(), (1, k as isize), x.item(b), (p as isize, 1), T::zero(), &mut cols, (p as isize, 1));
            let dst = out.item_mut(b);
            g.col2im(&cols, dst);
            if let Some(bias) = &self.bias {
                let plane = g.h * g.w;
                for (chunk, &bv) in dst.chunks_mut(plane).zip(bias.data()) {
                    chunk.iter_mut().for_each(|v| *v += bv);
                }
            }
        }
        self.input = Some(x.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.take().ok_or_else(|| Error::ShapeMismatch("deconv backward before forward".into()))?;
        let g = self.geometry(x.shape())?;
        let [n, cin, ..] = x.shape();
        let [_, cout, ..] = self.weight.shape();
        grad_out.ensure_shape([n, cout, g.h, g.w], "deconv grad")?;
        let (k, p) = (g.rows(), g.positions());
        let mut dx = Tensor::zeros(x.shape());
        let mut gcols = vec![T::zero(); k * p];
        for b in 0..n {
            let gout = grad_out.item(b);
            g.im2col(gout, &mut gcols);
            T::gemm(cin, k, p, T::one(), self.weight.data(), (k as isize, 1), &gcols, (p as isize, 1), T::zero(), dx.item_mut(b), (p as isize, 1));
            {
                let (_, wgrad) = self.weight.value_and_grad_mut();
                T::gemm(cin, p, k, T::one(), x.item(b), (p as isize, 1), &gcols, (1, p as isize), T::one(), wgrad, (k as isize, 1));
            }
            if let Some(bias) = self.bias.as_mut() {
                let plane = g.h * g.w;
                for (bg, chunk) in bias.grad_mut().iter_mut().zip(gout.chunks(plane)) {
                    *bg += chunk.iter().copied().sum::<T>();
                }
            }
        }
        Ok(dx)
    }

    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind)) {
        f(&join(prefix, "weight"), &mut self.weight, ParamKind::Trainable);
        if let Some(b) = self.bias.as_mut() {
            f(&join(prefix, "bias"), b, ParamKind::Trainable);
        }
    }

    fn cost(&self, input: [usize; 4]) -> Result<Cost> {
        let g = self.geometry(input)?;
        let [cin, cout, ..] = self.weight.shape();
        let macs = (input[0] * cin * g.rows() * g.positions()) as u64;
        let params = (self.weight.numel() + self.bias.as_ref().map_or(0, |b| b.numel())) as u64;
        Ok(Cost { flops: 2 * macs, params, out_shape: [input[0], cout, g.h, g.w] })
    }
}
