use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::conv::Conv2d;
use crate::nn::layers::{BatchNorm2d, Relu};
use crate::nn::module::{join, Cost, Mode, Module, ParamKind, Sequential};
use crate::nn::tensor::{Scalar, Tensor};

pub const EXPANSION: usize = 4;

/// Residual bottleneck: 1x1 reduce, 3x3 (strided), 1x1 expand by
/// [`EXPANSION`], added to a projected shortcut when the shape changes.
pub struct Bottleneck<T: Scalar> {
    main: Sequential<T>,
    shortcut: Option<Sequential<T>>,
    relu: Relu<T>,
}

impl<T: Scalar> Bottleneck<T> {
    pub fn new(cin: usize, width: usize, stride: usize, rng: &mut impl Rng) -> Self {
        let cout = width * EXPANSION;
        let main = Sequential::new()
            .push(Conv2d::new(cin, width, (1, 1), rng).no_bias())
            .push(BatchNorm2d::new(width))
            .push(Relu::new())
            .push(Conv2d::new(width, width, (3, 3), rng).stride(stride, stride).same().no_bias())
            .push(BatchNorm2d::new(width))
            .push(Relu::new())
            .push(Conv2d::new(width, cout, (1, 1), rng).no_bias())
            .push(BatchNorm2d::new(cout));
        let shortcut = (stride != 1 || cin != cout).then(|| {
            Sequential::new()
                .push(Conv2d::new(cin, cout, (1, 1), rng).stride(stride, stride).no_bias())
                .push(BatchNorm2d::new(cout))
        });
        Self { main, shortcut, relu: Relu::new() }
    }
}

impl<T: Scalar> Module<T> for Bottleneck<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut y = self.main.forward(x, mode)?;
        match self.shortcut.as_mut() {
            Some(s) => y.add_assign(&s.forward(x, mode)?)?,
            None => y.add_assign(x)?,
        }
        self.relu.forward(&y, mode)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.relu.backward(grad_out)?;
        let mut dx = self.main.backward(&g)?;
        match self.shortcut.as_mut() {
            Some(s) => dx.add_assign(&s.backward(&g)?)?,
            None => dx.add_assign(&g)?,
        }
        Ok(dx)
    }

    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind)) {
        self.main.visit(&join(prefix, "main"), f);
        if let Some(s) = self.shortcut.as_mut() {
            s.visit(&join(prefix, "shortcut"), f);
        }
    }

    fn cost(&self, input: [usize; 4]) -> Result<Cost> {
        let main = self.main.cost(input)?;
        let short = match &self.shortcut {
            Some(s) => s.cost(input)?,
            None => Cost { out_shape: input, ..Cost::default() },
        };
        if main.out_shape != short.out_shape {
            return Err(Error::ShapeMismatch("residual branches disagree".into()));
        }
        // the residual addition itself is not counted
        Ok(Cost { flops: main.flops + short.flops, params: main.params + short.params, out_shape: main.out_shape })
    }
}

/// `depth` bottlenecks, the first one downsampling by `stride`.
pub fn residual_stage<T: Scalar>(cin: usize, width: usize, depth: usize, stride: usize, rng: &mut impl Rng) -> Sequential<T> {
    let mut stage = Sequential::new();
    let mut c = cin;
    for i in 0..depth {
        stage.push_boxed(Box::new(Bottleneck::new(c, width, if i == 0 { stride } else { 1 }, rng)));
        c = width * EXPANSION;
    }
    stage
}
