use crate::error::Result;
use crate::nn::tensor::{Scalar, Tensor};

/// Batch-norm statistics source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running averages are updated.
    Train,
    /// Running averages.
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Trainable,
    /// Persistent state that is checkpointed but not optimized.
    Buffer,
}

/// Analytic cost of running a layer on one input shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Cost {
    /// Floating-point operations, one multiply-add counted as 2.
    pub flops: u64,
    pub params: u64,
    pub out_shape: [usize; 4],
}

impl Cost {
    pub fn then(self, next: Cost) -> Cost {
        Cost {
            flops: self.flops + next.flops,
            params: self.params + next.params,
            out_shape: next.out_shape,
        }
    }
}

/// A differentiable layer with cached activations.
///
/// `backward` must follow the matching `forward` and consumes the cache;
/// parameter gradients are accumulated into each parameter's grad slot.
pub trait Module<T: Scalar>: Send {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>>;

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>>;

    /// Visits parameters and buffers in a fixed order with dotted names.
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind));

    fn cost(&self, input: [usize; 4]) -> Result<Cost>;
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Layers applied in order.
pub struct Sequential<T: Scalar> {
    layers: Vec<Box<dyn Module<T>>>,
}

impl<T: Scalar> Default for Sequential<T> {
    fn default() -> Self {
        Self { layers: Vec::new() }
    }
}

impl<T: Scalar> Sequential<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(mut self, layer: impl Module<T> + 'static) -> Self {
        self.layers.push(Box::new(layer));
        self
    }

    pub fn push_boxed(&mut self, layer: Box<dyn Module<T>>) {
        self.layers.push(layer);
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

impl<T: Scalar> Module<T> for Sequential<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut iter = self.layers.iter_mut();
        let Some(first) = iter.next() else {
            return Ok(x.clone());
        };
        let mut h = first.forward(x, mode)?;
        for layer in iter {
            h = layer.forward(&h, mode)?;
        }
        Ok(h)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let mut iter = self.layers.iter_mut().rev();
        let Some(last) = iter.next() else {
            return Ok(grad_out.clone());
        };
        let mut g = last.backward(grad_out)?;
        for layer in iter {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>, ParamKind)) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            layer.visit(&join(prefix, &i.to_string()), f);
        }
    }

    fn cost(&self, input: [usize; 4]) -> Result<Cost> {
        let mut total = Cost { out_shape: input, ..Cost::default() };
        for layer in &self.layers {
            total = total.then(layer.cost(total.out_shape)?);
        }
        Ok(total)
    }
}
