//! Adam with bias correction.

use crate::nn::module::ParamKind;
use crate::nn::tensor::{Scalar, Tensor};

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    /// First and second moments, in visit order.
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, moments: Vec::new() }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// One update of every trainable tensor reached by `visit`. The visit
    /// order must be the same on every call.
    pub fn step<T: Scalar>(&mut self, visit: impl FnOnce(&mut dyn FnMut(&str, &mut Tensor<T>, ParamKind))) {
        self.t += 1;
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let moments = &mut self.moments;
        let mut slot = 0;
        visit(&mut |_, t, kind| {
            if kind != ParamKind::Trainable {
                return;
            }
            if moments.len() == slot {
                moments.push((vec![0.0; t.numel()], vec![0.0; t.numel()]));
            }
            let (m, v) = &mut moments[slot];
            slot += 1;
            let (data, Some(grad)) = t.data_mut_and_grad() else {
                return;
            };
            for i in 0..data.len() {
                let g = grad[i].f64();
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let update = lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                data[i] = T::of(data[i].f64() - update);
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(value: f64, grad: f64) -> Tensor<f64> {
        let mut t = Tensor::full([1, 1, 1, 1], value);
        t.grad_mut()[0] = grad;
        t
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = param(1.0, 0.3);
        let mut adam = Adam::new(1e-2);
        adam.step(|f| f("p", &mut p, ParamKind::Trainable));
        assert!((p.data()[0] - (1.0 - 1e-2)).abs() < 1e-8);
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let mut p = param(0.7, 0.0);
        let mut adam = Adam::new(1e-2);
        for _ in 0..3 {
            adam.step(|f| f("p", &mut p, ParamKind::Trainable));
        }
        assert_eq!(p.data()[0], 0.7);
    }

    #[test]
    fn buffers_are_not_updated() {
        let mut b = param(2.0, 5.0);
        Adam::new(0.1).step(|f| f("b", &mut b, ParamKind::Buffer));
        assert_eq!(b.data()[0], 2.0);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = param(3.0, 0.0);
        let mut adam = Adam::new(0.05);
        for _ in 0..500 {
            let x = p.data()[0];
            p.grad_mut()[0] = 2.0 * (x - 1.0);
            adam.step(|f| f("p", &mut p, ParamKind::Trainable));
        }
        assert!((p.data()[0] - 1.0).abs() < 1e-2);
    }
}
