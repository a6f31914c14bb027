//! Central finite-difference checks of analytic gradients (double precision).

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::module::{Mode, Module, ParamKind};
use crate::nn::tensor::Tensor;

pub const EPSILON: f64 = 1e-4;
/// Step used to re-measure entries whose stencil straddles a kink.
pub const KINK_EPSILON: f64 = 1e-6;

/// A scalar function of an input tensor and parameters, with its gradient.
pub trait Objective {
    fn loss(&mut self, x: &Tensor<f64>) -> Result<f64>;

    /// Returns the loss and its gradient w.r.t. `x`; parameter gradients
    /// are accumulated into their grad slots.
    fn loss_and_grad(&mut self, x: &Tensor<f64>) -> Result<(f64, Tensor<f64>)>;

    fn visit(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<f64>, ParamKind));
}

#[derive(Debug, Clone)]
pub struct GradReport {
    pub max_rel_error: f64,
    pub worst: String,
    pub checked: usize,
    /// Entries re-measured at [`KINK_EPSILON`] because the central difference
    /// at [`EPSILON`] straddled a non-differentiable point.
    pub refined: usize,
}

/// `|a - n| / max(|a|, |n|)`, with differences below 1e-10 treated as exact.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff < 1e-10 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs())
}

fn picks(len: usize, per_tensor: usize, rng: &mut impl Rng) -> Vec<usize> {
    if len <= per_tensor {
        (0..len).collect()
    } else {
        let mut v = sample(rng, len, per_tensor).into_vec();
        v.sort_unstable();
        v
    }
}

fn perturb(obj: &mut dyn Objective, name: &str, idx: usize, delta: f64) {
    obj.visit(&mut |n, t, _| {
        if n == name {
            t.data_mut()[idx] += delta;
        }
    });
}

/// Compares analytic gradients of the input and of every trainable parameter
/// against central differences, on at most `per_tensor` sampled entries each.
pub fn check_objective(obj: &mut dyn Objective, x: &Tensor<f64>, per_tensor: usize, seed: u64) -> Result<GradReport> {
    run_check(obj, x, per_tensor, seed, false)
}

/// Like [`check_objective`], for graphs with many ReLUs: an entry whose
/// central difference fails *and* whose one-sided slopes disagree (a kink
/// inside the stencil) is re-measured with the smaller [`KINK_EPSILON`] and
/// judged on that. A wrong analytic gradient still fails.
pub fn check_objective_kink_aware(obj: &mut dyn Objective, x: &Tensor<f64>, per_tensor: usize, seed: u64) -> Result<GradReport> {
    run_check(obj, x, per_tensor, seed, true)
}

const TOLERANCE: f64 = 1e-4;

/// Central difference of `f` at step `eps`, plus the two one-sided slopes.
fn differences(f: &mut dyn FnMut(f64) -> Result<f64>, eps: f64) -> Result<(f64, f64, f64)> {
    let (up, mid, down) = (f(eps)?, f(0.0)?, f(-eps)?);
    Ok(((up - down) / (2.0 * eps), (up - mid) / eps, (mid - down) / eps))
}

fn run_check(obj: &mut dyn Objective, x: &Tensor<f64>, per_tensor: usize, seed: u64, refine: bool) -> Result<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    obj.visit(&mut |_, t, _| t.zero_grad());
    let (_, dx) = obj.loss_and_grad(x)?;

    let mut params: Vec<(String, Vec<f64>)> = Vec::new();
    obj.visit(&mut |n, t, kind| {
        if kind == ParamKind::Trainable {
            params.push((n.to_string(), t.grad().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.numel()])));
        }
    });

    let mut report = GradReport { max_rel_error: 0.0, worst: String::new(), checked: 0, refined: 0 };
    let judge = |what: String, a: f64, f: &mut dyn FnMut(f64) -> Result<f64>, report: &mut GradReport| -> Result<()> {
        let (mut n, fwd, bwd) = differences(f, EPSILON)?;
        let kink = rel_error(fwd, bwd) > TOLERANCE;
        if refine && kink && rel_error(a, n) > TOLERANCE {
            n = differences(f, KINK_EPSILON)?.0;
            report.refined += 1;
        }
        let e = rel_error(a, n);
        report.checked += 1;
        if e > report.max_rel_error {
            report.max_rel_error = e;
            report.worst = format!("{what}: analytic {a:.6e} numeric {n:.6e}");
        }
        Ok(())
    };

    let mut xp = x.clone();
    for i in picks(x.numel(), per_tensor, &mut rng) {
        let orig = xp.data()[i];
        let mut f = |d: f64| {
            xp.data_mut()[i] = orig + d;
            let l = obj.loss(&xp);
            xp.data_mut()[i] = orig;
            l
        };
        judge(format!("input[{i}]"), dx.data()[i], &mut f, &mut report)?;
    }

    for (name, grad) in &params {
        for i in picks(grad.len(), per_tensor, &mut rng) {
            let mut f = |d: f64| {
                perturb(obj, name, i, d);
                let l = obj.loss(x);
                perturb(obj, name, i, -d);
                l
            };
            judge(format!("{name}[{i}]"), grad[i], &mut f, &mut report)?;
        }
    }
    Ok(report)
}

/// Wraps a module as `loss = sum(projection * module(x))` with a fixed
/// random projection, the standard way to check a vector-valued layer.
pub struct Projected<'a, M: ?Sized> {
    pub module: &'a mut M,
    projection: Option<Tensor<f64>>,
    seed: u64,
}

impl<'a, M: Module<f64> + ?Sized> Projected<'a, M> {
    pub fn new(module: &'a mut M, seed: u64) -> Self {
        Self { module, projection: None, seed }
    }

    fn project(&mut self, y: &Tensor<f64>) -> &Tensor<f64> {
        let seed = self.seed;
        self.projection.get_or_insert_with(|| random_tensor(y.shape(), seed ^ 0x5eed))
    }
}

impl<M: Module<f64> + ?Sized> Objective for Projected<'_, M> {
    fn loss(&mut self, x: &Tensor<f64>) -> Result<f64> {
        let y = self.module.forward(x, Mode::Train)?;
        let r = self.project(&y);
        Ok(y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum())
    }

    fn loss_and_grad(&mut self, x: &Tensor<f64>) -> Result<(f64, Tensor<f64>)> {
        let y = self.module.forward(x, Mode::Train)?;
        let r = self.project(&y).clone();
        let loss = y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum();
        let dx = self.module.backward(&r)?;
        Ok((loss, dx))
    }

    fn visit(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<f64>, ParamKind)) {
        self.module.visit("", f);
    }
}

pub fn random_tensor(shape: [usize; 4], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..shape.iter().product::<usize>()).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::from_vec(shape, data).expect("shape matches")
}

/// Finite-difference check of a single module on a random input.
pub fn check_module<M: Module<f64> + ?Sized>(module: &mut M, input_shape: [usize; 4], seed: u64) -> Result<GradReport> {
    let x = random_tensor(input_shape, seed);
    let mut obj = Projected::new(module, seed);
    check_objective(&mut obj, &x, 40, seed)
}
