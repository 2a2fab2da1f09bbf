//! Layer primitives with explicit forward caches and hand-written backward
//! passes. Each layer owns its parameters, gradients, and Adam moments.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dense::Mat;

/// One parameter tensor with its gradient and optimizer moments.
#[derive(Clone, Debug)]
pub(crate) struct Param {
    pub data: Vec<f64>,
    pub grad: Vec<f64>,
    m1: Vec<f64>,
    m2: Vec<f64>,
}

impl Param {
    pub fn new(data: Vec<f64>) -> Self {
        let n = data.len();
        Self {
            data,
            grad: vec![0.0; n],
            m1: vec![0.0; n],
            m2: vec![0.0; n],
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    /// One Adam update with bias correction. `t` is the 1-based step count.
    pub fn adam_step(&mut self, lr: f64, beta1: f64, beta2: f64, eps: f64, t: u64) {
        let bc1 = 1.0 - beta1.powi(t as i32);
        let bc2 = 1.0 - beta2.powi(t as i32);
        for i in 0..self.data.len() {
            let g = self.grad[i];
            self.m1[i] = beta1 * self.m1[i] + (1.0 - beta1) * g;
            self.m2[i] = beta2 * self.m2[i] + (1.0 - beta2) * g * g;
            let mhat = self.m1[i] / bc1;
            let vhat = self.m2[i] / bc2;
            self.data[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m1, &self.m2)
    }

    pub fn moments_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.m1, &mut self.m2)
    }
}

/// Affine map `y = x W + b` with `W` stored as (in x out).
#[derive(Clone, Debug)]
pub(crate) struct Linear {
    pub w: Param,
    pub b: Param,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    /// Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero bias.
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let w: Vec<f64> = (0..in_dim * out_dim)
            .map(|_| rng.random::<f64>() * 2.0 * bound - bound)
            .collect();
        Self {
            w: Param::new(w),
            b: Param::new(vec![0.0; out_dim]),
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, x: &Mat) -> Mat {
        debug_assert_eq!(x.cols(), self.in_dim);
        let w = Mat::from_vec(self.in_dim, self.out_dim, self.w.data.clone());
        let mut y = x.matmul(&w);
        for i in 0..y.rows() {
            for (v, b) in y.row_mut(i).iter_mut().zip(&self.b.data) {
                *v += b;
            }
        }
        y
    }

    /// Accumulates dW = x^T dy and db = column sums of dy; returns dx = dy W^T.
    pub fn backward(&mut self, x: &Mat, dy: &Mat) -> Mat {
        debug_assert_eq!(dy.cols(), self.out_dim);
        for r in 0..x.rows() {
            let xr = x.row(r);
            let dr = dy.row(r);
            for (i, &xv) in xr.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let gw_row = &mut self.w.grad[i * self.out_dim..(i + 1) * self.out_dim];
                for (g, &d) in gw_row.iter_mut().zip(dr) {
                    *g += xv * d;
                }
            }
            for (g, &d) in self.b.grad.iter_mut().zip(dr) {
                *g += d;
            }
        }
        let mut dx = Mat::zeros(x.rows(), self.in_dim);
        for r in 0..x.rows() {
            let dr = dy.row(r);
            let dxr = dx.row_mut(r);
            for (o, &d) in dr.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (i, dv) in dxr.iter_mut().enumerate() {
                    *dv += d * self.w.data[i * self.out_dim + o];
                }
            }
        }
        dx
    }
}

/// Per-feature batch statistics cached for the backward pass.
#[derive(Clone, Debug)]
pub(crate) struct BnCache {
    xhat: Mat,
    inv_std: Vec<f64>,
}

/// Batch normalization over columns. Batch statistics in train mode (biased
/// variance), running averages in eval mode; running buffers keep
/// `momentum` of their previous value per update.
#[derive(Clone, Debug)]
pub(crate) struct BatchNorm {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
    dim: usize,
}

impl BatchNorm {
    pub fn new(dim: usize, momentum: f64) -> Self {
        Self {
            gamma: Param::new(vec![1.0; dim]),
            beta: Param::new(vec![0.0; dim]),
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum,
            eps: 1e-5,
            dim,
        }
    }

    pub fn forward_train(&mut self, x: &Mat, update_stats: bool) -> (Mat, BnCache) {
        let n = x.rows() as f64;
        let mut mean = vec![0.0; self.dim];
        let mut var = vec![0.0; self.dim];
        for i in 0..x.rows() {
            for (j, &v) in x.row(i).iter().enumerate() {
                mean[j] += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        for i in 0..x.rows() {
            for (j, &v) in x.row(i).iter().enumerate() {
                let d = v - mean[j];
                var[j] += d * d;
            }
        }
        for v in &mut var {
            *v /= n;
        }
        if update_stats {
            for j in 0..self.dim {
                self.running_mean[j] =
                    self.momentum * self.running_mean[j] + (1.0 - self.momentum) * mean[j];
                self.running_var[j] =
                    self.momentum * self.running_var[j] + (1.0 - self.momentum) * var[j];
            }
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut xhat = Mat::zeros(x.rows(), self.dim);
        let mut y = Mat::zeros(x.rows(), self.dim);
        for i in 0..x.rows() {
            for j in 0..self.dim {
                let h = (x.get(i, j) - mean[j]) * inv_std[j];
                xhat.set(i, j, h);
                y.set(i, j, self.gamma.data[j] * h + self.beta.data[j]);
            }
        }
        (y, BnCache { xhat, inv_std })
    }

    pub fn forward_eval(&self, x: &Mat) -> Mat {
        let mut y = Mat::zeros(x.rows(), self.dim);
        for i in 0..x.rows() {
            for j in 0..self.dim {
                let inv = 1.0 / (self.running_var[j] + self.eps).sqrt();
                let h = (x.get(i, j) - self.running_mean[j]) * inv;
                y.set(i, j, self.gamma.data[j] * h + self.beta.data[j]);
            }
        }
        y
    }

    pub fn backward(&mut self, cache: &BnCache, dy: &Mat) -> Mat {
        let n = dy.rows() as f64;
        let mut sum_dy = vec![0.0; self.dim];
        let mut sum_dy_xhat = vec![0.0; self.dim];
        for i in 0..dy.rows() {
            for j in 0..self.dim {
                let d = dy.get(i, j);
                sum_dy[j] += d;
                sum_dy_xhat[j] += d * cache.xhat.get(i, j);
            }
        }
        for j in 0..self.dim {
            self.gamma.grad[j] += sum_dy_xhat[j];
            self.beta.grad[j] += sum_dy[j];
        }
        let mut dx = Mat::zeros(dy.rows(), self.dim);
        for i in 0..dy.rows() {
            for j in 0..self.dim {
                let d = dy.get(i, j);
                let v = self.gamma.data[j] * cache.inv_std[j] / n
                    * (n * d - sum_dy[j] - cache.xhat.get(i, j) * sum_dy_xhat[j]);
                dx.set(i, j, v);
            }
        }
        dx
    }
}

/// Parametric rectifier with one learned slope shared across features.
#[derive(Clone, Debug)]
pub(crate) struct PRelu {
    pub a: Param,
}

impl PRelu {
    pub fn new() -> Self {
        Self {
            a: Param::new(vec![0.25]),
        }
    }

    pub fn forward(&self, x: &Mat) -> Mat {
        let a = self.a.data[0];
        let mut y = x.clone();
        for v in y.data_mut() {
            if *v < 0.0 {
                *v *= a;
            }
        }
        y
    }

    pub fn backward(&mut self, x: &Mat, dy: &Mat) -> Mat {
        let a = self.a.data[0];
        let mut dx = Mat::zeros(x.rows(), x.cols());
        let mut ga = 0.0;
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                let xv = x.get(i, j);
                let d = dy.get(i, j);
                if xv > 0.0 {
                    dx.set(i, j, d);
                } else {
                    dx.set(i, j, a * d);
                    ga += d * xv;
                }
            }
        }
        self.a.grad[0] += ga;
        dx
    }
}

/// Inverted dropout; the mask comes from the model's seeded stream. With
/// p = 0 the layer is the identity and consumes no randomness.
pub(crate) fn dropout_forward(x: &Mat, p: f64, rng: &mut ChaCha8Rng) -> (Mat, Option<Vec<f64>>) {
    if p == 0.0 {
        return (x.clone(), None);
    }
    let keep = 1.0 - p;
    let mask: Vec<f64> = (0..x.rows() * x.cols())
        .map(|_| {
            if rng.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        })
        .collect();
    let mut y = x.clone();
    for (v, m) in y.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    (y, Some(mask))
}

pub(crate) fn dropout_backward(dy: &Mat, mask: &Option<Vec<f64>>) -> Mat {
    match mask {
        None => dy.clone(),
        Some(mask) => {
            let mut dx = dy.clone();
            for (v, m) in dx.data_mut().iter_mut().zip(mask) {
                *v *= m;
            }
            dx
        }
    }
}

/// Linear -> optional BatchNorm -> PReLU. Decoder blocks normalize; encoder
/// blocks do not: a shared running buffer cannot serve several per-path
/// input distributions at once, so the per-type encoders stay
/// mode-independent and only the fused stream is batch-normalized.
#[derive(Clone, Debug)]
pub(crate) struct Block {
    pub lin: Linear,
    pub bn: Option<BatchNorm>,
    pub act: PRelu,
}

#[derive(Clone, Debug)]
pub(crate) struct BlockCache {
    x: Mat,
    bn_cache: Option<BnCache>,
    /// Input of the activation (batch-norm output, or the affine output
    /// when the block has no normalization).
    act_in: Mat,
}

impl Block {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        momentum: f64,
        with_bn: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Self {
            lin: Linear::new(in_dim, out_dim, rng),
            bn: with_bn.then(|| BatchNorm::new(out_dim, momentum)),
            act: PRelu::new(),
        }
    }

    pub fn forward_train(&mut self, x: Mat, update_stats: bool) -> (Mat, BlockCache) {
        let lin_out = self.lin.forward(&x);
        let (act_in, bn_cache) = match &mut self.bn {
            Some(bn) => {
                let (out, cache) = bn.forward_train(&lin_out, update_stats);
                (out, Some(cache))
            }
            None => (lin_out, None),
        };
        let y = self.act.forward(&act_in);
        (
            y,
            BlockCache {
                x,
                bn_cache,
                act_in,
            },
        )
    }

    pub fn forward_eval(&self, x: &Mat) -> Mat {
        let lin_out = self.lin.forward(x);
        let act_in = match &self.bn {
            Some(bn) => bn.forward_eval(&lin_out),
            None => lin_out,
        };
        self.act.forward(&act_in)
    }

    pub fn backward(&mut self, cache: &BlockCache, dy: &Mat) -> Mat {
        let d_act_in = self.act.backward(&cache.act_in, dy);
        let d_lin_out = match (&mut self.bn, &cache.bn_cache) {
            (Some(bn), Some(bn_cache)) => bn.backward(bn_cache, &d_act_in),
            _ => d_act_in,
        };
        self.lin.backward(&cache.x, &d_lin_out)
    }
}
