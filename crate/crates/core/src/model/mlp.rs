//! Fixed two-hidden-layer regressor with hand-written backpropagation.
//!
//! Parameters live in one flat vector laid out as
//! `[W1 (h x in), b1 (h), W2 (h x h), b2 (h), W3 (out x h), b3 (out)]`,
//! weights row-major by output unit.

use rand::Rng;
use serde::{Deserialize, Serialize};

pub const LOGVAR_MIN: f64 = -6.0;
pub const LOGVAR_MAX: f64 = 2.0;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Shape of one member network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub inputs: usize,
    pub hidden: usize,
    /// Number of predicted state dimensions; the output layer has `2 * targets + 1` units.
    pub targets: usize,
}

impl MlpShape {
    pub fn outputs(&self) -> usize {
        2 * self.targets + 1
    }

    pub fn n_params(&self) -> usize {
        let (i, h, o) = (self.inputs, self.hidden, self.outputs());
        h * i + h + h * h + h + o * h + o
    }

    fn offsets(&self) -> [usize; 6] {
        let (i, h, o) = (self.inputs, self.hidden, self.outputs());
        let w1 = 0;
        let b1 = w1 + h * i;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let w3 = b2 + h;
        let b3 = w3 + o * h;
        [w1, b1, w2, b2, w3, b3]
    }
}

/// Training target for one normalized sample.
pub struct Target<'a> {
    pub delta: &'a [f64],
    pub reward: f64,
}

/// Scratch buffers reused across forward/backward passes.
#[derive(Debug, Clone)]
pub struct Workspace {
    z1: Vec<f64>,
    h1: Vec<f64>,
    z2: Vec<f64>,
    h2: Vec<f64>,
    out: Vec<f64>,
    d_out: Vec<f64>,
    d_h2: Vec<f64>,
    d_h1: Vec<f64>,
}

impl Workspace {
    pub fn new(shape: MlpShape) -> Self {
        let h = shape.hidden;
        Workspace {
            z1: vec![0.0; h],
            h1: vec![0.0; h],
            z2: vec![0.0; h],
            h2: vec![0.0; h],
            out: vec![0.0; shape.outputs()],
            d_out: vec![0.0; shape.outputs()],
            d_h2: vec![0.0; h],
            d_h1: vec![0.0; h],
        }
    }

    pub fn output(&self) -> &[f64] {
        &self.out
    }
}

fn dense(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n_in = x.len();
    for (j, o) in out.iter_mut().enumerate() {
        let row = &w[j * n_in..(j + 1) * n_in];
        *o = b[j] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    shape: MlpShape,
    params: Vec<f64>,
}

impl Mlp {
    /// Uniform fan-in scaled initialization.
    pub fn init<R: Rng + ?Sized>(shape: MlpShape, rng: &mut R) -> Self {
        let [w1, b1, w2, b2, w3, b3] = shape.offsets();
        let mut params = vec![0.0; shape.n_params()];
        let fill = |p: &mut [f64], fan_in: usize, rng: &mut R| {
            let limit = (3.0 / fan_in as f64).sqrt();
            p.iter_mut().for_each(|v| *v = rng.gen_range(-limit..limit));
        };
        fill(&mut params[w1..b1], shape.inputs, rng);
        fill(&mut params[w2..b2], shape.hidden, rng);
        fill(&mut params[w3..b3], shape.hidden, rng);
        Mlp { shape, params }
    }

    pub fn from_params(shape: MlpShape, params: Vec<f64>) -> Option<Self> {
        (params.len() == shape.n_params()).then_some(Mlp { shape, params })
    }

    pub fn shape(&self) -> MlpShape {
        self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Raw network output: `[delta mean, log-variance (unclamped), reward]`.
    pub fn forward(&self, x: &[f64], ws: &mut Workspace) {
        forward_with(&self.params, self.shape, x, ws);
    }

    /// Mean loss over the batch; accumulates `d loss / d params` into `grad`.
    pub fn loss_and_grad(&self, inputs: &[&[f64]], targets: &[Target<'_>], grad: &mut [f64], ws: &mut Workspace) -> f64 {
        loss_and_grad_with(&self.params, self.shape, inputs, targets, grad, ws)
    }
}

pub(crate) fn forward_with(params: &[f64], shape: MlpShape, x: &[f64], ws: &mut Workspace) {
    let [w1, b1, w2, b2, w3, b3] = shape.offsets();
    dense(&params[w1..b1], &params[b1..w2], x, &mut ws.z1);
    for (h, z) in ws.h1.iter_mut().zip(&ws.z1) {
        *h = silu(*z);
    }
    dense(&params[w2..b2], &params[b2..w3], &ws.h1, &mut ws.z2);
    for (h, z) in ws.h2.iter_mut().zip(&ws.z2) {
        *h = silu(*z);
    }
    dense(&params[w3..b3], &params[b3..], &ws.h2, &mut ws.out);
}

/// Per-sample loss: Gaussian NLL of the delta (constant dropped, averaged over
/// dimensions) plus half the squared reward error.
pub(crate) fn sample_loss(out: &[f64], target: &Target<'_>, d_out: Option<&mut [f64]>) -> f64 {
    let d = target.delta.len();
    let scale = 1.0 / d as f64;
    let mut loss = 0.0;
    let mut grads = d_out;
    for j in 0..d {
        let mu = out[j];
        let raw = out[d + j];
        let lv = raw.clamp(LOGVAR_MIN, LOGVAR_MAX);
        let inv_var = (-lv).exp();
        let err = target.delta[j] - mu;
        loss += 0.5 * (inv_var * err * err + lv) * scale;
        if let Some(g) = grads.as_deref_mut() {
            g[j] = -inv_var * err * scale;
            g[d + j] = if raw > LOGVAR_MIN && raw < LOGVAR_MAX {
                0.5 * (1.0 - inv_var * err * err) * scale
            } else {
                0.0
            };
        }
    }
    let r_err = out[2 * d] - target.reward;
    loss += 0.5 * r_err * r_err;
    if let Some(g) = grads {
        g[2 * d] = r_err;
    }
    loss
}

pub(crate) fn loss_and_grad_with(
    params: &[f64],
    shape: MlpShape,
    inputs: &[&[f64]],
    targets: &[Target<'_>],
    grad: &mut [f64],
    ws: &mut Workspace,
) -> f64 {
    let [w1, b1, w2, b2, w3, b3] = shape.offsets();
    let (n_in, h, n_out) = (shape.inputs, shape.hidden, shape.outputs());
    let batch = inputs.len() as f64;
    let mut total = 0.0;
    for (x, target) in inputs.iter().zip(targets) {
        forward_with(params, shape, x, ws);
        total += sample_loss(&ws.out, target, Some(&mut ws.d_out));
        ws.d_out.iter_mut().for_each(|g| *g /= batch);

        // output layer
        for o in 0..n_out {
            let g = ws.d_out[o];
            grad[b3 + o] += g;
            let row = &mut grad[w3 + o * h..w3 + (o + 1) * h];
            for (gw, a) in row.iter_mut().zip(&ws.h2) {
                *gw += g * a;
            }
        }
        ws.d_h2.iter_mut().for_each(|v| *v = 0.0);
        for o in 0..n_out {
            let g = ws.d_out[o];
            let row = &params[w3 + o * h..w3 + (o + 1) * h];
            for (dh, w) in ws.d_h2.iter_mut().zip(row) {
                *dh += g * w;
            }
        }
        // second hidden layer
        for j in 0..h {
            ws.d_h2[j] *= silu_grad(ws.z2[j]);
        }
        for j in 0..h {
            let g = ws.d_h2[j];
            grad[b2 + j] += g;
            let row = &mut grad[w2 + j * h..w2 + (j + 1) * h];
            for (gw, a) in row.iter_mut().zip(&ws.h1) {
                *gw += g * a;
            }
        }
        ws.d_h1.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..h {
            let g = ws.d_h2[j];
            let row = &params[w2 + j * h..w2 + (j + 1) * h];
            for (dh, w) in ws.d_h1.iter_mut().zip(row) {
                *dh += g * w;
            }
        }
        // first hidden layer
        for j in 0..h {
            let g = ws.d_h1[j] * silu_grad(ws.z1[j]);
            grad[b1 + j] += g;
            let row = &mut grad[w1 + j * n_in..w1 + (j + 1) * n_in];
            for (gw, a) in row.iter_mut().zip(x.iter()) {
                *gw += g * a;
            }
        }
    }
    total / batch
}

/// Mean batch loss without gradients.
pub(crate) fn loss_with(params: &[f64], shape: MlpShape, inputs: &[&[f64]], targets: &[Target<'_>], ws: &mut Workspace) -> f64 {
    let mut total = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        forward_with(params, shape, x, ws);
        total += sample_loss(&ws.out, t, None);
    }
    total / inputs.len() as f64
}

/// Adam state for one flat parameter vector.
#[derive(Debug, Clone)]
pub(crate) struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub(crate) fn new(n: usize, lr: f64) -> Self {
        Adam { lr, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub(crate) fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}
