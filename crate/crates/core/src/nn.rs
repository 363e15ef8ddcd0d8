//! A small fully connected network with exact backpropagation and Adam.
//!
//! Batches are row-major: one sample per row. Hidden layers use a
//! configurable activation; the output layer is always a logistic sigmoid so
//! every output lies in `(0, 1)`.

use std::io::{self, Read, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` inside log terms.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Relu => z.mapv(|v| v.max(0.0)),
            Activation::Sigmoid => z.mapv(sigmoid),
        }
    }

    /// Derivative expressed through the pre-activation.
    fn derivative(self, z: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Relu => z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }),
            Activation::Sigmoid => z.mapv(|v| {
                let s = sigmoid(v);
                s * (1.0 - s)
            }),
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Weights (`out × in`) and bias (`out`) of one affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { weights: Array2::zeros((fan_out, fan_in)), bias: Array1::zeros(fan_out) }
    }

    fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    fn fan_out(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
    pub hidden: Activation,
    /// Bumped on every in-place update so stale caches can be detected.
    version: u64,
}

/// Gradients share the parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(p: &MlpParams) -> Self {
        Self { layers: p.layers.iter().map(|l| Layer::zeros(l.fan_in(), l.fan_out())).collect() }
    }

    /// Flattened view in layer order: weights row-major, then bias.
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
    }
}

fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend(l.weights.iter());
        out.extend(l.bias.iter());
    }
    out
}

/// Activations recorded by [`MlpParams::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
    version: u64,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

impl MlpParams {
    /// Glorot-uniform weights in `±√(6/(fan_in+fan_out))`, zero biases.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], hidden: Activation, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Precondition(format!(
                "network needs at least two positive layer sizes, got {dims:?}"
            )));
        }
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-limit..=limit));
                Layer { weights, bias: Array1::zeros(fan_out) }
            })
            .collect();
        Ok(Self { layers, hidden, version: 0 })
    }

    /// Network with every weight and bias set to zero.
    pub fn zeros(dims: &[usize], hidden: Activation) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Precondition(format!("invalid layer sizes {dims:?}")));
        }
        let layers = dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Ok(Self { layers, hidden, version: 0 })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Layer::fan_out).unwrap_or(0)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(Layer::fan_out));
        dims
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    /// Marks every outstanding [`ForwardCache`] as stale.
    pub fn touch(&mut self) {
        self.version += 1;
    }

    fn activation_for(&self, layer: usize, z: &Array2<f64>) -> Array2<f64> {
        if layer + 1 == self.layers.len() {
            z.mapv(sigmoid)
        } else {
            self.hidden.apply(z)
        }
    }

    /// Output batch only.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_dim(self.input_dim(), x.ncols())?;
        let mut a = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let z = a.dot(&l.weights.t()) + &l.bias;
            a = self.activation_for(i, &z);
        }
        Ok(a)
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        check_dim(self.input_dim(), x.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let z = a.dot(&l.weights.t()) + &l.bias;
            let next = self.activation_for(i, &z);
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        let cache = ForwardCache { inputs, pre, output: a.clone(), version: self.version };
        Ok((a, cache))
    }

    /// Parameter gradients and the gradient with respect to the input batch,
    /// for a scalar loss whose gradient with respect to the output batch is
    /// `d_output`.
    pub fn backward(&self, cache: &ForwardCache, d_output: ArrayView2<f64>) -> Result<(Gradients, Array2<f64>)> {
        if cache.version != self.version || cache.pre.len() != self.layers.len() {
            return Err(Error::State("forward cache does not belong to these parameters".into()));
        }
        check_dim(cache.output.nrows(), d_output.nrows())?;
        check_dim(cache.output.ncols(), d_output.ncols())?;
        let mut grads = Gradients::zeros_like(self);
        let mut delta = d_output.to_owned();
        for i in (0..self.layers.len()).rev() {
            let z = &cache.pre[i];
            let local = if i + 1 == self.layers.len() {
                z.mapv(|v| {
                    let s = sigmoid(v);
                    s * (1.0 - s)
                })
            } else {
                self.hidden.derivative(z)
            };
            let dz = delta * &local;
            grads.layers[i].weights = dz.t().dot(&cache.inputs[i]);
            grads.layers[i].bias = dz.sum_axis(Axis(0));
            delta = dz.dot(&self.layers[i].weights);
        }
        Ok((grads, delta))
    }

    /// Writes the dims header followed by every parameter as little-endian
    /// `f64`, layer by layer (weights row-major, then bias).
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        let dims = self.dims();
        out.write_all(&(dims.len() as u64).to_le_bytes())?;
        for d in &dims {
            out.write_all(&(*d as u64).to_le_bytes())?;
        }
        for v in self.flatten() {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R, hidden: Activation) -> io::Result<Self> {
        let mut word = [0u8; 8];
        let mut next_u64 = |input: &mut R| -> io::Result<u64> {
            input.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let n = next_u64(&mut input)? as usize;
        if !(2..=64).contains(&n) {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "implausible layer count"));
        }
        let dims = (0..n).map(|_| next_u64(&mut input).map(|d| d as usize)).collect::<io::Result<Vec<_>>>()?;
        let mut p = MlpParams::zeros(&dims, hidden)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
        let mut buf = [0u8; 8];
        for l in &mut p.layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                input.read_exact(&mut buf)?;
                *v = f64::from_le_bytes(buf);
            }
        }
        Ok(p)
    }
}

/// Adam optimizer state with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Gradients,
    v: Gradients,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &MlpParams, lr: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
            t: 0,
            lr,
            beta1,
            beta2,
            eps: 1e-8,
        }
    }

    /// Zeroes the moments and step count, keeping the hyperparameters.
    pub fn reset(&mut self) {
        for l in self.m.layers.iter_mut().chain(self.v.layers.iter_mut()) {
            l.weights.fill(0.0);
            l.bias.fill(0.0);
        }
        self.t = 0;
    }
}

/// One Adam update of `params` in place.
pub fn adam_step(params: &mut MlpParams, state: &mut AdamState, grads: &Gradients) -> Result<()> {
    check_dim(params.layers.len(), grads.layers.len())?;
    check_dim(params.layers.len(), state.m.layers.len())?;
    for (p, g) in params.layers.iter().zip(&grads.layers) {
        if p.weights.dim() != g.weights.dim() || p.bias.len() != g.bias.len() {
            return Err(Error::Dimension { expected: p.weights.len() + p.bias.len(), found: g.weights.len() + g.bias.len() });
        }
    }
    state.t += 1;
    let (b1, b2, eps, lr) = (state.beta1, state.beta2, state.eps, state.lr);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for ((p, g), (m, v)) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(state.m.layers.iter_mut().zip(state.v.layers.iter_mut()))
    {
        let update = |param: &mut f64, grad: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * grad;
            *v = b2 * *v + (1.0 - b2) * grad * grad;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *param -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        ndarray::Zip::from(&mut p.weights)
            .and(&g.weights)
            .and(&mut m.weights)
            .and(&mut v.weights)
            .for_each(|param, &grad, m, v| update(param, grad, m, v));
        ndarray::Zip::from(&mut p.bias)
            .and(&g.bias)
            .and(&mut m.bias)
            .and(&mut v.bias)
            .for_each(|param, &grad, m, v| update(param, grad, m, v));
    }
    params.touch();
    Ok(())
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Gradients of the discriminator loss with respect to each output.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscGrad {
    pub real: Vec<f64>,
    pub fake: Vec<f64>,
    pub generated: Vec<f64>,
}

/// Three-term discriminator loss
/// `-(mean log D(r) + mean log(1 - D(f)) + mean log(1 - D(G(z))))`.
/// An empty group contributes nothing.
pub fn disc_loss_and_grad(real: &[f64], fake: &[f64], generated: &[f64]) -> (f64, DiscGrad) {
    let mut loss = 0.0;
    let mut term = |probs: &[f64], positive: bool| -> Vec<f64> {
        if probs.is_empty() {
            return Vec::new();
        }
        let n = probs.len() as f64;
        probs
            .iter()
            .map(|&p| {
                let p = clamp_prob(p);
                if positive {
                    loss -= p.ln() / n;
                    -1.0 / (n * p)
                } else {
                    loss -= (1.0 - p).ln() / n;
                    1.0 / (n * (1.0 - p))
                }
            })
            .collect()
    };
    let real = term(real, true);
    let fake = term(fake, false);
    let generated = term(generated, false);
    (loss, DiscGrad { real, fake, generated })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenLoss {
    /// Descend `mean log(1 - D(G(z)))`.
    #[default]
    Saturating,
    /// Descend `-mean log D(G(z))`.
    NonSaturating,
}

pub fn gen_loss_and_grad(generated: &[f64], mode: GenLoss) -> (f64, Vec<f64>) {
    if generated.is_empty() {
        return (0.0, Vec::new());
    }
    let n = generated.len() as f64;
    let mut loss = 0.0;
    let grad = generated
        .iter()
        .map(|&p| {
            let p = clamp_prob(p);
            match mode {
                GenLoss::Saturating => {
                    loss += (1.0 - p).ln() / n;
                    -1.0 / (n * (1.0 - p))
                }
                GenLoss::NonSaturating => {
                    loss -= p.ln() / n;
                    -1.0 / (n * p)
                }
            }
        })
        .collect();
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::common::RngStream;
    use ndarray::array;

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = MlpParams::init(&[3, 3, 1], Activation::Relu, &mut RngStream::new(1, 0)).unwrap();
        let b = MlpParams::init(&[3, 3, 1], Activation::Relu, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(a, b);
        for l in &a.layers {
            assert!(l.bias.iter().all(|v| *v == 0.0));
            let limit = (6.0 / (l.fan_in() + l.fan_out()) as f64).sqrt();
            assert!(l.weights.iter().all(|w| w.abs() <= limit));
        }
        assert!(MlpParams::init(&[], Activation::Relu, &mut RngStream::new(1, 0)).is_err());
        assert!(MlpParams::init(&[4], Activation::Relu, &mut RngStream::new(1, 0)).is_err());
        assert!(MlpParams::init(&[4, 0, 1], Activation::Relu, &mut RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn zero_network_outputs_half() {
        let p = MlpParams::zeros(&[4, 4, 4, 4], Activation::Relu).unwrap();
        let out = p.predict(array![[1.0, -2.0, 3.0, 0.5], [0.0, 0.0, 0.0, 0.0]].view()).unwrap();
        assert!(out.iter().all(|v| *v == 0.5));
    }

    #[test]
    fn outputs_stay_in_open_unit_interval() {
        let mut rng = RngStream::new(2, 0);
        let p = MlpParams::init(&[5, 5, 2], Activation::Relu, &mut rng).unwrap();
        let x = Array2::from_shape_simple_fn((1000, 5), || rng.random_range(-10.0..10.0));
        let (out, _) = p.forward(x.view()).unwrap();
        assert!(out.iter().all(|v| *v > 0.0 && *v < 1.0));
        assert_eq!(out, p.predict(x.view()).unwrap());
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let p = MlpParams::zeros(&[3, 1], Activation::Relu).unwrap();
        assert!(matches!(p.forward(array![[1.0, 2.0]].view()), Err(Error::Dimension { .. })));
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let mut rng = RngStream::new(4, 0);
        let p = MlpParams::init(&[3, 4, 2], Activation::Sigmoid, &mut rng).unwrap();
        let x = array![[0.1, 0.2, 0.3]];
        let (_, cache) = p.forward(x.view()).unwrap();
        let (g, dx) = p.backward(&cache, Array2::zeros((1, 2)).view()).unwrap();
        assert!(g.flatten().iter().all(|v| *v == 0.0));
        assert!(dx.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn duplicated_batch_doubles_gradient() {
        let mut rng = RngStream::new(5, 0);
        let p = MlpParams::init(&[3, 4, 1], Activation::Relu, &mut rng).unwrap();
        let x = array![[0.3, -0.2, 0.9]];
        let xx = array![[0.3, -0.2, 0.9], [0.3, -0.2, 0.9]];
        let (_, c1) = p.forward(x.view()).unwrap();
        let (_, c2) = p.forward(xx.view()).unwrap();
        let (g1, _) = p.backward(&c1, array![[0.7]].view()).unwrap();
        let (g2, _) = p.backward(&c2, array![[0.7], [0.7]].view()).unwrap();
        for (a, b) in g1.flatten().iter().zip(g2.flatten()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = RngStream::new(6, 0);
        let mut p = MlpParams::init(&[2, 2, 1], Activation::Relu, &mut rng).unwrap();
        let (_, cache) = p.forward(array![[0.5, 0.5]].view()).unwrap();
        let mut s = AdamState::new(&p, 1e-3, 0.9, 0.999);
        let g = Gradients::zeros_like(&p);
        adam_step(&mut p, &mut s, &g).unwrap();
        assert!(matches!(p.backward(&cache, array![[1.0]].view()), Err(Error::State(_))));
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut p = MlpParams::zeros(&[1, 1], Activation::Relu).unwrap();
        let mut s = AdamState::new(&p, 1e-3, 0.5, 0.999);
        let mut g = Gradients::zeros_like(&p);
        g.layers[0].weights[[0, 0]] = 0.37;
        g.layers[0].bias[0] = -2.5;
        adam_step(&mut p, &mut s, &g).unwrap();
        // m_hat = g and v_hat = g^2, so the step is lr * g / (|g| + eps)
        let w = p.layers[0].weights[[0, 0]];
        let b = p.layers[0].bias[0];
        assert!((w - (-1e-3 * 0.37 / (0.37 + 1e-8))).abs() < 1e-15);
        assert!((b - (1e-3 * 2.5 / (2.5 + 1e-8))).abs() < 1e-15);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut rng = RngStream::new(8, 0);
        let mut p = MlpParams::init(&[3, 2], Activation::Relu, &mut rng).unwrap();
        let before = p.flatten();
        let mut s = AdamState::new(&p, 1e-3, 0.5, 0.999);
        let zero = Gradients::zeros_like(&p);
        adam_step(&mut p, &mut s, &zero).unwrap();
        assert_eq!(before, p.flatten());
        assert_eq!(s.t, 1);
        let other = MlpParams::zeros(&[2, 2], Activation::Relu).unwrap();
        assert!(adam_step(&mut p, &mut s, &Gradients::zeros_like(&other)).is_err());
    }

    #[test]
    fn disc_loss_at_half() {
        let (loss, g) = disc_loss_and_grad(&[0.5; 4], &[0.5; 3], &[0.5; 5]);
        assert!((loss - 3.0 * 2f64.ln()).abs() < 1e-12);
        assert!((g.real[0] + 2.0 / 4.0).abs() < 1e-12);
        assert!((g.fake[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((g.generated[0] - 2.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_discriminator_loss_vanishes() {
        let (loss, _) = disc_loss_and_grad(&[1.0 - 1e-12; 3], &[1e-12; 3], &[0.0; 3]);
        assert!(loss > 0.0 && loss < 1e-6);
    }

    #[test]
    fn gen_loss_values() {
        let (loss, _) = gen_loss_and_grad(&[0.5; 6], GenLoss::Saturating);
        assert!((loss - 0.5f64.ln()).abs() < 1e-12);
        let (sat, _) = gen_loss_and_grad(&[1.0; 2], GenLoss::Saturating);
        assert!((sat - PROB_EPS.ln()).abs() < 1e-6);
        let (ns, _) = gen_loss_and_grad(&[0.5; 6], GenLoss::NonSaturating);
        assert!((ns - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let h = 1e-6;
        let probs = [0.2, 0.55, 0.9];
        let (_, g) = gen_loss_and_grad(&probs, GenLoss::Saturating);
        let (_, gn) = gen_loss_and_grad(&probs, GenLoss::NonSaturating);
        let (_, gd) = disc_loss_and_grad(&probs, &probs, &probs);
        for i in 0..3 {
            let fd = |f: &dyn Fn(&[f64]) -> f64| {
                let mut up = probs;
                let mut down = probs;
                up[i] += h;
                down[i] -= h;
                (f(&up) - f(&down)) / (2.0 * h)
            };
            let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
            assert!(rel(g[i], fd(&|p| gen_loss_and_grad(p, GenLoss::Saturating).0)) < 1e-6);
            assert!(rel(gn[i], fd(&|p| gen_loss_and_grad(p, GenLoss::NonSaturating).0)) < 1e-6);
            assert!(rel(gd.real[i], fd(&|p| disc_loss_and_grad(p, &probs, &probs).0)) < 1e-6);
            assert!(rel(gd.fake[i], fd(&|p| disc_loss_and_grad(&probs, p, &probs).0)) < 1e-6);
            assert!(rel(gd.generated[i], fd(&|p| disc_loss_and_grad(&probs, &probs, p).0)) < 1e-6);
        }
    }

    #[test]
    fn parameter_dump_round_trip() {
        let mut rng = RngStream::new(10, 0);
        let p = MlpParams::init(&[4, 3, 2], Activation::Relu, &mut rng).unwrap();
        let mut buf = Vec::new();
        p.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 * (1 + 3 + p.n_params()));
        let q = MlpParams::read_from(buf.as_slice(), Activation::Relu).unwrap();
        assert_eq!(p.flatten(), q.flatten());
        assert_eq!(p.dims(), q.dims());
        assert!(MlpParams::read_from(&buf[..buf.len() - 1], Activation::Relu).is_err());
    }
}
