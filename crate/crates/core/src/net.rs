//! The multilayer perceptron used as the PDE ansatz, its parameter
//! gradients, and the Adam optimizer.
//!
//! The network maps a scalar to a scalar and is always evaluated on
//! [`Jet3`]s, so every forward pass yields u, u', u'', u''' exactly (to
//! floating-point rounding). Parameter gradients are computed by reverse
//! accumulation *through* the jet arithmetic: the adjoint of each jet slot
//! is tracked, which makes gradients of losses that read u'' and u'''
//! (residual and residual-derivative terms) exact as well.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::jet::{Differentiable1D, Jet3};

/// Activation applied to every layer except the final (linear) one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
}

/// One dense layer: `z = W·a + b`, `W` row-major with `out_dim` rows of
/// `in_dim` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Fully connected tanh network with scalar input and scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layer_sizes: Vec<usize>,
    pub layers: Vec<Layer>,
    pub activation: Activation,
}

/// One real per network parameter, in network layout. Used for gradients
/// and for the Adam moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVec {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Adjoint of a loss contribution with respect to the four jet slots of a
/// network output, in slot order `(v, d1, d2, d3)`.
pub type JetCotangent = [f64; 4];

impl Mlp {
    /// Assemble a network from explicit layers, validating every shape.
    pub fn new(layer_sizes: Vec<usize>, layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least an input and an output layer, got sizes {layer_sizes:?}"
            )));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!(
                "layer sizes must be positive, got {layer_sizes:?}"
            )));
        }
        if layer_sizes[0] != 1 || *layer_sizes.last().unwrap() != 1 {
            return Err(Error::InvalidArgument(format!(
                "scalar-to-scalar network requires first and last size 1, got {layer_sizes:?}"
            )));
        }
        if layers.len() != layer_sizes.len() - 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} sizes imply {} layers, got {}",
                layer_sizes.len(),
                layer_sizes.len() - 1,
                layers.len()
            )));
        }
        for (l, layer) in layers.iter().enumerate() {
            let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
            if layer.weights.len() != fan_in * fan_out {
                return Err(Error::ShapeMismatch(format!(
                    "layer {l}: expected {fan_out}x{fan_in} weights, got {}",
                    layer.weights.len()
                )));
            }
            if layer.biases.len() != fan_out {
                return Err(Error::ShapeMismatch(format!(
                    "layer {l}: expected {fan_out} biases, got {}",
                    layer.biases.len()
                )));
            }
        }
        Ok(Self { layer_sizes, layers, activation })
    }

    /// Network of the given shape with every weight and bias zero.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        let layers = layer_sizes
            .windows(2)
            .map(|w| Layer { weights: vec![0.0; w[0] * w[1]], biases: vec![0.0; w[1]] })
            .collect();
        Self::new(layer_sizes.to_vec(), layers, Activation::Tanh)
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Forward pass on a jet-lifted input: returns
    /// (u(x), u'(x), u''(x), u'''(x)).
    pub fn forward(&self, x: f64) -> Jet3 {
        let mut a = vec![Jet3::lift(x)];
        let last = self.n_layers() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let fan_in = self.layer_sizes[l];
            let fan_out = self.layer_sizes[l + 1];
            let mut z = Vec::with_capacity(fan_out);
            for i in 0..fan_out {
                let row = &layer.weights[i * fan_in..(i + 1) * fan_in];
                let mut acc = Jet3::constant(layer.biases[i]);
                for (w, aj) in row.iter().zip(&a) {
                    acc = acc + *aj * *w;
                }
                z.push(acc);
            }
            a = if l < last { z.into_iter().map(Jet3::tanh).collect() } else { z };
        }
        a[0]
    }

    /// Forward pass that records per-layer inputs and pre-activations for
    /// reverse accumulation.
    fn forward_trace(&self, x: f64) -> Trace {
        let n = self.n_layers();
        let mut acts: Vec<Vec<Jet3>> = Vec::with_capacity(n + 1);
        let mut pres: Vec<Vec<Jet3>> = Vec::with_capacity(n);
        acts.push(vec![Jet3::lift(x)]);
        for (l, layer) in self.layers.iter().enumerate() {
            let fan_in = self.layer_sizes[l];
            let fan_out = self.layer_sizes[l + 1];
            let a = &acts[l];
            let mut z = Vec::with_capacity(fan_out);
            for i in 0..fan_out {
                let row = &layer.weights[i * fan_in..(i + 1) * fan_in];
                let mut acc = Jet3::constant(layer.biases[i]);
                for (w, aj) in row.iter().zip(a) {
                    acc = acc + *aj * *w;
                }
                z.push(acc);
            }
            let out =
                if l < n - 1 { z.iter().copied().map(Jet3::tanh).collect() } else { z.clone() };
            pres.push(z);
            acts.push(out);
        }
        Trace { acts, pres }
    }
}

impl Differentiable1D for Mlp {
    fn eval_jet(&self, x: f64) -> Jet3 {
        self.forward(x)
    }
}

struct Trace {
    /// `acts[0]` is the lifted input; `acts[l+1]` is the output of layer l.
    acts: Vec<Vec<Jet3>>,
    /// `pres[l]` is the pre-activation of layer l.
    pres: Vec<Vec<Jet3>>,
}

impl Trace {
    fn output(&self) -> Jet3 {
        self.acts.last().unwrap()[0]
    }
}

impl ParamVec {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &ParamVec) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    fn shape_matches(&self, net: &Mlp) -> bool {
        self.weights.len() == net.layers.len()
            && self.biases.len() == net.layers.len()
            && self
                .weights
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.len() == l.weights.len())
            && self
                .biases
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.len() == l.biases.len())
    }
}

/// Glorot-style initialization: weights i.i.d. uniform on
/// ±sqrt(6/(fan_in+fan_out)), biases zero. Fully deterministic per seed.
pub fn init_net(seed: u64, layer_sizes: &[usize]) -> Result<Mlp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(layer_sizes.len().saturating_sub(1));
    for w in layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        let weights = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
        layers.push(Layer { weights, biases: vec![0.0; fan_out] });
    }
    Mlp::new(layer_sizes.to_vec(), layers, Activation::Tanh)
}

/// Gradient of a sample-summed loss with respect to every weight and bias.
///
/// `term(i, out)` receives the index and network output jet for `xs[i]` and
/// returns that sample's loss contribution together with its adjoint with
/// respect to the four output slots. The returned scalar is the summed
/// loss; any 1/N weighting belongs inside `term`.
pub fn param_gradient<F>(net: &Mlp, xs: &[f64], mut term: F) -> Result<(f64, ParamVec)>
where
    F: FnMut(usize, Jet3) -> (f64, JetCotangent),
{
    let mut grads = ParamVec::zeros_like(net);
    let mut total = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let trace = net.forward_trace(x);
        let (value, cot) = term(i, trace.output());
        total += value;
        backprop(net, &trace, cot, &mut grads);
    }
    if !total.is_finite() {
        return Err(Error::NonFinite(format!("loss over {} samples", xs.len())));
    }
    Ok((total, grads))
}

/// Reverse sweep for one sample, accumulating into `grads`.
///
/// Linear layer, per slot s: dW_ij += zbar_i[s]·a_j[s]; db_i += zbar_i[v];
/// abar_j[s] = sum_i W_ij·zbar_i[s]. The tanh adjoint below is the
/// transpose of the order-3 chain rule's Jacobian with respect to the
/// input jet (g1, g2, g3 its derivative slots; f1..f4 the tanh derivative
/// values at the pre-activation).
fn backprop(net: &Mlp, trace: &Trace, cot: JetCotangent, grads: &mut ParamVec) {
    let n = net.n_layers();
    let mut abar: Vec<JetCotangent> = vec![cot];
    for l in (0..n).rev() {
        let fan_in = net.layer_sizes[l];
        let fan_out = net.layer_sizes[l + 1];
        let layer = &net.layers[l];

        // Adjoint of the pre-activation. The final layer is linear, so the
        // activation adjoint is the identity there.
        let zbar: Vec<JetCotangent> = if l == n - 1 {
            abar
        } else {
            trace.pres[l]
                .iter()
                .zip(&abar)
                .map(|(z, c)| tanh_adjoint(*z, *c))
                .collect()
        };

        let a = &trace.acts[l];
        let gw = &mut grads.weights[l];
        let gb = &mut grads.biases[l];
        for i in 0..fan_out {
            let zb = zbar[i];
            gb[i] += zb[0];
            let row = &mut gw[i * fan_in..(i + 1) * fan_in];
            for (j, gj) in row.iter_mut().enumerate() {
                let aj = a[j];
                *gj += zb[0] * aj.v + zb[1] * aj.d1 + zb[2] * aj.d2 + zb[3] * aj.d3;
            }
        }

        if l > 0 {
            let mut prev = vec![[0.0; 4]; fan_in];
            for i in 0..fan_out {
                let zb = zbar[i];
                let row = &layer.weights[i * fan_in..(i + 1) * fan_in];
                for (j, &w) in row.iter().enumerate() {
                    for s in 0..4 {
                        prev[j][s] += w * zb[s];
                    }
                }
            }
            abar = prev;
        } else {
            break;
        }
    }
}

/// Transpose-Jacobian of the order-3 tanh chain rule at pre-activation
/// jet z, applied to cotangent c.
fn tanh_adjoint(z: Jet3, c: JetCotangent) -> JetCotangent {
    let t = z.v.tanh();
    let s = 1.0 - t * t;
    // tanh derivative chain: f1 = 1-t^2, f2 = -2t(1-t^2),
    // f3 = (6t^2-2)(1-t^2), f4 = 8t(1-t^2)(2-3t^2).
    let f1 = s;
    let f2 = -2.0 * t * s;
    let f3 = (6.0 * t * t - 2.0) * s;
    let f4 = 8.0 * t * s * (2.0 - 3.0 * t * t);
    let (g1, g2, g3) = (z.d1, z.d2, z.d3);
    [
        c[0] * f1
            + c[1] * f2 * g1
            + c[2] * (f3 * g1 * g1 + f2 * g2)
            + c[3] * (f4 * g1 * g1 * g1 + 3.0 * f3 * g1 * g2 + f2 * g3),
        c[1] * f1 + c[2] * 2.0 * f2 * g1 + c[3] * (3.0 * f3 * g1 * g1 + 3.0 * f2 * g2),
        c[2] * f1 + c[3] * 3.0 * f2 * g1,
        c[3] * f1,
    ]
}

/// Bias-corrected Adam with per-parameter moment buffers.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub m: ParamVec,
    pub v: ParamVec,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
}

impl AdamState {
    /// Fresh optimizer state with the standard defaults
    /// beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self {
            step: 0,
            m: ParamVec::zeros_like(net),
            v: ParamVec::zeros_like(net),
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
        }
    }

    /// One bias-corrected update, in place. Deterministic given inputs.
    pub fn apply(&mut self, net: &mut Mlp, grads: &ParamVec) -> Result<()> {
        if !grads.shape_matches(net) || !self.m.shape_matches(net) {
            return Err(Error::ShapeMismatch(
                "gradient or moment buffers do not match the network".into(),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for l in 0..net.layers.len() {
            update_slice(
                &mut net.layers[l].weights,
                &mut self.m.weights[l],
                &mut self.v.weights[l],
                &grads.weights[l],
                self.lr,
                self.beta1,
                self.beta2,
                self.eps_adam,
                bc1,
                bc2,
            );
            update_slice(
                &mut net.layers[l].biases,
                &mut self.m.biases[l],
                &mut self.v.biases[l],
                &grads.biases[l],
                self.lr,
                self.beta1,
                self.beta2,
                self.eps_adam,
                bc1,
                bc2,
            );
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn update_slice(
    p: &mut [f64],
    m: &mut [f64],
    v: &mut [f64],
    g: &[f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..p.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}
