//! Minimal double-precision MLP with manual backpropagation.
//!
//! Hidden layers are ReLU, the output layer is identity; weights are stored
//! row-major per layer. This is deliberately a fixed architecture family
//! (affine + ReLU chains), not a general autodiff engine: the backward pass
//! is hand-derived and checked against central finite differences in tests.

pub(crate) mod checkpoint;
mod optim;

pub use checkpoint::{load_mlp, save_mlp};
pub use optim::{apply_update, huber, OptAlgo, OptimizerState};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    /// weights[l] is a (layer_sizes[l+1] x layer_sizes[l]) row-major matrix.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Parameter-shaped gradient accumulator. `backward_into` adds into it, so
/// one instance serves a whole batch between `zero` calls.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Reusable forward-pass storage: post-activation of every layer (index 0 is
/// the input itself) plus two delta buffers for the backward sweep.
#[derive(Debug, Clone)]
pub struct Scratch {
    acts: Vec<Vec<f64>>,
    delta_a: Vec<f64>,
    delta_b: Vec<f64>,
}

impl Mlp {
    fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "mlp needs at least input and output layers, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config(format!("mlp layer sizes must be positive, got {layer_sizes:?}")));
        }
        Ok(())
    }

    /// He-uniform initialization (bound sqrt(6/fan_in)) with zero biases,
    /// deterministic per seed.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Mlp> {
        Self::validate_sizes(layer_sizes)?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for l in 0..layer_sizes.len() - 1 {
            let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..=bound))
                .collect();
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Mlp { layer_sizes: layer_sizes.to_vec(), weights, biases })
    }

    /// All-zero parameters; useful as a fixed point in tests.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Mlp> {
        Self::validate_sizes(layer_sizes)?;
        let weights = (0..layer_sizes.len() - 1)
            .map(|l| vec![0.0; layer_sizes[l] * layer_sizes[l + 1]])
            .collect();
        let biases = (0..layer_sizes.len() - 1).map(|l| vec![0.0; layer_sizes[l + 1]]).collect();
        Ok(Mlp { layer_sizes: layer_sizes.to_vec(), weights, biases })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn in_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Test/diagnostic access to one weight; panics on out-of-range indices.
    pub fn weight(&self, layer: usize, row: usize, col: usize) -> f64 {
        self.weights[layer][row * self.layer_sizes[layer] + col]
    }

    pub fn set_weight(&mut self, layer: usize, row: usize, col: usize, v: f64) {
        self.weights[layer][row * self.layer_sizes[layer] + col] = v;
    }

    pub fn bias(&self, layer: usize, row: usize) -> f64 {
        self.biases[layer][row]
    }

    pub fn set_bias(&mut self, layer: usize, row: usize, v: f64) {
        self.biases[layer][row] = v;
    }

    /// Flat mutable view over every parameter, weights then biases per layer.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for l in 0..self.weights.len() {
            self.weights[l].iter_mut().for_each(&mut f);
            self.biases[l].iter_mut().for_each(&mut f);
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut scratch = Scratch::for_net(self);
        self.forward_scratch(x, &mut scratch)?;
        Ok(scratch.acts.last().unwrap().clone())
    }

    /// Forward pass that records every layer's post-activation for a later
    /// backward sweep. The output lives in `scratch.output()`.
    pub fn forward_scratch(&self, x: &[f64], scratch: &mut Scratch) -> Result<()> {
        if x.len() != self.in_dim() {
            return Err(Error::State(format!(
                "forward: input length {} does not match d_in {}",
                x.len(),
                self.in_dim()
            )));
        }
        debug_assert_eq!(scratch.acts.len(), self.layer_sizes.len());
        scratch.acts[0].copy_from_slice(x);
        let n_layers = self.weights.len();
        for l in 0..n_layers {
            let (prev, rest) = scratch.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut rest[0];
            affine(&self.weights[l], &self.biases[l], input, out);
            if l != n_layers - 1 {
                out.iter_mut().for_each(|v| {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                });
            }
        }
        Ok(())
    }

    /// Accumulates dLoss/dparams into `grads`, where `upstream` is
    /// dLoss/doutput for the forward pass recorded in `scratch`.
    pub fn backward_into(&self, scratch: &mut Scratch, upstream: &[f64], grads: &mut Gradients) -> Result<()> {
        if upstream.len() != self.out_dim() {
            return Err(Error::State(format!(
                "backward: upstream length {} does not match d_out {}",
                upstream.len(),
                self.out_dim()
            )));
        }
        if !grads.shape_matches(self) {
            return Err(Error::State("backward: gradient shapes do not match the network".into()));
        }
        scratch.delta_a[..upstream.len()].copy_from_slice(upstream);
        let mut cur_is_a = true;
        for l in (0..self.weights.len()).rev() {
            let (n_out, n_in) = (self.layer_sizes[l + 1], self.layer_sizes[l]);
            let (delta, next_delta) = if cur_is_a {
                (&mut scratch.delta_a, &mut scratch.delta_b)
            } else {
                (&mut scratch.delta_b, &mut scratch.delta_a)
            };
            let input = &scratch.acts[l];
            let gw = &mut grads.weights[l];
            let gb = &mut grads.biases[l];
            for o in 0..n_out {
                let d = delta[o];
                gb[o] += d;
                if d != 0.0 {
                    let row = &mut gw[o * n_in..(o + 1) * n_in];
                    for (g, xi) in row.iter_mut().zip(input) {
                        *g += d * xi;
                    }
                }
            }
            if l > 0 {
                // propagate through the affine map, then gate by ReLU
                // (derivative 1 exactly where the post-activation is > 0)
                let w = &self.weights[l];
                for i in 0..n_in {
                    next_delta[i] = if input[i] > 0.0 {
                        let mut acc = 0.0;
                        for o in 0..n_out {
                            acc += delta[o] * w[o * n_in + i];
                        }
                        acc
                    } else {
                        0.0
                    };
                }
                cur_is_a = !cur_is_a;
            }
        }
        Ok(())
    }

    /// One-shot convenience: forward at `x`, then gradients of
    /// `upstream · output` with respect to all parameters.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<Gradients> {
        let mut scratch = Scratch::for_net(self);
        self.forward_scratch(x, &mut scratch)?;
        let mut grads = Gradients::zeros_like(self);
        self.backward_into(&mut scratch, upstream, &mut grads)?;
        Ok(grads)
    }

    /// Copies all parameters from `src` into `self`; shapes must match.
    pub fn copy_from(&mut self, src: &Mlp) -> Result<()> {
        if self.layer_sizes != src.layer_sizes {
            return Err(Error::State(format!(
                "copy: layer sizes {:?} vs {:?}",
                self.layer_sizes, src.layer_sizes
            )));
        }
        for (d, s) in self.weights.iter_mut().zip(&src.weights) {
            d.copy_from_slice(s);
        }
        for (d, s) in self.biases.iter_mut().zip(&src.biases) {
            d.copy_from_slice(s);
        }
        Ok(())
    }
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), b.len() * x.len());
    debug_assert_eq!(out.len(), b.len());
    for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(x.len()).zip(b)) {
        let mut acc = *bias;
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        *o = acc;
    }
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Gradients {
        Gradients {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        for w in &mut self.weights {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Multiplies every gradient by `s` (e.g. 1/batch_size).
    pub fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            w.iter_mut().for_each(|v| *v *= s);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn shape_matches(&self, net: &Mlp) -> bool {
        self.weights.len() == net.weights.len()
            && self.weights.iter().zip(&net.weights).all(|(a, b)| a.len() == b.len())
            && self.biases.iter().zip(&net.biases).all(|(a, b)| a.len() == b.len())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().flatten().chain(self.biases.iter().flatten()).all(|v| v.is_finite())
    }

    pub fn weight_grad(&self, layer: usize, row: usize, col: usize, n_in: usize) -> f64 {
        self.weights[layer][row * n_in + col]
    }

    pub fn bias_grad(&self, layer: usize, row: usize) -> f64 {
        self.biases[layer][row]
    }
}

impl Scratch {
    pub fn for_net(net: &Mlp) -> Scratch {
        let widest = *net.layer_sizes.iter().max().unwrap();
        Scratch {
            acts: net.layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            delta_a: vec![0.0; widest],
            delta_b: vec![0.0; widest],
        }
    }

    /// Output of the most recent `forward_scratch`.
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}
