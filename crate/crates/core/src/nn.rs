//! Small dense networks with hand-written backpropagation.
//!
//! Parameters live in one flat `Vec<f64>` per network so optimizers and target
//! averaging can treat them uniformly. Each layer stores its weights row-major
//! (`out x in`) followed by its biases.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("input has {found} values, network expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid layout: {0}")]
    Layout(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        }
    }

    pub fn from_tag(t: u8) -> Option<Self> {
        match t {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

/// Layer sizes and activations of a fully connected stack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub dims: Vec<usize>,
    pub acts: Vec<Activation>,
}

impl MlpShape {
    pub fn new(dims: Vec<usize>, acts: Vec<Activation>) -> Result<Self, NetError> {
        if dims.len() < 2 {
            return Err(NetError::Layout("need at least input and output sizes".into()));
        }
        if acts.len() != dims.len() - 1 {
            return Err(NetError::Layout(format!("{} layers but {} activations", dims.len() - 1, acts.len())));
        }
        if dims.contains(&0) {
            return Err(NetError::Layout("zero-width layer".into()));
        }
        Ok(Self { dims, acts })
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.acts.len()
    }

    pub fn param_count(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn layer_offsets(&self) -> impl Iterator<Item = (usize, usize, usize, Activation)> + '_ {
        let mut off = 0;
        self.dims.windows(2).zip(&self.acts).map(move |(w, &act)| {
            let start = off;
            off += w[0] * w[1] + w[1];
            (start, w[0], w[1], act)
        })
    }

    /// Fan-in scaled uniform initialization.
    pub fn init_params<R: Rng>(&self, rng: &mut R, out: &mut [f64], last_layer_scale: f64) {
        let n = self.n_layers();
        for (li, (start, n_in, n_out, _)) in self.layer_offsets().enumerate() {
            let mut bound = 1.0 / (n_in as f64).sqrt();
            if li + 1 == n {
                bound *= last_layer_scale;
            }
            for p in &mut out[start..start + n_in * n_out + n_out] {
                *p = rng.gen_range(-bound..bound);
            }
        }
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for (start, n_in, n_out, act) in self.layer_offsets() {
            cur = dense(params, start, n_in, n_out, act, &cur);
        }
        cur
    }

    /// Forward pass keeping every layer's output for [`MlpShape::backward`].
    pub fn forward_cached(&self, params: &[f64], x: &[f64]) -> Vec<Vec<f64>> {
        let mut outs = Vec::with_capacity(self.n_layers() + 1);
        outs.push(x.to_vec());
        for (start, n_in, n_out, act) in self.layer_offsets() {
            let next = dense(params, start, n_in, n_out, act, outs.last().unwrap());
            outs.push(next);
        }
        outs
    }

    /// Accumulates parameter gradients into `grads` and returns the input gradient.
    pub fn backward(&self, params: &[f64], cache: &[Vec<f64>], grad_out: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let layers: Vec<_> = self.layer_offsets().collect();
        let mut delta = grad_out.to_vec();
        for (li, &(start, n_in, n_out, act)) in layers.iter().enumerate().rev() {
            let input = &cache[li];
            let output = &cache[li + 1];
            for (d, &y) in delta.iter_mut().zip(output) {
                *d *= act.grad_from_output(y);
            }
            let (w, b) = (start, start + n_in * n_out);
            let mut grad_in = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                grads[b + o] += d;
                let row = w + o * n_in;
                for i in 0..n_in {
                    grads[row + i] += d * input[i];
                    grad_in[i] += d * params[row + i];
                }
            }
            delta = grad_in;
        }
        delta
    }
}

fn dense(params: &[f64], start: usize, n_in: usize, n_out: usize, act: Activation, x: &[f64]) -> Vec<f64> {
    let (w, b) = (&params[start..start + n_in * n_out], &params[start + n_in * n_out..start + n_in * n_out + n_out]);
    (0..n_out)
        .map(|o| {
            let row = &w[o * n_in..(o + 1) * n_in];
            let s: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b[o];
            act.apply(s)
        })
        .collect()
}

/// Two-branch network: a dense depth branch whose features are concatenated
/// with a small vector of extra inputs and fed through a trunk.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchNet {
    pub depth: MlpShape,
    pub trunk: MlpShape,
    pub params: Vec<f64>,
}

/// Intermediate values of one [`BranchNet`] forward pass.
#[derive(Debug, Clone)]
pub struct BranchCache {
    depth: Vec<Vec<f64>>,
    trunk: Vec<Vec<f64>>,
}

impl BranchCache {
    pub fn output(&self) -> &[f64] {
        self.trunk.last().unwrap()
    }
}

impl BranchNet {
    pub fn zeros(depth: MlpShape, trunk: MlpShape) -> Result<Self, NetError> {
        if trunk.input_dim() < depth.output_dim() {
            return Err(NetError::Layout(format!(
                "trunk input {} smaller than depth features {}",
                trunk.input_dim(),
                depth.output_dim()
            )));
        }
        let n = depth.param_count() + trunk.param_count();
        Ok(Self { depth, trunk, params: vec![0.0; n] })
    }

    pub fn random<R: Rng>(depth: MlpShape, trunk: MlpShape, rng: &mut R, last_layer_scale: f64) -> Result<Self, NetError> {
        let mut net = Self::zeros(depth, trunk)?;
        let split = net.depth.param_count();
        let (d, t) = net.params.split_at_mut(split);
        net.depth.init_params(rng, d, 1.0);
        net.trunk.init_params(rng, t, last_layer_scale);
        Ok(net)
    }

    pub fn depth_dim(&self) -> usize {
        self.depth.input_dim()
    }

    pub fn extra_dim(&self) -> usize {
        self.trunk.input_dim() - self.depth.output_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.trunk.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn split(&self) -> (&[f64], &[f64]) {
        self.params.split_at(self.depth.param_count())
    }

    fn check(&self, depth: &[f64], extra: &[f64]) -> Result<(), NetError> {
        if depth.len() != self.depth_dim() {
            return Err(NetError::DimensionMismatch { expected: self.depth_dim(), found: depth.len() });
        }
        if extra.len() != self.extra_dim() {
            return Err(NetError::DimensionMismatch { expected: self.extra_dim(), found: extra.len() });
        }
        Ok(())
    }

    pub fn forward(&self, depth: &[f64], extra: &[f64]) -> Result<Vec<f64>, NetError> {
        self.check(depth, extra)?;
        let (pd, pt) = self.split();
        let mut x = self.depth.forward(pd, depth);
        x.extend_from_slice(extra);
        Ok(self.trunk.forward(pt, &x))
    }

    pub fn forward_cached(&self, depth: &[f64], extra: &[f64]) -> Result<BranchCache, NetError> {
        self.check(depth, extra)?;
        let (pd, pt) = self.split();
        let depth_cache = self.depth.forward_cached(pd, depth);
        let mut x = depth_cache.last().unwrap().clone();
        x.extend_from_slice(extra);
        let trunk_cache = self.trunk.forward_cached(pt, &x);
        Ok(BranchCache { depth: depth_cache, trunk: trunk_cache })
    }

    /// Accumulates into `grads` (same layout as `params`) and returns the
    /// gradient with respect to the extra inputs.
    pub fn backward(&self, cache: &BranchCache, grad_out: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let (pd, pt) = self.split();
        let (gd, gt) = grads.split_at_mut(self.depth.param_count());
        let grad_x = self.trunk.backward(pt, &cache.trunk, grad_out, gt);
        let n_feat = self.depth.output_dim();
        self.depth.backward(pd, &cache.depth, &grad_x[..n_feat], gd);
        grad_x[n_feat..].to_vec()
    }
}
