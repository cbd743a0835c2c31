//! Fully connected Q-network with tanh hidden layers, exact reverse-mode
//! gradients of the squared TD error, and Adam.
//!
//! All parameters live in one flat vector. Layer `l` maps `dims[l]` inputs
//! to `dims[l + 1]` outputs; its weights are stored row-major as
//! `(out, in)` followed by the `out` biases.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy)]
struct LayerView {
    inputs: usize,
    outputs: usize,
    weights: usize,
    bias: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    dims: Vec<usize>,
    values: Vec<f64>,
}

/// Gradient with the same layout as [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub values: Vec<f64>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|g| *g *= s);
    }
}

fn layer_views(dims: &[usize]) -> Vec<LayerView> {
    let mut off = 0;
    dims.windows(2)
        .map(|w| {
            let v = LayerView {
                inputs: w[0],
                outputs: w[1],
                weights: off,
                bias: off + w[0] * w[1],
            };
            off = v.bias + w[1];
            v
        })
        .collect()
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::config(
            "layer_dims",
            "needs at least input and output sizes",
        ));
    }
    if dims.contains(&0) {
        return Err(Error::config("layer_dims", "layer sizes must be > 0"));
    }
    Ok(())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Xavier-uniform weights and zero biases, deterministic per seed.
pub fn init_params(dims: &[usize], seed: u64) -> Result<MlpParams> {
    check_dims(dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; param_count(dims)];
    for v in layer_views(dims) {
        let limit = (6.0 / (v.inputs + v.outputs) as f64).sqrt();
        for w in &mut values[v.weights..v.bias] {
            *w = rng.gen_range(-limit..limit);
        }
    }
    Ok(MlpParams {
        dims: dims.to_vec(),
        values,
    })
}

/// Squared-error reduction over a minibatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Sum,
    Mean,
}

/// Minibatch of `(state, action, target)` triples; states are stored
/// row-major.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub states: Vec<f64>,
    pub actions: Vec<usize>,
    pub targets: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Experience tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

impl MlpParams {
    /// Builds parameters from explicit per-layer `(weights, bias)` arrays.
    pub fn from_layers(dims: &[usize], layers: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        check_dims(dims)?;
        let views = layer_views(dims);
        if layers.len() != views.len() {
            return Err(Error::DimensionMismatch {
                context: "layer count",
                expected: views.len(),
                actual: layers.len(),
            });
        }
        let mut values = Vec::with_capacity(param_count(dims));
        for (v, (w, b)) in views.iter().zip(layers) {
            if w.len() != v.inputs * v.outputs {
                return Err(Error::DimensionMismatch {
                    context: "layer weights",
                    expected: v.inputs * v.outputs,
                    actual: w.len(),
                });
            }
            if b.len() != v.outputs {
                return Err(Error::DimensionMismatch {
                    context: "layer bias",
                    expected: v.outputs,
                    actual: b.len(),
                });
            }
            values.extend_from_slice(w);
            values.extend_from_slice(b);
        }
        if !values.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(Self {
            dims: dims.to_vec(),
            values,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("validated dims")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(weights, bias)` of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let v = layer_views(&self.dims)[l];
        (
            &self.values[v.weights..v.bias],
            &self.values[v.bias..v.bias + v.outputs],
        )
    }

    pub fn zeros_like(&self) -> Gradients {
        Gradients {
            values: vec![0.0; self.values.len()],
        }
    }

    pub fn copy_from(&mut self, other: &MlpParams) {
        assert_eq!(self.dims, other.dims, "copy between mismatched networks");
        self.values.copy_from_slice(&other.values);
    }

    /// Q-values for a single input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward_batch(x, 1)
    }

    /// Q-values for `batch` inputs stored row-major; output is row-major
    /// `(batch, outputs)`.
    pub fn forward_batch(&self, xs: &[f64], batch: usize) -> Result<Vec<f64>> {
        if xs.len() != batch * self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: batch * self.input_dim(),
                actual: xs.len(),
            });
        }
        let views = layer_views(&self.dims);
        let mut cur = xs.to_vec();
        for (l, v) in views.iter().enumerate() {
            let mut next = self.affine(v, &cur, batch);
            if l + 1 < views.len() {
                next.iter_mut().for_each(|z| *z = z.tanh());
            }
            cur = next;
        }
        Ok(cur)
    }

    fn affine(&self, v: &LayerView, input: &[f64], batch: usize) -> Vec<f64> {
        let w = &self.values[v.weights..v.bias];
        let b = &self.values[v.bias..v.bias + v.outputs];
        let mut out = vec![0.0; batch * v.outputs];
        for (x, z) in input
            .chunks_exact(v.inputs)
            .zip(out.chunks_exact_mut(v.outputs))
        {
            for (k, zk) in z.iter_mut().enumerate() {
                *zk = b[k] + dot(&w[k * v.inputs..(k + 1) * v.inputs], x);
            }
        }
        out
    }
}

/// Squared TD error of the chosen actions and its exact gradient. Only the
/// output unit of each sample's action receives an error signal.
pub fn loss_and_grad(
    p: &MlpParams,
    batch: &Batch,
    reduction: Reduction,
) -> Result<(f64, Gradients)> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if batch.targets.len() != n {
        return Err(Error::DimensionMismatch {
            context: "batch targets",
            expected: n,
            actual: batch.targets.len(),
        });
    }
    if batch.states.len() != n * p.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "batch states",
            expected: n * p.input_dim(),
            actual: batch.states.len(),
        });
    }
    let out_dim = p.output_dim();
    if let Some(&a) = batch.actions.iter().find(|&&a| a >= out_dim) {
        return Err(Error::ActionOutOfRange {
            index: a,
            count: out_dim,
        });
    }

    let views = layer_views(&p.dims);
    let depth = views.len();
    // acts[l] is the input to layer l; acts[depth] is the output layer.
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(depth + 1);
    acts.push(batch.states.clone());
    for (l, v) in views.iter().enumerate() {
        let mut z = p.affine(v, &acts[l], n);
        if l + 1 < depth {
            z.iter_mut().for_each(|x| *x = x.tanh());
        }
        acts.push(z);
    }

    let scale = match reduction {
        Reduction::Sum => 1.0,
        Reduction::Mean => 1.0 / n as f64,
    };
    let q = &acts[depth];
    let mut loss = 0.0;
    let mut delta = vec![0.0; n * out_dim];
    for s in 0..n {
        let a = batch.actions[s];
        let resid = batch.targets[s] - q[s * out_dim + a];
        loss += resid * resid;
        delta[s * out_dim + a] = -2.0 * resid * scale;
    }
    loss *= scale;

    let mut grads = p.zeros_like();
    for l in (0..depth).rev() {
        let v = views[l];
        let input = &acts[l];
        let w = &p.values[v.weights..v.bias];
        let mut prev = if l > 0 {
            vec![0.0; n * v.inputs]
        } else {
            Vec::new()
        };
        {
            let (gw, gb) =
                grads.values[v.weights..v.bias + v.outputs].split_at_mut(v.bias - v.weights);
            for s in 0..n {
                let x = &input[s * v.inputs..(s + 1) * v.inputs];
                let d = &delta[s * v.outputs..(s + 1) * v.outputs];
                for (k, &dk) in d.iter().enumerate() {
                    if dk == 0.0 {
                        continue;
                    }
                    gb[k] += dk;
                    axpy(dk, x, &mut gw[k * v.inputs..(k + 1) * v.inputs]);
                    if l > 0 {
                        axpy(
                            dk,
                            &w[k * v.inputs..(k + 1) * v.inputs],
                            &mut prev[s * v.inputs..(s + 1) * v.inputs],
                        );
                    }
                }
            }
        }
        if l > 0 {
            // tanh'(z) = 1 - tanh(z)^2, with tanh(z) stored in acts[l].
            for (g, h) in prev.iter_mut().zip(&acts[l]) {
                *g *= 1.0 - h * h;
            }
            delta = prev;
        }
    }
    Ok((loss, grads))
}

/// Bootstrapped targets `r + gamma * max_a' Q(s', a'; target)`, or `r` for
/// terminal transitions. Reads only the target network.
pub fn td_targets(batch: &[&Transition], target: &MlpParams, gamma: f64) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    let dim = target.input_dim();
    let mut xs = Vec::with_capacity(batch.len() * dim);
    for t in batch {
        if t.next_state.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "next state",
                expected: dim,
                actual: t.next_state.len(),
            });
        }
        xs.extend_from_slice(&t.next_state);
    }
    let q = target.forward_batch(&xs, batch.len())?;
    let out = target.output_dim();
    Ok(batch
        .iter()
        .zip(q.chunks_exact(out))
        .map(|(t, qs)| {
            if t.done {
                t.reward
            } else {
                t.reward + gamma * qs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &MlpParams, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; params.len()],
            v: vec![0.0; params.len()],
            t: 0,
        }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut MlpParams, grads: &Gradients) -> Result<()> {
        if grads.values.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::DimensionMismatch {
                context: "adam step",
                expected: params.len(),
                actual: grads.values.len(),
            });
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.t += 1;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, g), m), v) in params
            .values
            .iter_mut()
            .zip(&grads.values)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

pub fn adam_step(params: &mut MlpParams, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    state.step(params, grads)
}

#[derive(Serialize, Deserialize)]
struct CheckpointLayer {
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    layer_dims: Vec<usize>,
    layers: Vec<CheckpointLayer>,
}

impl MlpParams {
    /// JSON checkpoint; floats are written in shortest round-trip form.
    pub fn to_checkpoint_string(&self) -> String {
        let layers = (0..self.dims.len() - 1)
            .map(|l| {
                let (w, b) = self.layer(l);
                CheckpointLayer {
                    weights: w.to_vec(),
                    bias: b.to_vec(),
                }
            })
            .collect();
        let ck = Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            layer_dims: self.dims.clone(),
            layers,
        };
        serde_json::to_string(&ck).expect("checkpoint serializes")
    }

    pub fn from_checkpoint_str(s: &str) -> Result<Self> {
        let ck: Checkpoint =
            serde_json::from_str(s).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {} (expected {CHECKPOINT_FORMAT_VERSION})",
                ck.format_version
            )));
        }
        let layers: Vec<(Vec<f64>, Vec<f64>)> =
            ck.layers.into_iter().map(|l| (l.weights, l.bias)).collect();
        MlpParams::from_layers(&ck.layer_dims, &layers)
            .map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_checkpoint_string().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_str(&s)
    }
}
