//! Multi-layer GCN with hand-derived backpropagation and Adam.

mod adam;
mod checkpoint;
mod loss;

pub use adam::AdamState;
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use loss::{argmax_rows, softmax_cross_entropy};

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use thiserror::Error;

use crate::graph::Laplacian;
use crate::sampling::BatchPlan;
use crate::sparse::{matmul, matmul_tn, CsrMatrix};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite values at layer {layer}; training diverged")]
    Divergence { layer: usize },
    #[error("label {label} at position {position} is outside 0..{num_classes}")]
    LabelOutOfRange {
        position: usize,
        label: usize,
        num_classes: usize,
    },
    #[error("non-finite gradient for weight matrix {layer}")]
    NonFiniteGradient { layer: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Stack of weight matrices `W^(0) .. W^(L-1)`, `W^(l)` of shape
/// `d_l x d_{l+1}`. Rectifier after every layer but the last; no biases.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    weights: Vec<Array2<f64>>,
}

impl GcnModel {
    pub fn from_weights(weights: Vec<Array2<f64>>) -> Result<Self, ModelError> {
        if weights.is_empty() {
            return Err(ModelError::Shape("model needs at least one layer".into()));
        }
        for (l, pair) in weights.windows(2).enumerate() {
            if pair[0].ncols() != pair[1].nrows() {
                return Err(ModelError::Shape(format!(
                    "W^({l}) has {} columns but W^({}) has {} rows",
                    pair[0].ncols(),
                    l + 1,
                    pair[1].nrows()
                )));
            }
        }
        if let Some(l) = weights.iter().position(|w| w.iter().any(|v| !v.is_finite())) {
            return Err(ModelError::Divergence { layer: l });
        }
        Ok(Self { weights })
    }

    /// Glorot-uniform initialization, entries in `±sqrt(6 / (d_in + d_out))`.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self, ModelError> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(ModelError::Shape(format!(
                "need at least two positive dims, got {dims:?}"
            )));
        }
        let weights = dims
            .windows(2)
            .map(|d| {
                let bound = (6.0 / (d[0] + d[1]) as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                Array2::from_shape_simple_fn((d[0], d[1]), || dist.sample(rng))
            })
            .collect();
        Ok(Self { weights })
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// `[d_0, d_1, .., d_L]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.weights[0].nrows()];
        d.extend(self.weights.iter().map(|w| w.ncols()));
        d
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum()
    }

    /// Exact forward pass `Z^(l) = P H^(l-1) W^(l-1)` over the whole graph;
    /// returns `Z^(L)` for every node.
    pub fn forward_exact(&self, p: &Laplacian, x: &Array2<f64>) -> Result<Array2<f64>, ModelError> {
        if x.nrows() != p.num_nodes() {
            return Err(ModelError::Shape(format!(
                "features have {} rows, graph has {} nodes",
                x.nrows(),
                p.num_nodes()
            )));
        }
        Ok(self.hidden_exact(p, x, self.num_layers())?.pop().expect("L >= 1"))
    }

    /// Exact pre-activations `Z^(1) .. Z^(upto)`.
    pub fn hidden_exact(&self, p: &Laplacian, x: &Array2<f64>, upto: usize) -> Result<Vec<Array2<f64>>, ModelError> {
        self.check_input_dim(x.ncols())?;
        let mut out = Vec::with_capacity(upto);
        let mut h = x.view().to_owned();
        for l in 0..upto.min(self.num_layers()) {
            let z = propagate(p.matrix(), h.view(), self.weights[l].view());
            if z.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::Divergence { layer: l + 1 });
            }
            h = relu(&z);
            out.push(z);
        }
        Ok(out)
    }

    /// Sampled forward pass through `plan`, starting from the rows of `x`
    /// listed in `plan.input_nodes`. Returns logits for `plan.batch_nodes`.
    pub fn forward_sampled<'p>(
        &self,
        plan: &'p BatchPlan,
        x: &Array2<f64>,
    ) -> Result<(Array2<f64>, ForwardTrace<'p>), ModelError> {
        if plan.num_layers() != self.num_layers() {
            return Err(ModelError::Shape(format!(
                "plan has {} layers, model has {}",
                plan.num_layers(),
                self.num_layers()
            )));
        }
        self.check_input_dim(x.ncols())?;
        let mut h = x.select(Axis(0), plan.input_nodes.indices());
        let mut inputs = Vec::with_capacity(self.num_layers());
        let mut pre = Vec::with_capacity(self.num_layers());
        for (l, layer) in plan.layers.iter().rev().enumerate() {
            if layer.p_tilde.ncols() != h.nrows() {
                return Err(ModelError::Shape(format!(
                    "layer {}: propagation has {} columns, activations have {} rows",
                    l + 1,
                    layer.p_tilde.ncols(),
                    h.nrows()
                )));
            }
            let z = propagate(&layer.p_tilde, h.view(), self.weights[l].view());
            if z.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::Divergence { layer: l + 1 });
            }
            let next = relu(&z);
            inputs.push(h);
            pre.push(z);
            h = next;
        }
        let logits = pre.last().expect("L >= 1").clone();
        Ok((
            logits,
            ForwardTrace {
                plan,
                inputs,
                pre_activations: pre,
            },
        ))
    }

    /// Mean softmax cross-entropy over the batch and its gradient with
    /// respect to every weight matrix.
    pub fn loss_and_grad(
        &self,
        trace: &ForwardTrace<'_>,
        logits: &Array2<f64>,
        labels: &[usize],
    ) -> Result<(f64, Vec<Array2<f64>>), ModelError> {
        let (loss, mut delta) = softmax_cross_entropy(logits, labels)?;
        let num_layers = self.num_layers();
        let mut grads = vec![Array2::zeros((0, 0)); num_layers];
        let layers: Vec<&CsrMatrix> = trace.plan.layers.iter().rev().map(|l| &l.p_tilde).collect();
        for l in (0..num_layers).rev() {
            // Z = P~ H W  =>  dW = H^T (P~^T dZ),  dH = (P~^T dZ) W^T.
            let back = layers[l].transpose_mul_dense(delta.view());
            grads[l] = matmul_tn(trace.inputs[l].view(), back.view());
            if l > 0 {
                let dh = back.dot(&self.weights[l].t());
                let mask = &trace.pre_activations[l - 1];
                delta = ndarray::Zip::from(&dh)
                    .and(mask)
                    .map_collect(|&g, &z| if z > 0.0 { g } else { 0.0 });
            }
        }
        Ok((loss, grads))
    }

    fn check_input_dim(&self, d: usize) -> Result<(), ModelError> {
        if d != self.weights[0].nrows() {
            return Err(ModelError::Shape(format!(
                "features have {d} columns, W^(0) expects {}",
                self.weights[0].nrows()
            )));
        }
        Ok(())
    }
}

/// Activations retained by [`GcnModel::forward_sampled`] for backprop.
#[derive(Debug, Clone)]
pub struct ForwardTrace<'p> {
    pub plan: &'p BatchPlan,
    /// `H~^(l-1)` fed into layer `l`, bottom first.
    pub inputs: Vec<Array2<f64>>,
    /// `Z~^(l)`, bottom first.
    pub pre_activations: Vec<Array2<f64>>,
}

/// `A H W`, multiplying by `W` first when that shrinks the sparse product.
fn propagate(a: &CsrMatrix, h: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>) -> Array2<f64> {
    if w.ncols() <= w.nrows() || a.nrows() >= a.ncols() {
        a.mul_dense(matmul(h, w).view())
    } else {
        matmul(a.mul_dense(h).view(), w)
    }
}

/// Elementwise rectifier; derivative at 0 taken as 0.
pub fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| if v > 0.0 { v } else { 0.0 })
}

/// Free-function spelling of [`GcnModel::init`].
pub fn init_weights<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<GcnModel, ModelError> {
    GcnModel::init(dims, rng)
}
