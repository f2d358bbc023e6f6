use serde::{Deserialize, Serialize};

use crate::graph::RowSelection;
use crate::sparse::CsrMatrix;

/// Diagonal sketch `S`: node `i` drawn `c_i` times out of `s` draws from a
/// distribution `p` carries weight `c_i / (s p_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchDiag {
    support: Vec<usize>,
    weights: Vec<f64>,
}

impl SketchDiag {
    /// Merges `draws` (node ids, repeats allowed) into a sketch. `probs` is
    /// the full-length distribution the draws came from and `num_draws` the
    /// `s` of the estimator.
    pub fn from_draws(draws: &[usize], probs: &[f64], num_draws: usize) -> Self {
        let mut sorted = draws.to_vec();
        sorted.sort_unstable();
        let mut support = Vec::new();
        let mut weights = Vec::new();
        let s = num_draws as f64;
        for chunk in sorted.chunk_by(|a, b| a == b) {
            let i = chunk[0];
            support.push(i);
            weights.push(chunk.len() as f64 / (s * probs[i]));
        }
        Self { support, weights }
    }

    /// Adds each of `anchors` missing from the support with the weight of a
    /// single draw, `1 / (s p_i)`.
    pub fn with_anchors(self, anchors: &[usize], probs: &[f64], num_draws: usize) -> Self {
        let s = num_draws as f64;
        let mut merged: Vec<(usize, f64)> = self.support.into_iter().zip(self.weights).collect();
        let drawn = merged.len();
        for &i in anchors {
            if merged[..drawn].binary_search_by_key(&i, |e| e.0).is_err() {
                merged.push((i, 1.0 / (s * probs[i])));
            }
        }
        merged.sort_unstable_by_key(|e| e.0);
        merged.dedup_by_key(|e| e.0);
        let (support, weights) = merged.into_iter().unzip();
        Self { support, weights }
    }

    /// Sorted distinct node ids with nonzero weight.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, node: usize) -> f64 {
        match self.support.binary_search(&node) {
            Ok(k) => self.weights[k],
            Err(_) => 0.0,
        }
    }
}

/// One sampled propagation step: `p_tilde` maps activations of `lower_nodes`
/// (layer `l - 1`) to pre-activations of `upper_nodes` (layer `l`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPlan {
    pub layer_index: usize,
    pub upper_nodes: RowSelection,
    pub lower_nodes: RowSelection,
    /// `|upper| x |lower|` modified propagation matrix.
    pub p_tilde: CsrMatrix,
    /// Distribution the lower layer was drawn from (length `num_nodes`);
    /// absent for schemes that do not draw from a single distribution.
    pub probs: Option<Vec<f64>>,
    pub sketch: Option<SketchDiag>,
    /// Rows of `p_tilde` with no nonzero entry.
    pub zero_rows: Vec<usize>,
    pub normalized: bool,
}

/// A full computation graph: `layers[0]` is the output layer `L`, the last
/// entry is layer `1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub layers: Vec<LayerPlan>,
    /// Rows of the feature matrix feeding layer 1.
    pub input_nodes: RowSelection,
    /// Output nodes whose labels drive the loss.
    pub batch_nodes: RowSelection,
}

impl BatchPlan {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Adjacent layers agree on the node sets they share, and every
    /// propagation matrix has matching shape.
    pub fn is_chained(&self) -> bool {
        let Some(first) = self.layers.first() else {
            return false;
        };
        let Some(last) = self.layers.last() else {
            return false;
        };
        first.upper_nodes == self.batch_nodes
            && last.lower_nodes == self.input_nodes
            && self.layers.windows(2).all(|w| w[0].lower_nodes == w[1].upper_nodes)
            && self
                .layers
                .iter()
                .all(|l| l.p_tilde.shape() == (l.upper_nodes.len(), l.lower_nodes.len()))
    }

    /// Number of output rows produced at each layer, bottom (`l = 1`) first.
    pub fn rows_per_layer(&self) -> Vec<usize> {
        self.layers.iter().rev().map(|l| l.upper_nodes.len()).collect()
    }

    pub fn zero_row_count(&self) -> usize {
        self.layers.iter().map(|l| l.zero_rows.len()).sum()
    }
}
