//! Computation-graph construction for mini-batch GCN training.
//!
//! Four schemes share one output type, [`BatchPlan`]:
//!
//! * [`ladies_sample`]: layer-dependent importance sampling. Each lower layer
//!   is drawn from the closed neighborhood of the layer above, with
//!   probabilities proportional to the squared column norms of `QP`.
//! * [`fastgcn_sample`]: independent layer-wise importance sampling with the
//!   static distribution `||P_{*,j}||^2 / ||P||_F^2`.
//! * [`neighbor_sample`]: node-wise uniform neighbor sampling.
//! * [`full_batch_plan`]: no sampling, every layer uses `P`.
//!
//! Samplers are pure functions of their inputs and the RNG stream.

mod draw;
mod plan;

pub use draw::{uniform_subset, with_replacement, without_replacement};
pub use plan::{BatchPlan, LayerPlan, SketchDiag};

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, Laplacian, RowSelection, SparseGraph};
use crate::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("sample size must be at least 1")]
    ZeroSampleSize,
    #[error("number of layers must be at least 1")]
    ZeroLayers,
    #[error("selected rows of the propagation matrix have zero norm at layer {layer}; corrupted Laplacian")]
    CorruptedLaplacian { layer: usize },
}

/// How layer-wise schemes draw their `s_layer` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Replacement {
    /// i.i.d. draws; duplicates merge by summing sketch weights.
    With,
    /// Distinct draws, weights still `1/(s p_i)`. Biased; for ablation only.
    Without,
}

/// How the node-wise sampler draws neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NeighborDraw {
    /// Without replacement; neighborhoods no larger than `s_node` are taken
    /// whole.
    Auto,
    /// Always `s_node` i.i.d. uniform draws.
    WithReplacement,
}

/// Options shared by the two layer-wise samplers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerwiseOptions {
    pub normalize: bool,
    pub replacement: Replacement,
    /// Adds every upper-layer node to the lower layer (weight as if drawn
    /// once) so that each row keeps its diagonal entry. Lower layers then
    /// grow by up to `|upper|` nodes and the estimator is no longer
    /// unbiased.
    pub include_upper: bool,
}

impl LayerwiseOptions {
    pub fn ladies_default() -> Self {
        Self {
            normalize: true,
            replacement: Replacement::With,
            include_upper: false,
        }
    }

    pub fn fastgcn_default() -> Self {
        Self {
            normalize: false,
            replacement: Replacement::With,
            include_upper: false,
        }
    }
}

/// Options for [`neighbor_sample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborOptions {
    pub normalize: bool,
    pub draw: NeighborDraw,
}

impl Default for NeighborOptions {
    fn default() -> Self {
        Self {
            normalize: false,
            draw: NeighborDraw::Auto,
        }
    }
}

/// Which scheme, and its size parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerKind {
    Ladies { s_layer: usize },
    FastGcn { s_layer: usize },
    Neighbor { s_node: usize },
    FullBatch,
}

impl SamplerKind {
    pub fn label(&self) -> String {
        match self {
            SamplerKind::Ladies { s_layer } => format!("LADIES ({s_layer})"),
            SamplerKind::FastGcn { s_layer } => format!("FastGCN ({s_layer})"),
            SamplerKind::Neighbor { s_node } => format!("GraphSage ({s_node})"),
            SamplerKind::FullBatch => "Full-Batch".to_string(),
        }
    }
}

/// A scheme plus optional overrides of its defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Overrides the scheme's row-normalization default (on for LADIES, off
    /// otherwise).
    pub normalize: Option<bool>,
    pub replacement: Option<Replacement>,
    pub neighbor_draw: Option<NeighborDraw>,
    pub include_upper: Option<bool>,
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind) -> Self {
        Self {
            kind,
            normalize: None,
            replacement: None,
            neighbor_draw: None,
            include_upper: None,
        }
    }

    pub fn with_normalize(mut self, normalize: bool) -> Self {
        self.normalize = Some(normalize);
        self
    }

    pub fn with_replacement(mut self, replacement: Replacement) -> Self {
        self.replacement = Some(replacement);
        self
    }

    pub fn with_neighbor_draw(mut self, draw: NeighborDraw) -> Self {
        self.neighbor_draw = Some(draw);
        self
    }

    pub fn with_include_upper(mut self, include: bool) -> Self {
        self.include_upper = Some(include);
        self
    }

    fn layerwise(&self, defaults: LayerwiseOptions) -> LayerwiseOptions {
        LayerwiseOptions {
            normalize: self.normalize.unwrap_or(defaults.normalize),
            replacement: self.replacement.unwrap_or(defaults.replacement),
            include_upper: self.include_upper.unwrap_or(defaults.include_upper),
        }
    }

    /// Effective row-normalization setting.
    pub fn normalizes(&self) -> bool {
        self.normalize
            .unwrap_or(matches!(self.kind, SamplerKind::Ladies { .. }))
    }

    /// Builds the computation graph for one batch.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        p: &Laplacian,
        g: &SparseGraph,
        batch: &RowSelection,
        num_layers: usize,
        rng: &mut R,
    ) -> Result<BatchPlan, SamplerError> {
        match self.kind {
            SamplerKind::Ladies { s_layer } => ladies_sample(
                p,
                g,
                batch,
                s_layer,
                num_layers,
                self.layerwise(LayerwiseOptions::ladies_default()),
                rng,
            ),
            SamplerKind::FastGcn { s_layer } => fastgcn_sample(
                p,
                batch,
                s_layer,
                num_layers,
                self.layerwise(LayerwiseOptions::fastgcn_default()),
                rng,
            ),
            SamplerKind::Neighbor { s_node } => neighbor_sample(
                p,
                g,
                batch,
                s_node,
                num_layers,
                NeighborOptions {
                    normalize: self.normalize.unwrap_or(false),
                    draw: self.neighbor_draw.unwrap_or(NeighborDraw::Auto),
                },
                rng,
            ),
            SamplerKind::FullBatch => full_batch_plan_for(p, batch, num_layers),
        }
    }
}

fn check_common(batch: &RowSelection, n: usize, s: usize, layers: usize) -> Result<(), SamplerError> {
    if batch.is_empty() {
        return Err(SamplerError::EmptyBatch);
    }
    if s == 0 {
        return Err(SamplerError::ZeroSampleSize);
    }
    if layers == 0 {
        return Err(SamplerError::ZeroLayers);
    }
    batch.validate(n)?;
    Ok(())
}

/// Divides each row with nonzero sum by that sum. Returns the normalized
/// matrix and the rows left untouched because they sum to zero.
pub fn row_normalize(m: &CsrMatrix) -> (CsrMatrix, Vec<usize>) {
    let sums = m.row_sums();
    let mut zero_rows = Vec::new();
    let factors: Vec<f64> = sums
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            if s == 0.0 {
                zero_rows.push(i);
                1.0
            } else {
                1.0 / s
            }
        })
        .collect();
    let mut out = m.clone();
    out.scale_rows(&factors);
    (out, zero_rows)
}

/// Dense counterpart of [`row_normalize`].
pub fn row_normalize_dense(m: &Array2<f64>) -> (Array2<f64>, Vec<usize>) {
    let mut out = m.clone();
    let mut zero_rows = Vec::new();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let s: f64 = row.sum();
        if s == 0.0 {
            zero_rows.push(i);
        } else {
            row.mapv_inplace(|v| v / s);
        }
    }
    (out, zero_rows)
}

/// Draws one lower layer given `QP`, the candidate nodes and their
/// (unnormalized) column masses, then assembles `QPSQ'^T`.
#[allow(clippy::too_many_arguments)]
fn layerwise_step<R: Rng + ?Sized>(
    layer_index: usize,
    upper: RowSelection,
    qp: &CsrMatrix,
    candidates: &[usize],
    masses: &[f64],
    probs: Vec<f64>,
    s_layer: usize,
    opts: LayerwiseOptions,
    rng: &mut R,
) -> LayerPlan {
    let draws = match opts.replacement {
        Replacement::With => with_replacement(candidates, masses, s_layer, rng),
        Replacement::Without => without_replacement(candidates, masses, s_layer, rng),
    };
    let mut sketch = SketchDiag::from_draws(&draws, &probs, s_layer);
    if opts.include_upper {
        sketch = sketch.with_anchors(upper.indices(), &probs, s_layer);
    }
    let raw = qp.restrict_columns(sketch.support(), sketch.weights());
    let (p_tilde, zero_rows) = if opts.normalize {
        row_normalize(&raw)
    } else {
        let zero_rows = raw.zero_rows();
        (raw, zero_rows)
    };
    LayerPlan {
        layer_index,
        upper_nodes: upper,
        lower_nodes: RowSelection::new(sketch.support().to_vec()),
        p_tilde,
        probs: Some(probs),
        sketch: Some(sketch),
        zero_rows,
        normalized: opts.normalize,
    }
}

fn finish_plan(layers: Vec<LayerPlan>, batch: &RowSelection) -> BatchPlan {
    let input_nodes = layers.last().map(|l| l.lower_nodes.clone()).unwrap_or_default();
    BatchPlan {
        layers,
        input_nodes,
        batch_nodes: batch.clone(),
    }
}

/// Layer-dependent importance sampling.
///
/// Top-down from the batch: for each layer, `p_i ∝ ||(QP)_{*,i}||^2` over the
/// closed neighborhood of the current nodes, `s_layer` draws, sketch weights
/// `1/(s_layer p_i)`, and `P~ = Q P S Q'^T` over the distinct draws,
/// optionally row-normalized.
pub fn ladies_sample<R: Rng + ?Sized>(
    p: &Laplacian,
    g: &SparseGraph,
    batch: &RowSelection,
    s_layer: usize,
    num_layers: usize,
    opts: LayerwiseOptions,
    rng: &mut R,
) -> Result<BatchPlan, SamplerError> {
    let n = p.num_nodes();
    check_common(batch, n, s_layer, num_layers)?;
    let mut layers = Vec::with_capacity(num_layers);
    let mut upper = batch.clone();
    for layer_index in (1..=num_layers).rev() {
        let qp = p.select_rows(&upper)?;
        let col_sq = qp.column_sq_norms();
        let total: f64 = col_sq.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(SamplerError::CorruptedLaplacian { layer: layer_index });
        }
        let candidates = g.neighbor_union(upper.indices());
        let masses: Vec<f64> = candidates.iter().map(|&i| col_sq[i]).collect();
        let mut probs = vec![0.0; n];
        for (&i, &m) in candidates.iter().zip(&masses) {
            probs[i] = m / total;
        }
        let plan = layerwise_step(layer_index, upper, &qp, &candidates, &masses, probs, s_layer, opts, rng);
        upper = plan.lower_nodes.clone();
        layers.push(plan);
    }
    Ok(finish_plan(layers, batch))
}

/// Independent layer-wise importance sampling with the static distribution
/// `q_j = ||P_{*,j}||^2 / ||P||_F^2` at every layer.
pub fn fastgcn_sample<R: Rng + ?Sized>(
    p: &Laplacian,
    batch: &RowSelection,
    s_layer: usize,
    num_layers: usize,
    opts: LayerwiseOptions,
    rng: &mut R,
) -> Result<BatchPlan, SamplerError> {
    let n = p.num_nodes();
    check_common(batch, n, s_layer, num_layers)?;
    let total = p.frob_sq();
    if total.is_nan() || total <= 0.0 {
        return Err(SamplerError::CorruptedLaplacian { layer: num_layers });
    }
    let candidates: Vec<usize> = (0..n).collect();
    let masses = p.col_sq_norms().to_vec();
    let probs: Vec<f64> = masses.iter().map(|m| m / total).collect();
    let mut layers = Vec::with_capacity(num_layers);
    let mut upper = batch.clone();
    for layer_index in (1..=num_layers).rev() {
        let qp = p.select_rows(&upper)?;
        let plan = layerwise_step(
            layer_index,
            upper,
            &qp,
            &candidates,
            &masses,
            probs.clone(),
            s_layer,
            opts,
            rng,
        );
        upper = plan.lower_nodes.clone();
        layers.push(plan);
    }
    Ok(finish_plan(layers, batch))
}

/// Node-wise neighbor sampling.
///
/// Every node of the current layer draws `s_node` members of its closed
/// neighborhood `N(v)` uniformly; each draw of `j` contributes
/// `(|N(v)| / s) P_{v,j}`. The next layer is the distinct union of all draws.
pub fn neighbor_sample<R: Rng + ?Sized>(
    p: &Laplacian,
    g: &SparseGraph,
    batch: &RowSelection,
    s_node: usize,
    num_layers: usize,
    opts: NeighborOptions,
    rng: &mut R,
) -> Result<BatchPlan, SamplerError> {
    let n = p.num_nodes();
    check_common(batch, n, s_node, num_layers)?;
    debug_assert_eq!(g.num_nodes(), n);
    let matrix = p.matrix();
    let mut layers = Vec::with_capacity(num_layers);
    let mut upper = batch.clone();
    for layer_index in (1..=num_layers).rev() {
        // Per upper row: (node, contribution) pairs before column renumbering.
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(upper.len());
        for &v in upper.indices() {
            let (cols, vals) = matrix.row(v);
            let size = cols.len();
            let picks: Vec<usize> = match opts.draw {
                NeighborDraw::Auto if size <= s_node => (0..size).collect(),
                NeighborDraw::Auto => index_sample(rng, size, s_node),
                NeighborDraw::WithReplacement => (0..s_node).map(|_| rng.random_range(0..size)).collect(),
            };
            let scale = size as f64 / picks.len() as f64;
            let mut entries: Vec<(usize, f64)> = picks.iter().map(|&k| (cols[k], scale * vals[k])).collect();
            entries.sort_unstable_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
            for (j, v) in entries {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => merged.push((j, v)),
                }
            }
            rows.push(merged);
        }
        let mut lower: Vec<usize> = rows.iter().flatten().map(|e| e.0).collect();
        lower.sort_unstable();
        lower.dedup();
        let mut position = vec![usize::MAX; n];
        for (k, &j) in lower.iter().enumerate() {
            position[j] = k;
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &rows {
            for &(j, v) in row {
                col_idx.push(position[j]);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        let raw = CsrMatrix::from_raw(rows.len(), lower.len(), row_ptr, col_idx, values);
        let (p_tilde, zero_rows) = if opts.normalize {
            row_normalize(&raw)
        } else {
            let z = raw.zero_rows();
            (raw, z)
        };
        let lower = RowSelection::new(lower);
        layers.push(LayerPlan {
            layer_index,
            upper_nodes: upper,
            lower_nodes: lower.clone(),
            p_tilde,
            probs: None,
            sketch: None,
            zero_rows,
            normalized: opts.normalize,
        });
        upper = lower;
    }
    Ok(finish_plan(layers, batch))
}

fn index_sample<R: Rng + ?Sized>(rng: &mut R, size: usize, amount: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, size, amount).into_vec()
}

/// Every layer selects every node and propagates with `P` itself.
pub fn full_batch_plan(p: &Laplacian, num_layers: usize) -> BatchPlan {
    let all = RowSelection::all(p.num_nodes());
    full_batch_plan_for(p, &all, num_layers).expect("all nodes form a valid batch")
}

/// Exact propagation restricted to the rows the loss needs: the output layer
/// keeps the rows of `batch`, every layer below it keeps all nodes.
pub fn full_batch_plan_for(p: &Laplacian, batch: &RowSelection, num_layers: usize) -> Result<BatchPlan, SamplerError> {
    if num_layers == 0 {
        return Err(SamplerError::ZeroLayers);
    }
    if batch.is_empty() {
        return Err(SamplerError::EmptyBatch);
    }
    batch.validate(p.num_nodes())?;
    let all = RowSelection::all(p.num_nodes());
    let layers = (1..=num_layers)
        .rev()
        .map(|layer_index| {
            let upper = if layer_index == num_layers {
                batch.clone()
            } else {
                all.clone()
            };
            let p_tilde = if upper.len() == p.num_nodes() {
                p.matrix().clone()
            } else {
                p.select_rows(&upper).expect("validated batch")
            };
            LayerPlan {
                layer_index,
                upper_nodes: upper,
                lower_nodes: all.clone(),
                p_tilde,
                probs: None,
                sketch: None,
                zero_rows: Vec::new(),
                normalized: false,
            }
        })
        .collect();
    Ok(BatchPlan {
        layers,
        input_nodes: all,
        batch_nodes: batch.clone(),
    })
}
