//! Closed-form sampling variances, a Monte-Carlo oracle for them, and the
//! complexity table.
//!
//! Every variance here is the one-layer quantity `E||Z~ - QZ||_F^2 / b` with
//! `Z = P H W`, i.e. averaged per output node. Closed forms assume unweighted
//! with-replacement sketches and no row normalization.

mod complexity;

pub use complexity::{
    activation_count, complexity_estimate, measure_actuals, ActivationCensus, ComplexityEstimate, ComplexityParams,
    Scheme, Term, FLOAT_BYTES,
};

use ndarray::{Array2, Axis};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{Laplacian, RowSelection, SparseGraph};
use crate::sampling::{NeighborDraw, Replacement, SamplerConfig, SamplerError, SamplerKind};

#[derive(Debug, Error)]
pub enum VarianceError {
    #[error("probabilities deviate from the squared-column-norm law by {deviation:e}")]
    NotColumnNormLaw { deviation: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("phi = {phi} is below the largest row norm of HW ({actual})")]
    PhiTooSmall { phi: f64, actual: f64 },
    #[error("need at least two trials, got {0}")]
    TooFewTrials(usize),
    #[error("sample size must be positive")]
    ZeroSampleSize,
    #[error("batch size {b} outside 1..={n}")]
    BatchSize { b: usize, n: usize },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// `p_k = ||A_{*,k}||^2 / ||A||_F^2`.
pub fn column_norm_law(a: &Array2<f64>) -> Vec<f64> {
    let col: Vec<f64> = a.columns().into_iter().map(|c| c.dot(&c)).collect();
    let total: f64 = col.iter().sum();
    col.iter().map(|c| c / total).collect()
}

/// `(1/s)(||A||_F^2 ||B||_F^2 - ||AB||_F^2)`: the error of the column-sampled
/// product `A S B` when `probs` is the squared-column-norm law of `A`.
pub fn lemma1_closed_form(a: &Array2<f64>, b: &Array2<f64>, probs: &[f64], s: usize) -> Result<f64, VarianceError> {
    check_product(a, b, probs, s)?;
    let law = column_norm_law(a);
    let deviation = law.iter().zip(probs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    if deviation.is_nan() || deviation > 1e-9 {
        return Err(VarianceError::NotColumnNormLaw { deviation });
    }
    let ab = a.dot(b);
    Ok((frob_sq(a) * frob_sq(b) - frob_sq(&ab)) / s as f64)
}

/// `(1/s)(sum_k ||A_{*,k}||^2 ||B_{k,*}||^2 / p_k - ||AB||_F^2)` for an
/// arbitrary sampling law. Columns with `p_k = 0` must contribute nothing.
pub fn sketch_variance(a: &Array2<f64>, b: &Array2<f64>, probs: &[f64], s: usize) -> Result<f64, VarianceError> {
    check_product(a, b, probs, s)?;
    let mut first = 0.0;
    for (k, &pk) in probs.iter().enumerate() {
        let ca = a.column(k).dot(&a.column(k));
        let rb = b.row(k).dot(&b.row(k));
        if ca * rb > 0.0 {
            if pk <= 0.0 {
                return Ok(f64::INFINITY);
            }
            first += ca * rb / pk;
        }
    }
    Ok((first - frob_sq(&a.dot(b))) / s as f64)
}

fn check_product(a: &Array2<f64>, b: &Array2<f64>, probs: &[f64], s: usize) -> Result<(), VarianceError> {
    if s == 0 {
        return Err(VarianceError::ZeroSampleSize);
    }
    if a.ncols() != b.nrows() || probs.len() != a.ncols() {
        return Err(VarianceError::Shape(format!(
            "A is {:?}, B is {:?}, {} probabilities",
            a.dim(),
            b.dim(),
            probs.len()
        )));
    }
    Ok(())
}

pub fn frob_sq(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

fn row_sq_norms(m: &Array2<f64>) -> Vec<f64> {
    m.rows().into_iter().map(|r| r.dot(&r)).collect()
}

/// `HW` and `Z = P H W` with the norms every formula needs.
#[derive(Debug, Clone)]
pub struct ExactProduct {
    pub hw: Array2<f64>,
    pub z: Array2<f64>,
    hw_row_sq: Vec<f64>,
    z_row_sq: Vec<f64>,
}

impl ExactProduct {
    pub fn new(p: &Laplacian, h: &Array2<f64>, w: &Array2<f64>) -> Result<Self, VarianceError> {
        if h.nrows() != p.num_nodes() || h.ncols() != w.nrows() {
            return Err(VarianceError::Shape(format!(
                "H is {:?}, W is {:?}, graph has {} nodes",
                h.dim(),
                w.dim(),
                p.num_nodes()
            )));
        }
        Ok(Self::from_hw(p, h.dot(w)))
    }

    pub fn from_hw(p: &Laplacian, hw: Array2<f64>) -> Self {
        let z = p.matrix().mul_dense(hw.view());
        Self {
            hw_row_sq: row_sq_norms(&hw),
            z_row_sq: row_sq_norms(&z),
            hw,
            z,
        }
    }

    pub fn hw_frob_sq(&self) -> f64 {
        self.hw_row_sq.iter().sum()
    }

    pub fn z_frob_sq(&self) -> f64 {
        self.z_row_sq.iter().sum()
    }

    /// Largest row norm of `HW`, the tightest `phi`.
    pub fn phi(&self) -> f64 {
        self.hw_row_sq.iter().fold(0.0f64, |m, &v| m.max(v)).sqrt()
    }
}

fn check_batch(batch: &RowSelection, n: usize) -> Result<(), VarianceError> {
    batch.validate(n).map_err(SamplerError::from)?;
    if batch.is_empty() {
        return Err(SamplerError::EmptyBatch.into());
    }
    Ok(())
}

/// Exact LADIES variance for a fixed output batch `Q`:
/// `(||QP||_F^2 ||L HW||_F^2 - ||QZ||_F^2) / (s b)` with `L` the indicator
/// of the batch's closed neighborhood union.
pub fn ladies_batch_variance(
    p: &Laplacian,
    g: &SparseGraph,
    prod: &ExactProduct,
    batch: &RowSelection,
    s: usize,
) -> Result<f64, VarianceError> {
    check_batch(batch, p.num_nodes())?;
    if s == 0 {
        return Err(VarianceError::ZeroSampleSize);
    }
    let qp = p.select_rows(batch).map_err(SamplerError::from)?;
    let lhw: f64 = g
        .neighbor_union(batch.indices())
        .iter()
        .map(|&j| prod.hw_row_sq[j])
        .sum();
    let qz: f64 = batch.indices().iter().map(|&i| prod.z_row_sq[i]).sum();
    Ok((qp.frob_sq() * lhw - qz) / (s * batch.len()) as f64)
}

/// Exact FastGCN variance for a fixed output batch with the static law
/// `q_k = ||P_{*,k}||^2 / ||P||_F^2`.
pub fn fastgcn_batch_variance(
    p: &Laplacian,
    prod: &ExactProduct,
    batch: &RowSelection,
    s: usize,
) -> Result<f64, VarianceError> {
    check_batch(batch, p.num_nodes())?;
    if s == 0 {
        return Err(VarianceError::ZeroSampleSize);
    }
    let qp = p.select_rows(batch).map_err(SamplerError::from)?;
    let q_col = qp.column_sq_norms();
    let frob = p.frob_sq();
    let first: f64 = q_col
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0.0)
        .map(|(k, &c)| c * prod.hw_row_sq[k] * frob / p.col_sq_norms()[k])
        .sum();
    let qz: f64 = batch.indices().iter().map(|&i| prod.z_row_sq[i]).sum();
    Ok((first - qz) / (s * batch.len()) as f64)
}

/// FastGCN variance averaged over uniform batches:
/// `(||P||_F^2 ||HW||_F^2 - ||Z||_F^2) / (|V| s)`.
pub fn fastgcn_variance(p: &Laplacian, prod: &ExactProduct, s: usize) -> Result<f64, VarianceError> {
    if s == 0 {
        return Err(VarianceError::ZeroSampleSize);
    }
    Ok((p.frob_sq() * prod.hw_frob_sq() - prod.z_frob_sq()) / (p.num_nodes() * s) as f64)
}

/// Probability that a uniform batch of `b` distinct nodes, conditioned to
/// contain one fixed node outside `N[j]`, still avoids `N[j]`:
/// `C(n-1-k, b-1) / C(n-1, b-1)` with `k = |N[j]|`.
fn avoid_probability(n: usize, k: usize, b: usize) -> f64 {
    let mut r = 1.0;
    for t in 0..b.saturating_sub(1) {
        if n < k + t + 2 {
            return 0.0;
        }
        r *= (n - 1 - k - t) as f64 / (n - 1 - t) as f64;
    }
    r
}

/// LADIES variance averaged over uniform batches of size `b`, in closed
/// form. With `r_j` from [`avoid_probability`] and `m_j = sum_{i in N[j]}
/// ||P_{i,*}||^2`,
///
/// `E||QP||^2 ||LHW||^2 = (b/|V|)(||P||^2 ||HW||^2 - sum_j ||hw_j||^2 r_j (||P||^2 - m_j))`,
///
/// so the result never exceeds [`fastgcn_variance`].
pub fn ladies_expected_variance(
    p: &Laplacian,
    g: &SparseGraph,
    prod: &ExactProduct,
    b: usize,
    s: usize,
) -> Result<f64, VarianceError> {
    let n = p.num_nodes();
    if b == 0 || b > n {
        return Err(VarianceError::BatchSize { b, n });
    }
    if s == 0 {
        return Err(VarianceError::ZeroSampleSize);
    }
    let row_sq = p.matrix().row_sq_norms();
    let frob = p.frob_sq();
    let mut reduction = 0.0;
    for j in 0..n {
        let k = g.degree(j) + 1;
        let r = avoid_probability(n, k, b);
        if r == 0.0 || prod.hw_row_sq[j] == 0.0 {
            continue;
        }
        let covered: f64 = g.neighbors(j).iter().map(|&i| row_sq[i]).sum::<f64>() + row_sq[j];
        reduction += prod.hw_row_sq[j] * r * (frob - covered).max(0.0);
    }
    Ok((frob * prod.hw_frob_sq() - reduction - prod.z_frob_sq()) / (n * s) as f64)
}

/// Per-node neighbor-sampling variance with `m` uniform draws with
/// replacement from the closed neighborhood of each node in `nodes`:
/// `sum_i (|N_i| sum_j P_ij^2 ||hw_j||^2 - ||z_i||^2) / (m |nodes|)`.
fn neighbor_variance_over(p: &Laplacian, prod: &ExactProduct, nodes: &[usize], m: usize) -> f64 {
    let mat = p.matrix();
    let mut total = 0.0;
    for &i in nodes {
        let (cols, vals) = mat.row(i);
        let weighted: f64 = cols.iter().zip(vals).map(|(&j, &v)| v * v * prod.hw_row_sq[j]).sum();
        total += cols.len() as f64 * weighted - prod.z_row_sq[i];
    }
    total / (m * nodes.len()) as f64
}

/// Neighbor-sampling variance averaged over uniform batches:
/// `(sum_i ||P_{i,*}||_0 sum_j ||P_ij h_j W||^2 - ||PHW||_F^2) / (m |V|)`.
pub fn graphsage_variance(p: &Laplacian, prod: &ExactProduct, m: usize) -> Result<f64, VarianceError> {
    if m == 0 {
        return Err(VarianceError::ZeroSampleSize);
    }
    let all: Vec<usize> = (0..p.num_nodes()).collect();
    Ok(neighbor_variance_over(p, prod, &all, m))
}

pub fn graphsage_batch_variance(
    p: &Laplacian,
    prod: &ExactProduct,
    batch: &RowSelection,
    m: usize,
) -> Result<f64, VarianceError> {
    check_batch(batch, p.num_nodes())?;
    if m == 0 {
        return Err(VarianceError::ZeroSampleSize);
    }
    Ok(neighbor_variance_over(p, prod, batch.indices(), m))
}

/// Control-variate neighbor sampling: the neighbor-sampling variance with
/// `H` replaced by `H - H_bar`.
pub fn vrgcn_variance(
    p: &Laplacian,
    h: &Array2<f64>,
    h_bar: &Array2<f64>,
    w: &Array2<f64>,
    m: usize,
) -> Result<f64, VarianceError> {
    if h.dim() != h_bar.dim() {
        return Err(VarianceError::Shape(format!(
            "H is {:?}, history is {:?}",
            h.dim(),
            h_bar.dim()
        )));
    }
    graphsage_variance(p, &ExactProduct::new(p, &(h - h_bar), w)?, m)
}

/// Instance constants of the variance bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstanceConstants {
    /// `max_i ||P_{i,*}||_0` over its mean.
    pub c1: f64,
    /// `max_i ||P_{i,*}||^2` over its mean.
    pub c2: f64,
    /// Mean `||P_{i,*}||_0`.
    pub mean_row_nnz: f64,
}

pub fn instance_constants(p: &Laplacian) -> InstanceConstants {
    let n = p.num_nodes() as f64;
    let mat = p.matrix();
    let nnz: Vec<f64> = (0..p.num_nodes()).map(|i| mat.row(i).0.len() as f64).collect();
    let mean_nnz = nnz.iter().sum::<f64>() / n;
    let row_sq = mat.row_sq_norms();
    let mean_sq = p.frob_sq() / n;
    InstanceConstants {
        c1: nnz.iter().fold(0.0f64, |m, &v| m.max(v)) / mean_nnz,
        c2: row_sq.iter().fold(0.0f64, |m, &v| m.max(v)) / mean_sq,
        mean_row_nnz: mean_nnz,
    }
}

/// Bounds on the per-node variances under `||h_i W|| <= phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceBounds {
    pub phi: f64,
    pub constants: InstanceConstants,
    /// Expected neighborhood-union size of a batch.
    pub v_bar: f64,
    /// `C2 phi^2 ||P||_F^2 V(b) / (|V| s)`.
    pub ladies: f64,
    /// `phi^2 ||P||_F^2 / s`.
    pub fastgcn: f64,
    /// `C1 D phi^2 ||P||_F^2 / (|V| m)`, with `m = s`.
    pub graphsage: f64,
}

/// Evaluates the bounds for batch size `b` and sample size `s`. `phi`
/// defaults to the largest row norm of `HW`; a smaller value is rejected.
/// The bounds use `phi^2` because they control squared row norms.
pub fn ladies_variance_bound(
    p: &Laplacian,
    g: &SparseGraph,
    prod: &ExactProduct,
    b: usize,
    s: usize,
    phi: Option<f64>,
) -> Result<VarianceBounds, VarianceError> {
    let n = p.num_nodes();
    if b == 0 || b > n {
        return Err(VarianceError::BatchSize { b, n });
    }
    if s == 0 {
        return Err(VarianceError::ZeroSampleSize);
    }
    let actual = prod.phi();
    let phi = phi.unwrap_or(actual);
    if phi < actual {
        return Err(VarianceError::PhiTooSmall { phi, actual });
    }
    let constants = instance_constants(p);
    let v_bar = crate::data::expected_union_size(g, b);
    let base = phi * phi * p.frob_sq();
    Ok(VarianceBounds {
        phi,
        constants,
        v_bar,
        ladies: constants.c2 * base * v_bar / (n * s) as f64,
        fastgcn: base / s as f64,
        graphsage: constants.c1 * constants.mean_row_nnz * base / (n * s) as f64,
    })
}

/// How output batches are chosen in Monte-Carlo studies.
#[derive(Debug, Clone, PartialEq)]
pub enum BatchSource {
    Fixed(RowSelection),
    /// `size` distinct nodes drawn uniformly from all nodes each trial.
    Uniform {
        size: usize,
    },
}

impl BatchSource {
    pub fn size(&self) -> usize {
        match self {
            BatchSource::Fixed(b) => b.len(),
            BatchSource::Uniform { size } => *size,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<RowSelection, VarianceError> {
        match self {
            BatchSource::Fixed(b) => {
                check_batch(b, n)?;
                Ok(b.clone())
            }
            BatchSource::Uniform { size } => {
                if *size == 0 || *size > n {
                    return Err(VarianceError::BatchSize { b: *size, n });
                }
                let mut v = rand::seq::index::sample(rng, n, *size).into_vec();
                v.sort_unstable();
                Ok(RowSelection::new(v))
            }
        }
    }
}

/// `||Z~ - QZ||_F^2` for one single-layer plan drawn by `config`.
pub fn sampled_error<R: Rng + ?Sized>(
    config: &SamplerConfig,
    p: &Laplacian,
    g: &SparseGraph,
    prod: &ExactProduct,
    batch: &RowSelection,
    rng: &mut R,
) -> Result<f64, VarianceError> {
    let plan = config.sample(p, g, batch, 1, rng)?;
    let layer = &plan.layers[0];
    let lower = prod.hw.select(Axis(0), layer.lower_nodes.indices());
    let approx = layer.p_tilde.mul_dense(lower.view());
    let upper = layer.upper_nodes.indices();
    let mut err = 0.0;
    for &v in batch.indices() {
        let r = upper.binary_search(&v).expect("batch nodes are upper-layer rows");
        err += approx
            .row(r)
            .iter()
            .zip(prod.z.row(v))
            .map(|(a, e)| (a - e) * (a - e))
            .sum::<f64>();
    }
    Ok(err)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    pub scheme: String,
    pub batch_size: usize,
    pub sample_size: usize,
    pub normalized: bool,
    pub trials: usize,
    /// Mean per-node squared error over the trials.
    pub empirical: f64,
    pub standard_error: f64,
    /// Matching closed form, when one exists for this configuration.
    pub closed_form: Option<f64>,
}

fn sample_size(kind: &SamplerKind) -> usize {
    match *kind {
        SamplerKind::Ladies { s_layer } | SamplerKind::FastGcn { s_layer } => s_layer,
        SamplerKind::Neighbor { s_node } => s_node,
        SamplerKind::FullBatch => 0,
    }
}

/// The closed form matching `config` on `batch`, if any.
pub fn closed_form_for(
    config: &SamplerConfig,
    p: &Laplacian,
    g: &SparseGraph,
    prod: &ExactProduct,
    batch: &BatchSource,
) -> Result<Option<f64>, VarianceError> {
    let with_replacement = config.replacement.unwrap_or(Replacement::With) == Replacement::With;
    if config.normalizes() || config.include_upper == Some(true) {
        return Ok(None);
    }
    let value = match config.kind {
        SamplerKind::FullBatch => 0.0,
        SamplerKind::Ladies { .. } | SamplerKind::FastGcn { .. } if !with_replacement => return Ok(None),
        SamplerKind::Ladies { s_layer } => match batch {
            BatchSource::Fixed(b) => ladies_batch_variance(p, g, prod, b, s_layer)?,
            BatchSource::Uniform { size } => ladies_expected_variance(p, g, prod, *size, s_layer)?,
        },
        SamplerKind::FastGcn { s_layer } => match batch {
            BatchSource::Fixed(b) => fastgcn_batch_variance(p, prod, b, s_layer)?,
            BatchSource::Uniform { .. } => fastgcn_variance(p, prod, s_layer)?,
        },
        SamplerKind::Neighbor { s_node } => {
            if config.neighbor_draw != Some(NeighborDraw::WithReplacement) {
                return Ok(None);
            }
            match batch {
                BatchSource::Fixed(b) => graphsage_batch_variance(p, prod, b, s_node)?,
                BatchSource::Uniform { .. } => graphsage_variance(p, prod, s_node)?,
            }
        }
    };
    Ok(Some(value))
}

/// Monte-Carlo estimate of `E||Z~ - QZ||_F^2 / b` over `trials` independent
/// single-layer plans (and batches, for [`BatchSource::Uniform`]).
#[allow(clippy::too_many_arguments)]
pub fn empirical_variance<R: Rng + ?Sized>(
    config: &SamplerConfig,
    p: &Laplacian,
    g: &SparseGraph,
    prod: &ExactProduct,
    batch: &BatchSource,
    trials: usize,
    rng: &mut R,
) -> Result<VarianceReport, VarianceError> {
    if trials < 2 {
        return Err(VarianceError::TooFewTrials(trials));
    }
    let n = p.num_nodes();
    let b = batch.size();
    let mut errors = Vec::with_capacity(trials);
    for _ in 0..trials {
        let nodes = batch.draw(n, rng)?;
        errors.push(sampled_error(config, p, g, prod, &nodes, rng)? / b as f64);
    }
    let (mean, sd) = mean_and_std(&errors);
    Ok(VarianceReport {
        scheme: config.kind.label(),
        batch_size: b,
        sample_size: sample_size(&config.kind),
        normalized: config.normalizes(),
        trials,
        empirical: mean,
        standard_error: sd / (trials as f64).sqrt(),
        closed_form: closed_form_for(config, p, g, prod, batch)?,
    })
}

/// Mean and sample standard deviation (`n - 1` denominator).
pub fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Counts of all-zero propagation rows over many sampled plans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroRowCensus {
    pub plans: usize,
    pub rows: usize,
    pub zero_rows: usize,
    pub plans_with_zero_rows: usize,
    /// `zero_rows / rows`.
    pub frequency: f64,
}

pub fn zero_row_census<R: Rng + ?Sized>(
    config: &SamplerConfig,
    p: &Laplacian,
    g: &SparseGraph,
    batch: &BatchSource,
    num_layers: usize,
    plans: usize,
    rng: &mut R,
) -> Result<ZeroRowCensus, VarianceError> {
    let mut census = ZeroRowCensus {
        plans,
        rows: 0,
        zero_rows: 0,
        plans_with_zero_rows: 0,
        frequency: 0.0,
    };
    for _ in 0..plans {
        let nodes = batch.draw(p.num_nodes(), rng)?;
        let plan = config.sample(p, g, &nodes, num_layers, rng)?;
        let zeros = plan.zero_row_count();
        census.rows += plan.layers.iter().map(|l| l.p_tilde.nrows()).sum::<usize>();
        census.zero_rows += zeros;
        census.plans_with_zero_rows += usize::from(zeros > 0);
    }
    if census.rows > 0 {
        census.frequency = census.zero_rows as f64 / census.rows as f64;
    }
    Ok(census)
}

/// Outcome of comparing two samplers on shared output batches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedOutcome {
    pub pairs: usize,
    /// Pairs where the first sampler's empirical variance was strictly smaller.
    pub first_wins: usize,
    pub fraction: f64,
    pub first_mean: f64,
    pub second_mean: f64,
}

/// Runs `pairs` paired experiments of `inner` trials each. Every trial draws
/// one batch from `batch` and one plan per sampler on it, so both estimates
/// share their batches.
#[allow(clippy::too_many_arguments)]
pub fn paired_comparison<R: Rng + ?Sized>(
    first: &SamplerConfig,
    second: &SamplerConfig,
    p: &Laplacian,
    g: &SparseGraph,
    prod: &ExactProduct,
    batch: &BatchSource,
    pairs: usize,
    inner: usize,
    rng: &mut R,
) -> Result<PairedOutcome, VarianceError> {
    if inner < 2 {
        return Err(VarianceError::TooFewTrials(inner));
    }
    let b = batch.size() as f64;
    let mut wins = 0;
    let (mut sum_a, mut sum_b) = (0.0, 0.0);
    for _ in 0..pairs {
        let mut a = 0.0;
        let mut c = 0.0;
        for _ in 0..inner {
            let nodes = batch.draw(p.num_nodes(), rng)?;
            a += sampled_error(first, p, g, prod, &nodes, rng)?;
            c += sampled_error(second, p, g, prod, &nodes, rng)?;
        }
        let (a, c) = (a / (inner as f64 * b), c / (inner as f64 * b));
        wins += usize::from(a < c);
        sum_a += a;
        sum_b += c;
    }
    let denom = pairs.max(1) as f64;
    Ok(PairedOutcome {
        pairs,
        first_wins: wins,
        fraction: wins as f64 / denom,
        first_mean: sum_a / denom,
        second_mean: sum_b / denom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn closed_form_identity_example() {
        let eye = Array2::<f64>::eye(2);
        let v = lemma1_closed_form(&eye, &eye, &[0.5, 0.5], 1).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_single_column_is_deterministic() {
        let a = array![[1.0, 0.0], [2.0, 0.0]];
        let b = array![[3.0, -1.0], [0.0, 0.0]];
        let v = lemma1_closed_form(&a, &b, &[1.0, 0.0], 3).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn closed_form_rejects_other_laws() {
        let eye = Array2::<f64>::eye(2);
        assert!(matches!(
            lemma1_closed_form(&eye, &eye, &[0.6, 0.4], 1),
            Err(VarianceError::NotColumnNormLaw { .. })
        ));
    }

    #[test]
    fn general_sketch_reduces_to_column_norm_case() {
        let a = array![[1.0, 2.0, 0.5], [0.0, -1.0, 3.0]];
        let b = array![[1.0], [2.0], [-1.0]];
        let law = column_norm_law(&a);
        let x = sketch_variance(&a, &b, &law, 4).unwrap();
        let y = lemma1_closed_form(&a, &b, &law, 4).unwrap();
        assert!((x - y).abs() < 1e-12);
    }

    #[test]
    fn avoid_probability_small_cases() {
        assert_eq!(avoid_probability(10, 3, 1), 1.0);
        // C(6, 2) / C(9, 2) = 15 / 36.
        assert!((avoid_probability(10, 3, 3) - 15.0 / 36.0).abs() < 1e-15);
        assert_eq!(avoid_probability(10, 3, 8), 0.0);
    }

    #[test]
    fn mean_and_std_basics() {
        let (m, s) = mean_and_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
