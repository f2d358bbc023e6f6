//! Variance and complexity studies.

use ladies_core::sampling::{full_batch_plan_for, NeighborDraw};
use ladies_core::variance::{
    complexity_estimate, empirical_variance, ladies_variance_bound, measure_actuals, paired_comparison,
    zero_row_census, ActivationCensus, BatchSource, ComplexityEstimate, ComplexityParams, PairedOutcome, Scheme,
    VarianceBounds, ZeroRowCensus,
};
use ladies_core::{
    AdamState, Dataset, ExactProduct, GcnModel, Laplacian, RowSelection, SamplerConfig, SamplerKind, VarianceReport,
};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::CliError;

/// Hidden activations `H` and weight `W` of the last layer of a two-layer
/// GCN trained full-batch on the training split for `steps` Adam steps.
pub fn reference_activations(
    data: &Dataset,
    p: &Laplacian,
    hidden: usize,
    steps: usize,
    seed: u64,
) -> Result<(Array2<f64>, Array2<f64>), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [data.feature_dim(), hidden, data.num_classes.max(1)];
    let mut model = GcnModel::init(&dims, &mut rng)?;
    let mut adam = AdamState::new(&model, 0.01);
    if !data.splits.train.is_empty() {
        let batch = RowSelection::new(data.splits.train.clone());
        let plan = full_batch_plan_for(p, &batch, 2)?;
        let labels = data.labels_of(batch.indices());
        for _ in 0..steps {
            let (logits, trace) = model.forward_sampled(&plan, &data.features)?;
            let (_, grads) = model.loss_and_grad(&trace, &logits, &labels)?;
            adam.step(&mut model, &grads)?;
        }
    }
    let z1 = model.hidden_exact(p, &data.features, 1)?.pop().expect("one layer");
    let h = ladies_core::model::relu(&z1);
    Ok((h, model.weights()[1].clone()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceStudyConfig {
    pub batch: usize,
    /// Layer-wise sample sizes.
    pub s_layer: Vec<usize>,
    /// Per-node fan-outs for neighbor sampling.
    pub s_node: Vec<usize>,
    pub trials: usize,
    /// Paired LADIES / FastGCN experiments per sample size.
    pub pairs: usize,
    pub pair_trials: usize,
    /// Plans per scheme in the zero-row census.
    pub census_plans: usize,
    pub census_layers: usize,
    pub hidden: usize,
    pub warmup_steps: usize,
    pub seed: u64,
}

impl Default for VarianceStudyConfig {
    fn default() -> Self {
        Self {
            batch: 64,
            s_layer: vec![8, 16, 32, 64],
            s_node: vec![2, 5],
            trials: 2000,
            pairs: 200,
            pair_trials: 500,
            census_plans: 1000,
            census_layers: 2,
            hidden: 16,
            warmup_steps: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusRecord {
    pub scheme: String,
    pub include_upper: bool,
    pub census: ZeroRowCensus,
}

/// Least-squares slope of `ln(variance)` against `ln(s)`, weighted by the
/// delta-method variance `(se / mean)^2` of each point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeRecord {
    pub scheme: String,
    pub fit: SlopeFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingRecord {
    pub s_layer: usize,
    /// LADIES is the first sampler, FastGCN the second.
    pub outcome: PairedOutcome,
    /// Closed-form expectations.
    pub ladies_closed: f64,
    pub fastgcn_closed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRecord {
    pub s_layer: usize,
    pub bounds: VarianceBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceStudy {
    pub config: VarianceStudyConfig,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub reports: Vec<VarianceReport>,
    pub bounds: Vec<BoundRecord>,
    pub ordering: Vec<OrderingRecord>,
    pub slopes: Vec<SlopeRecord>,
    pub zero_rows: Vec<CensusRecord>,
}

pub fn fit_inverse_slope(points: &[(usize, f64, f64)]) -> SlopeFit {
    let (mut sw, mut swx, mut swy, mut swxx, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(s, mean, se) in points {
        let x = (s as f64).ln();
        let y = mean.ln();
        let rel = (se / mean).max(1e-12);
        let w = 1.0 / (rel * rel);
        sw += w;
        swx += w * x;
        swy += w * y;
        swxx += w * x * x;
        swxy += w * x * y;
    }
    let det = sw * swxx - swx * swx;
    SlopeFit {
        slope: (sw * swxy - swx * swy) / det,
        standard_error: (sw / det).sqrt(),
    }
}

fn unnormalized(kind: SamplerKind) -> SamplerConfig {
    let config = SamplerConfig::new(kind).with_normalize(false);
    match kind {
        SamplerKind::Neighbor { .. } => config.with_neighbor_draw(NeighborDraw::WithReplacement),
        _ => config,
    }
}

/// Empirical and closed-form variances for every scheme over the sample-size
/// sweeps, normalized and not, plus bounds, paired orderings, `1/s` slopes
/// and a zero-row census.
pub fn run_variance_study(config: &VarianceStudyConfig, data: &Dataset) -> Result<VarianceStudy, CliError> {
    let n = data.num_nodes();
    if config.batch == 0 || config.batch > n {
        return Err(CliError::Config(format!("batch {} outside 1..={n}", config.batch)));
    }
    if config.s_layer.iter().chain(&config.s_node).any(|&s| s == 0) {
        return Err(CliError::Config("sample sizes must be positive".into()));
    }
    let p = Laplacian::from_graph(&data.graph);
    let g = &data.graph;
    let (h, w) = reference_activations(data, &p, config.hidden, config.warmup_steps, config.seed)?;
    let prod = ExactProduct::new(&p, &h, &w)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let source = BatchSource::Uniform { size: config.batch };

    let mut kinds: Vec<SamplerKind> = Vec::new();
    for &s in &config.s_layer {
        kinds.push(SamplerKind::Ladies { s_layer: s });
        kinds.push(SamplerKind::FastGcn { s_layer: s });
    }
    kinds.extend(config.s_node.iter().map(|&s| SamplerKind::Neighbor { s_node: s }));

    let mut reports = Vec::new();
    for &kind in &kinds {
        let base = unnormalized(kind);
        reports.push(empirical_variance(
            &base,
            &p,
            g,
            &prod,
            &source,
            config.trials,
            &mut rng,
        )?);
        let normalized = base.with_normalize(true);
        reports.push(empirical_variance(
            &normalized,
            &p,
            g,
            &prod,
            &source,
            config.trials,
            &mut rng,
        )?);
    }

    let mut slopes = Vec::new();
    for (name, pick) in [
        (
            "LADIES",
            (|k: &SamplerKind| matches!(k, SamplerKind::Ladies { .. })) as fn(&SamplerKind) -> bool,
        ),
        ("FastGCN", |k: &SamplerKind| matches!(k, SamplerKind::FastGcn { .. })),
        ("GraphSage", |k: &SamplerKind| matches!(k, SamplerKind::Neighbor { .. })),
    ] {
        let points: Vec<(usize, f64, f64)> = kinds
            .iter()
            .zip(reports.chunks(2))
            .filter(|(k, _)| pick(k))
            .map(|(_, r)| (r[0].sample_size, r[0].empirical, r[0].standard_error))
            .collect();
        if points.len() >= 2 {
            slopes.push(SlopeRecord {
                scheme: name.to_string(),
                fit: fit_inverse_slope(&points),
            });
        }
    }

    let mut bounds = Vec::new();
    let mut ordering = Vec::new();
    for &s in &config.s_layer {
        bounds.push(BoundRecord {
            s_layer: s,
            bounds: ladies_variance_bound(&p, g, &prod, config.batch, s, None)?,
        });
        let ladies = unnormalized(SamplerKind::Ladies { s_layer: s });
        let fastgcn = unnormalized(SamplerKind::FastGcn { s_layer: s });
        let outcome = paired_comparison(
            &ladies,
            &fastgcn,
            &p,
            g,
            &prod,
            &source,
            config.pairs,
            config.pair_trials,
            &mut rng,
        )?;
        ordering.push(OrderingRecord {
            s_layer: s,
            outcome,
            ladies_closed: ladies_core::variance::ladies_expected_variance(&p, g, &prod, config.batch, s)?,
            fastgcn_closed: ladies_core::variance::fastgcn_variance(&p, &prod, s)?,
        });
    }

    let mut zero_rows = Vec::new();
    for &s in &config.s_layer {
        for (config_, include_upper) in [
            (SamplerConfig::new(SamplerKind::Ladies { s_layer: s }), false),
            (
                SamplerConfig::new(SamplerKind::Ladies { s_layer: s }).with_include_upper(true),
                true,
            ),
            (SamplerConfig::new(SamplerKind::FastGcn { s_layer: s }), false),
        ] {
            let census = zero_row_census(
                &config_,
                &p,
                g,
                &source,
                config.census_layers,
                config.census_plans,
                &mut rng,
            )?;
            zero_rows.push(CensusRecord {
                scheme: config_.kind.label(),
                include_upper,
                census,
            });
        }
    }

    Ok(VarianceStudy {
        config: config.clone(),
        num_nodes: n,
        num_edges: g.num_edges(),
        reports,
        bounds,
        ordering,
        slopes,
        zero_rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityRecord {
    pub estimate: ComplexityEstimate,
    /// Counted on one sampled plan; absent for schemes without a sampler.
    pub measured: Option<ActivationCensus>,
}

/// Table rows for every scheme plus activation counts measured on one plan
/// per runnable scheme.
pub fn run_complexity(data: &Dataset, params: &ComplexityParams, seed: u64) -> Result<Vec<ComplexityRecord>, CliError> {
    let p = Laplacian::from_graph(&data.graph);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = data.num_nodes();
    let batch_size = params.batch.min(n).max(1);
    let batch = crate::train::draw_batch(&(0..n).collect::<Vec<_>>(), batch_size, &mut rng);
    let dims: Vec<usize> = std::iter::once(data.feature_dim())
        .chain(std::iter::repeat_n(params.hidden, params.layers.saturating_sub(1)))
        .chain(std::iter::once(data.num_classes.max(1)))
        .collect();
    Scheme::ALL
        .iter()
        .map(|&scheme| {
            let kind = match scheme {
                Scheme::FullBatch => Some(SamplerKind::FullBatch),
                Scheme::GraphSage => Some(SamplerKind::Neighbor { s_node: params.s_node }),
                Scheme::VrGcn => None,
                Scheme::FastGcn => Some(SamplerKind::FastGcn {
                    s_layer: params.s_layer,
                }),
                Scheme::Ladies => Some(SamplerKind::Ladies {
                    s_layer: params.s_layer,
                }),
            };
            let measured = match kind {
                Some(SamplerKind::FullBatch) => Some(measure_actuals(
                    &ladies_core::sampling::full_batch_plan(&p, params.layers),
                    params.hidden,
                    &dims,
                )),
                Some(kind) => {
                    let plan = SamplerConfig::new(kind).sample(&p, &data.graph, &batch, params.layers, &mut rng)?;
                    Some(measure_actuals(&plan, params.hidden, &dims))
                }
                None => None,
            };
            Ok(ComplexityRecord {
                estimate: complexity_estimate(scheme, params),
                measured,
            })
        })
        .collect()
}
