//! Mini-batch training with early stopping on validation micro-F1.

use std::time::{Duration, Instant};

use ladies_core::model::argmax_rows;
use ladies_core::variance::measure_actuals;
use ladies_core::{AdamState, Dataset, GcnModel, Laplacian, ModelError, RowSelection, SamplerConfig, SamplerKind};
use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::CliError;
use crate::metrics::{micro_f1, RepeatedMetrics, RunMetrics, Stat};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainConfig {
    pub sampler: SamplerConfig,
    pub layers: usize,
    pub hidden: usize,
    pub batch: usize,
    pub lr: f64,
    /// Validation gain over the best so far needed to reset patience.
    pub threshold: f64,
    /// Batches without such a gain before stopping.
    pub patience: usize,
    pub max_batches: usize,
    pub seed: u64,
    pub reps: usize,
    /// Evaluate validation F1 after every `eval_every` batches.
    pub eval_every: usize,
}

impl TrainConfig {
    pub fn new(sampler: SamplerConfig) -> Self {
        Self {
            sampler,
            layers: 5,
            hidden: 256,
            batch: 512,
            lr: 0.001,
            threshold: 0.01,
            patience: 200,
            max_batches: 10_000,
            seed: 0,
            reps: 10,
            eval_every: 1,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("layers", self.layers),
            ("hidden", self.hidden),
            ("batch", self.batch),
            ("patience", self.patience),
            ("max_batches", self.max_batches),
            ("reps", self.reps),
            ("eval_every", self.eval_every),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(CliError::Config(format!("{name} must be positive")));
        }
        let size = match self.sampler.kind {
            SamplerKind::Ladies { s_layer } | SamplerKind::FastGcn { s_layer } => s_layer,
            SamplerKind::Neighbor { s_node } => s_node,
            SamplerKind::FullBatch => 1,
        };
        if size == 0 {
            return Err(CliError::Config("sample size must be positive".into()));
        }
        if self.threshold.is_nan() || self.threshold < 0.0 {
            return Err(CliError::Config("threshold must be nonnegative".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(CliError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }

    /// Layer widths `[d, K, .., K, C]`.
    pub fn dims(&self, input: usize, classes: usize) -> Vec<usize> {
        let mut dims = vec![input];
        dims.extend(std::iter::repeat_n(self.hidden, self.layers - 1));
        dims.push(classes);
        dims
    }
}

/// Monotonic time source for the training-time clock.
pub trait Clock {
    fn now(&self) -> Duration;
}

pub struct SystemClock {
    start: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self { start: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.start.elapsed()
    }
}

/// Scores a model on a node set.
pub trait Evaluator {
    fn validation(&mut self, model: &GcnModel) -> Result<f64, ModelError>;
    fn test(&mut self, model: &GcnModel) -> Result<f64, ModelError>;
}

/// Micro-F1 from an exact forward pass over the whole graph.
pub struct FullBatchEvaluator<'a> {
    p: &'a Laplacian,
    data: &'a Dataset,
}

impl<'a> FullBatchEvaluator<'a> {
    pub fn new(p: &'a Laplacian, data: &'a Dataset) -> Self {
        Self { p, data }
    }

    fn score(&self, model: &GcnModel, nodes: &[usize]) -> Result<f64, ModelError> {
        if nodes.is_empty() {
            return Ok(0.0);
        }
        let logits = model.forward_exact(self.p, &self.data.features)?;
        let rows = logits.select(ndarray::Axis(0), nodes);
        Ok(micro_f1(&argmax_rows(&rows), &self.data.labels_of(nodes)))
    }
}

impl Evaluator for FullBatchEvaluator<'_> {
    fn validation(&mut self, model: &GcnModel) -> Result<f64, ModelError> {
        self.score(model, &self.data.splits.val)
    }

    fn test(&mut self, model: &GcnModel) -> Result<f64, ModelError> {
        self.score(model, &self.data.splits.test)
    }
}

/// Tracks the best validation score and the patience window.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopper {
    threshold: f64,
    patience: usize,
    best: f64,
    best_batch: usize,
    reset_batch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    /// New best score; the caller should keep this checkpoint.
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopper {
    pub fn new(threshold: f64, patience: usize) -> Self {
        Self {
            threshold,
            patience,
            best: f64::NEG_INFINITY,
            best_batch: 0,
            reset_batch: 0,
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_batch(&self) -> usize {
        self.best_batch
    }

    /// Records the score after `batch` batches. Any gain keeps the
    /// checkpoint; only a gain above the threshold resets patience.
    pub fn observe(&mut self, batch: usize, score: f64) -> Observation {
        let reset = score > self.best + self.threshold || self.best == f64::NEG_INFINITY;
        let improved = score > self.best;
        if reset {
            self.reset_batch = batch;
        }
        if improved {
            self.best = score;
            self.best_batch = batch;
        }
        Observation {
            improved,
            stop: self.exhausted(batch),
        }
    }

    /// True once `patience` batches have passed since the last reset.
    pub fn exhausted(&self, batch: usize) -> bool {
        batch >= self.reset_batch + self.patience
    }
}

/// Draws the output nodes of one batch uniformly without replacement from
/// the training split, or takes the whole split if it is not larger than
/// `size`.
pub fn draw_batch(train: &[usize], size: usize, rng: &mut ChaCha8Rng) -> RowSelection {
    let mut nodes: Vec<usize> = if size >= train.len() {
        train.to_vec()
    } else {
        sample(rng, train.len(), size).into_iter().map(|i| train[i]).collect()
    };
    nodes.sort_unstable();
    RowSelection::new(nodes)
}

/// One repetition with the system clock and full-batch evaluation.
pub fn train(config: &TrainConfig, data: &Dataset) -> Result<RunMetrics, CliError> {
    let p = Laplacian::from_graph(&data.graph);
    train_with(
        config,
        data,
        &p,
        &SystemClock::new(),
        &mut FullBatchEvaluator::new(&p, data),
    )
}

/// One repetition seeded with `config.seed`.
pub fn train_with(
    config: &TrainConfig,
    data: &Dataset,
    p: &Laplacian,
    clock: &dyn Clock,
    evaluator: &mut dyn Evaluator,
) -> Result<RunMetrics, CliError> {
    config.validate()?;
    if data.splits.train.is_empty() {
        return Err(CliError::Config("training split is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dims = config.dims(data.feature_dim(), data.num_classes.max(1));
    let mut model = GcnModel::init(&dims, &mut rng)?;
    let mut adam = AdamState::new(&model, config.lr);
    let mut stopper = EarlyStopper::new(config.threshold, config.patience);
    let mut best_model = model.clone();
    let mut batch_ms = Vec::new();
    let mut elapsed = Duration::ZERO;
    let mut seconds_at_best = 0.0;
    let mut activations = 0;
    let mut diverged = None;
    let full = matches!(config.sampler.kind, SamplerKind::FullBatch);
    let mut batches_run = 0;
    for batch_index in 1..=config.max_batches {
        let start = clock.now();
        let size = if full { data.splits.train.len() } else { config.batch };
        let batch = draw_batch(&data.splits.train, size, &mut rng);
        let step = (|| -> Result<usize, CliError> {
            let plan = config.sampler.sample(p, &data.graph, &batch, config.layers, &mut rng)?;
            let (logits, trace) = model.forward_sampled(&plan, &data.features)?;
            let labels = data.labels_of(batch.indices());
            let (loss, grads) = model.loss_and_grad(&trace, &logits, &labels)?;
            if !loss.is_finite() {
                return Err(ModelError::Divergence { layer: config.layers }.into());
            }
            adam.step(&mut model, &grads)?;
            Ok(measure_actuals(&plan, config.hidden, &dims).activations)
        })();
        let stored = match step {
            Ok(count) => count,
            Err(CliError::Model(e @ (ModelError::Divergence { .. } | ModelError::NonFiniteGradient { .. }))) => {
                diverged = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        let spent = clock.now().saturating_sub(start);
        elapsed += spent;
        batch_ms.push(spent.as_secs_f64() * 1e3);
        activations = activations.max(stored);
        batches_run = batch_index;
        if batch_index % config.eval_every == 0 || batch_index == config.max_batches {
            let score = evaluator.validation(&model)?;
            let seen = stopper.observe(batch_index, score);
            if seen.improved {
                best_model = model.clone();
                seconds_at_best = elapsed.as_secs_f64();
            }
            if seen.stop {
                break;
            }
        }
    }
    let test_f1 = if stopper.best() == f64::NEG_INFINITY {
        0.0
    } else {
        evaluator.test(&best_model)?
    };
    let parameters = model.num_parameters();
    Ok(RunMetrics {
        seed: config.seed,
        test_f1,
        best_val_f1: stopper.best().max(0.0),
        convergence_batch: stopper.best_batch(),
        batches_run,
        train_seconds: seconds_at_best,
        batch_ms: Stat::of(&batch_ms),
        activations,
        parameters,
        memory_mb: ((activations + parameters) * ladies_core::variance::FLOAT_BYTES) as f64 / (1024.0 * 1024.0),
        diverged,
    })
}

/// `config.reps` repetitions with seeds `seed, seed + 1, ..`.
pub fn train_repeated(config: &TrainConfig, data: &Dataset) -> Result<RepeatedMetrics, CliError> {
    config.validate()?;
    let p = Laplacian::from_graph(&data.graph);
    let runs = (0..config.reps as u64)
        .map(|r| {
            let rep = TrainConfig {
                seed: config.seed.wrapping_add(r),
                ..*config
            };
            train_with(
                &rep,
                data,
                &p,
                &SystemClock::new(),
                &mut FullBatchEvaluator::new(&p, data),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RepeatedMetrics::from_runs(config.sampler.kind.label(), runs))
}

/// Exact full-batch predictions for every node.
pub fn predict(model: &GcnModel, p: &Laplacian, features: &Array2<f64>) -> Result<Vec<usize>, ModelError> {
    Ok(argmax_rows(&model.forward_exact(p, features)?))
}
