use std::cell::Cell;
use std::rc::Rc;
use std::time::Duration;

use ladies_cli::metrics::micro_f1;
use ladies_cli::train::{train_with, Clock, Evaluator, FullBatchEvaluator};
use ladies_cli::{train, TrainConfig};
use ladies_core::data::{Generator, SplitRule};
use ladies_core::model::argmax_rows;
use ladies_core::{Dataset, GcnModel, Laplacian, ModelError, SamplerConfig, SamplerKind, SyntheticSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn two_block_sbm(seed: u64) -> Dataset {
    let mut spec = SyntheticSpec::new(Generator::Sbm {
        block_sizes: vec![60, 60],
        p_in: 0.1,
        p_out: 0.005,
    });
    spec.features = ladies_core::data::FeatureKind::Gaussian { dim: 8, signal: 3.0 };
    spec.split = SplitRule::Fractions { train: 0.5, val: 0.25 };
    spec.seed = seed;
    spec.generate().unwrap()
}

fn small_config(kind: SamplerKind) -> TrainConfig {
    TrainConfig {
        layers: 2,
        hidden: 16,
        batch: 32,
        lr: 0.01,
        patience: 30,
        max_batches: 300,
        reps: 1,
        ..TrainConfig::new(SamplerConfig::new(kind))
    }
}

/// Scores the training split, so "validation" tracks train F1.
struct TrainSetEvaluator<'a> {
    p: &'a Laplacian,
    data: &'a Dataset,
}

impl Evaluator for TrainSetEvaluator<'_> {
    fn validation(&mut self, model: &GcnModel) -> Result<f64, ModelError> {
        let logits = model.forward_exact(self.p, &self.data.features)?;
        let nodes = &self.data.splits.train;
        let preds = argmax_rows(&logits.select(ndarray::Axis(0), nodes));
        Ok(micro_f1(&preds, &self.data.labels_of(nodes)))
    }

    fn test(&mut self, model: &GcnModel) -> Result<f64, ModelError> {
        self.validation(model)
    }
}

#[test]
fn full_batch_fits_separable_blocks() {
    let data = two_block_sbm(1);
    let p = Laplacian::from_graph(&data.graph);
    let config = TrainConfig {
        max_batches: 200,
        patience: 200,
        ..small_config(SamplerKind::FullBatch)
    };
    let clock = ladies_cli::train::SystemClock::new();
    let m = train_with(
        &config,
        &data,
        &p,
        &clock,
        &mut TrainSetEvaluator { p: &p, data: &data },
    )
    .unwrap();
    assert!(m.best_val_f1 >= 0.95, "train F1 {}", m.best_val_f1);
    assert!(m.convergence_batch <= 200);
}

#[test]
fn sampled_training_learns_the_blocks() {
    let data = two_block_sbm(2);
    for kind in [
        SamplerKind::Ladies { s_layer: 32 },
        SamplerKind::FastGcn { s_layer: 64 },
        SamplerKind::Neighbor { s_node: 3 },
    ] {
        let m = train(&small_config(kind), &data).unwrap();
        assert!(m.test_f1 >= 0.8, "{kind:?}: {}", m.test_f1);
        assert!(m.diverged.is_none());
    }
}

/// Replays a fixed score sequence and records every model it is shown.
struct Scripted {
    scores: Vec<f64>,
    calls: usize,
    seen: Vec<GcnModel>,
    tested: Option<GcnModel>,
    clock: Option<Rc<Cell<Duration>>>,
}

impl Scripted {
    fn new(scores: Vec<f64>) -> Self {
        Self {
            scores,
            calls: 0,
            seen: Vec::new(),
            tested: None,
            clock: None,
        }
    }
}

impl Evaluator for Scripted {
    fn validation(&mut self, model: &GcnModel) -> Result<f64, ModelError> {
        if let Some(c) = &self.clock {
            c.set(c.get() + Duration::from_secs(100));
        }
        let s = self.scores[self.calls.min(self.scores.len() - 1)];
        self.calls += 1;
        self.seen.push(model.clone());
        Ok(s)
    }

    fn test(&mut self, model: &GcnModel) -> Result<f64, ModelError> {
        self.tested = Some(model.clone());
        Ok(0.5)
    }
}

/// Advances one millisecond per reading; evaluation may add more.
struct FakeClock(Rc<Cell<Duration>>);

impl Clock for FakeClock {
    fn now(&self) -> Duration {
        let t = self.0.get();
        self.0.set(t + Duration::from_millis(1));
        t
    }
}

#[test]
fn plateau_stops_exactly_patience_after_best() {
    let data = two_block_sbm(3);
    let p = Laplacian::from_graph(&data.graph);
    let config = TrainConfig {
        patience: 7,
        ..small_config(SamplerKind::Ladies { s_layer: 16 })
    };
    let mut scores: Vec<f64> = (0..12).map(|i| 0.1 + 0.05 * i as f64).collect();
    scores.push(0.3);
    let mut eval = Scripted::new(scores);
    let clock = FakeClock(Rc::new(Cell::new(Duration::ZERO)));
    let m = train_with(&config, &data, &p, &clock, &mut eval).unwrap();
    assert_eq!(m.convergence_batch, 12);
    assert_eq!(m.batches_run, 12 + 7);
    assert!((m.best_val_f1 - 0.65).abs() < 1e-12);
    assert_eq!(eval.tested.as_ref(), Some(&eval.seen[11]));
}

#[test]
fn small_gains_keep_the_checkpoint_but_not_the_patience() {
    let data = two_block_sbm(3);
    let p = Laplacian::from_graph(&data.graph);
    let config = TrainConfig {
        patience: 5,
        ..small_config(SamplerKind::Ladies { s_layer: 16 })
    };
    let scores = vec![0.5, 0.503, 0.506, 0.509, 0.2, 0.2, 0.2];
    let mut eval = Scripted::new(scores);
    let clock = FakeClock(Rc::new(Cell::new(Duration::ZERO)));
    let m = train_with(&config, &data, &p, &clock, &mut eval).unwrap();
    assert_eq!(m.batches_run, 6);
    assert_eq!(m.convergence_batch, 4);
    assert_eq!(eval.tested.as_ref(), Some(&eval.seen[3]));
}

#[test]
fn selected_checkpoint_is_never_worse_than_an_earlier_one() {
    let data = two_block_sbm(4);
    let p = Laplacian::from_graph(&data.graph);
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..1.0)).collect();
        let config = TrainConfig {
            patience: 20,
            threshold: 0.05,
            seed,
            ..small_config(SamplerKind::FastGcn { s_layer: 16 })
        };
        let mut eval = Scripted::new(scores.clone());
        let clock = FakeClock(Rc::new(Cell::new(Duration::ZERO)));
        let m = train_with(&config, &data, &p, &clock, &mut eval).unwrap();
        let chosen = m.convergence_batch - 1;
        let observed = &scores[..m.batches_run];
        assert!(observed[..=chosen].iter().all(|&s| s <= observed[chosen]));
        assert_eq!(m.best_val_f1, observed.iter().cloned().fold(0.0, f64::max));
        assert_eq!(eval.tested.as_ref(), Some(&eval.seen[chosen]));
    }
}

#[test]
fn training_clock_excludes_evaluation() {
    let data = two_block_sbm(5);
    let p = Laplacian::from_graph(&data.graph);
    let config = TrainConfig {
        patience: 4,
        ..small_config(SamplerKind::Ladies { s_layer: 16 })
    };
    let time = Rc::new(Cell::new(Duration::ZERO));
    let mut eval = Scripted::new(vec![0.1, 0.2, 0.3, 0.3]);
    eval.clock = Some(time.clone());
    let m = train_with(&config, &data, &p, &FakeClock(time), &mut eval).unwrap();
    // Each batch reads the clock twice, one millisecond apart; every
    // evaluation adds 100 s that must not show up.
    assert_eq!(m.batch_ms.mean, 1.0);
    assert_eq!(m.batch_ms.std, 0.0);
    assert!((m.train_seconds - 0.003).abs() < 1e-12, "{}", m.train_seconds);
}

#[test]
fn fixed_seed_reproduces_everything_but_wall_clock() {
    let data = two_block_sbm(6);
    for kind in [SamplerKind::Ladies { s_layer: 16 }, SamplerKind::Neighbor { s_node: 2 }] {
        let config = TrainConfig {
            seed: 42,
            ..small_config(kind)
        };
        let mut a = train(&config, &data).unwrap();
        let mut b = train(&config, &data).unwrap();
        for m in [&mut a, &mut b] {
            m.train_seconds = 0.0;
            m.batch_ms = ladies_cli::Stat { mean: 0.0, std: 0.0 };
        }
        assert_eq!(a, b);
    }
}

#[test]
fn overflowing_features_are_recorded_as_divergence() {
    let mut data = two_block_sbm(7);
    data.features.fill(1e308);
    let m = train(&small_config(SamplerKind::FullBatch), &data).unwrap();
    assert!(m.diverged.is_some());
    assert_eq!(m.test_f1, 0.0);
}

#[test]
fn repeated_runs_use_consecutive_seeds() {
    let data = two_block_sbm(8);
    let config = TrainConfig {
        reps: 3,
        seed: 10,
        patience: 5,
        ..small_config(SamplerKind::Ladies { s_layer: 16 })
    };
    let r = ladies_cli::train_repeated(&config, &data).unwrap();
    let seeds: Vec<u64> = r.runs.iter().map(|m| m.seed).collect();
    assert_eq!(seeds, vec![10, 11, 12]);
    let f1: Vec<f64> = r.runs.iter().map(|m| m.test_f1).collect();
    assert!((r.test_f1.mean - f1.iter().sum::<f64>() / 3.0).abs() < 1e-12);
    let p = Laplacian::from_graph(&data.graph);
    let mut eval = FullBatchEvaluator::new(&p, &data);
    let model = GcnModel::init(&[8, 4, 2], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!((0.0..=1.0).contains(&eval.test(&model).unwrap()));
}
