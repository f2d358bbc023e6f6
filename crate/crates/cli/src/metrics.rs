use serde::Serialize;

/// Micro-averaged F1 for single-label predictions. Every node contributes
/// exactly one prediction, so micro precision, recall and F1 all equal the
/// fraction of correct predictions. Empty input scores 0.
pub fn micro_f1(predictions: &[usize], labels: &[usize]) -> f64 {
    assert_eq!(predictions.len(), labels.len(), "one prediction per label");
    if labels.is_empty() {
        return 0.0;
    }
    let correct = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    correct as f64 / labels.len() as f64
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let (mean, std) = ladies_core::variance::mean_and_std(xs);
        Self { mean, std }
    }
}

/// Outcome of one training repetition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub seed: u64,
    /// Test micro-F1 of the best-validation checkpoint.
    pub test_f1: f64,
    pub best_val_f1: f64,
    /// Batches trained when the best checkpoint was taken.
    pub convergence_batch: usize,
    pub batches_run: usize,
    /// Training time up to the convergence batch, evaluation excluded.
    pub train_seconds: f64,
    pub batch_ms: Stat,
    /// Largest activation count over the batches of the run.
    pub activations: usize,
    pub parameters: usize,
    pub memory_mb: f64,
    /// Why the repetition was aborted, if it was.
    pub diverged: Option<String>,
}

/// Repetitions of one configuration, summarized.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatedMetrics {
    pub sampler: String,
    pub runs: Vec<RunMetrics>,
    pub test_f1: Stat,
    pub train_seconds: Stat,
    pub memory_mb: Stat,
    pub batch_ms: Stat,
    pub convergence_batch: Stat,
    pub diverged: usize,
}

impl RepeatedMetrics {
    pub fn from_runs(sampler: String, runs: Vec<RunMetrics>) -> Self {
        let col = |f: &dyn Fn(&RunMetrics) -> f64| runs.iter().map(f).collect::<Vec<f64>>();
        Self {
            sampler,
            test_f1: Stat::of(&col(&|r| r.test_f1)),
            train_seconds: Stat::of(&col(&|r| r.train_seconds)),
            memory_mb: Stat::of(&col(&|r| r.memory_mb)),
            batch_ms: Stat::of(&col(&|r| r.batch_ms.mean)),
            convergence_batch: Stat::of(&col(&|r| r.convergence_batch as f64)),
            diverged: runs.iter().filter(|r| r.diverged.is_some()).count(),
            runs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremes() {
        assert_eq!(micro_f1(&[0, 1, 2], &[0, 1, 2]), 1.0);
        assert_eq!(micro_f1(&[1, 2, 0], &[0, 1, 2]), 0.0);
        assert_eq!(micro_f1(&[], &[]), 0.0);
    }

    #[test]
    fn three_class_confusion_by_hand() {
        let labels = [0, 0, 0, 1, 1, 2, 2, 2, 2, 1];
        let preds = [0, 1, 0, 1, 2, 2, 2, 0, 2, 1];
        // Confusion rows (truth) x cols (prediction):
        //   0: [2, 1, 0]   1: [0, 2, 1]   2: [1, 0, 3]
        // Micro TP = 2 + 2 + 3 = 7, FP = FN = 3.
        let (tp, fp, fneg) = (7.0, 3.0, 3.0);
        let precision = tp / (tp + fp);
        let recall = tp / (tp + fneg);
        let f1 = 2.0 * precision * recall / (precision + recall);
        assert!((micro_f1(&preds, &labels) - f1).abs() < 1e-15);
    }
}
