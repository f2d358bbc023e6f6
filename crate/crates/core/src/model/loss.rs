use ndarray::Array2;

use super::ModelError;

/// Mean softmax cross-entropy over the rows of `logits` and its gradient
/// `dLoss/dlogits = (softmax - onehot) / b`.
pub fn softmax_cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>), ModelError> {
    let (b, c) = logits.dim();
    if labels.len() != b {
        return Err(ModelError::Shape(format!("{b} logit rows but {} labels", labels.len())));
    }
    if let Some((position, &label)) = labels.iter().enumerate().find(|(_, &y)| y >= c) {
        return Err(ModelError::LabelOutOfRange {
            position,
            label,
            num_classes: c,
        });
    }
    let mut grad = Array2::zeros((b, c));
    let mut loss = 0.0;
    let inv_b = 1.0 / b as f64;
    for (i, (row, mut g)) in logits.rows().into_iter().zip(grad.rows_mut()).enumerate() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let log_sum = max + sum.ln();
        loss += log_sum - row[labels[i]];
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = (row[k] - log_sum).exp() * inv_b;
        }
        g[labels[i]] -= inv_b;
    }
    Ok((loss * inv_b, grad))
}

/// Index of the largest entry in each row (first one on ties).
pub fn argmax_rows(m: &Array2<f64>) -> Vec<usize> {
    m.rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |best, (k, &v)| {
                        if v > best.1 {
                            (k, v)
                        } else {
                            best
                        }
                    },
                )
                .0
        })
        .collect()
}
