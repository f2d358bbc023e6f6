use ndarray::{Array2, Zip};

use super::{GcnModel, ModelError};

/// Bias-corrected Adam moments for every weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Array2<f64>>,
    second: Vec<Array2<f64>>,
}

impl AdamState {
    /// `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
    pub fn new(model: &GcnModel, lr: f64) -> Self {
        let zeros: Vec<Array2<f64>> = model.weights().iter().map(|w| Array2::zeros(w.raw_dim())).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update of `model` in place.
    pub fn step(&mut self, model: &mut GcnModel, grads: &[Array2<f64>]) -> Result<(), ModelError> {
        if grads.len() != model.num_layers() {
            return Err(ModelError::Shape(format!(
                "{} gradients for {} layers",
                grads.len(),
                model.num_layers()
            )));
        }
        for (l, (g, w)) in grads.iter().zip(model.weights()).enumerate() {
            if g.dim() != w.dim() {
                return Err(ModelError::Shape(format!(
                    "gradient {l} is {:?}, weight is {:?}",
                    g.dim(),
                    w.dim()
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFiniteGradient { layer: l });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let correction1 = 1.0 - b1.powi(t);
        let correction2 = 1.0 - b2.powi(t);
        let lr = self.lr;
        for (((w, g), m), v) in model
            .weights_mut()
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn model() -> GcnModel {
        GcnModel::from_weights(vec![array![[1.0, -2.0], [0.5, 3.0]]]).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_weights() {
        let mut m = model();
        let before = m.clone();
        let mut adam = AdamState::new(&m, 0.001);
        adam.step(&mut m, &[Array2::zeros((2, 2))]).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut m = model();
        let before = m.clone();
        let mut adam = AdamState::new(&m, 0.001);
        let g = array![[0.3, -2.0], [1e-3, -50.0]];
        adam.step(&mut m, std::slice::from_ref(&g)).unwrap();
        let delta = &before.weights()[0] - &m.weights()[0];
        for (d, gv) in delta.iter().zip(g.iter()) {
            assert!((d - 0.001 * gv.signum()).abs() < 1e-7, "{d}");
        }
    }

    #[test]
    fn convex_quadratic_decreases() {
        // f(W) = 0.5 ||W - T||^2, gradient W - T.
        let target = array![[3.0, -3.5], [2.0, 1.0]];
        let mut m = model();
        let mut adam = AdamState::new(&m, 0.01);
        let f = |m: &GcnModel| 0.5 * (&m.weights()[0] - &target).mapv(|v| v * v).sum();
        let mut history = vec![f(&m)];
        for _ in 0..100 {
            let g = &m.weights()[0] - &target;
            adam.step(&mut m, &[g]).unwrap();
            history.push(f(&m));
        }
        assert!(history[10..].windows(2).all(|w| w[1] < w[0]));
        assert!(history[100] < 0.5 * history[0]);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut m = model();
        let mut adam = AdamState::new(&m, 0.001);
        let err = adam.step(&mut m, &[array![[f64::NAN, 0.0], [0.0, 0.0]]]);
        assert!(matches!(err, Err(ModelError::NonFiniteGradient { layer: 0 })));
        assert_eq!(adam.step_count(), 0);
    }
}
