//! Multinomial logistic regression trained by full-batch gradient descent.

use crate::config::ExperimentConfig;
use crate::data::Dataset;
use crate::error::{ExperimentError, Result};

/// `classes × (dim + 1)` weights, row-major, bias in the last column.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub classes: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: LinearModel,
    /// Gradient steps taken.
    pub steps: usize,
    pub train_error: f64,
}

impl LinearModel {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        LinearModel { classes, dim, weights: vec![0.0; classes * (dim + 1)] }
    }

    fn row(&self, c: usize) -> &[f64] {
        let w = self.dim + 1;
        &self.weights[c * w..(c + 1) * w]
    }

    pub fn logits(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            let r = self.row(c);
            *o = r[self.dim] + r[..self.dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Argmax of the logits; ties go to the lowest class.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut z = vec![0.0; self.classes];
        self.logits(x, &mut z);
        let mut best = 0;
        for c in 1..self.classes {
            if z[c] > z[best] {
                best = c;
            }
        }
        best
    }

    pub fn zero_one_error(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let wrong = (0..data.len()).filter(|&j| self.predict(data.point(j)) != data.y[j]).count();
        wrong as f64 / data.len() as f64
    }

    /// Mean softmax cross-entropy.
    pub fn loss(&self, data: &Dataset) -> f64 {
        let mut z = vec![0.0; self.classes];
        let mut total = 0.0;
        for j in 0..data.len() {
            self.logits(data.point(j), &mut z);
            total += log_sum_exp(&z) - z[data.y[j]];
        }
        total / data.len() as f64
    }

    /// Mean cross-entropy and its gradient with respect to `weights`.
    pub fn loss_and_gradient(&self, data: &Dataset) -> (f64, Vec<f64>) {
        let w = self.dim + 1;
        let mut grad = vec![0.0; self.weights.len()];
        let mut z = vec![0.0; self.classes];
        let mut total = 0.0;
        for j in 0..data.len() {
            let x = data.point(j);
            let y = data.y[j];
            self.logits(x, &mut z);
            let lse = log_sum_exp(&z);
            total += lse - z[y];
            for c in 0..self.classes {
                let r = (z[c] - lse).exp() - if c == y { 1.0 } else { 0.0 };
                let g = &mut grad[c * w..(c + 1) * w];
                for (gk, xk) in g[..self.dim].iter_mut().zip(x) {
                    *gk += r * xk;
                }
                g[self.dim] += r;
            }
        }
        let scale = 1.0 / data.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        (total * scale, grad)
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Gradient descent from zero weights, at most `epochs` steps, stopping as
/// soon as the training error is below `early_stop_train_error`.
pub fn train(data: &Dataset, config: &ExperimentConfig) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(ExperimentError::Config("empty training set".into()));
    }
    let mut model = LinearModel::zeros(config.classes, config.dim);
    let mut steps = 0;
    let mut train_error = model.zero_one_error(data);
    while steps < config.epochs && train_error >= config.early_stop_train_error {
        let (_, grad) = model.loss_and_gradient(data);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(ExperimentError::Diverged { step: steps });
        }
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= config.lr * g;
        }
        steps += 1;
        train_error = model.zero_one_error(data);
    }
    Ok(TrainOutcome { model, steps, train_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_points() -> Dataset {
        let mut d = Dataset::new(1);
        d.push(&[-1.0], 0);
        d.push(&[1.0], 1);
        d
    }

    #[test]
    fn zero_model_has_uniform_loss() {
        let m = LinearModel::zeros(3, 2);
        let mut d = Dataset::new(2);
        d.push(&[0.3, -1.0], 2);
        assert!((m.loss(&d) - 3f64.ln()).abs() < 1e-15);
        assert_eq!(m.predict(&[5.0, 5.0]), 0);
    }

    #[test]
    fn separable_pair_reaches_zero_error() {
        let c = ExperimentConfig { dim: 1, lr: 0.5, ..ExperimentConfig::default() };
        let out = train(&two_points(), &c).unwrap();
        assert_eq!(out.train_error, 0.0);
        assert!(out.steps < c.epochs);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut d = Dataset::new(2);
        d.push(&[0.5, -1.5], 0);
        d.push(&[2.0, 0.25], 1);
        d.push(&[-0.7, 0.1], 2);
        let mut m = LinearModel::zeros(3, 2);
        for (k, w) in m.weights.iter_mut().enumerate() {
            *w = 0.1 * k as f64 - 0.4;
        }
        let (l, g) = m.loss_and_gradient(&d);
        assert!((l - m.loss(&d)).abs() < 1e-15);
        let h = 1e-5;
        for k in 0..g.len() {
            let mut p = m.clone();
            p.weights[k] += h;
            let mut q = m.clone();
            q.weights[k] -= h;
            let fd = (p.loss(&d) - q.loss(&d)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-9, "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let mut d = Dataset::new(1);
        d.push(&[f64::INFINITY], 0);
        d.push(&[0.0], 1);
        let c = ExperimentConfig { dim: 1, ..ExperimentConfig::default() };
        assert!(matches!(train(&d, &c), Err(ExperimentError::Diverged { step: 0 })));
    }
}
