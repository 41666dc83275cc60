use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};

/// Synthetic Gaussian linear-classification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub classes: usize,
    /// Scale of the class means. Zero gives class-independent features.
    pub class_sep: f64,
    pub n_grid: Vec<usize>,
    /// Supersample draws per `n`.
    pub k1: usize,
    /// Mask draws per supersample.
    pub k2: usize,
    pub lr: f64,
    pub epochs: usize,
    /// Training stops once the training zero-one error falls below this.
    pub early_stop_train_error: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dim: 5,
            classes: 2,
            class_sep: 1.0,
            n_grid: vec![25, 50, 100, 250, 500],
            k1: 50,
            k2: 100,
            lr: 0.01,
            epochs: 300,
            early_stop_train_error: 0.005,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.classes < 2 {
            return bad("classes must be at least 2");
        }
        if !self.class_sep.is_finite() || self.class_sep < 0.0 {
            return bad("class_sep must be finite and non-negative");
        }
        if self.n_grid.is_empty() || self.n_grid[0] == 0 {
            return bad("n_grid must be non-empty with positive entries");
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_grid must be strictly increasing");
        }
        if self.k1 == 0 || self.k2 == 0 {
            return bad("k1 and k2 must be positive");
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return bad("lr must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(0.0..=1.0).contains(&self.early_stop_train_error) {
            return bad("early_stop_train_error must lie in [0, 1]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_grids() {
        let mut c = ExperimentConfig::default();
        c.n_grid = vec![50, 25];
        assert!(c.validate().is_err());
        c.n_grid = vec![];
        assert!(c.validate().is_err());
        c = ExperimentConfig { lr: 0.0, ..ExperimentConfig::default() };
        assert!(c.validate().is_err());
        c = ExperimentConfig { classes: 1, ..ExperimentConfig::default() };
        assert!(c.validate().is_err());
    }
}
