//! Gaussian class-conditional data laid out as supersamples.

use rand::Rng;
use rand_distr::StandardNormal;

use fgen_core::sampling::stream_rng;

use crate::config::ExperimentConfig;

const MEANS_TAG: u64 = 0x6d65_616e;
const DATA_TAG: u64 = 0x6461_7461;

/// Labeled points, features stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub x: Vec<f64>,
    pub y: Vec<usize>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Dataset { dim, x: Vec::new(), y: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.x[j * self.dim..(j + 1) * self.dim]
    }

    pub fn push(&mut self, x: &[f64], y: usize) {
        debug_assert_eq!(x.len(), self.dim);
        self.x.extend_from_slice(x);
        self.y.push(y);
    }
}

/// Class means, drawn once per experiment: standard Gaussian coordinates
/// scaled by `class_sep`.
pub fn class_means(config: &ExperimentConfig) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(config.seed, &[MEANS_TAG]);
    (0..config.classes)
        .map(|_| (0..config.dim).map(|_| config.class_sep * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

/// `n` rows by 2 columns of i.i.d. points; entry `(i, c)` sits at index
/// `2i + c`. Label uniform over classes, features `N(μ_y, I)`.
pub fn generate_supersample(config: &ExperimentConfig, means: &[Vec<f64>], n: usize, draw: usize) -> Dataset {
    let mut rng = stream_rng(config.seed, &[DATA_TAG, n as u64, draw as u64]);
    let mut data = Dataset::new(config.dim);
    let mut x = vec![0.0; config.dim];
    for _ in 0..2 * n {
        let y = rng.random_range(0..config.classes);
        for (v, mu) in x.iter_mut().zip(&means[y]) {
            *v = mu + rng.sample::<f64, _>(StandardNormal);
        }
        data.push(&x, y);
    }
    data
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supersample_is_reproducible() {
        let c = ExperimentConfig { seed: 4, ..ExperimentConfig::default() };
        let m = class_means(&c);
        let a = generate_supersample(&c, &m, 10, 3);
        let b = generate_supersample(&c, &m, 10, 3);
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        assert_ne!(a, generate_supersample(&c, &m, 10, 4));
    }

    #[test]
    fn zero_separation_collapses_means() {
        let c = ExperimentConfig { class_sep: 0.0, classes: 10, ..ExperimentConfig::default() };
        assert!(class_means(&c).iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn labels_cover_classes() {
        let c = ExperimentConfig { classes: 10, ..ExperimentConfig::default() };
        let d = generate_supersample(&c, &class_means(&c), 500, 0);
        assert!((0..10).all(|k| d.y.contains(&k)));
        assert!(d.x.iter().all(|v| v.is_finite()));
    }
}
