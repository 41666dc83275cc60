//! Supersample protocol: `k1` supersamples, `k2` masks each, one trained
//! model per (draw, mask).

use rand::Rng;
use rayon::prelude::*;

use fgen_core::sampling::stream_rng;
use fgen_core::supersample::{LossKind, SupersampleLossTensor};

use crate::config::ExperimentConfig;
use crate::data::{class_means, generate_supersample, Dataset};
use crate::error::{ExperimentError, Result};
use crate::model::train;

const MASK_TAG: u64 = 0x6d61_736b;

/// Fair mask bits for one (draw, mask) job.
pub fn draw_masks(config: &ExperimentConfig, n: usize, draw: usize, mask: usize) -> Vec<u8> {
    let mut rng = stream_rng(config.seed, &[MASK_TAG, n as u64, draw as u64, mask as u64]);
    (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect()
}

/// Entry `(i, u_i)` of every row.
pub fn training_split(supersample: &Dataset, masks: &[u8]) -> Dataset {
    let mut train = Dataset::new(supersample.dim);
    for (i, &u) in masks.iter().enumerate() {
        let j = 2 * i + usize::from(u);
        train.push(supersample.point(j), supersample.y[j]);
    }
    train
}

fn job(
    config: &ExperimentConfig,
    supersample: &Dataset,
    n: usize,
    draw: usize,
    mask: usize,
) -> Result<(Vec<[f64; 2]>, Vec<u8>)> {
    let masks = draw_masks(config, n, draw, mask);
    let out = train(&training_split(supersample, &masks), config).map_err(|e| match e {
        ExperimentError::Diverged { step } => ExperimentError::Training { draw, mask, step },
        other => other,
    })?;
    let model = out.model;
    let losses = (0..n)
        .map(|i| {
            let l = |c: usize| {
                let j = 2 * i + c;
                if model.predict(supersample.point(j)) == supersample.y[j] {
                    0.0
                } else {
                    1.0
                }
            };
            [l(0), l(1)]
        })
        .collect();
    Ok((losses, masks))
}

/// Zero-one loss tensor for sample size `n`. Output does not depend on
/// the size of the rayon pool.
pub fn run_protocol(config: &ExperimentConfig, n: usize) -> Result<SupersampleLossTensor> {
    config.validate()?;
    if n == 0 {
        return Err(ExperimentError::Config("n must be positive".into()));
    }
    let means = class_means(config);
    let supersamples: Vec<Dataset> =
        (0..config.k1).into_par_iter().map(|d| generate_supersample(config, &means, n, d)).collect();
    let jobs: Vec<(Vec<[f64; 2]>, Vec<u8>)> = (0..config.k1 * config.k2)
        .into_par_iter()
        .map(|j| {
            let (d, m) = (j / config.k2, j % config.k2);
            job(config, &supersamples[d], n, d, m)
        })
        .collect::<Result<_>>()?;
    let mut losses = Vec::with_capacity(config.k1 * config.k2 * n);
    let mut masks = Vec::with_capacity(config.k1 * config.k2 * n);
    for (l, m) in jobs {
        losses.extend(l);
        masks.extend(m);
    }
    Ok(SupersampleLossTensor::new(config.k1, config.k2, n, losses, masks, LossKind::ZeroOne, None)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_case_trains_to_zero() {
        let c = ExperimentConfig { k1: 1, k2: 1, class_sep: 10.0, ..ExperimentConfig::default() };
        let t = run_protocol(&c, 2).unwrap();
        for i in 0..2 {
            let u = t.mask(0, 0, i) as usize;
            assert_eq!(t.losses(0, 0, i)[u], 0.0);
        }
    }

    #[test]
    fn mask_marginal_is_fair() {
        let c = ExperimentConfig::default();
        for i in 0..5 {
            let mean = (0..1000).map(|m| f64::from(draw_masks(&c, 5, 0, m)[i])).sum::<f64>() / 1000.0;
            assert!((mean - 0.5).abs() <= 0.05, "row {i}: {mean}");
        }
    }

    #[test]
    fn split_selects_masked_column() {
        let mut s = Dataset::new(1);
        for v in 0..4 {
            s.push(&[v as f64], v);
        }
        let t = training_split(&s, &[1, 0]);
        assert_eq!(t.y, vec![1, 2]);
    }
}
