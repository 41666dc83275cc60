//! Synthetic loss channels with closed-form information content.

use rand::Rng;

use crate::distributions::JointLossMaskDistribution;
use crate::error::{Error, Result};
use crate::sampling::stream_rng;
use crate::supersample::{LossKind, SupersampleLossTensor};

/// Interpolating learner: training loss 0, test loss `Bernoulli(p)`, so
/// `G ∈ {0, 1}` with `P(G = 1) = p` and `I(ΔL; U) = p ln 2`.
pub fn interpolating_bernoulli_joint(p: f64) -> Result<JointLossMaskDistribution> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Precondition(format!("Bernoulli parameter {p} outside [0, 1]")));
    }
    JointLossMaskDistribution::new(
        vec![-1.0, 0.0, 1.0],
        vec![0.0, 0.5 * (1.0 - p), 0.5 * p],
        vec![0.5 * p, 0.5 * (1.0 - p), 0.0],
    )
}

/// `ΔL = +1` when `U = 0` and `-1` when `U = 1`, so `G ≡ 1`.
pub fn deterministic_joint() -> JointLossMaskDistribution {
    JointLossMaskDistribution::new(vec![-1.0, 1.0], vec![0.0, 0.5], vec![0.5, 0.0]).expect("valid joint")
}

/// Losses for mask `u` realizing a test loss, with training loss 0.
fn interpolating_losses(u: u8, test_loss: f64) -> [f64; 2] {
    if u == 0 {
        [0.0, test_loss]
    } else {
        [test_loss, 0.0]
    }
}

/// One row whose `k2` mask samples hit the interpolating joint's
/// proportions exactly. Requires `p·k2/2` to be an integer and `k2` even.
pub fn interpolating_bernoulli_tensor(p: f64, k2: usize) -> Result<SupersampleLossTensor> {
    let half = k2 / 2;
    let ones = p * half as f64;
    if k2 == 0 || !k2.is_multiple_of(2) || ones.fract() != 0.0 || !(0.0..=1.0).contains(&p) {
        return Err(Error::Precondition(format!("p = {p} with k2 = {k2} has no exact-proportion layout")));
    }
    let ones = ones as usize;
    let mut losses = Vec::with_capacity(k2);
    let mut masks = Vec::with_capacity(k2);
    for u in [0u8, 1] {
        for j in 0..half {
            masks.push(u);
            losses.push(interpolating_losses(u, if j < ones { 1.0 } else { 0.0 }));
        }
    }
    SupersampleLossTensor::new(1, k2, 1, losses, masks, LossKind::ZeroOne, None)
}

/// Monte-Carlo draws of the interpolating channel: fair masks and
/// `Bernoulli(p)` test losses, laid out as `k1 × k2 × n`.
pub fn interpolating_bernoulli_sampled(
    p: f64,
    k1: usize,
    k2: usize,
    n: usize,
    seed: u64,
) -> Result<SupersampleLossTensor> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Precondition(format!("Bernoulli parameter {p} outside [0, 1]")));
    }
    let mut rng = stream_rng(seed, &[0x1b_e4]);
    let len = k1 * k2 * n;
    let mut losses = Vec::with_capacity(len);
    let mut masks = Vec::with_capacity(len);
    for _ in 0..len {
        let u = u8::from(rng.random_bool(0.5));
        let test = if rng.random_bool(p) { 1.0 } else { 0.0 };
        masks.push(u);
        losses.push(interpolating_losses(u, test));
    }
    SupersampleLossTensor::new(k1, k2, n, losses, masks, LossKind::ZeroOne, None)
}

/// Samples `(U, ΔL)` from a joint and records losses `[0, ΔL]` or
/// `[-ΔL, 0]`. The joint's support must lie in `[-1, 1]`.
pub fn sample_channel_tensor(
    joint: &JointLossMaskDistribution,
    k1: usize,
    k2: usize,
    n: usize,
    seed: u64,
) -> Result<SupersampleLossTensor> {
    if joint.support().iter().any(|v| v.abs() > 1.0) {
        return Err(Error::Precondition("channel support must lie in [-1, 1]".into()));
    }
    let cond: Vec<Vec<f64>> = (0..2)
        .map(|u| joint.conditional(u).ok_or_else(|| Error::Precondition(format!("stratum {u} is empty"))))
        .collect::<Result<_>>()?;
    let pu0 = joint.u_marginal()[0];
    let mut rng = stream_rng(seed, &[0xc4a7]);
    let len = k1 * k2 * n;
    let mut losses = Vec::with_capacity(len);
    let mut masks = Vec::with_capacity(len);
    for _ in 0..len {
        let u = if rng.random::<f64>() < pu0 { 0u8 } else { 1u8 };
        let r: f64 = rng.random();
        let mut acc = 0.0;
        let c = &cond[usize::from(u)];
        let mut v = *joint.support().last().expect("non-empty support");
        for (j, &p) in c.iter().enumerate() {
            acc += p;
            if r < acc {
                v = joint.support()[j];
                break;
            }
        }
        masks.push(u);
        losses.push(if v >= 0.0 { [0.0, v] } else { [-v, 0.0] });
    }
    SupersampleLossTensor::new(k1, k2, n, losses, masks, LossKind::BoundedUnit, None)
}

/// Every loss equal to `value`, masks alternating so no stratum is empty.
pub fn constant_tensor(k1: usize, k2: usize, n: usize, value: f64) -> Result<SupersampleLossTensor> {
    let len = k1 * k2 * n;
    let masks = (0..len).map(|j| ((j / n) % 2) as u8).collect();
    let kind = if value == 0.0 || value == 1.0 {
        LossKind::ZeroOne
    } else if (0.0..=1.0).contains(&value) {
        LossKind::BoundedUnit
    } else {
        LossKind::General
    };
    SupersampleLossTensor::new(k1, k2, n, vec![[value, value]; len], masks, kind, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences::{f_information, DivergenceKind};
    use crate::supersample::{estimate_f_information, Mode};

    #[test]
    fn interpolating_joint_information() {
        let j = interpolating_bernoulli_joint(0.25).unwrap();
        let i = f_information(&j, DivergenceKind::Kl);
        assert!((i - 0.25 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!((i - 0.1732868).abs() < 1e-7);
        assert_eq!(j.mean_g(), 0.25);
        assert_eq!(j.mean_g2(), 0.25);
    }

    #[test]
    fn exact_tensor_matches_joint() {
        let t = interpolating_bernoulli_tensor(0.25, 8).unwrap();
        let q = t.default_quantizer().unwrap();
        let est = estimate_f_information(&t, DivergenceKind::Kl, Mode::Pooled, &q).unwrap();
        assert!((est.values[0] - 0.25 * std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(t.empirical_gen_error().mean, 0.25);
        assert!(interpolating_bernoulli_tensor(0.3, 8).is_err());
    }

    #[test]
    fn sampled_channel_recovers_information() {
        let t = sample_channel_tensor(&deterministic_joint(), 1, 400, 1, 9).unwrap();
        let q = t.default_quantizer().unwrap();
        let est = estimate_f_information(&t, DivergenceKind::Kl, Mode::Pooled, &q).unwrap();
        assert!((est.values[0] - std::f64::consts::LN_2).abs() < 1e-12);
    }
}
