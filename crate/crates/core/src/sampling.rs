//! Seeded random generators for distributions and joints used by the
//! property suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::distributions::{DiscreteDistribution, JointLossMaskDistribution};

/// Largest support drawn by the samplers.
pub const MAX_SUPPORT: usize = 8;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, tags…)`, stable across thread schedules.
pub fn stream_rng(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = splitmix64(seed);
    for &t in tags {
        state = splitmix64(state ^ splitmix64(t));
    }
    ChaCha8Rng::seed_from_u64(state)
}

/// A point of the flat Dirichlet on `k` atoms.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// `k` sorted distinct values uniform in `[lo, hi]`.
pub fn random_support<R: Rng + ?Sized>(rng: &mut R, k: usize, lo: f64, hi: f64) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..k).map(|_| rng.random_range(lo..=hi)).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        if v.len() == k {
            return v;
        }
    }
}

/// Two distributions on a common random support of size `1..=MAX_SUPPORT`.
pub fn random_pair<R: Rng + ?Sized>(rng: &mut R) -> (DiscreteDistribution, DiscreteDistribution) {
    let k = rng.random_range(1..=MAX_SUPPORT);
    let support = random_support(rng, k, -1.0, 1.0);
    let p = DiscreteDistribution::new(support.clone(), random_simplex(rng, k)).expect("simplex point");
    let q = DiscreteDistribution::new(support, random_simplex(rng, k)).expect("simplex point");
    (p, q)
}

/// Joint with `P(U = u) = 1/2`, support in `[-1, 1]` and flat-Dirichlet
/// conditionals.
pub fn random_joint<R: Rng + ?Sized>(rng: &mut R) -> JointLossMaskDistribution {
    let k = rng.random_range(1..=MAX_SUPPORT);
    let support = random_support(rng, k, -1.0, 1.0);
    let c0 = random_simplex(rng, k);
    let c1 = random_simplex(rng, k);
    JointLossMaskDistribution::from_conditionals(support, &c0, &c1).expect("valid conditionals")
}

/// Joint with `G = (-1)^U ΔL ≥ 0` on every atom: `ΔL ≥ 0` when `U = 0`
/// and `ΔL ≤ 0` when `U = 1`.
pub fn random_realizable_joint<R: Rng + ?Sized>(rng: &mut R) -> JointLossMaskDistribution {
    let k = rng.random_range(1..=MAX_SUPPORT / 2);
    let gaps = random_support(rng, k, 0.0, 1.0);
    let w0 = random_simplex(rng, k);
    let w1 = random_simplex(rng, k);
    let mut atoms: Vec<(f64, f64, f64)> = Vec::new();
    for j in 0..k {
        atoms.push((gaps[j], 0.5 * w0[j], 0.0));
        atoms.push((-gaps[j], 0.0, 0.5 * w1[j]));
    }
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    // A zero gap appears once with mass from both strata.
    let mut merged: Vec<(f64, f64, f64)> = Vec::new();
    for a in atoms {
        match merged.last_mut() {
            Some(last) if last.0 == a.0 => {
                last.1 += a.1;
                last.2 += a.2;
            }
            _ => merged.push(a),
        }
    }
    let support = merged.iter().map(|a| a.0).collect();
    let p0 = merged.iter().map(|a| a.1).collect();
    let p1 = merged.iter().map(|a| a.2).collect();
    JointLossMaskDistribution::new(support, p0, p1).expect("valid realizable joint")
}

/// A random map from `k` atoms onto `1..=k` groups, each group hit.
pub fn random_coarsening<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<usize> {
    let groups = rng.random_range(1..=k);
    let mut map: Vec<usize> = (0..k).map(|j| if j < groups { j } else { rng.random_range(0..groups) }).collect();
    for j in (1..k).rev() {
        let i = rng.random_range(0..=j);
        map.swap(i, j);
    }
    map
}

/// Sums `probs` into the groups of `map`.
pub fn coarsen(probs: &[f64], map: &[usize]) -> Vec<f64> {
    let groups = map.iter().max().map_or(0, |m| m + 1);
    let mut out = vec![0.0; groups];
    for (p, &g) in probs.iter().zip(map) {
        out[g] += p;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream_rng(7, &[1, 2]).random();
        let b: u64 = stream_rng(7, &[1, 2]).random();
        let c: u64 = stream_rng(7, &[2, 1]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn realizable_joint_has_nonnegative_gap() {
        let mut rng = stream_rng(3, &[]);
        for _ in 0..200 {
            let j = random_realizable_joint(&mut rng);
            assert!(j.is_exact_uniform());
            assert!(j.min_g() >= 0.0);
        }
    }

    #[test]
    fn coarsening_hits_every_group() {
        let mut rng = stream_rng(5, &[]);
        for _ in 0..100 {
            let map = random_coarsening(&mut rng, 6);
            let groups = map.iter().max().unwrap() + 1;
            assert!((0..groups).all(|g| map.contains(&g)));
            let c = coarsen(&[0.1, 0.2, 0.3, 0.1, 0.2, 0.1], &map);
            assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
