//! Finite discrete distributions over loss-difference values and the joint
//! law of a loss difference with its mask bit.
//!
//! Every distribution here is a plug-in object: probabilities are exact
//! ratios of counts, nothing is smoothed. The divergence and bound code
//! relies on that, since the per-joint inequalities it checks are exact
//! for plug-in laws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on total mass.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Tolerance used when snapping samples onto `{-1, 0, 1}`.
pub const ZERO_ONE_TOLERANCE: f64 = 1e-12;

/// Default number of bins for non zero-one losses.
pub const DEFAULT_BIN_COUNT: usize = 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct DiscreteDistribution {
    support: Vec<f64>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDistribution {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl TryFrom<RawDistribution> for DiscreteDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        DiscreteDistribution::new(raw.support, raw.probs)
    }
}

impl DiscreteDistribution {
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptyInput("distribution support"));
        }
        if support.len() != probs.len() {
            return Err(Error::InvalidDistribution(format!(
                "support has {} atoms but probs has {}",
                support.len(),
                probs.len()
            )));
        }
        for (index, &value) in support.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
        }
        if let Some(i) = support.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDistribution(format!("support not strictly increasing at index {}", i + 1)));
        }
        check_mass(&probs)?;
        Ok(DiscreteDistribution { support, probs })
    }

    /// Point mass at `value`.
    pub fn point(value: f64) -> Result<Self> {
        Self::new(vec![value], vec![1.0])
    }

    /// Plug-in empirical distribution of `values` after quantization.
    pub fn from_samples(values: &[f64], quantizer: &Quantizer) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("samples"));
        }
        let quantized = quantizer.quantize_all(values)?;
        let (support, counts) = count_sorted(quantized);
        let total = values.len() as f64;
        let probs = counts.iter().map(|&c| c as f64 / total).collect();
        Self::new(support, probs)
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn prob_of(&self, value: f64) -> f64 {
        match self.support.binary_search_by(|s| s.total_cmp(&value)) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.support.iter().zip(&self.probs).map(|(&v, &p)| p * f(v)).sum()
    }

    /// Express `self` and `other` on their merged support. Atoms missing from
    /// one side get probability zero there.
    pub fn align(&self, other: &DiscreteDistribution) -> Aligned {
        let mut support = Vec::with_capacity(self.len() + other.len());
        let mut p = Vec::with_capacity(support.capacity());
        let mut q = Vec::with_capacity(support.capacity());
        let (mut i, mut j) = (0, 0);
        while i < self.len() || j < other.len() {
            let a = self.support.get(i).copied();
            let b = other.support.get(j).copied();
            match (a, b) {
                (Some(x), Some(y)) if x == y => {
                    support.push(x);
                    p.push(self.probs[i]);
                    q.push(other.probs[j]);
                    i += 1;
                    j += 1;
                }
                (Some(x), Some(y)) if x < y => {
                    support.push(x);
                    p.push(self.probs[i]);
                    q.push(0.0);
                    i += 1;
                }
                (Some(x), None) => {
                    support.push(x);
                    p.push(self.probs[i]);
                    q.push(0.0);
                    i += 1;
                }
                (_, Some(y)) => {
                    support.push(y);
                    p.push(0.0);
                    q.push(other.probs[j]);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        Aligned { support, p, q }
    }

    /// Law of `g(X)` for `X` distributed as `self`.
    pub fn push_forward(&self, g: impl Fn(f64) -> f64) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = self.support.iter().zip(&self.probs).map(|(&v, &p)| (g(v), p)).collect();
        for (index, &(value, _)) in pairs.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::new();
        let mut probs: Vec<f64> = Vec::new();
        for (v, p) in pairs {
            if support.last() == Some(&v) {
                *probs.last_mut().unwrap() += p;
            } else {
                support.push(v);
                probs.push(p);
            }
        }
        Self::new(support, probs)
    }
}

/// Two probability vectors on a shared support.
#[derive(Debug, Clone, PartialEq)]
pub struct Aligned {
    pub support: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

fn check_mass(probs: &[f64]) -> Result<()> {
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "probability {p} at index {i} is not a finite nonnegative number"
            )));
        }
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("total mass {total} differs from 1")));
    }
    Ok(())
}

/// Sorts, deduplicates and counts.
fn count_sorted(mut values: Vec<f64>) -> (Vec<f64>, Vec<usize>) {
    values.sort_by(f64::total_cmp);
    let mut support = Vec::new();
    let mut counts = Vec::new();
    for v in values {
        if support.last() == Some(&v) {
            *counts.last_mut().unwrap() += 1;
        } else {
            support.push(v);
            counts.push(1);
        }
    }
    (support, counts)
}

/// Maps raw loss differences onto a finite alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quantizer {
    /// Zero-one losses: values must already lie in `{-1, 0, 1}`.
    ExactZeroOne,
    /// Equal-width bins over `[lo, hi]`, each value replaced by its bin
    /// midpoint. Values outside the range fall into the edge bins.
    UniformBins { bin_count: usize, lo: f64, hi: f64 },
}

impl Quantizer {
    pub fn uniform_bins(bin_count: usize, lo: f64, hi: f64) -> Result<Self> {
        let q = Quantizer::UniformBins { bin_count, lo, hi };
        q.validate()?;
        Ok(q)
    }

    /// Default binning over the observed range of `values`. A degenerate
    /// range is widened to unit width around the single value, which the
    /// odd bin count maps back onto itself.
    pub fn for_observed(values: &[f64]) -> Result<Self> {
        let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::EmptyInput("values for quantizer range"));
        }
        if lo < hi {
            Self::uniform_bins(DEFAULT_BIN_COUNT, lo, hi)
        } else {
            Self::uniform_bins(DEFAULT_BIN_COUNT, lo - 0.5, hi + 0.5)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Quantizer::ExactZeroOne => Ok(()),
            Quantizer::UniformBins { bin_count, lo, hi } => {
                if bin_count < 2 {
                    return Err(Error::InvalidQuantizer(format!("bin_count {bin_count} < 2")));
                }
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidQuantizer(format!(
                        "range [{lo}, {hi}] is not a finite interval with lo < hi"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Quantizes one value; `index` only labels errors.
    pub fn quantize(&self, value: f64, index: usize) -> Result<f64> {
        if !value.is_finite() {
            return Err(Error::NonFinite { index, value });
        }
        match *self {
            Quantizer::ExactZeroOne => [-1.0, 0.0, 1.0]
                .into_iter()
                .find(|t| (value - t).abs() <= ZERO_ONE_TOLERANCE)
                .ok_or(Error::OutOfZeroOneSet { index, value }),
            Quantizer::UniformBins { bin_count, lo, hi } => {
                let width = (hi - lo) / bin_count as f64;
                let raw = ((value - lo) / width).floor();
                let bin = raw.clamp(0.0, (bin_count - 1) as f64);
                Ok(lo + (bin + 0.5) * width)
            }
        }
    }

    pub fn quantize_all(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        values.iter().enumerate().map(|(i, &v)| self.quantize(v, i)).collect()
    }
}

/// Joint law of `(ΔL, U)` with `U ∈ {0, 1}`. `probs[u][v]` is the mass of
/// `(support[v], u)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointLossMaskDistribution {
    support: Vec<f64>,
    probs: [Vec<f64>; 2],
    exact_uniform: bool,
}

impl JointLossMaskDistribution {
    pub fn new(support: Vec<f64>, p0: Vec<f64>, p1: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptyInput("joint support"));
        }
        if p0.len() != support.len() || p1.len() != support.len() {
            return Err(Error::InvalidDistribution("joint rows must match the support length".into()));
        }
        for (index, &value) in support.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
        }
        if let Some(i) = support.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDistribution(format!(
                "joint support not strictly increasing at index {}",
                i + 1
            )));
        }
        let flat: Vec<f64> = p0.iter().chain(&p1).copied().collect();
        check_mass(&flat)?;
        let m0: f64 = p0.iter().sum();
        let m1: f64 = p1.iter().sum();
        let exact_uniform = (m0 - 0.5).abs() <= MASS_TOLERANCE && (m1 - 0.5).abs() <= MASS_TOLERANCE;
        Ok(JointLossMaskDistribution { support, probs: [p0, p1], exact_uniform })
    }

    /// Joint with `P(U = u) = 1/2` and the given conditionals of `ΔL | U`.
    pub fn from_conditionals(support: Vec<f64>, c0: &[f64], c1: &[f64]) -> Result<Self> {
        check_mass(c0)?;
        check_mass(c1)?;
        let p0 = c0.iter().map(|p| 0.5 * p).collect();
        let p1 = c1.iter().map(|p| 0.5 * p).collect();
        Self::new(support, p0, p1)
    }

    /// Plug-in joint from samples of `ΔL` grouped by the mask value.
    ///
    /// With `exact_uniform` each stratum is normalized on its own and given
    /// mass 1/2; otherwise the mask marginal is the empirical one.
    pub fn from_stratified_samples(
        dl_given_u0: &[f64],
        dl_given_u1: &[f64],
        quantizer: &Quantizer,
        exact_uniform: bool,
    ) -> Result<Self> {
        if dl_given_u0.is_empty() {
            return Err(Error::EmptyInput("stratum U = 0"));
        }
        if dl_given_u1.is_empty() {
            return Err(Error::EmptyInput("stratum U = 1"));
        }
        let q0 = quantizer.quantize_all(dl_given_u0)?;
        let q1 = quantizer.quantize_all(dl_given_u1)?;
        let (support, counts) = merged_counts(&[&q0, &q1]);
        let (w0, w1) = if exact_uniform {
            (0.5 / q0.len() as f64, 0.5 / q1.len() as f64)
        } else {
            let total = (q0.len() + q1.len()) as f64;
            (1.0 / total, 1.0 / total)
        };
        let p0 = counts[0].iter().map(|&c| c as f64 * w0).collect();
        let p1 = counts[1].iter().map(|&c| c as f64 * w1).collect();
        let mut joint = Self::new(support, p0, p1)?;
        if exact_uniform {
            joint.exact_uniform = true;
        }
        Ok(joint)
    }

    /// Plug-in joint where one stratum may be empty. Falls back to the
    /// empirical mask marginal in that case, which makes `U` deterministic
    /// and every f-information zero.
    pub fn from_samples_allowing_empty_stratum(
        dl_given_u0: &[f64],
        dl_given_u1: &[f64],
        quantizer: &Quantizer,
    ) -> Result<Self> {
        match (dl_given_u0.is_empty(), dl_given_u1.is_empty()) {
            (false, false) => Self::from_stratified_samples(dl_given_u0, dl_given_u1, quantizer, true),
            (true, true) => Err(Error::EmptyInput("both strata")),
            (empty0, _) => {
                let present = if empty0 { dl_given_u1 } else { dl_given_u0 };
                let dist = DiscreteDistribution::from_samples(present, quantizer)?;
                let zeros = vec![0.0; dist.len()];
                let (p0, p1) = if empty0 { (zeros, dist.probs.clone()) } else { (dist.probs.clone(), zeros) };
                Self::new(dist.support, p0, p1)
            }
        }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.probs[u]
    }

    pub fn is_exact_uniform(&self) -> bool {
        self.exact_uniform
    }

    pub fn u_marginal(&self) -> [f64; 2] {
        if self.exact_uniform {
            [0.5, 0.5]
        } else {
            [self.probs[0].iter().sum(), self.probs[1].iter().sum()]
        }
    }

    pub fn dl_marginal_probs(&self) -> Vec<f64> {
        self.probs[0].iter().zip(&self.probs[1]).map(|(a, b)| a + b).collect()
    }

    pub fn dl_marginal(&self) -> DiscreteDistribution {
        DiscreteDistribution { support: self.support.clone(), probs: self.dl_marginal_probs() }
    }

    /// `P(ΔL | U = u)`, or `None` when the stratum carries no mass.
    pub fn conditional(&self, u: usize) -> Option<Vec<f64>> {
        let mass: f64 = self.probs[u].iter().sum();
        (mass > 0.0).then(|| self.probs[u].iter().map(|p| p / mass).collect())
    }

    /// Joint and product-of-marginals as flat vectors over the `2 × m` cells,
    /// row `u = 0` first.
    pub fn joint_and_product(&self) -> (Vec<f64>, Vec<f64>) {
        let marginal = self.dl_marginal_probs();
        let pu = self.u_marginal();
        let joint = self.probs[0].iter().chain(&self.probs[1]).copied().collect();
        let product = pu.iter().flat_map(|&w| marginal.iter().map(move |&m| w * m)).collect();
        (joint, product)
    }

    /// Iterates `(mass, g)` over cells, where `g = (-1)^u ΔL`.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..2).flat_map(move |u| {
            let sign = if u == 0 { 1.0 } else { -1.0 };
            self.support.iter().zip(&self.probs[u]).map(move |(&v, &p)| (p, sign * v))
        })
    }

    /// `E[G]`.
    pub fn mean_g(&self) -> f64 {
        self.cells().map(|(p, g)| p * g).sum()
    }

    /// `E[G²] = E[ΔL²]`.
    pub fn mean_g2(&self) -> f64 {
        self.cells().map(|(p, g)| p * g * g).sum()
    }

    /// Largest `|ΔL|` among atoms with positive mass.
    pub fn max_abs_dl(&self) -> f64 {
        self.support
            .iter()
            .zip(self.dl_marginal_probs())
            .filter(|(_, p)| *p > 0.0)
            .fold(0.0, |acc, (v, _)| acc.max(v.abs()))
    }

    /// Smallest `G` among cells with positive mass.
    pub fn min_g(&self) -> f64 {
        self.cells().filter(|(p, _)| *p > 0.0).fold(f64::INFINITY, |acc, (_, g)| acc.min(g))
    }
}

/// Merged sorted support of several quantized sample sets and per-set counts.
fn merged_counts(sets: &[&[f64]]) -> (Vec<f64>, Vec<Vec<usize>>) {
    let mut all: Vec<f64> = sets.iter().flat_map(|s| s.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let counts = sets
        .iter()
        .map(|set| {
            let mut c = vec![0usize; all.len()];
            for v in set.iter() {
                let i = all.binary_search_by(|s| s.total_cmp(v)).unwrap();
                c[i] += 1;
            }
            c
        })
        .collect();
    (all, counts)
}
