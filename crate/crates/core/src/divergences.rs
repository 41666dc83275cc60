//! Closed-form f-divergences between finite distributions, in nats.
//!
//! `+∞` is returned as `f64::INFINITY` whenever `p` charges an atom that `q`
//! does not and the divergence is not bounded there. Total variation uses
//! the `½ Σ|p - q|` convention, so `PhiAlpha(1)` is exactly twice it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::{DiscreteDistribution, JointLossMaskDistribution};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum DivergenceKind {
    Kl,
    Chi2,
    SquaredHellinger,
    /// `KL(p‖m) + KL(q‖m)` with `m = (p + q)/2`, twice the usual JSD.
    JensenShannon,
    TotalVariation,
    Jeffreys,
    /// Generated by `|x - 1|^α`, `α ≥ 1`.
    PhiAlpha(f64),
}

impl DivergenceKind {
    /// The six parameter-free kinds.
    pub const FIXED: [DivergenceKind; 6] = [
        DivergenceKind::Kl,
        DivergenceKind::Chi2,
        DivergenceKind::SquaredHellinger,
        DivergenceKind::JensenShannon,
        DivergenceKind::TotalVariation,
        DivergenceKind::Jeffreys,
    ];

    /// Kinds with a conjugate pair usable in the variational lower bound.
    pub const CONJUGATE: [DivergenceKind; 4] =
        [DivergenceKind::Kl, DivergenceKind::Chi2, DivergenceKind::SquaredHellinger, DivergenceKind::JensenShannon];

    pub fn phi_alpha(alpha: f64) -> Result<Self> {
        let kind = DivergenceKind::PhiAlpha(alpha);
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DivergenceKind::PhiAlpha(a) if !(a.is_finite() && a >= 1.0) => {
                Err(Error::InvalidKind(format!("alpha must be finite and >= 1, got {a}")))
            }
            _ => Ok(()),
        }
    }

    pub fn conjugate(self) -> Option<ConjugatePair> {
        match self {
            DivergenceKind::Kl
            | DivergenceKind::Chi2
            | DivergenceKind::SquaredHellinger
            | DivergenceKind::JensenShannon => Some(ConjugatePair { kind: self }),
            _ => None,
        }
    }
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DivergenceKind::Kl => f.write_str("kl"),
            DivergenceKind::Chi2 => f.write_str("chi2"),
            DivergenceKind::SquaredHellinger => f.write_str("sh"),
            DivergenceKind::JensenShannon => f.write_str("js"),
            DivergenceKind::TotalVariation => f.write_str("tv"),
            DivergenceKind::Jeffreys => f.write_str("jeffreys"),
            DivergenceKind::PhiAlpha(a) => write!(f, "phi_alpha:{a}"),
        }
    }
}

impl FromStr for DivergenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.trim().to_ascii_lowercase().as_str() {
            "kl" => DivergenceKind::Kl,
            "chi2" => DivergenceKind::Chi2,
            "sh" | "squared_hellinger" | "hellinger" => DivergenceKind::SquaredHellinger,
            "js" | "jensen_shannon" => DivergenceKind::JensenShannon,
            "tv" | "total_variation" => DivergenceKind::TotalVariation,
            "jeffreys" => DivergenceKind::Jeffreys,
            other => {
                let alpha = other
                    .strip_prefix("phi_alpha:")
                    .or_else(|| other.strip_prefix("phi:"))
                    .ok_or_else(|| Error::InvalidKind(format!("unknown divergence `{s}`")))?;
                let alpha: f64 = alpha.parse().map_err(|_| Error::InvalidKind(format!("bad alpha in `{s}`")))?;
                DivergenceKind::phi_alpha(alpha)?
            }
        };
        Ok(kind)
    }
}

impl From<DivergenceKind> for String {
    fn from(kind: DivergenceKind) -> String {
        kind.to_string()
    }
}

impl TryFrom<String> for DivergenceKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// The generator `φ` of each divergence, for `x ≥ 0`.
pub fn phi(kind: DivergenceKind, x: f64) -> f64 {
    match kind {
        DivergenceKind::Kl => xlogx(x) + x - 1.0,
        DivergenceKind::Chi2 => (x - 1.0).powi(2),
        DivergenceKind::SquaredHellinger => (x.sqrt() - 1.0).powi(2),
        DivergenceKind::JensenShannon => xlogx(x) - (1.0 + x) * ((1.0 + x).ln() - std::f64::consts::LN_2),
        DivergenceKind::TotalVariation => 0.5 * (x - 1.0).abs(),
        DivergenceKind::Jeffreys => (x - 1.0) * x.ln(),
        DivergenceKind::PhiAlpha(a) => (x - 1.0).abs().powf(a),
    }
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

fn kl_term(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else if q == 0.0 {
        f64::INFINITY
    } else {
        p * (p / q).ln()
    }
}

/// Divergence between two probability vectors on a common support.
pub fn divergence_probs(p: &[f64], q: &[f64], kind: DivergenceKind) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let pairs = p.iter().copied().zip(q.iter().copied());
    match kind {
        DivergenceKind::Kl => pairs.map(|(a, b)| kl_term(a, b)).sum(),
        DivergenceKind::Chi2 => pairs
            .map(|(a, b)| match (a, b) {
                (_, b) if b > 0.0 => (a - b).powi(2) / b,
                (0.0, _) => 0.0,
                _ => f64::INFINITY,
            })
            .sum(),
        DivergenceKind::SquaredHellinger => pairs.map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum(),
        DivergenceKind::JensenShannon => pairs
            .map(|(a, b)| {
                let m = 0.5 * (a + b);
                kl_term(a, m) + kl_term(b, m)
            })
            .sum(),
        DivergenceKind::TotalVariation => 0.5 * pairs.map(|(a, b)| (a - b).abs()).sum::<f64>(),
        DivergenceKind::Jeffreys => pairs.map(|(a, b)| kl_term(a, b) + kl_term(b, a)).sum(),
        DivergenceKind::PhiAlpha(alpha) => pairs
            .map(|(a, b)| {
                if b > 0.0 {
                    b * (a / b - 1.0).abs().powf(alpha)
                } else if a == 0.0 {
                    0.0
                } else if alpha == 1.0 {
                    a
                } else {
                    f64::INFINITY
                }
            })
            .sum(),
    }
}

/// `D_kind(p ‖ q)` after merging supports.
pub fn divergence(p: &DiscreteDistribution, q: &DiscreteDistribution, kind: DivergenceKind) -> f64 {
    let aligned = p.align(q);
    divergence_probs(&aligned.p, &aligned.q, kind)
}

/// f-information of the joint: the divergence between it and the product of
/// its marginals.
pub fn f_information(joint: &JointLossMaskDistribution, kind: DivergenceKind) -> f64 {
    let (p, q) = joint.joint_and_product();
    divergence_probs(&p, &q, kind)
}

/// `½ |E_p f* - E_q f*|` with `f* = sign(p - q)`, the maximizer of the dual
/// form of total variation at `M = 1`.
pub fn tv_dual_check(p: &DiscreteDistribution, q: &DiscreteDistribution) -> f64 {
    let aligned = p.align(q);
    let (ep, eq) = aligned.p.iter().zip(&aligned.q).fold((0.0, 0.0), |(ep, eq), (&a, &b)| {
        let f = if a > b {
            1.0
        } else if a < b {
            -1.0
        } else {
            0.0
        };
        (ep + a * f, eq + b * f)
    });
    0.5 * (ep - eq).abs()
}

/// Left end of the domain of `φ*⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseDomain {
    pub lower: f64,
    pub closed: bool,
}

impl InverseDomain {
    pub fn contains(&self, z: f64) -> bool {
        z.is_finite() && (z > self.lower || (self.closed && z == self.lower))
    }
}

/// Convex conjugate `φ*` of a divergence generator and its inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugatePair {
    kind: DivergenceKind,
}

impl ConjugatePair {
    pub fn kind(&self) -> DivergenceKind {
        self.kind
    }

    pub fn phi_star(&self, y: f64) -> f64 {
        match self.kind {
            DivergenceKind::Kl => y.exp_m1(),
            DivergenceKind::Chi2 => y * y / 4.0 + y,
            DivergenceKind::SquaredHellinger => y / (1.0 - y),
            DivergenceKind::JensenShannon => -(-y.exp_m1()).ln_1p(),
            _ => unreachable!("only conjugate kinds are constructed"),
        }
    }

    /// `φ*⁻¹(z)` without a domain check.
    pub fn phi_star_inverse(&self, z: f64) -> f64 {
        match self.kind {
            DivergenceKind::Kl => z.ln_1p(),
            DivergenceKind::Chi2 => 2.0 * ((z + 1.0).sqrt() - 1.0),
            DivergenceKind::SquaredHellinger => z / (1.0 + z),
            // ln(2 - e^{-z}) = ln(1 + (1 - e^{-z}))
            DivergenceKind::JensenShannon => (-(-z).exp_m1()).ln_1p(),
            _ => unreachable!("only conjugate kinds are constructed"),
        }
    }

    pub fn inverse_domain(&self) -> InverseDomain {
        match self.kind {
            DivergenceKind::Kl | DivergenceKind::SquaredHellinger => InverseDomain { lower: -1.0, closed: false },
            DivergenceKind::Chi2 => InverseDomain { lower: -1.0, closed: true },
            DivergenceKind::JensenShannon => InverseDomain { lower: -std::f64::consts::LN_2, closed: false },
            _ => unreachable!("only conjugate kinds are constructed"),
        }
    }
}

pub fn conjugate_inverse(kind: DivergenceKind, z: f64) -> Result<f64> {
    let pair = kind.conjugate().ok_or(Error::NoConjugatePair { kind })?;
    if !pair.inverse_domain().contains(z) {
        return Err(Error::OutsideDomain { kind, z });
    }
    Ok(pair.phi_star_inverse(z))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two(p: [f64; 2]) -> DiscreteDistribution {
        DiscreteDistribution::new(vec![0.0, 1.0], p.to_vec()).unwrap()
    }

    #[test]
    fn identical_distributions_are_zero() {
        let u = DiscreteDistribution::new(vec![-1.0, 0.0, 1.0], vec![1.0 / 3.0; 3]).unwrap();
        for kind in DivergenceKind::FIXED.into_iter().chain([DivergenceKind::PhiAlpha(1.5)]) {
            assert_eq!(divergence(&u, &u, kind), 0.0, "{kind}");
        }
    }

    #[test]
    fn infinity_marker() {
        let p = two([0.5, 0.5]);
        let q = DiscreteDistribution::point(0.0).unwrap();
        assert_eq!(divergence(&p, &q, DivergenceKind::Kl), f64::INFINITY);
        assert_eq!(divergence(&p, &q, DivergenceKind::Chi2), f64::INFINITY);
        assert_eq!(divergence(&p, &q, DivergenceKind::Jeffreys), f64::INFINITY);
        assert_eq!(divergence(&p, &q, DivergenceKind::PhiAlpha(1.5)), f64::INFINITY);
        assert_eq!(divergence(&p, &q, DivergenceKind::PhiAlpha(1.0)), 1.0);
        assert!(divergence(&p, &q, DivergenceKind::JensenShannon).is_finite());
        assert_eq!(divergence(&q, &p, DivergenceKind::Kl), std::f64::consts::LN_2);
    }

    #[test]
    fn conjugate_examples() {
        assert_eq!(conjugate_inverse(DivergenceKind::Kl, 0.0).unwrap(), 0.0);
        assert_eq!(conjugate_inverse(DivergenceKind::SquaredHellinger, 1.0).unwrap(), 0.5);
        assert_eq!(conjugate_inverse(DivergenceKind::JensenShannon, 0.0).unwrap(), 0.0);
        assert_eq!(conjugate_inverse(DivergenceKind::Chi2, -1.0).unwrap(), -2.0);
    }

    #[test]
    fn conjugate_errors() {
        assert!(matches!(conjugate_inverse(DivergenceKind::Kl, -1.0), Err(Error::OutsideDomain { .. })));
        assert!(matches!(conjugate_inverse(DivergenceKind::JensenShannon, -0.7), Err(Error::OutsideDomain { .. })));
        assert!(matches!(conjugate_inverse(DivergenceKind::Chi2, -1.0 - 1e-12), Err(Error::OutsideDomain { .. })));
        assert!(matches!(conjugate_inverse(DivergenceKind::TotalVariation, 0.0), Err(Error::NoConjugatePair { .. })));
        assert!(matches!(conjugate_inverse(DivergenceKind::PhiAlpha(2.0), 0.0), Err(Error::NoConjugatePair { .. })));
    }

    #[test]
    fn tv_dual_examples() {
        assert_eq!(tv_dual_check(&two([0.5, 0.5]), &two([0.5, 0.5])), 0.0);
        assert_eq!(tv_dual_check(&two([0.75, 0.25]), &two([0.5, 0.5])), 0.25);
        assert_eq!(tv_dual_check(&two([1.0, 0.0]), &two([0.0, 1.0])), 1.0);
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in DivergenceKind::FIXED.into_iter().chain([DivergenceKind::PhiAlpha(1.25)]) {
            assert_eq!(kind.to_string().parse::<DivergenceKind>().unwrap(), kind);
        }
        assert!("phi_alpha:0.5".parse::<DivergenceKind>().is_err());
        assert!("renyi".parse::<DivergenceKind>().is_err());
        assert_eq!(serde_json::to_string(&DivergenceKind::PhiAlpha(2.0)).unwrap(), "\"phi_alpha:2\"");
    }
}
