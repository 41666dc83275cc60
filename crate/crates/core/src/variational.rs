//! Variational lower bounds on f-information, the scalar inequality lemmas
//! behind the bound proofs, and fixed-fraction coin-betting log-wealth.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::JointLossMaskDistribution;
use crate::divergences::{ConjugatePair, DivergenceKind};
use crate::error::{Error, Result};

/// Margin kept from open ends of the admissible `t` interval.
pub const CLAMP_EPSILON: f64 = 1e-9;
pub const COARSE_GRID_POINTS: usize = 2049;
pub const REFINE_WIDTH: f64 = 1e-12;
const MAX_REFINE_STEPS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariationalResult {
    pub value: f64,
    pub argmax_t: f64,
    pub evaluations: usize,
    pub clamp_epsilon: f64,
}

impl VariationalResult {
    fn zero() -> Self {
        VariationalResult { value: 0.0, argmax_t: 0.0, evaluations: 0, clamp_epsilon: CLAMP_EPSILON }
    }
}

/// `sup_t E[φ*⁻¹(t·G)]` over the joint of `(ΔL, U)`.
pub fn variational_lower_bound(joint: &JointLossMaskDistribution, kind: DivergenceKind) -> Result<VariationalResult> {
    maximize(joint, kind, f64::INFINITY)
}

/// As [`variational_lower_bound`] with the integrand restricted to `|ΔL| ≤ c`.
pub fn truncated_lower_bound(
    joint: &JointLossMaskDistribution,
    kind: DivergenceKind,
    c: f64,
) -> Result<VariationalResult> {
    if !(c >= 0.0) {
        return Err(Error::Precondition(format!("truncation level must be >= 0, got {c}")));
    }
    maximize(joint, kind, c)
}

/// Largest admissible `|t|` when `|G| ≤ b`.
pub fn admissible_t(kind: DivergenceKind, b: f64) -> Result<f64> {
    let reach = match kind {
        DivergenceKind::Kl | DivergenceKind::SquaredHellinger => 1.0 - CLAMP_EPSILON,
        DivergenceKind::Chi2 => 1.0,
        DivergenceKind::JensenShannon => std::f64::consts::LN_2 - CLAMP_EPSILON,
        _ => return Err(Error::NoConjugatePair { kind }),
    };
    Ok(reach / b)
}

fn maximize(joint: &JointLossMaskDistribution, kind: DivergenceKind, c: f64) -> Result<VariationalResult> {
    let pair = kind.conjugate().ok_or(Error::NoConjugatePair { kind })?;
    let cells: Vec<(f64, f64)> = joint.cells().filter(|&(m, g)| m > 0.0 && g.abs() <= c).collect();
    if let Some(&(_, g)) = cells.iter().find(|(_, g)| !g.is_finite()) {
        return Err(Error::NonFinite { index: 0, value: g });
    }
    let b = cells.iter().fold(0.0_f64, |acc, &(_, g)| acc.max(g.abs()));
    if b == 0.0 {
        return Ok(VariationalResult::zero());
    }
    let limit = admissible_t(kind, b)?;
    let objective = Objective { pair, cells: &cells };
    let (argmax_t, value, evaluations) = concave_max(|t| objective.eval(t), -limit, limit);
    Ok(VariationalResult { value, argmax_t, evaluations, clamp_epsilon: CLAMP_EPSILON })
}

struct Objective<'a> {
    pair: ConjugatePair,
    cells: &'a [(f64, f64)],
}

impl Objective<'_> {
    fn eval(&self, t: f64) -> f64 {
        let lower = self.pair.inverse_domain().lower;
        self.cells.iter().map(|&(m, g)| m * self.pair.phi_star_inverse((t * g).max(lower))).sum()
    }
}

/// Coarse grid then golden-section refinement around the best grid point.
/// Returns `(argmax, max, evaluations)`.
pub fn concave_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64, usize) {
    let steps = COARSE_GRID_POINTS - 1;
    let at = |i: usize| if i == steps { hi } else { lo + (hi - lo) * (i as f64) / (steps as f64) };
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..COARSE_GRID_POINTS {
        let v = f(at(i));
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut evaluations = COARSE_GRID_POINTS;
    let mut best_t = at(best_i);

    let (mut a, mut b) = (at(best_i.saturating_sub(1)), at((best_i + 1).min(steps)));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    evaluations += 2;
    for _ in 0..MAX_REFINE_STEPS {
        if b - a <= REFINE_WIDTH {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
        evaluations += 1;
    }
    for (t, v) in [(x1, f1), (x2, f2)] {
        if v > best {
            best = v;
            best_t = t;
        }
    }
    (best_t, best, evaluations)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityId {
    /// `ln(1+x) ≥ x - a x²`
    KlPoly,
    /// `x/(1+x) ≥ x - a x²`
    ShPoly,
    /// `ln(2 - e^{-x}) ≥ x - a x²`
    JsPoly,
    /// `ln(1+x) ≥ x ln 2`
    Log2Linear,
    /// `ln(1+x) ≥ x - x²`
    CoinPoly,
}

impl InequalityId {
    pub const ALL: [InequalityId; 5] = [
        InequalityId::KlPoly,
        InequalityId::ShPoly,
        InequalityId::JsPoly,
        InequalityId::Log2Linear,
        InequalityId::CoinPoly,
    ];

    pub const COIN_LOWER: f64 = -0.68;

    /// Admissible `x` interval for a given `a`, or `None` when `a` itself is
    /// out of range. The coin inequality has no upper end.
    pub fn x_range(self, a: f64) -> Option<(f64, f64)> {
        match self {
            InequalityId::KlPoly if a >= 0.5 => Some((1.0 / (2.0 * a) - 1.0, 1.0 - 1.0 / (2.0 * a))),
            InequalityId::ShPoly if a >= 1.0 => Some((1.0 / a - 1.0, 1.0 - 1.0 / a)),
            InequalityId::JsPoly if a >= 4.0 => Some((-0.5, 0.5)),
            InequalityId::Log2Linear => Some((0.0, 1.0)),
            InequalityId::CoinPoly => Some((Self::COIN_LOWER, f64::INFINITY)),
            _ => None,
        }
    }

    /// Smallest admissible `a` (the lemma families only).
    pub fn min_a(self) -> f64 {
        match self {
            InequalityId::KlPoly => 0.5,
            InequalityId::ShPoly => 1.0,
            InequalityId::JsPoly => 4.0,
            InequalityId::Log2Linear | InequalityId::CoinPoly => 1.0,
        }
    }

    /// `(lhs, rhs)` without domain checks.
    pub fn sides(self, a: f64, x: f64) -> (f64, f64) {
        match self {
            InequalityId::KlPoly => (x.ln_1p(), x - a * x * x),
            InequalityId::ShPoly => (x / (1.0 + x), x - a * x * x),
            InequalityId::JsPoly => ((-(-x).exp_m1()).ln_1p(), x - a * x * x),
            InequalityId::Log2Linear => (x.ln_1p(), x * std::f64::consts::LN_2),
            InequalityId::CoinPoly => (x.ln_1p(), x - x * x),
        }
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InequalityId::KlPoly => "kl_poly",
            InequalityId::ShPoly => "sh_poly",
            InequalityId::JsPoly => "js_poly",
            InequalityId::Log2Linear => "log2_linear",
            InequalityId::CoinPoly => "coin_poly",
        })
    }
}

impl FromStr for InequalityId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InequalityId::ALL
            .into_iter()
            .find(|id| id.to_string() == s)
            .ok_or_else(|| Error::InvalidKind(format!("unknown inequality `{s}`")))
    }
}

pub const INEQUALITY_TOLERANCE: f64 = 1e-12;

/// Whether `lhs ≥ rhs - 1e-12` holds at an in-domain `(a, x)`.
pub fn check_inequality(id: InequalityId, a: f64, x: f64) -> Result<bool> {
    let in_domain = a.is_finite() && x.is_finite() && id.x_range(a).is_some_and(|(lo, hi)| x >= lo && x <= hi);
    if !in_domain {
        return Err(Error::Precondition(format!("({a}, {x}) outside the domain of {id}")));
    }
    let (lhs, rhs) = id.sides(a, x);
    Ok(lhs >= rhs - INEQUALITY_TOLERANCE)
}

/// `Σ ln(1 + t·s_i·o_i)` for a fixed betting fraction `t`.
pub fn coin_betting_log_wealth(outcomes: &[f64], signs: &[i8], t: f64) -> Result<f64> {
    if outcomes.len() != signs.len() {
        return Err(Error::Precondition(format!("{} outcomes but {} signs", outcomes.len(), signs.len())));
    }
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Precondition(format!("betting fraction must lie in [0, 1), got {t}")));
    }
    let mut wealth = 0.0;
    for (i, (&o, &s)) in outcomes.iter().zip(signs).enumerate() {
        if !o.is_finite() {
            return Err(Error::NonFinite { index: i, value: o });
        }
        if s != 1 && s != -1 {
            return Err(Error::Precondition(format!("sign at round {i} must be +1 or -1, got {s}")));
        }
        let x = t * f64::from(s) * o;
        if x <= -1.0 {
            return Err(Error::Precondition(format!("wealth factor {} at round {i} is not positive", 1.0 + x)));
        }
        wealth += x.ln_1p();
    }
    Ok(wealth)
}

/// Expected log-wealth `E ln(1 + t·G)` of the informed bettor.
pub fn expected_log_wealth(joint: &JointLossMaskDistribution, t: f64) -> Result<f64> {
    let mut w = 0.0;
    for (m, g) in joint.cells().filter(|&(m, _)| m > 0.0) {
        let x = t * g;
        if x <= -1.0 {
            return Err(Error::Precondition(format!("wealth factor {} is not positive", 1.0 + x)));
        }
        w += m * x.ln_1p();
    }
    Ok(w)
}

/// `2·√I_KL`, the square-root bound on `E[G]` from the betting argument.
pub fn coin_betting_sqrt_bound(i_kl: f64) -> f64 {
    2.0 * i_kl.max(0.0).sqrt()
}

/// `2·I_KL`, the all-in bound on `E[G]` when `G ≥ 0`.
pub fn coin_betting_all_in_bound(i_kl: f64) -> f64 {
    2.0 * i_kl.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences::f_information;

    fn correlated() -> JointLossMaskDistribution {
        JointLossMaskDistribution::new(vec![-1.0, 1.0], vec![0.5, 0.0], vec![0.0, 0.5]).unwrap()
    }

    #[test]
    fn independent_joint_is_zero() {
        let joint =
            JointLossMaskDistribution::new(vec![-1.0, 0.0, 1.0], vec![0.1, 0.25, 0.15], vec![0.1, 0.25, 0.15]).unwrap();
        for kind in DivergenceKind::CONJUGATE {
            let r = variational_lower_bound(&joint, kind).unwrap();
            assert!(r.value.abs() < 1e-15, "{kind}: {}", r.value);
            assert!(r.argmax_t.abs() < 1e-9, "{kind}: {}", r.argmax_t);
        }
    }

    #[test]
    fn correlated_kl_reaches_ln2() {
        let joint = correlated();
        let r = variational_lower_bound(&joint, DivergenceKind::Kl).unwrap();
        let i = f_information(&joint, DivergenceKind::Kl);
        assert!((i - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(r.value <= i + 1e-9);
        assert!(r.value >= std::f64::consts::LN_2 - 1e-6);
        assert!((r.value - (2.0 - 1e-9f64).ln()).abs() < 1e-9);
        assert!((r.argmax_t + (1.0 - CLAMP_EPSILON)).abs() < 1e-9);
    }

    #[test]
    fn truncation_examples() {
        let joint = correlated();
        for kind in DivergenceKind::CONJUGATE {
            assert_eq!(truncated_lower_bound(&joint, kind, 0.5).unwrap().value, 0.0);
            assert_eq!(truncated_lower_bound(&joint, kind, 0.0).unwrap().value, 0.0);
            let full = variational_lower_bound(&joint, kind).unwrap().value;
            let t = truncated_lower_bound(&joint, kind, 3.0).unwrap().value;
            assert!((full - t).abs() <= 1e-12);
        }
        assert!(truncated_lower_bound(&joint, DivergenceKind::Kl, -0.1).is_err());
        assert!(matches!(
            variational_lower_bound(&joint, DivergenceKind::TotalVariation),
            Err(Error::NoConjugatePair { .. })
        ));
    }

    #[test]
    fn inequality_examples() {
        assert!(check_inequality(InequalityId::KlPoly, 0.5, 0.0).unwrap());
        assert!(check_inequality(InequalityId::ShPoly, 1.0, 0.0).unwrap());
        assert!(check_inequality(InequalityId::JsPoly, 4.0, 0.5).unwrap());
        let (lhs, rhs) = InequalityId::JsPoly.sides(4.0, 0.5);
        assert!((lhs - 0.3317966).abs() < 1e-7);
        assert_eq!(rhs, -0.5);
        assert!(check_inequality(InequalityId::CoinPoly, 1.0, -0.68).unwrap());
        assert!(check_inequality(InequalityId::Log2Linear, 1.0, 1.0).unwrap());
    }

    #[test]
    fn inequality_domain_errors() {
        assert!(matches!(check_inequality(InequalityId::KlPoly, 0.4, 0.0), Err(Error::Precondition(_))));
        assert!(matches!(check_inequality(InequalityId::ShPoly, 2.0, 0.6), Err(Error::Precondition(_))));
        assert!(matches!(check_inequality(InequalityId::JsPoly, 4.0, 0.51), Err(Error::Precondition(_))));
        assert!(matches!(check_inequality(InequalityId::Log2Linear, 1.0, 1.5), Err(Error::Precondition(_))));
        assert!(matches!(check_inequality(InequalityId::CoinPoly, 1.0, -0.7), Err(Error::Precondition(_))));
    }

    #[test]
    fn log_wealth_examples() {
        assert_eq!(coin_betting_log_wealth(&[0.3, -1.0], &[1, -1], 0.0).unwrap(), 0.0);
        let w = coin_betting_log_wealth(&[1.0, 1.0], &[1, 1], 0.5).unwrap();
        assert!((w - 0.8109302).abs() < 1e-7);
        let w = coin_betting_log_wealth(&[1.0, 1.0], &[1, -1], 0.5).unwrap();
        assert!((w + 0.2876821).abs() < 1e-7);
        assert!(coin_betting_log_wealth(&[1.0], &[1, 1], 0.5).is_err());
        assert!(coin_betting_log_wealth(&[1.0], &[1], 1.0).is_err());
        assert!(coin_betting_log_wealth(&[2.0], &[-1], 0.5).is_err());
    }

    #[test]
    fn golden_section_finds_interior_max() {
        let (t, v, _) = concave_max(|x| -(x - 0.123_456_789).powi(2), -1.0, 1.0);
        assert!((t - 0.123_456_789).abs() < 1e-7);
        assert!(v <= 0.0 && v > -1e-14);
    }
}
