//! Randomized invariant suites: every check is a theorem for the sampled
//! inputs, so any failure points at a bug.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::per_joint_proof_invariants;
use crate::channels::deterministic_joint;
use crate::distributions::DiscreteDistribution;
use crate::divergences::{divergence, divergence_probs, f_information, tv_dual_check, DivergenceKind};
use crate::sampling::{coarsen, random_coarsening, random_joint, random_pair, random_realizable_joint, stream_rng};
use crate::variational::{
    check_inequality, coin_betting_all_in_bound, coin_betting_sqrt_bound, variational_lower_bound, InequalityId,
};

pub const TOLERANCE: f64 = 1e-9;
/// Upper end of the sampled `a` range for the polynomial lemmas.
pub const MAX_A: f64 = 50.0;
/// Upper end of the sampled `x` range for the coin inequality.
pub const COIN_MAX_X: f64 = 5.0;

pub const PHI_ALPHAS: [f64; 4] = [1.0, 1.25, 1.5, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub trials: usize,
    pub checks: usize,
    pub failures: usize,
    /// Largest amount by which a checked inequality was violated.
    pub max_violation: f64,
    pub first_failure: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Tally for one trial.
#[derive(Default)]
struct Tally {
    checks: usize,
    failures: usize,
    max_violation: f64,
    first_failure: Option<String>,
}

impl Tally {
    /// Records `lhs ≤ rhs + tol`.
    fn le(&mut self, label: &str, lhs: f64, rhs: f64, tol: f64) {
        self.checks += 1;
        let ok = lhs <= rhs + tol || (lhs.is_infinite() && rhs.is_infinite() && lhs == rhs);
        if !ok {
            self.fail(lhs - rhs, format!("{label}: {lhs} > {rhs}"));
        }
    }

    fn eq(&mut self, label: &str, a: f64, b: f64, tol: f64) {
        self.checks += 1;
        let ok = (a - b).abs() <= tol || a == b;
        if !ok {
            self.fail((a - b).abs(), format!("{label}: {a} != {b}"));
        }
    }

    fn truth(&mut self, label: &str, ok: bool) {
        self.checks += 1;
        if !ok {
            self.fail(0.0, format!("{label} failed"));
        }
    }

    fn fail(&mut self, violation: f64, msg: String) {
        self.failures += 1;
        self.max_violation = self.max_violation.max(violation);
        if self.first_failure.is_none() {
            self.first_failure = Some(msg);
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.checks += other.checks;
        self.failures += other.failures;
        self.max_violation = self.max_violation.max(other.max_violation);
        if self.first_failure.is_none() {
            self.first_failure = other.first_failure;
        }
        self
    }
}

/// Runs `trial` for indices `0..trials` in parallel with per-trial RNG
/// streams and merges tallies in index order.
fn run_suite(
    name: &'static str,
    seed: u64,
    tag: u64,
    trials: usize,
    trial: impl Fn(&mut rand_chacha::ChaCha8Rng, &mut Tally) + Sync,
) -> SuiteReport {
    let tallies: Vec<Tally> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, &[tag, t as u64]);
            let mut tally = Tally::default();
            trial(&mut rng, &mut tally);
            tally
        })
        .collect();
    let total = tallies.into_iter().fold(Tally::default(), Tally::merge);
    SuiteReport {
        name,
        trials,
        checks: total.checks,
        failures: total.failures,
        max_violation: total.max_violation,
        first_failure: total.first_failure,
    }
}

/// Uniform in-domain `(a, x)` for an inequality.
pub fn sample_inequality_point<R: Rng + ?Sized>(rng: &mut R, id: InequalityId) -> (f64, f64) {
    let a = match id {
        InequalityId::KlPoly | InequalityId::ShPoly | InequalityId::JsPoly => rng.random_range(id.min_a()..=MAX_A),
        _ => 1.0,
    };
    let (lo, hi) = id.x_range(a).expect("a sampled in range");
    let hi = hi.min(COIN_MAX_X);
    (a, rng.random_range(lo..=hi))
}

pub fn inequalities(seed: u64, trials: usize) -> SuiteReport {
    run_suite("inequalities", seed, 1, trials, |rng, t| {
        for id in InequalityId::ALL {
            let (a, x) = sample_inequality_point(rng, id);
            let (lhs, rhs) = id.sides(a, x);
            match check_inequality(id, a, x) {
                Ok(ok) => {
                    t.checks += 1;
                    if !ok {
                        t.fail(rhs - lhs, format!("{id} at a={a}, x={x}: {lhs} < {rhs}"));
                    }
                }
                Err(e) => t.truth(&e.to_string(), false),
            }
        }
    })
}

/// Ordering and identity checks on one pair.
fn divergence_relations(p: &DiscreteDistribution, q: &DiscreteDistribution, t: &mut Tally) {
    let d = |k| divergence(p, q, k);
    let kl = d(DivergenceKind::Kl);
    let chi2 = d(DivergenceKind::Chi2);
    let sh = d(DivergenceKind::SquaredHellinger);
    let tv = d(DivergenceKind::TotalVariation);
    let js = d(DivergenceKind::JensenShannon);
    let jeffreys = d(DivergenceKind::Jeffreys);
    for (k, v) in [("kl", kl), ("chi2", chi2), ("sh", sh), ("tv", tv), ("js", js), ("jeffreys", jeffreys)] {
        t.le(&format!("{k} >= 0"), 0.0, v, 0.0);
    }
    t.le("kl <= chi2", kl, chi2, TOLERANCE);
    t.le("sh <= 2 tv", sh, 2.0 * tv, TOLERANCE);
    t.le("tv <= sqrt(kl/2)", tv, (kl / 2.0).sqrt(), TOLERANCE);
    t.le("js <= 2 ln 2", js, 2.0 * std::f64::consts::LN_2, TOLERANCE);
    t.le("js <= jeffreys/2", js, 0.5 * jeffreys, TOLERANCE);
    t.eq("phi_1 = 2 tv", d(DivergenceKind::PhiAlpha(1.0)), 2.0 * tv, TOLERANCE);
    t.eq("phi_2 = chi2", d(DivergenceKind::PhiAlpha(2.0)), chi2, TOLERANCE);
    t.eq("tv dual", tv_dual_check(p, q), tv, 1e-12);
}

pub fn divergences(seed: u64, trials: usize) -> SuiteReport {
    run_suite("divergences", seed, 2, trials, |rng, t| {
        let (p, q) = random_pair(rng);
        divergence_relations(&p, &q, t);
        divergence_relations(&p, &p, t);
        for kind in DivergenceKind::FIXED {
            t.eq(&format!("{kind}(p, p) = 0"), divergence(&p, &p, kind), 0.0, TOLERANCE);
        }
    })
}

pub fn data_processing(seed: u64, trials: usize) -> SuiteReport {
    run_suite("data_processing", seed, 3, trials, |rng, t| {
        let (p, q) = random_pair(rng);
        let map = random_coarsening(rng, p.len());
        let (cp, cq) = (coarsen(p.probs(), &map), coarsen(q.probs(), &map));
        let kinds = DivergenceKind::FIXED.into_iter().chain(PHI_ALPHAS.map(DivergenceKind::PhiAlpha));
        for kind in kinds {
            let fine = divergence_probs(p.probs(), q.probs(), kind);
            let coarse = divergence_probs(&cp, &cq, kind);
            t.le(&format!("dpi {kind}"), coarse, fine, TOLERANCE);
        }
    })
}

pub fn variational(seed: u64, trials: usize) -> SuiteReport {
    let mut report = run_suite("variational", seed, 4, trials, |rng, t| {
        let joint = random_joint(rng);
        for kind in DivergenceKind::CONJUGATE {
            match variational_lower_bound(&joint, kind) {
                Ok(r) => {
                    t.le(&format!("{kind} lower bound"), r.value, f_information(&joint, kind), TOLERANCE);
                    t.le(&format!("{kind} lower bound >= 0"), 0.0, r.value, 0.0);
                }
                Err(e) => t.truth(&format!("{kind} optimizer: {e}"), false),
            }
        }
    });
    let det = variational_lower_bound(&deterministic_joint(), DivergenceKind::Kl).map(|r| r.value).unwrap_or(0.0);
    report.checks += 1;
    if det < std::f64::consts::LN_2 - 1e-6 {
        report.failures += 1;
        report.first_failure.get_or_insert(format!("deterministic channel KL lower bound {det} < ln 2 - 1e-6"));
    }
    report
}

pub fn proof_invariants(seed: u64, trials: usize) -> SuiteReport {
    run_suite("proof_invariants", seed, 5, trials, |rng, t| {
        let joint = if rng.random_bool(0.2) { random_realizable_joint(rng) } else { random_joint(rng) };
        let inv = per_joint_proof_invariants(&joint);
        t.truth("kl key inequality", inv.kl_key);
        t.truth("sh key inequality", inv.sh_key);
        t.truth("js key inequality", inv.js_key);
        for (c, ok) in &inv.truncated_kl {
            t.truth(&format!("truncated kl at C={c}"), *ok);
        }
        if let Some((log2, four)) = inv.realizable {
            t.truth("realizable log2 form", log2);
            t.truth("realizable 4I form", four);
        }
    })
}

pub fn capacity(seed: u64, trials: usize) -> SuiteReport {
    run_suite("capacity", seed, 6, trials, |rng, t| {
        let joint = random_joint(rng);
        t.le("I_kl <= ln 2", f_information(&joint, DivergenceKind::Kl), std::f64::consts::LN_2, TOLERANCE);
        t.le("I_tv <= 1/2", f_information(&joint, DivergenceKind::TotalVariation), 0.5, TOLERANCE);
        t.le(
            "I_js <= 2 ln 2",
            f_information(&joint, DivergenceKind::JensenShannon),
            2.0 * std::f64::consts::LN_2,
            TOLERANCE,
        );
        for a in PHI_ALPHAS {
            let v = f_information(&joint, DivergenceKind::PhiAlpha(a));
            let cap = 1.0 + 2f64.powf(a - 1.0);
            t.truth(&format!("I_phi_{a} < {cap}"), v < cap);
        }
    })
}

pub fn coin_betting(seed: u64, trials: usize) -> SuiteReport {
    run_suite("coin_betting", seed, 7, trials, |rng, t| {
        let joint = random_joint(rng);
        let i = f_information(&joint, DivergenceKind::Kl);
        t.le("E[G] <= 2 sqrt(I)", joint.mean_g(), coin_betting_sqrt_bound(i), TOLERANCE);
        let r = random_realizable_joint(rng);
        let ir = f_information(&r, DivergenceKind::Kl);
        t.le("E[G] <= 2 I when G >= 0", r.mean_g(), coin_betting_all_in_bound(ir), TOLERANCE);
    })
}

/// All suites. Trials are scaled per suite by cost, with at least one each.
pub fn run_all(seed: u64, trials: usize) -> Vec<SuiteReport> {
    let scaled = |div: usize| trials.div_ceil(div).max(1);
    vec![
        inequalities(seed, trials),
        divergences(seed, trials),
        data_processing(seed, scaled(2)),
        variational(seed, scaled(10)),
        proof_invariants(seed, trials),
        capacity(seed, trials),
        coin_betting(seed, scaled(5)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes() {
        for report in run_all(11, 300) {
            assert!(report.passed(), "{report:?}");
            assert!(report.checks > 0);
        }
    }

    #[test]
    fn sampled_points_are_in_domain() {
        let mut rng = stream_rng(1, &[]);
        for id in InequalityId::ALL {
            for _ in 0..1000 {
                let (a, x) = sample_inequality_point(&mut rng, id);
                assert!(check_inequality(id, a, x).is_ok(), "{id} {a} {x}");
            }
        }
    }
}
