//! Worked examples checked against hand computations and independent
//! summation oracles.

use fgen_core::bounds::{evaluate_report, BoundName, BoundSelection, BoundSettings};
use fgen_core::channels::{
    constant_tensor, deterministic_joint, interpolating_bernoulli_joint, interpolating_bernoulli_tensor,
};
use fgen_core::distributions::{DiscreteDistribution, Quantizer};
use fgen_core::divergences::{divergence, phi, DivergenceKind};
use fgen_core::statistics::{compute_statistics, StatisticsConfig};
use fgen_core::supersample::Mode;

const LN2: f64 = std::f64::consts::LN_2;

fn two(a: f64, b: f64) -> DiscreteDistribution {
    DiscreteDistribution::new(vec![0.0, 1.0], vec![a, b]).unwrap()
}

/// `Σ q φ(p/q)` over atoms with `q > 0`.
fn generator_oracle(p: &[f64], q: &[f64], kind: DivergenceKind) -> f64 {
    p.iter().zip(q).map(|(&a, &b)| b * phi(kind, a / b)).sum()
}

#[test]
fn two_atom_divergences() {
    let p = two(0.75, 0.25);
    let q = two(0.5, 0.5);
    let hand = [
        (DivergenceKind::Kl, 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln(), 0.1308120),
        (DivergenceKind::Chi2, 0.0625 / 0.5 * 2.0, 0.25),
        (
            DivergenceKind::SquaredHellinger,
            (0.75f64.sqrt() - 0.5f64.sqrt()).powi(2) + (0.25f64.sqrt() - 0.5f64.sqrt()).powi(2),
            0.0681483,
        ),
        (DivergenceKind::TotalVariation, 0.25, 0.25),
        (DivergenceKind::Jeffreys, 0.25 * 1.5f64.ln() - 0.25 * 0.5f64.ln(), 0.2746531),
        (DivergenceKind::PhiAlpha(1.0), 0.5, 0.5),
    ];
    for (kind, exact, listed) in hand {
        let d = divergence(&p, &q, kind);
        assert!((d - exact).abs() < 1e-14, "{kind}: {d} vs {exact}");
        assert!((d - listed).abs() < 5e-8, "{kind}: {d} vs {listed}");
    }
    // m = (0.625, 0.375)
    let js = 0.75 * (0.75f64 / 0.625).ln()
        + 0.25 * (0.25f64 / 0.375).ln()
        + 0.5 * (0.5f64 / 0.625).ln()
        + 0.5 * (0.5f64 / 0.375).ln();
    let d = divergence(&p, &q, DivergenceKind::JensenShannon);
    assert!((d - js).abs() < 1e-14);
    assert!((d - 0.0676442).abs() < 5e-8);
}

#[test]
fn generator_form_agrees_with_closed_forms() {
    let p = [0.1, 0.2, 0.3, 0.4];
    let q = [0.25, 0.4, 0.05, 0.3];
    let pd = DiscreteDistribution::new(vec![-1.0, 0.0, 0.5, 1.0], p.to_vec()).unwrap();
    let qd = DiscreteDistribution::new(vec![-1.0, 0.0, 0.5, 1.0], q.to_vec()).unwrap();
    let kinds = DivergenceKind::FIXED.into_iter().chain([1.0, 1.25, 1.5, 2.0].map(DivergenceKind::PhiAlpha));
    for kind in kinds {
        let closed = divergence(&pd, &qd, kind);
        let oracle = generator_oracle(&p, &q, kind);
        assert!((closed - oracle).abs() < 1e-12, "{kind}: {closed} vs {oracle}");
    }
}

#[test]
fn binning_example() {
    let q = Quantizer::uniform_bins(2, 0.0, 1.0).unwrap();
    let d = DiscreteDistribution::from_samples(&[0.1, 0.9, 0.9], &q).unwrap();
    assert_eq!(d.support(), &[0.25, 0.75]);
    assert!((d.probs()[0] - 1.0 / 3.0).abs() < 1e-15);
    assert!((d.probs()[1] - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn deterministic_channel_information() {
    let j = deterministic_joint();
    let info = |k| fgen_core::f_information(&j, k);
    assert!((info(DivergenceKind::Kl) - LN2).abs() < 1e-15);
    assert!((info(DivergenceKind::TotalVariation) - 0.5).abs() < 1e-15);
    assert!((info(DivergenceKind::Chi2) - 1.0).abs() < 1e-15);
    assert!((info(DivergenceKind::SquaredHellinger) - (2.0 - 2f64.sqrt())).abs() < 1e-15);
    assert!((info(DivergenceKind::JensenShannon) - 1.5 * (4.0f64 / 3.0).ln()).abs() < 1e-15);
}

#[test]
fn interpolating_channel_bounds() {
    let t = interpolating_bernoulli_tensor(0.25, 8).unwrap();
    let (report, stats) = evaluate_report(&t, &BoundSettings::default(), &BoundSelection::All).unwrap();
    let i = 0.25 * LN2;
    let cell = &stats.pooled().unwrap()[0];
    assert_eq!(cell.e_g, 0.25);
    assert_eq!(cell.e_dl2, 0.25);
    assert!((cell.info(DivergenceKind::Kl).unwrap() - i).abs() < 1e-15);

    let v = |b| report.value(b).unwrap();
    assert!((v(BoundName::CmiOracle) - i.sqrt()).abs() < 1e-12);
    assert!((v(BoundName::CmiOracle) - 0.4162773).abs() < 1e-6);
    assert!((v(BoundName::BaselineLdcmi) - (2.0 * i).sqrt()).abs() < 1e-12);
    assert!((v(BoundName::BaselineLdcmi) - 0.5887050).abs() < 1e-6);
    assert!((v(BoundName::CmiRealizableLog2) - 0.25).abs() < 1e-12);
    assert!((v(BoundName::CmiRealizable4i) - 4.0 * i).abs() < 1e-12);
    assert!((report.gen_error.mean - 0.25).abs() < 1e-15);

    let j = interpolating_bernoulli_joint(0.25).unwrap();
    let inv = fgen_core::bounds::per_joint_proof_invariants(&j);
    assert!(inv.all_pass());
    assert!(0.0625 <= 2.0 * (0.25 + 0.25) * i);
}

#[test]
fn constant_losses_give_zero_bounds() {
    let t = constant_tensor(2, 6, 3, 0.4).unwrap();
    let (report, _) = evaluate_report(&t, &BoundSettings::default(), &BoundSelection::All).unwrap();
    for (name, outcome) in &report.results {
        assert_eq!(outcome.value(), Some(0.0), "{name}");
    }
    assert_eq!(report.gen_error.mean, 0.0);
}

#[test]
fn interpolating_population_statistics() {
    let t = interpolating_bernoulli_tensor(0.25, 8).unwrap();
    let config = StatisticsConfig { modes: vec![Mode::Pooled], c_grid: vec![1.0], ..StatisticsConfig::default() };
    let stats = compute_statistics(&t, &config).unwrap();
    let c = &stats.pooled().unwrap()[0];
    assert_eq!((c.e_g, c.e_dl2), (0.25, 0.25));
    assert!((c.info(DivergenceKind::Kl).unwrap() - 0.1732868).abs() < 1e-7);
}
