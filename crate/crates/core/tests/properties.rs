use proptest::prelude::*;

use fgen_core::bounds::{evaluate_report, BoundName, BoundSelection, BoundSettings};
use fgen_core::channels::sample_channel_tensor;
use fgen_core::distributions::{DiscreteDistribution, JointLossMaskDistribution, Quantizer};
use fgen_core::divergences::{divergence, f_information, DivergenceKind};
use fgen_core::sampling::{random_joint, stream_rng};
use fgen_core::supersample::{estimate_f_information, LossKind, Mode, SupersampleLossTensor};
use fgen_core::variational::{concave_max, truncated_lower_bound, variational_lower_bound, CLAMP_EPSILON};

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, k).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn joint() -> impl Strategy<Value = JointLossMaskDistribution> {
    (1usize..=8).prop_flat_map(|k| (prop::collection::btree_set(-100i32..=100, k), simplex(k), simplex(k))).prop_map(
        |(s, c0, c1)| {
            let support: Vec<f64> = s.into_iter().map(|v| f64::from(v) / 100.0).collect();
            let k = support.len();
            JointLossMaskDistribution::from_conditionals(support, &c0[..k], &c1[..k]).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn binning_conserves_mass(values in prop::collection::vec(-3.0f64..3.0, 1..60), bins in 2usize..30) {
        let q = Quantizer::uniform_bins(bins, -1.0, 1.0).unwrap();
        let d = DiscreteDistribution::from_samples(&values, &q).unwrap();
        prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(d.support().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(d.len() <= bins);
    }

    #[test]
    fn divergences_are_nonnegative(p in simplex(5), q in simplex(5)) {
        let s = vec![-1.0, -0.5, 0.0, 0.5, 1.0];
        let pd = DiscreteDistribution::new(s.clone(), p).unwrap();
        let qd = DiscreteDistribution::new(s, q).unwrap();
        for kind in DivergenceKind::FIXED {
            prop_assert!(divergence(&pd, &qd, kind) >= -1e-15);
        }
    }

    #[test]
    fn conjugate_inverse_undoes_conjugate(y in -3.0f64..0.99) {
        for kind in DivergenceKind::CONJUGATE {
            let pair = kind.conjugate().unwrap();
            let y = match kind {
                DivergenceKind::Chi2 => y.max(-2.0),
                DivergenceKind::JensenShannon => y.min(0.69),
                _ => y,
            };
            let back = pair.phi_star_inverse(pair.phi_star(y));
            prop_assert!((back - y).abs() <= 1e-10, "{kind}: {y} -> {back}");
        }
    }

    #[test]
    fn lower_bound_never_exceeds_information(j in joint()) {
        for kind in DivergenceKind::CONJUGATE {
            let r = variational_lower_bound(&j, kind).unwrap();
            prop_assert!(r.value <= f_information(&j, kind) + 1e-9);
            prop_assert!(r.value >= 0.0);
            let b = j.max_abs_dl();
            if b > 0.0 {
                let limit = match kind {
                    DivergenceKind::Chi2 => 1.0,
                    DivergenceKind::JensenShannon => std::f64::consts::LN_2 - CLAMP_EPSILON,
                    _ => 1.0 - CLAMP_EPSILON,
                } / b;
                prop_assert!(r.argmax_t.abs() <= limit * (1.0 + 1e-15));
            }
        }
    }

    #[test]
    fn inactive_truncation_matches(j in joint(), extra in 0.0f64..2.0) {
        let b = j.max_abs_dl();
        for kind in DivergenceKind::CONJUGATE {
            let full = variational_lower_bound(&j, kind).unwrap().value;
            let trunc = truncated_lower_bound(&j, kind, b + extra).unwrap().value;
            prop_assert!((full - trunc).abs() <= 1e-12);
        }
    }

    #[test]
    fn objective_is_unimodal(j in joint()) {
        // A concave objective sampled on a grid has no strict interior local
        // maximum apart from the global one.
        let b = j.max_abs_dl();
        prop_assume!(b > 0.0);
        let limit = (1.0 - CLAMP_EPSILON) / b;
        let f = |t: f64| j.cells().map(|(m, g)| m * (t * g).ln_1p()).sum::<f64>();
        let vals: Vec<f64> = (0..4097).map(|i| -limit + 2.0 * limit * i as f64 / 4096.0).map(f).collect();
        let top = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for w in vals.windows(3) {
            if w[1] > w[0] + 1e-12 && w[1] > w[2] + 1e-12 {
                prop_assert!(w[1] >= top - 1e-12);
            }
        }
        let (_, v, _) = concave_max(f, -limit, limit);
        prop_assert!(v >= top - 1e-15);
    }
}

fn permuted(t: &SupersampleLossTensor, seed: u64) -> SupersampleLossTensor {
    use rand::seq::SliceRandom;
    let mut rng = stream_rng(seed, &[]);
    let mut draws: Vec<usize> = (0..t.k1()).collect();
    draws.shuffle(&mut rng);
    let mut losses = Vec::new();
    let mut masks = Vec::new();
    for &d in &draws {
        let mut ms: Vec<usize> = (0..t.k2()).collect();
        ms.shuffle(&mut rng);
        for &m in &ms {
            for i in 0..t.n() {
                losses.push(t.losses(d, m, i));
                masks.push(t.mask(d, m, i));
            }
        }
    }
    SupersampleLossTensor::new(t.k1(), t.k2(), t.n(), losses, masks, t.loss_kind(), t.loss_range()).unwrap()
}

#[test]
fn estimates_and_bounds_ignore_sample_order() {
    let mut rng = stream_rng(21, &[]);
    for trial in 0..5 {
        let j = random_joint(&mut rng);
        let t = sample_channel_tensor(&j, 3, 40, 2, trial).unwrap();
        let p = permuted(&t, 100 + trial);
        let q = t.default_quantizer().unwrap();
        for mode in [Mode::Pooled, Mode::Disintegrated] {
            let a = estimate_f_information(&t, DivergenceKind::Kl, mode, &q).unwrap();
            let b = estimate_f_information(&p, DivergenceKind::Kl, mode, &q).unwrap();
            if mode == Mode::Pooled {
                for (x, y) in a.values.iter().zip(&b.values) {
                    assert!((x - y).abs() < 1e-12);
                }
            } else {
                let mut x = a.values.clone();
                let mut y = b.values.clone();
                x.sort_by(f64::total_cmp);
                y.sort_by(f64::total_cmp);
                for (x, y) in x.iter().zip(&y) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
        let (ra, _) = evaluate_report(&t, &BoundSettings::default(), &BoundSelection::All).unwrap();
        let (rb, _) = evaluate_report(&p, &BoundSettings::default(), &BoundSelection::All).unwrap();
        for name in BoundName::ALL {
            match (ra.value(name), rb.value(name)) {
                (Some(x), Some(y)) => assert!((x - y).abs() < 1e-10, "{name}: {x} vs {y}"),
                (None, None) => {}
                other => panic!("{name}: {other:?}"),
            }
        }
    }
}

#[test]
fn bound_report_invariants_on_random_channels() {
    let mut rng = stream_rng(22, &[]);
    for trial in 0..20 {
        let j = random_joint(&mut rng);
        let t = sample_channel_tensor(&j, 2, 30, 3, trial).unwrap();
        let (r, _) = evaluate_report(&t, &BoundSettings::default(), &BoundSelection::All).unwrap();
        for (name, outcome) in &r.results {
            if let fgen_core::bounds::BoundOutcome::Ok(res) = outcome {
                assert!(res.value >= 0.0, "{name}");
                let mean = res.per_row.iter().sum::<f64>() / res.per_row.len() as f64;
                assert!((mean - res.value).abs() <= 1e-12);
            }
        }
        let v = |b| r.value(b).unwrap();
        assert!(v(BoundName::CmiOracle) <= v(BoundName::CmiTv) + 1e-9);
        if let (Some(a), Some(b)) = (r.value(BoundName::CmiRealizableLog2), r.value(BoundName::CmiRealizable4i)) {
            assert!(a <= b);
        }
    }
}

#[test]
fn pooled_information_below_mean_disintegrated() {
    let mut rng = stream_rng(23, &[]);
    for trial in 0..10 {
        let j = random_joint(&mut rng);
        let t = sample_channel_tensor(&j, 4, 200, 2, trial).unwrap();
        let q = t.default_quantizer().unwrap();
        let pooled = estimate_f_information(&t, DivergenceKind::Kl, Mode::Pooled, &q).unwrap();
        let dis = estimate_f_information(&t, DivergenceKind::Kl, Mode::Disintegrated, &q).unwrap();
        for i in 0..t.n() {
            let mean: f64 = (0..t.k1()).map(|d| dis.values[d * t.n() + i]).sum::<f64>() / t.k1() as f64;
            assert!(pooled.values[i] <= mean + 5e-2, "row {i}: {} vs {mean}", pooled.values[i]);
        }
    }
}

#[test]
fn second_moment_below_four_variances() {
    // Both columns i.i.d. Bernoulli(0.3) regardless of the mask.
    let mut losses = Vec::new();
    let mut masks = Vec::new();
    for a in [0.0, 1.0] {
        for b in [0.0, 1.0] {
            let w = |x: f64| if x == 1.0 { 3 } else { 7 };
            for _ in 0..w(a) * w(b) {
                for u in [0u8, 1] {
                    losses.push([a, b]);
                    masks.push(u);
                }
            }
        }
    }
    let k2 = losses.len();
    let t = SupersampleLossTensor::new(1, k2, 1, losses, masks, LossKind::ZeroOne, None).unwrap();
    let stats =
        fgen_core::statistics::compute_statistics(&t, &fgen_core::statistics::StatisticsConfig::default()).unwrap();
    let c = &stats.pooled().unwrap()[0];
    assert!((c.e_dl2 - 0.42).abs() < 1e-12);
    assert!((c.var_lplus - 0.21).abs() < 1e-12);
    assert!(c.e_dl2 <= 4.0 * c.var_lplus + 1e-9);
}
