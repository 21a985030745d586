use std::collections::BTreeSet;

use apptrend_core::evaluate::{
    accuracy, diversity, novelty, trailing_weeks, weekly_protocol, weekly_protocol_variants, EvalConfig, Variant,
};
use apptrend_core::synth::{generate, SynthSpec};
use proptest::prelude::*;

fn set(max: usize) -> impl Strategy<Value = BTreeSet<u8>> {
    prop::collection::btree_set(0u8..40, 0..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3000))]

    #[test]
    fn metrics_are_unit_bounded(l1 in set(10), l2 in set(10), seen in set(30), truth in set(15), extra in 0usize..10) {
        let n = l1.len().max(l2.len()).max(1) + extra;
        let d = diversity(&l1, &l2, n).unwrap();
        let v = novelty(&l1, &seen, n).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((0.0..=1.0).contains(&v));
        match accuracy(&l1, &truth) {
            Ok(a) => prop_assert!((0.0..=1.0).contains(&a)),
            Err(_) => prop_assert!(truth.is_empty()),
        }
    }

    #[test]
    fn metric_identities(l in set(10), more in set(10), extra in 0usize..5) {
        let n = l.len().max(1) + extra;
        prop_assert_eq!(diversity(&l, &l, n).unwrap(), 0.0);
        let seen: BTreeSet<u8> = l.union(&more).copied().collect();
        prop_assert_eq!(novelty(&l, &seen, n).unwrap(), 0.0);
        if !l.is_empty() {
            let truth: BTreeSet<u8> = l.iter().copied().take(1 + extra.min(l.len() - 1)).collect();
            prop_assert_eq!(accuracy(&l, &truth).unwrap(), 1.0);
        }
    }

    #[test]
    fn one_new_app_is_worth_one_over_n(l in set(9), extra in 0usize..5) {
        let n = l.len() + 1 + extra;
        let mut next = l.clone();
        let fresh = (0u8..=40).find(|a| !l.contains(a)).unwrap();
        next.insert(fresh);
        prop_assert_eq!(diversity(&l, &next, n).unwrap(), 1.0 / n as f64);
        prop_assert_eq!(novelty(&next, &l, n).unwrap(), 1.0 / n as f64);
    }
}

fn fixture() -> apptrend_core::Dataset {
    let spec = SynthSpec {
        hot: 6,
        flop: 6,
        dominant: 6,
        marginal: 2,
        users: 150,
        days: 90,
        noise_sigma: 0.05,
        seed: 3,
        ..SynthSpec::default()
    };
    generate(&spec).unwrap().dataset
}

#[test]
fn protocol_invariants() {
    let ds = fixture();
    let weeks = trailing_weeks(&ds, 3).unwrap();
    let mut cfg = EvalConfig::with_defaults(50).unwrap();
    cfg.n = 5;
    let both = weekly_protocol_variants(&ds, &weeks, &cfg, &[Variant::Baseline, Variant::FlopsRemoved]).unwrap();
    assert_eq!(both[0], weekly_protocol(&ds, &weeks, &cfg, Variant::Baseline).unwrap());
    assert_eq!(both[1], weekly_protocol(&ds, &weeks, &cfg, Variant::FlopsRemoved).unwrap());
    for (b, f) in both[0].iter().zip(&both[1]) {
        assert_eq!(f.rec_flop, 0, "week {}", f.week);
        assert_eq!((b.test_users, b.total_hot, b.total_flop), (f.test_users, f.total_hot, f.total_flop));
        for r in [b, f] {
            assert!(r.rec_hot <= r.total_hot && r.rec_flop <= r.total_flop);
            for m in [r.diversity, r.novelty, r.accuracy, r.pooled_diversity, r.pooled_novelty, r.pooled_accuracy] {
                assert!(m.is_none_or(|x| (0.0..=1.0).contains(&x)));
            }
        }
    }
    let first = &both[0][0];
    assert!(first.diversity.is_none() && first.novelty.is_none());
    assert!(first.test_users > 0);
}

#[test]
fn list_length_must_be_positive() {
    let ds = fixture();
    let weeks = trailing_weeks(&ds, 1).unwrap();
    let mut cfg = EvalConfig::with_defaults(50).unwrap();
    cfg.n = 0;
    assert!(weekly_protocol(&ds, &weeks, &cfg, Variant::Baseline).is_err());
}
