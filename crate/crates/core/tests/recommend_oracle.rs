use std::collections::BTreeMap;

use apptrend_core::recommend::{
    build_profiles, slope_one, top_apps, trend_filter, usage_score, RecommendationList, RecommendedItem, SlopeOne,
    TrendPolicy, UsageWeights, UserProfile,
};
use apptrend_core::trend::TrendKind;
use apptrend_core::{DatasetBuilder, Day, Error};
use proptest::prelude::*;

/// Score matrix: `None` means the user never used the app.
type Matrix = Vec<Vec<Option<u8>>>;

fn matrix() -> impl Strategy<Value = Matrix> {
    (1usize..=5, 1usize..=5).prop_flat_map(|(users, apps)| {
        prop::collection::vec(prop::collection::vec(prop::option::of(0u8..=10), apps), users)
    })
}

fn profiles(m: &Matrix) -> Vec<UserProfile> {
    m.iter()
        .enumerate()
        .map(|(u, row)| {
            let names: Vec<String> = (0..row.len()).map(|a| format!("a{a}")).collect();
            let scores: Vec<(&str, f64)> = row
                .iter()
                .enumerate()
                .filter_map(|(a, s)| s.map(|s| (names[a].as_str(), s as f64 / 10.0)))
                .collect();
            UserProfile::with_scores(&format!("u{u}"), scores)
        })
        .collect()
}

/// P(u_j) straight from the two equations, with dev(i,j) averaging
/// score(j) - score(i) over the users of both apps.
fn direct(m: &Matrix, u: usize, j: usize) -> Option<f64> {
    let score = |w: usize, a: usize| m[w][a].map(|s| s as f64 / 10.0);
    if score(u, j).is_some() {
        return None;
    }
    let mut terms = Vec::new();
    for i in 0..m[u].len() {
        let Some(ui) = score(u, i) else { continue };
        let co: Vec<f64> = (0..m.len())
            .filter_map(|w| Some(score(w, j)? - score(w, i)?))
            .collect();
        if !co.is_empty() {
            let dev = co.iter().sum::<f64>() / co.len() as f64;
            terms.push(dev + ui);
        }
    }
    (!terms.is_empty()).then(|| terms.iter().sum::<f64>() / terms.len() as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn slope_one_matches_direct_evaluation(m in matrix()) {
        let ps = profiles(&m);
        let apps = m[0].len();
        for (u, p) in ps.iter().enumerate() {
            match slope_one(&ps, &p.user_id, apps) {
                Err(Error::ColdUser(_)) => prop_assert!(p.scores.is_empty()),
                Err(e) => prop_assert!(false, "{e}"),
                Ok(list) => {
                    let got: BTreeMap<&str, f64> = list.items.iter().map(|i| (i.app_id.as_str(), i.relevance)).collect();
                    for j in 0..apps {
                        let name = format!("a{j}");
                        let want = direct(&m, u, j);
                        prop_assert_eq!(got.contains_key(name.as_str()), want.is_some(), "app {}", name);
                        if let Some(w) = want {
                            prop_assert!((got[name.as_str()] - w).abs() <= 1e-9);
                        }
                    }
                    for w in list.items.windows(2) {
                        prop_assert!(w[0].relevance > w[1].relevance
                            || (w[0].relevance == w[1].relevance && w[0].app_id < w[1].app_id));
                    }
                }
            }
        }
    }

    #[test]
    fn fitted_deviation_is_antisymmetric(m in matrix()) {
        let ps = profiles(&m);
        let model = SlopeOne::fit(&ps);
        for i in model.apps() {
            for j in model.apps().iter().filter(|j| *j != i) {
                let d = model.deviation(i, j);
                let direct = apptrend_core::recommend::deviation(&ps, i, j);
                prop_assert_eq!(d.support, direct.support);
                prop_assert!((d.dev - direct.dev).abs() <= 1e-12);
                prop_assert!((d.dev + model.deviation(j, i).dev).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn filter_drops_flops_and_keeps_order(
        rel in prop::collection::vec(0.0f64..2.0, 0..30),
        kinds in prop::collection::vec(0usize..5, 30),
        n in 0usize..15,
        boost in 1.0f64..3.0,
    ) {
        let all = [TrendKind::Hot, TrendKind::Flop, TrendKind::Dominant, TrendKind::Marginal, TrendKind::Unclassified];
        let mut items: Vec<RecommendedItem> = rel.iter().enumerate()
            .map(|(i, &r)| RecommendedItem { app_id: format!("a{i:02}"), relevance: r }).collect();
        items.sort_by(|a, b| b.relevance.total_cmp(&a.relevance).then(a.app_id.cmp(&b.app_id)));
        let classes: BTreeMap<String, TrendKind> = (0..rel.len()).map(|i| (format!("a{i:02}"), all[kinds[i]])).collect();
        let list = RecommendationList { user_id: "u".into(), items: items.clone(), n };

        let same = trend_filter(&list, &classes, &TrendPolicy::identity());
        prop_assert_eq!(&same.items[..], &items[..n.min(items.len())]);

        let out = trend_filter(&list, &classes, &TrendPolicy::drop_flops(boost));
        let non_flops = items.iter().filter(|i| classes[&i.app_id] != TrendKind::Flop).count();
        prop_assert_eq!(out.items.len(), n.min(non_flops));
        for item in &out.items {
            let kind = classes[&item.app_id];
            prop_assert_ne!(kind, TrendKind::Flop);
            let base = items.iter().find(|i| i.app_id == item.app_id).unwrap().relevance;
            let factor = if kind == TrendKind::Hot { boost } else { 1.0 };
            prop_assert_eq!(item.relevance, base * factor);
        }
        for w in out.items.windows(2) {
            prop_assert!(w[0].relevance >= w[1].relevance);
        }
    }
}

#[test]
fn usage_score_components() {
    let mut b = DatasetBuilder::new();
    for d in [0, 2, 9] {
        b.push("u", "a", Day(100 + d)).unwrap();
    }
    b.push("u", "a", Day(150)).unwrap();
    let ds = b.build().unwrap();
    let as_of = Day(109);
    // recency 1, frequency 3/10, duration 3/30
    let only = |r, f, d| usage_score(&ds, "u", "a", as_of, &UsageWeights::new(r, f, d).unwrap()).unwrap().score;
    assert!((only(1.0, 0.0, 0.0) - 1.0).abs() < 1e-12);
    assert!((only(0.0, 1.0, 0.0) - 0.3).abs() < 1e-12);
    assert!((only(0.0, 0.0, 1.0) - 0.1).abs() < 1e-12);
    let later = usage_score(&ds, "u", "a", Day(140), &UsageWeights::new(1.0, 0.0, 0.0).unwrap()).unwrap();
    assert!((later.score - (1.0 - 31.0 / 90.0)).abs() < 1e-12);
    assert!(usage_score(&ds, "u", "a", Day(99), &UsageWeights::default()).is_err());
    assert!(matches!(usage_score(&ds, "x", "a", as_of, &UsageWeights::default()), Err(Error::UnknownUser(_))));
}

#[test]
fn weights_must_sum_to_one() {
    assert!(UsageWeights::new(0.5, 0.5, 0.1).is_err());
    assert!(UsageWeights::new(-0.1, 0.6, 0.5).is_err());
    assert!(UsageWeights::new(0.2, 0.3, 0.5).is_ok());
}

#[test]
fn profiles_from_a_dataset() {
    let mut b = DatasetBuilder::new();
    for (u, a, d) in [("u1", "a", 0), ("u1", "b", 1), ("u2", "a", 0), ("u2", "c", 3), ("u3", "c", 5), ("u3", "a", 6)] {
        b.push(u, a, Day(d)).unwrap();
    }
    let ds = b.build().unwrap();
    let apps = top_apps(&ds, Day(6), 10);
    let names: Vec<&str> = apps.iter().map(|&a| ds.app_name(a)).collect();
    assert_eq!(names, ["a", "c", "b"]);
    let ps = build_profiles(&ds, None, &apps, Day(3), &UsageWeights::default());
    // u3 has no usage up to day 3
    assert_eq!(ps.iter().map(|p| p.user_id.as_str()).collect::<Vec<_>>(), ["u1", "u2"]);
    assert!(ps[0].uses("b") && !ps[0].uses("c"));
    let rec = slope_one(&ps, "u1", 5).unwrap();
    assert_eq!(rec.app_ids().collect::<Vec<_>>(), ["c"]);
    assert!(matches!(slope_one(&ps, "u3", 5), Err(Error::ColdUser(_))));
}
