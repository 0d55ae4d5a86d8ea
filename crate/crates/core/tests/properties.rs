use proptest::prelude::*;

use orbitlab::finite_rank::{compose, invert, Base, FiniteRankOperator};
use orbitlab::harness::run_scenario_json;
use orbitlab::spaces::{SeminormKind, SeminormSpec};
use orbitlab::{CoordFunctional, Field, Rational, SparseVector};

fn rational() -> impl Strategy<Value = Rational> {
    (-6i64..=6, 1i64..=5).prop_map(|(n, d)| Rational::from_ratio(n, d))
}

fn vector(window: usize) -> impl Strategy<Value = SparseVector<Rational>> {
    prop::collection::vec(rational(), window).prop_map(|xs| SparseVector::from_dense(&xs))
}

fn operator(window: usize, rank: usize) -> impl Strategy<Value = FiniteRankOperator<Rational>> {
    prop::collection::vec((vector(window), vector(window)), 0..=rank).prop_map(|terms| {
        FiniteRankOperator::new(Base::Identity, terms.into_iter().map(|(f, v)| (CoordFunctional::from_coeffs(f), v)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn invertible_operators_round_trip(j in operator(5, 3), x in vector(5)) {
        if let Ok(inv) = invert(&j) {
            prop_assert_eq!(inv.apply(&j.apply(&x)), x.clone());
            prop_assert_eq!(j.apply(&inv.apply(&x)), x);
        }
    }

    #[test]
    fn composition_acts_as_successive_application(a in operator(4, 2), b in operator(4, 2), x in vector(4)) {
        prop_assert_eq!(compose(&a, &b).apply(&x), a.apply(&b.apply(&x)));
    }

    #[test]
    fn dual_norm_is_homogeneous(f in vector(5), c in rational(), l1 in any::<bool>()) {
        let kind = if l1 { SeminormKind::L1 } else { SeminormKind::Sup };
        let p = SeminormSpec::on(kind, 1..=5).unwrap();
        let f = CoordFunctional::from_coeffs(f);
        let lhs = p.dual_norm(&f.scale(&c)).unwrap();
        prop_assert_eq!(lhs, c.magnitude() * p.dual_norm(&f).unwrap());
    }

    #[test]
    fn vectors_survive_serialization(x in vector(6)) {
        let text = serde_json::to_string(&x).unwrap();
        let back: SparseVector<Rational> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn scenarios_are_deterministic(seed in 0u64..1000) {
        let doc = serde_json::json!({
            "name": "det",
            "window": 12,
            "seed": seed,
            "task": { "kind": "transport", "stages": 2 }
        })
        .to_string();
        let a = run_scenario_json(&doc).unwrap();
        let b = run_scenario_json(&doc).unwrap();
        prop_assert!(a.passed(), "{:?}", a.checks);
        prop_assert_eq!(serde_json::to_value(&a).unwrap(), serde_json::to_value(&b).unwrap());
    }
}
