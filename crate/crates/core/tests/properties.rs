use maxkappa::agreement::{agreement_delta, expected_agreement, observed_agreement};
use maxkappa::fiber::{collect_fiber, fiber_size, FiberOptions};
use maxkappa::{DisagreementScheme, MarkovBasis, SchemeKind, Table};
use proptest::prelude::*;

fn table_strategy() -> impl Strategy<Value = Table> {
    (2usize..=3, 2usize..=4).prop_flat_map(|(r, k)| {
        let cells = k.pow(r as u32);
        proptest::collection::vec(0u64..4, cells).prop_map(move |c| Table::new(r, k, c).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn json_round_trip(t in table_strategy()) {
        let s = serde_json::to_string(&t).unwrap();
        let back: Table = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn moves_preserve_margins_and_match_delta(
        t in table_strategy(),
        pick in any::<prop::sample::Index>(),
        sign in any::<bool>(),
        kind in prop::sample::select(SchemeKind::BUILTIN.to_vec()),
    ) {
        prop_assume!(t.total() > 0);
        let basis = MarkovBasis::for_dims(t.raters(), t.levels()).unwrap();
        let m = pick.get(basis.moves()).with_sign(sign);
        if let Ok(t2) = t.apply_move(&m) {
            prop_assert_eq!(t2.fiber_statistic(), t.fiber_statistic());
            let s = DisagreementScheme::builtin(kind, t.levels()).unwrap();
            let d = agreement_delta(&m, &s, t.total()).unwrap();
            let direct = observed_agreement(&t2, &s).unwrap() - observed_agreement(&t, &s).unwrap();
            prop_assert!((d - direct).abs() < 1e-12);
            prop_assert_eq!(
                expected_agreement(&t2, &s).unwrap().to_bits(),
                expected_agreement(&t, &s).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn small_fibers_are_consistent(
        r in 2usize..=3,
        cells in proptest::collection::vec(0u64..2, 8),
    ) {
        let k = 2;
        let t = Table::new(r, k, cells[..k.pow(r as u32)].to_vec()).unwrap();
        let m = t.fiber_statistic();
        let all = collect_fiber(&m, 1_000_000).unwrap();
        prop_assert_eq!(all.len() as u64, fiber_size(&m, FiberOptions::default()).unwrap());
        prop_assert!(all.contains(&t));
        for x in &all {
            prop_assert_eq!(x.fiber_statistic(), m.clone());
        }
    }
}
