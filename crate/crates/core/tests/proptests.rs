use netclear_core::demand::{demand_set, indirect_utility, joint_tiebreak_selection, Schedule, EPS_TIE};
use netclear_core::equilibrium::{find_equilibria, is_equilibrium, surplus, SearchConfig, EPS_EQ};
use netclear_core::fixtures::{logistic_bundle_buyer, random_assignment, star_intermediary};
use netclear_core::mechanisms::{buyer_optimal_mechanism, replay_outcome, MechanismConfig};
use netclear_core::properties::*;
use netclear_core::utility::{endowment_transform, make_quasilinear};
use netclear_core::{join_meet_prices, Bundle, FirmUtility, TradeNetwork};
use proptest::prelude::*;

/// A firm `f` with `up` purchases and `down` sales, each with its own
/// counterparty, and a quasi-linear valuation over every subset of its trades.
fn quasilinear_firm(up: usize, down: usize, values: &[f64]) -> (TradeNetwork, FirmUtility) {
    let names: Vec<(String, String, String)> = (0..up)
        .map(|i| (format!("u{i}"), format!("s{i}"), "f".to_string()))
        .chain((0..down).map(|i| (format!("d{i}"), "f".to_string(), format!("b{i}"))))
        .collect();
    let spec: Vec<(&str, &str, &str)> = names.iter().map(|(a, b, c)| (a.as_str(), b.as_str(), c.as_str())).collect();
    let net = TradeNetwork::build(&spec).unwrap();
    let f = net.firm_index("f").unwrap();
    let scope = net.trades_of(f);
    let valuation: Vec<(Bundle, f64)> =
        scope.subsets().enumerate().map(|(i, b)| (b, if b.is_empty() { 0.0 } else { values[i % values.len()] })).collect();
    let u = make_quasilinear(&net, f, &valuation).unwrap();
    (net, u)
}

fn shape() -> impl Strategy<Value = (usize, usize)> {
    prop_oneof![Just((2, 0)), Just((3, 0)), Just((1, 1)), Just((1, 2)), Just((2, 1)), Just((0, 2))]
}

fn integer_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u8..=5).prop_map(f64::from), 8)
}

fn generic_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..5.0, 8)
}

fn grid() -> PairSource {
    PairSource::Grid(Grid::new(0.0, 3.0, 0.5))
}

/// Offset grid with an irrational step: with integer values, utility ties
/// between bundles then arise only from symmetric trades at equal prices, so
/// weak checks see the same single-valued witnesses the strong ones use.
fn generic_grid() -> PairSource {
    PairSource::Grid(Grid::new(0.1, 3.6, 1.0 / 3f64.sqrt()))
}

fn verdict(u: &FirmUtility, prop: Property, variant: Variant, pairs: &PairSource) -> bool {
    let oracle = UtilityDemand { utility: u, eps_tie: EPS_TIE };
    check(&oracle, prop, variant, pairs, u.scope().len()).unwrap().passed()
}

fn price_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-8i32..=16).prop_map(|k| k as f64 * 0.25), n)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn join_and_meet_bracket_both_vectors(p in price_vec(4), q in price_vec(4)) {
        let (j, m) = join_meet_prices(&p, &q).unwrap();
        let (j2, m2) = join_meet_prices(&q, &p).unwrap();
        prop_assert_eq!(&j, &j2);
        prop_assert_eq!(&m, &m2);
        prop_assert_eq!(join_meet_prices(&p, &p).unwrap(), (p.clone(), p.clone()));
        for i in 0..4 {
            prop_assert!(m[i] <= p[i] && p[i] <= j[i] && m[i] <= q[i] && q[i] <= j[i]);
        }
    }

    #[test]
    fn bundles_split_into_sales_and_purchases(bits in 0u32..16) {
        let fx = star_intermediary();
        let net = fx.profile.network();
        let psi = Bundle(bits);
        let mut balance = 0i64;
        for f in 0..net.num_firms() {
            let (down, up) = net.partition_bundle(f, psi.intersection(net.trades_of(f))).unwrap();
            prop_assert!(down.intersection(up).is_empty());
            prop_assert_eq!(down.len() + up.len(), psi.intersection(net.trades_of(f)).len());
            balance += up.len() as i64 - down.len() as i64;
        }
        prop_assert_eq!(balance, 0);
    }

    #[test]
    fn utility_ignores_prices_outside_the_bundle(p in price_vec(4), noise in price_vec(4), bits in 0u32..16) {
        let fx = star_intermediary();
        let u = fx.focus_utility();
        let psi = Bundle(bits);
        let mut q = p.clone();
        for t in 0..4 {
            if !psi.contains(t) {
                q[t] = noise[t];
            }
        }
        prop_assert_eq!(u.eval(psi, &p), u.eval(psi, &q));
    }

    #[test]
    fn endowment_never_lowers_utility(p in price_vec(4), pbar in price_vec(4), end in 0u32..16, bits in 0u32..16) {
        let fx = star_intermediary();
        let u = fx.focus_utility();
        let e = endowment_transform(u, Bundle(end), &pbar).unwrap();
        let psi = Bundle(bits);
        if let Some(v) = u.eval(psi, &p) {
            let w = e.eval(psi, &p).unwrap();
            prop_assert!(w >= v - 1e-12);
            if Bundle(end).is_subset(psi) {
                prop_assert!((w - v).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn demanded_bundles_attain_the_indirect_utility(p in price_vec(4)) {
        let fx = star_intermediary();
        let u = fx.focus_utility();
        let d = demand_set(u, &p, EPS_TIE);
        let v = indirect_utility(u, &p);
        prop_assert!(!d.bundles.is_empty());
        for b in d.bundles {
            prop_assert!((u.eval(b, &p).unwrap() - v).abs() <= EPS_TIE);
        }
    }

    #[test]
    fn tiebreak_selection_is_demanded(points in prop::collection::vec(price_vec(3), 1..6)) {
        let fx = logistic_bundle_buyer();
        let u = fx.focus_utility();
        let sel = joint_tiebreak_selection(u, &points, &Schedule::default(), EPS_TIE).unwrap();
        for (p, b) in points.iter().zip(sel) {
            prop_assert!(demand_set(u, p, EPS_TIE).contains(b));
        }
    }

    #[test]
    fn surplus_is_nonnegative_and_decides_equilibrium(p in price_vec(4)) {
        let fx = star_intermediary();
        let z = surplus(&fx.profile, &p).unwrap();
        prop_assert!(z >= 0.0);
        let rec = is_equilibrium(&fx.profile, &p, EPS_EQ, EPS_TIE).unwrap();
        prop_assert_eq!(rec.is_some(), z <= EPS_EQ);
    }

    #[test]
    fn reports_are_violated_exactly_when_violations_exist(
        (up, down) in shape(), values in integer_values(), prop_idx in 0usize..4, var_idx in 0usize..3,
    ) {
        let (_, u) = quasilinear_firm(up, down, &values);
        let prop = [Property::SameSide, Property::CrossSide, Property::FullSubstitutability, Property::AggregateDemand][prop_idx];
        let variant = [Variant::Weak, Variant::Expansion, Variant::Contraction][var_idx];
        let oracle = UtilityDemand { utility: &u, eps_tie: EPS_TIE };
        let r = check(&oracle, prop, variant, &grid(), u.scope().len()).unwrap();
        prop_assert_eq!(r.verdict == Verdict::Violated, r.violation_count > 0);
        prop_assert_eq!(r.passed(), r.violations.is_empty());
        for v in &r.violations {
            let d = demand_set(&u, &v.p, EPS_TIE);
            prop_assert!(d.contains(v.bundle) || v.p2.is_some());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn weak_same_side_matches_expansion((up, down) in shape(), values in integer_values()) {
        let (_, u) = quasilinear_firm(up, down, &values);
        let pairs = generic_grid();
        prop_assert_eq!(
            verdict(&u, Property::SameSide, Variant::Weak, &pairs),
            verdict(&u, Property::SameSide, Variant::Expansion, &pairs)
        );
    }

    #[test]
    fn weak_cross_side_matches_contraction((up, down) in shape(), values in integer_values()) {
        let (_, u) = quasilinear_firm(up, down, &values);
        let pairs = generic_grid();
        prop_assert_eq!(
            verdict(&u, Property::CrossSide, Variant::Weak, &pairs),
            verdict(&u, Property::CrossSide, Variant::Contraction, &pairs)
        );
    }

    #[test]
    fn quasilinear_weak_and_strong_variants_agree((up, down) in shape(), values in generic_values()) {
        let (_, u) = quasilinear_firm(up, down, &values);
        let pairs = grid();
        for prop in [Property::SameSide, Property::CrossSide, Property::FullSubstitutability] {
            let weak = verdict(&u, prop, Variant::Weak, &pairs);
            prop_assert_eq!(weak, verdict(&u, prop, Variant::Expansion, &pairs), "{:?}", prop);
            prop_assert_eq!(weak, verdict(&u, prop, Variant::Contraction, &pairs), "{:?}", prop);
        }
    }

    #[test]
    fn substitutes_with_both_laws_are_monotone_substitutes((up, down) in shape(), values in integer_values()) {
        let (_, u) = quasilinear_firm(up, down, &values);
        let pairs = grid();
        let n = u.scope().len();
        let fs = check_full_substitutability(&u, Variant::Expansion, &pairs, n, EPS_TIE).unwrap().passed()
            && check_full_substitutability(&u, Variant::Contraction, &pairs, n, EPS_TIE).unwrap().passed();
        let lad = check_aggregate_law(&u, Law::Demand, true, &pairs, n, EPS_TIE).unwrap().passed();
        let las = check_aggregate_law(&u, Law::Supply, true, &pairs, n, EPS_TIE).unwrap().passed();
        if fs && lad && las {
            prop_assert!(check_monotone_substitutability(&u, &pairs, n, EPS_TIE).unwrap().passed());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn found_supports_replay_and_mechanism_verifies(seed in 0u64..10_000) {
        let u = random_assignment(seed, 4);
        let cfg = SearchConfig::new(0.0, 5.0, 0.5);
        for r in find_equilibria(&u, &cfg).unwrap().records {
            prop_assert!(r.surplus <= EPS_EQ);
            for psi in &r.supports {
                for fu in u.firms() {
                    prop_assert!(demand_set(fu, &r.prices, EPS_EQ).contains(psi.intersection(fu.scope())));
                }
            }
        }
        let out = buyer_optimal_mechanism(&u, &MechanismConfig::new(cfg)).unwrap();
        prop_assert!(replay_outcome(&u, &out, EPS_EQ));
    }
}
