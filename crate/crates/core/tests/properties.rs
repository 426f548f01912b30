use netclear_core::demand::{demand_set, EPS_TIE};
use netclear_core::fixtures::{
    self, capped_additive_buyer, logistic_bundle_buyer, piecewise_pair_buyer, star_intermediary, three_trade_cone,
    unit_demand_pair_buyer, Fixture,
};
use netclear_core::properties::*;
use netclear_core::{Bundle, FirmUtility, PriceBox, TradeNetwork};

fn pair(p: &[f64], q: &[f64]) -> PairSource {
    PairSource::List(vec![(p.to_vec(), q.to_vec())])
}

fn focus(fx: Fixture) -> (TradeNetwork, FirmUtility) {
    (fx.profile.network().clone(), fx.focus_utility().clone())
}

fn unit_demand_buyer() -> (TradeNetwork, FirmUtility) {
    focus(unit_demand_pair_buyer())
}

fn two_sided_complement() -> (TradeNetwork, FirmUtility) {
    focus(fixtures::two_sided_complement())
}

fn substitutes_buyer() -> (TradeNetwork, FirmUtility) {
    focus(capped_additive_buyer())
}

const VARIANTS: [Variant; 3] = [Variant::Weak, Variant::Expansion, Variant::Contraction];

#[test]
fn cone_contraction_same_side_fails_weak_is_vacuous() {
    let fx = three_trade_cone();
    let u = fx.focus_utility();
    let src = pair(&[2.0, 2.0, 2.0], &[3.0, 2.0, 2.0]);
    let r = check_same_side(u, Variant::Contraction, &src, 3, EPS_TIE).unwrap();
    assert_eq!(r.verdict, Verdict::Violated);
    assert_eq!(r.violations[0].bundle, Bundle::full(3));
    let r = check_same_side(u, Variant::Weak, &src, 3, EPS_TIE).unwrap();
    assert!(r.passed());
    assert_eq!(r.pairs_tested, 0);
}

#[test]
fn star_cross_side_expansion_fails_on_full_bundle() {
    let fx = star_intermediary();
    let u = fx.focus_utility();
    let src = pair(&[0.0, 1.0, 1.0, 1.0], &[1.0, 1.0, 1.0, 1.0]);
    let r = check_cross_side(u, Variant::Expansion, &src, 4, EPS_TIE).unwrap();
    assert_eq!(r.verdict, Verdict::Violated);
    assert_eq!(r.violations[0].bundle, Bundle::full(4));
    assert!(check_cross_side(u, Variant::Weak, &src, 4, EPS_TIE).unwrap().passed());
}

#[test]
fn star_full_substitutability_expansion_fails_weak_passes_on_grid() {
    let fx = star_intermediary();
    let u = fx.focus_utility();
    let g = PairSource::Grid(Grid::new(0.0, 2.0, 0.5));
    assert!(!check_full_substitutability(u, Variant::Expansion, &g, 4, EPS_TIE).unwrap().passed());
    assert!(check_full_substitutability(u, Variant::Weak, &g, 4, EPS_TIE).unwrap().passed());
}

#[test]
fn star_satisfies_both_aggregate_laws() {
    let fx = star_intermediary();
    let u = fx.focus_utility();
    let g = PairSource::Grid(Grid::new(0.0, 2.0, 0.5));
    for law in [Law::Demand, Law::Supply] {
        assert!(check_aggregate_law(u, law, true, &g, 4, EPS_TIE).unwrap().passed());
    }
}

#[test]
fn star_monotone_substitutability_fails() {
    let fx = star_intermediary();
    let g = PairSource::Grid(Grid::new(0.0, 2.0, 0.5));
    assert!(!check_monotone_substitutability(fx.focus_utility(), &g, 4, EPS_TIE).unwrap().passed());
}

#[test]
fn piecewise_pair_strong_demand_law_fails() {
    let fx = piecewise_pair_buyer();
    let u = fx.focus_utility();
    let r = check_aggregate_law(u, Law::Demand, true, &pair(&[1.0, 2.0], &[2.0, 2.0]), 2, EPS_TIE).unwrap();
    assert_eq!(r.verdict, Verdict::Violated);
    assert_eq!(r.violations[0].bundle, Bundle::full(2));
    assert!(!check_monotone_substitutability(u, &pair(&[1.0, 2.0], &[2.0, 2.0]), 2, EPS_TIE).unwrap().passed());
}

#[test]
fn piecewise_pair_weak_demand_law_fails_off_the_kink() {
    let fx = piecewise_pair_buyer();
    let u = fx.focus_utility();
    let r = check_aggregate_law(u, Law::Demand, false, &pair(&[1.5, 1.75], &[1.75, 1.75]), 2, EPS_TIE).unwrap();
    assert_eq!(r.verdict, Verdict::Violated);
    let full = check_full_substitutability(u, Variant::Expansion, &PairSource::Grid(Grid::new(0.0, 3.0, 0.25)), 2, EPS_TIE).unwrap();
    assert!(full.passed());
}

#[test]
fn piecewise_pair_single_improvement_holds_at_kink_pair() {
    let fx = piecewise_pair_buyer();
    let r = check_single_improvement(fx.focus_utility(), &pair(&[1.0, 2.0], &[2.0, 2.0]), 2, EPS_TIE).unwrap();
    assert!(r.passed());
}

#[test]
fn zero_move_passes_trivially() {
    let fx = piecewise_pair_buyer();
    let r = check_full_substitutability(fx.focus_utility(), Variant::Expansion, &pair(&[2.0, 2.0], &[2.0, 2.0]), 2, EPS_TIE).unwrap();
    assert!(r.passed());
    assert_eq!(r.pairs_tested, 1);
}

#[test]
fn single_improvement_rejects_multi_coordinate_moves() {
    let (_, u) = unit_demand_buyer();
    assert!(check_single_improvement(&u, &pair(&[0.0, 0.0], &[1.0, 1.0]), 2, EPS_TIE).is_err());
}

#[test]
fn pattern_violation_is_an_error() {
    let (_, u) = two_sided_complement();
    // Purchase rises while sale rises: neither pattern.
    assert!(check_same_side(&u, Variant::Weak, &pair(&[0.0, 0.0], &[1.0, 1.0]), 2, EPS_TIE).is_err());
}

#[test]
fn quasilinear_fixtures_pass_every_variant() {
    let g = PairSource::Grid(Grid::new(0.0, 4.0, 0.25));
    for (net, u) in [unit_demand_buyer(), two_sided_complement(), substitutes_buyer()] {
        let n = net.num_trades();
        for v in VARIANTS {
            assert!(check_same_side(&u, v, &g, n, EPS_TIE).unwrap().passed(), "{v:?}");
            assert!(check_cross_side(&u, v, &g, n, EPS_TIE).unwrap().passed(), "{v:?}");
            assert!(check_full_substitutability(&u, v, &g, n, EPS_TIE).unwrap().passed(), "{v:?}");
        }
        assert!(check_monotone_substitutability(&u, &g, n, EPS_TIE).unwrap().passed());
        assert!(check_single_improvement(&u, &g, n, EPS_TIE).unwrap().passed());
        for law in [Law::Demand, Law::Supply] {
            assert!(check_aggregate_law(&u, law, true, &g, n, EPS_TIE).unwrap().passed());
        }
    }
}

#[test]
fn nib_holds_for_piecewise_pair_and_logistic_buyers() {
    let fx = piecewise_pair_buyer();
    let r = check_nib(fx.focus_utility(), &Grid::new(0.0, 3.0, 0.5), 2, 0.1, 40, EPS_TIE);
    assert!(r.passed(), "{:?}", r.violations);
    let lg = logistic_bundle_buyer();
    let r = check_nib(lg.focus_utility(), &Grid::new(0.0, 2.0, 0.25), 3, 0.1, 40, EPS_TIE);
    assert!(r.passed(), "{:?}", r.violations.first());
    let (_, q) = unit_demand_buyer();
    assert!(check_nib(&q, &Grid::new(0.0, 4.0, 0.5), 2, 0.1, 40, EPS_TIE).passed());
}

#[test]
fn star_full_bundle_is_isolated() {
    // The convex costs never beat the best pair strictly, so the full bundle
    // is demanded only where it ties.
    let fx = star_intermediary();
    let r = check_nib(fx.focus_utility(), &Grid::new(0.0, 2.0, 0.5), 4, 0.1, 40, EPS_TIE);
    assert_eq!(r.verdict, Verdict::Violated);
    assert!(r.violations.iter().all(|v| v.bundle == Bundle::full(4)));
    assert!(r.violations.iter().any(|v| v.p == [1.0, 1.0, 1.0, 1.0]));
}

#[test]
fn bounds_on_star_profile_pass() {
    let fx = star_intermediary();
    for kind in [BoundKind::Bcv, BoundKind::Bwp] {
        let r = check_profile_bounds(&fx.profile, kind, PriceBox::new(-10.0, 10.0), 2000, 10.0, 7);
        assert!(r.passed(), "{kind:?}: {:?}", r.violations.first());
    }
}

#[test]
fn bcv_fails_for_exponential_buyer_as_box_grows() {
    let net = TradeNetwork::build(&[("w", "s", "b")]).unwrap();
    let b = net.firm_index("b").unwrap();
    let u = FirmUtility::from_texts(&net, b, &[(&[], "0"), (&["w"], "exp(-p[w])")]).unwrap();
    let small = check_bounds(&u, BoundKind::Bcv, PriceBox::new(-5.0, 5.0), 500, 10.0, 1, 3);
    assert!(small.passed());
    let large = check_bounds(&u, BoundKind::Bcv, PriceBox::new(-50.0, 50.0), 500, 10.0, 1, 3);
    assert_eq!(large.verdict, Verdict::Violated);
}

#[test]
fn finite_selection_skips_undefined_points() {
    let sel = FiniteSelection {
        upstream: Bundle::full(2),
        downstream: Bundle::EMPTY,
        points: vec![(vec![0.0, 0.0], Bundle::full(2)), (vec![1.0, 0.0], Bundle::singleton(1))],
    };
    let src = PairSource::List(vec![(vec![0.0, 0.0], vec![1.0, 0.0]), (vec![0.0, 0.0], vec![2.0, 0.0])]);
    let r = check(&sel, Property::FullSubstitutability, Variant::Weak, &src, 2).unwrap();
    assert_eq!(r.pairs_tested, 1);
    assert!(r.passed());
}

#[test]
fn violations_replay_through_demand() {
    let fx = star_intermediary();
    let u = fx.focus_utility();
    let r = check_cross_side(u, Variant::Expansion, &PairSource::Grid(Grid::new(0.0, 2.0, 0.5)), 4, EPS_TIE).unwrap();
    assert!(r.violation_count > 0);
    for v in &r.violations {
        let p2 = v.p2.as_ref().unwrap();
        let dp = demand_set(u, &v.p, EPS_TIE).bundles;
        let dq = demand_set(u, p2, EPS_TIE).bundles;
        assert!(dq.contains(&v.bundle));
        let other = match v.clause.unwrap() {
            Clause::PurchaseRaise => u.downstream(),
            Clause::SaleLower => u.upstream(),
        };
        assert!(dp.iter().all(|b| !v.bundle.intersection(other).is_subset(b.intersection(other))));
    }
}
