use netclear_core::demand::*;
use netclear_core::fixtures::{logistic_bundle_buyer, piecewise_pair_buyer, star_intermediary, three_trade_cone};
use netclear_core::properties::{check, FiniteSelection, PairSource, Property, Variant};
use netclear_core::utility::make_quasilinear;
use netclear_core::{Bundle, TradeNetwork};

fn bundles(net: &TradeNetwork, sets: &[&[&str]]) -> Vec<Bundle> {
    let mut v: Vec<Bundle> = sets.iter().map(|s| net.bundle(s).unwrap()).collect();
    v.sort();
    v
}

#[test]
fn star_demand_goldens() {
    let fx = star_intermediary();
    let net = fx.profile.network();
    let u = fx.focus_utility();
    let d = demand_set(u, &[1.0, 1.0, 1.0, 1.0], EPS_TIE);
    assert_eq!(
        d.bundles,
        bundles(net, &[&["a1", "b1"], &["a1", "b2"], &["a2", "b1"], &["a2", "b2"], &["a1", "a2", "b1", "b2"]])
    );
    assert_eq!(d.indirect, 2.0);
    let d = demand_set(u, &[0.0, 1.0, 1.0, 1.0], EPS_TIE);
    assert_eq!(d.bundles, bundles(net, &[&["a1", "b1"], &["a1", "b2"]]));
    assert!(!d.is_single_valued());
    assert_eq!(indirect_utility(u, &[0.0, 0.0, 2.0, 2.0]), 4.0);
}

#[test]
fn cone_demand_goldens() {
    let fx = three_trade_cone();
    let net = fx.profile.network();
    let u = fx.focus_utility();
    assert_eq!(demand_set(u, &[3.0, 2.0, 2.0], EPS_TIE).bundles, bundles(net, &[&["w2"], &["w3"]]));
    let d = demand_set(u, &[2.0, 2.0, 2.0], EPS_TIE);
    assert!(d.contains(Bundle::full(3)));
    assert!(d.contains(net.bundle(&["w1"]).unwrap()));
}

#[test]
fn logistic_demand_is_single_valued_at_corner_splits() {
    let fx = logistic_bundle_buyer();
    let net = fx.profile.network();
    for p in [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]] {
        let d = demand_set(fx.focus_utility(), &p, EPS_TIE);
        assert!(d.is_single_valued());
        assert_eq!(d.bundles, bundles(net, &[&["w1", "w2"]]));
    }
}

#[test]
fn constant_firm_and_knife_edge_ties() {
    let net = TradeNetwork::build(&[("w", "s", "b")]).unwrap();
    let s = make_quasilinear(&net, 0, &[(Bundle::EMPTY, 0.0)]).unwrap();
    assert_eq!(indirect_utility(&s, &[7.0]), 0.0);
    let b = make_quasilinear(&net, 1, &[(Bundle::EMPTY, 0.0), (Bundle::singleton(0), 2.0)]).unwrap();
    assert_eq!(demand_set(&b, &[1.0], EPS_TIE).bundles, vec![Bundle::singleton(0)]);
    assert_eq!(demand_set(&b, &[2.0], EPS_TIE).bundles.len(), 2);
    assert_eq!(demand_set(&b, &[3.0], EPS_TIE).bundles, vec![Bundle::EMPTY]);
}

#[test]
fn tiebreak_selection_stays_inside_demand() {
    let fx = star_intermediary();
    let u = fx.focus_utility();
    let points = vec![vec![1.0, 1.0, 1.0, 1.0], vec![0.0, 0.0, 2.0, 2.0], vec![0.0, 1.0, 1.0, 1.0]];
    let sel = joint_tiebreak_selection(u, &points, &Schedule::default(), EPS_TIE).unwrap();
    for (p, b) in points.iter().zip(&sel) {
        assert!(demand_set(u, p, EPS_TIE).contains(*b));
    }
}

#[test]
fn tiebreak_keeps_singletons() {
    let fx = logistic_bundle_buyer();
    let sel = joint_tiebreak_selection(fx.focus_utility(), &[vec![0.0, 1.0, 0.0]], &Schedule::default(), EPS_TIE).unwrap();
    assert_eq!(sel, vec![Bundle::full(2)]);
}

#[test]
fn tiebreak_selection_on_unit_demand_is_substitutable() {
    let net = TradeNetwork::build(&[("x", "s1", "f"), ("y", "s2", "f")]).unwrap();
    let f = net.firm_index("f").unwrap();
    let u = make_quasilinear(&net, f, &[(Bundle::EMPTY, 0.0), (Bundle::singleton(0), 2.0), (Bundle::singleton(1), 2.0)]).unwrap();
    let points: Vec<Vec<f64>> = (0..=4).flat_map(|a| (0..=4).map(move |b| vec![a as f64 * 0.5, b as f64 * 0.5])).collect();
    let sel = joint_tiebreak_selection(&u, &points, &Schedule::default(), EPS_TIE).unwrap();
    let oracle = FiniteSelection { upstream: u.upstream(), downstream: u.downstream(), points: points.iter().cloned().zip(sel).collect() };
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = points
        .iter()
        .flat_map(|p| points.iter().filter(move |q| p.iter().zip(q.iter()).all(|(a, b)| a <= b)).map(move |q| (p.clone(), q.clone())))
        .collect();
    let r = check(&oracle, Property::SameSide, Variant::Weak, &PairSource::List(pairs), 2).unwrap();
    assert!(r.passed(), "{:?}", r.violations.first());
}

#[test]
fn nib_witnesses() {
    let fx = piecewise_pair_buyer();
    let u = fx.focus_utility();
    let p = [2.0, 2.0];
    // The pair is uniquely demanded just below the kink, so a witness exists.
    let q = nib_witness(u, &p, Bundle::full(2), 0.1, 40, EPS_TIE).unwrap().unwrap();
    assert_eq!(demand_set(u, &q, EPS_TIE).bundles, vec![Bundle::full(2)]);
    let q = nib_witness(u, &p, Bundle::singleton(0), 0.1, 40, EPS_TIE).unwrap().unwrap();
    assert!(q[0] <= 2.0 && q[1] >= 2.0);
    assert_eq!(demand_set(u, &q, EPS_TIE).bundles, vec![Bundle::singleton(0)]);
    assert_eq!(nib_witness(u, &[1.0, 2.0], Bundle::singleton(0), 1e-6, 1, EPS_TIE).unwrap().unwrap(), vec![1.0, 2.0]);
    assert!(nib_witness(u, &[1.0, 2.0], Bundle::full(2), 0.1, 5, EPS_TIE).is_err());
}

#[test]
fn star_full_bundle_has_no_nib_witness() {
    let fx = star_intermediary();
    let r = nib_witness(fx.focus_utility(), &[1.0, 1.0, 1.0, 1.0], Bundle::full(4), 0.1, 80, EPS_TIE).unwrap();
    assert!(r.is_none());
}

#[test]
fn demand_invariance_goldens() {
    let fx = star_intermediary();
    let u = fx.focus_utility();
    let psi = fx.profile.network().bundle(&["a1", "b1"]).unwrap();
    assert!(demand_invariance_check(u, &[0.0, 1.0, 1.0, 1.0], &[1.0, 1.0, 1.0, 1.0], psi, EPS_TIE).unwrap());
    let pw = piecewise_pair_buyer();
    let u = pw.focus_utility();
    assert!(!demand_invariance_check(u, &[1.0, 2.0], &[2.0, 2.0], Bundle::full(2), EPS_TIE).unwrap());
    // Raising a purchase inside the bundle does not favour it.
    assert!(demand_invariance_check(u, &[2.5, 2.0], &[2.0, 2.0], Bundle::full(2), EPS_TIE).is_err());
    assert!(demand_invariance_check(u, &[1.0, 1.0], &[2.0, 1.0], Bundle::full(2), EPS_TIE).is_err());
}

#[test]
fn quasilinear_buyer_invariance_when_price_falls() {
    let net = TradeNetwork::build(&[("w", "s", "b")]).unwrap();
    let b = make_quasilinear(&net, 1, &[(Bundle::EMPTY, 0.0), (Bundle::singleton(0), 2.0)]).unwrap();
    assert!(demand_invariance_check(&b, &[0.5], &[1.5], Bundle::singleton(0), EPS_TIE).unwrap());
}
