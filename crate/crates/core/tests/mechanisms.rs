use netclear_core::equilibrium::SearchConfig;
use netclear_core::fixtures::{random_assignment, star_intermediary};
use netclear_core::mechanisms::*;
use netclear_core::model::Role;
use netclear_core::utility::make_quasilinear;
use netclear_core::{Bundle, TradeNetwork, UtilityProfile};

fn config(hi: f64) -> MechanismConfig {
    MechanismConfig::new(SearchConfig::new(0.0, hi, 0.25))
}

/// One zero-cost seller `s` and buyers `b1`, `b2` with values 1 and 5.
fn one_seller_two_buyers() -> UtilityProfile {
    let net = TradeNetwork::build(&[("t1", "s", "b1"), ("t2", "s", "b2")]).unwrap();
    let s = make_quasilinear(&net, 0, &[(Bundle::EMPTY, 0.0), (Bundle::singleton(0), 0.0), (Bundle::singleton(1), 0.0)]).unwrap();
    let b1 = make_quasilinear(&net, 1, &[(Bundle::EMPTY, 0.0), (Bundle::singleton(0), 1.0)]).unwrap();
    let b2 = make_quasilinear(&net, 2, &[(Bundle::EMPTY, 0.0), (Bundle::singleton(1), 5.0)]).unwrap();
    UtilityProfile::new(net, vec![s, b1, b2]).unwrap()
}

#[test]
fn star_selects_the_cheaper_equilibrium_for_buyers() {
    let fx = star_intermediary();
    let mut cfg = MechanismConfig::new(SearchConfig::new(-1.0, 3.0, 0.25));
    let out = buyer_optimal_mechanism(&fx.profile, &cfg).unwrap();
    assert_eq!(out.prices, vec![1.0, 1.0, 1.0, 1.0]);
    assert_eq!(out.support, Bundle::full(4));
    assert!(!out.fallback);
    assert!(replay_outcome(&fx.profile, &out, 1e-7));
    let b1 = fx.profile.network().firm_index("b1").unwrap();
    assert_eq!(out.utilities[b1], 1.0);
    cfg.rule = SelectionRule::SellerOptimal;
    assert_eq!(buyer_optimal_mechanism(&fx.profile, &cfg).unwrap().prices, vec![1.0, 1.0, 1.0, 1.0]);
}

#[test]
fn second_price_outcome_for_single_seller() {
    let u = one_seller_two_buyers();
    let out = buyer_optimal_mechanism(&u, &config(6.0)).unwrap();
    assert_eq!(out.support, Bundle::singleton(1));
    assert_eq!(out.prices[1], 1.0);
    assert_eq!(out.allocation_prices(), vec![(1, 1.0)]);
}

#[test]
fn seller_gains_by_truncating() {
    let u = one_seller_two_buyers();
    let r = manipulation_search(&u, &[0], &Families::default(), &config(6.0)).unwrap();
    assert!(r.violation);
    let best = r.best.unwrap();
    assert_eq!(best.reports, vec!["truncate +3".to_string()]);
    assert_eq!(best.deltas, vec![2.0]);
}

#[test]
fn buyers_cannot_gain_in_the_single_seller_market() {
    let u = one_seller_two_buyers();
    let r = manipulation_search(&u, &[1, 2], &Families::default(), &config(6.0)).unwrap();
    assert!(!r.violation);
    assert!(r.deviations_tried > 0);
}

#[test]
fn empty_and_mixed_coalitions() {
    let fx = star_intermediary();
    let cfg = MechanismConfig::new(SearchConfig::new(-1.0, 3.0, 0.25));
    let r = manipulation_search(&fx.profile, &[], &Families::default(), &cfg).unwrap();
    assert!(!r.violation && r.deviations_tried == 0);
    let net = fx.profile.network();
    let s1 = net.firm_index("s1").unwrap();
    let b1 = net.firm_index("b1").unwrap();
    assert!(manipulation_search(&fx.profile, &[s1, b1], &Families::default(), &cfg).is_err());
    assert!(manipulation_search(&fx.profile, &[fx.focus], &Families::default(), &cfg).is_err());
}

#[test]
fn buyer_coalitions_never_gain_in_assignment_markets() {
    for seed in 0..8 {
        let u = random_assignment(seed, 4);
        let roles = u.network().terminal_roles();
        let buyers: Vec<usize> = (0..roles.len()).filter(|&f| roles[f] == Role::TerminalBuyer).collect();
        let cfg = config(6.0);
        for pair in buyers.chunks(2) {
            let r = manipulation_search(&u, pair, &Families::default(), &cfg).unwrap();
            assert!(!r.violation, "seed {seed}: {:?}", r.best);
        }
    }
}

#[test]
fn prechecks_flag_the_intermediary() {
    let fx = star_intermediary();
    let mut cfg = MechanismConfig::new(SearchConfig::new(-1.0, 3.0, 0.25));
    cfg.precheck = true;
    let out = buyer_optimal_mechanism(&fx.profile, &cfg).unwrap();
    assert!(out.warnings.iter().any(|w| w.starts_with('f')), "{:?}", out.warnings);
}
