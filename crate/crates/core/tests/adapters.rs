use netclear_core::adapters::*;
use netclear_core::equilibrium::{find_equilibria, is_equilibrium, SearchConfig, EPS_EQ};
use netclear_core::fixtures::random_exchange;
use netclear_core::properties::{grid_points, Grid};
use netclear_core::Bundle;

fn s(x: &str) -> String {
    x.to_string()
}

fn one_by_one() -> MatchingMarket {
    MatchingMarket {
        hospitals: vec![s("h")],
        doctors: vec![s("d")],
        hospital_utilities: vec![vec![(vec![], s("0")), (vec![s("d")], s("5 - p[d]"))]],
        doctor_utilities: vec![DoctorPrefs { values: vec![(s("h"), s("p[h]"))], outside: 1.0 }],
    }
}

#[test]
fn single_pair_matching_has_an_interval_of_salaries() {
    let ind = induce_from_matching(&one_by_one()).unwrap();
    let net = ind.profile.network();
    assert_eq!(net.trade_id(0), "d@h");
    assert_eq!(net.trades()[0].seller, net.firm_index("d").unwrap());
    let r = find_equilibria(&ind.profile, &SearchConfig::new(0.0, 6.0, 0.25)).unwrap();
    let salaries: Vec<f64> = r.records.iter().map(|x| x.prices[0]).collect();
    let expected: Vec<f64> = (4..=20).map(|k| k as f64 * 0.25).collect();
    assert_eq!(salaries, expected);
    assert!(ind.warnings.is_empty());
}

#[test]
fn assignment_matching_market() {
    let m = MatchingMarket {
        hospitals: vec![s("h1"), s("h2")],
        doctors: vec![s("d1"), s("d2")],
        hospital_utilities: vec![
            vec![(vec![], s("0")), (vec![s("d1")], s("4 - p[d1]")), (vec![s("d2")], s("2 - p[d2]"))],
            vec![(vec![], s("0")), (vec![s("d1")], s("3 - p[d1]")), (vec![s("d2")], s("3 - p[d2]"))],
        ],
        doctor_utilities: vec![
            DoctorPrefs { values: vec![(s("h1"), s("p[h1]")), (s("h2"), s("p[h2]"))], outside: 0.0 },
            DoctorPrefs { values: vec![(s("h1"), s("p[h1]")), (s("h2"), s("p[h2]"))], outside: 0.0 },
        ],
    };
    let ind = induce_from_matching(&m).unwrap();
    let net = ind.profile.network();
    assert_eq!(net.num_trades(), 4);
    let r = find_equilibria(&ind.profile, &SearchConfig::new(0.0, 5.0, 0.5)).unwrap();
    assert!(!r.records.is_empty());
    let efficient = net.bundle(&["d1@h1", "d2@h2"]).unwrap();
    for rec in &r.records {
        assert!(rec.supports.contains(&efficient), "{:?}", rec.prices);
    }
}

#[test]
fn matching_without_doctors() {
    let m = MatchingMarket {
        hospitals: vec![s("h")],
        doctors: vec![],
        hospital_utilities: vec![vec![(vec![], s("0"))]],
        doctor_utilities: vec![],
    };
    let ind = induce_from_matching(&m).unwrap();
    assert_eq!(ind.profile.network().num_trades(), 0);
}

#[test]
fn matching_rejects_bad_input() {
    let mut m = one_by_one();
    m.doctors.push(s("h"));
    m.doctor_utilities.push(DoctorPrefs { values: vec![], outside: 0.0 });
    assert!(induce_from_matching(&m).is_err());
    let mut m = one_by_one();
    m.hospital_utilities[0].push((vec![s("zed")], s("1")));
    assert!(induce_from_matching(&m).is_err());
    let mut m = one_by_one();
    m.doctor_utilities.clear();
    assert!(induce_from_matching(&m).is_err());
}

/// Agent `a` owns the object worth 1 to it; agent `b` values it at 3.
fn two_agents_one_object() -> ExchangeEconomy {
    ExchangeEconomy {
        objects: vec![s("x")],
        agents: vec![s("a"), s("b")],
        endowments: vec![vec![0], vec![]],
        utilities: vec![vec![(vec![], s("t")), (vec![0], s("1 + t"))], vec![(vec![], s("t")), (vec![0], s("3 + t"))]],
    }
}

#[test]
fn exchange_two_agents_one_object() {
    let e = two_agents_one_object();
    let ind = induce_from_exchange(&e).unwrap();
    assert_eq!(ind.profile.network().trade_id(0), "x>b");
    assert_eq!(ind.trade_object, vec![0]);
    let r = find_equilibria(&ind.profile, &SearchConfig::new(0.0, 4.0, 0.25)).unwrap();
    let prices: Vec<f64> = r.records.iter().map(|x| x.prices[0]).collect();
    assert_eq!(prices, (4..=12).map(|k| k as f64 * 0.25).collect::<Vec<_>>());
    assert_eq!(e.equilibrium_allocation(&[2.0], 1e-9).unwrap(), Some(vec![Bundle::EMPTY, Bundle::singleton(0)]));
    assert_eq!(e.equilibrium_allocation(&[0.5], 1e-9).unwrap(), None);
    assert_eq!(e.equilibrium_allocation(&[3.5], 1e-9).unwrap(), None);
    assert_eq!(e.equilibrium_allocation(&[-1.0], 1e-9).unwrap(), None);
    let alloc = e.equilibrium_allocation(&[2.0], 1e-9).unwrap().unwrap();
    assert_eq!(allocation_support(&ind, &alloc), Bundle::singleton(0));
}

#[test]
fn exchange_three_agents_two_objects_has_four_trades() {
    let e = ExchangeEconomy {
        objects: vec![s("x"), s("y")],
        agents: vec![s("a"), s("b"), s("c")],
        endowments: vec![vec![0], vec![1], vec![]],
        utilities: vec![vec![(vec![], s("t"))]; 3],
    };
    let ind = induce_from_exchange(&e).unwrap();
    let net = ind.profile.network();
    let ids: Vec<&str> = (0..net.num_trades()).map(|t| net.trade_id(t)).collect();
    assert_eq!(ids, vec!["x>b", "x>c", "y>a", "y>c"]);
    assert_eq!(ind.trade_object, vec![0, 0, 1, 1]);
}

#[test]
fn single_agent_exchange() {
    let e = ExchangeEconomy {
        objects: vec![s("x")],
        agents: vec![s("a")],
        endowments: vec![vec![0]],
        utilities: vec![vec![(vec![], s("t")), (vec![0], s("2 + t"))]],
    };
    let ind = induce_from_exchange(&e).unwrap();
    assert_eq!(ind.profile.network().num_trades(), 0);
    assert!(uniform_price_project(&ind, &[]).is_err());
    assert_eq!(uniform_price_lift(&ind, &[1.0]).unwrap(), Vec::<f64>::new());
    assert_eq!(e.equilibrium_allocation(&[1.0], 1e-9).unwrap(), Some(vec![Bundle::singleton(0)]));
}

#[test]
fn exchange_rejects_bad_input() {
    let mut e = two_agents_one_object();
    e.endowments = vec![vec![0], vec![0]];
    assert!(induce_from_exchange(&e).is_err());
    let mut e = two_agents_one_object();
    e.endowments = vec![vec![], vec![]];
    assert!(induce_from_exchange(&e).is_err());
    let mut e = two_agents_one_object();
    e.utilities[0].push((vec![3], s("t")));
    assert!(induce_from_exchange(&e).is_err());
}

#[test]
fn project_and_lift() {
    let e = ExchangeEconomy {
        objects: vec![s("x"), s("y")],
        agents: vec![s("a"), s("b"), s("c")],
        endowments: vec![vec![0], vec![1], vec![]],
        utilities: vec![vec![(vec![], s("t"))]; 3],
    };
    let ind = induce_from_exchange(&e).unwrap();
    assert_eq!(uniform_price_project(&ind, &[1.0, 2.0, 0.5, -1.0]).unwrap(), vec![2.0, 0.5]);
    assert_eq!(uniform_price_lift(&ind, &[1.5, 3.0]).unwrap(), vec![1.5, 1.5, 3.0, 3.0]);
    assert!(uniform_price_lift(&ind, &[-0.5, 3.0]).is_err());
    assert!(uniform_price_lift(&ind, &[1.0]).is_err());
    assert!(uniform_price_project(&ind, &[1.0]).is_err());
}

#[test]
fn economy_equilibria_lift_to_network_equilibria() {
    for seed in 0..12 {
        let e = random_exchange(seed);
        let ind = induce_from_exchange(&e).unwrap();
        let k = e.objects.len();
        for q in grid_points(Bundle::full(k), &Grid::new(0.0, 5.0, 0.5), k) {
            if e.equilibrium_allocation(&q, 1e-7).unwrap().is_some() && !ind.trade_object.is_empty() {
                let p = uniform_price_lift(&ind, &q).unwrap();
                assert!(is_equilibrium(&ind.profile, &p, EPS_EQ, 1e-9).unwrap().is_some(), "seed {seed} q {q:?}");
            }
        }
    }
}

#[test]
fn network_equilibria_project_to_economy_equilibria() {
    for seed in 0..12 {
        let e = random_exchange(seed);
        let ind = induce_from_exchange(&e).unwrap();
        if ind.trade_object.is_empty() {
            continue;
        }
        let mut cfg = SearchConfig::new(-1.0, 5.0, 0.5);
        cfg.max_records = 200;
        for rec in find_equilibria(&ind.profile, &cfg).unwrap().records {
            assert!(rec.prices.iter().all(|x| *x >= -1e-7), "seed {seed}: {:?}", rec.prices);
            let q = uniform_price_project(&ind, &rec.prices).unwrap();
            assert!(e.equilibrium_allocation(&q, 1e-7).unwrap().is_some(), "seed {seed}: {:?}", rec.prices);
        }
    }
}
