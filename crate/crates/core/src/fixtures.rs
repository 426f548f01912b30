//! Small hand-built profiles used throughout tests, benches and the CLI samples.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adapters::ExchangeEconomy;
use crate::model::{Bundle, FirmId, TradeNetwork};
use crate::utility::{make_quasilinear, FirmUtility, UtilityProfile};

/// A profile with a distinguished firm whose demand is of interest.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub profile: UtilityProfile,
    pub focus: FirmId,
}

impl Fixture {
    pub fn focus_utility(&self) -> &FirmUtility {
        self.profile.firm(self.focus)
    }
}

fn sellers_at_cost_zero(net: &TradeNetwork, names: &[&str]) -> Vec<FirmUtility> {
    names
        .iter()
        .map(|s| {
            let f = net.firm_index(s).unwrap();
            let mut v = vec![(Bundle::EMPTY, 0.0)];
            v.extend(net.downstream(f).iter().map(|t| (Bundle::singleton(t), 0.0)));
            make_quasilinear(net, f, &v).unwrap()
        })
        .collect()
}

/// Intermediary `f` buying `a1`, `a2` from `s1`, `s2` and selling `b1`, `b2`
/// to `b1`, `b2`. Buying and selling one unit each is frictionless, while
/// handling all four trades carries convex costs in the average prices.
/// Price order is (a1, a2, b1, b2).
pub fn star_intermediary() -> Fixture {
    let net = TradeNetwork::build(&[("a1", "s1", "f"), ("a2", "s2", "f"), ("b1", "f", "b1"), ("b2", "f", "b2")]).unwrap();
    let f = net.firm_index("f").unwrap();
    let fu = FirmUtility::from_texts(
        &net,
        f,
        &[
            (&[], "0"),
            (&["a1", "b1"], "2 - p[a1] + p[b1]"),
            (&["a1", "b2"], "2 - p[a1] + p[b2]"),
            (&["a2", "b1"], "2 - p[a2] + p[b1]"),
            (&["a2", "b2"], "2 - p[a2] + p[b2]"),
            (&["a1", "a2", "b1", "b2"], "4 - exp((p[a1] + p[a2])/2 - 1) - exp(1 - (p[b1] + p[b2])/2)"),
        ],
    )
    .unwrap();
    let mut us = sellers_at_cost_zero(&net, &["s1", "s2"]);
    us.push(fu);
    for (name, t) in [("b1", "b1"), ("b2", "b2")] {
        let b = net.firm_index(name).unwrap();
        us.push(FirmUtility::from_texts(&net, b, &[(&[], "0"), (&[t], &format!("2 - p[{t}]"))]).unwrap());
    }
    Fixture { profile: UtilityProfile::new(net, us).unwrap(), focus: f }
}

/// Buyer `f` of three trades from three sellers. The pair {w1, w2} is worth 2,
/// all three are worth a logistic amount, and the third seller cannot sell alone.
pub fn logistic_bundle_buyer() -> Fixture {
    let net = TradeNetwork::build(&[("w1", "s1", "f"), ("w2", "s2", "f"), ("w3", "s3", "f")]).unwrap();
    let f = net.firm_index("f").unwrap();
    let fu = FirmUtility::from_texts(
        &net,
        f,
        &[
            (&[], "0"),
            (&["w1", "w2"], "2 - p[w1] - p[w2]"),
            (&["w1", "w2", "w3"], "1 - 1/(1 + exp(-(p[w1] + p[w2] + p[w3])))"),
        ],
    )
    .unwrap();
    let mut us = sellers_at_cost_zero(&net, &["s1", "s2"]);
    let s3 = net.firm_index("s3").unwrap();
    us.push(FirmUtility::from_texts(&net, s3, &[(&[], "0")]).unwrap());
    us.push(fu);
    Fixture { profile: UtilityProfile::new(net, us).unwrap(), focus: f }
}

/// Buyer `f` of three trades whose full bundle value bends with the total price.
pub fn three_trade_cone() -> Fixture {
    let net = TradeNetwork::build(&[("w1", "s1", "f"), ("w2", "s2", "f"), ("w3", "s3", "f")]).unwrap();
    let f = net.firm_index("f").unwrap();
    let all = "piecewise{ p[w1]+p[w2]+p[w3] <= 0 : 4 - p[w1] - p[w2] - p[w3]; \
               p[w1]+p[w2]+p[w3] <= 6 : 4 - 3*sqrt((p[w1]+p[w2]+p[w3])/6); \
               else : 7 - p[w1] - p[w2] - p[w3] }";
    let fu = FirmUtility::from_texts(
        &net,
        f,
        &[
            (&[], "0"),
            (&["w1"], "3 - p[w1]"),
            (&["w2"], "3 - p[w2]"),
            (&["w3"], "3 - p[w3]"),
            (&["w1", "w2"], "4 - p[w1] - p[w2]"),
            (&["w1", "w3"], "4 - p[w1] - p[w3]"),
            (&["w2", "w3"], "4 - p[w2] - p[w3]"),
            (&["w1", "w2", "w3"], all),
        ],
    )
    .unwrap();
    let mut us = sellers_at_cost_zero(&net, &["s1", "s2", "s3"]);
    us.push(fu);
    Fixture { profile: UtilityProfile::new(net, us).unwrap(), focus: f }
}

/// Piecewise utility of the pair {w1, w2} used by [`piecewise_pair_buyer`].
pub const PIECEWISE_PAIR: &str = "piecewise{ p[w1]+p[w2] <= 2 : 4 - p[w1] - p[w2]; \
     p[w1]+p[w2] <= 4 : 2 - ((p[w1]+p[w2])^2 - 4)/12; else : 5 - p[w1] - p[w2] }";

fn piecewise_buyer(net: &TradeNetwork) -> FirmUtility {
    let f = net.firm_index("f").unwrap();
    FirmUtility::from_texts(
        net,
        f,
        &[(&[], "0"), (&["w1"], "3 - p[w1]"), (&["w2"], "3 - p[w2]"), (&["w1", "w2"], PIECEWISE_PAIR)],
    )
    .unwrap()
}

/// Buyer `f` of two trades from a single seller `g`, with a piecewise value
/// for the pair; `g` is a zero-cost unit seller of each trade.
pub fn piecewise_pair_buyer() -> Fixture {
    let net = TradeNetwork::build(&[("w1", "g", "f"), ("w2", "g", "f")]).unwrap();
    let f = net.firm_index("f").unwrap();
    let g = net.firm_index("g").unwrap();
    let gu = FirmUtility::from_texts(&net, g, &[(&[], "0"), (&["w1"], "p[w1]"), (&["w2"], "p[w2]")]).unwrap();
    Fixture { profile: UtilityProfile::new(net.clone(), vec![piecewise_buyer(&net), gu]).unwrap(), focus: f }
}

/// Market of [`piecewise_pair_buyer`] where the seller `g` can also sell both
/// trades at a joint cost of 1.5.
pub fn piecewise_pair_market() -> Fixture {
    let net = TradeNetwork::build(&[("w1", "g", "f"), ("w2", "g", "f")]).unwrap();
    let f = net.firm_index("f").unwrap();
    let g = net.firm_index("g").unwrap();
    let gu = FirmUtility::from_texts(
        &net,
        g,
        &[(&[], "0"), (&["w1"], "p[w1]"), (&["w2"], "p[w2]"), (&["w1", "w2"], "p[w1] + p[w2] - 1.5")],
    )
    .unwrap();
    Fixture { profile: UtilityProfile::new(net.clone(), vec![piecewise_buyer(&net), gu]).unwrap(), focus: f }
}

fn counterparties(net: &TradeNetwork, focus: FirmId, focus_utility: FirmUtility) -> UtilityProfile {
    let us = (0..net.num_firms())
        .map(|f| {
            if f == focus {
                return focus_utility.clone();
            }
            let mut v = vec![(Bundle::EMPTY, 0.0)];
            v.extend(net.downstream(f).iter().map(|t| (Bundle::singleton(t), 0.0)));
            v.extend(net.upstream(f).iter().map(|t| (Bundle::singleton(t), 2.0)));
            make_quasilinear(net, f, &v).unwrap()
        })
        .collect();
    UtilityProfile::new(net.clone(), us).unwrap()
}

/// Quasi-linear unit-demand buyer `f` of `x` (worth 3) or `y` (worth 2).
pub fn unit_demand_pair_buyer() -> Fixture {
    let net = TradeNetwork::build(&[("x", "s1", "f"), ("y", "s2", "f")]).unwrap();
    let f = net.firm_index("f").unwrap();
    let u = make_quasilinear(&net, f, &[(Bundle::EMPTY, 0.0), (Bundle::singleton(0), 3.0), (Bundle::singleton(1), 2.0)]).unwrap();
    Fixture { profile: counterparties(&net, f, u), focus: f }
}

/// Quasi-linear intermediary `f` buying `a` and selling `b`, where the input
/// and output are complements (substitutes in the network sense).
pub fn two_sided_complement() -> Fixture {
    let net = TradeNetwork::build(&[("a", "s", "f"), ("b", "f", "c")]).unwrap();
    let f = net.firm_index("f").unwrap();
    let u = make_quasilinear(
        &net,
        f,
        &[(Bundle::EMPTY, 0.0), (Bundle::singleton(0), 0.5), (Bundle::singleton(1), -0.5), (Bundle::full(2), 1.0)],
    )
    .unwrap();
    Fixture { profile: counterparties(&net, f, u), focus: f }
}

/// Quasi-linear buyer `f` of `x`, `y`, `z` worth 3, 2 and 1.5, using at most
/// two units, with a small extra cost for taking all three.
pub fn capped_additive_buyer() -> Fixture {
    let net = TradeNetwork::build(&[("x", "s1", "f"), ("y", "s2", "f"), ("z", "s3", "f")]).unwrap();
    let f = net.firm_index("f").unwrap();
    let vals: Vec<(Bundle, f64)> = Bundle::full(3)
        .subsets()
        .map(|b| {
            let mut items: Vec<f64> = b.iter().map(|t| [3.0, 2.0, 1.5][t]).collect();
            items.sort_by(|a, b| b.total_cmp(a));
            (b, items.iter().take(2).sum::<f64>() - if b.len() == 3 { 0.25 } else { 0.0 })
        })
        .collect();
    let u = make_quasilinear(&net, f, &vals).unwrap();
    Fixture { profile: counterparties(&net, f, u), focus: f }
}

/// Random quasi-linear assignment market: one or two unit-supply sellers with
/// integer costs, one to three unit-demand buyers with integer values in
/// [0, 5], at most five firms and `max_trades` trades (one per linked pair).
pub fn random_assignment(seed: u64, max_trades: usize) -> UtilityProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sellers = rng.gen_range(1..=2usize);
    let buyers = rng.gen_range(1..=(5 - sellers).min(3));
    let mut links: Vec<(usize, usize)> = (0..sellers).flat_map(|s| (0..buyers).map(move |b| (s, b))).collect();
    links.shuffle(&mut rng);
    let k = rng.gen_range(1..=links.len().min(max_trades.max(1)));
    links.truncate(k);
    links.sort();
    let names: Vec<(String, String, String)> =
        links.iter().map(|(s, b)| (format!("t{s}{b}"), format!("s{s}"), format!("b{b}"))).collect();
    let spec: Vec<(&str, &str, &str)> = names.iter().map(|(a, b, c)| (a.as_str(), b.as_str(), c.as_str())).collect();
    let firms: Vec<String> = (0..sellers).map(|s| format!("s{s}")).chain((0..buyers).map(|b| format!("b{b}"))).collect();
    let net = TradeNetwork::with_firms(&firms, &spec).unwrap();
    let us = (0..net.num_firms())
        .map(|f| {
            let seller = f < sellers;
            let mut v = vec![(Bundle::EMPTY, 0.0)];
            let side = if seller { net.downstream(f) } else { net.upstream(f) };
            for t in side.iter() {
                let x = rng.gen_range(0..=5) as f64;
                v.push((Bundle::singleton(t), if seller { -x } else { x }));
            }
            make_quasilinear(&net, f, &v).unwrap()
        })
        .collect();
    UtilityProfile::new(net, us).unwrap()
}

/// Random exchange economy with one to three agents and objects. Each agent
/// values an object set at the sum of its `k` best integer object values in
/// [0, 5] (a gross-substitutes valuation) plus the transfer received.
pub fn random_exchange(seed: u64) -> ExchangeEconomy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agents = rng.gen_range(1..=3usize);
    let objects = rng.gen_range(1..=3usize);
    let mut endowments = vec![Vec::new(); agents];
    for x in 0..objects {
        endowments[rng.gen_range(0..agents)].push(x);
    }
    let utilities = (0..agents)
        .map(|_| {
            let values: Vec<u32> = (0..objects).map(|_| rng.gen_range(0..=5)).collect();
            let k = rng.gen_range(1..=objects);
            Bundle::full(objects)
                .subsets()
                .map(|y| {
                    let mut vs: Vec<u32> = y.iter().map(|x| values[x]).collect();
                    vs.sort_unstable_by(|a, b| b.cmp(a));
                    let v: u32 = vs.iter().take(k).sum();
                    (y.iter().collect(), format!("{v} + t"))
                })
                .collect()
        })
        .collect();
    ExchangeEconomy {
        objects: (0..objects).map(|x| format!("x{x}")).collect(),
        agents: (0..agents).map(|a| format!("a{a}")).collect(),
        endowments,
        utilities,
    }
}
