//! Trading networks induced by two-sided matching markets and by exchange
//! economies, with price conversions between an economy and its network.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::model::{Bundle, TradeNetwork};
use crate::properties::{check_aggregate_law, check_full_substitutability, Grid, Law, PairSource, Variant};
use crate::utility::{make_unit_supply, FirmUtility, UtilityProfile};
use crate::demand::EPS_TIE;

/// A doctor's value of working at each listed hospital, as an expression in
/// the salary `p[hospital]`, and the value of staying unemployed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoctorPrefs {
    pub values: Vec<(String, String)>,
    pub outside: f64,
}

/// Hospitals hire sets of doctors; each hospital table maps doctor sets to an
/// expression in the salaries `p[doctor]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchingMarket {
    pub hospitals: Vec<String>,
    pub doctors: Vec<String>,
    pub hospital_utilities: Vec<Vec<(Vec<String>, String)>>,
    pub doctor_utilities: Vec<DoctorPrefs>,
}

/// An induced profile plus any sampled precondition warnings.
#[derive(Debug, Clone)]
pub struct Induced {
    pub profile: UtilityProfile,
    pub warnings: Vec<String>,
}

/// Trade id of doctor `d` working at hospital `h`.
pub fn matching_trade_id(h: &str, d: &str) -> String {
    format!("{d}@{h}")
}

fn distinct(names: &[&str]) -> Result<()> {
    for (i, a) in names.iter().enumerate() {
        if names[..i].contains(a) {
            return Err(Error::InvalidMarket(format!("name `{a}` used twice")));
        }
    }
    Ok(())
}

fn sampled_warnings(profile: &UtilityProfile, firms: &[usize], hi: f64) -> Vec<String> {
    let n = profile.network().num_trades();
    let pairs = PairSource::Grid(Grid::new(0.0, hi, (hi / 6.0).max(0.25)));
    let mut out = Vec::new();
    for &f in firms {
        let u = profile.firm(f);
        if u.scope().len() > 4 {
            continue;
        }
        if !check_full_substitutability(u, Variant::Weak, &pairs, n, EPS_TIE).map(|r| r.passed()).unwrap_or(false) {
            out.push(format!("{} fails sampled gross substitutability", u.name()));
        }
        if !check_aggregate_law(u, Law::Demand, false, &pairs, n, EPS_TIE).map(|r| r.passed()).unwrap_or(false) {
            out.push(format!("{} fails the sampled law of aggregate demand", u.name()));
        }
    }
    out
}

/// One trade per hospital-doctor pair, sold by the doctor to the hospital.
/// Doctors are unit-supply sellers; multi-hospital doctor bundles are infeasible.
pub fn induce_from_matching(m: &MatchingMarket) -> Result<Induced> {
    if m.hospital_utilities.len() != m.hospitals.len() || m.doctor_utilities.len() != m.doctors.len() {
        return Err(Error::InvalidMarket("one utility table per hospital and per doctor is required".into()));
    }
    let names: Vec<&str> = m.hospitals.iter().chain(&m.doctors).map(String::as_str).collect();
    distinct(&names)?;
    let ids: Vec<(String, String, String)> = m
        .hospitals
        .iter()
        .flat_map(|h| m.doctors.iter().map(move |d| (matching_trade_id(h, d), d.clone(), h.clone())))
        .collect();
    let spec: Vec<(&str, &str, &str)> = ids.iter().map(|(a, b, c)| (a.as_str(), b.as_str(), c.as_str())).collect();
    let net = TradeNetwork::with_firms(&names, &spec)?;
    let mut us = Vec::new();
    for (hi, h) in m.hospitals.iter().enumerate() {
        let resolve = |sym: &str| net.trade_index(&matching_trade_id(h, sym));
        let mut entries = Vec::new();
        for (docs, text) in &m.hospital_utilities[hi] {
            let mut b = Bundle::EMPTY;
            for d in docs {
                let t = resolve(d).ok_or_else(|| Error::UnknownTrade(format!("doctor `{d}` at hospital `{h}`")))?;
                b = b.insert(t);
            }
            entries.push((b, parse(text, &resolve)?));
        }
        us.push(FirmUtility::new(&net, hi, entries)?);
    }
    for (di, d) in m.doctors.iter().enumerate() {
        let f = m.hospitals.len() + di;
        let resolve = |sym: &str| net.trade_index(&matching_trade_id(sym, d));
        let mut exprs = Vec::new();
        for (h, text) in &m.doctor_utilities[di].values {
            let t = resolve(h).ok_or_else(|| Error::UnknownTrade(format!("hospital `{h}` for doctor `{d}`")))?;
            exprs.push((t, parse(text, &resolve)?));
        }
        us.push(make_unit_supply(&net, f, exprs, m.doctor_utilities[di].outside)?);
    }
    let profile = UtilityProfile::new(net, us)?;
    let warnings = sampled_warnings(&profile, &(0..m.hospitals.len()).collect::<Vec<_>>(), 6.0);
    Ok(Induced { profile, warnings })
}

/// Agents own disjoint sets of objects; each utility table maps object sets to
/// an expression in the net money transfer `t` received.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExchangeEconomy {
    pub objects: Vec<String>,
    pub agents: Vec<String>,
    /// Object indices owned by each agent.
    pub endowments: Vec<Vec<usize>>,
    /// Per agent: (object indices, expression in `t`). Unlisted object sets
    /// are valued by free disposal (best listed subset); sets with no listed
    /// subset are infeasible.
    pub utilities: Vec<Vec<(Vec<usize>, String)>>,
}

/// Placeholder variable for the transfer `t` while building expressions.
const TRANSFER_VAR: usize = 63;

impl ExchangeEconomy {
    fn validate(&self) -> Result<()> {
        let k = self.objects.len();
        if k > 16 {
            return Err(Error::InvalidMarket("at most 16 objects".into()));
        }
        if self.endowments.len() != self.agents.len() || self.utilities.len() != self.agents.len() {
            return Err(Error::InvalidMarket("one endowment and one utility table per agent are required".into()));
        }
        let names: Vec<&str> = self.agents.iter().map(String::as_str).collect();
        distinct(&names)?;
        let mut owner = vec![None; k];
        for (a, xs) in self.endowments.iter().enumerate() {
            for &x in xs {
                if x >= k {
                    return Err(Error::InvalidMarket(format!("unknown object #{x}")));
                }
                if owner[x].replace(a).is_some() {
                    return Err(Error::InvalidMarket(format!("object `{}` has two owners", self.objects[x])));
                }
            }
        }
        if let Some(x) = owner.iter().position(|o| o.is_none()) {
            return Err(Error::InvalidMarket(format!("object `{}` has no owner", self.objects[x])));
        }
        for table in &self.utilities {
            for (xs, _) in table {
                if xs.iter().any(|&x| x >= k) {
                    return Err(Error::InvalidMarket("utility table names an unknown object".into()));
                }
            }
        }
        Ok(())
    }

    fn owner(&self, x: usize) -> usize {
        self.endowments.iter().position(|xs| xs.contains(&x)).unwrap()
    }

    fn endowment(&self, a: usize) -> Bundle {
        Bundle::from_indices(self.endowments[a].iter().copied())
    }

    /// Parsed utility entries of agent `a` with `t` as [`TRANSFER_VAR`].
    fn entries(&self, a: usize) -> Result<Vec<(Bundle, Expr)>> {
        self.utilities[a]
            .iter()
            .map(|(xs, text)| {
                let e = parse(text, &|s: &str| (s == "t").then_some(TRANSFER_VAR))?;
                Ok((Bundle::from_indices(xs.iter().copied()), e))
            })
            .collect()
    }

    /// ũ(Y, t) with free disposal, `None` when no listed subset of Y exists.
    fn value(entries: &[(Bundle, Expr)], y: Bundle, t: f64) -> Option<f64> {
        let mut vars = vec![0.0; TRANSFER_VAR + 1];
        vars[TRANSFER_VAR] = t;
        entries.iter().filter(|(b, _)| b.is_subset(y)).map(|(_, e)| e.eval(&vars)).reduce(f64::max)
    }

    /// Demanded object sets of agent `a` at object prices `q`.
    pub fn demand(&self, a: usize, q: &[f64], eps: f64) -> Result<Vec<Bundle>> {
        let entries = self.entries(a)?;
        let own = self.endowment(a);
        let vals: Vec<(Bundle, f64)> = Bundle::full(self.objects.len())
            .subsets()
            .filter_map(|y| {
                let t: f64 = own.difference(y).iter().map(|x| q[x]).sum::<f64>() - y.difference(own).iter().map(|x| q[x]).sum::<f64>();
                Self::value(&entries, y, t).filter(|v| v.is_finite()).map(|v| (y, v))
            })
            .collect();
        let best = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
        Ok(vals.into_iter().filter(|v| v.1 >= best - eps).map(|v| v.0).collect())
    }

    /// An allocation clearing the economy at `q`, if one exists. Demanded sets
    /// are tried in bitset order per agent, so ties go to the lowest agent.
    pub fn equilibrium_allocation(&self, q: &[f64], eps: f64) -> Result<Option<Vec<Bundle>>> {
        if q.iter().any(|x| *x < 0.0) {
            return Ok(None);
        }
        let demands: Vec<Vec<Bundle>> = (0..self.agents.len()).map(|a| self.demand(a, q, eps)).collect::<Result<_>>()?;
        let all = Bundle::full(self.objects.len());
        let mut chosen = Vec::new();
        Ok(partition(&demands, 0, Bundle::EMPTY, all, &mut chosen).then_some(chosen))
    }
}

fn partition(demands: &[Vec<Bundle>], a: usize, used: Bundle, all: Bundle, chosen: &mut Vec<Bundle>) -> bool {
    if a == demands.len() {
        return used == all;
    }
    for &y in &demands[a] {
        if y.intersection(used).is_empty() {
            chosen.push(y);
            if partition(demands, a + 1, used.union(y), all, chosen) {
                return true;
            }
            chosen.pop();
        }
    }
    false
}

/// A network induced by an exchange economy, remembering each trade's object.
#[derive(Debug, Clone)]
pub struct InducedExchange {
    pub economy: ExchangeEconomy,
    pub profile: UtilityProfile,
    pub trade_object: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Trade id of agent `to` buying object `x`.
pub fn exchange_trade_id(x: &str, to: &str) -> String {
    format!("{x}>{to}")
}

fn sum(terms: Vec<Expr>) -> Expr {
    terms.into_iter().reduce(Expr::add).unwrap_or(Expr::Const(0.0))
}

/// Trades (x, owner, buyer) for every object and every other agent. A firm's
/// utility is ũ(X_f(Ψ), T⁺) + Σ_sales min(p, 0) − Σ_purchases min(p, 0), where
/// T⁺ is the transfer computed with prices clipped at zero.
pub fn induce_from_exchange(e: &ExchangeEconomy) -> Result<InducedExchange> {
    e.validate()?;
    let mut ids = Vec::new();
    let mut trade_object = Vec::new();
    for (x, name) in e.objects.iter().enumerate() {
        let owner = e.owner(x);
        for (b, agent) in e.agents.iter().enumerate() {
            if b != owner {
                ids.push((exchange_trade_id(name, agent), e.agents[owner].clone(), agent.clone()));
                trade_object.push(x);
            }
        }
    }
    let spec: Vec<(&str, &str, &str)> = ids.iter().map(|(a, b, c)| (a.as_str(), b.as_str(), c.as_str())).collect();
    let net = TradeNetwork::with_firms(&e.agents, &spec)?;
    let mut us = Vec::new();
    for a in 0..e.agents.len() {
        let entries = e.entries(a)?;
        let own = e.endowment(a);
        let up = net.upstream(a);
        let down = net.downstream(a);
        let mut table = Vec::new();
        for psi in net.trades_of(a).subsets() {
            let sold: Vec<usize> = psi.intersection(down).iter().map(|t| trade_object[t]).collect();
            let sold_set = Bundle::from_indices(sold.iter().copied());
            if sold_set.len() != sold.len() {
                continue;
            }
            let bought = Bundle::from_indices(psi.intersection(up).iter().map(|t| trade_object[t]));
            let y = own.difference(sold_set).union(bought);
            let options: Vec<&Expr> = entries.iter().filter(|(b, _)| b.is_subset(y)).map(|(_, x)| x).collect();
            if options.is_empty() {
                continue;
            }
            let clipped = |t: usize| Expr::Max(vec![Expr::Var(t), Expr::Const(0.0)]);
            let negative = |t: usize| Expr::Min(vec![Expr::Var(t), Expr::Const(0.0)]);
            let transfer = sum(psi.intersection(down).iter().map(clipped).collect())
                .sub(sum(psi.intersection(up).iter().map(clipped).collect()));
            let extra = sum(psi.intersection(down).iter().map(negative).collect())
                .sub(sum(psi.intersection(up).iter().map(negative).collect()));
            let values: Vec<Expr> = options.iter().map(|x| x.replace_var(TRANSFER_VAR, &transfer)).collect();
            let base = if values.len() == 1 { values.into_iter().next().unwrap() } else { Expr::Max(values) };
            table.push((psi, if psi.is_empty() { base } else { base.add(extra) }));
        }
        us.push(FirmUtility::new(&net, a, table)?);
    }
    let profile = UtilityProfile::new(net, us)?;
    let warnings = sampled_warnings(&profile, &(0..e.agents.len()).collect::<Vec<_>>(), 6.0);
    Ok(InducedExchange { economy: e.clone(), profile, trade_object, warnings })
}

/// Object prices from network prices: each object's highest trade price.
pub fn uniform_price_project(n: &InducedExchange, p: &[f64]) -> Result<Vec<f64>> {
    if p.len() != n.trade_object.len() {
        return Err(Error::NotInducedNetwork(format!("expected {} trade prices, got {}", n.trade_object.len(), p.len())));
    }
    (0..n.economy.objects.len())
        .map(|x| {
            n.trade_object
                .iter()
                .zip(p)
                .filter(|(o, _)| **o == x)
                .map(|(_, v)| *v)
                .reduce(f64::max)
                .ok_or_else(|| Error::NotInducedNetwork(format!("object `{}` has no trades", n.economy.objects[x])))
        })
        .collect()
}

/// Network prices from object prices: every trade priced at its object's price.
pub fn uniform_price_lift(n: &InducedExchange, q: &[f64]) -> Result<Vec<f64>> {
    if q.len() != n.economy.objects.len() {
        return Err(Error::NotInducedNetwork(format!("expected {} object prices, got {}", n.economy.objects.len(), q.len())));
    }
    if let Some(x) = q.iter().position(|v| *v < 0.0) {
        return Err(Error::InvalidMarket(format!("object `{}` has a negative price", n.economy.objects[x])));
    }
    Ok(n.trade_object.iter().map(|&x| q[x]).collect())
}

/// The network trade set realizing an economy allocation.
pub fn allocation_support(n: &InducedExchange, alloc: &[Bundle]) -> Bundle {
    let net = n.profile.network();
    Bundle::from_indices((0..n.trade_object.len()).filter(|&t| {
        let tr = &net.trades()[t];
        alloc[tr.buyer].contains(n.trade_object[t])
    }))
}
