//! Trading-network topology, bundles, prices and arrangements.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of trades in one network.
pub const MAX_TRADES: usize = 24;

/// Dense index of a firm inside a [`TradeNetwork`].
pub type FirmId = usize;

/// A price for every trade of a network, indexed by dense trade index.
pub type PriceVector = Vec<f64>;

/// A set of trades stored as a bitset over dense trade indices.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bundle(pub u32);

impl Bundle {
    pub const EMPTY: Bundle = Bundle(0);

    pub fn singleton(trade: usize) -> Bundle {
        Bundle(1 << trade)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Bundle {
        Bundle(indices.into_iter().fold(0, |acc, i| acc | (1 << i)))
    }

    /// The bundle of all trades with index below `n`.
    pub fn full(n: usize) -> Bundle {
        if n >= 32 {
            Bundle(u32::MAX)
        } else {
            Bundle((1u32 << n) - 1)
        }
    }

    pub fn contains(self, trade: usize) -> bool {
        self.0 >> trade & 1 == 1
    }

    pub fn insert(self, trade: usize) -> Bundle {
        Bundle(self.0 | 1 << trade)
    }

    pub fn union(self, other: Bundle) -> Bundle {
        Bundle(self.0 | other.0)
    }

    pub fn intersection(self, other: Bundle) -> Bundle {
        Bundle(self.0 & other.0)
    }

    pub fn difference(self, other: Bundle) -> Bundle {
        Bundle(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Bundle) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Member trade indices in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |i| bits >> i & 1 == 1)
    }

    /// Every subset of this bundle, starting with the empty set.
    pub fn subsets(self) -> impl Iterator<Item = Bundle> {
        let mask = self.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == mask { None } else { Some((cur.wrapping_sub(mask)) & mask) };
            Some(Bundle(cur))
        })
    }
}

impl fmt::Debug for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// One trade: a potential bilateral transaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub id: String,
    pub seller: FirmId,
    pub buyer: FirmId,
}

/// Position of a firm in the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    TerminalBuyer,
    TerminalSeller,
    Intermediate,
    Isolated,
}

/// A validated trading network.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeNetwork {
    trades: Vec<Trade>,
    firms: Vec<String>,
    upstream: Vec<Bundle>,
    downstream: Vec<Bundle>,
}

impl TradeNetwork {
    /// Builds a network from `(trade-id, seller, buyer)` triples, inferring the
    /// firm set from the endpoints in order of first appearance.
    pub fn build(spec: &[(&str, &str, &str)]) -> Result<TradeNetwork> {
        let mut firms: Vec<String> = Vec::new();
        for (_, s, b) in spec {
            for name in [s, b] {
                if !firms.iter().any(|f| f == name) {
                    firms.push(name.to_string());
                }
            }
        }
        Self::with_firms(&firms, spec)
    }

    /// Builds a network over an explicit firm list, which may contain firms
    /// without trades.
    pub fn with_firms<S: AsRef<str>>(firms: &[S], spec: &[(&str, &str, &str)]) -> Result<TradeNetwork> {
        if spec.len() > MAX_TRADES {
            return Err(Error::TooManyTrades(spec.len()));
        }
        let firms: Vec<String> = firms.iter().map(|f| f.as_ref().to_string()).collect();
        let mut index: HashMap<&str, FirmId> = HashMap::new();
        for (i, f) in firms.iter().enumerate() {
            if index.insert(f.as_str(), i).is_some() {
                return Err(Error::UnknownFirm(format!("{f} (listed twice)")));
            }
        }
        let mut trades = Vec::with_capacity(spec.len());
        for (id, s, b) in spec {
            if trades.iter().any(|t: &Trade| t.id == *id) {
                return Err(Error::DuplicateTradeId(id.to_string()));
            }
            if s == b {
                return Err(Error::SelfLoop(id.to_string()));
            }
            let seller = *index.get(s).ok_or_else(|| Error::UnknownFirm(s.to_string()))?;
            let buyer = *index.get(b).ok_or_else(|| Error::UnknownFirm(b.to_string()))?;
            trades.push(Trade { id: id.to_string(), seller, buyer });
        }
        let mut upstream = vec![Bundle::EMPTY; firms.len()];
        let mut downstream = vec![Bundle::EMPTY; firms.len()];
        for (i, t) in trades.iter().enumerate() {
            upstream[t.buyer] = upstream[t.buyer].insert(i);
            downstream[t.seller] = downstream[t.seller].insert(i);
        }
        Ok(TradeNetwork { trades, firms, upstream, downstream })
    }

    pub fn trades(&self) -> &[Trade] {
        &self.trades
    }

    pub fn firms(&self) -> &[String] {
        &self.firms
    }

    pub fn num_trades(&self) -> usize {
        self.trades.len()
    }

    pub fn num_firms(&self) -> usize {
        self.firms.len()
    }

    pub fn all_trades(&self) -> Bundle {
        Bundle::full(self.trades.len())
    }

    pub fn trade_index(&self, id: &str) -> Option<usize> {
        self.trades.iter().position(|t| t.id == id)
    }

    pub fn firm_index(&self, id: &str) -> Option<FirmId> {
        self.firms.iter().position(|f| f == id)
    }

    pub fn firm_name(&self, f: FirmId) -> &str {
        &self.firms[f]
    }

    pub fn trade_id(&self, i: usize) -> &str {
        &self.trades[i].id
    }

    /// Trades bought by `f`.
    pub fn upstream(&self, f: FirmId) -> Bundle {
        self.upstream[f]
    }

    /// Trades sold by `f`.
    pub fn downstream(&self, f: FirmId) -> Bundle {
        self.downstream[f]
    }

    /// All trades in which `f` participates.
    pub fn trades_of(&self, f: FirmId) -> Bundle {
        self.upstream[f].union(self.downstream[f])
    }

    /// Bundle from trade ids.
    pub fn bundle(&self, ids: &[&str]) -> Result<Bundle> {
        let mut b = Bundle::EMPTY;
        for id in ids {
            let i = self.trade_index(id).ok_or_else(|| Error::UnknownTrade(id.to_string()))?;
            b = b.insert(i);
        }
        Ok(b)
    }

    /// Splits `psi` into the trades `f` buys and the trades `f` sells.
    pub fn partition_bundle(&self, f: FirmId, psi: Bundle) -> Result<(Bundle, Bundle)> {
        if f >= self.firms.len() {
            return Err(Error::UnknownFirm(format!("#{f}")));
        }
        Ok((psi.intersection(self.upstream[f]), psi.intersection(self.downstream[f])))
    }

    /// Net trade index |Ψ_{→f}| − |Ψ_{f→}|.
    pub fn net_index(&self, f: FirmId, psi: Bundle) -> i32 {
        psi.intersection(self.upstream[f]).len() as i32 - psi.intersection(self.downstream[f]).len() as i32
    }

    pub fn role(&self, f: FirmId) -> Role {
        match (self.upstream[f].is_empty(), self.downstream[f].is_empty()) {
            (false, true) => Role::TerminalBuyer,
            (true, false) => Role::TerminalSeller,
            (true, true) => Role::Isolated,
            (false, false) => Role::Intermediate,
        }
    }

    pub fn terminal_roles(&self) -> Vec<Role> {
        (0..self.firms.len()).map(|f| self.role(f)).collect()
    }

    /// Human-readable bundle, e.g. `{a1,b2}`.
    pub fn bundle_label(&self, psi: Bundle) -> String {
        let ids: Vec<&str> = psi.iter().map(|i| self.trades[i].id.as_str()).collect();
        format!("{{{}}}", ids.join(","))
    }

    pub fn bundle_ids(&self, psi: Bundle) -> Vec<String> {
        psi.iter().map(|i| self.trades[i].id.clone()).collect()
    }
}

/// Coordinatewise maximum and minimum of two price vectors.
pub fn join_meet_prices(p: &[f64], q: &[f64]) -> Result<(PriceVector, PriceVector)> {
    if p.len() != q.len() {
        return Err(Error::NetworkMismatch(p.len(), q.len()));
    }
    let join = p.iter().zip(q).map(|(a, b)| a.max(*b)).collect();
    let meet = p.iter().zip(q).map(|(a, b)| a.min(*b)).collect();
    Ok((join, meet))
}

/// A trade set together with prices for every trade.
#[derive(Debug, Clone, PartialEq)]
pub struct Arrangement {
    pub bundle: Bundle,
    pub prices: PriceVector,
}
