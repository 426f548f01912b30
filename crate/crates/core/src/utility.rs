//! Per-firm utility tables and the transformations used by the mechanisms.
//!
//! A firm's utility maps each feasible bundle to an expression in the prices
//! of that bundle's trades. Bundles missing from the table are infeasible
//! (utility −∞); evaluation reports them as `None`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::model::{Bundle, FirmId, Role, TradeNetwork};

/// Utility function of one firm.
#[derive(Debug, Clone, PartialEq)]
pub struct FirmUtility {
    firm: FirmId,
    name: String,
    upstream: Bundle,
    downstream: Bundle,
    table: BTreeMap<Bundle, Expr>,
}

impl FirmUtility {
    /// Builds a utility from `(bundle, expression)` entries; expression variables
    /// are dense trade indices of `net`.
    pub fn new(net: &TradeNetwork, firm: FirmId, entries: Vec<(Bundle, Expr)>) -> Result<FirmUtility> {
        if firm >= net.num_firms() {
            return Err(Error::UnknownFirm(format!("#{firm}")));
        }
        let name = net.firm_name(firm).to_string();
        let scope = net.trades_of(firm);
        let mut table = BTreeMap::new();
        for (b, e) in entries {
            if !b.is_subset(scope) {
                return Err(Error::BundleOutOfScope { firm: name, bundle: net.bundle_label(b) });
            }
            let outside = Bundle(e.vars_mask() as u32).difference(b);
            if let Some(t) = outside.iter().next() {
                return Err(Error::UnknownPriceSymbol {
                    firm: name,
                    bundle: net.bundle_label(b),
                    trade: net.trade_id(t).to_string(),
                });
            }
            if table.insert(b, e).is_some() {
                return Err(Error::DuplicateBundle { firm: name, bundle: net.bundle_label(b) });
            }
        }
        if table.is_empty() {
            return Err(Error::AllInfeasible(name));
        }
        Ok(FirmUtility { firm, name, upstream: net.upstream(firm), downstream: net.downstream(firm), table })
    }

    /// Builds a utility from `(trade ids, expression text)` entries.
    pub fn from_texts(net: &TradeNetwork, firm: FirmId, entries: &[(&[&str], &str)]) -> Result<FirmUtility> {
        let mut parsed = Vec::with_capacity(entries.len());
        for (ids, text) in entries {
            let b = net.bundle(ids)?;
            parsed.push((b, parse_expr(net, text, b)?));
        }
        FirmUtility::new(net, firm, parsed)
    }

    pub fn firm(&self) -> FirmId {
        self.firm
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Trades the firm buys.
    pub fn upstream(&self) -> Bundle {
        self.upstream
    }

    /// Trades the firm sells.
    pub fn downstream(&self) -> Bundle {
        self.downstream
    }

    pub fn scope(&self) -> Bundle {
        self.upstream.union(self.downstream)
    }

    /// Feasible bundles with their expressions, in bitset order.
    pub fn entries(&self) -> impl Iterator<Item = (Bundle, &Expr)> {
        self.table.iter().map(|(b, e)| (*b, e))
    }

    pub fn feasible_bundles(&self) -> Vec<Bundle> {
        self.table.keys().copied().collect()
    }

    pub fn expr(&self, psi: Bundle) -> Option<&Expr> {
        self.table.get(&psi)
    }

    /// u^f(Ψ, p); `None` stands for −∞ (infeasible bundle).
    pub fn eval(&self, psi: Bundle, p: &[f64]) -> Option<f64> {
        self.table.get(&psi).map(|e| e.eval(p))
    }

    /// True when every feasible bundle has at most one trade.
    pub fn is_unit_side(&self) -> bool {
        self.table.keys().all(|b| b.len() <= 1)
    }

    /// Signed coefficient of a trade in the firm's transfer: +1 for sales, −1 for purchases.
    pub fn side(&self, trade: usize) -> f64 {
        if self.downstream.contains(trade) {
            1.0
        } else {
            -1.0
        }
    }

    fn with_table(&self, table: BTreeMap<Bundle, Expr>) -> FirmUtility {
        FirmUtility { table, ..self.clone() }
    }
}

/// Parses `text` as the utility expression of bundle `bundle`.
pub fn parse_expr(net: &TradeNetwork, text: &str, bundle: Bundle) -> Result<Expr> {
    let resolve = |id: &str| net.trade_index(id).filter(|i| bundle.contains(*i));
    Ok(expr::parse(text, &resolve)?)
}

/// One utility function per firm of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityProfile {
    network: TradeNetwork,
    firms: Vec<FirmUtility>,
}

impl UtilityProfile {
    pub fn new(network: TradeNetwork, mut utilities: Vec<FirmUtility>) -> Result<UtilityProfile> {
        utilities.sort_by_key(|u| u.firm);
        for f in 0..network.num_firms() {
            match utilities.get(f) {
                Some(u) if u.firm == f => {}
                _ => return Err(Error::MissingUtility(network.firm_name(f).to_string())),
            }
        }
        if utilities.len() != network.num_firms() {
            return Err(Error::UnknownFirm(format!("{} utilities for {} firms", utilities.len(), network.num_firms())));
        }
        Ok(UtilityProfile { network, firms: utilities })
    }

    pub fn network(&self) -> &TradeNetwork {
        &self.network
    }

    pub fn firms(&self) -> &[FirmUtility] {
        &self.firms
    }

    pub fn firm(&self, f: FirmId) -> &FirmUtility {
        &self.firms[f]
    }

    pub fn by_name(&self, name: &str) -> Option<&FirmUtility> {
        self.network.firm_index(name).map(|f| &self.firms[f])
    }

    /// Copy of the profile with firm `f`'s utility replaced.
    pub fn with_firm(&self, u: FirmUtility) -> UtilityProfile {
        let mut out = self.clone();
        let f = u.firm;
        out.firms[f] = u;
        out
    }
}

/// Quasi-linear utility v(Ψ) + Σ sale prices − Σ purchase prices over the
/// bundles with a finite valuation.
pub fn make_quasilinear(net: &TradeNetwork, firm: FirmId, valuation: &[(Bundle, f64)]) -> Result<FirmUtility> {
    if firm >= net.num_firms() {
        return Err(Error::UnknownFirm(format!("#{firm}")));
    }
    let down = net.downstream(firm);
    let entries = valuation
        .iter()
        .filter(|(_, v)| v.is_finite())
        .map(|(b, v)| {
            let terms = b.iter().map(|i| (i, if down.contains(i) { 1.0 } else { -1.0 })).collect();
            (*b, Expr::Affine { constant: *v, terms })
        })
        .collect();
    FirmUtility::new(net, firm, entries)
}

fn check_strictly_monotone(net: &TradeNetwork, trade: usize, e: &Expr, increasing: bool) -> Result<()> {
    let mut p = vec![0.0; net.num_trades()];
    let mut prev: Option<f64> = None;
    for k in -40..=40 {
        let x = k as f64 * 0.25;
        p[trade] = x;
        let v = e.eval(&p);
        if let Some(pv) = prev {
            let ok = if increasing { v > pv } else { v < pv };
            if !ok {
                return Err(Error::NonMonotoneExpr { trade: net.trade_id(trade).to_string(), at: x });
            }
        }
        prev = Some(v);
    }
    Ok(())
}

/// Unit-demand buyer: ∅ ↦ `outside`, each listed purchase ↦ its expression.
pub fn make_unit_demand(net: &TradeNetwork, firm: FirmId, exprs: Vec<(usize, Expr)>, outside: f64) -> Result<FirmUtility> {
    if firm >= net.num_firms() {
        return Err(Error::UnknownFirm(format!("#{firm}")));
    }
    if !net.downstream(firm).is_empty() {
        return Err(Error::NotTerminalBuyer(net.firm_name(firm).to_string()));
    }
    let mut entries = vec![(Bundle::EMPTY, Expr::Const(outside))];
    for (t, e) in exprs {
        if !net.upstream(firm).contains(t) {
            return Err(Error::BundleOutOfScope {
                firm: net.firm_name(firm).to_string(),
                bundle: net.bundle_label(Bundle::singleton(t)),
            });
        }
        check_strictly_monotone(net, t, &e, false)?;
        entries.push((Bundle::singleton(t), e));
    }
    FirmUtility::new(net, firm, entries)
}

/// Unit-supply seller: ∅ ↦ `outside`, each listed sale ↦ its expression.
pub fn make_unit_supply(net: &TradeNetwork, firm: FirmId, exprs: Vec<(usize, Expr)>, outside: f64) -> Result<FirmUtility> {
    if firm >= net.num_firms() {
        return Err(Error::UnknownFirm(format!("#{firm}")));
    }
    if !net.upstream(firm).is_empty() {
        return Err(Error::NotTerminalSeller(net.firm_name(firm).to_string()));
    }
    let mut entries = vec![(Bundle::EMPTY, Expr::Const(outside))];
    for (t, e) in exprs {
        if !net.downstream(firm).contains(t) {
            return Err(Error::BundleOutOfScope {
                firm: net.firm_name(firm).to_string(),
                bundle: net.bundle_label(Bundle::singleton(t)),
            });
        }
        check_strictly_monotone(net, t, &e, true)?;
        entries.push((Bundle::singleton(t), e));
    }
    FirmUtility::new(net, firm, entries)
}

/// Utility of a firm endowed with the option to also carry out the trades of
/// `endowment` at the fixed prices `pbar`:
/// u'(Ψ, p) = max over Ξ ⊆ endowment ∖ Ψ of u(Ψ ∪ Ξ, (p|Ψ, pbar|Ξ)).
pub fn endowment_transform(u: &FirmUtility, endowment: Bundle, pbar: &[f64]) -> Result<FirmUtility> {
    if !endowment.is_subset(u.scope()) {
        return Err(Error::BundleOutOfScope { firm: u.name.clone(), bundle: format!("{endowment:?}") });
    }
    let mut options: BTreeMap<Bundle, Vec<Expr>> = BTreeMap::new();
    for (b, e) in u.entries() {
        for xi in b.intersection(endowment).subsets() {
            let psi = b.difference(xi);
            let mut fixed = e.clone();
            for t in xi.iter() {
                fixed = fixed.replace_var(t, &Expr::Const(pbar[t]));
            }
            options.entry(psi).or_default().push(fixed);
        }
    }
    let table = options
        .into_iter()
        .map(|(b, mut es)| (b, if es.len() == 1 { es.pop().unwrap() } else { Expr::Max(es) }))
        .collect();
    Ok(u.with_table(table))
}

/// The bounded-willingness-to-pay cap: endow every trade at price K for
/// purchases and −K for sales.
pub fn bwp_cap(u: &FirmUtility, num_trades: usize, k: f64) -> Result<FirmUtility> {
    let pbar: Vec<f64> = (0..num_trades)
        .map(|t| if u.downstream.contains(t) { -k } else { k })
        .collect();
    endowment_transform(u, u.scope(), &pbar)
}

/// Replaces the outside option of a unit-demand (or unit-supply) firm.
pub fn truncate_at_outside(u: &FirmUtility, new_outside: f64) -> Result<FirmUtility> {
    if !u.is_unit_side() {
        return Err(Error::NotUnitDemand(u.name.clone()));
    }
    let mut table = u.table.clone();
    table.insert(Bundle::EMPTY, Expr::Const(new_outside));
    Ok(u.with_table(table))
}

/// Exaggerates the utility of the single-trade bundle {trade} above the level
/// `level`: û = u + min(amount, max(0, u − level)). Below `level` the report
/// is truthful, so the misreport is continuous and still monotone.
pub fn uplift_trade(u: &FirmUtility, trade: usize, amount: f64, level: f64) -> Result<FirmUtility> {
    if !u.is_unit_side() {
        return Err(Error::NotUnitDemand(u.name.clone()));
    }
    let b = Bundle::singleton(trade);
    let Some(e) = u.table.get(&b) else {
        return Err(Error::BundleOutOfScope { firm: u.name.clone(), bundle: format!("{b:?}") });
    };
    let excess = Expr::Max(vec![Expr::Const(0.0), e.clone().sub(Expr::Const(level))]);
    let bonus = Expr::Min(vec![Expr::Const(amount), excess]);
    let mut table = u.table.clone();
    table.insert(b, e.clone().add(bonus));
    Ok(u.with_table(table))
}

/// A price box with the same bounds on every coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceBox {
    pub lo: f64,
    pub hi: f64,
}

impl PriceBox {
    pub fn new(lo: f64, hi: f64) -> PriceBox {
        PriceBox { lo, hi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityViolation {
    pub bundle: Bundle,
    pub trade: usize,
    pub prices: Vec<f64>,
    pub delta: f64,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub samples: usize,
    pub violations: Vec<MonotonicityViolation>,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples prices in `bx` and checks that raising a sale price (lowering a
/// purchase price) of a trade strictly raises the utility of every feasible
/// bundle containing it.
pub fn check_monotonicity(u: &FirmUtility, num_trades: usize, samples: usize, bx: PriceBox, seed: u64) -> MonotonicityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delta = 1e-3 * (bx.hi - bx.lo).max(1.0);
    let mut violations = Vec::new();
    for _ in 0..samples {
        let p: Vec<f64> = (0..num_trades).map(|_| rng.gen_range(bx.lo..bx.hi)).collect();
        for (b, e) in u.entries() {
            let before = e.eval(&p);
            for t in b.iter() {
                let mut q = p.clone();
                q[t] += delta;
                let after = e.eval(&q);
                let ok = if u.downstream.contains(t) { after > before } else { after < before };
                if !ok {
                    violations.push(MonotonicityViolation { bundle: b, trade: t, prices: p.clone(), delta, before, after });
                }
            }
        }
    }
    MonotonicityReport { samples, violations }
}

/// Role of the firm owning `u` in `net`.
pub fn role_of(net: &TradeNetwork, u: &FirmUtility) -> Role {
    net.role(u.firm)
}
