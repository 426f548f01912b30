//! Buyer-optimal equilibrium selection and manipulation experiments for
//! coalitions of terminal agents.

use rayon::prelude::*;
use serde::Serialize;

use crate::demand::{demand_set, indirect_utility, nib_witness, EPS_TIE};
use crate::equilibrium::{extremal_equilibria, find_equilibria, EquilibriumRecord, SearchConfig};
use crate::error::{Error, Result};
use crate::model::{Bundle, FirmId, Role};
use crate::properties::{check_aggregate_law, check_full_substitutability, check_profile_bounds, BoundKind, Grid, Law, PairSource, Variant};
use crate::utility::{truncate_at_outside, uplift_trade, FirmUtility, PriceBox, UtilityProfile};

/// How the mechanism picks an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    BuyerOptimal,
    SellerOptimal,
    /// Buyer-optimal among supports built from non-isolated bundles only.
    BuyerOptimalNonIsolated,
}

impl SelectionRule {
    pub fn name(self) -> &'static str {
        match self {
            SelectionRule::BuyerOptimal => "buyer-optimal",
            SelectionRule::SellerOptimal => "seller-optimal",
            SelectionRule::BuyerOptimalNonIsolated => "buyer-optimal-non-isolated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MechanismConfig {
    pub search: SearchConfig,
    pub rule: SelectionRule,
    /// Run sampled substitutability and boundedness checks and report warnings.
    pub precheck: bool,
}

impl MechanismConfig {
    pub fn new(search: SearchConfig) -> MechanismConfig {
        MechanismConfig { search, rule: SelectionRule::BuyerOptimal, precheck: false }
    }
}

/// The selected equilibrium and what every firm gets from it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MechanismOutcome {
    pub rule: String,
    pub prices: Vec<f64>,
    pub support: Bundle,
    /// Reported utility of every firm at the selected arrangement.
    pub utilities: Vec<f64>,
    /// Set when no record was best for every agent on the favoured side and
    /// the largest total indirect utility was used instead.
    pub fallback: bool,
    pub warnings: Vec<String>,
}

impl MechanismOutcome {
    /// Prices of the realized trades.
    pub fn allocation_prices(&self) -> Vec<(usize, f64)> {
        self.support.iter().map(|t| (t, self.prices[t])).collect()
    }
}

fn prechecks(u: &UtilityProfile, cfg: &MechanismConfig) -> Vec<String> {
    let net = u.network();
    let n = net.num_trades();
    let roles = net.terminal_roles();
    let mut warnings = Vec::new();
    let s = &cfg.search;
    let grid = Grid::new(s.lo, s.hi, s.step.max((s.hi - s.lo) / 8.0));
    for (f, fu) in u.firms().iter().enumerate() {
        if roles[f] == Role::TerminalBuyer && !fu.is_unit_side() {
            warnings.push(format!("terminal buyer {} is not unit-demand", fu.name()));
        }
        if fu.scope().len() > 4 || roles[f] == Role::Isolated {
            continue;
        }
        let pairs = PairSource::Grid(grid);
        let fs = check_full_substitutability(fu, Variant::Expansion, &pairs, n, EPS_TIE).map(|r| r.passed()).unwrap_or(false);
        let lad = check_aggregate_law(fu, Law::Demand, true, &pairs, n, EPS_TIE).map(|r| r.passed()).unwrap_or(false);
        let las = check_aggregate_law(fu, Law::Supply, true, &pairs, n, EPS_TIE).map(|r| r.passed()).unwrap_or(false);
        for (ok, what) in [(fs, "full substitutability"), (lad, "the law of aggregate demand"), (las, "the law of aggregate supply")] {
            if !ok {
                warnings.push(format!("{} fails sampled {what}", fu.name()));
            }
        }
    }
    let bcv = check_profile_bounds(u, BoundKind::Bcv, PriceBox::new(s.lo, s.hi), 200, (s.hi - s.lo).abs() * 4.0 + 10.0, 5);
    if !bcv.passed() {
        warnings.push("sampled bounded compensating variations fail".into());
    }
    warnings
}

/// Drops supports that use a bundle isolated in some firm's demand; records
/// left without supports are removed.
fn non_isolated(u: &UtilityProfile, records: Vec<EquilibriumRecord>, eps_tie: f64) -> Vec<EquilibriumRecord> {
    records
        .into_iter()
        .filter_map(|mut r| {
            r.supports.retain(|psi| {
                u.firms().iter().all(|fu| {
                    let b = psi.intersection(fu.scope());
                    matches!(nib_witness(fu, &r.prices, b, 1e-3, 40, eps_tie.max(crate::equilibrium::EPS_EQ)), Ok(Some(_)))
                })
            });
            (!r.supports.is_empty()).then_some(r)
        })
        .collect()
}

/// Runs the search and selects the equilibrium favoured by the rule.
pub fn buyer_optimal_mechanism(u: &UtilityProfile, cfg: &MechanismConfig) -> Result<MechanismOutcome> {
    let warnings = if cfg.precheck { prechecks(u, cfg) } else { Vec::new() };
    let mut found = find_equilibria(u, &cfg.search)?.records;
    if cfg.rule == SelectionRule::BuyerOptimalNonIsolated {
        found = non_isolated(u, found, cfg.search.eps_tie);
    }
    if found.is_empty() {
        return Err(Error::NoEquilibriumFound);
    }
    let report = extremal_equilibria(u, &found, 1e-9)?;
    let (picked, side) = match cfg.rule {
        SelectionRule::SellerOptimal => (report.seller_optimal, Role::TerminalSeller),
        _ => (report.buyer_optimal, Role::TerminalBuyer),
    };
    let fallback = picked.is_none();
    let record = match picked {
        Some(r) => r,
        None => {
            let roles = u.network().terminal_roles();
            let total = |r: &EquilibriumRecord| -> f64 {
                roles.iter().enumerate().filter(|(_, x)| **x == side).map(|(f, _)| indirect_utility(u.firm(f), &r.prices)).sum()
            };
            // Records are in grid order, so the first maximum is lexicographically smallest.
            let mut best = &found[0];
            for r in &found[1..] {
                if total(r) > total(best) + 1e-9 {
                    best = r;
                }
            }
            best.clone()
        }
    };
    let support = record.supports[0];
    let utilities = u
        .firms()
        .iter()
        .map(|fu| fu.eval(support.intersection(fu.scope()), &record.prices).unwrap_or(f64::NEG_INFINITY))
        .collect();
    Ok(MechanismOutcome { rule: cfg.rule.name().into(), prices: record.prices, support, utilities, fallback, warnings })
}

/// Finite misreport families.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Families {
    /// Raises of the outside option above its true value.
    pub truncation_levels: Vec<f64>,
    /// Utility uplifts of a single-trade bundle above the truthful realized level.
    pub uplift_amounts: Vec<f64>,
}

impl Default for Families {
    fn default() -> Self {
        Families { truncation_levels: vec![0.5, 1.0, 1.5, 2.0, 3.0], uplift_amounts: vec![0.25, 0.5, 1.0, 2.0, 4.0] }
    }
}

#[derive(Debug, Clone)]
struct Misreport {
    label: String,
    utility: FirmUtility,
}

/// One joint misreport and its effect under the true utilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation {
    pub reports: Vec<String>,
    pub prices: Vec<f64>,
    pub support: Bundle,
    /// True utility change of each member relative to truthful reporting.
    pub deltas: Vec<f64>,
}

impl Deviation {
    fn min_gain(&self) -> f64 {
        self.deltas.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManipulationReport {
    pub coalition: Vec<String>,
    pub families: Vec<String>,
    pub truthful_utilities: Vec<f64>,
    pub deviations_tried: usize,
    /// Deviations where at least one member strictly gains.
    pub some_member_gains: usize,
    /// Deviation with the largest smallest member gain.
    pub best: Option<Deviation>,
    /// True when some deviation makes every member strictly better off.
    pub violation: bool,
}

const GAIN_TOL: f64 = 1e-7;

fn misreports(u: &FirmUtility, fam: &Families, level: f64) -> Result<Vec<Misreport>> {
    let mut out = vec![Misreport { label: "truthful".into(), utility: u.clone() }];
    let outside = u.eval(Bundle::EMPTY, &[]).unwrap_or(0.0);
    for &l in &fam.truncation_levels {
        out.push(Misreport { label: format!("truncate +{l}"), utility: truncate_at_outside(u, outside + l)? });
    }
    let side = if u.downstream().is_empty() { u.upstream() } else { u.downstream() };
    for t in side.iter() {
        for &a in &fam.uplift_amounts {
            out.push(Misreport { label: format!("uplift #{t} +{a}"), utility: uplift_trade(u, t, a, level)? });
        }
    }
    Ok(out)
}

/// Tries every joint misreport of the coalition from the families and reports
/// whether some deviation makes every member strictly better off under the
/// true utilities. The coalition must consist of terminal buyers only or of
/// terminal sellers only.
pub fn manipulation_search(u_true: &UtilityProfile, coalition: &[FirmId], fam: &Families, cfg: &MechanismConfig) -> Result<ManipulationReport> {
    let net = u_true.network();
    let roles = net.terminal_roles();
    let names: Vec<String> = coalition.iter().map(|&f| net.firm_name(f).to_string()).collect();
    let families = vec![format!("truncation {:?}", fam.truncation_levels), format!("single-trade uplift {:?}", fam.uplift_amounts)];
    if coalition.is_empty() {
        return Ok(ManipulationReport {
            coalition: names,
            families,
            truthful_utilities: Vec::new(),
            deviations_tried: 0,
            some_member_gains: 0,
            best: None,
            violation: false,
        });
    }
    let side = roles[coalition[0]];
    if !matches!(side, Role::TerminalBuyer | Role::TerminalSeller) || coalition.iter().any(|&f| roles[f] != side) {
        return Err(Error::NotTerminalBuyers(names.join(",")));
    }
    let truthful = buyer_optimal_mechanism(u_true, cfg)?;
    let truth: Vec<f64> = coalition.iter().map(|&f| truthful.utilities[f]).collect();
    let options: Vec<Vec<Misreport>> = coalition
        .iter()
        .zip(&truth)
        .map(|(&f, &l)| misreports(u_true.firm(f), fam, l))
        .collect::<Result<_>>()?;
    // Every joint choice except all-truthful, in mixed-radix order.
    let total: usize = options.iter().map(|o| o.len()).product();
    let deviations: Vec<Result<Option<Deviation>>> = (1..total)
        .into_par_iter()
        .map(|mut code| {
            let mut profile = u_true.clone();
            let mut labels = Vec::new();
            for opts in &options {
                let m = &opts[code % opts.len()];
                code /= opts.len();
                labels.push(m.label.clone());
                profile = profile.with_firm(m.utility.clone());
            }
            let out = match buyer_optimal_mechanism(&profile, cfg) {
                Ok(o) => o,
                Err(Error::NoEquilibriumFound) => return Ok(None),
                Err(e) => return Err(e),
            };
            let deltas = coalition
                .iter()
                .zip(&truth)
                .map(|(&f, &t)| {
                    let fu = u_true.firm(f);
                    fu.eval(out.support.intersection(fu.scope()), &out.prices).unwrap_or(f64::NEG_INFINITY) - t
                })
                .collect();
            Ok(Some(Deviation { reports: labels, prices: out.prices, support: out.support, deltas }))
        })
        .collect();
    let mut tried = 0;
    let mut some = 0;
    let mut best: Option<Deviation> = None;
    for d in deviations {
        let Some(d) = d? else { continue };
        tried += 1;
        if d.deltas.iter().any(|x| *x > GAIN_TOL) {
            some += 1;
        }
        if best.as_ref().map_or(true, |b| d.min_gain() > b.min_gain()) {
            best = Some(d);
        }
    }
    let violation = best.as_ref().is_some_and(|b| b.min_gain() > GAIN_TOL);
    Ok(ManipulationReport {
        coalition: names,
        families,
        truthful_utilities: truth,
        deviations_tried: tried,
        some_member_gains: some,
        best,
        violation,
    })
}

/// Whether the outcome is an equilibrium of the profile it was computed from.
pub fn replay_outcome(u: &UtilityProfile, out: &MechanismOutcome, tol: f64) -> bool {
    u.firms().iter().all(|fu| demand_set(fu, &out.prices, tol).contains(out.support.intersection(fu.scope())))
}
