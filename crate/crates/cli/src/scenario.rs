//! Versioned JSON scenario files: loading, validation and conversion into
//! utility profiles.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use netclear_core::adapters::{induce_from_exchange, induce_from_matching, DoctorPrefs, ExchangeEconomy, InducedExchange, MatchingMarket};
use netclear_core::{FirmUtility, TradeNetwork, UtilityProfile};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },
    #[error("schema version mismatch: expected {expected}, found {found}")]
    SchemaVersionMismatch { expected: u64, found: String },
    #[error("invalid scenario at {path}: {msg}")]
    Validation { path: String, msg: String },
}

fn invalid(path: impl Into<String>, msg: impl ToString) -> LoadError {
    LoadError::Validation { path: path.into(), msg: msg.to_string() }
}

/// A scenario file: a model plus the analysis settings used by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub version: u64,
    #[serde(flatten)]
    pub model: Model,
    #[serde(default)]
    pub analysis: Analysis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Network(NetworkSpec),
    Matching(MatchingSpec),
    Exchange(ExchangeSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub firms: Vec<String>,
    #[serde(default)]
    pub trades: Vec<TradeSpec>,
    /// Utility table per firm; a firm without a table only has ∅ worth 0.
    #[serde(default)]
    pub utilities: BTreeMap<String, Vec<Entry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeSpec {
    pub id: String,
    pub seller: String,
    pub buyer: String,
}

/// One feasible bundle and its utility expression in the bundle's prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    #[serde(default)]
    pub bundle: Vec<String>,
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingSpec {
    pub hospitals: Vec<String>,
    pub doctors: Vec<String>,
    /// Per hospital: doctor sets and expressions in `p[doctor]`.
    pub hospital_utilities: BTreeMap<String, Vec<Entry>>,
    pub doctor_utilities: BTreeMap<String, DoctorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoctorSpec {
    /// Per acceptable hospital: an expression in the salary `p[hospital]`.
    pub values: BTreeMap<String, String>,
    #[serde(default)]
    pub outside: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeSpec {
    pub objects: Vec<String>,
    pub agents: Vec<String>,
    pub endowments: BTreeMap<String, Vec<String>>,
    /// Per agent: object sets and expressions in the net transfer `t`.
    pub utilities: BTreeMap<String, Vec<ObjectEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectEntry {
    #[serde(default)]
    pub objects: Vec<String>,
    pub expr: String,
}

/// Tolerances, grid and seeds shared by all commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Analysis {
    /// Price box [lo, hi] applied to every trade.
    #[serde(rename = "box")]
    pub bounds: [f64; 2],
    pub step: f64,
    pub eps_tie: f64,
    pub eps_eq: f64,
    pub seed: u64,
    /// Firm examined by `demand` and `check` when `--firm` is absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub focus: Option<String>,
    pub max_records: usize,
    /// Samples drawn by the randomized boundedness checks.
    pub samples: usize,
}

impl Default for Analysis {
    fn default() -> Analysis {
        Analysis { bounds: [-1.0, 3.0], step: 0.25, eps_tie: 1e-9, eps_eq: 1e-7, seed: 42, focus: None, max_records: 5000, samples: 200 }
    }
}

/// A validated scenario with its utility profile.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    pub profile: UtilityProfile,
    pub warnings: Vec<String>,
    /// Present for exchange scenarios.
    pub exchange: Option<InducedExchange>,
}

pub fn load_scenario(path: &Path) -> Result<Loaded, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Loaded, LoadError> {
    let parse_err = |e: serde_json::Error| LoadError::Parse { line: e.line(), column: e.column(), msg: e.to_string() };
    let raw: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
    match raw.get("version") {
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(v) => return Err(LoadError::SchemaVersionMismatch { expected: SCHEMA_VERSION, found: v.to_string() }),
        None => return Err(LoadError::SchemaVersionMismatch { expected: SCHEMA_VERSION, found: "none".into() }),
    }
    let scenario: Scenario = serde_json::from_str(text).map_err(parse_err)?;
    build(scenario)
}

fn distinct(path: &str, names: &[String]) -> Result<(), LoadError> {
    for (i, a) in names.iter().enumerate() {
        if names[..i].contains(a) {
            return Err(invalid(format!("{path}[{i}]"), format!("`{a}` is listed twice")));
        }
    }
    Ok(())
}

fn check_analysis(a: &Analysis) -> Result<(), LoadError> {
    if !(a.bounds[0] <= a.bounds[1]) {
        return Err(invalid("analysis.box", "lower bound exceeds upper bound"));
    }
    if !(a.step > 0.0) {
        return Err(invalid("analysis.step", "step must be positive"));
    }
    if !(a.eps_tie >= 0.0 && a.eps_eq >= 0.0) {
        return Err(invalid("analysis", "tolerances must be non-negative"));
    }
    Ok(())
}

/// Validates the scenario and builds its utility profile.
pub fn build(scenario: Scenario) -> Result<Loaded, LoadError> {
    check_analysis(&scenario.analysis)?;
    let (profile, warnings, exchange) = match &scenario.model {
        Model::Network(n) => (build_network(n)?, Vec::new(), None),
        Model::Matching(m) => {
            let ind = induce_from_matching(&matching_market(m)?).map_err(|e| invalid("matching", e))?;
            (ind.profile, ind.warnings, None)
        }
        Model::Exchange(e) => {
            let ind = induce_from_exchange(&exchange_economy(e)?).map_err(|e| invalid("exchange", e))?;
            (ind.profile.clone(), ind.warnings.clone(), Some(ind))
        }
    };
    if let Some(f) = &scenario.analysis.focus {
        if profile.network().firm_index(f).is_none() {
            return Err(invalid("analysis.focus", format!("unknown firm `{f}`")));
        }
    }
    Ok(Loaded { scenario, profile, warnings, exchange })
}

fn build_network(n: &NetworkSpec) -> Result<UtilityProfile, LoadError> {
    distinct("firms", &n.firms)?;
    for (i, t) in n.trades.iter().enumerate() {
        for (role, f) in [("seller", &t.seller), ("buyer", &t.buyer)] {
            if !n.firms.contains(f) {
                return Err(invalid(format!("trades[{i}].{role}"), format!("trade `{}` names unknown firm `{f}`", t.id)));
            }
        }
    }
    let spec: Vec<(&str, &str, &str)> = n.trades.iter().map(|t| (t.id.as_str(), t.seller.as_str(), t.buyer.as_str())).collect();
    let net = TradeNetwork::with_firms(&n.firms, &spec).map_err(|e| invalid("trades", e))?;
    for name in n.utilities.keys() {
        if net.firm_index(name).is_none() {
            return Err(invalid(format!("utilities.{name}"), format!("unknown firm `{name}`")));
        }
    }
    let mut us = Vec::new();
    for (f, name) in n.firms.iter().enumerate() {
        let u = match n.utilities.get(name) {
            Some(table) => {
                for (k, e) in table.iter().enumerate() {
                    if let Some(t) = e.bundle.iter().find(|t| net.trade_index(t).is_none()) {
                        return Err(invalid(format!("utilities.{name}[{k}].bundle"), format!("unknown trade `{t}`")));
                    }
                }
                let entries: Vec<(Vec<&str>, &str)> =
                    table.iter().map(|e| (e.bundle.iter().map(String::as_str).collect(), e.expr.as_str())).collect();
                let refs: Vec<(&[&str], &str)> = entries.iter().map(|(b, x)| (b.as_slice(), *x)).collect();
                FirmUtility::from_texts(&net, f, &refs).map_err(|e| invalid(format!("utilities.{name}"), e))?
            }
            None => FirmUtility::from_texts(&net, f, &[(&[], "0")]).map_err(|e| invalid(format!("utilities.{name}"), e))?,
        };
        us.push(u);
    }
    UtilityProfile::new(net, us).map_err(|e| invalid("utilities", e))
}

fn matching_market(m: &MatchingSpec) -> Result<MatchingMarket, LoadError> {
    distinct("hospitals", &m.hospitals)?;
    distinct("doctors", &m.doctors)?;
    for h in m.hospital_utilities.keys() {
        if !m.hospitals.contains(h) {
            return Err(invalid(format!("hospital_utilities.{h}"), format!("unknown hospital `{h}`")));
        }
    }
    for (d, prefs) in &m.doctor_utilities {
        if !m.doctors.contains(d) {
            return Err(invalid(format!("doctor_utilities.{d}"), format!("unknown doctor `{d}`")));
        }
        if let Some(h) = prefs.values.keys().find(|h| !m.hospitals.contains(h)) {
            return Err(invalid(format!("doctor_utilities.{d}.values.{h}"), format!("unknown hospital `{h}`")));
        }
    }
    let hospital_utilities = m
        .hospitals
        .iter()
        .map(|h| {
            let table = m.hospital_utilities.get(h).cloned().unwrap_or_else(|| vec![Entry { bundle: vec![], expr: "0".into() }]);
            for (k, e) in table.iter().enumerate() {
                if let Some(d) = e.bundle.iter().find(|d| !m.doctors.contains(d)) {
                    return Err(invalid(format!("hospital_utilities.{h}[{k}].bundle"), format!("unknown doctor `{d}`")));
                }
            }
            Ok(table.into_iter().map(|e| (e.bundle, e.expr)).collect())
        })
        .collect::<Result<_, LoadError>>()?;
    let doctor_utilities = m
        .doctors
        .iter()
        .map(|d| match m.doctor_utilities.get(d) {
            Some(p) => DoctorPrefs { values: p.values.iter().map(|(h, x)| (h.clone(), x.clone())).collect(), outside: p.outside },
            None => DoctorPrefs { values: vec![], outside: 0.0 },
        })
        .collect();
    Ok(MatchingMarket { hospitals: m.hospitals.clone(), doctors: m.doctors.clone(), hospital_utilities, doctor_utilities })
}

fn exchange_economy(e: &ExchangeSpec) -> Result<ExchangeEconomy, LoadError> {
    distinct("objects", &e.objects)?;
    distinct("agents", &e.agents)?;
    let object = |path: String, x: &str| e.objects.iter().position(|o| o == x).ok_or_else(|| invalid(path, format!("unknown object `{x}`")));
    for a in e.endowments.keys().chain(e.utilities.keys()) {
        if !e.agents.contains(a) {
            return Err(invalid(format!("agent `{a}`"), format!("unknown agent `{a}`")));
        }
    }
    let mut endowments = Vec::new();
    let mut utilities = Vec::new();
    for a in &e.agents {
        let own = e.endowments.get(a).cloned().unwrap_or_default();
        endowments.push(own.iter().map(|x| object(format!("endowments.{a}"), x)).collect::<Result<Vec<_>, _>>()?);
        let table = e.utilities.get(a).ok_or_else(|| invalid(format!("utilities.{a}"), "missing utility table"))?;
        let mut rows = Vec::new();
        for (k, row) in table.iter().enumerate() {
            let xs = row.objects.iter().map(|x| object(format!("utilities.{a}[{k}].objects"), x)).collect::<Result<Vec<_>, _>>()?;
            rows.push((xs, row.expr.clone()));
        }
        utilities.push(rows);
    }
    Ok(ExchangeEconomy { objects: e.objects.clone(), agents: e.agents.clone(), endowments, utilities })
}

/// The network scenario equivalent to a profile, with expressions rendered
/// back into the input grammar.
pub fn network_scenario(profile: &UtilityProfile, analysis: &Analysis) -> Scenario {
    let net = profile.network();
    let name = |i: usize| format!("p[{}]", net.trade_id(i));
    let trades = net
        .trades()
        .iter()
        .map(|t| TradeSpec { id: t.id.clone(), seller: net.firm_name(t.seller).into(), buyer: net.firm_name(t.buyer).into() })
        .collect();
    let utilities = profile
        .firms()
        .iter()
        .map(|u| {
            let rows = u.entries().map(|(b, e)| Entry { bundle: net.bundle_ids(b), expr: e.render(&name) }).collect();
            (u.name().to_string(), rows)
        })
        .collect();
    Scenario {
        version: SCHEMA_VERSION,
        model: Model::Network(NetworkSpec { firms: net.firms().to_vec(), trades, utilities }),
        analysis: analysis.clone(),
    }
}
