//! Command-line interface: argument parsing and command dispatch.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use netclear_core::adapters::{uniform_price_lift, uniform_price_project};
use netclear_core::demand::demand_set;
use netclear_core::equilibrium::*;
use netclear_core::mechanisms::{buyer_optimal_mechanism, manipulation_search, Families, MechanismConfig, SelectionRule};
use netclear_core::properties::*;
use netclear_core::{Bundle, FirmUtility, PriceBox, TradeNetwork, UtilityProfile};

use crate::report::{emit, fmt_num, fmt_prices, Format, Report};
use crate::scenario::{load_scenario, network_scenario, Analysis, Loaded, Model};

/// Most grid points a CSV dump may contain.
const MAX_CSV_POINTS: usize = 200_000;
/// Most records compared pairwise by `lattice` and `rural`.
const MAX_PAIR_RECORDS: usize = 64;
/// Most witnesses listed in a text report.
const MAX_LISTED: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "netclear", version, about = "Demand, substitutability and competitive equilibrium in trading networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file (JSON, schema version 1).
    pub scenario: PathBuf,
    /// Price box applied to every trade.
    #[arg(long = "box", num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    pub bounds: Option<Vec<f64>>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub eps_tie: Option<f64>,
    #[arg(long)]
    pub eps_eq: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cap on equilibrium records kept by the search.
    #[arg(long)]
    pub max_records: Option<usize>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Directory receiving `<command>.txt` and `<command>.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PropertyArg {
    Sss,
    Csc,
    Fs,
    Lad,
    Las,
    Ms,
    Si,
    Nib,
    Bcv,
    Bwp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Weak,
    Expansion,
    Contraction,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    BuyerOptimal,
    SellerOptimal,
    NonIsolated,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Demand sets and indirect utilities at a price vector.
    Demand {
        #[command(flatten)]
        common: Common,
        /// Firm to examine (default: the scenario focus, else every firm).
        #[arg(long)]
        firm: Option<String>,
        /// Comma-separated prices in trade order.
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
        /// Dump the firm's demand over the grid to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sampled substitutability, aggregate-law, isolation or boundedness check.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        property: PropertyArg,
        /// Variant of the condition; `strong` is an alias of `expansion`.
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        #[arg(long)]
        firm: Option<String>,
        /// Explicit price pair `p1,p2,..:q1,q2,..` (repeatable); default is the grid.
        #[arg(long, allow_hyphen_values = true)]
        pair: Vec<String>,
        /// Bound K for the boundedness checks.
        #[arg(long)]
        k: Option<f64>,
    },
    /// Search the price box for competitive equilibria.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Dump the surplus Z over the grid to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check join and meet closure for every pair of found equilibria.
    Lattice {
        #[command(flatten)]
        common: Common,
    },
    /// Check that every pair of found equilibria has matching supports.
    Rural {
        #[command(flatten)]
        common: Common,
    },
    /// Seller- and buyer-optimal equilibria among those found.
    Extremal {
        #[command(flatten)]
        common: Common,
    },
    /// Run the equilibrium mechanism, optionally searching for coalition manipulations.
    Mechanism {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "buyer-optimal")]
        rule: RuleArg,
        /// Run the sampled precondition checks and report warnings.
        #[arg(long)]
        precheck: bool,
        /// Comma-separated coalition of terminal buyers (or of terminal sellers).
        #[arg(long)]
        coalition: Option<String>,
        /// Comma-separated truncation levels.
        #[arg(long)]
        levels: Option<String>,
        /// Comma-separated uplift amounts.
        #[arg(long)]
        amounts: Option<String>,
    },
    /// Show the network induced by a matching or exchange scenario.
    Adapt {
        #[command(flatten)]
        common: Common,
    },
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(violation) => {
            if violation {
                2
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

/// Runs a parsed command; `Ok(true)` when a violation was found.
pub fn run(cli: Cli) -> Result<bool> {
    let (common, csv) = match &cli.command {
        Command::Demand { common, csv, .. } | Command::Solve { common, csv } => (common, csv.clone()),
        Command::Check { common, .. }
        | Command::Lattice { common }
        | Command::Rural { common }
        | Command::Extremal { common }
        | Command::Mechanism { common, .. }
        | Command::Adapt { common } => (common, None),
    };
    let mut loaded = load_scenario(&common.scenario)?;
    apply_overrides(&mut loaded.scenario.analysis, common)?;
    let ctx = Ctx { loaded: &loaded, a: &loaded.scenario.analysis };
    let report = match &cli.command {
        Command::Demand { firm, at, csv, .. } => ctx.demand(firm.as_deref(), at.as_deref(), csv.is_some())?,
        Command::Check { property, variant, firm, pair, k, .. } => ctx.check(*property, *variant, firm.as_deref(), pair, *k)?,
        Command::Solve { csv, .. } => ctx.solve(csv.is_some())?,
        Command::Lattice { .. } => ctx.lattice()?,
        Command::Rural { .. } => ctx.rural()?,
        Command::Extremal { .. } => ctx.extremal()?,
        Command::Mechanism { rule, precheck, coalition, levels, amounts, .. } => {
            ctx.mechanism(*rule, *precheck, coalition.as_deref(), levels.as_deref(), amounts.as_deref())?
        }
        Command::Adapt { .. } => ctx.adapt()?,
    };
    emit(&report, common.format, common.out.as_deref(), csv.as_deref()).context("writing report")?;
    Ok(report.violation)
}

fn apply_overrides(a: &mut Analysis, c: &Common) -> Result<()> {
    if let Some(b) = &c.bounds {
        a.bounds = [b[0], b[1]];
    }
    a.step = c.step.unwrap_or(a.step);
    a.eps_tie = c.eps_tie.unwrap_or(a.eps_tie);
    a.eps_eq = c.eps_eq.unwrap_or(a.eps_eq);
    a.seed = c.seed.unwrap_or(a.seed);
    a.max_records = c.max_records.unwrap_or(a.max_records);
    if !(a.bounds[0] <= a.bounds[1]) || !(a.step > 0.0) {
        bail!("the price box must satisfy lo <= hi and the step must be positive");
    }
    Ok(())
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',').map(|s| s.trim().parse::<f64>().map_err(|e| anyhow!("bad number `{}`: {e}", s.trim()))).collect()
}

/// L1 size of the price change in a witness, so the simplest are listed first.
fn witness_distance(w: &Violation) -> f64 {
    w.p2.as_ref().map_or(0.0, |q| w.p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum())
}

struct Ctx<'a> {
    loaded: &'a Loaded,
    a: &'a Analysis,
}

impl Ctx<'_> {
    fn profile(&self) -> &UtilityProfile {
        &self.loaded.profile
    }

    fn net(&self) -> &TradeNetwork {
        self.loaded.profile.network()
    }

    fn label(&self, b: Bundle) -> String {
        self.net().bundle_label(b)
    }

    fn trade_ids(&self) -> Vec<String> {
        (0..self.net().num_trades()).map(|t| self.net().trade_id(t).to_string()).collect()
    }

    fn prices(&self, text: &str) -> Result<Vec<f64>> {
        let p = parse_list(text)?;
        if p.len() != self.net().num_trades() {
            bail!("expected {} prices (trades {}), got {}", self.net().num_trades(), self.trade_ids().join(","), p.len());
        }
        Ok(p)
    }

    /// The requested firm, else the focus, else every firm with trades.
    fn firms(&self, firm: Option<&str>) -> Result<Vec<&FirmUtility>> {
        let by_name = |n: &str| self.profile().by_name(n).ok_or_else(|| anyhow!("unknown firm `{n}`"));
        if let Some(f) = firm {
            return Ok(vec![by_name(f)?]);
        }
        if let Some(f) = &self.a.focus {
            return Ok(vec![by_name(f)?]);
        }
        Ok(self.profile().firms().iter().filter(|u| !u.scope().is_empty()).collect())
    }

    fn search_config(&self) -> SearchConfig {
        let mut cfg = SearchConfig::new(self.a.bounds[0], self.a.bounds[1], self.a.step);
        cfg.eps_eq = self.a.eps_eq;
        cfg.eps_tie = self.a.eps_tie;
        cfg.max_records = self.a.max_records;
        cfg
    }

    fn header(&self, r: &mut Report) {
        let kind = match self.loaded.scenario.model {
            Model::Network(_) => "network",
            Model::Matching(_) => "matching",
            Model::Exchange(_) => "exchange",
        };
        r.line(format!(
            "scenario: {kind}, {} firms, {} trades [{}]",
            self.net().num_firms(),
            self.net().num_trades(),
            self.trade_ids().join(", ")
        ));
        for w in &self.loaded.warnings {
            r.line(format!("warning: {w}"));
        }
    }

    fn record_json(&self, r: &EquilibriumRecord) -> Value {
        json!({
            "prices": r.prices,
            "supports": r.supports.iter().map(|b| self.net().bundle_ids(*b)).collect::<Vec<_>>(),
            "supports_capped": r.supports_capped,
            "surplus": r.surplus,
        })
    }

    fn search(&self) -> Result<EquilibriumSearch> {
        let mut s = find_equilibria(self.profile(), &self.search_config())?;
        s.records.sort_by(|x, y| x.prices.partial_cmp(&y.prices).unwrap_or(std::cmp::Ordering::Equal));
        Ok(s)
    }

    fn grid_size(&self, dims: usize) -> Result<usize> {
        let per = Grid::new(self.a.bounds[0], self.a.bounds[1], self.a.step).len();
        let total = (per as f64).powi(dims as i32);
        if total > MAX_CSV_POINTS as f64 {
            bail!("CSV grid would have {total} points; at most {MAX_CSV_POINTS} are allowed (coarsen --step)");
        }
        Ok(total as usize)
    }

    fn demand(&self, firm: Option<&str>, at: Option<&str>, csv: bool) -> Result<Report> {
        let mut r = Report::new("demand");
        self.header(&mut r);
        let firms = self.firms(firm)?;
        let n = self.net().num_trades();
        let mut rows = Vec::new();
        if let Some(text) = at {
            let p = self.prices(text)?;
            r.line(format!("prices {}", fmt_prices(&p)));
            for u in &firms {
                let d = demand_set(u, &p, self.a.eps_tie);
                let labels: Vec<String> = d.bundles.iter().map(|b| self.label(*b)).collect();
                r.line(format!("{}: D = {}  V = {}{}", u.name(), labels.join(" "), fmt_num(d.indirect), if d.is_single_valued() { "" } else { "  (tie)" }));
                rows.push(json!({
                    "firm": u.name(),
                    "demand": d.bundles.iter().map(|b| self.net().bundle_ids(*b)).collect::<Vec<_>>(),
                    "indirect_utility": d.indirect,
                    "single_valued": d.is_single_valued(),
                }));
            }
        } else if !csv {
            bail!("demand needs --at prices or --csv");
        }
        r.json = json!({ "command": "demand", "trades": self.trade_ids(), "prices": at.map(|t| self.prices(t)).transpose()?, "firms": rows });
        if csv {
            let [u] = firms.as_slice() else { bail!("the demand CSV needs a single firm (--firm)") };
            let scope: Vec<usize> = u.scope().iter().collect();
            self.grid_size(scope.len())?;
            let points = grid_points(u.scope(), &Grid::new(self.a.bounds[0], self.a.bounds[1], self.a.step), n);
            let mut body = scope.iter().map(|t| self.net().trade_id(*t).to_string()).collect::<Vec<_>>().join(",");
            body.push_str(",demand,indirect_utility\n");
            for p in points {
                let d = demand_set(u, &p, self.a.eps_tie);
                let labels: Vec<String> = d.bundles.iter().map(|b| self.label(*b)).collect();
                let coords: Vec<String> = scope.iter().map(|t| fmt_num(p[*t])).collect();
                body.push_str(&format!("{},\"{}\",{}\n", coords.join(","), labels.join(" "), fmt_num(d.indirect)));
            }
            r.csv = Some(body);
            r.line(format!("demand of {} over the grid written as CSV", u.name()));
        }
        Ok(r)
    }

    fn pairs(&self, pair: &[String]) -> Result<PairSource> {
        if pair.is_empty() {
            return Ok(PairSource::Grid(Grid::new(self.a.bounds[0], self.a.bounds[1], self.a.step)));
        }
        let list = pair
            .iter()
            .map(|s| {
                let (p, q) = s.split_once(':').ok_or_else(|| anyhow!("pair `{s}` must look like p1,p2,..:q1,q2,.."))?;
                Ok((self.prices(p)?, self.prices(q)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PairSource::List(list))
    }

    fn check(&self, property: PropertyArg, variant: Option<VariantArg>, firm: Option<&str>, pair: &[String], k: Option<f64>) -> Result<Report> {
        let mut r = Report::new("check");
        self.header(&mut r);
        let n = self.net().num_trades();
        let eps = self.a.eps_tie;
        let variant = variant.unwrap_or(VariantArg::Expansion);
        let v = match variant {
            VariantArg::Weak => Variant::Weak,
            VariantArg::Expansion | VariantArg::Strong => Variant::Expansion,
            VariantArg::Contraction => Variant::Contraction,
        };
        let pairs = self.pairs(pair)?;
        let grid = Grid::new(self.a.bounds[0], self.a.bounds[1], self.a.step);
        let bx = PriceBox::new(self.a.bounds[0], self.a.bounds[1]);
        let kk = k.unwrap_or(4.0 * self.a.bounds[0].abs().max(self.a.bounds[1].abs()) + 10.0);
        let mut reports = Vec::new();
        for u in self.firms(firm)? {
            let rep = match property {
                PropertyArg::Sss => check_same_side(u, v, &pairs, n, eps)?,
                PropertyArg::Csc => check_cross_side(u, v, &pairs, n, eps)?,
                PropertyArg::Fs => check_full_substitutability(u, v, &pairs, n, eps)?,
                PropertyArg::Lad => check_aggregate_law(u, Law::Demand, v != Variant::Weak, &pairs, n, eps)?,
                PropertyArg::Las => check_aggregate_law(u, Law::Supply, v != Variant::Weak, &pairs, n, eps)?,
                PropertyArg::Ms => check_monotone_substitutability(u, &pairs, n, eps)?,
                PropertyArg::Si => check_single_improvement(u, &pairs, n, eps)?,
                PropertyArg::Nib => check_nib(u, &grid, n, 1e-3, 40, eps),
                PropertyArg::Bcv => check_bounds(u, BoundKind::Bcv, bx, self.a.samples, kk, n, self.a.seed),
                PropertyArg::Bwp => check_bounds(u, BoundKind::Bwp, bx, self.a.samples, kk, n, self.a.seed),
            };
            reports.push((u.name().to_string(), rep));
        }
        let mut firms_json = Vec::new();
        let mut violated = false;
        for (_, rep) in reports.iter_mut() {
            rep.violations.sort_by(|x, y| witness_distance(x).total_cmp(&witness_distance(y)).then(x.p.partial_cmp(&y.p).unwrap_or(std::cmp::Ordering::Equal)));
        }
        for (name, rep) in &reports {
            violated |= !rep.passed();
            r.line(format!(
                "{name}: {} ({}) {} over {} comparisons, {} violations",
                rep.property,
                rep.variant,
                if rep.passed() { "passes on sample" } else { "VIOLATED" },
                rep.pairs_tested,
                rep.violation_count
            ));
            for w in rep.violations.iter().take(MAX_LISTED) {
                r.line(format!("  witness {}", self.witness(w)));
            }
            firms_json.push(json!({
                "firm": name,
                "property": rep.property,
                "variant": rep.variant,
                "verdict": rep.verdict,
                "pairs_tested": rep.pairs_tested,
                "violation_count": rep.violation_count,
                "violations": rep.violations.iter().take(MAX_LISTED).map(|w| self.violation_json(w)).collect::<Vec<_>>(),
            }));
        }
        r.violation = violated;
        r.json = json!({ "command": "check", "trades": self.trade_ids(), "violated": violated, "firms": firms_json });
        Ok(r)
    }

    fn witness(&self, w: &Violation) -> String {
        let pair = match &w.p2 {
            Some(q) => format!("({},{},{})", fmt_prices(&w.p), fmt_prices(q), self.label(w.bundle)),
            None => format!("({},{})", fmt_prices(&w.p), self.label(w.bundle)),
        };
        let clause = w.clause.map(|c| format!(" [{}]", match c {
            Clause::PurchaseRaise => "purchase prices rise",
            Clause::SaleLower => "sale prices fall",
        }));
        format!("{pair}{}: {}", clause.unwrap_or_default(), w.trace)
    }

    fn violation_json(&self, w: &Violation) -> Value {
        json!({ "p": w.p, "p2": w.p2, "bundle": self.net().bundle_ids(w.bundle), "clause": w.clause, "trace": w.trace })
    }

    fn solve(&self, csv: bool) -> Result<Report> {
        let mut r = Report::new("solve");
        self.header(&mut r);
        let s = self.search()?;
        r.line(format!(
            "box [{}, {}] step {}: {} grid points, {} evaluated, {} equilibria found{}",
            fmt_num(self.a.bounds[0]),
            fmt_num(self.a.bounds[1]),
            fmt_num(self.a.step),
            s.grid_points,
            s.evaluated,
            s.found,
            if s.found > s.records.len() { format!(", {} kept", s.records.len()) } else { String::new() }
        ));
        if !s.note.is_empty() {
            r.line(format!("note: {}", s.note));
        }
        for rec in &s.records {
            let supports: Vec<String> = rec.supports.iter().map(|b| self.label(*b)).collect();
            r.line(format!("{}  supports: {}", fmt_prices(&rec.prices), supports.join(" ")));
        }
        r.json = json!({
            "command": "solve",
            "trades": self.trade_ids(),
            "box": self.a.bounds,
            "step": self.a.step,
            "grid_points": s.grid_points,
            "found": s.found,
            "equilibria": s.records.iter().map(|x| self.record_json(x)).collect::<Vec<_>>(),
        });
        if csv {
            let n = self.net().num_trades();
            self.grid_size(n)?;
            let points = grid_points(self.net().all_trades(), &Grid::new(self.a.bounds[0], self.a.bounds[1], self.a.step), n);
            let z = Surplus::new(self.profile());
            let values: Vec<f64> = points.par_iter().map(|p| z.eval(p)).collect::<netclear_core::Result<_>>()?;
            let mut body = self.trade_ids().join(",");
            body.push_str(",surplus\n");
            for (p, v) in points.iter().zip(values) {
                let coords: Vec<String> = p.iter().map(|x| fmt_num(*x)).collect();
                body.push_str(&format!("{},{}\n", coords.join(","), fmt_num(v)));
            }
            r.csv = Some(body);
        }
        Ok(r)
    }

    /// Found records, evenly subsampled to at most `MAX_PAIR_RECORDS`.
    fn pair_records(&self, r: &mut Report) -> Result<Vec<EquilibriumRecord>> {
        let s = self.search()?;
        let recs = s.records;
        if recs.len() <= MAX_PAIR_RECORDS {
            r.line(format!("{} equilibria found; checking all {} pairs", recs.len(), recs.len() * recs.len().saturating_sub(1) / 2));
            return Ok(recs);
        }
        let m = recs.len();
        let kept: Vec<EquilibriumRecord> = (0..MAX_PAIR_RECORDS).map(|i| recs[i * (m - 1) / (MAX_PAIR_RECORDS - 1)].clone()).collect();
        r.line(format!("{m} equilibria found; checking pairs among {MAX_PAIR_RECORDS} evenly spaced ones"));
        Ok(kept)
    }

    fn lattice(&self) -> Result<Report> {
        let mut r = Report::new("lattice");
        self.header(&mut r);
        let recs = self.pair_records(&mut r)?;
        let mut failures = Vec::new();
        let mut pairs = 0;
        for i in 0..recs.len() {
            for j in i + 1..recs.len() {
                pairs += 1;
                let l = verify_lattice_pair(self.profile(), &recs[i], &recs[j], self.a.eps_eq, self.a.eps_tie)?;
                if l.closed() {
                    continue;
                }
                for (what, p, ok, z) in [("join", &l.join, l.join_is_equilibrium, l.join_surplus), ("meet", &l.meet, l.meet_is_equilibrium, l.meet_surplus)] {
                    if !ok {
                        r.line(format!(
                            "{what} {} of {} and {} is not an equilibrium (Z = {})",
                            fmt_prices(p),
                            fmt_prices(&recs[i].prices),
                            fmt_prices(&recs[j].prices),
                            fmt_num(z)
                        ));
                    }
                }
                if !l.join_support_construction || !l.meet_support_construction {
                    r.line(format!("support construction fails for {} and {}", fmt_prices(&recs[i].prices), fmt_prices(&recs[j].prices)));
                }
                failures.push(json!({ "first": recs[i].prices, "second": recs[j].prices, "report": l }));
            }
        }
        r.line(format!("{pairs} pairs checked, {} not closed", failures.len()));
        r.violation = !failures.is_empty();
        r.json = json!({ "command": "lattice", "trades": self.trade_ids(), "pairs_checked": pairs, "failures": failures });
        Ok(r)
    }

    fn rural(&self) -> Result<Report> {
        let mut r = Report::new("rural");
        self.header(&mut r);
        let recs = self.pair_records(&mut r)?;
        let mut failures = Vec::new();
        let mut pairs = 0;
        for i in 0..recs.len() {
            for j in i + 1..recs.len() {
                pairs += 1;
                let h = verify_rural_hospitals_pair(self.profile(), &recs[i], &recs[j], self.a.eps_eq, self.a.eps_tie)?;
                if h.all_matched() {
                    continue;
                }
                let list = |bs: &[Bundle]| bs.iter().map(|b| self.label(*b)).collect::<Vec<_>>().join(" ");
                r.line(format!(
                    "{} vs {}: unmatched supports {} | {}",
                    fmt_prices(&recs[i].prices),
                    fmt_prices(&recs[j].prices),
                    list(&h.unmatched_first),
                    list(&h.unmatched_second)
                ));
                failures.push(json!({
                    "first": recs[i].prices,
                    "second": recs[j].prices,
                    "unmatched_first": h.unmatched_first.iter().map(|b| self.net().bundle_ids(*b)).collect::<Vec<_>>(),
                    "unmatched_second": h.unmatched_second.iter().map(|b| self.net().bundle_ids(*b)).collect::<Vec<_>>(),
                }));
            }
        }
        r.line(format!("{pairs} pairs checked, {} with unmatched supports", failures.len()));
        r.violation = !failures.is_empty();
        r.json = json!({ "command": "rural", "trades": self.trade_ids(), "pairs_checked": pairs, "failures": failures });
        Ok(r)
    }

    fn extremal(&self) -> Result<Report> {
        let mut r = Report::new("extremal");
        self.header(&mut r);
        let s = self.search()?;
        if s.records.is_empty() {
            bail!("no equilibrium found in the price box");
        }
        let e = extremal_equilibria(self.profile(), &s.records, self.a.eps_eq)?;
        for (side, rec, issue) in [("seller", &e.seller_optimal, &e.seller_issue), ("buyer", &e.buyer_optimal, &e.buyer_issue)] {
            match (rec, issue) {
                (Some(x), _) => r.line(format!("{side}-optimal equilibrium: {}", fmt_prices(&x.prices))),
                (None, Some(i)) => r.line(format!("no {side}-optimal equilibrium: {i}")),
                (None, None) => r.line(format!("no {side}-optimal equilibrium")),
            }
        }
        r.line(format!(
            "coordinatewise maximum among found: {}; minimum: {}",
            if e.has_coordinatewise_max { "yes" } else { "no" },
            if e.has_coordinatewise_min { "yes" } else { "no" }
        ));
        r.violation = e.seller_optimal.is_none() || e.buyer_optimal.is_none();
        r.json = json!({
            "command": "extremal",
            "trades": self.trade_ids(),
            "equilibria_found": s.found,
            "seller_optimal": e.seller_optimal.as_ref().map(|x| self.record_json(x)),
            "buyer_optimal": e.buyer_optimal.as_ref().map(|x| self.record_json(x)),
            "seller_issue": e.seller_issue,
            "buyer_issue": e.buyer_issue,
            "has_coordinatewise_max": e.has_coordinatewise_max,
            "has_coordinatewise_min": e.has_coordinatewise_min,
        });
        Ok(r)
    }

    fn mechanism(&self, rule: RuleArg, precheck: bool, coalition: Option<&str>, levels: Option<&str>, amounts: Option<&str>) -> Result<Report> {
        let mut r = Report::new("mechanism");
        self.header(&mut r);
        let mut cfg = MechanismConfig::new(self.search_config());
        cfg.rule = match rule {
            RuleArg::BuyerOptimal => SelectionRule::BuyerOptimal,
            RuleArg::SellerOptimal => SelectionRule::SellerOptimal,
            RuleArg::NonIsolated => SelectionRule::BuyerOptimalNonIsolated,
        };
        cfg.precheck = precheck;
        let out = buyer_optimal_mechanism(self.profile(), &cfg)?;
        r.line(format!("rule {}: prices {}  trades {}", out.rule, fmt_prices(&out.prices), self.label(out.support)));
        if out.fallback {
            r.line("no equilibrium is best for every favoured agent; picked the largest total instead");
        }
        for w in &out.warnings {
            r.line(format!("warning: {w}"));
        }
        for (f, u) in out.utilities.iter().enumerate() {
            r.line(format!("  {}: {}", self.net().firm_name(f), fmt_num(*u)));
        }
        let mut manip = Value::Null;
        if let Some(c) = coalition {
            let members = c
                .split(',')
                .map(|s| self.net().firm_index(s.trim()).ok_or_else(|| anyhow!("unknown firm `{}`", s.trim())))
                .collect::<Result<Vec<_>>>()?;
            let mut fam = Families::default();
            if let Some(l) = levels {
                fam.truncation_levels = parse_list(l)?;
            }
            if let Some(a) = amounts {
                fam.uplift_amounts = parse_list(a)?;
            }
            let m = manipulation_search(self.profile(), &members, &fam, &cfg)?;
            r.line(format!(
                "coalition {}: {} joint misreports tried, {} help some member, all-gain deviation: {}",
                m.coalition.join(","),
                m.deviations_tried,
                m.some_member_gains,
                if m.violation { "YES" } else { "no" }
            ));
            if let Some(b) = &m.best {
                let deltas: Vec<String> = b.deltas.iter().map(|d| fmt_num(*d)).collect();
                r.line(format!("  best for the worst-off member: reports [{}] prices {} gains ({})", b.reports.join("; "), fmt_prices(&b.prices), deltas.join(", ")));
            }
            r.violation = m.violation;
            manip = json!({
                "coalition": m.coalition,
                "families": m.families,
                "truthful_utilities": m.truthful_utilities,
                "deviations_tried": m.deviations_tried,
                "some_member_gains": m.some_member_gains,
                "best": m.best.as_ref().map(|b| json!({
                    "reports": b.reports,
                    "prices": b.prices,
                    "trades": self.net().bundle_ids(b.support),
                    "gains": b.deltas,
                })),
                "violation": m.violation,
            });
        }
        r.json = json!({
            "command": "mechanism",
            "trades": self.trade_ids(),
            "rule": out.rule,
            "prices": out.prices,
            "realized_trades": self.net().bundle_ids(out.support),
            "utilities": self.net().firms().iter().cloned().zip(out.utilities.iter().copied()).collect::<std::collections::BTreeMap<_, _>>(),
            "fallback": out.fallback,
            "warnings": out.warnings,
            "manipulation": manip,
        });
        Ok(r)
    }

    fn adapt(&self) -> Result<Report> {
        let mut r = Report::new("adapt");
        if matches!(self.loaded.scenario.model, Model::Network(_)) {
            bail!("adapt needs a matching or exchange scenario");
        }
        self.header(&mut r);
        let net = self.net();
        for t in net.trades() {
            r.line(format!("  {}: {} -> {}", t.id, net.firm_name(t.seller), net.firm_name(t.buyer)));
        }
        let induced = network_scenario(self.profile(), self.a);
        let mut round_trip = Value::Null;
        if let Some(ind) = &self.loaded.exchange {
            let e = &ind.economy;
            let k = e.objects.len();
            let grid = Grid::new(self.a.bounds[0].max(0.0), self.a.bounds[1], self.a.step);
            let (mut lifted, mut lift_ok) = (0, 0);
            for q in grid_points(Bundle::full(k), &grid, k) {
                if e.equilibrium_allocation(&q, self.a.eps_eq)?.is_none() {
                    continue;
                }
                lifted += 1;
                let p = uniform_price_lift(ind, &q)?;
                if net.num_trades() == 0 || is_equilibrium(self.profile(), &p, self.a.eps_eq, self.a.eps_tie)?.is_some() {
                    lift_ok += 1;
                } else {
                    r.line(format!("lift of economy equilibrium {} is not a network equilibrium", fmt_prices(&q)));
                }
            }
            let (mut projected, mut project_ok, mut negative) = (0, 0, 0);
            if net.num_trades() > 0 {
                for rec in self.search()?.records {
                    projected += 1;
                    if rec.prices.iter().any(|x| *x < -self.a.eps_eq) {
                        negative += 1;
                    }
                    let q = uniform_price_project(ind, &rec.prices)?;
                    if e.equilibrium_allocation(&q, self.a.eps_eq)?.is_some() {
                        project_ok += 1;
                    } else {
                        r.line(format!("projection {} of network equilibrium {} does not clear the economy", fmt_prices(&q), fmt_prices(&rec.prices)));
                    }
                }
            }
            r.line(format!("round trip: lift {lift_ok}/{lifted}, project {project_ok}/{projected}, negative network prices {negative}"));
            r.violation = lift_ok != lifted || project_ok != projected || negative > 0;
            round_trip = json!({
                "lifted": lifted, "lift_ok": lift_ok, "projected": projected, "project_ok": project_ok, "negative_prices": negative,
            });
        }
        r.json = json!({
            "command": "adapt",
            "warnings": self.loaded.warnings,
            "network": induced,
            "round_trip": round_trip,
        });
        Ok(r)
    }
}
