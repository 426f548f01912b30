//! Sampled checkers for substitutability, aggregate laws, isolated bundles and
//! boundedness conditions.
//!
//! Every condition compares the demand at two price vectors p and p' that
//! differ in one of two patterns:
//!
//! * purchase-raise: sale prices equal, purchase prices p ≤ p';
//! * sale-lower: purchase prices equal, sale prices p ≥ p'.
//!
//! Pair sources produce grid-aligned vectors so that the equality clauses
//! compare exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::demand::{demand_set, nib_witness};
use crate::error::{Error, Result};
use crate::model::Bundle;
use crate::utility::{FirmUtility, PriceBox, UtilityProfile};

/// Which of the two comparison patterns a pair follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clause {
    PurchaseRaise,
    SaleLower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Weak,
    Expansion,
    Contraction,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Weak => "weak",
            Variant::Expansion => "expansion",
            Variant::Contraction => "contraction",
        }
    }
}

/// The condition being checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    SameSide,
    CrossSide,
    FullSubstitutability,
    AggregateDemand,
    AggregateSupply,
    MonotoneSubstitutability,
    SingleImprovement,
}

impl Property {
    pub fn name(self) -> &'static str {
        match self {
            Property::SameSide => "same-side substitutability",
            Property::CrossSide => "cross-side complementarity",
            Property::FullSubstitutability => "full substitutability",
            Property::AggregateDemand => "law of aggregate demand",
            Property::AggregateSupply => "law of aggregate supply",
            Property::MonotoneSubstitutability => "monotone substitutability",
            Property::SingleImprovement => "single improvement",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    PassOnSample,
    Violated,
}

/// One failing instance of a condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub p: Vec<f64>,
    pub p2: Option<Vec<f64>>,
    /// The bundle for which no partner exists.
    pub bundle: Bundle,
    pub clause: Option<Clause>,
    pub trace: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub property: String,
    pub variant: String,
    pub pairs_tested: usize,
    /// Total number of violations; `violations` keeps at most `MAX_KEPT`.
    pub violation_count: usize,
    pub violations: Vec<Violation>,
    pub verdict: Verdict,
}

const MAX_KEPT: usize = 1000;

impl PropertyReport {
    fn new(property: &str, variant: &str, pairs_tested: usize, mut all: Vec<Violation>) -> PropertyReport {
        let violation_count = all.len();
        all.truncate(MAX_KEPT);
        let verdict = if violation_count == 0 { Verdict::PassOnSample } else { Verdict::Violated };
        PropertyReport {
            property: property.to_string(),
            variant: variant.to_string(),
            pairs_tested,
            violation_count,
            violations: all,
            verdict,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::PassOnSample
    }

    /// Merges reports of the same condition (e.g. one per firm).
    pub fn merge(reports: Vec<PropertyReport>) -> Option<PropertyReport> {
        let first = reports.first()?.clone();
        let pairs = reports.iter().map(|r| r.pairs_tested).sum();
        let count: usize = reports.iter().map(|r| r.violation_count).sum();
        let mut all: Vec<Violation> = reports.into_iter().flat_map(|r| r.violations).collect();
        all.truncate(MAX_KEPT);
        let verdict = if count == 0 { Verdict::PassOnSample } else { Verdict::Violated };
        Some(PropertyReport { pairs_tested: pairs, violation_count: count, violations: all, verdict, ..first })
    }
}

/// A finite grid with the same values on every coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Grid {
        Grid { lo, hi, step }
    }

    pub fn len(&self) -> usize {
        if self.hi < self.lo || self.step <= 0.0 {
            return 0;
        }
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.step
    }
}

/// Where the compared price pairs come from.
#[derive(Debug, Clone, PartialEq)]
pub enum PairSource {
    /// Every ordered grid pair following one of the two patterns.
    Grid(Grid),
    /// Grid pairs that move exactly one coordinate in the pattern's direction.
    SingleMoves(Grid),
    /// Explicit full-length price vectors.
    List(Vec<(Vec<f64>, Vec<f64>)>),
}

/// Something that reports demanded bundles at a price vector.
pub trait DemandOracle: Sync {
    fn upstream(&self) -> Bundle;
    fn downstream(&self) -> Bundle;
    /// `None` when the oracle is undefined at `p`; such pairs are skipped.
    fn demand(&self, p: &[f64]) -> Option<Vec<Bundle>>;
    fn scope(&self) -> Bundle {
        self.upstream().union(self.downstream())
    }
}

/// The demand correspondence of a utility function at a tie tolerance.
pub struct UtilityDemand<'a> {
    pub utility: &'a FirmUtility,
    pub eps_tie: f64,
}

impl DemandOracle for UtilityDemand<'_> {
    fn upstream(&self) -> Bundle {
        self.utility.upstream()
    }
    fn downstream(&self) -> Bundle {
        self.utility.downstream()
    }
    fn demand(&self, p: &[f64]) -> Option<Vec<Bundle>> {
        Some(demand_set(self.utility, p, self.eps_tie).bundles)
    }
}

/// A single-valued selection defined on finitely many price vectors.
pub struct FiniteSelection {
    pub upstream: Bundle,
    pub downstream: Bundle,
    pub points: Vec<(Vec<f64>, Bundle)>,
}

impl DemandOracle for FiniteSelection {
    fn upstream(&self) -> Bundle {
        self.upstream
    }
    fn downstream(&self) -> Bundle {
        self.downstream
    }
    fn demand(&self, p: &[f64]) -> Option<Vec<Bundle>> {
        self.points.iter().find(|(q, _)| q.as_slice() == p).map(|(_, b)| vec![*b])
    }
}

struct Sides {
    up: Bundle,
    down: Bundle,
}

impl Sides {
    fn net(&self, b: Bundle) -> i32 {
        b.intersection(self.up).len() as i32 - b.intersection(self.down).len() as i32
    }

    /// Trades of the firm whose price is equal in both vectors.
    fn equal(&self, p: &[f64], q: &[f64]) -> Bundle {
        Bundle::from_indices(self.up.union(self.down).iter().filter(|t| p[*t] == q[*t]))
    }

    fn clauses(&self, p: &[f64], q: &[f64]) -> Vec<Clause> {
        let eq_sales = self.down.iter().all(|t| p[t] == q[t]);
        let eq_purchases = self.up.iter().all(|t| p[t] == q[t]);
        let mut out = Vec::new();
        if eq_sales && self.up.iter().all(|t| p[t] <= q[t]) {
            out.push(Clause::PurchaseRaise);
        }
        if eq_purchases && self.down.iter().all(|t| p[t] >= q[t]) {
            out.push(Clause::SaleLower);
        }
        out
    }

    /// Whether Ψ (at p) and Ψ' (at p') stand in the relation required by `prop`.
    fn related(&self, prop: Property, clause: Clause, eq: Bundle, psi: Bundle, psi2: Bundle) -> bool {
        let (same, other) = match clause {
            Clause::PurchaseRaise => (self.up, self.down),
            Clause::SaleLower => (self.down, self.up),
        };
        let sss = psi.intersection(same).intersection(eq).is_subset(psi2);
        let csc = psi2.intersection(other).is_subset(psi.intersection(other));
        let law = match clause {
            Clause::PurchaseRaise => self.net(psi) >= self.net(psi2),
            Clause::SaleLower => -self.net(psi) >= -self.net(psi2),
        };
        match prop {
            Property::SameSide => sss,
            Property::CrossSide => csc,
            Property::FullSubstitutability => sss && csc,
            Property::AggregateDemand => clause == Clause::SaleLower || law,
            Property::AggregateSupply => clause == Clause::PurchaseRaise || law,
            Property::MonotoneSubstitutability => sss && csc && law,
            Property::SingleImprovement => {
                let a = psi.intersection(self.up).difference(psi2).len() + psi2.intersection(self.down).difference(psi).len();
                let b = psi2.intersection(self.up).difference(psi).len() + psi.intersection(self.down).difference(psi2).len();
                a <= 1 && b <= 1
            }
        }
    }
}

fn label(bs: &[Bundle]) -> String {
    let parts: Vec<String> = bs.iter().map(|b| format!("{b:?}")).collect();
    format!("[{}]", parts.join(" "))
}

/// Checks one pair; returns `None` when the pair was not applicable.
fn check_pair(
    sides: &Sides,
    prop: Property,
    variant: Variant,
    p: &[f64],
    q: &[f64],
    dp: &[Bundle],
    dq: &[Bundle],
    clauses: &[Clause],
) -> Option<Vec<Violation>> {
    if variant == Variant::Weak && (dp.len() != 1 || dq.len() != 1) {
        return None;
    }
    let eq = sides.equal(p, q);
    let mut out = Vec::new();
    for &clause in clauses {
        let rel = |psi: Bundle, psi2: Bundle| sides.related(prop, clause, eq, psi, psi2);
        let failing: Option<(Bundle, &str)> = match variant {
            Variant::Weak | Variant::Expansion => {
                dq.iter().find(|&&b2| !dp.iter().any(|&b| rel(b, b2))).map(|b| (*b, "at p' no partner in D(p)"))
            }
            Variant::Contraction => {
                dp.iter().find(|&&b| !dq.iter().any(|&b2| rel(b, b2))).map(|b| (*b, "at p no partner in D(p')"))
            }
        };
        if let Some((b, why)) = failing {
            out.push(Violation {
                p: p.to_vec(),
                p2: Some(q.to_vec()),
                bundle: b,
                clause: Some(clause),
                trace: format!("{why}: bundle {b:?}; D(p)={} D(p')={}", label(dp), label(dq)),
            });
        }
    }
    Some(out)
}

/// Runs `prop` at `variant` over the pairs of `pairs`.
pub fn check(oracle: &dyn DemandOracle, prop: Property, variant: Variant, pairs: &PairSource, num_trades: usize) -> Result<PropertyReport> {
    let sides = Sides { up: oracle.upstream(), down: oracle.downstream() };
    let (tested, violations) = match pairs {
        PairSource::List(list) => {
            let mut tested = 0;
            let mut all = Vec::new();
            for (p, q) in list {
                let clauses = sides.clauses(p, q);
                if clauses.is_empty() {
                    return Err(Error::PatternViolation(format!("{p:?} vs {q:?}")));
                }
                if prop == Property::SingleImprovement && !single_move(&sides, p, q) {
                    return Err(Error::PatternViolation(format!("not a single-coordinate move: {p:?} vs {q:?}")));
                }
                let (Some(dp), Some(dq)) = (oracle.demand(p), oracle.demand(q)) else { continue };
                if let Some(v) = check_pair(&sides, prop, variant, p, q, &dp, &dq, &clauses) {
                    tested += 1;
                    all.extend(v);
                }
            }
            (tested, all)
        }
        PairSource::Grid(g) => grid_check(oracle, &sides, prop, variant, g, num_trades, false),
        PairSource::SingleMoves(g) => grid_check(oracle, &sides, prop, variant, g, num_trades, true),
    };
    Ok(PropertyReport::new(prop.name(), variant.name(), tested, violations))
}

fn single_move(sides: &Sides, p: &[f64], q: &[f64]) -> bool {
    let moved: Vec<usize> = sides.up.union(sides.down).iter().filter(|t| p[*t] != q[*t]).collect();
    match moved.as_slice() {
        [t] => (sides.up.contains(*t) && p[*t] < q[*t]) || (sides.down.contains(*t) && p[*t] > q[*t]),
        _ => false,
    }
}

/// Full-length price vectors for every point of the grid over the oracle's scope.
pub fn grid_points(scope: Bundle, grid: &Grid, num_trades: usize) -> Vec<Vec<f64>> {
    let dims: Vec<usize> = scope.iter().collect();
    let n = grid.len();
    let total = n.pow(dims.len() as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; num_trades];
            for &t in dims.iter().rev() {
                p[t] = grid.value(idx % n);
                idx /= n;
            }
            p
        })
        .collect()
}

fn grid_check(
    oracle: &dyn DemandOracle,
    sides: &Sides,
    prop: Property,
    variant: Variant,
    grid: &Grid,
    num_trades: usize,
    single: bool,
) -> (usize, Vec<Violation>) {
    let dims: Vec<usize> = sides.up.union(sides.down).iter().collect();
    let n = grid.len();
    if n == 0 {
        return (0, Vec::new());
    }
    let points = grid_points(sides.up.union(sides.down), grid, num_trades);
    let demands: Vec<Option<Vec<Bundle>>> = points.par_iter().map(|p| oracle.demand(p)).collect();
    let k = dims.len();
    let stride: Vec<usize> = (0..k).map(|d| n.pow((k - 1 - d) as u32)).collect();
    let is_up: Vec<bool> = dims.iter().map(|t| sides.up.contains(*t)).collect();
    let results: Vec<(usize, Vec<Violation>)> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut tested = 0;
            let mut found = Vec::new();
            let Some(dp) = &demands[i] else { return (0, found) };
            let coords: Vec<usize> = (0..k).map(|d| i / stride[d] % n).collect();
            let mut visit = |j: usize, clause: Clause| {
                if let Some(dq) = &demands[j] {
                    if let Some(v) = check_pair(sides, prop, variant, &points[i], &points[j], dp, dq, &[clause]) {
                        tested += 1;
                        found.extend(v);
                    }
                }
            };
            for clause in [Clause::PurchaseRaise, Clause::SaleLower] {
                let movable: Vec<usize> = (0..k)
                    .filter(|&d| is_up[d] == (clause == Clause::PurchaseRaise))
                    .collect();
                // Range of each movable coordinate in the clause's direction.
                let range = |d: usize| -> (usize, usize) {
                    if clause == Clause::PurchaseRaise {
                        (coords[d], n - 1)
                    } else {
                        (0, coords[d])
                    }
                };
                if single {
                    for &d in &movable {
                        let (a, b) = range(d);
                        for v in a..=b {
                            if v != coords[d] {
                                visit(i - coords[d] * stride[d] + v * stride[d], clause);
                            }
                        }
                    }
                    continue;
                }
                let mut cur: Vec<usize> = movable.iter().map(|&d| range(d).0).collect();
                loop {
                    let j = movable
                        .iter()
                        .zip(&cur)
                        .fold(i, |acc, (&d, &v)| acc - coords[d] * stride[d] + v * stride[d]);
                    if j != i {
                        visit(j, clause);
                    }
                    let mut pos = 0;
                    loop {
                        if pos == movable.len() {
                            break;
                        }
                        let d = movable[pos];
                        if cur[pos] < range(d).1 {
                            cur[pos] += 1;
                            break;
                        }
                        cur[pos] = range(d).0;
                        pos += 1;
                    }
                    if pos == movable.len() {
                        break;
                    }
                }
            }
            (tested, found)
        })
        .collect();
    let tested = results.iter().map(|r| r.0).sum();
    (tested, results.into_iter().flat_map(|r| r.1).collect())
}

/// Same-side substitutability of a utility at a tie tolerance.
pub fn check_same_side(u: &FirmUtility, variant: Variant, pairs: &PairSource, num_trades: usize, eps_tie: f64) -> Result<PropertyReport> {
    check(&UtilityDemand { utility: u, eps_tie }, Property::SameSide, variant, pairs, num_trades)
}

pub fn check_cross_side(u: &FirmUtility, variant: Variant, pairs: &PairSource, num_trades: usize, eps_tie: f64) -> Result<PropertyReport> {
    check(&UtilityDemand { utility: u, eps_tie }, Property::CrossSide, variant, pairs, num_trades)
}

/// Which aggregate law to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Law {
    Demand,
    Supply,
}

/// Aggregate law; `strong` uses the expansion quantifiers, otherwise only
/// single-valued pairs are tested.
pub fn check_aggregate_law(u: &FirmUtility, law: Law, strong: bool, pairs: &PairSource, num_trades: usize, eps_tie: f64) -> Result<PropertyReport> {
    let prop = match law {
        Law::Demand => Property::AggregateDemand,
        Law::Supply => Property::AggregateSupply,
    };
    let variant = if strong { Variant::Expansion } else { Variant::Weak };
    let mut r = check(&UtilityDemand { utility: u, eps_tie }, prop, variant, pairs, num_trades)?;
    r.variant = if strong { "strong".into() } else { "weak".into() };
    Ok(r)
}

/// Full substitutability: in the expansion case one bundle must satisfy both
/// inclusions; the weak and contraction cases require both parts.
pub fn check_full_substitutability(u: &FirmUtility, variant: Variant, pairs: &PairSource, num_trades: usize, eps_tie: f64) -> Result<PropertyReport> {
    let oracle = UtilityDemand { utility: u, eps_tie };
    if variant == Variant::Contraction {
        let a = check(&oracle, Property::SameSide, variant, pairs, num_trades)?;
        let b = check(&oracle, Property::CrossSide, variant, pairs, num_trades)?;
        let mut r = PropertyReport::merge(vec![a, b]).unwrap();
        r.property = Property::FullSubstitutability.name().into();
        r.pairs_tested /= 2;
        return Ok(r);
    }
    check(&oracle, Property::FullSubstitutability, variant, pairs, num_trades)
}

pub fn check_monotone_substitutability(u: &FirmUtility, pairs: &PairSource, num_trades: usize, eps_tie: f64) -> Result<PropertyReport> {
    check(&UtilityDemand { utility: u, eps_tie }, Property::MonotoneSubstitutability, Variant::Expansion, pairs, num_trades)
}

/// Single improvement over single-coordinate moves (grid sources are
/// restricted to such moves automatically).
pub fn check_single_improvement(u: &FirmUtility, pairs: &PairSource, num_trades: usize, eps_tie: f64) -> Result<PropertyReport> {
    let pairs = match pairs {
        PairSource::Grid(g) => PairSource::SingleMoves(*g),
        other => other.clone(),
    };
    check(&UtilityDemand { utility: u, eps_tie }, Property::SingleImprovement, Variant::Expansion, &pairs, num_trades)
}

/// No isolated bundles: every demanded bundle at every grid point is the
/// unique demand somewhere within `eps`.
pub fn check_nib(u: &FirmUtility, grid: &Grid, num_trades: usize, eps: f64, attempts: usize, eps_tie: f64) -> PropertyReport {
    let points = grid_points(u.scope(), grid, num_trades);
    let results: Vec<(usize, Vec<Violation>)> = points
        .par_iter()
        .map(|p| {
            let d = demand_set(u, p, eps_tie);
            let mut v = Vec::new();
            for &b in &d.bundles {
                if let Ok(None) = nib_witness(u, p, b, eps, attempts, eps_tie) {
                    v.push(Violation {
                        p: p.clone(),
                        p2: None,
                        bundle: b,
                        clause: None,
                        trace: format!("no price within {eps} where {b:?} is uniquely demanded"),
                    });
                }
            }
            (d.bundles.len(), v)
        })
        .collect();
    let tested = results.iter().map(|r| r.0).sum();
    PropertyReport::new("no isolated bundles", "sampled", tested, results.into_iter().flat_map(|r| r.1).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// Bounded compensating variations.
    Bcv,
    /// Bounded willingness to pay.
    Bwp,
}

/// Sampled boundedness check for one firm.
pub fn check_bounds(u: &FirmUtility, kind: BoundKind, bx: PriceBox, samples: usize, k: f64, num_trades: usize, seed: u64) -> PropertyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let mut tested = 0;
    let transfer = |b: Bundle, p: &[f64]| b.iter().map(|t| u.side(t) * p[t]).sum::<f64>();
    for _ in 0..samples {
        let mut p = vec![0.0; num_trades];
        for t in u.scope().iter() {
            p[t] = rng.gen_range(bx.lo..bx.hi);
        }
        match kind {
            BoundKind::Bcv => {
                let outside = u.eval(Bundle::EMPTY, &p);
                for (b, e) in u.entries() {
                    if b.is_empty() {
                        continue;
                    }
                    let v = e.eval(&p);
                    if outside.map_or(true, |o| v > o) {
                        tested += 1;
                        let t = transfer(b, &p);
                        if t <= -k {
                            violations.push(Violation {
                                p: p.clone(),
                                p2: None,
                                bundle: b,
                                clause: None,
                                trace: format!("net transfer {t} <= -{k} while the bundle beats the outside option"),
                            });
                        }
                    }
                }
            }
            BoundKind::Bwp => {
                for b in demand_set(u, &p, crate::demand::EPS_TIE).bundles {
                    tested += 1;
                    let bad = b.iter().find(|&t| if u.downstream().contains(t) { p[t] <= -k } else { p[t] >= k });
                    if let Some(t) = bad {
                        violations.push(Violation {
                            p: p.clone(),
                            p2: None,
                            bundle: b,
                            clause: None,
                            trace: format!("demanded bundle trades #{t} at price {} beyond the bound {k}", p[t]),
                        });
                    }
                }
            }
        }
    }
    let name = match kind {
        BoundKind::Bcv => "bounded compensating variations",
        BoundKind::Bwp => "bounded willingness to pay",
    };
    PropertyReport::new(name, "sampled", tested, violations)
}

/// [`check_bounds`] for every firm of a profile.
pub fn check_profile_bounds(u: &UtilityProfile, kind: BoundKind, bx: PriceBox, samples: usize, k: f64, seed: u64) -> PropertyReport {
    let n = u.network().num_trades();
    let reports: Vec<PropertyReport> = u
        .firms()
        .iter()
        .enumerate()
        .map(|(i, f)| check_bounds(f, kind, bx, samples, k, n, seed.wrapping_add(i as u64)))
        .collect();
    PropertyReport::merge(reports).unwrap_or_else(|| PropertyReport::new("bounds", "sampled", 0, Vec::new()))
}
