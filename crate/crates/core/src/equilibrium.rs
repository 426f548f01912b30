//! Surplus function, equilibrium tests and searches, and the structural checks
//! on pairs of equilibria (lattice, rural hospitals, extremal elements).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::demand::indirect_utility;
use crate::error::{Error, Result};
use crate::model::{join_meet_prices, Bundle, FirmId, Role};
use crate::utility::{FirmUtility, UtilityProfile};

/// Default tolerance on the surplus for accepting an equilibrium.
pub const EPS_EQ: f64 = 1e-7;
/// Supports listed per record are capped at this many.
pub const MAX_SUPPORTS: usize = 1024;

/// An equilibrium price vector with the trade sets that clear at it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumRecord {
    pub prices: Vec<f64>,
    /// Global trade sets Ψ with Ψ_f in every firm's demand, in bitset order.
    pub supports: Vec<Bundle>,
    /// True when more than [`MAX_SUPPORTS`] supports exist.
    pub supports_capped: bool,
    /// Net-trade index of every firm under the first support.
    pub net_indices: Vec<i32>,
    pub surplus: f64,
}

/// Per-firm regrets of feasible bundles, sorted ascending.
type Options = Vec<Vec<(Bundle, f64)>>;

/// Exact evaluator of the surplus Z(p) and of the supports at p.
///
/// Firms are visited in a fixed order; choosing a bundle for a firm decides
/// every trade it touches, so later firms must agree on those trades.
pub struct Surplus<'a> {
    profile: &'a UtilityProfile,
    order: Vec<FirmId>,
    scopes: Vec<Bundle>,
}

impl<'a> Surplus<'a> {
    pub fn new(profile: &'a UtilityProfile) -> Surplus<'a> {
        let scopes: Vec<Bundle> = profile.firms().iter().map(|u| u.scope()).collect();
        let mut order: Vec<FirmId> = (0..scopes.len()).collect();
        order.sort_by_key(|&f| std::cmp::Reverse(scopes[f].len()));
        Surplus { profile, order, scopes }
    }

    fn options(&self, p: &[f64]) -> Result<Options> {
        self.profile
            .firms()
            .iter()
            .map(|u| {
                let v = indirect_utility(u, p);
                if !v.is_finite() {
                    return Err(Error::AllInfeasible(u.name().to_string()));
                }
                let mut opts: Vec<(Bundle, f64)> = u
                    .entries()
                    .filter_map(|(b, e)| {
                        let x = e.eval(p);
                        x.is_finite().then(|| (b, (v - x).max(0.0)))
                    })
                    .collect();
                opts.sort_by(|a, b| a.1.total_cmp(&b.1));
                Ok(opts)
            })
            .collect()
    }

    fn consistent(&self, f: FirmId, b: Bundle, decided: Bundle, included: Bundle) -> bool {
        let shared = decided.intersection(self.scopes[f]);
        b.intersection(shared) == included.intersection(shared)
    }

    fn min_max(&self, opts: &Options) -> f64 {
        let mut best = f64::INFINITY;
        self.min_max_rec(opts, 0, Bundle::EMPTY, Bundle::EMPTY, 0.0, &mut best);
        best
    }

    fn min_max_rec(&self, opts: &Options, depth: usize, decided: Bundle, included: Bundle, cur: f64, best: &mut f64) {
        if depth == self.order.len() {
            *best = best.min(cur);
            return;
        }
        let f = self.order[depth];
        for &(b, r) in &opts[f] {
            let m = cur.max(r);
            if m >= *best {
                break;
            }
            if self.consistent(f, b, decided, included) {
                self.min_max_rec(opts, depth + 1, decided.union(self.scopes[f]), included.union(b), m, best);
            }
        }
    }

    fn collect_rec(&self, opts: &Options, depth: usize, decided: Bundle, included: Bundle, tol: f64, out: &mut Vec<Bundle>, cap: usize) -> bool {
        if depth == self.order.len() {
            if out.len() >= cap {
                return false;
            }
            out.push(included);
            return true;
        }
        let f = self.order[depth];
        for &(b, r) in &opts[f] {
            if r > tol {
                break;
            }
            if self.consistent(f, b, decided, included)
                && !self.collect_rec(opts, depth + 1, decided.union(self.scopes[f]), included.union(b), tol, out, cap)
            {
                return false;
            }
        }
        true
    }

    /// Z(p): the smallest, over global trade sets, of the largest firm regret.
    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        let z = self.min_max(&self.options(p)?);
        debug_assert!(z >= 0.0);
        Ok(z)
    }

    /// Every global trade set whose regret is at most `tol` for all firms.
    pub fn supports(&self, p: &[f64], tol: f64, cap: usize) -> Result<(Vec<Bundle>, bool)> {
        let opts = self.options(p)?;
        let mut out = Vec::new();
        let complete = self.collect_rec(&opts, 0, Bundle::EMPTY, Bundle::EMPTY, tol, &mut out, cap);
        out.sort();
        out.dedup();
        Ok((out, !complete))
    }

    /// Largest regret of firm choices restricted from one global trade set.
    pub fn regret_of(&self, psi: Bundle, p: &[f64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for (f, u) in self.profile.firms().iter().enumerate() {
            let v = indirect_utility(u, p);
            if !v.is_finite() {
                return Err(Error::AllInfeasible(u.name().to_string()));
            }
            match u.eval(psi.intersection(self.scopes[f]), p) {
                Some(x) if x.is_finite() => worst = worst.max(v - x),
                _ => return Ok(f64::INFINITY),
            }
        }
        Ok(worst)
    }

    /// Lower bound on Z over the box [lo, hi], valid for utilities that are
    /// monotone in prices.
    pub fn lower_bound(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let opts: Options = self
            .profile
            .firms()
            .iter()
            .map(|u| {
                let (best, worst) = corners(u, lo, hi);
                let mut vals: Vec<(Bundle, f64, f64)> = u
                    .entries()
                    .map(|(b, e)| (b, e.eval(&worst), e.eval(&best)))
                    .collect();
                vals.retain(|v| !v.2.is_nan());
                let floor = vals.iter().map(|v| v.1).filter(|x| !x.is_nan()).fold(f64::NEG_INFINITY, f64::max);
                let mut o: Vec<(Bundle, f64)> = vals
                    .into_iter()
                    .filter(|v| v.2 > f64::NEG_INFINITY)
                    .map(|(b, _, umax)| (b, if floor.is_finite() { (floor - umax).max(0.0) } else { 0.0 }))
                    .collect();
                o.sort_by(|a, b| a.1.total_cmp(&b.1));
                o
            })
            .collect();
        self.min_max(&opts)
    }
}

/// Favourable and unfavourable corners of a box for a firm: purchases cheap
/// and sales dear, and the reverse.
fn corners(u: &FirmUtility, lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut best = lo.to_vec();
    let mut worst = hi.to_vec();
    for t in u.downstream().iter() {
        best[t] = hi[t];
        worst[t] = lo[t];
    }
    (best, worst)
}

/// Z(p) for a profile.
pub fn surplus(u: &UtilityProfile, p: &[f64]) -> Result<f64> {
    Surplus::new(u).eval(p)
}

/// The equilibrium record at `p`, or `None` when no global trade set clears.
pub fn is_equilibrium(u: &UtilityProfile, p: &[f64], eps_eq: f64, eps_tie: f64) -> Result<Option<EquilibriumRecord>> {
    record_at(&Surplus::new(u), u, p, eps_eq.max(eps_tie))
}

fn record_at(s: &Surplus, u: &UtilityProfile, p: &[f64], tol: f64) -> Result<Option<EquilibriumRecord>> {
    let (supports, capped) = s.supports(p, tol, MAX_SUPPORTS)?;
    let Some(&first) = supports.first() else { return Ok(None) };
    let net = u.network();
    Ok(Some(EquilibriumRecord {
        prices: p.to_vec(),
        net_indices: (0..net.num_firms()).map(|f| net.net_index(f, first)).collect(),
        supports,
        supports_capped: capped,
        surplus: s.eval(p)?,
    }))
}

/// Coordinate-descent settings used to polish near-equilibrium grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Descent {
    /// Initial step as a fraction of the grid step.
    pub initial_fraction: f64,
    pub shrink: f64,
    pub min_step: f64,
    pub max_evals: usize,
}

impl Default for Descent {
    fn default() -> Self {
        Descent { initial_fraction: 0.5, shrink: 0.5, min_step: 1e-10, max_evals: 20_000 }
    }
}

/// Settings of [`find_equilibria`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchConfig {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub eps_eq: f64,
    pub eps_tie: f64,
    /// Grid points with Z at most this value seed a descent.
    pub trigger: f64,
    pub max_starts: usize,
    pub max_records: usize,
    pub descent: Descent,
    /// Skip boxes whose surplus lower bound exceeds the trigger.
    pub prune: bool,
}

impl SearchConfig {
    pub fn new(lo: f64, hi: f64, step: f64) -> SearchConfig {
        SearchConfig {
            lo,
            hi,
            step,
            eps_eq: EPS_EQ,
            eps_tie: crate::demand::EPS_TIE,
            trigger: step / 2.0,
            max_starts: 64,
            max_records: 5000,
            descent: Descent::default(),
            prune: true,
        }
    }
}

/// Output of [`find_equilibria`] with the statistics of the scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSearch {
    pub records: Vec<EquilibriumRecord>,
    pub grid_points: f64,
    pub evaluated: usize,
    pub pruned_boxes: usize,
    pub descents: usize,
    /// Number of distinct equilibria found before the record cap applied.
    pub found: usize,
    pub pruning_used: bool,
    pub note: String,
}

struct Scan {
    equilibria: Vec<(Vec<usize>, f64)>,
    near: Vec<(Vec<usize>, f64)>,
    evaluated: usize,
    pruned: usize,
}

/// Searches the grid box for equilibria; exact on grid points, polished off
/// the grid by coordinate descent from near-equilibrium local minima.
/// Completeness is relative to the grid resolution.
pub fn find_equilibria(u: &UtilityProfile, cfg: &SearchConfig) -> Result<EquilibriumSearch> {
    let n = u.network().num_trades();
    let m = if cfg.hi >= cfg.lo && cfg.step > 0.0 { ((cfg.hi - cfg.lo) / cfg.step + 1e-9).floor() as usize + 1 } else { 0 };
    if m == 0 {
        return Err(Error::EmptyBox);
    }
    let s = Surplus::new(u);
    if n == 0 {
        let rec = record_at(&s, u, &[], cfg.eps_eq.max(cfg.eps_tie))?.ok_or(Error::NoEquilibriumFound)?;
        return Ok(EquilibriumSearch {
            records: vec![rec],
            grid_points: 1.0,
            evaluated: 1,
            pruned_boxes: 0,
            descents: 0,
            found: 1,
            pruning_used: false,
            note: "no trades: the empty trade set is the only arrangement".into(),
        });
    }
    let value = |k: usize| cfg.lo + k as f64 * cfg.step;
    let to_prices = |idx: &[usize]| -> Vec<f64> { idx.iter().map(|&k| value(k)).collect() };
    let prune = cfg.prune && monotone_on_box(u, cfg.lo, cfg.hi);
    let tol = cfg.eps_eq.max(cfg.eps_tie);

    // Split the root box a few times so the scan parallelises.
    let mut roots = vec![vec![(0usize, m - 1); n]];
    while roots.len() < 64 {
        let mut next = Vec::new();
        let mut split_any = false;
        for b in roots {
            match split(&b) {
                Some((l, r)) => {
                    split_any = true;
                    next.push(l);
                    next.push(r);
                }
                None => next.push(b),
            }
        }
        roots = next;
        if !split_any {
            break;
        }
    }
    let scans: Vec<Result<Scan>> = roots
        .par_iter()
        .map(|root| {
            let mut scan = Scan { equilibria: Vec::new(), near: Vec::new(), evaluated: 0, pruned: 0 };
            let mut stack = vec![root.clone()];
            while let Some(b) = stack.pop() {
                let single = b.iter().all(|(a, c)| a == c);
                if single {
                    let idx: Vec<usize> = b.iter().map(|x| x.0).collect();
                    let z = s.eval(&to_prices(&idx))?;
                    scan.evaluated += 1;
                    if z <= tol {
                        scan.equilibria.push((idx, z));
                    } else if z <= cfg.trigger {
                        scan.near.push((idx, z));
                    }
                    continue;
                }
                if prune {
                    let lo: Vec<f64> = b.iter().map(|x| value(x.0)).collect();
                    let hi: Vec<f64> = b.iter().map(|x| value(x.1)).collect();
                    if s.lower_bound(&lo, &hi) > cfg.trigger.max(tol) {
                        scan.pruned += 1;
                        continue;
                    }
                }
                let (l, r) = split(&b).unwrap();
                stack.push(r);
                stack.push(l);
            }
            Ok(scan)
        })
        .collect();
    let mut equilibria = Vec::new();
    let mut near = Vec::new();
    let (mut evaluated, mut pruned) = (0, 0);
    for sc in scans {
        let sc = sc?;
        equilibria.extend(sc.equilibria);
        near.extend(sc.near);
        evaluated += sc.evaluated;
        pruned += sc.pruned;
    }
    equilibria.sort_by(|a, b| a.0.cmp(&b.0));
    let mut points: Vec<Vec<f64>> = equilibria.iter().map(|(i, _)| to_prices(i)).collect();

    // Descend from near points that are local minima along the grid axes.
    near.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let mut starts = Vec::new();
    for (idx, z) in &near {
        if starts.len() >= cfg.max_starts {
            break;
        }
        let mut local_min = true;
        'axes: for d in 0..n {
            for delta in [-1i64, 1] {
                let k = idx[d] as i64 + delta;
                if k < 0 || k >= m as i64 {
                    continue;
                }
                let mut j = idx.clone();
                j[d] = k as usize;
                if s.eval(&to_prices(&j))? < *z {
                    local_min = false;
                    break 'axes;
                }
            }
        }
        if local_min {
            starts.push(to_prices(idx));
        }
    }
    let descended: Vec<Result<Option<Vec<f64>>>> = starts
        .par_iter()
        .map(|p0| {
            let (q, z) = descend(&s, p0, cfg.step * cfg.descent.initial_fraction, &cfg.descent, cfg.lo, cfg.hi)?;
            if z > tol {
                return Ok(None);
            }
            let snapped: Vec<f64> = q.iter().map(|x| value(((x - cfg.lo) / cfg.step).round().clamp(0.0, (m - 1) as f64) as usize)).collect();
            Ok(Some(if s.eval(&snapped)? <= tol { snapped } else { q }))
        })
        .collect();
    for d in descended {
        if let Some(q) = d? {
            if !points.iter().any(|p| linf(p, &q) <= 1e-6) {
                points.push(q);
            }
        }
    }
    let found = points.len();
    let kept = subsample(points, cfg.max_records);
    let mut records = Vec::with_capacity(kept.len());
    for p in kept {
        if let Some(r) = record_at(&s, u, &p, tol)? {
            records.push(r);
        }
    }
    let note = format!(
        "grid {m}^{n} on [{}, {}] step {}: exact on grid points, off-grid equilibria found by descent from {} starts; complete only up to grid resolution{}",
        cfg.lo,
        cfg.hi,
        cfg.step,
        starts.len(),
        if found > records.len() { format!("; {found} equilibria found, {} kept", records.len()) } else { String::new() }
    );
    Ok(EquilibriumSearch {
        records,
        grid_points: (m as f64).powi(n as i32),
        evaluated,
        pruned_boxes: pruned,
        descents: starts.len(),
        found,
        pruning_used: prune,
        note,
    })
}

fn split(b: &[(usize, usize)]) -> Option<(Vec<(usize, usize)>, Vec<(usize, usize)>)> {
    let (d, _) = b.iter().enumerate().filter(|(_, x)| x.1 > x.0).max_by_key(|(i, x)| (x.1 - x.0, std::cmp::Reverse(*i)))?;
    let mid = (b[d].0 + b[d].1) / 2;
    let mut l = b.to_vec();
    let mut r = b.to_vec();
    l[d].1 = mid;
    r[d].0 = mid + 1;
    Some((l, r))
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Sampled weak monotonicity of every bundle utility in its own prices.
fn monotone_on_box(u: &UtilityProfile, lo: f64, hi: f64) -> bool {
    let n = u.network().num_trades();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let delta = 1e-3 * (hi - lo).max(1.0);
    for _ in 0..64 {
        let p: Vec<f64> = (0..n).map(|_| if hi > lo { rng.gen_range(lo..hi) } else { lo }).collect();
        for fu in u.firms() {
            for (b, e) in fu.entries() {
                let before = e.eval(&p);
                for t in b.iter() {
                    let mut q = p.clone();
                    q[t] += delta;
                    let after = e.eval(&q);
                    let ok = if fu.downstream().contains(t) { after >= before - 1e-12 } else { after <= before + 1e-12 };
                    if !ok {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Cyclic coordinate search on Z with a shrinking step, kept inside [lo, hi].
pub fn descend(s: &Surplus, p0: &[f64], initial: f64, cfg: &Descent, lo: f64, hi: f64) -> Result<(Vec<f64>, f64)> {
    let mut p = p0.to_vec();
    let mut z = s.eval(&p)?;
    let mut step = initial;
    let mut evals = 1;
    while step >= cfg.min_step && z > 0.0 && evals < cfg.max_evals {
        let mut improved = false;
        for d in 0..p.len() {
            for dir in [1.0, -1.0] {
                let mut q = p.clone();
                q[d] = (q[d] + dir * step).clamp(lo, hi);
                let zq = s.eval(&q)?;
                evals += 1;
                if zq < z {
                    p = q;
                    z = zq;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= cfg.shrink;
        }
    }
    Ok((p, z))
}

/// Keeps at most `cap` points: evenly spaced in grid order, always including
/// the coordinatewise minimum and maximum when they are among the points.
fn subsample(points: Vec<Vec<f64>>, cap: usize) -> Vec<Vec<f64>> {
    if points.len() <= cap || cap == 0 {
        return points;
    }
    let dims = points[0].len();
    let lo: Vec<f64> = (0..dims).map(|d| points.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..dims).map(|d| points.iter().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let mut keep = vec![false; points.len()];
    let mut left = cap;
    for target in [&lo, &hi] {
        if let Some(i) = points.iter().position(|p| linf(p, target) <= 1e-6) {
            if !keep[i] {
                keep[i] = true;
                left -= 1;
            }
        }
    }
    let stride = points.len() as f64 / left.max(1) as f64;
    for k in 0..left {
        let mut i = (k as f64 * stride) as usize;
        while i < points.len() && keep[i] {
            i += 1;
        }
        if i < points.len() {
            keep[i] = true;
        }
    }
    points.into_iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| p).collect()
}

/// Outcome of comparing the join and meet of two equilibria.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeReport {
    pub join: Vec<f64>,
    pub meet: Vec<f64>,
    pub join_is_equilibrium: bool,
    pub meet_is_equilibrium: bool,
    pub join_surplus: f64,
    pub meet_surplus: f64,
    /// Whether the merged supports (trades of the higher-priced side) clear at
    /// the join, for every pair of listed supports.
    pub join_support_construction: bool,
    pub meet_support_construction: bool,
}

impl LatticeReport {
    pub fn closed(&self) -> bool {
        self.join_is_equilibrium && self.meet_is_equilibrium
    }
}

fn require_equilibrium(s: &Surplus, e: &EquilibriumRecord, tol: f64) -> Result<()> {
    if e.supports.is_empty() || s.eval(&e.prices)? > tol {
        return Err(Error::NotAnEquilibriumInput(format!("{:?}", e.prices)));
    }
    Ok(())
}

/// Checks that the join and meet of two equilibria are equilibria, and that
/// the support built from the trades priced higher (lower) in either clears at
/// the join (meet).
pub fn verify_lattice_pair(u: &UtilityProfile, e: &EquilibriumRecord, e2: &EquilibriumRecord, eps_eq: f64, eps_tie: f64) -> Result<LatticeReport> {
    let s = Surplus::new(u);
    let tol = eps_eq.max(eps_tie);
    require_equilibrium(&s, e, tol)?;
    require_equilibrium(&s, e2, tol)?;
    let (p, q) = (&e.prices, &e2.prices);
    let (join, meet) = join_meet_prices(p, q)?;
    let join_surplus = s.eval(&join)?;
    let meet_surplus = s.eval(&meet)?;
    let n = p.len();
    let higher = Bundle::from_indices((0..n).filter(|&t| p[t] >= q[t]));
    let lower = Bundle::from_indices((0..n).filter(|&t| p[t] <= q[t]));
    let mut join_ok = true;
    let mut meet_ok = true;
    for &a in e.supports.iter().take(64) {
        for &b in e2.supports.iter().take(64) {
            let up = a.intersection(higher).union(b.difference(higher));
            let down = a.intersection(lower).union(b.difference(lower));
            join_ok &= s.regret_of(up, &join)? <= tol;
            meet_ok &= s.regret_of(down, &meet)? <= tol;
        }
    }
    Ok(LatticeReport {
        join_is_equilibrium: join_surplus <= tol,
        meet_is_equilibrium: meet_surplus <= tol,
        join,
        meet,
        join_surplus,
        meet_surplus,
        join_support_construction: join_ok,
        meet_support_construction: meet_ok,
    })
}

/// Support matching by net-trade indices between two equilibria.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuralReport {
    /// (index in first record, index in second record) of matched supports.
    pub matched: Vec<(usize, usize)>,
    /// Supports of the first record with no match in the second.
    pub unmatched_first: Vec<Bundle>,
    /// Supports of the second record with no match in the first.
    pub unmatched_second: Vec<Bundle>,
}

impl RuralReport {
    pub fn all_matched(&self) -> bool {
        self.unmatched_first.is_empty() && self.unmatched_second.is_empty()
    }
}

/// Matches every support of either record with a support of the other that
/// gives every firm the same net-trade index.
pub fn verify_rural_hospitals_pair(u: &UtilityProfile, e: &EquilibriumRecord, e2: &EquilibriumRecord, eps_eq: f64, eps_tie: f64) -> Result<RuralReport> {
    let s = Surplus::new(u);
    let tol = eps_eq.max(eps_tie);
    require_equilibrium(&s, e, tol)?;
    require_equilibrium(&s, e2, tol)?;
    let net = u.network();
    let sig = |b: Bundle| -> Vec<i32> { (0..net.num_firms()).map(|f| net.net_index(f, b)).collect() };
    let left: Vec<Vec<i32>> = e.supports.iter().map(|b| sig(*b)).collect();
    let right: Vec<Vec<i32>> = e2.supports.iter().map(|b| sig(*b)).collect();
    let mut matched = Vec::new();
    let mut unmatched_first = Vec::new();
    for (i, a) in left.iter().enumerate() {
        match right.iter().position(|b| b == a) {
            Some(j) => matched.push((i, j)),
            None => unmatched_first.push(e.supports[i]),
        }
    }
    let unmatched_second = right
        .iter()
        .enumerate()
        .filter(|(_, b)| !left.contains(b))
        .map(|(j, _)| e2.supports[j])
        .collect();
    Ok(RuralReport { matched, unmatched_first, unmatched_second })
}

/// Optimal records for each terminal side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalReport {
    pub seller_optimal: Option<EquilibriumRecord>,
    pub buyer_optimal: Option<EquilibriumRecord>,
    /// Set when no record is best for every terminal seller at once.
    pub seller_issue: Option<String>,
    pub buyer_issue: Option<String>,
    pub has_coordinatewise_max: bool,
    pub has_coordinatewise_min: bool,
}

/// Index of the record that weakly dominates all others under `scores`
/// (higher is better for every column), first in lexicographic price order.
fn dominant(records: &[EquilibriumRecord], scores: &[Vec<f64>], tol: f64) -> Option<usize> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        records[a]
            .prices
            .iter()
            .zip(&records[b].prices)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
        .into_iter()
        .find(|&i| scores.iter().all(|other| other.iter().zip(&scores[i]).all(|(o, mine)| *mine >= o - tol)))
}

/// Picks, among `found`, the record best for every terminal seller and the one
/// best for every terminal buyer, and flags coordinatewise price extremes.
pub fn extremal_equilibria(u: &UtilityProfile, found: &[EquilibriumRecord], tol: f64) -> Result<ExtremalReport> {
    if found.is_empty() {
        return Err(Error::EmptySet);
    }
    let roles = u.network().terminal_roles();
    let indirect = |role: Role| -> Vec<Vec<f64>> {
        found
            .iter()
            .map(|r| {
                roles
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| **x == role)
                    .map(|(f, _)| indirect_utility(u.firm(f), &r.prices))
                    .collect()
            })
            .collect()
    };
    let pick = |role: Role, label: &str| match dominant(found, &indirect(role), tol) {
        Some(i) => (Some(found[i].clone()), None),
        None => (None, Some(format!("no dominant element: no found equilibrium is best for every terminal {label}"))),
    };
    let (seller_optimal, seller_issue) = pick(Role::TerminalSeller, "seller");
    let (buyer_optimal, buyer_issue) = pick(Role::TerminalBuyer, "buyer");
    let geq = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| *x >= y - tol);
    let has_coordinatewise_max = found.iter().any(|r| found.iter().all(|o| geq(&r.prices, &o.prices)));
    let has_coordinatewise_min = found.iter().any(|r| found.iter().all(|o| geq(&o.prices, &r.prices)));
    Ok(ExtremalReport { seller_optimal, buyer_optimal, seller_issue, buyer_issue, has_coordinatewise_max, has_coordinatewise_min })
}
