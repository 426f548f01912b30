//! Indirect utility, demand correspondence and tie-breaking selections.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Bundle;
use crate::utility::FirmUtility;

/// Default tolerance for treating two utilities as tied.
pub const EPS_TIE: f64 = 1e-9;

/// Utility-maximizing bundles at one price vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandResult {
    /// Demanded bundles in bitset order.
    pub bundles: Vec<Bundle>,
    pub indirect: f64,
    pub tolerance: f64,
}

impl DemandResult {
    pub fn is_single_valued(&self) -> bool {
        self.bundles.len() == 1
    }

    pub fn contains(&self, b: Bundle) -> bool {
        self.bundles.binary_search(&b).is_ok()
    }

    pub fn is_subset_of(&self, other: &DemandResult) -> bool {
        self.bundles.iter().all(|b| other.contains(*b))
    }
}

/// v^f(p): the best utility over all feasible bundles.
pub fn indirect_utility(u: &FirmUtility, p: &[f64]) -> f64 {
    u.entries().map(|(_, e)| e.eval(p)).fold(f64::NEG_INFINITY, f64::max)
}

/// D^f(p): every feasible bundle within `eps` of the indirect utility.
pub fn demand_set(u: &FirmUtility, p: &[f64], eps: f64) -> DemandResult {
    let values: Vec<(Bundle, f64)> = u.entries().map(|(b, e)| (b, e.eval(p))).collect();
    let best = values.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    let bundles = values.iter().filter(|(_, v)| *v >= best - eps).map(|(b, _)| *b).collect();
    DemandResult { bundles, indirect: best, tolerance: eps }
}

/// Perturbation schedule of the joint tie-breaking procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub eps0: f64,
    pub decay: f64,
    pub max_rounds: usize,
    pub attempts_per_round: usize,
    pub seed: u64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { eps0: 1e-3, decay: 0.5, max_rounds: 40, attempts_per_round: 8, seed: 42 }
    }
}

fn translated(p: &[f64], shift: &[f64]) -> Vec<f64> {
    p.iter().zip(shift).map(|(a, b)| a + b).collect()
}

/// Single-valued selection from the demand at each point of `points`.
///
/// All points are translated by a common shift that is built one point at a
/// time: each step adds a small random perturbation that makes the current
/// point's demand single-valued while keeping every point's demand inside its
/// demand before the step. The final demands are the selection.
pub fn joint_tiebreak_selection(u: &FirmUtility, points: &[Vec<f64>], schedule: &Schedule, eps_tie: f64) -> Result<Vec<Bundle>> {
    let Some(first) = points.first() else {
        return Ok(Vec::new());
    };
    let n = first.len();
    let scope: Vec<usize> = u.scope().iter().filter(|t| *t < n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut shift = vec![0.0; n];
    let mut current: Vec<DemandResult> = points.iter().map(|p| demand_set(u, p, eps_tie)).collect();
    let originals = current.clone();
    for i in 0..points.len() {
        if current[i].is_single_valued() {
            continue;
        }
        let mut radius = schedule.eps0;
        let mut done = false;
        'rounds: for _ in 0..schedule.max_rounds {
            for _ in 0..schedule.attempts_per_round {
                let mut trial = shift.clone();
                for &t in &scope {
                    trial[t] += radius * rng.gen_range(-1.0..1.0);
                }
                let next: Vec<DemandResult> = points.iter().map(|p| demand_set(u, &translated(p, &trial), eps_tie)).collect();
                if next[i].is_single_valued() && next.iter().zip(&current).all(|(a, b)| a.is_subset_of(b)) {
                    shift = trial;
                    current = next;
                    done = true;
                    break 'rounds;
                }
            }
            radius *= schedule.decay;
        }
        if !done {
            return Err(Error::ScheduleExhausted { point: i, rounds: schedule.max_rounds });
        }
    }
    let selection: Vec<Bundle> = current.iter().map(|d| d.bundles[0]).collect();
    debug_assert!(selection.iter().zip(&originals).all(|(b, d)| d.contains(*b)));
    Ok(selection)
}

/// Looks for q within sup-distance `eps` of p where `psi` is the unique
/// demanded bundle. Directions favour `psi`: purchases outside it become
/// dearer, sales outside it cheaper, and its own trades move in its favour by
/// a varying weight, plus a small random jitter on later attempts.
pub fn nib_witness(u: &FirmUtility, p: &[f64], psi: Bundle, eps: f64, attempts: usize, eps_tie: f64) -> Result<Option<Vec<f64>>> {
    let d = demand_set(u, p, eps_tie);
    if !d.contains(psi) {
        return Err(Error::NotDemanded(format!("{psi:?}")));
    }
    if d.is_single_valued() {
        return Ok(Some(p.to_vec()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ psi.0 as u64);
    let weights = [0.0, 0.5, 1.0, 2.0, 0.25];
    for k in 0..attempts {
        let radius = 0.5 * eps * 0.5f64.powi((k / weights.len()) as i32);
        let gamma = weights[k % weights.len()];
        let jitter = if k >= weights.len() { 0.1 } else { 0.0 };
        let mut q = p.to_vec();
        for t in u.scope().iter() {
            let favour = u.side(t);
            let dir = if psi.contains(t) { gamma * favour } else { -favour };
            q[t] += radius * (dir + jitter * rng.gen_range(-1.0..1.0)).clamp(-1.9, 1.9);
        }
        let dq = demand_set(u, &q, eps_tie);
        if dq.bundles == [psi] {
            return Ok(Some(q));
        }
    }
    Ok(None)
}

/// Whether `psi2`, demanded at `p2`, is still demanded at `p`, where prices
/// moved only in its favour: p ≥ p2 on its sales and on purchases outside it,
/// p ≤ p2 on its purchases and on sales outside it.
pub fn demand_invariance_check(u: &FirmUtility, p: &[f64], p2: &[f64], psi2: Bundle, eps_tie: f64) -> Result<bool> {
    for t in u.scope().iter() {
        let sale = u.downstream().contains(t);
        let inside = psi2.contains(t);
        let ok = match (sale, inside) {
            (true, false) => p[t] <= p2[t],
            (true, true) => p[t] >= p2[t],
            (false, false) => p[t] >= p2[t],
            (false, true) => p[t] <= p2[t],
        };
        if !ok {
            return Err(Error::PatternViolation(format!("trade #{t}: {} vs {}", p[t], p2[t])));
        }
    }
    if !demand_set(u, p2, eps_tie).contains(psi2) {
        return Err(Error::NotDemanded(format!("{psi2:?}")));
    }
    Ok(demand_set(u, p, eps_tie).contains(psi2))
}
