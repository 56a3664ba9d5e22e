use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use itertools::Itertools;

use super::{PairDistance, TipsError};

/// Upper bound on the number of subsets [`brute_force_opt`] will scan.
pub const BRUTE_FORCE_BUDGET: u128 = 1_000_000;

/// Minimum pairwise distance of a set. Needs at least two plans.
pub fn set_interestingness<D: PairDistance + ?Sized>(d: &D, ids: &[u64]) -> Result<f64, TipsError> {
    if ids.len() < 2 {
        return Err(TipsError::TooFewPlans(ids.len()));
    }
    let mut best = f64::INFINITY;
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            best = best.min(d.distance(a, b));
        }
    }
    Ok(best)
}

fn min_to<D: PairDistance + ?Sized>(d: &D, id: u64, viewed: &[u64]) -> f64 {
    viewed.iter().map(|&v| d.distance(id, v)).fold(f64::INFINITY, f64::min)
}

/// Sorted, deduplicated candidates with `exclude` removed.
fn normalize(candidates: &[u64], exclude: &[u64]) -> Vec<u64> {
    let excluded: BTreeSet<u64> = exclude.iter().copied().collect();
    let set: BTreeSet<u64> = candidates.iter().copied().filter(|c| !excluded.contains(c)).collect();
    set.into_iter().collect()
}

/// The unviewed candidate farthest from the viewed set (largest minimum
/// distance), ties to the smaller id.
pub fn i_tips<D: PairDistance + ?Sized>(d: &D, candidates: &[u64], viewed: &[u64]) -> Result<u64, TipsError> {
    let mut best: Option<(u64, f64)> = None;
    for c in normalize(candidates, viewed) {
        let m = min_to(d, c, viewed);
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((c, m));
        }
    }
    best.map(|(c, _)| c).ok_or(TipsError::Exhausted)
}

fn check_k(k: usize, available: usize) -> Result<(), TipsError> {
    if k == 0 || k > available {
        return Err(TipsError::BadK { k, available });
    }
    Ok(())
}

/// Greedy batch selection by repeated [`i_tips`], seeded with the QEP.
pub fn b_tips_basic<D: PairDistance + ?Sized>(
    d: &D,
    candidates: &[u64],
    qep: u64,
    k: usize,
) -> Result<Vec<u64>, TipsError> {
    let pool = normalize(candidates, &[qep]);
    check_k(k, pool.len())?;
    let mut viewed = vec![qep];
    for _ in 0..k {
        let next = i_tips(d, &pool, &viewed)?;
        viewed.push(next);
    }
    viewed.remove(0);
    Ok(viewed)
}

/// A candidate with its cached minimum distance to the first `stamp` viewed plans.
#[derive(Debug, Clone, Copy)]
pub struct RankedPlan {
    pub plan_id: u64,
    pub min_dist: f64,
    pub stamp: usize,
}

impl PartialEq for RankedPlan {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for RankedPlan {}

impl PartialOrd for RankedPlan {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RankedPlan {
    /// Larger distance first, then smaller id.
    fn cmp(&self, other: &Self) -> Ordering {
        self.min_dist
            .total_cmp(&other.min_dist)
            .then_with(|| other.plan_id.cmp(&self.plan_id))
    }
}

/// Same output as [`b_tips_basic`], with lazily refreshed cached minima.
///
/// Cached minima only shrink as the viewed set grows, so once the top of the
/// heap ranks below the best refreshed entry no remaining entry can win.
pub fn b_tips_heap<D: PairDistance + ?Sized>(
    d: &D,
    candidates: &[u64],
    qep: u64,
    k: usize,
) -> Result<Vec<u64>, TipsError> {
    let pool = normalize(candidates, &[qep]);
    check_k(k, pool.len())?;
    let mut viewed = vec![qep];
    let mut heap: BinaryHeap<RankedPlan> = pool
        .iter()
        .map(|&c| RankedPlan {
            plan_id: c,
            min_dist: d.distance(c, qep),
            stamp: 1,
        })
        .collect();
    let mut out = Vec::with_capacity(k);
    let mut held = Vec::new();
    while out.len() < k {
        let mut best: Option<RankedPlan> = None;
        while let Some(mut top) = heap.pop() {
            if best.is_some_and(|b| top < b) {
                heap.push(top);
                break;
            }
            for &v in &viewed[top.stamp..] {
                top.min_dist = top.min_dist.min(d.distance(top.plan_id, v));
            }
            top.stamp = viewed.len();
            match best {
                Some(b) if b >= top => held.push(top),
                _ => {
                    if let Some(b) = best.replace(top) {
                        held.push(b);
                    }
                }
            }
        }
        let chosen = best.ok_or(TipsError::Exhausted)?;
        heap.extend(held.drain(..));
        viewed.push(chosen.plan_id);
        out.push(chosen.plan_id);
    }
    Ok(out)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

/// Exact maximizer of the set interestingness of `S ∪ {qep}` over all
/// k-subsets `S` of the candidates. Ties go to the lexicographically first subset.
pub fn brute_force_opt<D: PairDistance + ?Sized>(
    d: &D,
    candidates: &[u64],
    qep: u64,
    k: usize,
) -> Result<(Vec<u64>, f64), TipsError> {
    let pool = normalize(candidates, &[qep]);
    check_k(k, pool.len())?;
    let subsets = binomial(pool.len(), k);
    if subsets > BRUTE_FORCE_BUDGET {
        return Err(TipsError::BudgetExceeded(subsets));
    }
    let mut best: Option<(Vec<u64>, f64)> = None;
    let mut ids = Vec::with_capacity(k + 1);
    for subset in pool.iter().copied().combinations(k) {
        ids.clear();
        ids.push(qep);
        ids.extend_from_slice(&subset);
        let u = set_interestingness(d, &ids)?;
        if best.as_ref().is_none_or(|(_, b)| u > *b) {
            best = Some((subset, u));
        }
    }
    Ok(best.expect("k <= pool size yields at least one subset"))
}
