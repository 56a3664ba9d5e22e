//! Reference selectors the greedy is compared against.

use rand::seq::index;
use rand::Rng;

use crate::metrics::MetricSpace;

use super::{set_interestingness, PairDistance, TipsError};

pub const RANDOM_BASELINE_DRAWS: usize = 30;

fn with_qep<D: PairDistance + ?Sized>(d: &D, qep: u64, set: &[u64]) -> Result<f64, TipsError> {
    let mut ids = vec![qep];
    ids.extend_from_slice(set);
    set_interestingness(d, &ids)
}

/// Best of `draws` uniform k-subsets, scored with the QEP included.
pub fn random_baseline<D: PairDistance + ?Sized>(
    d: &D,
    candidates: &[u64],
    qep: u64,
    k: usize,
    draws: usize,
    rng: &mut impl Rng,
) -> Result<(Vec<u64>, f64), TipsError> {
    let pool: Vec<u64> = candidates.iter().copied().filter(|&c| c != qep).collect();
    if k == 0 || k > pool.len() {
        return Err(TipsError::BadK { k, available: pool.len() });
    }
    let mut best: Option<(Vec<u64>, f64)> = None;
    for _ in 0..draws.max(1) {
        let set: Vec<u64> = index::sample(rng, pool.len(), k).iter().map(|i| pool[i]).collect();
        let u = with_qep(d, qep, &set)?;
        if best.as_ref().is_none_or(|(_, b)| u > *b) {
            best = Some((set, u));
        }
    }
    Ok(best.expect("at least one draw"))
}

/// The k cheapest candidates (ties to smaller id), scored with the QEP included.
pub fn least_cost_baseline(space: &MetricSpace, k: usize) -> Result<(Vec<u64>, f64), TipsError> {
    let mut pool: Vec<(f64, u64)> = space
        .candidate_ids()
        .into_iter()
        .map(|id| (space.digest(id).expect("candidate has a digest").total_cost, id))
        .collect();
    if k == 0 || k > pool.len() {
        return Err(TipsError::BadK { k, available: pool.len() });
    }
    pool.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let set: Vec<u64> = pool[..k].iter().map(|&(_, id)| id).collect();
    let u = with_qep(space, space.qep_id(), &set)?;
    Ok((set, u))
}
