//! Informative plan selection: LAPS sampling, the greedy single-step and
//! batch selectors, and an exact brute-force oracle.

mod baselines;
mod greedy;
mod laps;
mod pipeline;

use std::cell::Cell;
use std::collections::HashMap;

use thiserror::Error;

use crate::metrics::{MetricSpace, MetricsError, TipsParams};
use crate::planspace::PlanSpaceError;

pub use baselines::{least_cost_baseline, random_baseline, RANDOM_BASELINE_DRAWS};
pub use greedy::{
    b_tips_basic, b_tips_heap, brute_force_opt, i_tips, set_interestingness, RankedPlan, BRUTE_FORCE_BUDGET,
};
pub use laps::{default_sample_n, laps, same_structure_choices, PlanSource, DEFAULT_SAMPLE_CAP, MAX_SAME_STRUCTURE};
pub use pipeline::{
    prepare_from_list, prepare_from_memo, PipelineConfig, Prepared, DEFAULT_TAU_G, DEFAULT_TAU_L, MAX_CANDIDATES,
};

#[derive(Debug, Error, PartialEq)]
pub enum TipsError {
    #[error("no remaining candidates")]
    Exhausted,
    #[error("k must lie in 1..={available}, got {k}")]
    BadK { k: usize, available: usize },
    #[error("need at least 2 plans, got {0}")]
    TooFewPlans(usize),
    #[error("brute force would scan {0} subsets")]
    BudgetExceeded(u128),
    #[error("plan {0} is not a candidate")]
    UnknownPlan(u64),
    #[error("plan {0} was already viewed")]
    AlreadyViewed(u64),
    #[error("viewed set must contain the QEP")]
    MissingQep,
    #[error("no plans to select from")]
    EmptySpace,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    PlanSpace(#[from] PlanSpaceError),
}

/// A symmetric distance between plans, addressed by id.
pub trait PairDistance {
    fn distance(&self, a: u64, b: u64) -> f64;
}

impl<D: PairDistance + ?Sized> PairDistance for &D {
    fn distance(&self, a: u64, b: u64) -> f64 {
        (**self).distance(a, b)
    }
}

/// Distances given explicitly per pair. Missing pairs are 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatrixDistance {
    pairs: HashMap<(u64, u64), f64>,
}

impl MatrixDistance {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u64, u64, f64)>) -> Self {
        let pairs = pairs.into_iter().map(|(a, b, d)| ((a.min(b), a.max(b)), d)).collect();
        MatrixDistance { pairs }
    }

    pub fn ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.pairs.keys().flat_map(|&(a, b)| [a, b]).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

impl PairDistance for MatrixDistance {
    fn distance(&self, a: u64, b: u64) -> f64 {
        self.pairs.get(&(a.min(b), a.max(b))).copied().unwrap_or(0.0)
    }
}

/// Counts distance evaluations.
#[derive(Debug, Default)]
pub struct Counting<D> {
    inner: D,
    calls: Cell<u64>,
}

impl<D> Counting<D> {
    pub fn new(inner: D) -> Self {
        Counting {
            inner,
            calls: Cell::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.get()
    }

    /// Returns the count so far and restarts it.
    pub fn reset(&self) -> u64 {
        self.calls.replace(0)
    }
}

impl<D: PairDistance> PairDistance for Counting<D> {
    fn distance(&self, a: u64, b: u64) -> f64 {
        self.calls.set(self.calls.get() + 1);
        self.inner.distance(a, b)
    }
}

/// Candidates, frozen metric space, and the growing viewed list (QEP first).
#[derive(Debug, Clone)]
pub struct SelectionState {
    space: MetricSpace,
    viewed: Vec<u64>,
}

impl SelectionState {
    pub fn new(space: MetricSpace) -> Self {
        let viewed = vec![space.qep_id()];
        SelectionState { space, viewed }
    }

    /// Starts from plans already viewed out of band. The QEP must be among them.
    pub fn with_viewed(space: MetricSpace, viewed: &[u64]) -> Result<Self, TipsError> {
        if !viewed.contains(&space.qep_id()) {
            return Err(TipsError::MissingQep);
        }
        let mut state = Self::new(space);
        for &v in viewed {
            if v != state.space.qep_id() {
                state.mark_viewed(v)?;
            }
        }
        Ok(state)
    }

    pub fn space(&self) -> &MetricSpace {
        &self.space
    }

    pub fn viewed(&self) -> &[u64] {
        &self.viewed
    }

    pub fn candidates(&self) -> Vec<u64> {
        self.space.candidate_ids()
    }

    /// Next plan to show; does not change the viewed list.
    pub fn step(&self) -> Result<u64, TipsError> {
        i_tips(&self.space, &self.space.candidate_ids(), &self.viewed)
    }

    pub fn mark_viewed(&mut self, id: u64) -> Result<(), TipsError> {
        if id == self.space.qep_id() || !self.space.contains(id) {
            return Err(TipsError::UnknownPlan(id));
        }
        if self.viewed.contains(&id) {
            return Err(TipsError::AlreadyViewed(id));
        }
        self.viewed.push(id);
        Ok(())
    }

    /// Batch selection from the QEP alone, optionally under other weights.
    pub fn batch(&self, k: usize, params: Option<TipsParams>) -> Result<Vec<u64>, TipsError> {
        let ids = self.space.candidate_ids();
        let qep = self.space.qep_id();
        match params {
            Some(p) => {
                p.validate()?;
                b_tips_heap(&self.space.with_params(p), &ids, qep, k)
            }
            None => b_tips_heap(&self.space, &ids, qep, k),
        }
    }
}
