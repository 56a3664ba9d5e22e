//! Plan distances and the interestingness objective.
//!
//! All distances are computed from [`PlanDigest`]s:
//!
//! * structural distance from the content-blind subtree kernel,
//! * content distance from a normalized token-level edit distance,
//! * cost distance from min-max normalized total costs.
//!
//! They are combined linearly into `dist`, blended with each plan's relevance
//! into the refined distance, and the interestingness of a set is the minimum
//! refined distance over its pairs.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planmodel::PlanDigest;
use crate::tips::PairDistance;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("weights must lie in [0,1] with alpha + beta <= 1 (alpha={alpha}, beta={beta})")]
    BadWeights { alpha: f64, beta: f64 },
    #[error("lambda must lie in [0,1], got {0}")]
    BadLambda(f64),
    #[error("interestingness needs at least 2 plans, got {0}")]
    TooFewPlans(usize),
    #[error("invalid cost bounds [{0}, {1}]")]
    BadBounds(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipsParams {
    /// Weight of the structural distance.
    pub alpha: f64,
    /// Weight of the content distance.
    pub beta: f64,
    /// Trade-off between relevance (0) and distance (1).
    pub lambda: f64,
}

impl Default for TipsParams {
    fn default() -> Self {
        TipsParams {
            alpha: 0.33,
            beta: 0.33,
            lambda: 0.5,
        }
    }
}

impl TipsParams {
    pub fn new(alpha: f64, beta: f64, lambda: f64) -> Result<Self, MetricsError> {
        let p = TipsParams { alpha, beta, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.alpha) || !unit(self.beta) || self.alpha + self.beta > 1.0 + 1e-12 {
            return Err(MetricsError::BadWeights {
                alpha: self.alpha,
                beta: self.beta,
            });
        }
        if !unit(self.lambda) {
            return Err(MetricsError::BadLambda(self.lambda));
        }
        Ok(())
    }

    pub fn cost_weight(&self) -> f64 {
        (1.0 - self.alpha - self.beta).max(0.0)
    }
}

/// Min and max total cost over the candidate set, frozen before any distance is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBounds {
    pub cost_min: f64,
    pub cost_max: f64,
}

impl CostBounds {
    pub fn new(cost_min: f64, cost_max: f64) -> Result<Self, MetricsError> {
        if !(cost_min.is_finite() && cost_max.is_finite() && cost_min <= cost_max) {
            return Err(MetricsError::BadBounds(cost_min, cost_max));
        }
        Ok(CostBounds { cost_min, cost_max })
    }

    /// Bounds spanning the given costs. Panics on an empty iterator.
    pub fn spanning(costs: impl IntoIterator<Item = f64>) -> Self {
        let mut it = costs.into_iter();
        let first = it.next().expect("cost bounds need at least one plan");
        let (lo, hi) = it.fold((first, first), |(lo, hi), c| (lo.min(c), hi.max(c)));
        CostBounds {
            cost_min: lo,
            cost_max: hi,
        }
    }

    pub fn width(&self) -> f64 {
        self.cost_max - self.cost_min
    }
}

/// Number of node pairs rooting identical shapes.
pub fn subtree_kernel(a: &PlanDigest, b: &PlanDigest) -> u64 {
    let (small, large) = if a.structure_multiset.len() <= b.structure_multiset.len() {
        (a, b)
    } else {
        (b, a)
    };
    small
        .structure_multiset
        .iter()
        .filter_map(|(shape, &n)| large.structure_multiset.get(shape).map(|&m| u64::from(n) * u64::from(m)))
        .sum()
}

/// `sqrt(1 - k)` where `k` is the normalized subtree kernel.
pub fn s_dist(a: &PlanDigest, b: &PlanDigest) -> f64 {
    if a.root_shape == b.root_shape && a.structure_multiset == b.structure_multiset {
        return 0.0;
    }
    let k = subtree_kernel(a, b) as f64 / ((a.self_kernel as f64) * (b.self_kernel as f64)).sqrt();
    (1.0 - k.clamp(0.0, 1.0)).sqrt()
}

/// Unit-weight Levenshtein distance over token slices.
pub fn edit_distance<T: PartialEq>(x: &[T], y: &[T]) -> usize {
    let (x, y) = if x.len() < y.len() { (y, x) } else { (x, y) };
    let mut prev: Vec<usize> = (0..=y.len()).collect();
    let mut cur = vec![0; y.len() + 1];
    for (i, xi) in x.iter().enumerate() {
        cur[0] = i + 1;
        for (j, yj) in y.iter().enumerate() {
            let sub = prev[j] + usize::from(xi != yj);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[y.len()]
}

/// Normalized edit distance `2e / (|x| + |y| + e)`; zero for two empty sequences.
pub fn normalized_edit<T: PartialEq>(x: &[T], y: &[T]) -> f64 {
    let e = edit_distance(x, y);
    if e == 0 {
        return 0.0;
    }
    2.0 * e as f64 / (x.len() + y.len() + e) as f64
}

pub fn c_dist(a: &PlanDigest, b: &PlanDigest) -> f64 {
    normalized_edit(&a.token_sequence, &b.token_sequence)
}

pub fn cost_dist(a: &PlanDigest, b: &PlanDigest, bounds: &CostBounds) -> f64 {
    cost_dist_raw(a.total_cost, b.total_cost, bounds)
}

pub fn cost_dist_raw(a: f64, b: f64, bounds: &CostBounds) -> f64 {
    let width = bounds.width();
    if width <= 0.0 {
        return 0.0;
    }
    (a - b).abs() / width
}

/// The three normalized distances between a pair of plans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub s: f64,
    pub c: f64,
    pub cost: f64,
}

impl Components {
    pub fn between(a: &PlanDigest, b: &PlanDigest, bounds: &CostBounds) -> Self {
        Components {
            s: s_dist(a, b),
            c: c_dist(a, b),
            cost: cost_dist(a, b, bounds),
        }
    }

    pub fn weighted(&self, p: &TipsParams) -> f64 {
        p.alpha * self.s + p.beta * self.c + p.cost_weight() * self.cost
    }

    pub fn relevance(&self) -> f64 {
        relevance(self.s, self.c, self.cost)
    }
}

pub fn dist(a: &PlanDigest, b: &PlanDigest, p: &TipsParams, bounds: &CostBounds) -> f64 {
    Components::between(a, b, bounds).weighted(p)
}

/// Relevance polynomial over (structure, content, cost) distances to the QEP.
///
/// Equals 1 on the corners (0,0,1), (0,1,0), (1,0,0), (1,1,0) and 0 on the other four.
pub fn relevance(s: f64, c: f64, cost: f64) -> f64 {
    s + c + cost - s * c - 2.0 * s * cost - 2.0 * c * cost + 2.0 * s * c * cost
}

pub fn rel(plan: &PlanDigest, qep: &PlanDigest, bounds: &CostBounds) -> f64 {
    Components::between(plan, qep, bounds).relevance()
}

pub fn refined_dist(a: &PlanDigest, b: &PlanDigest, p: &TipsParams, qep: &PlanDigest, bounds: &CostBounds) -> f64 {
    blend(rel(a, qep, bounds), rel(b, qep, bounds), dist(a, b, p, bounds), p.lambda)
}

fn blend(rel_a: f64, rel_b: f64, d: f64, lambda: f64) -> f64 {
    (1.0 - lambda) / 2.0 * (rel_a + rel_b) + lambda * d
}

/// Minimum refined distance over all unordered pairs of distinct plans.
pub fn interestingness(
    plans: &[&PlanDigest],
    p: &TipsParams,
    qep: &PlanDigest,
    bounds: &CostBounds,
) -> Result<f64, MetricsError> {
    if plans.len() < 2 {
        return Err(MetricsError::TooFewPlans(plans.len()));
    }
    let mut best = f64::INFINITY;
    for (i, a) in plans.iter().enumerate() {
        for b in &plans[i + 1..] {
            best = best.min(refined_dist(a, b, p, qep, bounds));
        }
    }
    Ok(best)
}

/// A candidate universe with frozen bounds and per-plan relevance, evaluated
/// by plan id.
#[derive(Debug, Clone)]
pub struct MetricSpace {
    params: TipsParams,
    bounds: CostBounds,
    qep_id: u64,
    digests: Vec<PlanDigest>,
    tokens: Vec<Vec<u32>>,
    to_qep: Vec<Components>,
    rel: Vec<f64>,
    index: HashMap<u64, usize>,
}

impl MetricSpace {
    /// Bounds span the QEP and every candidate. A candidate sharing the QEP's id is dropped.
    pub fn new(qep: PlanDigest, candidates: Vec<PlanDigest>, params: TipsParams) -> Result<Self, MetricsError> {
        let bounds = CostBounds::spanning(std::iter::once(qep.total_cost).chain(candidates.iter().map(|d| d.total_cost)));
        Self::with_bounds(qep, candidates, params, bounds)
    }

    pub fn with_bounds(
        qep: PlanDigest,
        candidates: Vec<PlanDigest>,
        params: TipsParams,
        bounds: CostBounds,
    ) -> Result<Self, MetricsError> {
        params.validate()?;
        CostBounds::new(bounds.cost_min, bounds.cost_max)?;
        let qep_id = qep.plan_id;
        let mut digests = vec![qep];
        digests.extend(candidates.into_iter().filter(|d| d.plan_id != qep_id));

        let mut vocab: HashMap<&str, u32> = HashMap::new();
        let tokens = digests
            .iter()
            .map(|d| {
                d.token_sequence
                    .iter()
                    .map(|t| {
                        let next = vocab.len() as u32;
                        *vocab.entry(t.as_str()).or_insert(next)
                    })
                    .collect()
            })
            .collect();
        let to_qep: Vec<Components> = digests.iter().map(|d| Components::between(d, &digests[0], &bounds)).collect();
        let rel = to_qep.iter().map(Components::relevance).collect();
        let index = digests.iter().enumerate().map(|(i, d)| (d.plan_id, i)).collect();
        Ok(MetricSpace {
            params,
            bounds,
            qep_id,
            digests,
            tokens,
            to_qep,
            rel,
            index,
        })
    }

    pub fn params(&self) -> TipsParams {
        self.params
    }

    pub fn bounds(&self) -> CostBounds {
        self.bounds
    }

    pub fn qep_id(&self) -> u64 {
        self.qep_id
    }

    pub fn qep(&self) -> &PlanDigest {
        &self.digests[0]
    }

    /// Candidate ids, QEP excluded, in insertion order.
    pub fn candidate_ids(&self) -> Vec<u64> {
        self.digests[1..].iter().map(|d| d.plan_id).collect()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.index.contains_key(&id)
    }

    pub fn digest(&self, id: u64) -> Option<&PlanDigest> {
        self.index.get(&id).map(|&i| &self.digests[i])
    }

    /// Distances of a plan to the QEP.
    pub fn components_to_qep(&self, id: u64) -> Option<Components> {
        self.index.get(&id).map(|&i| self.to_qep[i])
    }

    pub fn relevance_of(&self, id: u64) -> Option<f64> {
        self.index.get(&id).map(|&i| self.rel[i])
    }

    fn slot(&self, id: u64) -> usize {
        *self.index.get(&id).unwrap_or_else(|| panic!("plan {id} is not in the metric space"))
    }

    pub fn components(&self, a: u64, b: u64) -> Components {
        let (i, j) = (self.slot(a), self.slot(b));
        let (da, db) = (&self.digests[i], &self.digests[j]);
        Components {
            s: s_dist(da, db),
            c: normalized_edit(&self.tokens[i], &self.tokens[j]),
            cost: cost_dist(da, db, &self.bounds),
        }
    }

    /// Refined distance under explicit parameters (bounds stay frozen).
    pub fn refined_with(&self, a: u64, b: u64, p: &TipsParams) -> f64 {
        let d = self.components(a, b).weighted(p);
        blend(self.rel[self.slot(a)], self.rel[self.slot(b)], d, p.lambda)
    }

    /// A distance view under different weights.
    pub fn with_params(&self, params: TipsParams) -> Reweighted<'_> {
        Reweighted { space: self, params }
    }
}

impl PairDistance for MetricSpace {
    fn distance(&self, a: u64, b: u64) -> f64 {
        self.refined_with(a, b, &self.params)
    }
}

pub struct Reweighted<'a> {
    space: &'a MetricSpace,
    params: TipsParams,
}

impl PairDistance for Reweighted<'_> {
    fn distance(&self, a: u64, b: u64) -> f64 {
        self.space.refined_with(a, b, &self.params)
    }
}
