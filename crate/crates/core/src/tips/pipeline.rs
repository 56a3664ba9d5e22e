//! From a plan space to a frozen metric space: LAPS when the query joins
//! many tables, then group-forest pruning when the candidate set is large.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metrics::{cost_dist_raw, s_dist, CostBounds, MetricSpace, TipsParams};
use crate::planmodel::{PhysicalPlan, PlanDigest, PlanNode};
use crate::planspace::{gfp_prune, Memo, PruneThresholds};

use super::{default_sample_n, laps, PlanSource, TipsError};

pub const DEFAULT_TAU_L: usize = 10;
pub const DEFAULT_TAU_G: usize = 50_000;

/// Memo spaces larger than this are always sampled.
pub const MAX_CANDIDATES: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub params: TipsParams,
    pub thresholds: PruneThresholds,
    /// LAPS runs when the QEP joins more than this many times.
    pub tau_l: usize,
    /// Pruning runs when more candidates than this remain.
    pub tau_g: usize,
    /// Uniform sample size; defaults to `min(5000, space size)`.
    pub sample_n: Option<usize>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            params: TipsParams::default(),
            thresholds: PruneThresholds::default(),
            tau_l: DEFAULT_TAU_L,
            tau_g: DEFAULT_TAU_G,
            sample_n: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub space: MetricSpace,
    pub qep: PhysicalPlan,
    pub laps_applied: bool,
    /// Candidates removed by pruning.
    pub pruned: usize,
}

fn join_count(root: &PlanNode) -> usize {
    root.preorder().into_iter().filter(|n| n.operator.is_join()).count()
}

pub fn prepare_from_memo(memo: &Memo, cfg: &PipelineConfig) -> Result<Prepared, TipsError> {
    cfg.params.validate()?;
    let qep = memo.qep();
    let count = memo.count_plans();
    let laps_applied = join_count(&qep.root) > cfg.tau_l || count > MAX_CANDIDATES;
    let ids: Vec<u64> = if laps_applied {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let n = cfg.sample_n.unwrap_or_else(|| default_sample_n(count));
        laps(&qep, PlanSource::Memo(memo), n, &mut rng)?
    } else {
        (0..count).filter(|&i| i != qep.plan_id).collect()
    };

    let mut costs = Vec::with_capacity(ids.len());
    for &id in &ids {
        costs.push(memo.choice_cost(&memo.choice(id)?));
    }
    let bounds = CostBounds::spanning(std::iter::once(qep.total_cost).chain(costs.iter().copied()));
    let qep_digest = qep.digest();

    let kept = if ids.len() > cfg.tau_g {
        gfp_prune(&ids, &qep_digest, cfg.thresholds, memo, &bounds)?.kept
    } else {
        ids.clone()
    };
    let pruned = ids.len() - kept.len();
    let mut digests = Vec::with_capacity(kept.len());
    for id in kept {
        digests.push(memo.unrank(id)?.digest());
    }
    let space = MetricSpace::with_bounds(qep_digest, digests, cfg.params, bounds)?;
    Ok(Prepared {
        space,
        qep,
        laps_applied,
        pruned,
    })
}

/// Same pipeline over an explicit plan list; pruning evaluates each plan directly.
pub fn prepare_from_list(plans: &[PhysicalPlan], qep_id: u64, cfg: &PipelineConfig) -> Result<Prepared, TipsError> {
    cfg.params.validate()?;
    if plans.is_empty() {
        return Err(TipsError::EmptySpace);
    }
    let qep = plans
        .iter()
        .find(|p| p.plan_id == qep_id)
        .cloned()
        .ok_or(TipsError::UnknownPlan(qep_id))?;
    let laps_applied = join_count(&qep.root) > cfg.tau_l;
    let ids: Vec<u64> = if laps_applied {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let n = cfg.sample_n.unwrap_or_else(|| default_sample_n(plans.len() as u64));
        laps(&qep, PlanSource::List(plans), n, &mut rng)?
    } else {
        plans.iter().map(|p| p.plan_id).filter(|&i| i != qep_id).collect()
    };
    let by_id: std::collections::HashMap<u64, &PhysicalPlan> = plans.iter().map(|p| (p.plan_id, p)).collect();
    let digests: Vec<PlanDigest> = ids.iter().map(|id| PlanDigest::of(by_id[id])).collect();
    let bounds = CostBounds::spanning(std::iter::once(qep.total_cost).chain(digests.iter().map(|d| d.total_cost)));
    let qep_digest = qep.digest();

    let before = digests.len();
    let digests: Vec<PlanDigest> = if before > cfg.tau_g {
        digests
            .into_iter()
            .filter(|d| {
                let cost = cost_dist_raw(d.total_cost, qep_digest.total_cost, &bounds);
                !cfg.thresholds.prunes(s_dist(d, &qep_digest), cost)
            })
            .collect()
    } else {
        digests
    };
    let pruned = before - digests.len();
    let space = MetricSpace::with_bounds(qep_digest, digests, cfg.params, bounds)?;
    Ok(Prepared {
        space,
        qep,
        laps_applied,
        pruned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Catalog, TableStats};
    use crate::planspace::build_memo;
    use crate::sqlfront::parse_query;

    fn memo() -> Memo {
        let cat = Catalog::new([
            TableStats::new("r", 1000, 10).with_index("x"),
            TableStats::new("s", 500, 5),
            TableStats::new("t", 200, 2),
        ])
        .unwrap();
        let q = parse_query("SELECT * FROM r, s, t WHERE r.a = s.a AND s.b = t.b AND r.x = 1").unwrap();
        build_memo(&q, &cat).unwrap()
    }

    #[test]
    fn small_space_uses_every_plan() {
        let m = memo();
        let p = prepare_from_memo(&m, &PipelineConfig::default()).unwrap();
        assert!(!p.laps_applied);
        assert_eq!(p.pruned, 0);
        assert_eq!(p.space.candidate_ids().len() as u64, m.count_plans() - 1);
        let (lo, hi) = m.cost_range();
        assert_eq!(p.space.bounds(), CostBounds::new(lo, hi).unwrap());
    }

    #[test]
    fn triggers_fire_when_lowered() {
        let m = memo();
        let cfg = PipelineConfig {
            tau_l: 0,
            tau_g: 0,
            sample_n: Some(10),
            thresholds: PruneThresholds::new(0.3, 0.3).unwrap(),
            ..PipelineConfig::default()
        };
        let p = prepare_from_memo(&m, &cfg).unwrap();
        assert!(p.laps_applied);
        assert!(p.pruned > 0);
    }

    #[test]
    fn list_matches_memo() {
        let m = memo();
        let plans: Vec<PhysicalPlan> = m.plans(None).collect();
        let cfg = PipelineConfig {
            tau_g: 0,
            thresholds: PruneThresholds::new(0.4, 0.2).unwrap(),
            ..PipelineConfig::default()
        };
        let a = prepare_from_memo(&m, &cfg).unwrap();
        let b = prepare_from_list(&plans, a.qep.plan_id, &cfg).unwrap();
        assert_eq!(a.space.candidate_ids(), b.space.candidate_ids());
        assert_eq!(a.pruned, b.pruned);
    }

    #[test]
    fn list_errors() {
        let cfg = PipelineConfig::default();
        assert!(matches!(prepare_from_list(&[], 0, &cfg), Err(TipsError::EmptySpace)));
        let plans: Vec<PhysicalPlan> = memo().plans(Some(2)).collect();
        assert!(matches!(prepare_from_list(&plans, 99, &cfg), Err(TipsError::UnknownPlan(99))));
    }
}
