use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;

use crate::planmodel::{PhysicalPlan, PlanDigest, PlanNode};
use crate::planspace::{Choice, ExprRef, Memo};

use super::TipsError;

/// Default cap on the uniform sample.
pub const DEFAULT_SAMPLE_CAP: usize = 5000;

/// Cap on same-structure plans collected from a memo.
pub const MAX_SAME_STRUCTURE: usize = 200_000;

pub fn default_sample_n(space_size: u64) -> usize {
    space_size.min(DEFAULT_SAMPLE_CAP as u64) as usize
}

/// Where LAPS draws plans from.
#[derive(Debug, Clone, Copy)]
pub enum PlanSource<'a> {
    Memo(&'a Memo),
    List(&'a [PhysicalPlan]),
}

impl PlanSource<'_> {
    pub fn len(&self) -> u64 {
        match self {
            PlanSource::Memo(m) => m.count_plans(),
            PlanSource::List(l) => l.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Choices in `group` whose tree has the same shape as `target`, up to
/// `limit`. Returns whether the limit cut the enumeration short.
pub fn same_structure_choices(memo: &Memo, target: &PlanNode, limit: usize) -> (Vec<Choice>, bool) {
    let mut truncated = false;
    let out = matching(memo, memo.root_group(), target, limit, &mut truncated);
    (out, truncated)
}

fn matching(memo: &Memo, group: usize, target: &PlanNode, limit: usize, truncated: &mut bool) -> Vec<Choice> {
    let mut out = Vec::new();
    for (ordinal, e) in memo.group(group).expressions.iter().enumerate() {
        if e.child_groups.len() != target.children.len() {
            continue;
        }
        let mut partial: Vec<Vec<Choice>> = vec![Vec::new()];
        for (&cg, child) in e.child_groups.iter().zip(&target.children) {
            let options = matching(memo, cg, child, limit, truncated);
            let mut next = Vec::new();
            'outer: for prefix in &partial {
                for o in &options {
                    if next.len() == limit {
                        *truncated = true;
                        break 'outer;
                    }
                    let mut p = prefix.clone();
                    p.push(o.clone());
                    next.push(p);
                }
            }
            partial = next;
            if partial.is_empty() {
                break;
            }
        }
        for children in partial {
            if out.len() == limit {
                *truncated = true;
                return out;
            }
            out.push(Choice {
                expr: ExprRef { group, ordinal },
                children,
            });
        }
    }
    out
}

/// Learning-aware sampling: every plan with the QEP's structure plus a
/// uniform sample of `sample_n` plans, QEP excluded, as sorted ids.
pub fn laps(qep: &PhysicalPlan, source: PlanSource<'_>, sample_n: usize, rng: &mut impl Rng) -> Result<Vec<u64>, TipsError> {
    let mut ids = BTreeSet::new();
    match source {
        PlanSource::Memo(memo) => {
            let (choices, _) = same_structure_choices(memo, &qep.root, MAX_SAME_STRUCTURE);
            ids.extend(choices.iter().map(|c| memo.rank(c)));
        }
        PlanSource::List(plans) => {
            let shape = qep.digest().root_shape;
            ids.extend(plans.iter().filter(|p| PlanDigest::of(p).root_shape == shape).map(|p| p.plan_id));
        }
    }
    let size = source.len();
    let size = usize::try_from(size).map_err(|_| TipsError::PlanSpace(crate::planspace::PlanSpaceError::TooLarge))?;
    let amount = sample_n.min(size);
    let picks = index::sample(rng, size, amount);
    match source {
        PlanSource::Memo(_) => ids.extend(picks.iter().map(|i| i as u64)),
        PlanSource::List(plans) => ids.extend(picks.iter().map(|i| plans[i].plan_id)),
    }
    ids.remove(&qep.plan_id);
    Ok(ids.into_iter().collect())
}
