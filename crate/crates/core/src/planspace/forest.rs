//! Group forest: the distinct group-id trees a memo can produce, built
//! bottom-up. All plans sharing a group tree share a structure, so the
//! structural distance to the QEP is computed once per tree.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::metrics::{cost_dist_raw, s_dist, CostBounds};
use crate::planmodel::{shape_multiset, PlanDigest, ShapeHash};

use super::enumerate::Choice;
use super::memo::{ExprRef, Memo};
use super::PlanSpaceError;

/// Per-group cap on distinct group trees before falling back to per-plan filtering.
pub const MAX_SHAPES_PER_GROUP: usize = 100_000;

/// A rooted tree labeled by group ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupTree {
    pub group: usize,
    pub children: Vec<GroupTree>,
}

impl GroupTree {
    pub fn of_choice(choice: &Choice) -> Self {
        GroupTree {
            group: choice.expr.group,
            children: choice.children.iter().map(GroupTree::of_choice).collect(),
        }
    }

    /// Content-blind structure, in the same form as a plan digest.
    pub fn structure(&self) -> (ShapeHash, BTreeMap<ShapeHash, u32>) {
        shape_multiset(self, |t| t.children.as_slice())
    }

    /// A digest carrying only structure, usable with [`s_dist`].
    pub fn structure_digest(&self) -> PlanDigest {
        let (root, multiset) = self.structure();
        PlanDigest::from_parts(0, root, multiset, Vec::new(), 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct ForestShape {
    pub tree: GroupTree,
    /// Number of plans with this group tree.
    pub members: u64,
}

#[derive(Debug, Clone)]
pub struct GroupForest {
    /// Distinct trees per group, in discovery order.
    per_group: Vec<Vec<ForestShape>>,
    root_index: HashMap<GroupTree, usize>,
    root: usize,
}

impl GroupForest {
    /// Shapes reachable from the root group.
    pub fn shapes(&self) -> &[ForestShape] {
        &self.per_group[self.root]
    }

    pub fn shapes_of_group(&self, group: usize) -> &[ForestShape] {
        &self.per_group[group]
    }

    /// Number of distinct group trees rooted at one expression.
    pub fn shape_count_of_expression(&self, memo: &Memo, e: ExprRef) -> usize {
        memo.expression(e)
            .child_groups
            .iter()
            .map(|&c| self.per_group[c].len())
            .product()
    }

    pub fn shape_of(&self, tree: &GroupTree) -> Option<usize> {
        self.root_index.get(tree).copied()
    }
}

/// Builds the group forest bottom-up over the memo's groups.
pub fn build_group_forest(memo: &Memo) -> Result<GroupForest, PlanSpaceError> {
    let mut per_group: Vec<Vec<ForestShape>> = Vec::with_capacity(memo.groups.len());
    let mut root_index = HashMap::new();
    for (gi, group) in memo.groups.iter().enumerate() {
        let mut index: HashMap<GroupTree, usize> = HashMap::new();
        let mut shapes: Vec<ForestShape> = Vec::new();
        for e in &group.expressions {
            let mut partial: Vec<(Vec<GroupTree>, u64)> = vec![(Vec::new(), 1)];
            for &c in &e.child_groups {
                let mut next = Vec::with_capacity(partial.len() * per_group[c].len());
                for (prefix, members) in &partial {
                    for child in &per_group[c] {
                        let mut trees = prefix.clone();
                        trees.push(child.tree.clone());
                        next.push((trees, members.saturating_mul(child.members)));
                    }
                }
                partial = next;
                if partial.len() > MAX_SHAPES_PER_GROUP {
                    return Err(PlanSpaceError::ShapeLimit);
                }
            }
            for (children, members) in partial {
                let tree = GroupTree { group: gi, children };
                match index.get(&tree) {
                    Some(&i) => shapes[i].members = shapes[i].members.saturating_add(members),
                    None => {
                        index.insert(tree.clone(), shapes.len());
                        shapes.push(ForestShape { tree, members });
                    }
                }
            }
            if shapes.len() > MAX_SHAPES_PER_GROUP {
                return Err(PlanSpaceError::ShapeLimit);
            }
        }
        if gi == memo.root {
            root_index = index;
        }
        per_group.push(shapes);
    }
    Ok(GroupForest {
        per_group,
        root_index,
        root: memo.root,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneThresholds {
    /// Structural distance threshold.
    pub tau_d: f64,
    /// Cost distance threshold.
    pub tau_c: f64,
}

impl Default for PruneThresholds {
    fn default() -> Self {
        PruneThresholds { tau_d: 0.5, tau_c: 0.5 }
    }
}

impl PruneThresholds {
    pub fn new(tau_d: f64, tau_c: f64) -> Result<Self, PlanSpaceError> {
        // Values above 1 are accepted: they disable pruning.
        if !(tau_d >= 0.0 && tau_c >= 0.0) {
            return Err(PlanSpaceError::BadThresholds(tau_d, tau_c));
        }
        Ok(PruneThresholds { tau_d, tau_c })
    }

    /// The conjunctive pruning test.
    pub fn prunes(&self, s: f64, cost: f64) -> bool {
        s >= self.tau_d && cost >= self.tau_c
    }
}

/// Outcome of group-forest pruning.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneReport {
    pub kept: Vec<u64>,
    /// Number of group trees whose distance was evaluated; `None` when the
    /// shape guard forced per-plan evaluation.
    pub shapes_evaluated: Option<usize>,
}

/// Removes plans that are both structurally and cost-wise far from the QEP.
/// Structure distance is read from each plan's group tree; the QEP is kept.
pub fn gfp_prune(
    plans: &[u64],
    qep: &PlanDigest,
    thresholds: PruneThresholds,
    memo: &Memo,
    bounds: &CostBounds,
) -> Result<PruneReport, PlanSpaceError> {
    let forest = match build_group_forest(memo) {
        Ok(f) => Some(f),
        Err(PlanSpaceError::ShapeLimit) => None,
        Err(e) => return Err(e),
    };
    let cached: Option<Vec<f64>> = forest
        .as_ref()
        .map(|f| f.shapes().iter().map(|s| s_dist(&s.tree.structure_digest(), qep)).collect());

    let mut kept = Vec::with_capacity(plans.len());
    for &id in plans {
        if id == qep.plan_id {
            kept.push(id);
            continue;
        }
        let choice = memo.choice(id)?;
        let tree = GroupTree::of_choice(&choice);
        let s = match (&forest, &cached) {
            (Some(f), Some(c)) => c[f.shape_of(&tree).expect("every plan's group tree is in the forest")],
            _ => s_dist(&tree.structure_digest(), qep),
        };
        let cost = cost_dist_raw(memo.choice_cost(&choice), qep.total_cost, bounds);
        if !thresholds.prunes(s, cost) {
            kept.push(id);
        }
    }
    Ok(PruneReport {
        kept,
        shapes_evaluated: cached.map(|c| c.len()),
    })
}

impl Memo {
    /// Every plan whose group tree equals `tree`, as choices.
    pub fn choices_with_tree(&self, tree: &GroupTree) -> Vec<Choice> {
        let g = &self.groups[tree.group];
        let mut out = Vec::new();
        for (ordinal, e) in g.expressions.iter().enumerate() {
            let matches = e.child_groups.len() == tree.children.len()
                && e.child_groups.iter().zip(&tree.children).all(|(&c, t)| c == t.group);
            if !matches {
                continue;
            }
            let mut partial: Vec<Vec<Choice>> = vec![Vec::new()];
            for child in &tree.children {
                let options = self.choices_with_tree(child);
                partial = partial
                    .into_iter()
                    .flat_map(|prefix| {
                        options.iter().map(move |o| {
                            let mut p = prefix.clone();
                            p.push(o.clone());
                            p
                        })
                    })
                    .collect();
            }
            out.extend(partial.into_iter().map(|children| Choice {
                expr: ExprRef {
                    group: tree.group,
                    ordinal,
                },
                children,
            }));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planmodel::Operator;
    use crate::planspace::MemoBuilder;

    /// Root expression with 8 alternatives spread over 2 group trees.
    pub(crate) fn worked_memo() -> (Memo, ExprRef) {
        let mut b = MemoBuilder::new();
        let a = b.add_group(0b001, 10.0);
        b.add_expression(a, Operator::SeqScan, Some("a".into()), vec![], 5.0).unwrap();
        b.add_expression(a, Operator::IndexScan, Some("a".into()), vec![], 3.0).unwrap();
        let bg = b.add_group(0b010, 10.0);
        b.add_expression(bg, Operator::SeqScan, Some("b".into()), vec![], 4.0).unwrap();
        let c = b.add_group(0b100, 10.0);
        b.add_expression(c, Operator::SeqScan, Some("c".into()), vec![], 2.0).unwrap();
        b.add_expression(c, Operator::IndexScan, Some("c".into()), vec![], 6.0).unwrap();
        let ab = b.add_group(0b011, 10.0);
        b.add_expression(ab, Operator::HashJoin, None, vec![a, bg], 1.0).unwrap();
        b.add_expression(ab, Operator::HashJoin, None, vec![bg, a], 2.0).unwrap();
        let abc = b.add_group(0b111, 10.0);
        let root_expr = b.add_expression(abc, Operator::HashJoin, None, vec![ab, c], 1.0).unwrap();
        (b.finish(abc).unwrap(), root_expr)
    }

    #[test]
    fn worked_example_counts() {
        let (m, e) = worked_memo();
        assert_eq!(m.expression(e).alt_count, 8);
        assert_eq!(m.count_plans(), 8);
        let f = build_group_forest(&m).unwrap();
        assert_eq!(f.shape_count_of_expression(&m, e), 2);
        assert_eq!(f.shapes().len(), 2);
        assert_eq!(f.shapes().iter().map(|s| s.members).sum::<u64>(), 8);
    }

    #[test]
    fn members_enumerate_back_to_ids() {
        let (m, _) = worked_memo();
        let f = build_group_forest(&m).unwrap();
        let mut ids: Vec<u64> = f
            .shapes()
            .iter()
            .flat_map(|s| {
                let choices = m.choices_with_tree(&s.tree);
                assert_eq!(choices.len() as u64, s.members);
                choices.into_iter().map(|c| m.rank(&c)).collect::<Vec<_>>()
            })
            .collect();
        ids.sort();
        assert_eq!(ids, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn unique_partitions_give_one_shape_per_expression() {
        let mut b = MemoBuilder::new();
        let a = b.add_group(1, 1.0);
        b.add_expression(a, Operator::SeqScan, Some("a".into()), vec![], 1.0).unwrap();
        let c = b.add_group(2, 1.0);
        b.add_expression(c, Operator::SeqScan, Some("c".into()), vec![], 1.0).unwrap();
        let root = b.add_group(3, 1.0);
        for op in Operator::JOINS {
            b.add_expression(root, op, None, vec![a, c], 1.0).unwrap();
        }
        let m = b.finish(root).unwrap();
        let f = build_group_forest(&m).unwrap();
        for ordinal in 0..3 {
            assert_eq!(f.shape_count_of_expression(&m, ExprRef { group: root, ordinal }), 1);
        }
        assert_eq!(f.shapes().len(), 1);
    }

    #[test]
    fn unreachable_thresholds_keep_everything() {
        let (m, _) = worked_memo();
        let qep = m.qep().digest();
        let (lo, hi) = m.cost_range();
        let bounds = CostBounds::new(lo, hi).unwrap();
        let ids: Vec<u64> = (0..8).collect();
        let report = gfp_prune(&ids, &qep, PruneThresholds::new(1.01, 1.01).unwrap(), &m, &bounds).unwrap();
        assert_eq!(report.kept, ids);
        assert_eq!(report.shapes_evaluated, Some(2));
    }

    #[test]
    fn zero_thresholds_keep_only_the_qep() {
        let (m, _) = worked_memo();
        let qep = m.qep().digest();
        let (lo, hi) = m.cost_range();
        let bounds = CostBounds::new(lo, hi).unwrap();
        let ids: Vec<u64> = (0..8).collect();
        let report = gfp_prune(&ids, &qep, PruneThresholds::new(0.0, 0.0).unwrap(), &m, &bounds).unwrap();
        assert_eq!(report.kept, vec![qep.plan_id]);
    }
}
