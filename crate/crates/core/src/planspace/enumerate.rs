//! Counting-based plan enumeration: every plan in a memo has a dense id in
//! `0..count_plans()`, decoded as the expression choice within a group
//! followed by a mixed-radix split over child group ids.

use crate::planmodel::{PhysicalPlan, PlanNode};

use super::memo::{ExprRef, Memo};
use super::PlanSpaceError;

/// One expression per group visited, as a tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Choice {
    pub expr: ExprRef,
    pub children: Vec<Choice>,
}

impl Memo {
    /// Decodes a plan id into its expression choices.
    pub fn choice(&self, id: u64) -> Result<Choice, PlanSpaceError> {
        let count = self.count_plans();
        if id >= count {
            return Err(PlanSpaceError::IdOutOfRange { id, count });
        }
        Ok(self.choice_in_group(self.root, id))
    }

    fn choice_in_group(&self, group: usize, mut id: u64) -> Choice {
        let g = &self.groups[group];
        for (ordinal, e) in g.expressions.iter().enumerate() {
            if id < e.alt_count {
                let children = e
                    .child_groups
                    .iter()
                    .map(|&c| {
                        let radix = self.groups[c].alt_count;
                        let digit = id % radix;
                        id /= radix;
                        self.choice_in_group(c, digit)
                    })
                    .collect();
                return Choice {
                    expr: ExprRef { group, ordinal },
                    children,
                };
            }
            id -= e.alt_count;
        }
        unreachable!("id below group alt_count always selects an expression")
    }

    /// Inverse of [`Memo::choice`] for choices rooted at the root group.
    pub fn rank(&self, choice: &Choice) -> u64 {
        self.rank_in_group(choice)
    }

    fn rank_in_group(&self, choice: &Choice) -> u64 {
        let g = &self.groups[choice.expr.group];
        let offset: u64 = g.expressions[..choice.expr.ordinal].iter().map(|e| e.alt_count).sum();
        let e = &g.expressions[choice.expr.ordinal];
        let mut weight = 1u64;
        let mut local = 0u64;
        for (child, &cg) in choice.children.iter().zip(&e.child_groups) {
            local += self.rank_in_group(child) * weight;
            weight *= self.groups[cg].alt_count;
        }
        offset + local
    }

    /// Sum of local costs over the chosen expressions.
    pub fn choice_cost(&self, choice: &Choice) -> f64 {
        self.expression(choice.expr).local_cost + choice.children.iter().map(|c| self.choice_cost(c)).sum::<f64>()
    }

    pub fn materialize(&self, choice: &Choice, plan_id: u64) -> PhysicalPlan {
        PhysicalPlan::new(plan_id, self.node(choice))
    }

    fn node(&self, choice: &Choice) -> PlanNode {
        let e = self.expression(choice.expr);
        PlanNode {
            operator: e.operator.clone(),
            table: e.table.clone(),
            est_cost: e.local_cost,
            est_rows: self.groups[choice.expr.group].rows,
            children: choice.children.iter().map(|c| self.node(c)).collect(),
        }
    }

    /// The plan with the given id.
    pub fn unrank(&self, id: u64) -> Result<PhysicalPlan, PlanSpaceError> {
        let choice = self.choice(id)?;
        Ok(self.materialize(&choice, id))
    }

    /// Cheapest choice: per group, the expression with the lowest best total
    /// cost, ties to the lowest ordinal.
    pub fn qep_choice(&self) -> Choice {
        self.best_in_group(self.root)
    }

    fn best_in_group(&self, group: usize) -> Choice {
        let g = &self.groups[group];
        let ordinal = g.best_ordinal;
        Choice {
            expr: ExprRef { group, ordinal },
            children: g.expressions[ordinal].child_groups.iter().map(|&c| self.best_in_group(c)).collect(),
        }
    }

    /// The optimizer's pick, carrying its own rank as plan id.
    pub fn qep(&self) -> PhysicalPlan {
        let choice = self.qep_choice();
        let id = self.rank(&choice);
        self.materialize(&choice, id)
    }

    /// Plans `0..min(limit, count)`.
    pub fn plans(&self, limit: Option<u64>) -> impl Iterator<Item = PhysicalPlan> + '_ {
        let end = limit.map_or(self.count_plans(), |l| l.min(self.count_plans()));
        (0..end).map(move |id| self.unrank(id).expect("id below count"))
    }
}
