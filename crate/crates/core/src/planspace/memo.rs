use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::catalog::Catalog;
use crate::planmodel::Operator;
use crate::sqlfront::{Predicate, QueryGraph};

use super::PlanSpaceError;

/// Upper bound on the number of groups a memo may hold.
pub const MAX_GROUPS: usize = 1 << 20;

/// `group.expression`, rendered 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExprRef {
    pub group: usize,
    pub ordinal: usize,
}

impl fmt::Display for ExprRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.group + 1, self.ordinal + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupExpression {
    pub operator: Operator,
    /// Scan target, for scan expressions.
    pub table: Option<String>,
    pub child_groups: Vec<usize>,
    /// Number of distinct plans rooted at this expression.
    pub alt_count: u64,
    pub local_cost: f64,
    pub best_total_cost: f64,
    /// Most expensive plan rooted at this expression.
    pub worst_total_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    /// Bitmask of base relations covered, for enumerated memos.
    pub relations: u64,
    /// Estimated output cardinality.
    pub rows: f64,
    pub expressions: Vec<GroupExpression>,
    pub alt_count: u64,
    pub best_ordinal: usize,
    pub best_total_cost: f64,
    pub worst_total_cost: f64,
}

/// Cascades-style memo: groups of equivalent physical expressions whose
/// children are earlier groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Memo {
    pub(crate) groups: Vec<Group>,
    pub(crate) root: usize,
}

impl Memo {
    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group(&self, id: usize) -> &Group {
        &self.groups[id]
    }

    pub fn root_group(&self) -> usize {
        self.root
    }

    pub fn expression(&self, e: ExprRef) -> &GroupExpression {
        &self.groups[e.group].expressions[e.ordinal]
    }

    /// Total number of plans: the root group's alternative count.
    pub fn count_plans(&self) -> u64 {
        self.groups[self.root].alt_count
    }

    /// Cost of the cheapest and the most expensive plan in the space.
    pub fn cost_range(&self) -> (f64, f64) {
        let root = &self.groups[self.root];
        (root.best_total_cost, root.worst_total_cost)
    }
}

/// Incremental memo construction. Expressions may only reference groups
/// that already exist, which keeps the memo acyclic.
#[derive(Debug, Default)]
pub struct MemoBuilder {
    groups: Vec<Group>,
}

impl MemoBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_group(&mut self, relations: u64, rows: f64) -> usize {
        self.groups.push(Group {
            relations,
            rows,
            expressions: Vec::new(),
            alt_count: 0,
            best_ordinal: 0,
            best_total_cost: 0.0,
            worst_total_cost: 0.0,
        });
        self.groups.len() - 1
    }

    pub fn add_expression(
        &mut self,
        group: usize,
        operator: Operator,
        table: Option<String>,
        child_groups: Vec<usize>,
        local_cost: f64,
    ) -> Result<ExprRef, PlanSpaceError> {
        if group >= self.groups.len() {
            return Err(PlanSpaceError::InvalidMemo(format!("unknown group {group}")));
        }
        if let Some(&c) = child_groups.iter().find(|&&c| c >= group) {
            return Err(PlanSpaceError::InvalidMemo(format!(
                "group {group} references group {c}, which is not constructed before it"
            )));
        }
        if let Some(arity) = operator.arity() {
            if arity != child_groups.len() {
                return Err(PlanSpaceError::InvalidMemo(format!(
                    "{operator} needs {arity} children, got {}",
                    child_groups.len()
                )));
            }
        }
        if !(local_cost.is_finite() && local_cost >= 0.0) {
            return Err(PlanSpaceError::InvalidMemo(format!("bad local cost {local_cost}")));
        }
        let g = &mut self.groups[group];
        g.expressions.push(GroupExpression {
            operator,
            table,
            child_groups,
            alt_count: 0,
            local_cost,
            best_total_cost: 0.0,
            worst_total_cost: 0.0,
        });
        Ok(ExprRef {
            group,
            ordinal: g.expressions.len() - 1,
        })
    }

    pub fn rows(&self, group: usize) -> f64 {
        self.groups[group].rows
    }

    /// Computes alternative counts and best/worst costs bottom-up.
    pub fn finish(mut self, root: usize) -> Result<Memo, PlanSpaceError> {
        if root >= self.groups.len() {
            return Err(PlanSpaceError::InvalidMemo(format!("unknown root group {root}")));
        }
        for gi in 0..self.groups.len() {
            if self.groups[gi].expressions.is_empty() {
                return Err(PlanSpaceError::InvalidMemo(format!("group {} has no expressions", gi + 1)));
            }
            let (done, rest) = self.groups.split_at_mut(gi);
            let group = &mut rest[0];
            let mut total: u64 = 0;
            let mut best = (f64::INFINITY, 0usize);
            let mut worst = 0.0f64;
            for (ord, e) in group.expressions.iter_mut().enumerate() {
                let mut alt: u64 = 1;
                let mut best_cost = e.local_cost;
                let mut worst_cost = e.local_cost;
                for &c in &e.child_groups {
                    alt = alt.checked_mul(done[c].alt_count).ok_or(PlanSpaceError::TooLarge)?;
                    best_cost += done[c].best_total_cost;
                    worst_cost += done[c].worst_total_cost;
                }
                e.alt_count = alt;
                e.best_total_cost = best_cost;
                e.worst_total_cost = worst_cost;
                total = total.checked_add(alt).ok_or(PlanSpaceError::TooLarge)?;
                if best_cost < best.0 {
                    best = (best_cost, ord);
                }
                worst = worst.max(worst_cost);
            }
            group.alt_count = total;
            group.best_total_cost = best.0;
            group.best_ordinal = best.1;
            group.worst_total_cost = worst;
        }
        Ok(Memo {
            groups: self.groups,
            root,
        })
    }
}

/// Local cost of one physical expression given child cardinalities.
///
/// The constants are arbitrary but keep every join operator the cheapest
/// somewhere in the input space.
pub fn operator_cost(op: &Operator, inputs: CostInputs) -> f64 {
    match op {
        Operator::SeqScan => inputs.pages,
        Operator::IndexScan => inputs.index_selectivity * inputs.table_rows * 2.0 + 1.0,
        Operator::HashJoin => 1.2 * (inputs.left + inputs.right) + 0.1 * inputs.left,
        Operator::MergeJoin => {
            let sort = |n: f64| n * n.max(1.0).ln();
            inputs.left + inputs.right + 0.3 * (sort(inputs.left) + sort(inputs.right))
        }
        Operator::NestedLoop => inputs.left * (0.01 * inputs.right).max(1.0),
        Operator::Other(_) => 0.0,
    }
}

/// Quantities the cost formulas read. Unused fields stay zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct CostInputs {
    pub pages: f64,
    pub table_rows: f64,
    pub index_selectivity: f64,
    /// Left (outer/build) input cardinality.
    pub left: f64,
    pub right: f64,
}

struct BaseRelation {
    table: String,
    out_rows: f64,
    pages: f64,
    table_rows: f64,
    /// Best selectivity among predicates an index can serve.
    index_selectivity: Option<f64>,
}

/// Builds the memo of all bushy, cartesian-free join trees over `query`.
pub fn build_memo(query: &QueryGraph, catalog: &Catalog) -> Result<Memo, PlanSpaceError> {
    let n = query.relations.len();
    if n == 0 {
        return Err(PlanSpaceError::EmptyQuery);
    }
    if n > 64 {
        return Err(PlanSpaceError::TooLarge);
    }

    let mut base = Vec::with_capacity(n);
    for rel in &query.relations {
        let stats = catalog
            .table(&rel.table)
            .ok_or_else(|| PlanSpaceError::Catalog(crate::catalog::CatalogError::UnknownTable(rel.table.clone())))?;
        let mut filter_sel = 1.0;
        let mut index_sel: Option<f64> = None;
        for p in query.filters_on(&rel.alias) {
            let sel = catalog.estimate_selectivity(p, query)?;
            filter_sel *= sel;
            if let Predicate::Equals { column, .. } | Predicate::Range { column, .. } = p {
                if stats.is_indexed(&column.column) {
                    index_sel = Some(index_sel.map_or(sel, |s: f64| s.min(sel)));
                }
            }
        }
        base.push(BaseRelation {
            table: rel.table.clone(),
            out_rows: stats.row_count as f64 * filter_sel,
            pages: stats.page_count as f64,
            table_rows: stats.row_count as f64,
            index_selectivity: index_sel,
        });
    }

    let mut edges = Vec::new();
    for e in query.distinct_edges() {
        let l = query.relation_index(&e.left.alias).expect("parser resolved aliases");
        let r = query.relation_index(&e.right.alias).expect("parser resolved aliases");
        let sel = catalog.estimate_selectivity(&Predicate::EquiJoin(e.clone()), query)?;
        edges.push((1u64 << l | 1u64 << r, sel));
    }
    let mut adjacency = vec![0u64; n];
    for &(mask, _) in &edges {
        let (a, b) = (mask.trailing_zeros() as usize, 63 - mask.leading_zeros() as usize);
        adjacency[a] |= 1 << b;
        adjacency[b] |= 1 << a;
    }

    let masks = connected_subsets(n, &adjacency)?;
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    if !masks.contains(&full) {
        return Err(PlanSpaceError::Disconnected);
    }

    let mut builder = MemoBuilder::new();
    let mut group_of: HashMap<u64, usize> = HashMap::with_capacity(masks.len());
    for &mask in &masks {
        let mut rows: f64 = bits(mask).map(|i| base[i].out_rows).product();
        for &(edge, sel) in &edges {
            if edge & mask == edge {
                rows *= sel;
            }
        }
        let g = builder.add_group(mask, rows);
        group_of.insert(mask, g);

        if mask.count_ones() == 1 {
            let rel = &base[mask.trailing_zeros() as usize];
            let seq = operator_cost(
                &Operator::SeqScan,
                CostInputs {
                    pages: rel.pages,
                    ..Default::default()
                },
            );
            builder.add_expression(g, Operator::SeqScan, Some(rel.table.clone()), vec![], seq)?;
            if let Some(sel) = rel.index_selectivity {
                let cost = operator_cost(
                    &Operator::IndexScan,
                    CostInputs {
                        table_rows: rel.table_rows,
                        index_selectivity: sel,
                        ..Default::default()
                    },
                );
                builder.add_expression(g, Operator::IndexScan, Some(rel.table.clone()), vec![], cost)?;
            }
            continue;
        }

        // Ordered partitions in increasing order of the left mask.
        let mut left = mask.wrapping_neg() & mask;
        while left != mask {
            let right = mask & !left;
            if let (Some(&gl), Some(&gr)) = (group_of.get(&left), group_of.get(&right)) {
                let touches = bits(left).any(|i| adjacency[i] & right != 0);
                if touches {
                    let inputs = CostInputs {
                        left: builder.rows(gl),
                        right: builder.rows(gr),
                        ..Default::default()
                    };
                    for op in Operator::JOINS {
                        let cost = operator_cost(&op, inputs);
                        builder.add_expression(g, op, None, vec![gl, gr], cost)?;
                    }
                }
            }
            left = (left.wrapping_sub(mask)) & mask;
        }
    }
    builder.finish(group_of[&full])
}

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| mask >> i & 1 == 1)
}

/// All connected relation subsets, ordered by size then mask.
fn connected_subsets(n: usize, adjacency: &[u64]) -> Result<Vec<u64>, PlanSpaceError> {
    let mut seen: HashSet<u64> = (0..n).map(|i| 1u64 << i).collect();
    let mut frontier: Vec<u64> = seen.iter().copied().collect();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &s in &frontier {
            let neighbours = bits(s).fold(0u64, |acc, i| acc | adjacency[i]) & !s;
            for j in bits(neighbours) {
                let grown = s | 1 << j;
                if seen.insert(grown) {
                    if seen.len() > MAX_GROUPS {
                        return Err(PlanSpaceError::TooLarge);
                    }
                    next.push(grown);
                }
            }
        }
        frontier = next;
    }
    let mut masks: Vec<u64> = seen.into_iter().collect();
    masks.sort_by_key(|&m| (m.count_ones(), m));
    Ok(masks)
}
