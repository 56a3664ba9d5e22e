//! Physical plan trees, their JSON form, and the digest every metric reads.
//!
//! Plan JSON (one object per line in plan-list files):
//!
//! ```json
//! {"id":0,"cost":12.5,"root":{"op":"HashJoin","cost":2.5,"rows":10.0,"children":[...]}}
//! ```
//!
//! Scan nodes additionally carry `"table"`. Field order is fixed, so two plans
//! are equal exactly when their serializations are byte-equal.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlanFormatError {
    #[error("malformed plan document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("malformed plan document at line {line}: {source}")]
    MalformedLine { line: usize, source: serde_json::Error },
    #[error("negative or non-finite {field} in plan {plan_id}")]
    BadNumber { plan_id: u64, field: &'static str },
    #[error("plan {plan_id}: {operator} expects {expected} children, found {found}")]
    Arity {
        plan_id: u64,
        operator: String,
        expected: usize,
        found: usize,
    },
    #[error("plan {plan_id}: scan node without a table")]
    ScanWithoutTable { plan_id: u64 },
    #[error("plan {plan_id}: total cost {declared} does not equal the sum of node costs {summed}")]
    CostMismatch { plan_id: u64, declared: f64, summed: f64 },
    #[error("duplicate plan id {0}")]
    DuplicateId(u64),
}

/// Physical operator tag. Names outside the built-in set are kept verbatim
/// so externally produced plans can be ingested.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Operator {
    SeqScan,
    IndexScan,
    HashJoin,
    MergeJoin,
    NestedLoop,
    Other(String),
}

impl Operator {
    pub const JOINS: [Operator; 3] = [Operator::HashJoin, Operator::MergeJoin, Operator::NestedLoop];

    pub fn name(&self) -> &str {
        match self {
            Operator::SeqScan => "SeqScan",
            Operator::IndexScan => "IndexScan",
            Operator::HashJoin => "HashJoin",
            Operator::MergeJoin => "MergeJoin",
            Operator::NestedLoop => "NestedLoop",
            Operator::Other(name) => name,
        }
    }

    pub fn is_scan(&self) -> bool {
        matches!(self, Operator::SeqScan | Operator::IndexScan)
    }

    pub fn is_join(&self) -> bool {
        matches!(self, Operator::HashJoin | Operator::MergeJoin | Operator::NestedLoop)
    }

    /// Required child count, for built-in operators.
    pub fn arity(&self) -> Option<usize> {
        match self {
            Operator::SeqScan | Operator::IndexScan => Some(0),
            Operator::HashJoin | Operator::MergeJoin | Operator::NestedLoop => Some(2),
            Operator::Other(_) => None,
        }
    }
}

impl From<String> for Operator {
    fn from(s: String) -> Self {
        match s.as_str() {
            "SeqScan" => Operator::SeqScan,
            "IndexScan" => Operator::IndexScan,
            "HashJoin" => Operator::HashJoin,
            "MergeJoin" => Operator::MergeJoin,
            "NestedLoop" => Operator::NestedLoop,
            _ => Operator::Other(s),
        }
    }
}

impl From<&str> for Operator {
    fn from(s: &str) -> Self {
        Operator::from(s.to_string())
    }
}

impl From<Operator> for String {
    fn from(op: Operator) -> Self {
        op.name().to_string()
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanNode {
    #[serde(rename = "op")]
    pub operator: Operator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    #[serde(rename = "cost")]
    pub est_cost: f64,
    #[serde(rename = "rows")]
    pub est_rows: f64,
    #[serde(default)]
    pub children: Vec<PlanNode>,
}

impl PlanNode {
    pub fn scan(operator: Operator, table: impl Into<String>, cost: f64, rows: f64) -> Self {
        PlanNode {
            operator,
            table: Some(table.into()),
            est_cost: cost,
            est_rows: rows,
            children: Vec::new(),
        }
    }

    pub fn join(operator: Operator, cost: f64, rows: f64, left: PlanNode, right: PlanNode) -> Self {
        PlanNode {
            operator,
            table: None,
            est_cost: cost,
            est_rows: rows,
            children: vec![left, right],
        }
    }

    /// Generic constructor for ingested operators.
    pub fn new(operator: impl Into<Operator>, table: Option<String>, cost: f64, children: Vec<PlanNode>) -> Self {
        PlanNode {
            operator: operator.into(),
            table,
            est_cost: cost,
            est_rows: 0.0,
            children,
        }
    }

    /// Content token: operator name, plus `[table]` for nodes with a target.
    pub fn token(&self) -> String {
        match &self.table {
            Some(t) => format!("{}[{}]", self.operator, t),
            None => self.operator.to_string(),
        }
    }

    /// Nodes in preorder.
    pub fn preorder(&self) -> Vec<&PlanNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.children.iter().rev());
        }
        out
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(PlanNode::node_count).sum::<usize>()
    }

    pub fn cost_sum(&self) -> f64 {
        self.est_cost + self.children.iter().map(PlanNode::cost_sum).sum::<f64>()
    }

    fn validate(&self, plan_id: u64) -> Result<(), PlanFormatError> {
        if !(self.est_cost.is_finite() && self.est_cost >= 0.0) {
            return Err(PlanFormatError::BadNumber { plan_id, field: "cost" });
        }
        if !(self.est_rows.is_finite() && self.est_rows >= 0.0) {
            return Err(PlanFormatError::BadNumber { plan_id, field: "rows" });
        }
        if let Some(expected) = self.operator.arity() {
            if expected != self.children.len() {
                return Err(PlanFormatError::Arity {
                    plan_id,
                    operator: self.operator.to_string(),
                    expected,
                    found: self.children.len(),
                });
            }
        }
        if self.operator.is_scan() && self.table.is_none() {
            return Err(PlanFormatError::ScanWithoutTable { plan_id });
        }
        self.children.iter().try_for_each(|c| c.validate(plan_id))
    }
}

/// A rooted physical operator tree. `total_cost` is the sum of node costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalPlan {
    #[serde(rename = "id")]
    pub plan_id: u64,
    #[serde(rename = "cost")]
    pub total_cost: f64,
    pub root: PlanNode,
}

impl PhysicalPlan {
    /// Builds a plan whose total cost is the sum of its node costs.
    pub fn new(plan_id: u64, root: PlanNode) -> Self {
        PhysicalPlan {
            plan_id,
            total_cost: root.cost_sum(),
            root,
        }
    }

    /// Number of base relations (scan leaves).
    pub fn table_count(&self) -> usize {
        self.root.preorder().iter().filter(|n| n.children.is_empty()).count()
    }

    pub fn validate(&self) -> Result<(), PlanFormatError> {
        if !(self.total_cost.is_finite() && self.total_cost >= 0.0) {
            return Err(PlanFormatError::BadNumber {
                plan_id: self.plan_id,
                field: "cost",
            });
        }
        self.root.validate(self.plan_id)?;
        let summed = self.root.cost_sum();
        if (summed - self.total_cost).abs() > 1e-9 * summed.abs().max(1.0) {
            return Err(PlanFormatError::CostMismatch {
                plan_id: self.plan_id,
                declared: self.total_cost,
                summed,
            });
        }
        Ok(())
    }

    pub fn digest(&self) -> PlanDigest {
        PlanDigest::of(self)
    }
}

pub fn serialize_plan(plan: &PhysicalPlan) -> String {
    serde_json::to_string(plan).expect("plans serialize")
}

pub fn parse_plan(text: &str) -> Result<PhysicalPlan, PlanFormatError> {
    let plan: PhysicalPlan = serde_json::from_str(text)?;
    plan.validate()?;
    Ok(plan)
}

/// Parses a newline-delimited plan list. Blank lines are skipped.
pub fn parse_plan_list(text: &str) -> Result<Vec<PhysicalPlan>, PlanFormatError> {
    let mut plans = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let plan: PhysicalPlan =
            serde_json::from_str(line).map_err(|source| PlanFormatError::MalformedLine { line: i + 1, source })?;
        plan.validate()?;
        if !ids.insert(plan.plan_id) {
            return Err(PlanFormatError::DuplicateId(plan.plan_id));
        }
        plans.push(plan);
    }
    Ok(plans)
}

pub fn serialize_plan_list(plans: &[PhysicalPlan]) -> String {
    let mut out = String::new();
    for p in plans {
        out.push_str(&serialize_plan(p));
        out.push('\n');
    }
    out
}

/// Content-blind hash of a rooted subtree's shape.
pub type ShapeHash = u64;

fn mix(mut x: u64) -> u64 {
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Shape hash of a node from the ordered shape hashes of its children.
pub fn combine_shape(children: &[ShapeHash]) -> ShapeHash {
    let mut h = mix(0x9e37_79b9_7f4a_7c15 ^ children.len() as u64);
    for &c in children {
        h = mix(h.rotate_left(17) ^ c);
    }
    h
}

/// Shape multiset of a tree given a child accessor. Returns the root shape
/// and, per shape, the number of nodes rooting it.
pub fn shape_multiset<T>(root: &T, children: impl Fn(&T) -> &[T] + Copy) -> (ShapeHash, BTreeMap<ShapeHash, u32>) {
    fn walk<T>(node: &T, children: impl Fn(&T) -> &[T] + Copy, acc: &mut BTreeMap<ShapeHash, u32>) -> ShapeHash {
        let kids: Vec<ShapeHash> = children(node).iter().map(|c| walk(c, children, acc)).collect();
        let h = combine_shape(&kids);
        *acc.entry(h).or_insert(0) += 1;
        h
    }
    let mut acc = BTreeMap::new();
    let root_shape = walk(root, children, &mut acc);
    (root_shape, acc)
}

/// Precomputed features of a plan used by every distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanDigest {
    pub plan_id: u64,
    /// Shape of the whole tree.
    pub root_shape: ShapeHash,
    pub structure_multiset: BTreeMap<ShapeHash, u32>,
    pub token_sequence: Vec<String>,
    pub total_cost: f64,
    /// Subtree kernel of the plan with itself: sum of squared counts.
    pub self_kernel: u64,
}

impl PlanDigest {
    pub fn of(plan: &PhysicalPlan) -> Self {
        let (root_shape, structure_multiset) = shape_multiset(&plan.root, |n| n.children.as_slice());
        let token_sequence = plan.root.preorder().into_iter().map(PlanNode::token).collect();
        Self::from_parts(plan.plan_id, root_shape, structure_multiset, token_sequence, plan.total_cost)
    }

    pub fn from_parts(
        plan_id: u64,
        root_shape: ShapeHash,
        structure_multiset: BTreeMap<ShapeHash, u32>,
        token_sequence: Vec<String>,
        total_cost: f64,
    ) -> Self {
        let self_kernel = structure_multiset.values().map(|&c| u64::from(c) * u64::from(c)).sum();
        PlanDigest {
            plan_id,
            root_shape,
            structure_multiset,
            token_sequence,
            total_cost,
            self_kernel,
        }
    }

    pub fn node_count(&self) -> usize {
        self.token_sequence.len()
    }
}
