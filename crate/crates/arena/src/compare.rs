//! Node-aligned plan diffs.

use arena_core::planmodel::PlanNode;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Same,
    OperatorChanged,
    CostChanged,
    /// Different scan target or child count, or no counterpart.
    Unmatched,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSide {
    pub op: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    pub cost: f64,
}

impl From<&PlanNode> for NodeSide {
    fn from(n: &PlanNode) -> Self {
        NodeSide {
            op: n.operator.name().to_string(),
            table: n.table.clone(),
            cost: n.est_cost,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeDiff {
    /// Preorder index in the simultaneous walk.
    pub position: usize,
    pub depth: usize,
    pub a: Option<NodeSide>,
    pub b: Option<NodeSide>,
    pub status: NodeStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanDiff {
    pub nodes: Vec<NodeDiff>,
    /// Nodes whose status is not `same`.
    pub flagged: usize,
}

fn same_cost(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0)
}

fn status(a: &PlanNode, b: &PlanNode) -> NodeStatus {
    if a.table != b.table || a.children.len() != b.children.len() {
        NodeStatus::Unmatched
    } else if a.operator != b.operator {
        NodeStatus::OperatorChanged
    } else if !same_cost(a.est_cost, b.est_cost) {
        NodeStatus::CostChanged
    } else {
        NodeStatus::Same
    }
}

fn walk(a: Option<&PlanNode>, b: Option<&PlanNode>, depth: usize, out: &mut Vec<NodeDiff>) {
    let status = match (a, b) {
        (Some(x), Some(y)) => status(x, y),
        _ => NodeStatus::Unmatched,
    };
    out.push(NodeDiff {
        position: out.len(),
        depth,
        a: a.map(NodeSide::from),
        b: b.map(NodeSide::from),
        status,
    });
    let (ka, kb) = (a.map_or(&[][..], |n| &n.children), b.map_or(&[][..], |n| &n.children));
    for i in 0..ka.len().max(kb.len()) {
        walk(ka.get(i), kb.get(i), depth + 1, out);
    }
}

/// Aligns two trees by position in a simultaneous preorder walk.
pub fn diff_plans(a: &PlanNode, b: &PlanNode) -> PlanDiff {
    let mut nodes = Vec::new();
    walk(Some(a), Some(b), 0, &mut nodes);
    let flagged = nodes.iter().filter(|n| n.status != NodeStatus::Same).count();
    PlanDiff { nodes, flagged }
}
