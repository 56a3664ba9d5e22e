//! Physical plan space of a query: memo construction and costing, dense
//! plan ids, and the group forest used for structure-level pruning.

mod enumerate;
mod forest;
mod memo;

use thiserror::Error;

use crate::catalog::CatalogError;

pub use enumerate::Choice;
pub use forest::{
    build_group_forest, gfp_prune, ForestShape, GroupForest, GroupTree, PruneReport, PruneThresholds,
    MAX_SHAPES_PER_GROUP,
};
pub use memo::{
    build_memo, operator_cost, CostInputs, ExprRef, Group, GroupExpression, Memo, MemoBuilder, MAX_GROUPS,
};

#[derive(Debug, Error, PartialEq)]
pub enum PlanSpaceError {
    #[error("invalid memo: {0}")]
    InvalidMemo(String),
    #[error("query too large")]
    TooLarge,
    #[error("query has no relations")]
    EmptyQuery,
    #[error("query join graph is disconnected")]
    Disconnected,
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("plan id {id} out of range (space has {count} plans)")]
    IdOutOfRange { id: u64, count: u64 },
    #[error("too many group trees")]
    ShapeLimit,
    #[error("invalid pruning thresholds ({0}, {1})")]
    BadThresholds(f64, f64),
}

