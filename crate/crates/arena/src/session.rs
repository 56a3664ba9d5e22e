//! A selection session: an immutable plan space, its frozen metric space and
//! the learner's viewed list.

use std::collections::HashMap;
use std::time::{SystemTime, UNIX_EPOCH};

use arena_core::catalog::{Catalog, CatalogError};
use arena_core::metrics::{CostBounds, MetricsError, TipsParams};
use arena_core::planmodel::{PhysicalPlan, PlanFormatError};
use arena_core::planspace::{build_memo, Memo, PlanSpaceError};
use arena_core::sqlfront::{parse_query, SqlError};
use arena_core::tips::{
    b_tips_heap, i_tips, prepare_from_list, prepare_from_memo, set_interestingness, MatrixDistance, PairDistance,
    PipelineConfig, Prepared, SelectionState, TipsError,
};
use serde::Serialize;
use thiserror::Error;
use uuid::Uuid;

use crate::compare::{diff_plans, PlanDiff};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
}

impl From<SqlError> for SessionError {
    fn from(e: SqlError) -> Self {
        SessionError::BadRequest(e.to_string())
    }
}

impl From<CatalogError> for SessionError {
    fn from(e: CatalogError) -> Self {
        SessionError::BadRequest(e.to_string())
    }
}

impl From<PlanFormatError> for SessionError {
    fn from(e: PlanFormatError) -> Self {
        SessionError::BadRequest(e.to_string())
    }
}

impl From<MetricsError> for SessionError {
    fn from(e: MetricsError) -> Self {
        SessionError::BadRequest(e.to_string())
    }
}

impl From<PlanSpaceError> for SessionError {
    fn from(e: PlanSpaceError) -> Self {
        match e {
            PlanSpaceError::IdOutOfRange { .. } => SessionError::NotFound(e.to_string()),
            _ => SessionError::BadRequest(e.to_string()),
        }
    }
}

impl From<TipsError> for SessionError {
    fn from(e: TipsError) -> Self {
        match e {
            TipsError::Exhausted | TipsError::AlreadyViewed(_) => SessionError::Conflict(e.to_string()),
            TipsError::UnknownPlan(_) => SessionError::NotFound(e.to_string()),
            TipsError::PlanSpace(p) => p.into(),
            _ => SessionError::BadRequest(e.to_string()),
        }
    }
}

/// Distances of a plan to the QEP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanMetrics {
    pub s: f64,
    pub c: f64,
    pub cost: f64,
    pub rel: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanView {
    pub plan_id: u64,
    pub is_qep: bool,
    pub plan: PhysicalPlan,
    pub metrics: PlanMetrics,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchReport {
    pub k: usize,
    pub params: TipsParams,
    pub plans: Vec<PlanView>,
    /// Minimum pairwise refined distance over the selection plus the QEP.
    pub interestingness: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepReport {
    pub plan: PlanView,
    /// Minimum refined distance from the proposed plan to the viewed plans.
    pub min_distance: f64,
    pub viewed: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Distances {
    pub s_dist: f64,
    pub c_dist: f64,
    pub cost_dist: f64,
    pub dist: f64,
    #[serde(rename = "Dist")]
    pub refined: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub a: u64,
    pub b: u64,
    pub diff: PlanDiff,
    pub distances: Distances,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionSummary {
    pub session_id: Uuid,
    pub created_at: u64,
    pub space_size: u64,
    pub candidate_count: usize,
    pub laps_applied: bool,
    pub pruned: usize,
    pub bounds: CostBounds,
    pub params: TipsParams,
    pub qep: PlanView,
}

#[derive(Debug)]
enum PlanStore {
    Memo(Memo),
    List(HashMap<u64, PhysicalPlan>),
}

#[derive(Debug)]
pub struct Session {
    id: Uuid,
    created_at: u64,
    store: PlanStore,
    space_size: u64,
    qep: PhysicalPlan,
    state: SelectionState,
    laps_applied: bool,
    pruned: usize,
    mock: Option<MatrixDistance>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl Session {
    fn assemble(store: PlanStore, space_size: u64, prepared: Prepared) -> Self {
        Session {
            id: Uuid::new_v4(),
            created_at: now(),
            store,
            space_size,
            qep: prepared.qep,
            state: SelectionState::new(prepared.space),
            laps_applied: prepared.laps_applied,
            pruned: prepared.pruned,
            mock: None,
        }
    }

    pub fn from_sql(sql: &str, catalog: &Catalog, cfg: &PipelineConfig) -> Result<Self, SessionError> {
        let query = parse_query(sql)?;
        let memo = build_memo(&query, catalog)?;
        let prepared = prepare_from_memo(&memo, cfg)?;
        let size = memo.count_plans();
        Ok(Self::assemble(PlanStore::Memo(memo), size, prepared))
    }

    /// Ingested plans. Without a designated QEP the cheapest plan (smallest id
    /// on ties) is used.
    pub fn from_plans(plans: Vec<PhysicalPlan>, qep_id: Option<u64>, cfg: &PipelineConfig) -> Result<Self, SessionError> {
        if plans.is_empty() {
            return Err(SessionError::BadRequest("empty plan list".into()));
        }
        let mut seen = HashMap::new();
        for p in &plans {
            p.validate()?;
            if seen.insert(p.plan_id, ()).is_some() {
                return Err(SessionError::BadRequest(format!("duplicate plan id {}", p.plan_id)));
            }
        }
        let qep_id = qep_id.unwrap_or_else(|| {
            plans
                .iter()
                .min_by(|a, b| a.total_cost.total_cmp(&b.total_cost).then(a.plan_id.cmp(&b.plan_id)))
                .map(|p| p.plan_id)
                .expect("nonempty")
        });
        if !seen.contains_key(&qep_id) {
            return Err(SessionError::BadRequest(format!("QEP id {qep_id} is not in the plan list")));
        }
        let prepared = prepare_from_list(&plans, qep_id, cfg)?;
        let size = plans.len() as u64;
        let store = PlanStore::List(plans.into_iter().map(|p| (p.plan_id, p)).collect());
        Ok(Self::assemble(store, size, prepared))
    }

    /// Replaces refined distances used for selection by explicit values.
    pub fn with_distance_matrix(mut self, pairs: Vec<(u64, u64, f64)>) -> Result<Self, SessionError> {
        for &(a, b, d) in &pairs {
            for id in [a, b] {
                if !self.is_known(id) {
                    return Err(SessionError::BadRequest(format!("distance matrix names unknown plan {id}")));
                }
            }
            if !(d.is_finite() && d >= 0.0) {
                return Err(SessionError::BadRequest(format!("bad distance {d} for ({a}, {b})")));
            }
        }
        self.mock = Some(MatrixDistance::from_pairs(pairs));
        Ok(self)
    }

    /// Starts from plans viewed out of band; the QEP must be listed.
    pub fn with_viewed(mut self, viewed: &[u64]) -> Result<Self, SessionError> {
        self.state = SelectionState::with_viewed(self.state.space().clone(), viewed)?;
        Ok(self)
    }

    pub fn id(&self) -> Uuid {
        self.id
    }

    pub fn viewed(&self) -> &[u64] {
        self.state.viewed()
    }

    fn is_known(&self, id: u64) -> bool {
        self.state.space().contains(id)
    }

    fn plan(&self, id: u64) -> Result<PhysicalPlan, SessionError> {
        if !self.is_known(id) {
            return Err(SessionError::NotFound(format!("plan {id} is not in this session")));
        }
        match &self.store {
            PlanStore::Memo(m) => Ok(m.unrank(id)?),
            PlanStore::List(l) => Ok(l[&id].clone()),
        }
    }

    pub fn view(&self, id: u64) -> Result<PlanView, SessionError> {
        let plan = self.plan(id)?;
        let space = self.state.space();
        let comp = space.components_to_qep(id).expect("known plan");
        Ok(PlanView {
            plan_id: id,
            is_qep: id == space.qep_id(),
            plan,
            metrics: PlanMetrics {
                s: comp.s,
                c: comp.c,
                cost: comp.cost,
                rel: space.relevance_of(id).expect("known plan"),
            },
        })
    }

    pub fn summary(&self) -> SessionSummary {
        let space = self.state.space();
        SessionSummary {
            session_id: self.id,
            created_at: self.created_at,
            space_size: self.space_size,
            candidate_count: space.candidate_ids().len(),
            laps_applied: self.laps_applied,
            pruned: self.pruned,
            bounds: space.bounds(),
            params: space.params(),
            qep: self.view(self.qep.plan_id).expect("QEP is known"),
        }
    }

    fn distance(&self, params: Option<TipsParams>) -> Box<dyn PairDistance + '_> {
        match (&self.mock, params) {
            (Some(m), _) => Box::new(m),
            (None, Some(p)) => Box::new(self.state.space().with_params(p)),
            (None, None) => Box::new(self.state.space()),
        }
    }

    pub fn batch(&self, k: usize, params: Option<TipsParams>) -> Result<BatchReport, SessionError> {
        if let Some(p) = params {
            p.validate()?;
        }
        let space = self.state.space();
        let d = self.distance(params);
        let qep = space.qep_id();
        let selected = b_tips_heap(&*d, &space.candidate_ids(), qep, k)?;
        let mut with_qep = vec![qep];
        with_qep.extend(&selected);
        let interestingness = set_interestingness(&*d, &with_qep)?;
        Ok(BatchReport {
            k,
            params: params.unwrap_or(space.params()),
            plans: selected.iter().map(|&id| self.view(id)).collect::<Result<_, _>>()?,
            interestingness,
        })
    }

    /// Proposes the next plan without changing the viewed list.
    pub fn step(&self) -> Result<StepReport, SessionError> {
        let d = self.distance(None);
        let viewed = self.state.viewed();
        let pick = i_tips(&*d, &self.state.candidates(), viewed)?;
        let min_distance = viewed.iter().map(|&v| d.distance(pick, v)).fold(f64::INFINITY, f64::min);
        Ok(StepReport {
            plan: self.view(pick)?,
            min_distance,
            viewed: viewed.to_vec(),
        })
    }

    pub fn mark_viewed(&mut self, id: u64) -> Result<&[u64], SessionError> {
        self.state.mark_viewed(id)?;
        Ok(self.state.viewed())
    }

    pub fn compare(&self, a: u64, b: u64) -> Result<CompareReport, SessionError> {
        let (pa, pb) = (self.plan(a)?, self.plan(b)?);
        let space = self.state.space();
        let comp = space.components(a, b);
        let params = space.params();
        Ok(CompareReport {
            a,
            b,
            diff: diff_plans(&pa.root, &pb.root),
            distances: Distances {
                s_dist: comp.s,
                c_dist: comp.c,
                cost_dist: comp.cost,
                dist: comp.weighted(&params),
                refined: space.refined_with(a, b, &params),
            },
        })
    }
}
