//! Request/response types shared by the HTTP service and the CLI.
//!
//! Both front ends decode the same JSON, run the same functions and encode with
//! [`encode`], so equal inputs give byte-identical output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::filter::{self, FilterSpec, TimeRange, ValidationError};
use crate::flow::{self, FlowGraph, DEFAULT_MAX_STEPS};
use crate::mapping::CatalogEntry;
use crate::session::{paginate, AnalysisStore, Session, SessionPage};

pub const MAX_PAGE_LIMIT: u64 = 500;
pub const DEFAULT_PAGE_LIMIT: u64 = 50;
/// Upper bound on the flow horizon accepted from clients.
pub const MAX_FLOW_STEPS: u32 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PageRequest {
    #[serde(default)]
    pub offset: u64,
    #[serde(default = "default_limit")]
    pub limit: u64,
}

fn default_limit() -> u64 {
    DEFAULT_PAGE_LIMIT
}

impl Default for PageRequest {
    fn default() -> Self {
        PageRequest {
            offset: 0,
            limit: DEFAULT_PAGE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionQuery {
    #[serde(default)]
    pub time_range: TimeRange,
    #[serde(default)]
    pub filter: FilterSpec,
    #[serde(default)]
    pub page: PageRequest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowQuery {
    #[serde(default)]
    pub time_range: TimeRange,
    #[serde(default)]
    pub filter: FilterSpec,
    #[serde(default = "default_steps")]
    pub max_steps: u32,
}

fn default_steps() -> u32 {
    DEFAULT_MAX_STEPS
}

impl Default for FlowQuery {
    fn default() -> Self {
        FlowQuery {
            time_range: TimeRange::default(),
            filter: FilterSpec::default(),
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

/// Resolves and applies the time range and filter; returns matches newest first.
pub fn select<'a>(
    store: &'a AnalysisStore,
    time_range: &TimeRange,
    spec: &FilterSpec,
    now: i64,
) -> Result<Vec<&'a Session>, ValidationError> {
    let range = time_range
        .resolve(now)
        .map_err(|e| e.within("time_range"))?;
    spec.validate().map_err(|e| e.within("filter"))?;
    Ok(filter::apply(store.sessions(), spec, &range))
}

pub fn run_session_query(
    store: &AnalysisStore,
    query: &SessionQuery,
    now: i64,
) -> Result<SessionPage, ValidationError> {
    let PageRequest { offset, limit } = query.page;
    if limit == 0 || limit > MAX_PAGE_LIMIT {
        return Err(ValidationError {
            field: "page.limit".into(),
            message: format!("limit must be between 1 and {MAX_PAGE_LIMIT}"),
        });
    }
    let matches = select(store, &query.time_range, &query.filter, now)?;
    Ok(paginate(matches.into_iter(), offset, limit))
}

pub fn run_flow_query(
    store: &AnalysisStore,
    query: &FlowQuery,
    now: i64,
) -> Result<FlowGraph, ValidationError> {
    if query.max_steps == 0 || query.max_steps > MAX_FLOW_STEPS {
        return Err(ValidationError {
            field: "max_steps".into(),
            message: format!("max_steps must be between 1 and {MAX_FLOW_STEPS}"),
        });
    }
    let matches = select(store, &query.time_range, &query.filter, now)?;
    Ok(flow::aggregate(matches, query.max_steps).expect("max_steps validated"))
}

/// One action of a session detail view, with its display labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionDetail {
    pub step_index: u32,
    pub action_id: String,
    pub labels: BTreeMap<String, String>,
    pub timestamp: i64,
    pub duration_ms: Option<u64>,
    pub entities: BTreeMap<String, Vec<String>>,
    pub url: String,
    pub source_row_id: u64,
    pub intra_row_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionDetail {
    pub session_id: String,
    pub user_id: Option<String>,
    pub logged_in: bool,
    pub start_ts: i64,
    pub end_ts: i64,
    pub duration_ms: u64,
    pub action_count: u32,
    pub actions: Vec<ActionDetail>,
}

pub fn session_detail(store: &AnalysisStore, session: &Session) -> SessionDetail {
    SessionDetail {
        session_id: session.session_id.clone(),
        user_id: session.user_id.clone(),
        logged_in: session.logged_in(),
        start_ts: session.start_ts,
        end_ts: session.end_ts,
        duration_ms: session.duration_ms,
        action_count: session.action_count,
        actions: session
            .actions
            .iter()
            .map(|a| ActionDetail {
                step_index: a.step_index,
                action_id: a.action_id.clone(),
                labels: store.labels(&a.action_id),
                timestamp: a.timestamp,
                duration_ms: a.duration_ms,
                entities: a.entities.clone(),
                url: a.url.clone(),
                source_row_id: a.source_row_id,
                intra_row_index: a.intra_row_index,
            })
            .collect(),
    }
}

pub fn action_list(store: &AnalysisStore) -> &[CatalogEntry] {
    &store.catalog().entries
}

/// Canonical compact JSON encoding used for every response body and exported file.
pub fn encode<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("response types always serialize")
}
