//! Per-step action counts and step-to-step transitions backing the Sankey overview.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::Session;

pub const DEFAULT_MAX_STEPS: u32 = 8;

/// Steps considered when ranking actions top to bottom.
const ORDERING_HORIZON: u32 = 8;

/// Sessions at `step` performing `action_id`. `ended` of them have no further action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowNode {
    pub step: u32,
    pub action_id: String,
    pub count: u64,
    pub ended: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowEdge {
    /// Step of the source node; the target is at `step + 1`.
    pub step: u32,
    pub from_action_id: String,
    pub to_action_id: String,
    pub count: u64,
}

/// Aggregated flow of a session set. Nodes are sorted by (step, action), edges by
/// (step, from, to); the encoding is deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowGraph {
    pub max_steps: u32,
    pub session_total: u64,
    /// Top-to-bottom row order.
    pub action_order: Vec<String>,
    pub nodes: Vec<FlowNode>,
    pub edges: Vec<FlowEdge>,
    /// Step -> sessions whose last action is at that step (within the horizon).
    pub endings: BTreeMap<u32, u64>,
}

impl FlowGraph {
    pub fn node(&self, step: u32, action_id: &str) -> Option<&FlowNode> {
        self.nodes
            .iter()
            .find(|n| n.step == step && n.action_id == action_id)
    }

    pub fn node_count(&self, step: u32, action_id: &str) -> u64 {
        self.node(step, action_id).map_or(0, |n| n.count)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlowError {
    #[error("max_steps must be at least 1")]
    ZeroSteps,
}

/// Mergeable counts; partial aggregates over disjoint session sets add up.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlowCounter {
    max_steps: u32,
    sessions: u64,
    nodes: HashMap<(u32, String), (u64, u64)>,
    edges: HashMap<(u32, String, String), u64>,
}

impl FlowCounter {
    pub fn new(max_steps: u32) -> Result<FlowCounter, FlowError> {
        if max_steps == 0 {
            return Err(FlowError::ZeroSteps);
        }
        Ok(FlowCounter {
            max_steps,
            ..FlowCounter::default()
        })
    }

    pub fn add(&mut self, session: &Session) {
        self.sessions += 1;
        let horizon = session.actions.len().min(self.max_steps as usize);
        let prefix = &session.actions[..horizon];
        for (i, action) in prefix.iter().enumerate() {
            let step = i as u32 + 1;
            let node = self
                .nodes
                .entry((step, action.action_id.clone()))
                .or_default();
            node.0 += 1;
            if i + 1 == session.actions.len() {
                node.1 += 1;
            }
        }
        for (i, pair) in prefix.windows(2).enumerate() {
            *self
                .edges
                .entry((
                    i as u32 + 1,
                    pair[0].action_id.clone(),
                    pair[1].action_id.clone(),
                ))
                .or_default() += 1;
        }
    }

    /// Adds another counter's counts. Both must use the same horizon.
    pub fn merge(&mut self, other: FlowCounter) {
        assert_eq!(
            self.max_steps, other.max_steps,
            "merging different horizons"
        );
        self.sessions += other.sessions;
        for (key, (count, ended)) in other.nodes {
            let node = self.nodes.entry(key).or_default();
            node.0 += count;
            node.1 += ended;
        }
        for (key, count) in other.edges {
            *self.edges.entry(key).or_default() += count;
        }
    }

    pub fn finish(self) -> FlowGraph {
        let mut nodes: Vec<FlowNode> = self
            .nodes
            .into_iter()
            .map(|((step, action_id), (count, ended))| FlowNode {
                step,
                action_id,
                count,
                ended,
            })
            .collect();
        nodes.sort_by(|a, b| (a.step, &a.action_id).cmp(&(b.step, &b.action_id)));

        let mut edges: Vec<FlowEdge> = self
            .edges
            .into_iter()
            .map(|((step, from, to), count)| FlowEdge {
                step,
                from_action_id: from,
                to_action_id: to,
                count,
            })
            .collect();
        edges.sort_by(|a, b| {
            (a.step, &a.from_action_id, &a.to_action_id).cmp(&(
                b.step,
                &b.from_action_id,
                &b.to_action_id,
            ))
        });

        let mut endings: BTreeMap<u32, u64> = BTreeMap::new();
        let mut weight: BTreeMap<&str, u64> = BTreeMap::new();
        for node in &nodes {
            if node.ended > 0 {
                *endings.entry(node.step).or_default() += node.ended;
            }
            let w = weight.entry(node.action_id.as_str()).or_default();
            if node.step <= ORDERING_HORIZON {
                *w += node.count;
            }
        }
        let mut action_order: Vec<(&str, u64)> = weight.into_iter().collect();
        action_order.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let action_order = action_order
            .into_iter()
            .map(|(a, _)| a.to_string())
            .collect();

        FlowGraph {
            max_steps: self.max_steps,
            session_total: self.sessions,
            action_order,
            nodes,
            edges,
            endings,
        }
    }
}

/// Counts the first `max_steps` actions of every session.
///
/// Sessions longer than the horizon contribute their prefix and no ending. Actions are ordered
/// by total occurrences over the first eight steps, descending, ties by action id.
pub fn aggregate<'a>(
    sessions: impl IntoIterator<Item = &'a Session>,
    max_steps: u32,
) -> Result<FlowGraph, FlowError> {
    let mut counter = FlowCounter::new(max_steps)?;
    for s in sessions {
        counter.add(s);
    }
    Ok(counter.finish())
}

/// Nodes and edges to emphasize when hovering an action.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSubgraph {
    pub action_id: String,
    pub nodes: Vec<FlowNode>,
    pub edges: Vec<FlowEdge>,
}

/// Selects everything reachable forward from any node of `action_id`, plus the edges leading
/// into those nodes and their source nodes. Counts are copied, not recomputed. Unknown actions
/// yield an empty subgraph.
pub fn highlight_paths(flow: &FlowGraph, action_id: &str) -> FlowSubgraph {
    let mut selected: BTreeSet<(u32, &str)> = flow
        .nodes
        .iter()
        .filter(|n| n.action_id == action_id)
        .map(|n| (n.step, n.action_id.as_str()))
        .collect();
    if selected.is_empty() {
        return FlowSubgraph {
            action_id: action_id.to_string(),
            ..FlowSubgraph::default()
        };
    }
    let seeds = selected.clone();
    let mut edge_idx: BTreeSet<usize> = BTreeSet::new();

    // edges are sorted by step, so one pass propagates reachability forward
    for (i, e) in flow.edges.iter().enumerate() {
        if selected.contains(&(e.step, e.from_action_id.as_str())) {
            edge_idx.insert(i);
            selected.insert((e.step + 1, e.to_action_id.as_str()));
        }
    }
    for (i, e) in flow.edges.iter().enumerate() {
        if seeds.contains(&(e.step + 1, e.to_action_id.as_str())) {
            edge_idx.insert(i);
            selected.insert((e.step, e.from_action_id.as_str()));
        }
    }

    FlowSubgraph {
        action_id: action_id.to_string(),
        nodes: flow
            .nodes
            .iter()
            .filter(|n| selected.contains(&(n.step, n.action_id.as_str())))
            .cloned()
            .collect(),
        edges: edge_idx
            .into_iter()
            .map(|i| flow.edges[i].clone())
            .collect(),
    }
}
