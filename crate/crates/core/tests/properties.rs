//! Property tests for sessionization, persistence, filtering and flow aggregation.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use whose_core::filter::{
    apply, session_matches, ActionDurationClause, DurationBounds, FilterSpec, ResolvedRange,
};
use whose_core::flow::{aggregate, highlight_paths, FlowGraph};
use whose_core::mapping::{ActionCatalog, ActionInstance};
use whose_core::session::{
    build_sessions, read_analysis, write_analysis, Analysis, AnalysisStore, Session,
};

const ACTIONS: &[&str] = &[
    "view_record",
    "simple_search",
    "home",
    "view_abstract",
    "export",
];

/// (session index, gap ms, action index, actions emitted by the row, has user)
fn table_strategy(max_rows: usize) -> impl Strategy<Value = Vec<ActionInstance>> {
    prop::collection::vec(
        (
            0usize..40,
            0i64..120_000,
            0usize..ACTIONS.len(),
            1usize..3,
            any::<bool>(),
        ),
        1..max_rows,
    )
    .prop_map(|rows| {
        let mut clock: BTreeMap<usize, i64> = BTreeMap::new();
        let mut table = Vec::new();
        for (row_id, (session, gap, action, fanout, user)) in rows.into_iter().enumerate() {
            let ts = clock
                .entry(session)
                .or_insert(1_400_000_000_000 + session as i64 * 3_600_000);
            *ts += gap;
            for k in 0..fanout {
                let action_id = ACTIONS[(action + k) % ACTIONS.len()];
                table.push(ActionInstance {
                    session_id: format!("s{session:02}"),
                    source_row_id: row_id as u64,
                    action_id: action_id.into(),
                    timestamp: *ts,
                    intra_row_index: k as u32,
                    step_index: 0,
                    duration_ms: None,
                    entities: if action_id == "simple_search" {
                        BTreeMap::from([("search_term".into(), vec![format!("term{}", gap % 7)])])
                    } else {
                        BTreeMap::new()
                    },
                    user_id: user.then(|| format!("u{}", session % 5)),
                    url: format!("/{action_id}/{row_id}"),
                });
            }
        }
        table
    })
}

fn sessions_strategy() -> impl Strategy<Value = Vec<Session>> {
    table_strategy(300).prop_map(build_sessions)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn duration_identity(table in table_strategy(400)) {
        let total = table.len();
        let sessions = build_sessions(table);
        prop_assert_eq!(sessions.iter().map(|s| s.action_count as usize).sum::<usize>(), total);
        let ids: BTreeSet<_> = sessions.iter().map(|s| &s.session_id).collect();
        prop_assert_eq!(ids.len(), sessions.len());
        for s in &sessions {
            let sum: u64 = s.actions.iter().filter_map(|a| a.duration_ms).sum();
            prop_assert_eq!(sum, s.duration_ms);
            prop_assert_eq!(s.duration_ms as i64, s.end_ts - s.start_ts);
            prop_assert_eq!(s.actions.last().unwrap().duration_ms, None);
            prop_assert!(s.actions[..s.actions.len() - 1].iter().all(|a| a.duration_ms.is_some()));
            prop_assert_eq!(s.action_count as usize, s.actions.len());
            for (i, a) in s.actions.iter().enumerate() {
                prop_assert_eq!(a.step_index as usize, i + 1);
            }
        }
    }

    #[test]
    fn persistence_round_trips(sessions in sessions_strategy()) {
        let analysis = Analysis { catalog: ActionCatalog::default(), sessions };
        let mut buf = Vec::new();
        write_analysis(&mut buf, &analysis).unwrap();
        prop_assert_eq!(read_analysis(&buf[..]).unwrap(), analysis);
    }

    #[test]
    fn flow_conservation(sessions in sessions_strategy(), max_steps in 1u32..12) {
        let flow = aggregate(&sessions, max_steps).unwrap();
        check_flow_invariants(&flow, &sessions)?;
    }

    #[test]
    fn flow_is_order_insensitive(sessions in sessions_strategy(), seed in any::<u64>()) {
        let mut shuffled: Vec<&Session> = sessions.iter().collect();
        // deterministic permutation from the seed
        shuffled.sort_by_key(|s| (seed ^ fxhash(&s.session_id)).rotate_left(7));
        prop_assert_eq!(aggregate(&sessions, 8).unwrap(), aggregate(shuffled, 8).unwrap());
    }

    #[test]
    fn highlight_is_a_subgraph(sessions in sessions_strategy(), pick in 0usize..ACTIONS.len()) {
        let flow = aggregate(&sessions, 8).unwrap();
        let sub = highlight_paths(&flow, ACTIONS[pick]);
        for n in &sub.nodes {
            prop_assert!(flow.nodes.contains(n));
        }
        for e in &sub.edges {
            prop_assert!(flow.edges.contains(e));
            prop_assert!(sub.nodes.iter().any(|n| n.step == e.step && n.action_id == e.from_action_id));
            prop_assert!(sub.nodes.iter().any(|n| n.step == e.step + 1 && n.action_id == e.to_action_id));
        }
    }

    #[test]
    fn conjunction_and_monotonicity(sessions in sessions_strategy(), a in spec_strategy(), b in spec_strategy()) {
        let range = ResolvedRange::ALL;
        let both = merge(&a, &b);
        prop_assume!(both.is_some());
        let both = both.unwrap();
        let ids = |spec: &FilterSpec| -> BTreeSet<String> {
            apply(&sessions, spec, &range).into_iter().map(|s| s.session_id.clone()).collect()
        };
        let (ia, ib, iab) = (ids(&a), ids(&b), ids(&both));
        prop_assert_eq!(&iab, &ia.intersection(&ib).cloned().collect());
        prop_assert!(iab.is_subset(&ia));
        // full-scan equivalence
        let naive: BTreeSet<String> = sessions
            .iter()
            .filter(|s| session_matches(s, &both, &range))
            .map(|s| s.session_id.clone())
            .collect();
        prop_assert_eq!(iab, naive);
    }

    #[test]
    fn pagination_partitions_results(sessions in sessions_strategy(), limit in 1u64..7) {
        let store = AnalysisStore::new(Analysis { catalog: ActionCatalog::default(), sessions });
        let total = store.sessions().len() as u64;
        let mut seen = Vec::new();
        let mut offset = 0;
        while offset < total + limit {
            let page = store.list_sessions(offset, limit);
            prop_assert_eq!(page.total, total);
            seen.extend(page.sessions.into_iter().map(|s| s.session_id));
            offset += limit;
        }
        let all: Vec<String> = store.sessions().iter().map(|s| s.session_id.clone()).collect();
        prop_assert_eq!(seen, all);
        prop_assert!(store.sessions().windows(2).all(|w| w[0].start_ts >= w[1].start_ts));
    }
}

fn fxhash(s: &str) -> u64 {
    s.bytes().fold(0xcbf29ce484222325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100000001b3)
    })
}

/// One random clause per spec so that two specs can always be merged.
fn spec_strategy() -> impl Strategy<Value = FilterSpec> {
    prop_oneof![
        Just(FilterSpec::default()),
        (0usize..7).prop_map(|t| FilterSpec {
            contains_text: Some(format!("TERM{t}")),
            ..FilterSpec::default()
        }),
        (0u64..200_000, 0u64..400_000).prop_map(|(lo, span)| FilterSpec {
            session_duration: Some(DurationBounds {
                min_ms: Some(lo),
                max_ms: Some(lo + span)
            }),
            ..FilterSpec::default()
        }),
        Just(FilterSpec {
            logged_in_only: true,
            ..FilterSpec::default()
        }),
        (0usize..5).prop_map(|u| FilterSpec {
            user_id: Some(format!("u{u}")),
            ..FilterSpec::default()
        }),
        (0u32..8).prop_map(|x| FilterSpec {
            min_actions_exclusive: Some(x),
            ..FilterSpec::default()
        }),
        (0usize..ACTIONS.len()).prop_map(|i| FilterSpec {
            contains_action: Some(ACTIONS[i].into()),
            ..FilterSpec::default()
        }),
        (proptest::option::of(0usize..ACTIONS.len()), 0u64..100_000).prop_map(|(i, min_ms)| {
            FilterSpec {
                action_duration: Some(ActionDurationClause {
                    action_id: i.map(|i| ACTIONS[i].into()),
                    min_ms,
                }),
                ..FilterSpec::default()
            }
        }),
    ]
}

/// Conjunction of two specs; `None` when both set the same clause.
fn merge(a: &FilterSpec, b: &FilterSpec) -> Option<FilterSpec> {
    let mut out = a.clone();
    macro_rules! take {
        ($field:ident) => {
            match (&out.$field, &b.$field) {
                (Some(_), Some(_)) => return None,
                (None, Some(v)) => out.$field = Some(v.clone()),
                _ => {}
            }
        };
    }
    take!(contains_text);
    take!(session_duration);
    take!(user_id);
    take!(min_actions_exclusive);
    take!(contains_action);
    take!(action_duration);
    out.logged_in_only |= b.logged_in_only;
    Some(out)
}

fn check_flow_invariants(flow: &FlowGraph, sessions: &[Session]) -> Result<(), TestCaseError> {
    prop_assert_eq!(flow.session_total, sessions.len() as u64);
    let step1: u64 = flow
        .nodes
        .iter()
        .filter(|n| n.step == 1)
        .map(|n| n.count)
        .sum();
    prop_assert_eq!(step1, flow.session_total);
    for n in &flow.nodes {
        prop_assert!(n.count > 0);
        let out: u64 = flow
            .edges
            .iter()
            .filter(|e| e.step == n.step && e.from_action_id == n.action_id)
            .map(|e| e.count)
            .sum();
        if n.step < flow.max_steps {
            prop_assert_eq!(n.count, out + n.ended);
        } else {
            prop_assert_eq!(out, 0);
        }
        if n.step >= 2 {
            let inflow: u64 = flow
                .edges
                .iter()
                .filter(|e| e.step + 1 == n.step && e.to_action_id == n.action_id)
                .map(|e| e.count)
                .sum();
            prop_assert_eq!(n.count, inflow);
        }
    }
    for step in 1..=flow.max_steps {
        let alive = sessions
            .iter()
            .filter(|s| s.actions.len() >= step as usize)
            .count() as u64;
        let at_step: u64 = flow
            .nodes
            .iter()
            .filter(|n| n.step == step)
            .map(|n| n.count)
            .sum();
        prop_assert_eq!(at_step, alive);
        let ending = sessions
            .iter()
            .filter(|s| s.actions.len() == step as usize)
            .count() as u64;
        prop_assert_eq!(flow.endings.get(&step).copied().unwrap_or(0), ending);
    }
    let mut weights: BTreeMap<&str, u64> = BTreeMap::new();
    for n in flow.nodes.iter() {
        *weights.entry(n.action_id.as_str()).or_default() += if n.step <= 8 { n.count } else { 0 };
    }
    let mut expected: Vec<(&str, u64)> = weights.into_iter().collect();
    expected.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let expected: Vec<String> = expected.into_iter().map(|(a, _)| a.to_string()).collect();
    prop_assert_eq!(&flow.action_order, &expected);
    Ok(())
}
