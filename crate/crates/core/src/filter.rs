//! Time restriction and the seven conjunctive session filters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{display_order, Session};

const DAY_MS: i64 = 86_400_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    All,
    #[serde(rename = "last_7_days")]
    Last7Days,
    #[serde(rename = "last_30_days")]
    Last30Days,
    Custom,
}

/// A time restriction on session start. All instants are epoch milliseconds.
///
/// `now` anchors the relative presets. It is never read from the clock here; callers inject it
/// (the JSON field may be omitted and supplied by the service or CLI instead).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeRange {
    #[serde(default)]
    pub preset: Preset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_ts: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_ts: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub now: Option<i64>,
}

/// Inclusive bounds; `None` is unbounded on that side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ResolvedRange {
    pub start: Option<i64>,
    pub end: Option<i64>,
}

impl ResolvedRange {
    pub const ALL: ResolvedRange = ResolvedRange {
        start: None,
        end: None,
    };

    pub fn contains(&self, ts: i64) -> bool {
        self.start.is_none_or(|s| ts >= s) && self.end.is_none_or(|e| ts <= e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field}: {message}")]
pub struct ValidationError {
    /// Dotted path of the offending field, e.g. `time_range.start_ts`.
    pub field: String,
    pub message: String,
}

impl ValidationError {
    fn new(field: &str, message: impl Into<String>) -> ValidationError {
        ValidationError {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Prefixes the field path, e.g. `filter` + `user_id` -> `filter.user_id`.
    pub fn within(mut self, parent: &str) -> ValidationError {
        self.field = format!("{parent}.{}", self.field);
        self
    }
}

impl TimeRange {
    pub fn all() -> TimeRange {
        TimeRange::default()
    }

    pub fn custom(start_ts: i64, end_ts: i64) -> TimeRange {
        TimeRange {
            preset: Preset::Custom,
            start_ts: Some(start_ts),
            end_ts: Some(end_ts),
            now: None,
        }
    }

    /// A preset anchored at `now`.
    pub fn preset(preset: Preset, now: i64) -> TimeRange {
        TimeRange {
            preset,
            start_ts: None,
            end_ts: None,
            now: Some(now),
        }
    }

    /// Resolves to concrete bounds. `fallback_now` is used when the range carries no `now`.
    pub fn resolve(&self, fallback_now: i64) -> Result<ResolvedRange, ValidationError> {
        let now = self.now.unwrap_or(fallback_now);
        let days_back = |days: i64| ResolvedRange {
            start: Some(now - days * DAY_MS),
            end: Some(now),
        };
        match self.preset {
            Preset::All => Ok(ResolvedRange::ALL),
            Preset::Last7Days => Ok(days_back(7)),
            Preset::Last30Days => Ok(days_back(30)),
            Preset::Custom => {
                let start = self
                    .start_ts
                    .ok_or_else(|| ValidationError::new("start_ts", "required for custom range"))?;
                let end = self
                    .end_ts
                    .ok_or_else(|| ValidationError::new("end_ts", "required for custom range"))?;
                if start > end {
                    return Err(ValidationError::new("start_ts", "start_ts is after end_ts"));
                }
                Ok(ResolvedRange {
                    start: Some(start),
                    end: Some(end),
                })
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationBounds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDurationClause {
    /// Restricts the clause to one action; any action when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_id: Option<String>,
    pub min_ms: u64,
}

/// Conjunction of optional session filters. Absent clauses do not constrain.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    /// Case-insensitive substring of any extracted entity value or raw action url.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_duration: Option<DurationBounds>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub logged_in_only: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_id: Option<String>,
    /// Strictly more than this many actions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_actions_exclusive: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains_action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_duration: Option<ActionDurationClause>,
}

impl FilterSpec {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if let Some(DurationBounds {
            min_ms: Some(min),
            max_ms: Some(max),
        }) = &self.session_duration
        {
            if min > max {
                return Err(ValidationError::new(
                    "session_duration.min_ms",
                    "min_ms is greater than max_ms",
                ));
            }
        }
        Ok(())
    }
}

/// True iff `session` starts inside `range` and satisfies every present clause of `spec`.
pub fn session_matches(session: &Session, spec: &FilterSpec, range: &ResolvedRange) -> bool {
    if !range.contains(session.start_ts) {
        return false;
    }
    if let Some(text) = &spec.contains_text {
        if !contains_text(session, text) {
            return false;
        }
    }
    if let Some(bounds) = &spec.session_duration {
        if bounds.min_ms.is_some_and(|min| session.duration_ms < min)
            || bounds.max_ms.is_some_and(|max| session.duration_ms > max)
        {
            return false;
        }
    }
    if spec.logged_in_only && !session.logged_in() {
        return false;
    }
    if let Some(user) = &spec.user_id {
        if session.user_id.as_deref() != Some(user.as_str()) {
            return false;
        }
    }
    if let Some(x) = spec.min_actions_exclusive {
        if session.action_count <= x {
            return false;
        }
    }
    if let Some(action_id) = &spec.contains_action {
        if !session.actions.iter().any(|a| &a.action_id == action_id) {
            return false;
        }
    }
    if let Some(clause) = &spec.action_duration {
        let dwelled = session.actions.iter().any(|a| {
            clause
                .action_id
                .as_ref()
                .is_none_or(|id| &a.action_id == id)
                && a.duration_ms.is_some_and(|d| d >= clause.min_ms)
        });
        if !dwelled {
            return false;
        }
    }
    true
}

fn contains_text(session: &Session, needle: &str) -> bool {
    let needle = needle.to_lowercase();
    session.actions.iter().any(|a| {
        a.url.to_lowercase().contains(&needle)
            || a.entities
                .values()
                .flatten()
                .any(|v| v.to_lowercase().contains(&needle))
    })
}

/// Matching sessions, newest start first (ties by session id).
pub fn apply<'a>(
    sessions: impl IntoIterator<Item = &'a Session>,
    spec: &FilterSpec,
    range: &ResolvedRange,
) -> Vec<&'a Session> {
    let mut out: Vec<&Session> = sessions
        .into_iter()
        .filter(|s| session_matches(s, spec, range))
        .collect();
    if !out.is_sorted_by(|a, b| display_order(a, b).is_le()) {
        out.sort_by(|a, b| display_order(a, b));
    }
    out
}
