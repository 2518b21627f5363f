//! Sessionization, dwell-time computation and the analysis-table file.
//!
//! The analysis file is JSON Lines:
//!
//! ```text
//! {"format":"whose-analysis","version":1}
//! {"kind":"catalog","actions":[{"action_id":"view_record","labels":{"en":"View record"}}, ...]}
//! {"kind":"session","session_id":"s1","user_id":null,"start_ts":..,"end_ts":..,"duration_ms":..,"action_count":2}
//! {"kind":"action","session_id":"s1","source_row_id":0,"action_id":..,"timestamp":..,...}
//! {"kind":"action",...}
//! ```
//!
//! Timestamps are epoch milliseconds. Each session header is followed by exactly
//! `action_count` action records. Sessions appear in ascending `session_id` order.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::{ActionCatalog, ActionInstance, CatalogEntry};

pub const FORMAT_NAME: &str = "whose-analysis";
pub const FORMAT_VERSION: u32 = 1;

/// The ordered actions sharing one logged session id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    /// First non-empty user id among the session's rows.
    pub user_id: Option<String>,
    pub start_ts: i64,
    pub end_ts: i64,
    pub duration_ms: u64,
    pub action_count: u32,
    pub actions: Vec<ActionInstance>,
}

impl Session {
    pub fn logged_in(&self) -> bool {
        self.user_id.is_some()
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            session_id: self.session_id.clone(),
            user_id: self.user_id.clone(),
            logged_in: self.logged_in(),
            start_ts: self.start_ts,
            end_ts: self.end_ts,
            duration_ms: self.duration_ms,
            action_count: self.action_count,
        }
    }
}

fn action_order(a: &ActionInstance, b: &ActionInstance) -> std::cmp::Ordering {
    a.order_key().cmp(&b.order_key())
}

fn finish_session(mut actions: Vec<ActionInstance>) -> Session {
    for (i, action) in actions.iter_mut().enumerate() {
        action.step_index = i as u32 + 1;
    }
    for i in 0..actions.len() {
        actions[i].duration_ms = actions
            .get(i + 1)
            .map(|next| (next.timestamp - actions[i].timestamp) as u64);
    }
    let first = &actions[0];
    let last = &actions[actions.len() - 1];
    Session {
        session_id: first.session_id.clone(),
        user_id: actions.iter().find_map(|a| a.user_id.clone()),
        start_ts: first.timestamp,
        end_ts: last.timestamp,
        duration_ms: (last.timestamp - first.timestamp) as u64,
        action_count: actions.len() as u32,
        actions,
    }
}

/// Groups an analysis table into sessions, assigning step indices and durations.
///
/// The duration of action k is `timestamp(k+1) - timestamp(k)`; the last action of a session has
/// no duration. Input not already in canonical order is sorted first. Output is in ascending
/// `session_id` order.
pub fn build_sessions(mut table: Vec<ActionInstance>) -> Vec<Session> {
    if !table.is_sorted_by(|a, b| action_order(a, b).is_le()) {
        table.sort_by(action_order);
    }
    let mut sessions = Vec::new();
    let mut current: Vec<ActionInstance> = Vec::new();
    for action in table {
        if current
            .last()
            .is_some_and(|prev| prev.session_id != action.session_id)
        {
            sessions.push(finish_session(std::mem::take(&mut current)));
        }
        current.push(action);
    }
    if !current.is_empty() {
        sessions.push(finish_session(current));
    }
    sessions
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("unsupported_version: file has {format} v{version}, expected {FORMAT_NAME} v{FORMAT_VERSION}")]
    UnsupportedVersion { format: String, version: u64 },
    #[error("bad_format @ line {line}: {message}")]
    BadFormat { line: usize, message: String },
}

#[derive(Serialize, Deserialize)]
struct FileHeader {
    format: String,
    version: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Catalog {
        actions: Vec<CatalogEntry>,
    },
    Session {
        session_id: String,
        user_id: Option<String>,
        start_ts: i64,
        end_ts: i64,
        duration_ms: u64,
        action_count: u32,
    },
    Action(ActionInstance),
}

/// A catalog plus its sessions: the contents of one analysis file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Analysis {
    pub catalog: ActionCatalog,
    pub sessions: Vec<Session>,
}

fn write_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *out, value).map_err(io::Error::from)?;
    out.write_all(b"\n")
}

pub fn write_analysis<W: Write>(mut out: W, analysis: &Analysis) -> io::Result<()> {
    write_line(
        &mut out,
        &FileHeader {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION as u64,
        },
    )?;
    write_line(
        &mut out,
        &Record::Catalog {
            actions: analysis.catalog.entries.clone(),
        },
    )?;
    for s in &analysis.sessions {
        write_line(
            &mut out,
            &Record::Session {
                session_id: s.session_id.clone(),
                user_id: s.user_id.clone(),
                start_ts: s.start_ts,
                end_ts: s.end_ts,
                duration_ms: s.duration_ms,
                action_count: s.action_count,
            },
        )?;
        for a in &s.actions {
            write_line(&mut out, &ActionRef(a))?;
        }
    }
    out.flush()
}

/// Serializes an action as a `kind: action` record without cloning it.
struct ActionRef<'a>(&'a ActionInstance);

impl Serialize for ActionRef<'_> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Tagged<'a> {
            kind: &'static str,
            #[serde(flatten)]
            action: &'a ActionInstance,
        }
        Tagged {
            kind: "action",
            action: self.0,
        }
        .serialize(serializer)
    }
}

pub fn persist(analysis: &Analysis, path: &Path) -> Result<(), AnalysisError> {
    let io_err = |source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_analysis(BufWriter::new(file), analysis).map_err(io_err)
}

pub fn load(path: &Path) -> Result<Analysis, AnalysisError> {
    let file = File::open(path).map_err(|source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_analysis(BufReader::new(file)).map_err(|e| match e {
        AnalysisError::Io { source, .. } => AnalysisError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn read_analysis<R: BufRead>(reader: R) -> Result<Analysis, AnalysisError> {
    let bad = |line: usize, message: String| AnalysisError::BadFormat { line, message };
    let mut lines = reader.lines().enumerate();
    let header_line = match lines.next() {
        Some((_, line)) => line.map_err(|source| AnalysisError::Io {
            path: PathBuf::new(),
            source,
        })?,
        None => return Err(bad(1, "empty file".into())),
    };
    let header: FileHeader =
        serde_json::from_str(&header_line).map_err(|e| bad(1, format!("header: {e}")))?;
    if header.format != FORMAT_NAME || header.version != FORMAT_VERSION as u64 {
        return Err(AnalysisError::UnsupportedVersion {
            format: header.format,
            version: header.version,
        });
    }

    let mut analysis = Analysis::default();
    let mut pending: Option<(Session, u32)> = None;
    let mut saw_catalog = false;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|source| AnalysisError::Io {
            path: PathBuf::new(),
            source,
        })?;
        if line.is_empty() {
            continue;
        }
        let record: Record =
            serde_json::from_str(&line).map_err(|e| bad(line_no, e.to_string()))?;
        match record {
            Record::Catalog { actions } => {
                if saw_catalog || pending.is_some() || !analysis.sessions.is_empty() {
                    return Err(bad(line_no, "catalog must precede sessions".into()));
                }
                saw_catalog = true;
                analysis.catalog = ActionCatalog { entries: actions };
            }
            Record::Session {
                session_id,
                user_id,
                start_ts,
                end_ts,
                duration_ms,
                action_count,
            } => {
                if let Some((s, remaining)) = pending.take() {
                    if remaining > 0 {
                        return Err(bad(
                            line_no,
                            format!("session {} is missing {remaining} actions", s.session_id),
                        ));
                    }
                    analysis.sessions.push(s);
                }
                if action_count == 0 {
                    return Err(bad(line_no, format!("session {session_id} has no actions")));
                }
                pending = Some((
                    Session {
                        session_id,
                        user_id,
                        start_ts,
                        end_ts,
                        duration_ms,
                        action_count,
                        actions: Vec::with_capacity(action_count as usize),
                    },
                    action_count,
                ));
            }
            Record::Action(action) => match pending.as_mut() {
                Some((s, remaining)) if *remaining > 0 && action.session_id == s.session_id => {
                    s.actions.push(action);
                    *remaining -= 1;
                }
                _ => {
                    return Err(bad(
                        line_no,
                        "action record outside its session block".into(),
                    ))
                }
            },
        }
    }
    if let Some((s, remaining)) = pending {
        if remaining > 0 {
            return Err(bad(
                0,
                format!("session {} is missing {remaining} actions", s.session_id),
            ));
        }
        analysis.sessions.push(s);
    }
    Ok(analysis)
}

/// List entry for one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub user_id: Option<String>,
    pub logged_in: bool,
    pub start_ts: i64,
    pub end_ts: i64,
    pub duration_ms: u64,
    pub action_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPage {
    pub total: u64,
    pub offset: u64,
    pub limit: u64,
    pub sessions: Vec<SessionSummary>,
}

/// Orders sessions for display: newest start first, ties by session id.
pub fn display_order(a: &Session, b: &Session) -> std::cmp::Ordering {
    b.start_ts
        .cmp(&a.start_ts)
        .then_with(|| a.session_id.cmp(&b.session_id))
}

/// Immutable, loaded analysis table. Safe to share across threads.
#[derive(Debug, Clone, Default)]
pub struct AnalysisStore {
    catalog: ActionCatalog,
    /// In display order.
    sessions: Vec<Session>,
    by_id: HashMap<String, usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("session `{0}` not found")]
pub struct NotFound(pub String);

impl AnalysisStore {
    pub fn new(analysis: Analysis) -> AnalysisStore {
        let Analysis {
            catalog,
            mut sessions,
        } = analysis;
        sessions.sort_by(display_order);
        let by_id = sessions
            .iter()
            .enumerate()
            .map(|(i, s)| (s.session_id.clone(), i))
            .collect();
        AnalysisStore {
            catalog,
            sessions,
            by_id,
        }
    }

    pub fn open(path: &Path) -> Result<AnalysisStore, AnalysisError> {
        load(path).map(AnalysisStore::new)
    }

    pub fn catalog(&self) -> &ActionCatalog {
        &self.catalog
    }

    /// All sessions, newest first.
    pub fn sessions(&self) -> &[Session] {
        &self.sessions
    }

    pub fn get_session(&self, session_id: &str) -> Result<&Session, NotFound> {
        self.by_id
            .get(session_id)
            .map(|&i| &self.sessions[i])
            .ok_or_else(|| NotFound(session_id.to_string()))
    }

    pub fn list_sessions(&self, offset: u64, limit: u64) -> SessionPage {
        paginate(self.sessions.iter(), offset, limit)
    }

    pub fn labels(&self, action_id: &str) -> BTreeMap<String, String> {
        self.catalog.labels(action_id).cloned().unwrap_or_default()
    }
}

/// Pages through sessions already in display order.
pub fn paginate<'a>(
    sessions: impl ExactSizeIterator<Item = &'a Session>,
    offset: u64,
    limit: u64,
) -> SessionPage {
    let total = sessions.len() as u64;
    let page = sessions
        .skip(offset.min(total) as usize)
        .take(limit as usize)
        .map(Session::summary)
        .collect();
    SessionPage {
        total,
        offset,
        limit,
        sessions: page,
    }
}
