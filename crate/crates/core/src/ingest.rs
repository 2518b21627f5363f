//! Raw log ingestion: schema mapping, record normalization and the append-only row store.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::FixedOffset;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{parse_timestamp, parse_zone, TimestampFormat};

/// One raw logged interaction in canonical form.
///
/// `timestamp` is UTC epoch milliseconds. `row_id` is assigned by the [`LogStore`] when the
/// row is appended; freshly parsed rows carry `0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRow {
    pub row_id: u64,
    pub session_id: String,
    pub user_id: Option<String>,
    pub timestamp: i64,
    pub resultlist_ids: Vec<String>,
    pub url: String,
    pub referrer_url: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Csv,
    Jsonl,
}

impl FromStr for LogFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(LogFormat::Csv),
            "jsonl" | "ndjson" => Ok(LogFormat::Jsonl),
            other => Err(format!(
                "unknown log format `{other}` (expected csv or jsonl)"
            )),
        }
    }
}

/// Where a LogRow field comes from in the source: a column/key name or a 0-based CSV position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl ColumnRef {
    fn parse(raw: &str) -> ColumnRef {
        match raw.strip_prefix('@').map(str::parse::<usize>) {
            Some(Ok(idx)) => ColumnRef::Index(idx),
            _ => ColumnRef::Name(raw.to_string()),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnRef::Name(name) => write!(f, "`{name}`"),
            ColumnRef::Index(idx) => write!(f, "@{idx}"),
        }
    }
}

/// Maps a log source onto the six [`LogRow`] fields.
///
/// Config files are `key = value` lines; `#` starts a comment. Recognized keys:
///
/// | key | default | meaning |
/// |-----|---------|---------|
/// | `session_id`, `timestamp`, `url` | field name | required source columns |
/// | `user_id`, `resultlist_ids`, `referrer_url` | field name | optional; `-` disables |
/// | `timestamp_format` | `iso8601` | `iso8601`, `epoch_seconds`, `epoch_millis` or a chrono pattern |
/// | `timezone` | `UTC` | zone for offset-less timestamps: `UTC` or `+HH:MM` |
/// | `list_delimiter` | `,` | separator inside `resultlist_ids` |
/// | `csv_delimiter` | `,` | CSV field separator (single byte) |
///
/// Column values are header names, or `@N` for the N-th (0-based) CSV column. Values may be
/// double-quoted; `\t` inside quotes is a tab.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaConfig {
    pub session_id: ColumnRef,
    pub user_id: Option<ColumnRef>,
    pub timestamp: ColumnRef,
    pub resultlist_ids: Option<ColumnRef>,
    pub url: ColumnRef,
    pub referrer_url: Option<ColumnRef>,
    pub timestamp_format: TimestampFormat,
    pub timezone: FixedOffset,
    pub list_delimiter: String,
    pub csv_delimiter: u8,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        SchemaConfig {
            session_id: ColumnRef::Name("session_id".into()),
            user_id: Some(ColumnRef::Name("user_id".into())),
            timestamp: ColumnRef::Name("timestamp".into()),
            resultlist_ids: Some(ColumnRef::Name("resultlist_ids".into())),
            url: ColumnRef::Name("url".into()),
            referrer_url: Some(ColumnRef::Name("referrer_url".into())),
            timestamp_format: TimestampFormat::Iso8601,
            timezone: FixedOffset::east_opt(0).expect("zero offset"),
            list_delimiter: ",".into(),
            csv_delimiter: b',',
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("schema line {line}: {message}")]
pub struct SchemaError {
    pub line: usize,
    pub message: String,
}

impl SchemaConfig {
    pub fn from_file(path: &Path) -> Result<SchemaConfig, IngestError> {
        let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(text.parse()?)
    }
}

impl FromStr for SchemaConfig {
    type Err = SchemaError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut schema = SchemaConfig::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |message: String| SchemaError {
                line: line_no,
                message,
            };
            let line = strip_comment(raw_line).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = unquote(value.trim());
            let optional = |v: &str| (v != "-" && !v.is_empty()).then(|| ColumnRef::parse(v));
            if matches!(key, "session_id" | "timestamp" | "url") && value.is_empty() {
                return Err(err(format!("{key} column must not be empty")));
            }
            match key {
                "session_id" => schema.session_id = ColumnRef::parse(&value),
                "timestamp" => schema.timestamp = ColumnRef::parse(&value),
                "url" => schema.url = ColumnRef::parse(&value),
                "user_id" => schema.user_id = optional(&value),
                "resultlist_ids" => schema.resultlist_ids = optional(&value),
                "referrer_url" => schema.referrer_url = optional(&value),
                "timestamp_format" => schema.timestamp_format = TimestampFormat::parse_name(&value),
                "timezone" => {
                    schema.timezone = parse_zone(&value)
                        .ok_or_else(|| err(format!("unsupported timezone `{value}`")))?
                }
                "list_delimiter" => {
                    if value.is_empty() {
                        return Err(err("list_delimiter must not be empty".into()));
                    }
                    schema.list_delimiter = value;
                }
                "csv_delimiter" => match value.as_bytes() {
                    [b] => schema.csv_delimiter = *b,
                    _ => return Err(err("csv_delimiter must be a single byte".into())),
                },
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        Ok(schema)
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(value: &str) -> String {
    match value.strip_prefix('"').and_then(|v| v.strip_suffix('"')) {
        Some(inner) => inner.replace("\\t", "\t"),
        None => value.to_string(),
    }
}

/// Machine-readable reason a record was not stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    MissingSessionId,
    BadTimestamp,
    WrongArity,
    /// JSON Lines only: the line is not a JSON object, or a field has an unusable type.
    MalformedRecord,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::MissingSessionId => "missing_session_id",
            RejectReason::BadTimestamp => "bad_timestamp",
            RejectReason::WrongArity => "wrong_arity",
            RejectReason::MalformedRecord => "malformed_record",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    /// `line N` of the source file (1-based, header included).
    pub locator: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub accepted_count: u64,
    pub rejected_count: u64,
    pub rejections: Vec<Rejection>,
}

impl IngestReport {
    pub fn total(&self) -> u64 {
        self.accepted_count + self.rejected_count
    }

    fn reject(&mut self, line: u64, reason: RejectReason) {
        self.rejected_count += 1;
        self.rejections.push(Rejection {
            locator: format!("line {line}"),
            reason,
        });
    }
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "accepted {}", self.accepted_count)?;
        writeln!(f, "rejected {}", self.rejected_count)?;
        for r in &self.rejections {
            writeln!(f, "rejection {}: {}", r.locator, r.reason)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("log header: {0}")]
    Header(String),
    #[error("malformed csv")]
    Csv(#[from] csv::Error),
    #[error("store {}: {message}", path.display())]
    Store { path: PathBuf, message: String },
}

/// Field values pulled out of one source record before normalization.
struct RawFields<'a> {
    session_id: Option<&'a str>,
    user_id: Option<&'a str>,
    timestamp: Option<&'a str>,
    resultlist_ids: Vec<&'a str>,
    url: Option<&'a str>,
    referrer_url: Option<&'a str>,
}

fn normalize(raw: RawFields<'_>, schema: &SchemaConfig) -> Result<LogRow, RejectReason> {
    let session_id = raw.session_id.map(str::trim).unwrap_or_default();
    if session_id.is_empty() {
        return Err(RejectReason::MissingSessionId);
    }
    let timestamp = raw
        .timestamp
        .and_then(|t| parse_timestamp(t, &schema.timestamp_format, schema.timezone))
        .ok_or(RejectReason::BadTimestamp)?;
    let user_id = raw
        .user_id
        .map(str::trim)
        .filter(|u| !u.is_empty())
        .map(str::to_string);
    let resultlist_ids = raw
        .resultlist_ids
        .into_iter()
        .map(str::trim)
        .filter(|id| !id.is_empty())
        .map(str::to_string)
        .collect();
    Ok(LogRow {
        row_id: 0,
        session_id: session_id.to_string(),
        user_id,
        timestamp,
        resultlist_ids,
        url: raw.url.unwrap_or_default().to_string(),
        referrer_url: raw.referrer_url.unwrap_or_default().to_string(),
    })
}

/// Column positions resolved against a CSV header.
#[derive(Debug, Clone)]
pub struct CsvLayout {
    width: usize,
    session_id: usize,
    user_id: Option<usize>,
    timestamp: usize,
    resultlist_ids: Option<usize>,
    url: usize,
    referrer_url: Option<usize>,
}

impl CsvLayout {
    pub fn resolve<'a>(
        schema: &SchemaConfig,
        header: impl IntoIterator<Item = &'a str>,
    ) -> Result<CsvLayout, IngestError> {
        let header: Vec<&str> = header.into_iter().map(str::trim).collect();
        let find = |col: &ColumnRef| -> Result<usize, IngestError> {
            match col {
                ColumnRef::Index(idx) if *idx < header.len() => Ok(*idx),
                ColumnRef::Name(name) => header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| IngestError::Header(format!("no column {col} in header"))),
                ColumnRef::Index(_) => Err(IngestError::Header(format!(
                    "column {col} beyond header width {}",
                    header.len()
                ))),
            }
        };
        let find_opt = |col: &Option<ColumnRef>| col.as_ref().map(find).transpose();
        Ok(CsvLayout {
            width: header.len(),
            session_id: find(&schema.session_id)?,
            user_id: find_opt(&schema.user_id)?,
            timestamp: find(&schema.timestamp)?,
            resultlist_ids: find_opt(&schema.resultlist_ids)?,
            url: find(&schema.url)?,
            referrer_url: find_opt(&schema.referrer_url)?,
        })
    }
}

/// Normalizes one CSV record (already split into fields) into a [`LogRow`].
pub fn parse_csv_record(
    fields: &[&str],
    layout: &CsvLayout,
    schema: &SchemaConfig,
) -> Result<LogRow, RejectReason> {
    if fields.len() != layout.width {
        return Err(RejectReason::WrongArity);
    }
    let get = |idx: usize| fields.get(idx).copied();
    let list = layout
        .resultlist_ids
        .and_then(get)
        .map(|s| s.split(schema.list_delimiter.as_str()).collect())
        .unwrap_or_default();
    normalize(
        RawFields {
            session_id: get(layout.session_id),
            user_id: layout.user_id.and_then(get),
            timestamp: get(layout.timestamp),
            resultlist_ids: list,
            url: get(layout.url),
            referrer_url: layout.referrer_url.and_then(get),
        },
        schema,
    )
}

/// Normalizes one JSON Lines record into a [`LogRow`].
///
/// String fields may also be numbers; `resultlist_ids` may be an array or a delimited string;
/// `null` and missing keys read as empty.
pub fn parse_json_record(line: &str, schema: &SchemaConfig) -> Result<LogRow, RejectReason> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|_| RejectReason::MalformedRecord)?;
    let obj = value.as_object().ok_or(RejectReason::MalformedRecord)?;

    let mut owned: HashMap<&'static str, String> = HashMap::new();
    let mut scalar = |key: &'static str, col: Option<&ColumnRef>| -> Result<(), RejectReason> {
        let Some(col) = col else { return Ok(()) };
        let ColumnRef::Name(name) = col else {
            return Err(RejectReason::MalformedRecord);
        };
        match obj.get(name) {
            None | Some(serde_json::Value::Null) => {}
            Some(serde_json::Value::String(s)) => {
                owned.insert(key, s.clone());
            }
            Some(serde_json::Value::Number(n)) => {
                owned.insert(key, n.to_string());
            }
            Some(_) => return Err(RejectReason::MalformedRecord),
        }
        Ok(())
    };
    scalar("session_id", Some(&schema.session_id))?;
    scalar("user_id", schema.user_id.as_ref())?;
    scalar("timestamp", Some(&schema.timestamp))?;
    scalar("url", Some(&schema.url))?;
    scalar("referrer_url", schema.referrer_url.as_ref())?;

    let mut list_items: Vec<String> = Vec::new();
    if let Some(ColumnRef::Name(name)) = &schema.resultlist_ids {
        match obj.get(name) {
            None | Some(serde_json::Value::Null) => {}
            Some(serde_json::Value::String(s)) => {
                list_items.extend(s.split(schema.list_delimiter.as_str()).map(str::to_string))
            }
            Some(serde_json::Value::Array(items)) => {
                for item in items {
                    match item {
                        serde_json::Value::String(s) => list_items.push(s.clone()),
                        serde_json::Value::Number(n) => list_items.push(n.to_string()),
                        _ => return Err(RejectReason::MalformedRecord),
                    }
                }
            }
            Some(_) => return Err(RejectReason::MalformedRecord),
        }
    }

    let get = |key: &str| owned.get(key).map(String::as_str);
    normalize(
        RawFields {
            session_id: get("session_id"),
            user_id: get("user_id"),
            timestamp: get("timestamp"),
            resultlist_ids: list_items.iter().map(String::as_str).collect(),
            url: get("url"),
            referrer_url: get("referrer_url"),
        },
        schema,
    )
}

/// Reads and normalizes a whole log source, calling `sink` for each accepted row in input order.
pub fn read_log<R: Read>(
    reader: R,
    format: LogFormat,
    schema: &SchemaConfig,
    mut sink: impl FnMut(LogRow) -> Result<(), IngestError>,
) -> Result<IngestReport, IngestError> {
    let mut report = IngestReport::default();
    match format {
        LogFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .delimiter(schema.csv_delimiter)
                .has_headers(true)
                .flexible(true)
                .from_reader(reader);
            let layout = CsvLayout::resolve(schema, rdr.headers()?.iter())?;
            let mut record = csv::StringRecord::new();
            loop {
                match rdr.read_record(&mut record) {
                    Ok(false) => break,
                    Ok(true) => {
                        let line = record.position().map_or(0, |p| p.line());
                        let fields: Vec<&str> = record.iter().collect();
                        match parse_csv_record(&fields, &layout, schema) {
                            Ok(row) => {
                                report.accepted_count += 1;
                                sink(row)?;
                            }
                            Err(reason) => report.reject(line, reason),
                        }
                    }
                    // Invalid UTF-8 inside one record; the reader resumes at the next record.
                    Err(err) if matches!(err.kind(), csv::ErrorKind::Utf8 { .. }) => {
                        let line = err.position().map_or(0, |p| p.line());
                        report.reject(line, RejectReason::WrongArity);
                    }
                    Err(err) => return Err(err.into()),
                }
            }
        }
        LogFormat::Jsonl => {
            for (idx, line) in BufReader::new(reader).lines().enumerate() {
                let line_no = idx as u64 + 1;
                let line = match line {
                    Ok(line) => line,
                    Err(err) if err.kind() == io::ErrorKind::InvalidData => {
                        report.reject(line_no, RejectReason::MalformedRecord);
                        continue;
                    }
                    Err(source) => {
                        return Err(IngestError::Io {
                            path: PathBuf::from("<log>"),
                            source,
                        })
                    }
                };
                if line.trim().is_empty() {
                    continue;
                }
                match parse_json_record(&line, schema) {
                    Ok(row) => {
                        report.accepted_count += 1;
                        sink(row)?;
                    }
                    Err(reason) => report.reject(line_no, reason),
                }
            }
        }
    }
    Ok(report)
}

/// Ingests `path` into `store`, appending every accepted row with a fresh row id.
///
/// Re-ingesting the same file appends its rows again; there is no deduplication.
pub fn ingest_file(
    path: &Path,
    format: LogFormat,
    schema: &SchemaConfig,
    store: &mut LogStore,
) -> Result<IngestReport, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut writer = store.writer()?;
    let report = read_log(BufReader::new(file), format, schema, |row| writer.push(row))?;
    writer.commit()?;
    Ok(report)
}

const ROWS_FILE: &str = "rows.jsonl";
const META_FILE: &str = "store.json";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Serialize, Deserialize)]
struct StoreMeta {
    format: String,
    version: u32,
    next_row_id: u64,
}

/// Append-only row store: a directory holding `rows.jsonl` (one [`LogRow`] per line) and
/// `store.json` (next row id).
///
/// Opening a store for writing takes a `.lock` file in the directory; it is released on drop.
#[derive(Debug)]
pub struct LogStore {
    dir: PathBuf,
    next_row_id: u64,
}

impl LogStore {
    pub fn open(dir: &Path) -> Result<LogStore, IngestError> {
        let io_err = |source| IngestError::Io {
            path: dir.to_path_buf(),
            source,
        };
        fs::create_dir_all(dir).map_err(io_err)?;
        match OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(dir.join(LOCK_FILE))
        {
            Ok(_) => {}
            Err(err) if err.kind() == io::ErrorKind::AlreadyExists => {
                return Err(IngestError::Store {
                    path: dir.to_path_buf(),
                    message: "store is locked by another writer (remove .lock if stale)".into(),
                })
            }
            Err(err) => return Err(io_err(err)),
        }
        let next_row_id = match read_meta(dir) {
            Ok(meta) => meta.next_row_id,
            Err(err) => {
                let _ = fs::remove_file(dir.join(LOCK_FILE));
                return Err(err);
            }
        };
        Ok(LogStore {
            dir: dir.to_path_buf(),
            next_row_id,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Number of rows ever appended; also the next row id.
    pub fn len(&self) -> u64 {
        self.next_row_id
    }

    pub fn is_empty(&self) -> bool {
        self.next_row_id == 0
    }

    pub fn append(&mut self, rows: impl IntoIterator<Item = LogRow>) -> Result<u64, IngestError> {
        let mut writer = self.writer()?;
        let mut n = 0;
        for row in rows {
            writer.push(row)?;
            n += 1;
        }
        writer.commit()?;
        Ok(n)
    }

    fn writer(&mut self) -> Result<RowWriter<'_>, IngestError> {
        let path = self.dir.join(ROWS_FILE);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| IngestError::Io { path, source })?;
        let next = self.next_row_id;
        Ok(RowWriter {
            store: self,
            out: BufWriter::new(file),
            next,
        })
    }

    pub fn rows(&self) -> Result<Vec<LogRow>, IngestError> {
        read_rows(&self.dir)
    }
}

impl Drop for LogStore {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.dir.join(LOCK_FILE));
    }
}

struct RowWriter<'a> {
    store: &'a mut LogStore,
    out: BufWriter<File>,
    next: u64,
}

impl RowWriter<'_> {
    fn push(&mut self, mut row: LogRow) -> Result<(), IngestError> {
        row.row_id = self.next;
        self.next += 1;
        serde_json::to_writer(&mut self.out, &row)
            .map_err(io::Error::from)
            .and_then(|_| self.out.write_all(b"\n"))
            .map_err(|source| IngestError::Io {
                path: self.store.dir.join(ROWS_FILE),
                source,
            })
    }

    fn commit(mut self) -> Result<(), IngestError> {
        let dir = self.store.dir.clone();
        self.out.flush().map_err(|source| IngestError::Io {
            path: dir.join(ROWS_FILE),
            source,
        })?;
        let meta = StoreMeta {
            format: "whose-log-store".into(),
            version: 1,
            next_row_id: self.next,
        };
        let tmp = dir.join("store.json.tmp");
        fs::write(&tmp, serde_json::to_vec(&meta).expect("meta serializes"))
            .and_then(|_| fs::rename(&tmp, dir.join(META_FILE)))
            .map_err(|source| IngestError::Io { path: tmp, source })?;
        self.store.next_row_id = self.next;
        Ok(())
    }
}

fn read_meta(dir: &Path) -> Result<StoreMeta, IngestError> {
    let path = dir.join(META_FILE);
    match fs::read(&path) {
        Ok(bytes) => {
            let meta: StoreMeta =
                serde_json::from_slice(&bytes).map_err(|e| IngestError::Store {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
            if meta.format != "whose-log-store" || meta.version != 1 {
                return Err(IngestError::Store {
                    path,
                    message: format!("unsupported store {} v{}", meta.format, meta.version),
                });
            }
            Ok(meta)
        }
        Err(err) if err.kind() == io::ErrorKind::NotFound => Ok(StoreMeta {
            format: "whose-log-store".into(),
            version: 1,
            next_row_id: 0,
        }),
        Err(source) => Err(IngestError::Io { path, source }),
    }
}

/// Reads every committed row of the store in `dir`, in row-id order.
///
/// Readers do not take the write lock; rows appended after the last commit are ignored.
pub fn read_rows(dir: &Path) -> Result<Vec<LogRow>, IngestError> {
    let meta = read_meta(dir)?;
    if !dir.exists() {
        return Err(IngestError::Io {
            path: dir.to_path_buf(),
            source: io::Error::new(io::ErrorKind::NotFound, "store directory not found"),
        });
    }
    let path = dir.join(ROWS_FILE);
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(err) if err.kind() == io::ErrorKind::NotFound && meta.next_row_id == 0 => {
            return Ok(Vec::new())
        }
        Err(source) => return Err(IngestError::Io { path, source }),
    };
    let mut rows = Vec::with_capacity(meta.next_row_id as usize);
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| IngestError::Io {
            path: path.clone(),
            source,
        })?;
        if line.is_empty() {
            continue;
        }
        let row: LogRow = serde_json::from_str(&line).map_err(|e| IngestError::Store {
            path: path.clone(),
            message: format!("row {}: {e}", rows.len()),
        })?;
        if row.row_id >= meta.next_row_id {
            break;
        }
        rows.push(row);
    }
    Ok(rows)
}
