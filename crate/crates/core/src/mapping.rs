//! Rule tables that turn raw log rows into typed user actions, and the parallel preprocessor
//! that applies them to a whole store.
//!
//! Patterns use the Rust `regex` dialect (RE2-like: no look-around or backreferences) and
//! match anywhere in the subject unless anchored with `^` / `$`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use percent_encoding::percent_decode_str;
use rayon::prelude::*;
use regex::{Regex, RegexSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::LogRow;

/// Action id emitted for rows no mapping rule recognizes.
pub const UNMATCHED: &str = "__unmatched__";

/// Matches every action in an extraction rule.
pub const WILDCARD: &str = "*";

pub const MAPPING_HEADER: [&str; 6] = [
    "rule_order",
    "action_id",
    "label_en",
    "label_de",
    "referrer_param",
    "url_param",
];

pub const EXTRACTION_HEADER: [&str; 5] = ["action_id", "entity_name", "kind", "source", "pattern"];

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed csv")]
    Csv(#[from] csv::Error),
    #[error("missing_column `{0}`")]
    MissingColumn(String),
    #[error("bad_header: expected `{expected}`")]
    BadHeader { expected: String },
    #[error("{code} @ row {row}: {detail}")]
    Row {
        code: &'static str,
        row: usize,
        detail: String,
    },
}

impl RuleError {
    fn row(code: &'static str, row: usize, detail: impl Into<String>) -> RuleError {
        RuleError::Row {
            code,
            row,
            detail: detail.into(),
        }
    }

    /// Machine-readable error code, e.g. `bad_pattern`.
    pub fn code(&self) -> &'static str {
        match self {
            RuleError::Io { .. } => "io",
            RuleError::Csv(_) => "csv",
            RuleError::MissingColumn(_) => "missing_column",
            RuleError::BadHeader { .. } => "bad_header",
            RuleError::Row { code, .. } => code,
        }
    }
}

/// One row of the mapping table.
#[derive(Debug, Clone)]
pub struct MappingRule {
    pub rule_order: u32,
    pub action_id: String,
    /// Language code -> display label; never empty.
    pub labels: BTreeMap<String, String>,
    pub url_pattern: Regex,
    pub referrer_pattern: Option<Regex>,
}

/// A compiled mapping table, sorted by `rule_order`.
#[derive(Debug, Clone)]
pub struct MappingRules {
    rules: Vec<MappingRule>,
    url_set: RegexSet,
}

impl MappingRules {
    pub fn new(mut rules: Vec<MappingRule>) -> Result<MappingRules, RuleError> {
        rules.sort_by_key(|r| r.rule_order);
        if let Some(w) = rules
            .windows(2)
            .find(|w| w[0].rule_order == w[1].rule_order)
        {
            return Err(RuleError::row(
                "duplicate_rule_order",
                0,
                format!("rule_order {} used twice", w[1].rule_order),
            ));
        }
        let url_set = RegexSet::new(rules.iter().map(|r| r.url_pattern.as_str()))
            .map_err(|e| RuleError::row("bad_pattern", 0, e.to_string()))?;
        Ok(MappingRules { rules, url_set })
    }

    pub fn rules(&self) -> &[MappingRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Indices (into [`rules`](Self::rules)) of every rule matching `row`, ascending.
    pub fn matching_rules(&self, row: &LogRow) -> Vec<usize> {
        self.url_set
            .matches(&row.url)
            .into_iter()
            .filter(|&i| {
                self.rules[i]
                    .referrer_pattern
                    .as_ref()
                    .is_none_or(|re| re.is_match(&row.referrer_url))
            })
            .collect()
    }

    /// Distinct actions in rule order, followed by [`UNMATCHED`].
    pub fn catalog(&self) -> ActionCatalog {
        let mut entries: Vec<CatalogEntry> = Vec::new();
        for rule in &self.rules {
            match entries.iter_mut().find(|e| e.action_id == rule.action_id) {
                Some(entry) => {
                    for (lang, label) in &rule.labels {
                        entry
                            .labels
                            .entry(lang.clone())
                            .or_insert_with(|| label.clone());
                    }
                }
                None => entries.push(CatalogEntry {
                    action_id: rule.action_id.clone(),
                    labels: rule.labels.clone(),
                }),
            }
        }
        entries.push(CatalogEntry {
            action_id: UNMATCHED.into(),
            labels: BTreeMap::from([
                ("de".to_string(), "Nicht zugeordnet".to_string()),
                ("en".to_string(), "Unmatched request".to_string()),
            ]),
        });
        ActionCatalog { entries }
    }
}

/// Actions known to an analysis, with their display labels.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCatalog {
    pub entries: Vec<CatalogEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub action_id: String,
    pub labels: BTreeMap<String, String>,
}

impl ActionCatalog {
    pub fn labels(&self, action_id: &str) -> Option<&BTreeMap<String, String>> {
        self.entries
            .iter()
            .find(|e| e.action_id == action_id)
            .map(|e| &e.labels)
    }
}

fn open(path: &Path) -> Result<File, RuleError> {
    File::open(path).map_err(|source| RuleError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), RuleError> {
    let found: Vec<&str> = found.iter().map(str::trim).collect();
    if let Some(missing) = expected.iter().find(|c| !found.contains(c)) {
        return Err(RuleError::MissingColumn(missing.to_string()));
    }
    if found != expected {
        return Err(RuleError::BadHeader {
            expected: expected.join(","),
        });
    }
    Ok(())
}

fn compile(pattern: &str, row: usize) -> Result<Regex, RuleError> {
    Regex::new(pattern).map_err(|e| {
        let detail = e
            .to_string()
            .lines()
            .last()
            .unwrap_or_default()
            .trim()
            .to_string();
        RuleError::row("bad_pattern", row, format!("`{pattern}`: {detail}"))
    })
}

fn rule_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader)
}

pub fn load_mapping_table(path: &Path) -> Result<MappingRules, RuleError> {
    parse_mapping_table(open(path)?)
}

/// Parses a mapping table. Loading is all-or-nothing: the first bad row fails the whole table.
///
/// An empty `rule_order` cell defaults to the row's position in the file (0-based).
pub fn parse_mapping_table<R: Read>(reader: R) -> Result<MappingRules, RuleError> {
    let mut rdr = rule_reader(reader);
    check_header(rdr.headers()?, &MAPPING_HEADER)?;
    let mut rules = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record?;
        let cell = |i: usize| record.get(i).unwrap_or_default().trim();
        let rule_order = match cell(0) {
            "" => idx as u32,
            raw => raw
                .parse::<u32>()
                .map_err(|_| RuleError::row("bad_rule_order", row, format!("`{raw}`")))?,
        };
        let action_id = cell(1);
        if action_id.is_empty() {
            return Err(RuleError::row("empty_action_id", row, "action_id is empty"));
        }
        if action_id == UNMATCHED || action_id == WILDCARD {
            return Err(RuleError::row(
                "reserved_action_id",
                row,
                format!("`{action_id}` is reserved"),
            ));
        }
        let mut labels = BTreeMap::new();
        for (lang, col) in [("en", 2), ("de", 3)] {
            if !cell(col).is_empty() {
                labels.insert(lang.to_string(), cell(col).to_string());
            }
        }
        if labels.is_empty() {
            return Err(RuleError::row(
                "missing_label",
                row,
                "no label_en or label_de",
            ));
        }
        // patterns are not trimmed: whitespace may be significant
        let referrer = record.get(4).unwrap_or_default();
        let url = record.get(5).unwrap_or_default();
        if url.is_empty() {
            return Err(RuleError::row("bad_pattern", row, "url_param is required"));
        }
        rules.push(MappingRule {
            rule_order,
            action_id: action_id.to_string(),
            labels,
            url_pattern: compile(url, row)?,
            referrer_pattern: if referrer.is_empty() {
                None
            } else {
                Some(compile(referrer, row)?)
            },
        });
    }
    let mut seen = BTreeMap::new();
    for (idx, rule) in rules.iter().enumerate() {
        if let Some(first) = seen.insert(rule.rule_order, idx) {
            return Err(RuleError::row(
                "duplicate_rule_order",
                idx + 1,
                format!(
                    "rule_order {} already used by row {}",
                    rule.rule_order,
                    first + 1
                ),
            ));
        }
    }
    MappingRules::new(rules)
}

/// Returns the action ids of all rules matching `row`, in rule order, or `[UNMATCHED]`.
pub fn match_row<'r>(row: &LogRow, rules: &'r MappingRules) -> Vec<&'r str> {
    let hits = rules.matching_rules(row);
    if hits.is_empty() {
        return vec![UNMATCHED];
    }
    hits.into_iter()
        .map(|i| rules.rules[i].action_id.as_str())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextSource {
    Url,
    ReferrerUrl,
}

/// LogRow fields a `field` extraction can copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowField {
    RowId,
    SessionId,
    UserId,
    Timestamp,
    ResultlistIds,
    Url,
    ReferrerUrl,
}

impl RowField {
    fn parse(name: &str) -> Option<RowField> {
        Some(match name {
            "row_id" => RowField::RowId,
            "session_id" => RowField::SessionId,
            "user_id" => RowField::UserId,
            "timestamp" => RowField::Timestamp,
            "resultlist_ids" => RowField::ResultlistIds,
            "url" => RowField::Url,
            "referrer_url" => RowField::ReferrerUrl,
            _ => return None,
        })
    }

    fn values(self, row: &LogRow) -> Vec<String> {
        let single = |s: &str| {
            if s.is_empty() {
                vec![]
            } else {
                vec![s.to_string()]
            }
        };
        match self {
            RowField::RowId => vec![row.row_id.to_string()],
            RowField::SessionId => single(&row.session_id),
            RowField::UserId => row.user_id.as_deref().map(single).unwrap_or_default(),
            RowField::Timestamp => vec![row.timestamp.to_string()],
            RowField::ResultlistIds => row.resultlist_ids.clone(),
            RowField::Url => single(&row.url),
            RowField::ReferrerUrl => single(&row.referrer_url),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Extractor {
    /// Every non-overlapping match's single capture group, percent-decoded.
    Text { source: TextSource, pattern: Regex },
    /// The raw value(s) of a row field.
    Field { source: RowField },
}

#[derive(Debug, Clone)]
pub struct ExtractionRule {
    /// An action id or [`WILDCARD`].
    pub action_id: String,
    pub entity_name: String,
    pub extractor: Extractor,
}

impl ExtractionRule {
    fn applies_to(&self, action_id: &str) -> bool {
        if action_id == UNMATCHED && matches!(self.extractor, Extractor::Text { .. }) {
            return false;
        }
        self.action_id == WILDCARD || self.action_id == action_id
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExtractionRules {
    rules: Vec<ExtractionRule>,
}

impl ExtractionRules {
    pub fn new(rules: Vec<ExtractionRule>) -> ExtractionRules {
        ExtractionRules { rules }
    }

    pub fn rules(&self) -> &[ExtractionRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

pub fn load_extraction_table(path: &Path) -> Result<ExtractionRules, RuleError> {
    parse_extraction_table(open(path)?)
}

pub fn parse_extraction_table<R: Read>(reader: R) -> Result<ExtractionRules, RuleError> {
    let mut rdr = rule_reader(reader);
    check_header(rdr.headers()?, &EXTRACTION_HEADER)?;
    let mut rules = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record?;
        let cell = |i: usize| record.get(i).unwrap_or_default().trim();
        let action_id = cell(0);
        if action_id.is_empty() {
            return Err(RuleError::row("empty_action_id", row, "action_id is empty"));
        }
        let entity_name = cell(1);
        if entity_name.is_empty() {
            return Err(RuleError::row(
                "empty_entity_name",
                row,
                "entity_name is empty",
            ));
        }
        let pattern = record.get(4).unwrap_or_default();
        let extractor = match cell(2) {
            "text" => {
                let source = match cell(3) {
                    "url" => TextSource::Url,
                    "referrer_url" => TextSource::ReferrerUrl,
                    other => {
                        return Err(RuleError::row(
                            "bad_source",
                            row,
                            format!("text source must be url or referrer_url, got `{other}`"),
                        ))
                    }
                };
                if pattern.is_empty() {
                    return Err(RuleError::row(
                        "pattern_needs_one_group",
                        row,
                        "pattern is empty",
                    ));
                }
                let pattern = compile(pattern, row)?;
                // captures_len counts the implicit whole-match group
                if pattern.captures_len() != 2 {
                    return Err(RuleError::row(
                        "pattern_needs_one_group",
                        row,
                        format!(
                            "`{}` has {} groups",
                            pattern.as_str(),
                            pattern.captures_len() - 1
                        ),
                    ));
                }
                Extractor::Text { source, pattern }
            }
            "field" => {
                if !pattern.trim().is_empty() {
                    return Err(RuleError::row(
                        "unexpected_pattern",
                        row,
                        "field extraction takes no pattern",
                    ));
                }
                let source = RowField::parse(cell(3)).ok_or_else(|| {
                    RuleError::row("bad_source", row, format!("unknown field `{}`", cell(3)))
                })?;
                Extractor::Field { source }
            }
            other => {
                return Err(RuleError::row(
                    "bad_kind",
                    row,
                    format!("kind must be text or field, got `{other}`"),
                ))
            }
        };
        rules.push(ExtractionRule {
            action_id: action_id.to_string(),
            entity_name: entity_name.to_string(),
            extractor,
        });
    }
    Ok(ExtractionRules { rules })
}

/// Entities extracted for one action. Rules that find nothing leave no entry.
pub fn extract_entities(
    row: &LogRow,
    action_id: &str,
    rules: &ExtractionRules,
) -> BTreeMap<String, Vec<String>> {
    let mut entities: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for rule in rules.rules.iter().filter(|r| r.applies_to(action_id)) {
        let values: Vec<String> = match &rule.extractor {
            Extractor::Text { source, pattern } => {
                let subject = match source {
                    TextSource::Url => &row.url,
                    TextSource::ReferrerUrl => &row.referrer_url,
                };
                pattern
                    .captures_iter(subject)
                    .filter_map(|c| c.get(1))
                    .map(|m| {
                        percent_decode_str(m.as_str())
                            .decode_utf8_lossy()
                            .into_owned()
                    })
                    .collect()
            }
            Extractor::Field { source } => source.values(row),
        };
        if !values.is_empty() {
            entities
                .entry(rule.entity_name.clone())
                .or_default()
                .extend(values);
        }
    }
    entities
}

/// One typed user action.
///
/// `step_index` and `duration_ms` are filled in by session building; fresh instances carry
/// `0` and `None`. `user_id` and `url` are copied from the source row so sessions can be
/// built and text-filtered without the raw log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionInstance {
    pub session_id: String,
    pub source_row_id: u64,
    pub action_id: String,
    pub timestamp: i64,
    pub intra_row_index: u32,
    pub step_index: u32,
    pub duration_ms: Option<u64>,
    pub entities: BTreeMap<String, Vec<String>>,
    pub user_id: Option<String>,
    pub url: String,
}

impl ActionInstance {
    /// Canonical analysis-table order.
    pub fn order_key(&self) -> (&str, i64, u64, u32) {
        (
            &self.session_id,
            self.timestamp,
            self.source_row_id,
            self.intra_row_index,
        )
    }
}

/// Maps a single row to its actions.
pub fn expand_row(
    row: &LogRow,
    mapping: &MappingRules,
    extraction: &ExtractionRules,
) -> Vec<ActionInstance> {
    match_row(row, mapping)
        .into_iter()
        .enumerate()
        .map(|(i, action_id)| ActionInstance {
            session_id: row.session_id.clone(),
            source_row_id: row.row_id,
            action_id: action_id.to_string(),
            timestamp: row.timestamp,
            intra_row_index: i as u32,
            step_index: 0,
            duration_ms: None,
            entities: extract_entities(row, action_id, extraction),
            user_id: row.user_id.clone(),
            url: row.url.clone(),
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("worker_count must be at least 1")]
    NoWorkers,
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Applies the rule tables to every row on `worker_count` threads.
///
/// The result is in canonical order (session, timestamp, row id, intra-row index) and does not
/// depend on `worker_count`.
pub fn preprocess(
    rows: &[LogRow],
    mapping: &MappingRules,
    extraction: &ExtractionRules,
    worker_count: usize,
) -> Result<Vec<ActionInstance>, PreprocessError> {
    if worker_count == 0 {
        return Err(PreprocessError::NoWorkers);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count)
        .build()
        .map_err(|e| PreprocessError::Pool(e.to_string()))?;
    Ok(pool.install(|| {
        let per_row: Vec<Vec<ActionInstance>> = rows
            .par_iter()
            .with_min_len(256)
            .map(|row| expand_row(row, mapping, extraction))
            .collect();
        let mut table: Vec<ActionInstance> = per_row.into_iter().flatten().collect();
        // keys are unique (row ids are), so an unstable sort is still deterministic
        table.par_sort_unstable_by(|a, b| a.order_key().cmp(&b.order_key()));
        table
    }))
}

/// Per-rule match counts and coverage over a sample of rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageReport {
    pub rows: u64,
    pub unmatched_rows: u64,
    /// `(rule_order, action_id, matched rows)` in rule order.
    pub rule_hits: Vec<(u32, String, u64)>,
}

impl CoverageReport {
    /// Fraction of rows matched by at least one rule; `1.0` for an empty sample.
    pub fn coverage(&self) -> f64 {
        if self.rows == 0 {
            1.0
        } else {
            1.0 - self.unmatched_rows as f64 / self.rows as f64
        }
    }
}

pub fn coverage(rows: &[LogRow], mapping: &MappingRules) -> CoverageReport {
    let mut hits = vec![0u64; mapping.len()];
    let mut unmatched = 0;
    for row in rows {
        let matched = mapping.matching_rules(row);
        if matched.is_empty() {
            unmatched += 1;
        }
        for i in matched {
            hits[i] += 1;
        }
    }
    CoverageReport {
        rows: rows.len() as u64,
        unmatched_rows: unmatched,
        rule_hits: mapping
            .rules
            .iter()
            .zip(hits)
            .map(|(r, n)| (r.rule_order, r.action_id.clone(), n))
            .collect(),
    }
}

impl fmt::Display for CoverageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (order, action, n) in &self.rule_hits {
            writeln!(f, "rule {order} {action} matches {n}")?;
        }
        writeln!(f, "sample_rows {}", self.rows)?;
        writeln!(f, "unmatched_rows {}", self.unmatched_rows)?;
        writeln!(f, "coverage {:.2}%", self.coverage() * 100.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(url: &str, referrer: &str) -> LogRow {
        LogRow {
            row_id: 7,
            session_id: "s1".into(),
            user_id: None,
            timestamp: 1_000,
            resultlist_ids: vec![],
            url: url.into(),
            referrer_url: referrer.into(),
        }
    }

    const TABLE1: &str = "rule_order,action_id,label_en,label_de,referrer_param,url_param\n\
        0,simple_search_home,Simple search from the homepage,Einfache Suche von der Startseite,^https?://xy\\.example/$,/search/results\\?\n";

    #[test]
    fn homepage_search_rule() {
        let rules = parse_mapping_table(TABLE1.as_bytes()).unwrap();
        assert_eq!(rules.len(), 1);
        let r = &rules.rules()[0];
        assert_eq!(r.labels["en"], "Simple search from the homepage");
        assert_eq!(r.labels["de"], "Einfache Suche von der Startseite");
        assert_eq!(
            match_row(
                &row("/search/results?lookfor=religion", "https://xy.example/"),
                &rules
            ),
            vec!["simple_search_home"]
        );
        // referrer must match too
        assert_eq!(
            match_row(
                &row(
                    "/search/results?lookfor=religion",
                    "https://xy.example/Record/1"
                ),
                &rules
            ),
            vec![UNMATCHED]
        );
        assert_eq!(
            match_row(&row("/search/results?lookfor=religion", ""), &rules),
            vec![UNMATCHED]
        );
    }

    #[test]
    fn unmatched_sentinel() {
        let rules = parse_mapping_table(TABLE1.as_bytes()).unwrap();
        assert_eq!(
            match_row(&row("/favorites/add?id=42", ""), &rules),
            vec![UNMATCHED]
        );
    }

    #[test]
    fn empty_table() {
        let rules = parse_mapping_table(&MAPPING_HEADER.join(",").into_bytes()[..]).unwrap();
        assert!(rules.is_empty());
        assert_eq!(match_row(&row("/", ""), &rules), vec![UNMATCHED]);
        let catalog = rules.catalog();
        assert_eq!(catalog.entries.len(), 1);
        assert_eq!(catalog.entries[0].action_id, UNMATCHED);
    }

    #[test]
    fn malformed_pattern_names_row() {
        let text = "rule_order,action_id,label_en,label_de,referrer_param,url_param\n0,x,X,,,([\n";
        let err = parse_mapping_table(text.as_bytes()).unwrap_err();
        assert_eq!(err.code(), "bad_pattern");
        assert!(err.to_string().starts_with("bad_pattern @ row 1"), "{err}");
    }

    #[test]
    fn loading_is_all_or_nothing() {
        let text = "rule_order,action_id,label_en,label_de,referrer_param,url_param\n\
                    0,a,A,,,/a\n1,,B,,,/b\n";
        let err = parse_mapping_table(text.as_bytes()).unwrap_err();
        assert!(
            err.to_string().starts_with("empty_action_id @ row 2"),
            "{err}"
        );
    }

    #[test]
    fn header_checks() {
        let err =
            parse_mapping_table("rule_order,action_id,label_en,label_de,url_param\n".as_bytes())
                .unwrap_err();
        assert!(matches!(err, RuleError::MissingColumn(c) if c == "referrer_param"));
        let err = parse_mapping_table(
            "action_id,rule_order,label_en,label_de,referrer_param,url_param\n".as_bytes(),
        )
        .unwrap_err();
        assert_eq!(err.code(), "bad_header");
    }

    #[test]
    fn duplicate_rule_order_rejected() {
        let text = "rule_order,action_id,label_en,label_de,referrer_param,url_param\n\
                    3,a,A,,,/a\n3,b,B,,,/b\n";
        let err = parse_mapping_table(text.as_bytes()).unwrap_err();
        assert_eq!(err.code(), "duplicate_rule_order");
    }

    #[test]
    fn all_matching_rules_fire_in_rule_order() {
        // file order is 3 then 1; both match the same url
        let text = "rule_order,action_id,label_en,label_de,referrer_param,url_param\n\
                    3,rule3_action,R3,,,results\n1,rule1_action,R1,,,^/search\n";
        let rules = parse_mapping_table(text.as_bytes()).unwrap();
        let r = row("/search/results?lookfor=x", "");
        assert_eq!(match_row(&r, &rules), vec!["rule1_action", "rule3_action"]);
        let actions = expand_row(&r, &rules, &ExtractionRules::default());
        assert_eq!(actions.len(), 2);
        assert_eq!(actions[0].intra_row_index, 0);
        assert_eq!(actions[0].action_id, "rule1_action");
        assert_eq!(actions[1].intra_row_index, 1);
        assert_eq!(actions[1].action_id, "rule3_action");
    }

    #[test]
    fn blank_rule_order_defaults_to_position() {
        let text = "rule_order,action_id,label_en,label_de,referrer_param,url_param\n\
                    ,a,A,,,/a\n,b,B,,,/b\n";
        let rules = parse_mapping_table(text.as_bytes()).unwrap();
        let orders: Vec<_> = rules.rules().iter().map(|r| r.rule_order).collect();
        assert_eq!(orders, vec![0, 1]);
    }

    #[test]
    fn catalog_dedups_actions_and_appends_unmatched() {
        let text = "rule_order,action_id,label_en,label_de,referrer_param,url_param\n\
                    0,search,Search,,,/a\n1,view,View,Ansicht,,/b\n2,search,,Suche,,/c\n";
        let catalog = parse_mapping_table(text.as_bytes()).unwrap().catalog();
        let ids: Vec<_> = catalog
            .entries
            .iter()
            .map(|e| e.action_id.as_str())
            .collect();
        assert_eq!(ids, vec!["search", "view", UNMATCHED]);
        let search = catalog.labels("search").unwrap();
        assert_eq!(search["en"], "Search");
        assert_eq!(search["de"], "Suche");
    }

    const EXTRACTION: &str = "action_id,entity_name,kind,source,pattern\n\
        simple_search_home,search_term,text,url,lookfor=([^&]*)\n\
        *,result_ids,field,resultlist_ids,\n";

    #[test]
    fn extraction_table_loads() {
        let rules = parse_extraction_table(EXTRACTION.as_bytes()).unwrap();
        assert_eq!(rules.len(), 2);
        assert!(matches!(
            rules.rules()[1].extractor,
            Extractor::Field {
                source: RowField::ResultlistIds
            }
        ));
    }

    #[test]
    fn extraction_table_errors() {
        let zero = "action_id,entity_name,kind,source,pattern\na,e,text,url,lookfor=\n";
        let err = parse_extraction_table(zero.as_bytes()).unwrap_err();
        assert!(
            err.to_string()
                .starts_with("pattern_needs_one_group @ row 1"),
            "{err}"
        );
        let two = "action_id,entity_name,kind,source,pattern\na,e,text,url,(a)(b)\n";
        assert_eq!(
            parse_extraction_table(two.as_bytes()).unwrap_err().code(),
            "pattern_needs_one_group"
        );
        let field_with_pattern = "action_id,entity_name,kind,source,pattern\na,e,field,url,(x)\n";
        assert_eq!(
            parse_extraction_table(field_with_pattern.as_bytes())
                .unwrap_err()
                .code(),
            "unexpected_pattern"
        );
        let bad_field = "action_id,entity_name,kind,source,pattern\na,e,field,cookie,\n";
        assert_eq!(
            parse_extraction_table(bad_field.as_bytes())
                .unwrap_err()
                .code(),
            "bad_source"
        );
        let bad_kind = "action_id,entity_name,kind,source,pattern\na,e,xpath,url,\n";
        assert_eq!(
            parse_extraction_table(bad_kind.as_bytes())
                .unwrap_err()
                .code(),
            "bad_kind"
        );
    }

    #[test]
    fn text_extraction_decodes_and_collects_all_matches() {
        let rules = parse_extraction_table(EXTRACTION.as_bytes()).unwrap();
        let e = extract_entities(
            &row("/search/results?lookfor=religion", ""),
            "simple_search_home",
            &rules,
        );
        assert_eq!(
            e,
            BTreeMap::from([("search_term".into(), vec!["religion".into()])])
        );

        let e = extract_entities(
            &row("/search/results?lookfor=a&lookfor=b", ""),
            "simple_search_home",
            &rules,
        );
        assert_eq!(e["search_term"], vec!["a", "b"]);

        let e = extract_entities(
            &row("/search/results?lookfor=social%20capital", ""),
            "simple_search_home",
            &rules,
        );
        assert_eq!(e["search_term"], vec!["social capital"]);
    }

    #[test]
    fn empty_field_contributes_nothing() {
        let rules = parse_extraction_table(EXTRACTION.as_bytes()).unwrap();
        let e = extract_entities(&row("/Record/1", ""), "view_record", &rules);
        assert!(e.is_empty());
        let mut r = row("/Record/1", "");
        r.resultlist_ids = vec!["d1".into(), "d2".into()];
        let e = extract_entities(&r, "view_record", &rules);
        assert_eq!(e["result_ids"], vec!["d1", "d2"]);
    }

    #[test]
    fn unmatched_rows_run_field_rules_only() {
        let text = "action_id,entity_name,kind,source,pattern\n\
                    *,term,text,url,q=([^&]*)\n*,result_ids,field,resultlist_ids,\n";
        let rules = parse_extraction_table(text.as_bytes()).unwrap();
        let mut r = row("/unknown?q=x", "");
        r.resultlist_ids = vec!["d1".into()];
        let e = extract_entities(&r, UNMATCHED, &rules);
        assert_eq!(e.keys().collect::<Vec<_>>(), vec!["result_ids"]);
        let e = extract_entities(&r, "anything", &rules);
        assert_eq!(e.keys().collect::<Vec<_>>(), vec!["result_ids", "term"]);
    }

    #[test]
    fn preprocess_rejects_zero_workers() {
        let rules = parse_mapping_table(TABLE1.as_bytes()).unwrap();
        assert!(matches!(
            preprocess(&[], &rules, &ExtractionRules::default(), 0),
            Err(PreprocessError::NoWorkers)
        ));
        assert!(preprocess(&[], &rules, &ExtractionRules::default(), 1)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn coverage_counts() {
        let rules = parse_mapping_table(TABLE1.as_bytes()).unwrap();
        let rows = vec![
            row("/search/results?lookfor=a", "https://xy.example/"),
            row("/x", ""),
            row("/y", ""),
            row("/search/results?lookfor=b", "https://xy.example/"),
        ];
        let report = coverage(&rows, &rules);
        assert_eq!(report.unmatched_rows, 2);
        assert_eq!(report.rule_hits[0].2, 2);
        assert!((report.coverage() - 0.5).abs() < 1e-12);
    }
}
