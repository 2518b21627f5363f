//! Whole-session analysis of interaction logs from web-based search systems.
//!
//! The pipeline is staged:
//!
//! 1. [`ingest`] normalizes raw CSV / JSON Lines logs into [`LogRow`]s held in a [`LogStore`].
//! 2. [`mapping`] turns every row into one or more typed [`ActionInstance`]s using an
//!    operator-authored rule table of regular expressions.
//! 3. [`session`] groups actions into [`Session`]s, assigns step indices and dwell times,
//!    and persists the resulting analysis table.
//! 4. [`filter`] and [`flow`] answer the explorer's questions: which sessions match a set
//!    of conjunctive filters, and how do those sessions flow from step to step.
//!
//! [`query`] holds the request/response types shared by the HTTP service and the CLI so both
//! produce identical bytes for identical inputs.

pub mod filter;
pub mod flow;
pub mod ingest;
pub mod mapping;
pub mod query;
pub mod session;
pub mod synthetic;
mod time;

pub use filter::{FilterSpec, ResolvedRange, TimeRange};
pub use flow::{aggregate, highlight_paths, FlowGraph};
pub use ingest::{IngestReport, LogRow, LogStore, SchemaConfig};
pub use mapping::{ActionCatalog, ActionInstance, ExtractionRules, MappingRules, UNMATCHED};
pub use session::{AnalysisStore, Session};
