//! Parsing and validation of issue-tracker exports.
//!
//! The entry points are [`parse_export`] for the line-delimited export format,
//! [`to_bug_record`] for converting a raw record into a validated [`BugRecord`]
//! under a [`ProjectProfile`], and [`BugRecord::stage_intervals`] for the
//! per-state sojourn view used by the cleaning rules and the statistics.

mod export;
mod profile;
mod record;
mod workflow;

pub use export::{
    parse_export, parse_export_path, read_bug_records, read_bug_records_path, write_bug_records,
    write_export, ParseError,
};
pub use profile::{ProfileError, ProjectProfile};
pub use record::{
    to_bug_record, BugRecord, ChangelogEntry, ConvertError, Conversion, HistoryError,
    RawIssueRecord, SkipReason, StageInterval, StateTransition, Timestamp, DEFAULT_INITIAL_STATE,
    STATUS_FIELD,
};
pub use workflow::{WorkflowError, WorkflowSpec};
