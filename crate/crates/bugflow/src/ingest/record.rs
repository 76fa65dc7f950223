use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::ProjectProfile;

/// Name of the changelog field whose edits are state transitions.
pub const STATUS_FIELD: &str = "status";

/// State assumed for a record that never changed state.
pub const DEFAULT_INITIAL_STATE: &str = "Open";

/// Seconds since the Unix epoch, UTC.
///
/// Exports may carry either integer epoch seconds or an ISO-8601 / RFC 3339
/// string; both deserialise into this type. Serialisation always emits epoch
/// seconds, which is the canonical form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub i64);

impl Timestamp {
    /// Elapsed time from `earlier` to `self`, in hours.
    pub fn hours_since(self, earlier: Timestamp) -> f64 {
        (self.0 - earlier.0) as f64 / 3600.0
    }

    /// Shifts by a whole number of seconds.
    pub fn plus_seconds(self, seconds: i64) -> Timestamp {
        Timestamp(self.0 + seconds)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_i64(self.0)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wire {
            Epoch(i64),
            Text(String),
        }
        match Wire::deserialize(deserializer)? {
            Wire::Epoch(s) => Ok(Timestamp(s)),
            Wire::Text(s) => chrono::DateTime::parse_from_rfc3339(&s)
                .map(|dt| Timestamp(dt.timestamp()))
                .map_err(|e| D::Error::custom(format!("invalid timestamp {s:?}: {e}"))),
        }
    }
}

/// One edit from a record's changelog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangelogEntry {
    pub field_name: String,
    pub from_value: String,
    pub to_value: String,
    pub at: Timestamp,
    pub actor_id: String,
}

/// A record exactly as exported from the tracker, before any normalisation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawIssueRecord {
    pub issue_key: String,
    pub issue_type: String,
    pub project: String,
    #[serde(default)]
    pub subproject: String,
    pub priority_label: String,
    pub reporter_id: String,
    #[serde(default)]
    pub assignee_id: String,
    pub created_at: Timestamp,
    pub resolution_status: String,
    pub last_update_at: Timestamp,
    pub changelog: Vec<ChangelogEntry>,
}

impl RawIssueRecord {
    /// Checks the structural invariants: changelog timestamps are
    /// non-decreasing and bracketed by `created_at` and `last_update_at`.
    pub fn validate(&self) -> Result<(), String> {
        let mut prev = self.created_at;
        for (i, entry) in self.changelog.iter().enumerate() {
            if entry.at < prev {
                return Err(format!(
                    "changelog entry {i} at {} precedes {}",
                    entry.at, prev
                ));
            }
            prev = entry.at;
        }
        if let Some(last) = self.changelog.last() {
            if last.at > self.last_update_at {
                return Err(format!(
                    "changelog entry at {} is later than last_update_at {}",
                    last.at, self.last_update_at
                ));
            }
        }
        Ok(())
    }
}

/// One state change in a bug's history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateTransition {
    pub from_state: String,
    pub to_state: String,
    pub at: Timestamp,
    pub actor_id: String,
}

/// A cleaned, validated bug.
///
/// `transitions` holds the ordered state changes; `event_times` holds the
/// timestamps of all recorded edits (state changes and otherwise) plus the
/// creation time, which is what the inactivity filter scans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugRecord {
    pub id: String,
    pub project: String,
    pub subproject: String,
    pub priority: u8,
    pub reporter_id: String,
    pub assignee_id: Option<String>,
    pub created_at: Timestamp,
    pub resolution_status: String,
    pub last_update_at: Timestamp,
    pub transitions: Vec<StateTransition>,
    pub event_times: Vec<Timestamp>,
}

/// One stay in one state. The final stay of every history is open ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageInterval {
    pub state: String,
    pub entered_at: Timestamp,
    /// `None` marks the open-ended final interval.
    pub exited_at: Option<Timestamp>,
}

impl StageInterval {
    /// Sojourn length in hours; `None` for the open-ended interval.
    pub fn duration_hours(&self) -> Option<f64> {
        self.exited_at.map(|exit| exit.hours_since(self.entered_at))
    }

    /// Sojourn length in whole seconds; `None` for the open-ended interval.
    pub fn duration_seconds(&self) -> Option<i64> {
        self.exited_at.map(|exit| exit.0 - self.entered_at.0)
    }
}

/// Why a raw record was skipped rather than converted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipReason {
    /// The issue type is not in the profile's allowed set.
    NonBug { issue_type: String },
    /// The first recorded transition does not leave the workflow's initial state.
    WrongInitialState { found: String, expected: String },
    /// A transition's from-state differs from the previous transition's to-state.
    DiscontinuousHistory { index: usize },
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkipReason::NonBug { issue_type } => write!(f, "non-bug issue type {issue_type:?}"),
            SkipReason::WrongInitialState { found, expected } => {
                write!(f, "history starts in {found:?}, expected {expected:?}")
            }
            SkipReason::DiscontinuousHistory { index } => {
                write!(f, "discontinuous history at index {index}")
            }
        }
    }
}

/// Outcome of converting one raw record.
#[derive(Debug, Clone, PartialEq)]
pub enum Conversion {
    Kept(BugRecord),
    Skipped(SkipReason),
}

#[derive(Debug, Error)]
pub enum ConvertError {
    #[error("priority label {label:?} is not in the project profile")]
    UnknownPriorityLabel { label: String },
}

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("discontinuous history at index {index}")]
    Discontinuous { index: usize },
}

/// Converts a raw record into a [`BugRecord`] under `profile`.
///
/// Issue types outside the profile's allowed set are skipped, as are records
/// whose status history is discontinuous or does not start in the workflow's
/// initial state. An unknown priority label is an error: it means the profile
/// is incomplete for the project, not that the record is bad.
pub fn to_bug_record(
    raw: &RawIssueRecord,
    profile: &ProjectProfile,
) -> Result<Conversion, ConvertError> {
    if !profile.allowed_issue_types.contains(&raw.issue_type) {
        return Ok(Conversion::Skipped(SkipReason::NonBug {
            issue_type: raw.issue_type.clone(),
        }));
    }
    let priority = *profile
        .priority_map
        .get(&raw.priority_label)
        .ok_or_else(|| ConvertError::UnknownPriorityLabel {
            label: raw.priority_label.clone(),
        })?;

    let transitions: Vec<StateTransition> = raw
        .changelog
        .iter()
        .filter(|entry| entry.field_name == STATUS_FIELD)
        .map(|entry| StateTransition {
            from_state: entry.from_value.clone(),
            to_state: entry.to_value.clone(),
            at: entry.at,
            actor_id: entry.actor_id.clone(),
        })
        .collect();

    if let Some(first) = transitions.first() {
        if first.from_state != profile.workflow.initial {
            return Ok(Conversion::Skipped(SkipReason::WrongInitialState {
                found: first.from_state.clone(),
                expected: profile.workflow.initial.clone(),
            }));
        }
    }
    for (i, pair) in transitions.windows(2).enumerate() {
        if pair[1].from_state != pair[0].to_state {
            return Ok(Conversion::Skipped(SkipReason::DiscontinuousHistory {
                index: i + 1,
            }));
        }
    }

    let mut event_times: Vec<Timestamp> = Vec::with_capacity(raw.changelog.len() + 1);
    event_times.push(raw.created_at);
    event_times.extend(raw.changelog.iter().map(|entry| entry.at));

    Ok(Conversion::Kept(BugRecord {
        id: raw.issue_key.clone(),
        project: raw.project.clone(),
        subproject: raw.subproject.clone(),
        priority,
        reporter_id: raw.reporter_id.clone(),
        assignee_id: if raw.assignee_id.is_empty() {
            None
        } else {
            Some(raw.assignee_id.clone())
        },
        created_at: raw.created_at,
        resolution_status: raw.resolution_status.clone(),
        last_update_at: raw.last_update_at,
        transitions,
        event_times,
    }))
}

impl BugRecord {
    /// Splits the history into abutting per-state intervals.
    ///
    /// The first interval starts at `created_at`; each transition closes the
    /// interval of its from-state; the final interval is open ended. A record
    /// with no transitions yields a single open-ended interval in
    /// [`DEFAULT_INITIAL_STATE`].
    pub fn stage_intervals(&self) -> Result<Vec<StageInterval>, HistoryError> {
        let mut intervals = Vec::with_capacity(self.transitions.len() + 1);
        let mut current_state = match self.transitions.first() {
            Some(first) => first.from_state.clone(),
            None => DEFAULT_INITIAL_STATE.to_string(),
        };
        let mut entered = self.created_at;
        for (i, t) in self.transitions.iter().enumerate() {
            if t.from_state != current_state {
                return Err(HistoryError::Discontinuous { index: i });
            }
            intervals.push(StageInterval {
                state: current_state,
                entered_at: entered,
                exited_at: Some(t.at),
            });
            current_state = t.to_state.clone();
            entered = t.at;
        }
        intervals.push(StageInterval {
            state: current_state,
            entered_at: entered,
            exited_at: None,
        });
        Ok(intervals)
    }

    /// Time of the first entry into `terminal`, if the bug ever reached it.
    pub fn first_terminal_entry(&self, terminal: &str) -> Option<Timestamp> {
        self.transitions
            .iter()
            .find(|t| t.to_state == terminal)
            .map(|t| t.at)
    }

    /// State the bug was last recorded in.
    pub fn final_state(&self) -> &str {
        self.transitions
            .last()
            .map(|t| t.to_state.as_str())
            .unwrap_or(DEFAULT_INITIAL_STATE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::WorkflowSpec;

    fn profile() -> ProjectProfile {
        ProjectProfile::with_default_labels(WorkflowSpec::builtin("standard").unwrap())
    }

    fn raw(issue_type: &str, label: &str, changelog: Vec<ChangelogEntry>) -> RawIssueRecord {
        let last = changelog.last().map(|e| e.at).unwrap_or(Timestamp(0));
        RawIssueRecord {
            issue_key: "PRJ-1".into(),
            issue_type: issue_type.into(),
            project: "PRJ".into(),
            subproject: String::new(),
            priority_label: label.into(),
            reporter_id: "alice".into(),
            assignee_id: String::new(),
            created_at: Timestamp(0),
            resolution_status: "Done".into(),
            last_update_at: last,
            changelog,
        }
    }

    fn status(from: &str, to: &str, at: i64) -> ChangelogEntry {
        ChangelogEntry {
            field_name: STATUS_FIELD.into(),
            from_value: from.into(),
            to_value: to.into(),
            at: Timestamp(at),
            actor_id: "bob".into(),
        }
    }

    #[test]
    fn non_bug_is_skipped() {
        let record = raw("Task", "Highest", vec![]);
        match to_bug_record(&record, &profile()).unwrap() {
            Conversion::Skipped(SkipReason::NonBug { issue_type }) => {
                assert_eq!(issue_type, "Task")
            }
            other => panic!("expected skip, got {other:?}"),
        }
    }

    #[test]
    fn priority_label_maps_through_profile() {
        let record = raw("Bug", "Blocker", vec![]);
        match to_bug_record(&record, &profile()).unwrap() {
            Conversion::Kept(bug) => assert_eq!(bug.priority, 1),
            other => panic!("expected kept, got {other:?}"),
        }
    }

    #[test]
    fn unknown_priority_label_is_an_error() {
        let record = raw("Bug", "Urgentissimo", vec![]);
        let err = to_bug_record(&record, &profile()).unwrap_err();
        assert!(err.to_string().contains("Urgentissimo"));
    }

    #[test]
    fn empty_assignee_becomes_none() {
        let record = raw("Bug", "Highest", vec![]);
        match to_bug_record(&record, &profile()).unwrap() {
            Conversion::Kept(bug) => assert_eq!(bug.assignee_id, None),
            other => panic!("expected kept, got {other:?}"),
        }
    }

    #[test]
    fn non_status_edits_only_contribute_event_times() {
        let mut comment = status("", "", 50);
        comment.field_name = "comment".into();
        let record = raw(
            "Bug",
            "Highest",
            vec![comment, status("Open", "Closed", 100)],
        );
        match to_bug_record(&record, &profile()).unwrap() {
            Conversion::Kept(bug) => {
                assert_eq!(bug.transitions.len(), 1);
                assert_eq!(
                    bug.event_times,
                    vec![Timestamp(0), Timestamp(50), Timestamp(100)]
                );
            }
            other => panic!("expected kept, got {other:?}"),
        }
    }

    #[test]
    fn wrong_initial_state_is_skipped() {
        let record = raw("Bug", "Highest", vec![status("In Progress", "Closed", 10)]);
        match to_bug_record(&record, &profile()).unwrap() {
            Conversion::Skipped(SkipReason::WrongInitialState { found, .. }) => {
                assert_eq!(found, "In Progress")
            }
            other => panic!("expected skip, got {other:?}"),
        }
    }

    #[test]
    fn discontinuous_history_is_skipped() {
        let record = raw(
            "Bug",
            "Highest",
            vec![
                status("Open", "In Progress", 10),
                status("Resolved", "Closed", 20),
            ],
        );
        match to_bug_record(&record, &profile()).unwrap() {
            Conversion::Skipped(SkipReason::DiscontinuousHistory { index }) => {
                assert_eq!(index, 1)
            }
            other => panic!("expected skip, got {other:?}"),
        }
    }

    #[test]
    fn stage_intervals_direct_construction() {
        let record = raw(
            "Bug",
            "Highest",
            vec![
                status("Open", "In Progress", 36_000),
                status("In Progress", "Closed", 90_000),
            ],
        );
        let bug = match to_bug_record(&record, &profile()).unwrap() {
            Conversion::Kept(bug) => bug,
            other => panic!("{other:?}"),
        };
        let intervals = bug.stage_intervals().unwrap();
        assert_eq!(intervals.len(), 3);
        assert_eq!(intervals[0].state, "Open");
        assert_eq!(intervals[0].duration_hours(), Some(10.0));
        assert_eq!(intervals[1].state, "In Progress");
        assert_eq!(intervals[1].duration_hours(), Some(15.0));
        assert_eq!(intervals[2].state, "Closed");
        assert_eq!(intervals[2].exited_at, None);
    }

    #[test]
    fn stage_intervals_without_transitions() {
        let record = raw("Bug", "Highest", vec![]);
        let bug = match to_bug_record(&record, &profile()).unwrap() {
            Conversion::Kept(bug) => bug,
            other => panic!("{other:?}"),
        };
        let intervals = bug.stage_intervals().unwrap();
        assert_eq!(intervals.len(), 1);
        assert_eq!(intervals[0].state, DEFAULT_INITIAL_STATE);
        assert_eq!(intervals[0].entered_at, Timestamp(0));
        assert_eq!(intervals[0].exited_at, None);
    }

    #[test]
    fn timestamp_accepts_iso_and_epoch() {
        let ts: Timestamp = serde_json::from_str("1600000000").unwrap();
        assert_eq!(ts, Timestamp(1_600_000_000));
        let ts: Timestamp = serde_json::from_str("\"2020-09-13T12:26:40Z\"").unwrap();
        assert_eq!(ts, Timestamp(1_600_000_000));
        assert!(serde_json::from_str::<Timestamp>("\"not a date\"").is_err());
    }
}
