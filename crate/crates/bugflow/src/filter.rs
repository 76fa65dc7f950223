//! Corpus cleaning rules and prefilters.
//!
//! The standard pipeline applies, in order: resolution-status filtering,
//! truncation after the terminal state, undefined-state folding,
//! transient-state merging, and loop merging. Loop merging runs last because
//! the earlier merges can themselves create self-transitions.
//!
//! Every per-bug rule preserves the creation-to-terminal duration: whole bugs
//! are dropped by the corpus-level filters, while the merge rules only
//! redistribute interior time.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{BugRecord, StateTransition, WorkflowSpec, DEFAULT_INITIAL_STATE};
use crate::numeric;
use crate::stats::resolution_time;

/// Knobs for the cleaning rules and prefilters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub allowed_statuses: BTreeSet<String>,
    pub transient_threshold_seconds: u64,
    pub inactivity_gap_days: u32,
    pub outlier_mode: OutlierMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            allowed_statuses: BTreeSet::from(["Done".to_string(), "Fixed".to_string()]),
            transient_threshold_seconds: 300,
            inactivity_gap_days: 30,
            outlier_mode: OutlierMode::None,
        }
    }
}

impl FilterConfig {
    /// Reads the `[filter]` table of a profile/config TOML file; absent keys
    /// (or an absent table) fall back to the defaults.
    pub fn from_profile_toml(text: &str) -> Result<FilterConfig, toml::de::Error> {
        #[derive(Deserialize)]
        struct File {
            #[serde(default)]
            filter: Option<FilterConfig>,
        }
        let file: File = toml::from_str(text)?;
        Ok(file.filter.unwrap_or_default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutlierMode {
    None,
    Mild,
    Extreme,
}

impl std::str::FromStr for OutlierMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(OutlierMode::None),
            "mild" => Ok(OutlierMode::Mild),
            "extreme" => Ok(OutlierMode::Extreme),
            other => Err(format!("unknown outlier mode {other:?} (none, mild, extreme)")),
        }
    }
}

/// What a filter run did: bug-level removals per rule plus the interior edits
/// of the merge rules.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input_count: usize,
    pub kept_count: usize,
    pub removed_by_rule: BTreeMap<String, usize>,
    pub merged_transient_states: usize,
    pub merged_loops: usize,
    pub dropped_undefined_states: usize,
    pub truncated_tails: usize,
}

impl FilterReport {
    /// True when the bug-level counts add up: kept + removed = input.
    pub fn reconciles(&self) -> bool {
        self.kept_count + self.removed_by_rule.values().sum::<usize>() == self.input_count
    }
}

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("bug {bug_id}: first interval is in undefined state {state:?}")]
    FirstIntervalUndefined { bug_id: String, state: String },
    #[error("corpus of {n} bugs is too small for quartiles (need at least 4)")]
    CorpusTooSmall { n: usize },
    #[error("bug {bug_id} never reached the terminal state required by this filter")]
    NotResolved { bug_id: String },
}

/// Keeps exactly the bugs whose resolution status is in `allowed`.
pub fn filter_resolution_status(
    corpus: Vec<BugRecord>,
    allowed: &BTreeSet<String>,
) -> (Vec<BugRecord>, FilterReport) {
    let input_count = corpus.len();
    let kept: Vec<BugRecord> = corpus
        .into_iter()
        .filter(|bug| allowed.contains(&bug.resolution_status))
        .collect();
    let mut report = FilterReport {
        input_count,
        kept_count: kept.len(),
        ..FilterReport::default()
    };
    let removed = input_count - kept.len();
    if removed > 0 {
        report
            .removed_by_rule
            .insert("resolution_status".to_string(), removed);
    }
    (kept, report)
}

/// Removes every transition after the first entry into `terminal`, making it
/// absorbing. Bugs that never reach `terminal` are unchanged.
pub fn truncate_after_closed(mut bug: BugRecord, terminal: &str) -> BugRecord {
    if let Some(pos) = bug.transitions.iter().position(|t| t.to_state == terminal) {
        bug.transitions.truncate(pos + 1);
    }
    bug
}

fn first_interval_state(bug: &BugRecord) -> String {
    bug.transitions
        .first()
        .map(|t| t.from_state.clone())
        .unwrap_or_else(|| DEFAULT_INITIAL_STATE.to_string())
}

/// Removes intervals spent in states outside `spec`, folding each removed
/// interval's time into the preceding state. The total resolution duration is
/// unchanged. Errors when the very first interval is undefined: there is no
/// previous state to absorb it.
pub fn drop_undefined_states(
    mut bug: BugRecord,
    spec: &WorkflowSpec,
) -> Result<BugRecord, FilterError> {
    let first = first_interval_state(&bug);
    if !spec.contains_state(&first) {
        return Err(FilterError::FirstIntervalUndefined {
            bug_id: bug.id.clone(),
            state: first,
        });
    }
    let mut out: Vec<StateTransition> = Vec::with_capacity(bug.transitions.len());
    let mut current = first;
    for t in bug.transitions.drain(..) {
        if spec.contains_state(&t.to_state) {
            out.push(StateTransition {
                from_state: current.clone(),
                to_state: t.to_state.clone(),
                at: t.at,
                actor_id: t.actor_id,
            });
            current = t.to_state;
        }
        // Entering an undefined state: drop the transition; its sojourn
        // accumulates with `current`.
    }
    bug.transitions = out;
    Ok(bug)
}

/// Removes interior intervals shorter than `threshold_seconds`, adding their
/// time to the preceding state. The first interval and the open-ended final
/// interval are never merged.
pub fn merge_transient_states(mut bug: BugRecord, threshold_seconds: u64) -> BugRecord {
    let n = bug.transitions.len();
    if n < 2 {
        return bug;
    }
    let exits: Vec<i64> = bug.transitions.iter().skip(1).map(|t| t.at.0).collect();
    let mut out: Vec<StateTransition> = Vec::with_capacity(n);
    let mut current = first_interval_state(&bug);
    for (k, t) in bug.transitions.drain(..).enumerate() {
        let is_transient = k < exits.len() && exits[k] - t.at.0 < threshold_seconds as i64;
        if is_transient {
            continue;
        }
        out.push(StateTransition {
            from_state: current.clone(),
            to_state: t.to_state.clone(),
            at: t.at,
            actor_id: t.actor_id,
        });
        current = t.to_state;
    }
    bug.transitions = out;
    bug
}

/// Coalesces self-transitions: consecutive intervals in the same state become
/// one interval spanning both. One pass reaches the fixed point.
pub fn merge_loops(mut bug: BugRecord) -> BugRecord {
    bug.transitions.retain(|t| t.from_state != t.to_state);
    bug
}

/// Applies the full cleaning pipeline in its fixed order and reports what
/// each rule did. Applying the pipeline to its own output changes nothing.
pub fn apply_standard_pipeline(
    corpus: Vec<BugRecord>,
    config: &FilterConfig,
    spec: &WorkflowSpec,
) -> Result<(Vec<BugRecord>, FilterReport), FilterError> {
    let (kept, mut report) = filter_resolution_status(corpus, &config.allowed_statuses);
    let mut out = Vec::with_capacity(kept.len());
    for bug in kept {
        let before = bug.transitions.len();
        let bug = truncate_after_closed(bug, &spec.terminal);
        if bug.transitions.len() < before {
            report.truncated_tails += 1;
        }

        let before = bug.transitions.len();
        let bug = drop_undefined_states(bug, spec)?;
        report.dropped_undefined_states += before - bug.transitions.len();

        let before = bug.transitions.len();
        let bug = merge_transient_states(bug, config.transient_threshold_seconds);
        report.merged_transient_states += before - bug.transitions.len();

        let before = bug.transitions.len();
        let bug = merge_loops(bug);
        report.merged_loops += before - bug.transitions.len();

        out.push(bug);
    }
    report.kept_count = out.len();
    Ok((out, report))
}

/// Drops resolution-time outliers by Tukey fences over the corpus.
///
/// Mild mode removes bugs outside `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`; extreme
/// mode removes only bugs above `Q3 + 3 IQR`. Quartiles interpolate linearly
/// between order statistics. `OutlierMode::None` is a no-op.
pub fn tukey_outlier_filter(
    corpus: Vec<BugRecord>,
    mode: OutlierMode,
    terminal: &str,
) -> Result<(Vec<BugRecord>, FilterReport), FilterError> {
    let input_count = corpus.len();
    if mode == OutlierMode::None {
        return Ok((
            corpus,
            FilterReport {
                input_count,
                kept_count: input_count,
                ..FilterReport::default()
            },
        ));
    }
    if input_count < 4 {
        return Err(FilterError::CorpusTooSmall { n: input_count });
    }
    let mut times = Vec::with_capacity(input_count);
    for bug in &corpus {
        let t = resolution_time(bug, terminal).map_err(|_| FilterError::NotResolved {
            bug_id: bug.id.clone(),
        })?;
        times.push(t);
    }
    let mut sorted = times.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q1 = numeric::quantile_sorted(&sorted, 0.25);
    let q3 = numeric::quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let keep = |t: f64| match mode {
        OutlierMode::Mild => t >= q1 - 1.5 * iqr && t <= q3 + 1.5 * iqr,
        OutlierMode::Extreme => t <= q3 + 3.0 * iqr,
        OutlierMode::None => true,
    };
    let kept: Vec<BugRecord> = corpus
        .into_iter()
        .zip(times)
        .filter(|(_, t)| keep(*t))
        .map(|(bug, _)| bug)
        .collect();
    let rule = match mode {
        OutlierMode::Mild => "tukey_mild",
        OutlierMode::Extreme => "tukey_extreme",
        OutlierMode::None => unreachable!(),
    };
    let mut report = FilterReport {
        input_count,
        kept_count: kept.len(),
        ..FilterReport::default()
    };
    let removed = input_count - kept.len();
    if removed > 0 {
        report.removed_by_rule.insert(rule.to_string(), removed);
    }
    Ok((kept, report))
}

/// Drops every bug with a gap longer than `gap_days` between consecutive
/// recorded edits (creation included), considering edits up to the first
/// entry into `terminal`.
pub fn inactivity_filter(
    corpus: Vec<BugRecord>,
    gap_days: u32,
    terminal: &str,
) -> (Vec<BugRecord>, FilterReport) {
    let input_count = corpus.len();
    let gap_secs = i64::from(gap_days) * 86_400;
    let kept: Vec<BugRecord> = corpus
        .into_iter()
        .filter(|bug| {
            let cutoff = bug.first_terminal_entry(terminal);
            let mut prev = bug.created_at.0;
            for event in &bug.event_times {
                let at = event.0;
                if let Some(cut) = cutoff {
                    if at > cut.0 {
                        break;
                    }
                }
                if at - prev > gap_secs {
                    return false;
                }
                prev = at;
            }
            true
        })
        .collect();
    let mut report = FilterReport {
        input_count,
        kept_count: kept.len(),
        ..FilterReport::default()
    };
    let removed = input_count - kept.len();
    if removed > 0 {
        report.removed_by_rule.insert("inactivity".to_string(), removed);
    }
    (kept, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Timestamp;

    pub(crate) fn bug_with_transitions(id: &str, status: &str, path: &[(&str, &str, i64)]) -> BugRecord {
        let transitions: Vec<StateTransition> = path
            .iter()
            .map(|(from, to, at)| StateTransition {
                from_state: from.to_string(),
                to_state: to.to_string(),
                at: Timestamp(*at),
                actor_id: "dev".into(),
            })
            .collect();
        let mut event_times = vec![Timestamp(0)];
        event_times.extend(transitions.iter().map(|t| t.at));
        let last = event_times.last().copied().unwrap();
        BugRecord {
            id: id.into(),
            project: "DEMO".into(),
            subproject: "core".into(),
            priority: 1,
            reporter_id: "alice".into(),
            assignee_id: Some("bob".into()),
            created_at: Timestamp(0),
            resolution_status: status.into(),
            last_update_at: last,
            transitions,
            event_times,
        }
    }

    const H: i64 = 3600;

    #[test]
    fn status_filter_keeps_allowed_only() {
        let mut corpus = Vec::new();
        for i in 0..8 {
            corpus.push(bug_with_transitions(&format!("D-{i}"), "Done", &[("Open", "Closed", H)]));
        }
        corpus.push(bug_with_transitions("X-1", "Duplicate", &[("Open", "Closed", H)]));
        corpus.push(bug_with_transitions("X-2", "Unresolved", &[]));
        let allowed = BTreeSet::from(["Done".into(), "Fixed".into()]);
        let (kept, report) = filter_resolution_status(corpus, &allowed);
        assert_eq!(kept.len(), 8);
        assert_eq!(report.removed_by_rule["resolution_status"], 2);
        assert!(report.reconciles());
    }

    #[test]
    fn status_filter_empty_corpus() {
        let allowed = FilterConfig::default().allowed_statuses;
        let (kept, report) = filter_resolution_status(Vec::new(), &allowed);
        assert!(kept.is_empty());
        assert_eq!(report.input_count, 0);
        assert!(report.reconciles());
    }

    #[test]
    fn default_statuses_are_done_and_fixed() {
        let config = FilterConfig::default();
        assert_eq!(
            config.allowed_statuses,
            BTreeSet::from(["Done".to_string(), "Fixed".to_string()])
        );
    }

    #[test]
    fn truncation_drops_reopen_tail() {
        let bug = bug_with_transitions(
            "T-1",
            "Done",
            &[
                ("Open", "Closed", 5 * H),
                ("Closed", "Reopened", 900 * H),
                ("Reopened", "Closed", 910 * H),
            ],
        );
        let bug = truncate_after_closed(bug, "Closed");
        assert_eq!(bug.transitions.len(), 1);
        assert_eq!(bug.transitions[0].at, Timestamp(5 * H));
    }

    #[test]
    fn truncation_is_noop_without_terminal() {
        let bug = bug_with_transitions("T-2", "Done", &[("Open", "In Progress", 5 * H)]);
        let out = truncate_after_closed(bug.clone(), "Closed");
        assert_eq!(out, bug);
        let single = bug_with_transitions("T-3", "Done", &[("Open", "Closed", 5 * H)]);
        let out = truncate_after_closed(single.clone(), "Closed");
        assert_eq!(out, single);
    }

    #[test]
    fn undefined_state_folds_into_predecessor() {
        let spec = WorkflowSpec::builtin("standard").unwrap();
        let bug = bug_with_transitions(
            "U-1",
            "Done",
            &[
                ("Open", "Weird", 10 * H),
                ("Weird", "Closed", 12 * H),
            ],
        );
        let bug = drop_undefined_states(bug, &spec).unwrap();
        assert_eq!(bug.transitions.len(), 1);
        assert_eq!(bug.transitions[0].from_state, "Open");
        assert_eq!(bug.transitions[0].to_state, "Closed");
        assert_eq!(bug.transitions[0].at, Timestamp(12 * H));
    }

    #[test]
    fn consecutive_undefined_states_fold_together() {
        let spec = WorkflowSpec::builtin("standard").unwrap();
        let bug = bug_with_transitions(
            "U-2",
            "Done",
            &[
                ("Open", "Weird", 10 * H),
                ("Weird", "Odd", 12 * H),
                ("Odd", "Closed", 15 * H),
            ],
        );
        let folded = drop_undefined_states(bug.clone(), &spec).unwrap();
        assert_eq!(folded.transitions.len(), 1);
        assert_eq!(folded.transitions[0].at, Timestamp(15 * H));

        // Oracle: repeated single-state removal until fixed point gives the
        // same result as the one-pass fold.
        let mut reference = bug;
        loop {
            let intervals = reference.stage_intervals().unwrap();
            let Some(pos) = intervals
                .iter()
                .position(|iv| !spec.contains_state(&iv.state))
            else {
                break;
            };
            assert!(pos > 0);
            let mut transitions = reference.transitions.clone();
            let removed = transitions.remove(pos - 1);
            if pos - 1 < transitions.len() {
                transitions[pos - 1].from_state = removed.from_state;
            }
            reference.transitions = transitions;
        }
        assert_eq!(reference.transitions, folded.transitions);
    }

    #[test]
    fn undefined_first_interval_is_an_error() {
        let spec = WorkflowSpec::builtin("standard").unwrap();
        let mut bug = bug_with_transitions("U-3", "Done", &[("Limbo", "Closed", H)]);
        bug.transitions[0].from_state = "Limbo".into();
        assert!(matches!(
            drop_undefined_states(bug, &spec),
            Err(FilterError::FirstIntervalUndefined { .. })
        ));
    }

    #[test]
    fn transient_interval_merges_into_predecessor() {
        let bug = bug_with_transitions(
            "M-1",
            "Done",
            &[
                ("Open", "In Progress", 10 * H),
                ("In Progress", "Closed", 10 * H + 60),
            ],
        );
        let merged = merge_transient_states(bug, 300);
        assert_eq!(merged.transitions.len(), 1);
        assert_eq!(merged.transitions[0].from_state, "Open");
        assert_eq!(merged.transitions[0].to_state, "Closed");
        assert_eq!(merged.transitions[0].at, Timestamp(10 * H + 60));
    }

    #[test]
    fn transient_merge_noop_when_all_long() {
        let bug = bug_with_transitions(
            "M-2",
            "Done",
            &[
                ("Open", "In Progress", 10 * H),
                ("In Progress", "Closed", 20 * H),
            ],
        );
        let merged = merge_transient_states(bug.clone(), 300);
        assert_eq!(merged, bug);
    }

    #[test]
    fn transient_merge_preserves_total_duration() {
        let bug = bug_with_transitions(
            "M-3",
            "Done",
            &[
                ("Open", "In Progress", 10 * H),
                ("In Progress", "Resolved", 10 * H + 120),
                ("Resolved", "Closed", 30 * H),
            ],
        );
        let before = bug.transitions.last().unwrap().at;
        let merged = merge_transient_states(bug, 300);
        assert_eq!(merged.transitions.last().unwrap().at, before);
    }

    #[test]
    fn loop_merge_collapses_repeats_in_one_call() {
        let bug = bug_with_transitions(
            "L-1",
            "Done",
            &[
                ("Open", "Open", 5 * H),
                ("Open", "Open", 8 * H),
                ("Open", "Closed", 12 * H),
            ],
        );
        let merged = merge_loops(bug);
        assert_eq!(merged.transitions.len(), 1);
        assert_eq!(merged.transitions[0].from_state, "Open");
        assert_eq!(merged.transitions[0].at, Timestamp(12 * H));
    }

    #[test]
    fn transient_merge_can_create_loop_that_loop_merge_removes() {
        // Open - Hiccup(90 s) - Open - Closed: merging the hiccup leaves an
        // Open -> Open self-transition for the loop rule.
        let bug = bug_with_transitions(
            "L-2",
            "Done",
            &[
                ("Open", "Hiccup", 10 * H),
                ("Hiccup", "Open", 10 * H + 90),
                ("Open", "Closed", 20 * H),
            ],
        );
        let merged = merge_transient_states(bug, 300);
        assert_eq!(merged.transitions.len(), 2);
        assert_eq!(merged.transitions[0].from_state, "Open");
        assert_eq!(merged.transitions[0].to_state, "Open");
        let done = merge_loops(merged);
        assert_eq!(done.transitions.len(), 1);
        assert_eq!(done.transitions[0].at, Timestamp(20 * H));
    }

    #[test]
    fn pipeline_is_idempotent_on_clean_corpus() {
        let spec = WorkflowSpec::builtin("standard").unwrap();
        let config = FilterConfig::default();
        let corpus = vec![
            bug_with_transitions("C-1", "Done", &[("Open", "Closed", 10 * H)]),
            bug_with_transitions(
                "C-2",
                "Fixed",
                &[("Open", "In Progress", 5 * H), ("In Progress", "Closed", 9 * H)],
            ),
        ];
        let (once, report) = apply_standard_pipeline(corpus, &config, &spec).unwrap();
        assert_eq!(report.kept_count, 2);
        assert_eq!(report.merged_loops + report.merged_transient_states, 0);
        let (twice, report2) = apply_standard_pipeline(once.clone(), &config, &spec).unwrap();
        assert_eq!(once, twice);
        assert_eq!(report2.truncated_tails, 0);
    }

    #[test]
    fn tukey_mild_removes_far_outlier() {
        let mut corpus: Vec<BugRecord> = (1..=20)
            .map(|i| {
                bug_with_transitions(&format!("B-{i}"), "Done", &[("Open", "Closed", i * H)])
            })
            .collect();
        corpus.push(bug_with_transitions("B-out", "Done", &[("Open", "Closed", 1000 * H)]));
        let (kept, report) = tukey_outlier_filter(corpus, OutlierMode::Mild, "Closed").unwrap();
        assert_eq!(kept.len(), 20);
        assert!(kept.iter().all(|b| b.id != "B-out"));
        assert_eq!(report.removed_by_rule["tukey_mild"], 1);
    }

    #[test]
    fn tukey_uniform_times_remove_nothing() {
        let corpus: Vec<BugRecord> = (0..10)
            .map(|i| bug_with_transitions(&format!("B-{i}"), "Done", &[("Open", "Closed", 7 * H)]))
            .collect();
        let (kept, _) = tukey_outlier_filter(corpus, OutlierMode::Mild, "Closed").unwrap();
        assert_eq!(kept.len(), 10);
    }

    #[test]
    fn tukey_small_corpus_is_an_error() {
        let corpus = vec![bug_with_transitions("B-1", "Done", &[("Open", "Closed", H)])];
        assert!(matches!(
            tukey_outlier_filter(corpus, OutlierMode::Extreme, "Closed"),
            Err(FilterError::CorpusTooSmall { n: 1 })
        ));
    }

    #[test]
    fn inactivity_gap_detection() {
        let day = 86_400;
        let mut stale = bug_with_transitions("I-1", "Done", &[("Open", "Closed", 40 * day)]);
        stale.event_times = vec![Timestamp(0), Timestamp(2 * day), Timestamp(40 * day)];
        let mut active = bug_with_transitions("I-2", "Done", &[("Open", "Closed", 29 * day)]);
        active.event_times = vec![
            Timestamp(0),
            Timestamp(10 * day),
            Timestamp(20 * day),
            Timestamp(29 * day),
        ];
        let (kept, report) = inactivity_filter(vec![stale, active], 30, "Closed");
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "I-2");
        assert_eq!(report.removed_by_rule["inactivity"], 1);
    }

    #[test]
    fn inactivity_ignores_gaps_after_terminal() {
        let day = 86_400;
        let mut bug = bug_with_transitions("I-3", "Done", &[("Open", "Closed", 5 * day)]);
        // A comment 100 days after closing must not count.
        bug.event_times.push(Timestamp(105 * day));
        bug.last_update_at = Timestamp(105 * day);
        let (kept, _) = inactivity_filter(vec![bug], 30, "Closed");
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn config_defaults_from_toml() {
        let config = FilterConfig::from_profile_toml("workflow = \"onap\"").unwrap();
        assert_eq!(config, FilterConfig::default());
        let config = FilterConfig::from_profile_toml(
            "[filter]\ntransient_threshold_seconds = 60\noutlier_mode = \"mild\"\n",
        )
        .unwrap();
        assert_eq!(config.transient_threshold_seconds, 60);
        assert_eq!(config.outlier_mode, OutlierMode::Mild);
        assert_eq!(config.inactivity_gap_days, 30);
    }
}
