//! Round-trip and interval-telescoping properties of the ingest layer.

use bugflow::ingest::{
    parse_export, to_bug_record, write_export, ChangelogEntry, Conversion, ProjectProfile,
    RawIssueRecord, Timestamp, WorkflowSpec, STATUS_FIELD,
};
use proptest::prelude::*;

fn arb_string() -> impl Strategy<Value = String> {
    // Printable plus some escaping hazards.
    prop_oneof![
        "[a-zA-Z0-9 _.,:-]{0,12}",
        Just("with \"quotes\" and \\ backslash".to_string()),
        Just("newline\nand tab\t".to_string()),
        Just("ünïcode ✓".to_string()),
    ]
}

prop_compose! {
    fn arb_entry()(
        field in prop_oneof![Just(STATUS_FIELD.to_string()), Just("comment".to_string())],
        from in arb_string(),
        to in arb_string(),
        actor in arb_string(),
        gap in 0i64..100_000,
    ) -> (ChangelogEntry, i64) {
        (
            ChangelogEntry {
                field_name: field,
                from_value: from,
                to_value: to,
                at: Timestamp(0),
                actor_id: actor,
            },
            gap,
        )
    }
}

prop_compose! {
    fn arb_record()(
        key in "[A-Z]{2,4}-[0-9]{1,4}",
        issue_type in prop_oneof![Just("Bug".to_string()), Just("Task".to_string())],
        project in arb_string(),
        subproject in arb_string(),
        label in prop_oneof![Just("Highest".to_string()), Just("Low".to_string())],
        reporter in arb_string(),
        assignee in arb_string(),
        created in 1_500_000_000i64..1_700_000_000,
        status in prop_oneof![Just("Done".to_string()), Just("Unresolved".to_string())],
        entries in prop::collection::vec(arb_entry(), 0..6),
        tail_gap in 0i64..100_000,
    ) -> RawIssueRecord {
        let mut at = created;
        let changelog: Vec<ChangelogEntry> = entries
            .into_iter()
            .map(|(mut entry, gap)| {
                at += gap;
                entry.at = Timestamp(at);
                entry
            })
            .collect();
        RawIssueRecord {
            issue_key: key,
            issue_type,
            project,
            subproject,
            priority_label: label,
            reporter_id: reporter,
            assignee_id: assignee,
            created_at: Timestamp(created),
            resolution_status: status,
            last_update_at: Timestamp(at + tail_gap),
            changelog,
        }
    }
}

proptest! {
    #[test]
    fn export_parse_round_trip(records in prop::collection::vec(arb_record(), 0..20)) {
        let mut buf = Vec::new();
        write_export(&records, &mut buf).unwrap();
        let parsed = parse_export(buf.as_slice()).unwrap();
        prop_assert_eq!(parsed, records);
    }
}

proptest! {
    #[test]
    fn bounded_stage_durations_telescope(
        gaps in prop::collection::vec(1i64..1_000_000, 1..8),
        created in 0i64..1_000_000_000,
    ) {
        // A linear walk through numbered states with the given gaps.
        let profile = ProjectProfile::with_default_labels(WorkflowSpec::builtin("onap").unwrap());
        let mut at = created;
        let mut changelog = Vec::new();
        let mut state = "Open".to_string();
        for (i, gap) in gaps.iter().enumerate() {
            at += gap;
            let next = format!("S{i}");
            changelog.push(ChangelogEntry {
                field_name: STATUS_FIELD.into(),
                from_value: state.clone(),
                to_value: next.clone(),
                at: Timestamp(at),
                actor_id: "dev".into(),
            });
            state = next;
        }
        let raw = RawIssueRecord {
            issue_key: "RT-1".into(),
            issue_type: "Bug".into(),
            project: "P".into(),
            subproject: String::new(),
            priority_label: "Highest".into(),
            reporter_id: "r".into(),
            assignee_id: String::new(),
            created_at: Timestamp(created),
            resolution_status: "Done".into(),
            last_update_at: Timestamp(at),
            changelog,
        };
        let bug = match to_bug_record(&raw, &profile).unwrap() {
            Conversion::Kept(bug) => bug,
            Conversion::Skipped(reason) => return Err(TestCaseError::fail(reason.to_string())),
        };
        let intervals = bug.stage_intervals().unwrap();
        // Consecutive intervals abut exactly.
        for pair in intervals.windows(2) {
            prop_assert_eq!(pair[0].exited_at.unwrap(), pair[1].entered_at);
        }
        let bounded_sum: f64 = intervals
            .iter()
            .filter_map(|iv| iv.duration_hours())
            .sum();
        let expected = (at - created) as f64 / 3600.0;
        prop_assert!((bounded_sum - expected).abs() < 1e-9);
        prop_assert!(intervals.last().unwrap().exited_at.is_none());
    }
}
