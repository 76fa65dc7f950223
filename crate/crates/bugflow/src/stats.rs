//! Descriptive analytics over cleaned corpora: resolution-status shares,
//! common flows, per-transition sojourn statistics, reporter/assignee impact,
//! self-assignment comparison, and state-occupancy curves.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::BugRecord;
use crate::numeric;

/// Sojourn summary for one transition: mean and median hours spent in the
/// from-state immediately before that transition, and how often it occurred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationStat {
    pub mean_hours: f64,
    pub median_hours: f64,
    pub count: usize,
}

/// One resolution path and how much of the corpus followed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCount {
    pub path: Vec<String>,
    pub count: usize,
    pub fraction: f64,
}

/// Per-entity resolution summary: for each priority, the number of resolved
/// bugs and their median resolution hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityStat {
    pub entity_id: String,
    pub per_priority: BTreeMap<u8, (usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityImpact {
    pub entities: Vec<EntityStat>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Reporter,
    Assignee,
}

impl std::str::FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reporter" => Ok(Role::Reporter),
            "assignee" => Ok(Role::Assignee),
            other => Err(format!("unknown role {other:?} (reporter, assignee)")),
        }
    }
}

/// Resolution-status percentages per priority.
#[derive(Debug, Clone, PartialEq)]
pub struct StatusTable {
    /// (priority, status) -> percentage of that priority's bugs.
    pub rows: BTreeMap<(u8, String), f64>,
    pub warnings: Vec<String>,
}

/// Self-assigned vs other-assigned per priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AssignmentGroup {
    SelfAssigned,
    Other,
}

impl AssignmentGroup {
    pub fn label(self) -> &'static str {
        match self {
            AssignmentGroup::SelfAssigned => "self",
            AssignmentGroup::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfAssignmentComparison {
    /// priority -> group -> (count, median resolution hours).
    pub per_priority: BTreeMap<u8, BTreeMap<AssignmentGroup, (usize, f64)>>,
    pub warnings: Vec<String>,
}

/// Fraction of the corpus in each state over a shared time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyCurve {
    pub grid_hours: Vec<f64>,
    /// state -> fractions aligned with `grid_hours`.
    pub per_state_fraction: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("bug {bug_id} never reached terminal state {terminal:?}")]
    NotResolved { bug_id: String, terminal: String },
    #[error("history of bug {bug_id} is discontinuous")]
    BadHistory { bug_id: String },
}

/// Hours from creation to the first entry into `terminal`.
pub fn resolution_time(bug: &BugRecord, terminal: &str) -> Result<f64, StatsError> {
    bug.first_terminal_entry(terminal)
        .map(|at| at.hours_since(bug.created_at))
        .ok_or_else(|| StatsError::NotResolved {
            bug_id: bug.id.clone(),
            terminal: terminal.to_string(),
        })
}

/// Percentage of each resolution status within each requested priority.
/// Priorities with no bugs are omitted and noted in `warnings`.
pub fn resolution_status_table(corpus: &[BugRecord], priorities: &BTreeSet<u8>) -> StatusTable {
    let mut rows = BTreeMap::new();
    let mut warnings = Vec::new();
    for &priority in priorities {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut total = 0usize;
        for bug in corpus.iter().filter(|b| b.priority == priority) {
            *counts.entry(bug.resolution_status.as_str()).or_default() += 1;
            total += 1;
        }
        if total == 0 {
            warnings.push(format!("no bugs with priority {priority}"));
            continue;
        }
        for (status, count) in counts {
            rows.insert(
                (priority, status.to_string()),
                100.0 * count as f64 / total as f64,
            );
        }
    }
    StatusTable { rows, warnings }
}

/// Distinct resolution paths (initial state followed by each to-state),
/// descending by count, ties broken lexicographically by path.
pub fn path_frequencies(corpus: &[BugRecord]) -> Vec<PathCount> {
    let mut counts: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    for bug in corpus {
        let mut path = Vec::with_capacity(bug.transitions.len() + 1);
        path.push(
            bug.transitions
                .first()
                .map(|t| t.from_state.clone())
                .unwrap_or_else(|| crate::ingest::DEFAULT_INITIAL_STATE.to_string()),
        );
        path.extend(bug.transitions.iter().map(|t| t.to_state.clone()));
        *counts.entry(path).or_default() += 1;
    }
    let total: usize = counts.values().sum();
    let mut out: Vec<PathCount> = counts
        .into_iter()
        .map(|(path, count)| PathCount {
            path,
            count,
            fraction: if total == 0 {
                0.0
            } else {
                count as f64 / total as f64
            },
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.path.cmp(&b.path)));
    out
}

/// For every observed transition (from, to): the count plus the mean and
/// median sojourn in `from` immediately preceding that transition.
pub fn transition_duration_stats(
    corpus: &[BugRecord],
) -> BTreeMap<(String, String), DurationStat> {
    let mut sojourns: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for bug in corpus {
        let mut entered = bug.created_at;
        for t in &bug.transitions {
            let hours = t.at.hours_since(entered);
            sojourns
                .entry((t.from_state.clone(), t.to_state.clone()))
                .or_default()
                .push(hours);
            entered = t.at;
        }
    }
    sojourns
        .into_iter()
        .map(|(key, mut hours)| {
            hours.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let stat = DurationStat {
                mean_hours: numeric::mean(&hours),
                median_hours: numeric::median_sorted(&hours),
                count: hours.len(),
            };
            (key, stat)
        })
        .collect()
}

fn entity_of<'a>(bug: &'a BugRecord, role: Role) -> Option<&'a str> {
    match role {
        Role::Reporter => Some(bug.reporter_id.as_str()),
        Role::Assignee => bug.assignee_id.as_deref(),
    }
}

/// The `top_n` entities with the most resolved bugs in `role`, ordered
/// ascending by their median resolution time for `order_priority` bugs.
/// Entities without bugs of that priority sort last; all ties break by id.
pub fn entity_impact(
    corpus: &[BugRecord],
    role: Role,
    top_n: usize,
    order_priority: u8,
    terminal: &str,
) -> EntityImpact {
    // entity -> priority -> resolution hours.
    let mut hours: BTreeMap<&str, BTreeMap<u8, Vec<f64>>> = BTreeMap::new();
    for bug in corpus {
        let Some(entity) = entity_of(bug, role) else {
            continue;
        };
        let Ok(t) = resolution_time(bug, terminal) else {
            continue;
        };
        hours
            .entry(entity)
            .or_default()
            .entry(bug.priority)
            .or_default()
            .push(t);
    }
    let mut warnings = Vec::new();
    if hours.len() < top_n {
        warnings.push(format!(
            "requested top {top_n} entities but only {} have resolved bugs",
            hours.len()
        ));
    }
    let mut by_volume: Vec<(&str, usize)> = hours
        .iter()
        .map(|(entity, per_priority)| {
            let total: usize = per_priority.values().map(Vec::len).sum();
            (*entity, total)
        })
        .collect();
    by_volume.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    by_volume.truncate(top_n);

    let mut entities: Vec<EntityStat> = by_volume
        .into_iter()
        .map(|(entity, _)| EntityStat {
            entity_id: entity.to_string(),
            per_priority: hours[entity]
                .iter()
                .map(|(&priority, times)| (priority, (times.len(), numeric::median(times))))
                .collect(),
        })
        .collect();
    entities.sort_by(|a, b| {
        let key = |e: &EntityStat| {
            e.per_priority
                .get(&order_priority)
                .map(|&(_, median)| median)
                .unwrap_or(f64::INFINITY)
        };
        key(a)
            .partial_cmp(&key(b))
            .unwrap()
            .then_with(|| a.entity_id.cmp(&b.entity_id))
    });
    EntityImpact { entities, warnings }
}

/// Median resolution time of self-assigned bugs (reporter is the assignee)
/// versus bugs assigned to someone else, per priority. Unassigned bugs are
/// excluded. Empty groups are omitted with a warning.
pub fn self_assignment_comparison(
    corpus: &[BugRecord],
    terminal: &str,
) -> SelfAssignmentComparison {
    let mut hours: BTreeMap<u8, BTreeMap<AssignmentGroup, Vec<f64>>> = BTreeMap::new();
    for bug in corpus {
        let Some(assignee) = bug.assignee_id.as_deref() else {
            continue;
        };
        let Ok(t) = resolution_time(bug, terminal) else {
            continue;
        };
        let group = if assignee == bug.reporter_id {
            AssignmentGroup::SelfAssigned
        } else {
            AssignmentGroup::Other
        };
        hours
            .entry(bug.priority)
            .or_default()
            .entry(group)
            .or_default()
            .push(t);
    }
    let mut warnings = Vec::new();
    let mut per_priority = BTreeMap::new();
    for (priority, groups) in hours {
        for group in [AssignmentGroup::SelfAssigned, AssignmentGroup::Other] {
            if !groups.contains_key(&group) {
                warnings.push(format!(
                    "priority {priority}: no bugs in group {:?}",
                    group.label()
                ));
            }
        }
        per_priority.insert(
            priority,
            groups
                .into_iter()
                .map(|(group, times)| (group, (times.len(), numeric::median(&times))))
                .collect(),
        );
    }
    SelfAssignmentComparison {
        per_priority,
        warnings,
    }
}

/// The default occupancy grid: t = 0 plus 200 logarithmically spaced points
/// from 1 hour to 10,000 hours.
pub fn default_occupancy_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    let points = 200usize;
    for k in 0..points {
        let exponent = 4.0 * k as f64 / (points - 1) as f64;
        grid.push(10f64.powf(exponent));
    }
    grid
}

/// Fraction of bugs in each state at each grid offset (hours after each bug's
/// creation). The terminal state is held forever once entered; other final
/// states persist through their open-ended interval.
pub fn occupancy_curve(
    corpus: &[BugRecord],
    grid_hours: &[f64],
    terminal: &str,
) -> Result<OccupancyCurve, StatsError> {
    let mut states: BTreeSet<String> = BTreeSet::new();
    states.insert(terminal.to_string());
    let mut timelines = Vec::with_capacity(corpus.len());
    for bug in corpus {
        let intervals = bug.stage_intervals().map_err(|_| StatsError::BadHistory {
            bug_id: bug.id.clone(),
        })?;
        let terminal_entry = bug
            .first_terminal_entry(terminal)
            .map(|at| at.hours_since(bug.created_at));
        let timeline: Vec<(f64, String)> = intervals
            .into_iter()
            .map(|iv| (iv.entered_at.hours_since(bug.created_at), iv.state))
            .collect();
        for (_, state) in &timeline {
            states.insert(state.clone());
        }
        timelines.push((timeline, terminal_entry));
    }
    let index: BTreeMap<&str, usize> = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut counts = vec![vec![0usize; grid_hours.len()]; states.len()];
    for (timeline, terminal_entry) in &timelines {
        let mut segment = 0usize;
        for (gi, &t) in grid_hours.iter().enumerate() {
            let state = if terminal_entry.is_some_and(|entry| entry <= t) {
                terminal
            } else {
                while segment + 1 < timeline.len() && timeline[segment + 1].0 <= t {
                    segment += 1;
                }
                timeline[segment].1.as_str()
            };
            counts[index[state]][gi] += 1;
        }
    }
    let n = corpus.len() as f64;
    let per_state_fraction = states
        .iter()
        .map(|state| {
            let row = counts[index[state.as_str()]]
                .iter()
                .map(|&c| if corpus.is_empty() { 0.0 } else { c as f64 / n })
                .collect();
            (state.clone(), row)
        })
        .collect();
    Ok(OccupancyCurve {
        grid_hours: grid_hours.to_vec(),
        per_state_fraction,
    })
}
