//! Mining toolkit for issue-tracker bug records.
//!
//! The crate covers the full path from raw tracker exports to resolution-time
//! models:
//!
//! * [`ingest`] — parse line-delimited exports into validated [`ingest::BugRecord`]s,
//!   normalise priorities, and extract per-state sojourn intervals.
//! * [`filter`] — the cleaning rules (resolution-status filter, absorbing-state
//!   truncation, undefined-state folding, transient-state merging, loop merging)
//!   plus Tukey-fence and inactivity prefilters.
//! * [`stats`] — descriptive analytics: status tables, common flows, transition
//!   duration statistics, reporter/assignee impact, and state-occupancy curves.
//! * [`ctmc`] — the dual-model continuous-time Markov chain built from transition
//!   statistics, its generator matrix, uniformization-based transient solution,
//!   the analytic resolution-time CDF, and a Monte Carlo cross-check.
//! * [`predict`] — feature encoding, fast/slow labelling, kNN and naive-Bayes
//!   baselines, two feed-forward networks, and the repeated 80/20 evaluation
//!   protocol.
//! * [`synth`] — a ground-truth corpus generator and noise injector used as the
//!   oracle for recovery and round-trip tests.

pub mod ctmc;
pub mod filter;
pub mod ingest;
pub mod numeric;
pub mod predict;
pub mod stats;
pub mod synth;
