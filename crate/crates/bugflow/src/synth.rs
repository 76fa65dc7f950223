//! Synthetic corpora with known ground truth.
//!
//! [`generate_corpus`] samples bug lifecycles from a fully specified model
//! (routing rows, per-transition sojourn distributions, per-entity speed
//! multipliers) and returns both the records and a ground-truth table.
//! [`inject_noise`] then plants exactly the artefacts the cleaning rules
//! target — transient interludes, undefined states, loops, and post-terminal
//! reopen tails — in a way the standard pipeline can undo exactly, which is
//! what makes round-trip tests possible.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{
    BugRecord, ChangelogEntry, RawIssueRecord, StateTransition, Timestamp, WorkflowSpec,
    STATUS_FIELD,
};

/// Creation time of the first synthetic bug: 2020-01-01T00:00:00Z. Subsequent
/// bugs are created an hour apart.
pub const CREATION_BASE: i64 = 1_577_836_800;

/// A reporter, assignee, or subproject with a sojourn speed multiplier
/// (values below 1 make bugs faster, above 1 slower).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub speed: f64,
}

/// Sojourn distribution for one workflow transition, in hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "lowercase")]
pub enum SojournDist {
    Exponential { rate_per_hour: f64 },
    Lognormal { mu: f64, sigma: f64 },
}

impl SojournDist {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            SojournDist::Exponential { rate_per_hour } => {
                rng.sample(rand_distr::Exp::new(*rate_per_hour).expect("validated rate"))
            }
            SojournDist::Lognormal { mu, sigma } => {
                rng.sample(rand_distr::LogNormal::new(*mu, *sigma).expect("validated sigma"))
            }
        }
    }

    pub fn mean_hours(&self) -> f64 {
        match self {
            SojournDist::Exponential { rate_per_hour } => 1.0 / rate_per_hour,
            SojournDist::Lognormal { mu, sigma } => (mu + sigma * sigma / 2.0).exp(),
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            SojournDist::Exponential { rate_per_hour } => {
                if !rate_per_hour.is_finite() || *rate_per_hour <= 0.0 {
                    return Err(format!("exponential rate {rate_per_hour} must be positive"));
                }
            }
            SojournDist::Lognormal { mu, sigma } => {
                if !mu.is_finite() || !sigma.is_finite() || *sigma < 0.0 {
                    return Err(format!("lognormal parameters ({mu}, {sigma}) invalid"));
                }
            }
        }
        Ok(())
    }
}

/// Full specification of a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub workflow: WorkflowSpec,
    /// Per-state branching rows; the terminal state has no row.
    pub routing: BTreeMap<String, Vec<(String, f64)>>,
    /// Sojourn distribution per (from, to) transition.
    pub sojourn: BTreeMap<(String, String), SojournDist>,
    pub reporters: Vec<Entity>,
    pub assignees: Vec<Entity>,
    pub subprojects: Vec<Entity>,
    /// Probability that the reporter assigns the bug to themselves.
    pub self_assign_prob: f64,
    /// Speed multiplier replacing the assignee's when self-assigned.
    pub self_assign_speed: f64,
    /// Probability of priorities 1..=5.
    pub priority_mix: [f64; 5],
    /// Resolution statuses and their probabilities; defaults to always "Done".
    pub status_mix: Vec<(String, f64)>,
    pub n_bugs: usize,
    pub seed: u64,
    /// Lower clamp on sampled sojourns. A value above the pipeline's
    /// transient threshold makes the corpus a fixed point of the cleaning
    /// rules, which exact round-trip tests require.
    pub min_sojourn_hours: f64,
    pub project: String,
}

impl GeneratorSpec {
    /// A spec with single neutral entities and an always-"Done" status; the
    /// caller supplies workflow, routing, sojourns, size, and seed.
    pub fn new(
        workflow: WorkflowSpec,
        routing: BTreeMap<String, Vec<(String, f64)>>,
        sojourn: BTreeMap<(String, String), SojournDist>,
        n_bugs: usize,
        seed: u64,
    ) -> GeneratorSpec {
        GeneratorSpec {
            workflow,
            routing,
            sojourn,
            reporters: vec![Entity {
                id: "reporter-0".into(),
                speed: 1.0,
            }],
            assignees: vec![Entity {
                id: "assignee-0".into(),
                speed: 1.0,
            }],
            subprojects: vec![Entity {
                id: "core".into(),
                speed: 1.0,
            }],
            self_assign_prob: 0.0,
            self_assign_speed: 1.0,
            priority_mix: [1.0, 0.0, 0.0, 0.0, 0.0],
            status_mix: vec![("Done".to_string(), 1.0)],
            n_bugs,
            seed,
            min_sojourn_hours: 0.0,
            project: "SYNTH".to_string(),
        }
    }

    /// Loads a spec from its TOML form (workflow by built-in name, sojourn
    /// keys written as `"From->To"`).
    pub fn from_toml_str(text: &str) -> Result<GeneratorSpec, SynthError> {
        #[derive(Deserialize)]
        struct File {
            workflow: String,
            #[serde(default)]
            project: Option<String>,
            n_bugs: usize,
            seed: u64,
            #[serde(default)]
            self_assign_prob: f64,
            #[serde(default)]
            self_assign_speed: Option<f64>,
            #[serde(default)]
            priority_mix: Option<Vec<f64>>,
            #[serde(default)]
            status_mix: Option<Vec<(String, f64)>>,
            #[serde(default)]
            min_sojourn_hours: Option<f64>,
            reporters: Vec<Entity>,
            assignees: Vec<Entity>,
            #[serde(default)]
            subprojects: Option<Vec<Entity>>,
            routing: BTreeMap<String, BTreeMap<String, f64>>,
            sojourn: BTreeMap<String, SojournDist>,
        }
        let file: File =
            toml::from_str(text).map_err(|e| SynthError::Config(e.to_string()))?;
        let workflow = WorkflowSpec::builtin(&file.workflow)
            .map_err(|e| SynthError::Config(e.to_string()))?;
        let mut sojourn = BTreeMap::new();
        for (key, dist) in file.sojourn {
            let (from, to) = key
                .split_once("->")
                .ok_or_else(|| SynthError::Config(format!("sojourn key {key:?} is not From->To")))?;
            sojourn.insert((from.trim().to_string(), to.trim().to_string()), dist);
        }
        let mut priority_mix = [0.0; 5];
        match file.priority_mix {
            Some(mix) => {
                if mix.len() != 5 {
                    return Err(SynthError::Config(
                        "priority_mix needs exactly 5 entries".into(),
                    ));
                }
                priority_mix.copy_from_slice(&mix);
            }
            None => priority_mix[0] = 1.0,
        }
        let spec = GeneratorSpec {
            workflow,
            routing: file
                .routing
                .into_iter()
                .map(|(from, row)| (from, row.into_iter().collect()))
                .collect(),
            sojourn,
            reporters: file.reporters,
            assignees: file.assignees,
            subprojects: file.subprojects.unwrap_or_else(|| {
                vec![Entity {
                    id: "core".into(),
                    speed: 1.0,
                }]
            }),
            self_assign_prob: file.self_assign_prob,
            self_assign_speed: file.self_assign_speed.unwrap_or(1.0),
            priority_mix,
            status_mix: file
                .status_mix
                .unwrap_or_else(|| vec![("Done".to_string(), 1.0)]),
            n_bugs: file.n_bugs,
            seed: file.seed,
            min_sojourn_hours: file.min_sojourn_hours.unwrap_or(0.0),
            project: file.project.unwrap_or_else(|| "SYNTH".to_string()),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::Config(msg));
        if self.n_bugs == 0 {
            return bad("n_bugs must be positive".into());
        }
        if self.reporters.is_empty() || self.assignees.is_empty() || self.subprojects.is_empty() {
            return bad("reporters, assignees, and subprojects must be non-empty".into());
        }
        for entity in self
            .reporters
            .iter()
            .chain(&self.assignees)
            .chain(&self.subprojects)
        {
            if !entity.speed.is_finite() || entity.speed <= 0.0 {
                return bad(format!("entity {} has non-positive speed", entity.id));
            }
        }
        if !(0.0..=1.0).contains(&self.self_assign_prob) {
            return bad("self_assign_prob must lie in [0, 1]".into());
        }
        if !self.self_assign_speed.is_finite() || self.self_assign_speed <= 0.0 {
            return bad("self_assign_speed must be positive".into());
        }
        let mix_sum: f64 = self.priority_mix.iter().sum();
        if self.priority_mix.iter().any(|p| *p < 0.0) || (mix_sum - 1.0).abs() > 1e-9 {
            return bad(format!("priority_mix sums to {mix_sum}, expected 1"));
        }
        let status_sum: f64 = self.status_mix.iter().map(|(_, p)| p).sum();
        if self.status_mix.is_empty() || (status_sum - 1.0).abs() > 1e-9 {
            return bad(format!("status_mix sums to {status_sum}, expected 1"));
        }
        if self.min_sojourn_hours < 0.0 {
            return bad("min_sojourn_hours must be non-negative".into());
        }
        if self.routing.contains_key(&self.workflow.terminal) {
            return bad("terminal state must not have a routing row".into());
        }
        for (from, row) in &self.routing {
            if !self.workflow.contains_state(from) {
                return bad(format!("routing source {from:?} is not a workflow state"));
            }
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return bad(format!("routing row of {from:?} sums to {sum}"));
            }
            for (to, p) in row {
                if *p < 0.0 {
                    return bad(format!("routing {from:?} -> {to:?} has negative probability"));
                }
                if to == from {
                    return bad(format!("routing {from:?} -> {to:?} is a self-loop"));
                }
                if !self.workflow.contains_state(to) {
                    return bad(format!("routing target {to:?} is not a workflow state"));
                }
                if *p > 0.0 && !self.sojourn.contains_key(&(from.clone(), to.clone())) {
                    return bad(format!("no sojourn distribution for {from:?} -> {to:?}"));
                }
            }
        }
        for ((from, to), dist) in &self.sojourn {
            dist.validate()
                .map_err(|e| SynthError::Config(format!("sojourn {from:?} -> {to:?}: {e}")))?;
        }
        // Terminal must be reachable from the initial state over positive edges.
        let mut seen = std::collections::BTreeSet::from([self.workflow.initial.clone()]);
        let mut stack = vec![self.workflow.initial.clone()];
        while let Some(state) = stack.pop() {
            if let Some(row) = self.routing.get(&state) {
                for (to, p) in row {
                    if *p > 0.0 && seen.insert(to.clone()) {
                        stack.push(to.clone());
                    }
                }
            }
        }
        if !seen.contains(&self.workflow.terminal) {
            return Err(SynthError::UnreachableTerminal {
                terminal: self.workflow.terminal.clone(),
            });
        }
        Ok(())
    }
}

/// Ground truth for one generated bug.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub bug_id: String,
    pub path: Vec<String>,
    pub priority: u8,
    pub reporter_id: String,
    pub assignee_id: String,
    pub subproject: String,
    pub speed_factor: f64,
    pub sojourn_hours: Vec<f64>,
    pub resolution_hours: f64,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator spec: {0}")]
    Config(String),
    #[error("terminal state {terminal:?} is unreachable from the initial state")]
    UnreachableTerminal { terminal: String },
    #[error("bug walk exceeded {max} steps without reaching the terminal state")]
    WalkTooLong { max: usize },
}

const MAX_WALK_STEPS: usize = 10_000;

fn pick_weighted<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Generates the corpus and its ground-truth table. Deterministic for a fixed
/// seed: bug `k` draws from stream `k` of the seeded generator.
pub fn generate_corpus(spec: &GeneratorSpec) -> Result<(Vec<BugRecord>, Vec<TruthRow>), SynthError> {
    spec.validate()?;
    let mut corpus = Vec::with_capacity(spec.n_bugs);
    let mut truth = Vec::with_capacity(spec.n_bugs);
    let status_weights: Vec<f64> = spec.status_mix.iter().map(|(_, p)| *p).collect();
    for k in 0..spec.n_bugs {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(k as u64);
        let created = Timestamp(CREATION_BASE + k as i64 * 3600);
        let id = format!("{}-{}", spec.project, k + 1);

        let priority = pick_weighted(&mut rng, &spec.priority_mix) as u8 + 1;
        let status = spec.status_mix[pick_weighted(&mut rng, &status_weights)]
            .0
            .clone();
        let reporter = &spec.reporters[rng.gen_range(0..spec.reporters.len())];
        let subproject = &spec.subprojects[rng.gen_range(0..spec.subprojects.len())];
        let self_assigned = rng.gen::<f64>() < spec.self_assign_prob;
        let (assignee_id, assignee_speed) = if self_assigned {
            (reporter.id.clone(), spec.self_assign_speed)
        } else {
            let assignee = &spec.assignees[rng.gen_range(0..spec.assignees.len())];
            (assignee.id.clone(), assignee.speed)
        };
        let speed = reporter.speed * assignee_speed * subproject.speed;

        let mut state = spec.workflow.initial.clone();
        let mut at = created;
        let mut path = vec![state.clone()];
        let mut transitions = Vec::new();
        let mut sojourn_hours = Vec::new();
        let mut steps = 0usize;
        while state != spec.workflow.terminal {
            steps += 1;
            if steps > MAX_WALK_STEPS {
                return Err(SynthError::WalkTooLong {
                    max: MAX_WALK_STEPS,
                });
            }
            let row = &spec.routing[&state];
            let weights: Vec<f64> = row.iter().map(|(_, p)| *p).collect();
            let next = row[pick_weighted(&mut rng, &weights)].0.clone();
            let dist = &spec.sojourn[&(state.clone(), next.clone())];
            let hours = (dist.sample(&mut rng) * speed).max(spec.min_sojourn_hours);
            let seconds = (hours * 3600.0).round().max(0.0) as i64;
            at = at.plus_seconds(seconds);
            sojourn_hours.push(seconds as f64 / 3600.0);
            transitions.push(StateTransition {
                from_state: state.clone(),
                to_state: next.clone(),
                at,
                actor_id: assignee_id.clone(),
            });
            path.push(next.clone());
            state = next;
        }

        let mut event_times = vec![created];
        event_times.extend(transitions.iter().map(|t| t.at));
        truth.push(TruthRow {
            bug_id: id.clone(),
            path,
            priority,
            reporter_id: reporter.id.clone(),
            assignee_id: assignee_id.clone(),
            subproject: subproject.id.clone(),
            speed_factor: speed,
            sojourn_hours,
            resolution_hours: at.hours_since(created),
        });
        corpus.push(BugRecord {
            id,
            project: spec.project.clone(),
            subproject: subproject.id.clone(),
            priority,
            reporter_id: reporter.id.clone(),
            assignee_id: Some(assignee_id),
            created_at: created,
            resolution_status: status,
            last_update_at: at,
            transitions,
            event_times,
        });
    }
    Ok((corpus, truth))
}

/// Renders generated bugs in the raw export schema so they can travel through
/// the regular ingest path. Priority labels are written as `P1`..`P5`.
pub fn to_raw_records(corpus: &[BugRecord]) -> Vec<RawIssueRecord> {
    corpus
        .iter()
        .map(|bug| RawIssueRecord {
            issue_key: bug.id.clone(),
            issue_type: "Bug".to_string(),
            project: bug.project.clone(),
            subproject: bug.subproject.clone(),
            priority_label: format!("P{}", bug.priority),
            reporter_id: bug.reporter_id.clone(),
            assignee_id: bug.assignee_id.clone().unwrap_or_default(),
            created_at: bug.created_at,
            resolution_status: bug.resolution_status.clone(),
            last_update_at: bug.last_update_at,
            changelog: bug
                .transitions
                .iter()
                .map(|t| ChangelogEntry {
                    field_name: STATUS_FIELD.to_string(),
                    from_value: t.from_state.clone(),
                    to_value: t.to_state.clone(),
                    at: t.at,
                    actor_id: t.actor_id.clone(),
                })
                .collect(),
        })
        .collect()
}

/// What noise to plant and how. Durations are chosen relative to
/// `pipeline_threshold_seconds` so each artefact is cleaned by exactly one
/// rule: transient interludes sit below the threshold, undefined interludes
/// above it, and loop halves keep at least a full threshold on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub transient_fraction: f64,
    pub undefined_fraction: f64,
    pub loop_fraction: f64,
    pub reopen_fraction: f64,
    pub transient_duration_seconds: i64,
    pub undefined_duration_seconds: i64,
    pub undefined_state: String,
    pub pipeline_threshold_seconds: i64,
    pub reopen_delay_hours: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            transient_fraction: 0.0,
            undefined_fraction: 0.0,
            loop_fraction: 0.0,
            reopen_fraction: 0.0,
            transient_duration_seconds: 60,
            undefined_duration_seconds: 7_200,
            undefined_state: "Ghost".to_string(),
            pipeline_threshold_seconds: 300,
            reopen_delay_hours: 900.0,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn from_toml_str(text: &str) -> Result<NoiseSpec, SynthError> {
        toml::from_str(text).map_err(|e| SynthError::Config(e.to_string()))
    }
}

/// Which artefact was planted in a bug.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseClass {
    Transient,
    Undefined,
    Loop,
    Reopen,
}

/// Exactly what [`inject_noise`] did.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InjectionLedger {
    pub transients: usize,
    pub undefined: usize,
    pub loops: usize,
    pub reopens: usize,
    pub per_bug: Vec<(String, NoiseClass)>,
}

/// Boundaries (transition indices) where an interlude of `duration` seconds
/// can be inserted without disturbing any other cleaning rule.
fn insertable_boundaries(bug: &BugRecord, duration: i64, threshold: i64) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..bug.transitions.len() {
        let start = if i == 0 {
            bug.created_at.0
        } else {
            bug.transitions[i - 1].at.0
        };
        let interval = bug.transitions[i].at.0 - start;
        // The shrunken predecessor must stay positive, and — unless it is the
        // exempt first interval — at or above the transient threshold.
        let floor = if i == 0 { 1 } else { threshold };
        if interval - duration >= floor {
            out.push(i);
        }
    }
    out
}

fn insert_interlude(
    bug: &mut BugRecord,
    boundary: usize,
    duration: i64,
    interlude_state: String,
) {
    let exit = bug.transitions[boundary].at;
    let enter = exit.plus_seconds(-duration);
    let actor = bug.transitions[boundary].actor_id.clone();
    let from = bug.transitions[boundary].from_state.clone();
    bug.transitions[boundary].from_state = interlude_state.clone();
    bug.transitions.insert(
        boundary,
        StateTransition {
            from_state: from,
            to_state: interlude_state,
            at: enter,
            actor_id: actor,
        },
    );
    bug.event_times.push(enter);
    bug.event_times.sort();
}

/// Plants the configured fractions of noise, class by class, into disjoint
/// sets of eligible bugs. Returns the noisy corpus plus a ledger listing every
/// planted artefact; cleaning the result reconciles against that ledger.
pub fn inject_noise(
    corpus: Vec<BugRecord>,
    noise: &NoiseSpec,
    workflow: &WorkflowSpec,
) -> (Vec<BugRecord>, InjectionLedger) {
    let mut corpus = corpus;
    let n = corpus.len();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut used = vec![false; n];
    let mut ledger = InjectionLedger::default();
    let threshold = noise.pipeline_threshold_seconds;

    let quotas = [
        (NoiseClass::Transient, (noise.transient_fraction * n as f64).floor() as usize),
        (NoiseClass::Undefined, (noise.undefined_fraction * n as f64).floor() as usize),
        (NoiseClass::Loop, (noise.loop_fraction * n as f64).floor() as usize),
        (NoiseClass::Reopen, (noise.reopen_fraction * n as f64).floor() as usize),
    ];
    for (class, quota) in quotas {
        let mut planted = 0usize;
        for &idx in &order {
            if planted == quota {
                break;
            }
            if used[idx] {
                continue;
            }
            let bug = &mut corpus[idx];
            let applied = match class {
                NoiseClass::Transient => {
                    let duration = noise.transient_duration_seconds;
                    let boundaries = insertable_boundaries(bug, duration, threshold);
                    if let Some(&boundary) = boundaries.first() {
                        // Any defined, non-terminal state distinct from both
                        // neighbours keeps the fold unambiguous.
                        let prev = bug.transitions[boundary].from_state.clone();
                        let next = bug.transitions[boundary].to_state.clone();
                        let candidates: Vec<&String> = workflow
                            .states
                            .iter()
                            .filter(|s| {
                                **s != prev && **s != next && **s != workflow.terminal
                            })
                            .collect();
                        if candidates.is_empty() {
                            false
                        } else {
                            let state = candidates[rng.gen_range(0..candidates.len())].clone();
                            insert_interlude(bug, boundary, duration, state);
                            ledger.transients += 1;
                            true
                        }
                    } else {
                        false
                    }
                }
                NoiseClass::Undefined => {
                    let duration = noise.undefined_duration_seconds;
                    let boundaries = insertable_boundaries(bug, duration, threshold);
                    if let Some(&boundary) = boundaries.first() {
                        insert_interlude(bug, boundary, duration, noise.undefined_state.clone());
                        ledger.undefined += 1;
                        true
                    } else {
                        false
                    }
                }
                NoiseClass::Loop => {
                    // Split a bounded interval whose halves both clear the
                    // transient threshold.
                    let mut chosen = None;
                    for i in 0..bug.transitions.len() {
                        let start = if i == 0 {
                            bug.created_at.0
                        } else {
                            bug.transitions[i - 1].at.0
                        };
                        let interval = bug.transitions[i].at.0 - start;
                        if interval >= 2 * threshold + 2 {
                            chosen = Some((i, start + interval / 2));
                            break;
                        }
                    }
                    if let Some((i, mid)) = chosen {
                        let state = bug.transitions[i].from_state.clone();
                        let actor = bug.transitions[i].actor_id.clone();
                        bug.transitions.insert(
                            i,
                            StateTransition {
                                from_state: state.clone(),
                                to_state: state,
                                at: Timestamp(mid),
                                actor_id: actor,
                            },
                        );
                        bug.event_times.push(Timestamp(mid));
                        bug.event_times.sort();
                        ledger.loops += 1;
                        true
                    } else {
                        false
                    }
                }
                NoiseClass::Reopen => {
                    if bug.final_state() == workflow.terminal {
                        let last = bug.transitions.last().expect("terminal implies transitions");
                        let actor = last.actor_id.clone();
                        let reopen_at =
                            last.at
                                .plus_seconds((noise.reopen_delay_hours * 3600.0) as i64);
                        let reclose_at = reopen_at.plus_seconds(36_000);
                        bug.transitions.push(StateTransition {
                            from_state: workflow.terminal.clone(),
                            to_state: "Reopened".to_string(),
                            at: reopen_at,
                            actor_id: actor.clone(),
                        });
                        bug.transitions.push(StateTransition {
                            from_state: "Reopened".to_string(),
                            to_state: workflow.terminal.clone(),
                            at: reclose_at,
                            actor_id: actor,
                        });
                        bug.event_times.push(reopen_at);
                        bug.event_times.push(reclose_at);
                        bug.last_update_at = reclose_at;
                        ledger.reopens += 1;
                        true
                    } else {
                        false
                    }
                }
            };
            if applied {
                used[idx] = true;
                ledger.per_bug.push((corpus[idx].id.clone(), class));
                planted += 1;
            }
        }
    }
    (corpus, ledger)
}
