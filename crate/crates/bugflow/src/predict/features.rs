use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ingest::BugRecord;
use crate::numeric;
use crate::stats::resolution_time;

use super::PredictError;

/// Feature vector layout: five priority one-hot slots, the same-person flag,
/// then (count, median hours) pairs for reporter, assignee, and subproject.
pub const FEATURE_DIM: usize = 12;

pub type Features = [f64; FEATURE_DIM];

/// Key under which unassigned bugs are pooled in the assignee table.
const UNASSIGNED_KEY: &str = "";

/// Training-split statistics used to featurise any bug. Entities unseen in
/// training get count 0 and the global training median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderState {
    pub reporter: BTreeMap<String, (usize, f64)>,
    pub assignee: BTreeMap<String, (usize, f64)>,
    pub subproject: BTreeMap<String, (usize, f64)>,
    pub global_median_hours: f64,
}

impl EncoderState {
    fn lookup(table: &BTreeMap<String, (usize, f64)>, key: &str, fallback: f64) -> (f64, f64) {
        match table.get(key) {
            Some(&(count, median)) => (count as f64, median),
            None => (0.0, fallback),
        }
    }

    /// Features of one bug under these statistics.
    pub fn features_for(&self, bug: &BugRecord) -> Features {
        let mut x = [0.0; FEATURE_DIM];
        if (1..=5).contains(&bug.priority) {
            x[(bug.priority - 1) as usize] = 1.0;
        }
        let assignee_key = bug.assignee_id.as_deref().unwrap_or(UNASSIGNED_KEY);
        x[5] = if bug.assignee_id.as_deref() == Some(bug.reporter_id.as_str()) {
            1.0
        } else {
            0.0
        };
        let g = self.global_median_hours;
        let (c, m) = Self::lookup(&self.reporter, &bug.reporter_id, g);
        x[6] = c;
        x[7] = m;
        let (c, m) = Self::lookup(&self.assignee, assignee_key, g);
        x[8] = c;
        x[9] = m;
        let (c, m) = Self::lookup(&self.subproject, &bug.subproject, g);
        x[10] = c;
        x[11] = m;
        x
    }
}

/// One encoded bug.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub bug_id: String,
    pub features: Features,
    pub resolution_hours: f64,
}

/// Encoded corpus plus the training statistics that produced the features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub encoder: EncoderState,
}

fn entity_table(groups: BTreeMap<String, Vec<f64>>) -> BTreeMap<String, (usize, f64)> {
    groups
        .into_iter()
        .map(|(key, hours)| {
            let stat = (hours.len(), numeric::median(&hours));
            (key, stat)
        })
        .collect()
}

/// Encodes the whole corpus with entity statistics computed from the training
/// bugs only, so test features never leak test outcomes.
pub fn encode_features(
    corpus: &[BugRecord],
    training_ids: &BTreeSet<String>,
    terminal: &str,
) -> Result<Dataset, PredictError> {
    if training_ids.is_empty() {
        return Err(PredictError::EmptyTrainingSet);
    }
    let mut hours_by_id: BTreeMap<&str, f64> = BTreeMap::new();
    for bug in corpus {
        let hours = resolution_time(bug, terminal).map_err(|_| PredictError::Unresolved {
            bug_id: bug.id.clone(),
        })?;
        hours_by_id.insert(bug.id.as_str(), hours);
    }

    let mut reporter: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut assignee: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut subproject: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut training_hours = Vec::new();
    for bug in corpus.iter().filter(|b| training_ids.contains(&b.id)) {
        let hours = hours_by_id[bug.id.as_str()];
        training_hours.push(hours);
        reporter
            .entry(bug.reporter_id.clone())
            .or_default()
            .push(hours);
        assignee
            .entry(
                bug.assignee_id
                    .clone()
                    .unwrap_or_else(|| UNASSIGNED_KEY.to_string()),
            )
            .or_default()
            .push(hours);
        subproject
            .entry(bug.subproject.clone())
            .or_default()
            .push(hours);
    }
    if training_hours.is_empty() {
        return Err(PredictError::EmptyTrainingSet);
    }
    let encoder = EncoderState {
        reporter: entity_table(reporter),
        assignee: entity_table(assignee),
        subproject: entity_table(subproject),
        global_median_hours: numeric::median(&training_hours),
    };
    let examples = corpus
        .iter()
        .map(|bug| Example {
            bug_id: bug.id.clone(),
            features: encoder.features_for(bug),
            resolution_hours: hours_by_id[bug.id.as_str()],
        })
        .collect();
    Ok(Dataset { examples, encoder })
}

/// Per-feature affine normalisation fitted on training data. Zero-variance
/// features normalise to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn fit(xs: &[Features]) -> Normalizer {
        let n = xs.len().max(1) as f64;
        let mut mean = vec![0.0; FEATURE_DIM];
        for x in xs {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; FEATURE_DIM];
        for x in xs {
            for (s, (v, m)) in var.iter_mut().zip(x.iter().zip(&mean)) {
                let d = v - m;
                *s += d * d;
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
        Normalizer { mean, std }
    }

    pub fn apply(&self, x: &Features) -> Features {
        let mut out = [0.0; FEATURE_DIM];
        for i in 0..FEATURE_DIM {
            out[i] = if self.std[i] > 0.0 {
                (x[i] - self.mean[i]) / self.std[i]
            } else {
                0.0
            };
        }
        out
    }
}
