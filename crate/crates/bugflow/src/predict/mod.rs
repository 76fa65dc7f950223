//! Resolution-time predictors and their evaluation protocol.
//!
//! Bugs are encoded by [`encode_features`] from training-split statistics,
//! labelled fast or slow against the training median, and fed to one of four
//! models: kNN, Gaussian naive Bayes, a binary network, or an exact-hours
//! regression network whose output doubles as a classifier via the same
//! median threshold. [`cross_validate`] runs the repeated 80/20 protocol with
//! per-repeat re-encoding so entity features never leak test outcomes.

mod features;
mod knn;
mod nb;
mod nn;

pub use features::{encode_features, Dataset, EncoderState, Example, Features, Normalizer, FEATURE_DIM};
pub use knn::{predict_knn, train_knn, KnnModel};
pub use nb::{predict_nb, train_nb, NbModel};
pub use nn::{
    forward, init_params, loss_and_grad, train_nn, NnMode, NnModel, TrainConfig,
    MIN_PREDICTED_HOURS, PARAM_COUNT,
};

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::{inactivity_filter, tukey_outlier_filter, FilterError, OutlierMode};
use crate::ingest::BugRecord;
use crate::numeric;

/// Fast/slow class relative to a training median.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speed {
    Fast,
    Slow,
}

impl Speed {
    pub fn label(self) -> &'static str {
        match self {
            Speed::Fast => "fast",
            Speed::Slow => "slow",
        }
    }
}

/// Fast when strictly below the training median; ties are slow.
pub fn label_fast_slow(hours: f64, training_median: f64) -> Speed {
    if hours < training_median {
        Speed::Fast
    } else {
        Speed::Slow
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Knn,
    NaiveBayes,
    NnBinary,
    NnRegression,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::NaiveBayes => "naive_bayes",
            ModelKind::NnBinary => "nn_binary",
            ModelKind::NnRegression => "nn_regression",
        }
    }

    pub const ALL: [ModelKind; 4] = [
        ModelKind::Knn,
        ModelKind::NaiveBayes,
        ModelKind::NnBinary,
        ModelKind::NnRegression,
    ];
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "knn" => Ok(ModelKind::Knn),
            "nb" | "naive_bayes" => Ok(ModelKind::NaiveBayes),
            "nn_binary" => Ok(ModelKind::NnBinary),
            "nn_regression" => Ok(ModelKind::NnRegression),
            other => Err(format!(
                "unknown model kind {other:?} (knn, naive_bayes, nn_binary, nn_regression)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("bug {bug_id} has no resolution time")]
    Unresolved { bug_id: String },
    #[error("dataset of {n} examples is too small to split (need at least 10)")]
    DatasetTooSmall { n: usize },
    #[error("train fraction {fraction} must lie strictly between 0 and 1")]
    BadFraction { fraction: f64 },
    #[error("training split contains a single class")]
    SingleClassTraining,
    #[error("k = {k} exceeds the {n} training examples")]
    KTooLarge { k: usize, n: usize },
    #[error("{n} training examples are fewer than the required {need}")]
    TooSmallForNn { n: usize, need: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("cannot parse model file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
enum ModelInner {
    Knn(KnnModel),
    NaiveBayes(NbModel),
    Nn(NnModel),
}

/// A fitted predictor plus the training median it classifies against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub training_median_hours: f64,
    inner: ModelInner,
}

/// Training knobs shared across model kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub knn_k: usize,
    pub nn: TrainConfig,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            knn_k: 5,
            nn: TrainConfig::default(),
        }
    }
}

/// Fits one model kind on the training examples.
pub fn train_model(
    kind: ModelKind,
    train: &[Example],
    options: &TrainOptions,
) -> Result<TrainedModel, PredictError> {
    if train.is_empty() {
        return Err(PredictError::EmptyTrainingSet);
    }
    let hours: Vec<f64> = train.iter().map(|e| e.resolution_hours).collect();
    let training_median_hours = numeric::median(&hours);
    let xs: Vec<Features> = train.iter().map(|e| e.features).collect();
    let labels: Vec<Speed> = hours
        .iter()
        .map(|&h| label_fast_slow(h, training_median_hours))
        .collect();
    let inner = match kind {
        ModelKind::Knn => ModelInner::Knn(train_knn(&xs, &labels, options.knn_k)?),
        ModelKind::NaiveBayes => ModelInner::NaiveBayes(train_nb(&xs, &labels)?),
        ModelKind::NnBinary => {
            let ys: Vec<f64> = labels
                .iter()
                .map(|l| if *l == Speed::Fast { 1.0 } else { 0.0 })
                .collect();
            ModelInner::Nn(train_nn(&xs, &ys, NnMode::Binary, &options.nn)?)
        }
        ModelKind::NnRegression => {
            let ys: Vec<f64> = hours.iter().map(|h| h.ln_1p()).collect();
            ModelInner::Nn(train_nn(&xs, &ys, NnMode::Regression, &options.nn)?)
        }
    };
    Ok(TrainedModel {
        kind,
        training_median_hours,
        inner,
    })
}

impl TrainedModel {
    /// Fast/slow prediction. The regression model classifies by comparing its
    /// predicted hours with the training median.
    pub fn predict_class(&self, x: &Features) -> Speed {
        match &self.inner {
            ModelInner::Knn(model) => predict_knn(model, x),
            ModelInner::NaiveBayes(model) => predict_nb(model, x),
            ModelInner::Nn(model) => match model.mode {
                NnMode::Binary => model.predict_class(x),
                NnMode::Regression => {
                    label_fast_slow(model.predict_hours(x), self.training_median_hours)
                }
            },
        }
    }

    /// Exact-hours prediction; only the regression network provides one.
    pub fn predict_hours(&self, x: &Features) -> Option<f64> {
        match &self.inner {
            ModelInner::Nn(model) if model.mode == NnMode::Regression => {
                Some(model.predict_hours(x))
            }
            _ => None,
        }
    }

    /// Training loss per epoch, when the model is a network.
    pub fn loss_curve(&self) -> Option<&[f64]> {
        match &self.inner {
            ModelInner::Nn(model) => Some(&model.loss_curve),
            _ => None,
        }
    }
}

/// One evaluation pass over a test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatEval {
    pub accuracy: f64,
    pub median_normalized_error: Option<f64>,
    pub n_test: usize,
}

/// Aggregate over repeats: accuracy is the mean of per-repeat accuracies, the
/// normalized error the mean of per-repeat medians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub median_normalized_error: Option<f64>,
    pub n_test: usize,
    pub per_repeat: Vec<RepeatEval>,
}

/// Accuracy of fast/slow classification against the model's training median,
/// plus the median normalized error |predicted - actual| / actual for
/// regression models.
pub fn evaluate(model: &TrainedModel, test: &[Example]) -> EvalReport {
    let mut correct = 0usize;
    let mut normalized_errors = Vec::new();
    for example in test {
        let truth = label_fast_slow(example.resolution_hours, model.training_median_hours);
        if model.predict_class(&example.features) == truth {
            correct += 1;
        }
        if let Some(predicted) = model.predict_hours(&example.features) {
            normalized_errors
                .push((predicted - example.resolution_hours).abs() / example.resolution_hours);
        }
    }
    let repeat = RepeatEval {
        accuracy: correct as f64 / test.len() as f64,
        median_normalized_error: if normalized_errors.is_empty() {
            None
        } else {
            Some(numeric::median(&normalized_errors))
        },
        n_test: test.len(),
    };
    EvalReport {
        accuracy: repeat.accuracy,
        median_normalized_error: repeat.median_normalized_error,
        n_test: repeat.n_test,
        per_repeat: vec![repeat],
    }
}

/// Deterministic uniform partition of `n` indices: the first `floor(f * n)`
/// of a seeded shuffle are the training side.
fn split_indices(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = (train_fraction * n as f64).floor() as usize;
    let test = order.split_off(n_train);
    (order, test)
}

/// Splits a dataset into train and test parts (sizes `floor(f * n)` and the
/// rest), sharing the encoder. Deterministic per seed.
pub fn split(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), PredictError> {
    let n = dataset.examples.len();
    if n < 10 {
        return Err(PredictError::DatasetTooSmall { n });
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(PredictError::BadFraction {
            fraction: train_fraction,
        });
    }
    let (train_idx, test_idx) = split_indices(n, train_fraction, seed);
    let pick = |idx: &[usize]| Dataset {
        examples: idx.iter().map(|&i| dataset.examples[i].clone()).collect(),
        encoder: dataset.encoder.clone(),
    };
    Ok((pick(&train_idx), pick(&test_idx)))
}

/// Prefilter applied to the corpus before the cross-validation splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterVariant {
    None,
    Mild,
    Extreme,
    Inactivity,
}

impl std::str::FromStr for FilterVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(FilterVariant::None),
            "mild" => Ok(FilterVariant::Mild),
            "extreme" => Ok(FilterVariant::Extreme),
            "inactivity" => Ok(FilterVariant::Inactivity),
            other => Err(format!(
                "unknown filter variant {other:?} (none, mild, extreme, inactivity)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub repeats: usize,
    pub train_fraction: f64,
    pub base_seed: u64,
    pub filter_variant: FilterVariant,
    pub inactivity_gap_days: u32,
    pub options: TrainOptions,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            repeats: 10,
            train_fraction: 0.8,
            base_seed: 0,
            filter_variant: FilterVariant::None,
            inactivity_gap_days: 30,
            options: TrainOptions::default(),
        }
    }
}

/// The repeated random-split protocol: per repeat, split the (optionally
/// prefiltered) corpus, re-encode entity features on the training split only,
/// train every requested model, and evaluate on the held-out split.
pub fn cross_validate(
    corpus: &[BugRecord],
    terminal: &str,
    kinds: &[ModelKind],
    config: &CvConfig,
) -> Result<BTreeMap<ModelKind, EvalReport>, PredictError> {
    let filtered: Vec<BugRecord> = match config.filter_variant {
        FilterVariant::None => corpus.to_vec(),
        FilterVariant::Mild => {
            tukey_outlier_filter(corpus.to_vec(), OutlierMode::Mild, terminal)?.0
        }
        FilterVariant::Extreme => {
            tukey_outlier_filter(corpus.to_vec(), OutlierMode::Extreme, terminal)?.0
        }
        FilterVariant::Inactivity => {
            inactivity_filter(corpus.to_vec(), config.inactivity_gap_days, terminal).0
        }
    };
    let n = filtered.len();
    if n < 10 {
        return Err(PredictError::DatasetTooSmall { n });
    }
    let mut per_kind: BTreeMap<ModelKind, Vec<RepeatEval>> =
        kinds.iter().map(|&k| (k, Vec::new())).collect();
    for repeat in 0..config.repeats {
        let seed = config.base_seed.wrapping_add(repeat as u64);
        let (train_idx, test_idx) = split_indices(n, config.train_fraction, seed);
        let training_ids: BTreeSet<String> =
            train_idx.iter().map(|&i| filtered[i].id.clone()).collect();
        let dataset = encode_features(&filtered, &training_ids, terminal)?;
        let by_id: BTreeMap<&str, &Example> = dataset
            .examples
            .iter()
            .map(|e| (e.bug_id.as_str(), e))
            .collect();
        let train: Vec<Example> = train_idx
            .iter()
            .map(|&i| by_id[filtered[i].id.as_str()].clone())
            .collect();
        let test: Vec<Example> = test_idx
            .iter()
            .map(|&i| by_id[filtered[i].id.as_str()].clone())
            .collect();
        for (kind_index, &kind) in kinds.iter().enumerate() {
            let mut options = config.options.clone();
            options.nn.seed = seed.wrapping_mul(8).wrapping_add(kind_index as u64);
            let model = train_model(kind, &train, &options)?;
            let report = evaluate(&model, &test);
            per_kind.get_mut(&kind).unwrap().extend(report.per_repeat);
        }
    }
    Ok(per_kind
        .into_iter()
        .map(|(kind, repeats)| {
            let accuracy = numeric::mean(
                &repeats.iter().map(|r| r.accuracy).collect::<Vec<f64>>(),
            );
            let errors: Vec<f64> = repeats
                .iter()
                .filter_map(|r| r.median_normalized_error)
                .collect();
            let report = EvalReport {
                accuracy,
                median_normalized_error: if errors.is_empty() {
                    None
                } else {
                    Some(numeric::mean(&errors))
                },
                n_test: repeats.first().map(|r| r.n_test).unwrap_or(0),
                per_repeat: repeats,
            };
            (kind, report)
        })
        .collect())
}

/// On-disk form of a trained predictor: the entity encoder plus the model, so
/// new raw bugs can be featurised and scored without the training corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub encoder: EncoderState,
    pub model: TrainedModel,
}

pub fn model_to_json(file: &ModelFile) -> String {
    serde_json::to_string_pretty(file).expect("model serialises")
}

pub fn model_from_json(text: &str) -> Result<ModelFile, PredictError> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| PredictError::Parse(e.to_string()))?;
    if file.version != 1 {
        return Err(PredictError::Parse(format!(
            "unsupported model version {}",
            file.version
        )));
    }
    Ok(file)
}
