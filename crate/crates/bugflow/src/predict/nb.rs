use serde::{Deserialize, Serialize};

use super::features::{Features, FEATURE_DIM};
use super::{PredictError, Speed};

const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClassStats {
    log_prior: f64,
    mean: Features,
    variance: Features,
}

/// Gaussian naive Bayes: per-class, per-feature normal likelihoods with
/// frequency priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    fast: ClassStats,
    slow: ClassStats,
}

fn fit_class(xs: &[&Features], total: usize) -> ClassStats {
    let n = xs.len() as f64;
    let mut mean = [0.0; FEATURE_DIM];
    for x in xs {
        for (m, v) in mean.iter_mut().zip(x.iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut variance = [0.0; FEATURE_DIM];
    for x in xs {
        for i in 0..FEATURE_DIM {
            let d = x[i] - mean[i];
            variance[i] += d * d;
        }
    }
    for v in &mut variance {
        *v = (*v / n).max(VARIANCE_FLOOR);
    }
    ClassStats {
        log_prior: (xs.len() as f64 / total as f64).ln(),
        mean,
        variance,
    }
}

pub fn train_nb(xs: &[Features], labels: &[Speed]) -> Result<NbModel, PredictError> {
    let fast: Vec<&Features> = xs
        .iter()
        .zip(labels)
        .filter(|(_, l)| **l == Speed::Fast)
        .map(|(x, _)| x)
        .collect();
    let slow: Vec<&Features> = xs
        .iter()
        .zip(labels)
        .filter(|(_, l)| **l == Speed::Slow)
        .map(|(x, _)| x)
        .collect();
    if fast.is_empty() || slow.is_empty() {
        return Err(PredictError::SingleClassTraining);
    }
    Ok(NbModel {
        fast: fit_class(&fast, xs.len()),
        slow: fit_class(&slow, xs.len()),
    })
}

fn log_posterior(stats: &ClassStats, x: &Features) -> f64 {
    let mut log_p = stats.log_prior;
    for i in 0..FEATURE_DIM {
        let d = x[i] - stats.mean[i];
        log_p += -0.5 * (2.0 * std::f64::consts::PI * stats.variance[i]).ln()
            - d * d / (2.0 * stats.variance[i]);
    }
    log_p
}

/// Argmax of the log-posterior; an exact tie resolves to slow.
pub fn predict_nb(model: &NbModel, x: &Features) -> Speed {
    if log_posterior(&model.fast, x) > log_posterior(&model.slow, x) {
        Speed::Fast
    } else {
        Speed::Slow
    }
}
