use serde::{Deserialize, Serialize};

use super::features::{Features, Normalizer};
use super::{PredictError, Speed};

/// k-nearest-neighbour classifier over z-normalised features with Euclidean
/// distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    normalizer: Normalizer,
    points: Vec<Features>,
    labels: Vec<Speed>,
}

pub fn train_knn(xs: &[Features], labels: &[Speed], k: usize) -> Result<KnnModel, PredictError> {
    if k == 0 || k > xs.len() {
        return Err(PredictError::KTooLarge { k, n: xs.len() });
    }
    let normalizer = Normalizer::fit(xs);
    let points = xs.iter().map(|x| normalizer.apply(x)).collect();
    Ok(KnnModel {
        k,
        normalizer,
        points,
        labels: labels.to_vec(),
    })
}

/// Majority vote of the k nearest training points; a tied vote falls back to
/// the class of the single nearest neighbour. Distance ties resolve by
/// training order.
pub fn predict_knn(model: &KnnModel, x: &Features) -> Speed {
    let query = model.normalizer.apply(x);
    let mut dists: Vec<(f64, usize)> = model
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d2: f64 = p
                .iter()
                .zip(&query)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2, i)
        })
        .collect();
    dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut fast = 0usize;
    let mut slow = 0usize;
    for &(_, i) in dists.iter().take(model.k) {
        match model.labels[i] {
            Speed::Fast => fast += 1,
            Speed::Slow => slow += 1,
        }
    }
    if fast == slow {
        model.labels[dists[0].1]
    } else if fast > slow {
        Speed::Fast
    } else {
        Speed::Slow
    }
}
