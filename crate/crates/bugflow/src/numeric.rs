//! Small shared numeric helpers: medians, quantiles, and stable formatting.

/// Mean of a slice. Returns `NAN` for an empty slice.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Median of an unsorted slice: the middle order statistic for odd counts,
/// the mean of the two middle order statistics for even counts.
///
/// Returns `NAN` for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("median over non-finite values"));
    median_sorted(&sorted)
}

/// Median of an already ascending slice.
pub fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Quantile of an ascending slice by linear interpolation between order
/// statistics: at probability `p` the rank is `h = (n - 1) * p` and the result
/// interpolates between `x[floor(h)]` and `x[floor(h) + 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Rounds to nine decimal places and renders the shortest round-trip decimal.
///
/// Used by every text emitter so that identical values always serialise to
/// identical bytes (72.2 stays "72.2", 472.9099999999999 becomes "472.91").
pub fn fmt_f64(x: f64) -> String {
    let rounded = (x * 1e9).round() / 1e9;
    // Normalise -0.0 so output never depends on the sign of a zero.
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded}")
}
