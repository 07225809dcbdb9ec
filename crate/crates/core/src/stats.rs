//! Small descriptive-statistics helpers shared by model fitting and session
//! analytics.

/// Arithmetic mean; NaN for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator). Zero for fewer than two
/// values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Quantile of an ascending slice by linear interpolation between the order
/// statistics around position `p * (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quartiles (Q1, Q3) of unsorted data.
pub fn quartiles(xs: &[f64]) -> (f64, f64) {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    (quantile_sorted(&sorted, 0.25), quantile_sorted(&sorted, 0.75))
}

/// Drops values outside `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`, keeping the order of
/// the survivors. Inputs of length 0 or 1 come back unchanged.
pub fn remove_outliers_iqr(xs: &[f64]) -> Vec<f64> {
    if xs.len() <= 1 {
        return xs.to_vec();
    }
    let (q1, q3) = quartiles(xs);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    xs.iter().copied().filter(|x| (lo..=hi).contains(x)).collect()
}
