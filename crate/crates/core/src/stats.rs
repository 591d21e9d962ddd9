//! Small statistical helpers shared across modules.

/// Slack when comparing an accumulated weighted CDF against a probability
/// level, so that sums such as `3 * (1/3)` reach `1.0`.
pub const CDF_TOLERANCE: f64 = 1e-12;

/// Left-continuous empirical quantile of an ascending slice: the smallest
/// `x[k]` with `(k + 1) / n >= p`.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len();
    let rank = ((p * n as f64) - CDF_TOLERANCE * n as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(n) - 1])
}

/// Weighted left-continuous quantiles: for each level, the smallest value whose
/// normalized cumulative weight reaches it. Non-positive weights are ignored.
pub fn weighted_quantiles(pairs: &[(f64, f64)], levels: &[f64]) -> Option<Vec<f64>> {
    let mut sorted: Vec<(f64, f64)> = pairs.iter().copied().filter(|p| p.1 > 0.0).collect();
    if sorted.is_empty() {
        return None;
    }
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = sorted.iter().map(|p| p.1).sum();
    Some(
        levels
            .iter()
            .map(|&p| {
                let mut cum = 0.0;
                for &(v, w) in &sorted {
                    cum += w / total;
                    if cum >= p - CDF_TOLERANCE {
                        return v;
                    }
                }
                sorted[sorted.len() - 1].0
            })
            .collect(),
    )
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1); 0 for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

pub fn rmse(predicted: &[f64], observed: &[f64]) -> f64 {
    let sse: f64 = predicted.iter().zip(observed).map(|(p, o)| (p - o) * (p - o)).sum();
    (sse / observed.len() as f64).sqrt()
}

/// 1 − SSE/SST.
pub fn r_squared(predicted: &[f64], observed: &[f64]) -> f64 {
    let m = mean(observed);
    let sse: f64 = predicted.iter().zip(observed).map(|(p, o)| (p - o) * (p - o)).sum();
    let sst: f64 = observed.iter().map(|o| (o - m) * (o - m)).sum();
    1.0 - sse / sst
}
