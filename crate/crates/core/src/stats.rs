//! Small summary statistics shared across modules.

/// Arithmetic mean computed around the first element, so a constant slice
/// returns that constant exactly.
pub fn mean(values: &[f64]) -> f64 {
    match values.first() {
        None => f64::NAN,
        Some(&anchor) => {
            let shift: f64 = values.iter().map(|v| v - anchor).sum();
            anchor + shift / values.len() as f64
        }
    }
}

/// Sample standard deviation (denominator n - 1). NaN for fewer than 2 values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Population standard deviation (denominator n); 0 for a single value.
pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / values.len() as f64).sqrt()
}
