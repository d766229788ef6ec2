//! Small numeric helpers shared by the threshold fits and the reports.

/// Arithmetic mean. Caller guarantees a nonempty slice.
pub(crate) fn mean(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation (divisor n), computed two-pass around the
/// mean so nearly-constant inputs do not cancel catastrophically.
pub(crate) fn population_std(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}
