/// Natural log. Routed through libm so results do not depend on the platform libm.
#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

/// `ln(mean(exp(values)))`, computed stably.
///
/// With one value, or with all values equal, the result is bitwise equal to
/// the input value.
pub(crate) fn log_mean_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || values.is_empty() {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| exp(v - max)).sum();
    max + ln(sum / values.len() as f64)
}
