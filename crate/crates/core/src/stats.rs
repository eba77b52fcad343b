//! Order-preserving reductions used by the simulators and analytics.

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn new(value: f64, std_error: f64) -> Self {
        Self { value, std_error }
    }

    /// Absolute deviation from `target` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target) / self.std_error
    }

    pub fn within_se(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

/// Neumaier-compensated sum. The result depends only on the order of the
/// input, never on how the input was produced.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    compensated_sum(values.iter().map(|v| (v - m) * (v - m))) / (n - 1) as f64
}

/// Sample mean with the usual `s / sqrt(n)` standard error.
pub fn mean_estimate(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    Estimate::new(mean(values), (variance(values) / n).sqrt())
}

/// Unbiased sample variance with the large-sample standard error
/// `sqrt((m4 - s^4) / n)`.
pub fn variance_estimate(values: &[f64]) -> Estimate {
    let n = values.len();
    let var = variance(values);
    if n < 2 {
        return Estimate::new(0.0, 0.0);
    }
    let m = mean(values);
    let m4 = compensated_sum(values.iter().map(|v| (v - m).powi(4))) / n as f64;
    let spread = (m4 - var * var).max(0.0);
    Estimate::new(var, (spread / n as f64).sqrt())
}
