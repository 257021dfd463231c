use crate::scalar::Scalar;

/// Effective sample size from the initial positive sequence of summed
/// autocorrelation pairs.
pub fn effective_sample_size<F: Scalar>(trace: &[F]) -> F {
    let n = trace.len();
    if n < 4 {
        return F::from_count(n);
    }
    let x: Vec<f64> = trace.iter().map(|v| v.as_f64()).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if !(var > 0.0) {
        return F::from_count(n);
    }
    let acf = |lag: usize| {
        (0..n - lag)
            .map(|i| (x[i] - mean) * (x[i + lag] - mean))
            .sum::<f64>()
            / (n as f64 * var)
    };
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    F::of((n as f64 / tau.max(1.0 / n as f64)).min(n as f64))
}
