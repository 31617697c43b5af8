//! Small order-fixed summaries used by the Monte Carlo estimators.

/// Pairwise summation in a fixed tree order, so the result depends only on
/// the slice contents.
pub fn tree_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    tree_sum(&xs[..mid]) + tree_sum(&xs[mid..])
}

/// Sample mean and standard error `s / √n` (`s` with Bessel correction).
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = tree_sum(xs) / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = tree_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let mean = tree_sum(xs) / n as f64;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    tree_sum(&dev) / (n - 1) as f64
}

/// Standard error of the sample mean of `f(x)` where only the raw values are
/// kept: mean, stderr of `xy` products and similar paired statistics.
pub fn covariance_estimate(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x * y).collect();
    mean_and_stderr(&prods)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summaries() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let (m, se) = mean_and_stderr(&xs);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!((sample_variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
        let long: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(tree_sum(&long), 500_500.0);
    }
}
