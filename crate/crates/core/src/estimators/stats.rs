//! Small-sample statistics used by the estimators.

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two samples.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the sample mean.
pub fn stderr_of_mean(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Ratio estimate `sum(y) / sum(n)` over i.i.d. pairs with its delta-method
/// standard error.
pub fn ratio_estimate(y: &[f64], n: &[f64]) -> (f64, f64) {
    let k = y.len();
    let sy: f64 = y.iter().sum();
    let sn: f64 = n.iter().sum();
    let r = sy / sn;
    if k < 2 {
        return (r, 0.0);
    }
    let z: f64 = y.iter().zip(n).map(|(yj, nj)| (yj - r * nj).powi(2)).sum();
    let s = (z / (k - 1) as f64).sqrt();
    let n_bar = sn / k as f64;
    (r, s / (n_bar * (k as f64).sqrt()))
}

/// Splits `0..len` into `batches` contiguous ranges whose lengths differ by
/// at most one.
pub fn batch_bounds(len: usize, batches: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..batches).map(move |b| (b * len / batches, (b + 1) * len / batches))
}

/// Lag-1 sample autocorrelation.
pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let denom: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    if denom == 0.0 {
        return 0.0;
    }
    let num: f64 = xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    num / denom
}
