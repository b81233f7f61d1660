//! Deterministic reductions and small statistical helpers.
//!
//! All ensemble statistics go through [`pairwise_sum`], which reduces in a
//! fixed tree order over indices. The result therefore depends only on the
//! data, never on thread scheduling.

/// Pairwise (cascade) summation in a fixed tree order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 64 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `f` mapped over `0..len`; avoids materializing the vector.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(len: usize, f: &F) -> f64 {
    fn go<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        if hi - lo <= 64 {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            return acc;
        }
        let mid = lo + (hi - lo) / 2;
        go(lo, mid, f) + go(mid, hi, f)
    }
    go(0, len, f)
}

/// Sample mean and standard error of the mean.
///
/// Returns `(mean, se)`; `se` is 0 for fewer than two samples.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = pairwise_sum_by(n, &|i| {
        let d = xs[i] - mean;
        d * d
    });
    let var = ss / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Mean and standard error of `f` over `0..len` in fixed reduction order.
pub fn mean_and_se_by<F: Fn(usize) -> f64>(len: usize, f: &F) -> (f64, f64) {
    if len == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum_by(len, f) / len as f64;
    if len < 2 {
        return (mean, 0.0);
    }
    let ss = pairwise_sum_by(len, &|i| {
        let d = f(i) - mean;
        d * d
    });
    let var = ss / (len - 1) as f64;
    (mean, (var / len as f64).sqrt())
}

/// Standard error of an empirical proportion `p` over `n` trials.
pub fn proportion_se(p: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Neumaier compensated summation; used for bound arithmetic where terms
/// span many orders of magnitude.
pub fn compensated_sum(terms: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// One-sample Kolmogorov-Smirnov statistic against a CDF.
///
/// Sorts a copy of the samples; `cdf` must be nondecreasing on their range.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Asymptotic Kolmogorov critical value at significance `alpha` for `n`
/// samples: `sqrt(ln(2/alpha) / (2n))`.
pub fn ks_critical_value(alpha: f64, n: usize) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Weighted least-squares line fit `y ≈ a + b·x`.
///
/// Returns `(slope, intercept, r2)` with `r2` the weighted coefficient of
/// determination.
pub fn weighted_linear_fit(xs: &[f64], ys: &[f64], ws: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n || ws.len() != n {
        return None;
    }
    let wsum = pairwise_sum(ws);
    if !(wsum > 0.0) {
        return None;
    }
    let xbar = pairwise_sum_by(n, &|i| ws[i] * xs[i]) / wsum;
    let ybar = pairwise_sum_by(n, &|i| ws[i] * ys[i]) / wsum;
    let sxx = pairwise_sum_by(n, &|i| ws[i] * (xs[i] - xbar) * (xs[i] - xbar));
    let sxy = pairwise_sum_by(n, &|i| ws[i] * (xs[i] - xbar) * (ys[i] - ybar));
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_tot = pairwise_sum_by(n, &|i| ws[i] * (ys[i] - ybar) * (ys[i] - ybar));
    let ss_res = pairwise_sum_by(n, &|i| {
        let r = ys[i] - (intercept + slope * xs[i]);
        ws[i] * r * r
    });
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some((slope, intercept, r2))
}
