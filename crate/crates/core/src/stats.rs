//! Descriptive statistics over `f64` slices.
//!
//! All functions return `f64::NAN` on empty input so callers can decide how to
//! render missing values. Percentiles interpolate linearly between order
//! statistics; standard deviation is the population variant.

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
pub fn std_pop(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn min(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NAN, f64::min)
}

pub fn max(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NAN, f64::max)
}

/// p-th percentile (0..=100), linear interpolation between order statistics.
pub fn percentile(x: &[f64], p: f64) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in percentile input"));
    percentile_sorted(&v, p)
}

/// Percentile over an already ascending slice.
pub fn percentile_sorted(v: &[f64], p: f64) -> f64 {
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 {
        return v[0];
    }
    let h = (n - 1) as f64 * (p / 100.0).clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn median(x: &[f64]) -> f64 {
    percentile(x, 50.0)
}

/// Inter-quartile range.
pub fn iqr(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in iqr input"));
    percentile_sorted(&v, 75.0) - percentile_sorted(&v, 25.0)
}

/// Pearson correlation coefficient; NAN if either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    if x.len() < 2 {
        return f64::NAN;
    }
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / (sxx * syy).sqrt()
}

/// Min-max normalization of `x` onto the range `[a, b]`.
/// A constant input maps everywhere to `a`.
pub fn minmax_nrm(x: &[f64], rng: (f64, f64)) -> Vec<f64> {
    let (a, b) = rng;
    let lo = min(x);
    let hi = max(x);
    if hi <= lo {
        return vec![a; x.len()];
    }
    x.iter().map(|v| a + (b - a) * (v - lo) / (hi - lo)).collect()
}

/// Unigram entropy in bits of a label multiset.
pub fn unigram_entropy<S: AsRef<str>>(labels: &[S]) -> f64 {
    if labels.is_empty() {
        return f64::NAN;
    }
    let mut counts = std::collections::HashMap::new();
    for l in labels {
        *counts.entry(l.as_ref()).or_insert(0usize) += 1;
    }
    let n = labels.len() as f64;
    -counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>()
}
