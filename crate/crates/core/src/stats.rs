//! Small descriptive statistics used by the experiment harness.

use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Unbiased sample variance; needs at least two values.
pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    Some(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64)
}

fn median_sorted(xs: &[f64]) -> f64 {
    let m = xs.len();
    if m % 2 == 1 {
        xs[m / 2]
    } else {
        0.5 * (xs[m / 2 - 1] + xs[m / 2])
    }
}

/// Quartiles by the median-of-halves rule: Q1 and Q3 are the medians of
/// the values below and above the median position (the median itself is
/// excluded when the count is odd). A single value is its own quartiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn quartiles(xs: &[f64]) -> Option<Quartiles> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    let median = median_sorted(&v);
    let (lower, upper) = if m == 1 {
        (&v[..], &v[..])
    } else {
        (&v[..m / 2], &v[m.div_ceil(2)..])
    };
    Some(Quartiles {
        min: v[0],
        q1: median_sorted(lower),
        median,
        q3: median_sorted(upper),
        max: v[m - 1],
    })
}

pub fn median(xs: &[f64]) -> Option<f64> {
    quartiles(xs).map(|q| q.median)
}

/// Pairs `(theoretical, observed)` of standard normal quantiles at
/// plotting positions `(i - 1/2)/m` against the studentized sample.
pub fn normal_qq_pairs(xs: &[f64]) -> Vec<(f64, f64)> {
    let (m, sd) = match (mean(xs), sample_variance(xs)) {
        (Some(m), Some(v)) if v > 0.0 => (m, v.sqrt()),
        _ => return Vec::new(),
    };
    let mut z: Vec<f64> = xs.iter().map(|x| (x - m) / sd).collect();
    z.sort_by(f64::total_cmp);
    let normal = Normal::standard();
    let len = z.len() as f64;
    z.into_iter()
        .enumerate()
        .map(|(i, zi)| (normal.inverse_cdf((i as f64 + 0.5) / len), zi))
        .collect()
}

/// Pearson correlation of paired values.
pub fn correlation(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}
