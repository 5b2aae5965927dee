//! Small statistics toolkit: confidence intervals and Kolmogorov–Smirnov distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

/// A point estimate with a 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Estimate {
    pub fn halfwidth(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn excludes_zero(&self) -> bool {
        self.lo > 0.0 || self.hi < 0.0
    }
}

/// Sample mean and `1.96·s/√n` with the unbiased sample deviation `s`.
pub fn confidence_interval(samples: &[f64]) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Degenerate(n));
    }
    let (mean, var) = mean_var(samples);
    Ok((mean, Z95 * (var / n as f64).sqrt()))
}

pub fn mean_estimate(samples: &[f64]) -> Result<Estimate> {
    let (m, h) = confidence_interval(samples)?;
    Ok(Estimate {
        value: m,
        lo: m - h,
        hi: m + h,
        n: samples.len(),
    })
}

/// Mean and unbiased variance. Variance is 0 for fewer than two samples.
pub fn mean_var(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1) as f64)
}

/// Proportion with a 95% interval. Normal approximation, switching to the
/// Wilson score interval when fewer than 10 successes or failures are seen.
pub fn binomial_estimate(successes: usize, n: usize) -> Estimate {
    assert!(n > 0 && successes <= n);
    let nf = n as f64;
    let p = successes as f64 / nf;
    let (lo, hi) = if successes < 10 || n - successes < 10 {
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / nf;
        let centre = (p + z2 / (2.0 * nf)) / denom;
        let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
        // exact endpoints at the boundaries; otherwise roundoff leaves ~1e-18
        let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
        let hi = if successes == n { 1.0 } else { (centre + half).min(1.0) };
        (lo, hi)
    } else {
        let half = Z95 * (p * (1.0 - p) / nf).sqrt();
        ((p - half).max(0.0), (p + half).min(1.0))
    };
    Estimate { value: p, lo, hi, n }
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
