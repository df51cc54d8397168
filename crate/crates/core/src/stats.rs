//! Small statistics helpers used by the verifier.

use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let mu = mean(x);
    x.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Linear-interpolation quantile (the common "type 7" definition).
pub fn quantile(x: &[f64], p: f64) -> f64 {
    assert!(!x.is_empty(), "quantile of empty sample");
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let h = (s.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

pub fn median(x: &[f64]) -> f64 {
    quantile(x, 0.5)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `y` on `x`.
pub fn ols(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - intercept - slope * a;
            e * e
        })
        .sum();
    let slope_se = if n > 2.0 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    LinearFit {
        slope,
        intercept,
        slope_se,
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
    }
}

/// Sample covariance and a standard error from the spread of the centred products.
pub fn covariance_with_se(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let cov = prods.iter().sum::<f64>() / (n - 1.0);
    let se = (variance(&prods) / n).sqrt();
    (cov, se)
}

/// Kolmogorov survival function `Q(λ) = 2 Σ (-1)^{j-1} exp(-2 j² λ²)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Critical value of the statistic at the requested level.
    pub critical: f64,
}

/// Scaling of the statistic in Stephens' approximation.
fn ks_scale(n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    sn + 0.12 + 0.11 / sn
}

/// One-sample Kolmogorov–Smirnov test against `N(0, sd²)`.
pub fn ks_normal(samples: &[f64], sd: f64, level: f64) -> KsResult {
    let n = samples.len();
    let dist = Normal::new(0.0, sd).expect("positive standard deviation");
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let nf = n as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = dist.cdf(x);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    let scale = ks_scale(n);
    // invert Q by bisection for the critical value
    let (mut lo, mut hi) = (0.2, 5.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_q(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    KsResult {
        statistic: d,
        p_value: kolmogorov_q(scale * d),
        critical: 0.5 * (lo + hi) / scale,
    }
}

/// `max(1, ln x)`.
pub fn log_star(x: f64) -> f64 {
    x.ln().max(1.0)
}
