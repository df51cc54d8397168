use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::ols;

/// Fewest grid points accepted by [`estimate_hurst`].
pub const MIN_POINTS: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HurstEstimate {
    /// `NaN` when `degenerate`.
    pub hurst: f64,
    /// Set when some lag has zero mean squared increment (e.g. a constant path).
    pub degenerate: bool,
    pub lags: Vec<usize>,
    pub variogram: Vec<f64>,
}

/// Variogram estimate of `H` from values on a uniform grid.
///
/// Uses lags `4, 8, ..., n/16` and halves the slope of
/// `log2 mean |x[i+l] - x[i]|^2` against `log2 l`.
pub fn estimate_hurst(values: &[f64]) -> Result<HurstEstimate> {
    let n = values.len();
    if n < MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "{n} grid points, need at least {MIN_POINTS}"
        )));
    }
    let lags: Vec<usize> = (2..).map(|j| 1usize << j).take_while(|&l| l <= n / 16).collect();
    let variogram: Vec<f64> = lags
        .iter()
        .map(|&l| {
            let s: f64 = values.windows(l + 1).map(|w| (w[l] - w[0]).powi(2)).sum();
            s / (n - l) as f64
        })
        .collect();
    if variogram.iter().any(|&v| !(v > 0.0)) {
        return Ok(HurstEstimate {
            hurst: f64::NAN,
            degenerate: true,
            lags,
            variogram,
        });
    }
    let x: Vec<f64> = lags.iter().map(|&l| (l as f64).log2()).collect();
    let y: Vec<f64> = variogram.iter().map(|v| v.log2()).collect();
    Ok(HurstEstimate {
        hurst: ols(&x, &y).slope / 2.0,
        degenerate: false,
        lags,
        variogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_input_is_rejected() {
        assert!(matches!(estimate_hurst(&[0.0; 100]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn constant_path_is_degenerate() {
        let e = estimate_hurst(&vec![3.0; 2048]).unwrap();
        assert!(e.degenerate && e.hurst.is_nan());
    }

    #[test]
    fn linear_path_has_unit_hurst() {
        let v: Vec<f64> = (0..4096).map(|i| i as f64 * 0.1).collect();
        assert!((estimate_hurst(&v).unwrap().hurst - 1.0).abs() < 1e-12);
    }
}
