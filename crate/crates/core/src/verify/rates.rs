use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{require_replicas, to_value, VerificationReport};
use crate::error::{invalid, Error, Result};
use crate::fbm::{FbmPlan, Kernel, TruncationPolicy};
use crate::seed::replica_seed;
use crate::stats::{median, ols};
use crate::walk::TwoSidedBm;

/// Allowed distance between the fitted slope and `-β(H)`.
pub const SLOPE_TOLERANCE: f64 = 0.20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    pub hurst: f64,
    pub m_min: u32,
    pub m_max: u32,
    pub horizon: f64,
    pub replicas: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub lookback: Option<f64>,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            hurst: 0.75,
            m_min: 6,
            m_max: 10,
            horizon: 1.0,
            replicas: 200,
            seed: 1,
            epsilon: 1e-6,
            lookback: Some(1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub levels: Vec<u32>,
    /// Median over replicas of `max_k |B_{m+1}^H(t_k) - B_m^H(t_k)|`.
    pub medians: Vec<f64>,
    pub slope: f64,
    pub slope_se: f64,
    pub target: f64,
}

/// `β(H) = min(2H - 1/2, 1/2)`.
pub fn rate_exponent(hurst: f64) -> f64 {
    (2.0 * hurst - 0.5).min(0.5)
}

fn replica_maxima(plans: &[FbmPlan], seed: u64) -> Result<Vec<f64>> {
    let mut bm = TwoSidedBm::new(seed);
    let mut out = Vec::with_capacity(plans.len() - 1);
    let mut coarse = plans[0].run(&mut bm)?.into_values();
    for plan in &plans[1..] {
        let fine = plan.run(&mut bm)?.into_values();
        let d = coarse
            .iter()
            .enumerate()
            .map(|(k, c)| (fine[4 * k] - c).abs())
            .fold(0.0, f64::max);
        out.push(d);
        coarse = fine;
    }
    Ok(out)
}

/// Regresses `log2(median D_m / m)` on `m` and compares the slope with `-β(H)`.
pub fn fit_convergence_rate(cfg: &RateConfig) -> Result<(RateFit, VerificationReport)> {
    require_replicas(cfg.replicas)?;
    if cfg.m_max < cfg.m_min || cfg.m_max - cfg.m_min < 3 {
        return Err(Error::InsufficientData(format!(
            "levels {}..={} span fewer than 4 levels",
            cfg.m_min, cfg.m_max
        )));
    }
    if cfg.m_min == 0 {
        return Err(invalid("m_min", "must be at least 1 to divide out m"));
    }
    let kernel = Kernel::new(cfg.hurst)?;
    let policy = TruncationPolicy::new(cfg.epsilon, cfg.lookback)?;
    let plans: Vec<FbmPlan> = (cfg.m_min..=cfg.m_max + 1)
        .map(|m| FbmPlan::new(kernel, m, cfg.horizon, policy))
        .collect::<Result<_>>()?;
    let per_replica: Vec<Vec<f64>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| replica_maxima(&plans, replica_seed(cfg.seed, i as u64)))
        .collect::<Result<_>>()?;

    let levels: Vec<u32> = (cfg.m_min..=cfg.m_max).collect();
    let medians: Vec<f64> = (0..levels.len())
        .map(|j| median(&per_replica.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect();
    let x: Vec<f64> = levels.iter().map(|&m| m as f64).collect();
    let y: Vec<f64> = medians
        .iter()
        .zip(&levels)
        .map(|(d, &m)| (d / m as f64).log2())
        .collect();
    let fit = ols(&x, &y);
    let target = -rate_exponent(cfg.hurst);
    let dev = (fit.slope - target).abs();
    let result = RateFit {
        levels,
        medians,
        slope: fit.slope,
        slope_se: fit.slope_se,
        target,
    };
    let report = VerificationReport {
        check: "convergence_rate".into(),
        seed: cfg.seed,
        config: to_value(cfg),
        replicas: cfg.replicas,
        statistic: fit.slope,
        bound: SLOPE_TOLERANCE,
        pass: dev <= SLOPE_TOLERANCE,
        hard: false,
        notes: format!("fitted slope {:.4} against target {:.4}", fit.slope, target),
        details: json!({
            "levels": result.levels,
            "medians": result.medians,
            "slope_se": fit.slope_se,
            "r_squared": fit.r_squared,
            "target": target,
            "deviation": dev,
        }),
    };
    Ok((result, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_values() {
        assert_eq!(rate_exponent(0.75), 0.5);
        assert_eq!(rate_exponent(0.375), 0.25);
        assert_eq!(rate_exponent(0.5), 0.5);
    }

    #[test]
    fn too_few_levels() {
        let cfg = RateConfig {
            m_min: 3,
            m_max: 5,
            ..RateConfig::default()
        };
        assert!(matches!(fit_convergence_rate(&cfg), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn small_fit_runs() {
        let cfg = RateConfig {
            m_min: 2,
            m_max: 5,
            replicas: 8,
            ..RateConfig::default()
        };
        let (fit, report) = fit_convergence_rate(&cfg).unwrap();
        assert_eq!(fit.medians.len(), 4);
        assert!(fit.medians.iter().all(|d| *d > 0.0));
        assert!(report.statistic.is_finite());
    }
}
