use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{monte_carlo_allowance, require_replicas, to_value, VerificationReport};
use crate::error::{invalid, Result};
use crate::fbm::{weights_with_cutoff, Kernel, MovingAverageWeights, TruncationPolicy};
use crate::oracle::CovarianceModel;
use crate::seed::replica_seed;
use crate::stats::{covariance_with_se, ks_normal};
use crate::walk::TwoSidedBm;

/// Time pairs `(s, t)` of the covariance leg, as fractions of `min(K, 1)`.
pub const COVARIANCE_PAIRS: [(f64, f64); 3] = [(0.25, 0.5), (0.5, 1.0), (1.0, 1.0)];

/// Significance level of the normality test.
pub const NORMALITY_LEVEL: f64 = 0.01;

/// Tolerance on exactly recomputed coefficients.
pub const COEFFICIENT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionConfig {
    pub hurst: f64,
    pub level: u32,
    pub horizon: f64,
    pub replicas: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub lookback: Option<f64>,
}

impl Default for DistributionConfig {
    fn default() -> Self {
        let p = TruncationPolicy::default();
        Self {
            hurst: 0.75,
            level: 10,
            horizon: 1.0,
            replicas: 2000,
            seed: 1,
            epsilon: p.epsilon,
            lookback: p.max_lookback,
        }
    }
}

// ℓ2 norm of the coefficients where two windows do not overlap, plus the max
// difference where they do. `a` and `b` are indexed from `a_first`, `b_first`.
fn compare_windows(a: &[f64], a_first: i64, b: &[f64], b_first: i64) -> (f64, f64) {
    let lo = a_first.min(b_first);
    let hi = (a_first + a.len() as i64).max(b_first + b.len() as i64);
    let get = |w: &[f64], first: i64, r: i64| {
        let i = r - first;
        (i >= 0 && (i as usize) < w.len()).then(|| w[i as usize])
    };
    let (mut max_diff, mut excess) = (0.0f64, 0.0f64);
    for r in lo..hi {
        match (get(a, a_first, r), get(b, b_first, r)) {
            (Some(x), Some(y)) => max_diff = max_diff.max((x - y).abs()),
            (Some(x), None) | (None, Some(x)) => excess += x * x,
            (None, None) => {}
        }
    }
    (max_diff, excess.sqrt())
}

fn coefficient_report(name: &str, cfg: &DistributionConfig, max_diff: f64, excess_ratio: f64, slack: f64, details: serde_json::Value) -> VerificationReport {
    VerificationReport {
        check: name.into(),
        seed: cfg.seed,
        config: to_value(cfg),
        replicas: 0,
        statistic: max_diff,
        bound: COEFFICIENT_TOLERANCE,
        pass: max_diff <= COEFFICIENT_TOLERANCE && excess_ratio <= slack,
        hard: false,
        notes: format!("non-overlapping tail mass {excess_ratio:.3e} of one sd against slack {slack:.3e}"),
        details,
    }
}

// B(t_{k0+k}) - B(t_{k0}) against B(t_k), both with the cutoff of index k0 + k.
fn stationarity(cfg: &DistributionConfig, kernel: &Kernel, policy: &TruncationPolicy) -> Result<VerificationReport> {
    let m = cfg.level;
    let n = crate::walk::grid_count(cfg.horizon, m).max(2);
    let (k0, k) = (n / 2, n - n / 2);
    let v = policy.cutoff(k0 + k, m, kernel);
    let far = weights_with_cutoff(k0 + k, m, kernel, v)?;
    let near = weights_with_cutoff(k0, m, kernel, v)?;
    // increment coefficients, re-indexed by u = r - k0
    let first = far.first_index() - k0 as i64;
    let inc: Vec<f64> = (0..far.as_slice().len())
        .map(|i| far.as_slice()[i] - near.weight(far.first_index() + i as i64))
        .collect();
    let base = weights_with_cutoff(k, m, kernel, v)?;
    let (max_diff, excess) = compare_windows(&inc, first, base.as_slice(), base.first_index());
    let ratio = excess / base.sum_of_squares().sqrt();
    let slack = 2.0 * policy.epsilon.max(base.tail_sd_ratio);
    Ok(coefficient_report(
        "stationarity_coefficients",
        cfg,
        max_diff,
        ratio,
        slack,
        json!({"k0": k0, "k": k, "cutoff": v}),
    ))
}

// a^{-H} B_m(a t) against B_{m+m0}(t) with a = 4^{m0}, for m0 = 1 and, when possible, -1.
fn self_similarity(cfg: &DistributionConfig, kernel: &Kernel, policy: &TruncationPolicy) -> Result<VerificationReport> {
    let m = cfg.level;
    let h = kernel.hurst();
    let n = crate::walk::grid_count(cfg.horizon, m).max(1);
    let mut worst = (0.0f64, 0.0f64);
    let mut slack = 0.0f64;
    let mut legs = Vec::new();
    let mut compare = |coarse: MovingAverageWeights, fine: MovingAverageWeights, scale: f64| {
        let scaled: Vec<f64> = coarse.as_slice().iter().map(|w| w * scale).collect();
        let (d, e) = compare_windows(&scaled, coarse.first_index(), fine.as_slice(), fine.first_index());
        let ratio = e / fine.sum_of_squares().sqrt();
        worst = (worst.0.max(d), worst.1.max(ratio));
        slack = slack
            .max(2.0 * policy.epsilon.max(coarse.tail_sd_ratio).max(fine.tail_sd_ratio));
        (d, ratio)
    };
    // index k at level m is B_m(a t) for t = k 4^{-(m + m0)}, index k at level m + m0 is B_{m+m0}(t)
    let k = n;
    let coarse = weights_with_cutoff(k, m, kernel, policy.cutoff(k, m, kernel))?;
    let fine = weights_with_cutoff(k, m + 1, kernel, policy.cutoff(k, m + 1, kernel))?;
    legs.push(("m0=1", compare(coarse, fine, (-2.0 * h).exp2())));
    if m >= 1 {
        let coarse = weights_with_cutoff(k, m, kernel, policy.cutoff(k, m, kernel))?;
        let fine = weights_with_cutoff(k, m - 1, kernel, policy.cutoff(k, m - 1, kernel))?;
        legs.push(("m0=-1", compare(coarse, fine, (2.0 * h).exp2())));
    }
    let details = json!(legs
        .iter()
        .map(|(name, (d, r))| json!({"leg": name, "max_diff": d, "tail_ratio": r}))
        .collect::<Vec<_>>());
    Ok(coefficient_report("self_similarity_coefficients", cfg, worst.0, worst.1, slack, details))
}

/// Stationarity and self-similarity of the coefficients, normality and
/// covariance of the sampled marginals, and a large-deviation tail leg.
pub fn check_distributional_properties(cfg: &DistributionConfig) -> Result<Vec<VerificationReport>> {
    require_replicas(cfg.replicas)?;
    if !(cfg.horizon > 0.0) || !cfg.horizon.is_finite() {
        return Err(invalid("horizon", "must be positive and finite"));
    }
    let kernel = Kernel::new(cfg.hurst)?;
    let policy = TruncationPolicy::new(cfg.epsilon, cfg.lookback)?;
    let m = cfg.level;
    let mut reports = vec![stationarity(cfg, &kernel, &policy)?, self_similarity(cfg, &kernel, &policy)?];

    // sampled legs share one cutoff so every marginal uses the same window
    let unit = cfg.horizon.min(1.0);
    let dt = (-2.0 * m as f64).exp2();
    let index = |frac: f64| ((frac * unit / dt).round() as usize).max(1);
    let times = [0.25, 0.5, 1.0];
    let top = index(1.0);
    let v = policy.cutoff(top, m, &kernel);
    let weights: Vec<MovingAverageWeights> = times
        .iter()
        .map(|&f| weights_with_cutoff(index(f), m, &kernel, v))
        .collect::<Result<_>>()?;
    let samples: Vec<[f64; 3]> = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| -> Result<[f64; 3]> {
            let mut bm = TwoSidedBm::new(replica_seed(cfg.seed, i as u64));
            bm.ensure_steps(m, top, v as usize)?;
            Ok([weights[0].apply(&bm)?, weights[1].apply(&bm)?, weights[2].apply(&bm)?])
        })
        .collect::<Result<_>>()?;
    let col = |j: usize| samples.iter().map(|s| s[j]).collect::<Vec<f64>>();
    let at_one = col(2);
    let var_exact = weights[2].sum_of_squares();
    let sd = var_exact.sqrt();
    let config = to_value(cfg);

    let ks = ks_normal(&at_one, sd, NORMALITY_LEVEL);
    reports.push(VerificationReport {
        check: "normality".into(),
        seed: cfg.seed,
        config: config.clone(),
        replicas: cfg.replicas,
        statistic: ks.statistic,
        bound: ks.critical,
        pass: ks.p_value >= NORMALITY_LEVEL,
        hard: false,
        notes: format!("Kolmogorov-Smirnov against N(0, {var_exact:.6}), p = {:.4}", ks.p_value),
        details: json!({"p_value": ks.p_value, "level": NORMALITY_LEVEL, "variance": var_exact, "cutoff": v}),
    });

    let model = CovarianceModel::new(cfg.hurst)?;
    for (s, t) in COVARIANCE_PAIRS {
        let pos = |x: f64| times.iter().position(|&y| y == x).unwrap();
        let (i, j) = (pos(s), pos(t));
        let (cov, se) = covariance_with_se(&col(i), &col(j));
        let (ts, tt) = (weights[i].k as f64 * dt, weights[j].k as f64 * dt);
        let oracle = model.cov(ts, tt)?;
        let truncated: f64 = weights[i]
            .as_slice()
            .iter()
            .zip(weights[j].as_slice())
            .map(|(a, b)| a * b)
            .sum();
        let z = (cov - oracle) / se;
        reports.push(VerificationReport {
            check: format!("covariance_{ts}_{tt}"),
            seed: cfg.seed,
            config: config.clone(),
            replicas: cfg.replicas,
            statistic: z.abs(),
            bound: 3.0,
            pass: z.abs() <= 3.0,
            hard: false,
            notes: "distance from the oracle covariance in Monte Carlo standard errors".into(),
            details: json!({
                "s": ts, "t": tt, "empirical": cov, "standard_error": se,
                "oracle": oracle, "truncated_exact": truncated, "cutoff": v,
            }),
        });
    }

    // P(|B(1)| >= x sd) <= 2 exp(-x^2/2) for a centred Gaussian
    let allowance = monte_carlo_allowance(cfg.replicas);
    let worst = [1.0f64, 2.0, 3.0]
        .iter()
        .map(|&x| {
            let freq = at_one.iter().filter(|b| b.abs() >= x * sd).count() as f64 / cfg.replicas as f64;
            freq - 2.0 * (-0.5 * x * x).exp()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    reports.push(VerificationReport {
        check: "large_deviation_tail".into(),
        seed: cfg.seed,
        config,
        replicas: cfg.replicas,
        statistic: worst,
        bound: allowance,
        pass: worst <= allowance,
        hard: false,
        notes: "largest excess of P(|B(1)| >= x sd) over 2 exp(-x^2/2), x in {1, 2, 3}".into(),
        details: serde_json::Value::Null,
    });
    Ok(reports)
}
