//! Generate, verify and sweep drivers behind the `rwfbm` binary.
//!
//! Every artifact starts with an echo of the configuration that produced it,
//! so re-running that configuration reproduces the file byte for byte.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;
use rwfbm::fbm::FbmPlan;
use rwfbm::seed::replica_seed;
use rwfbm::stats::{mean, median};
use rwfbm::verify::{
    check_delta_truncation, check_distributional_properties, check_exact_identities,
    check_probabilistic_bounds, fit_convergence_rate, BoundKind, BoundsConfig, DeltaConfig,
    DistributionConfig, RateConfig, VerificationReport,
};
use rwfbm::{Kernel, Side, TruncationPolicy, TwoSidedBm};
use serde::Serialize;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Library(#[from] rwfbm::Error),
    #[error("invalid {field}: {reason}")]
    Config { field: &'static str, reason: String },
}

pub type CliResult<T> = Result<T, CliError>;

fn config_error(field: &'static str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        field,
        reason: reason.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Ndjson,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "ndjson" => Ok(Format::Ndjson),
            _ => Err(format!("unknown format `{s}` (expected csv or ndjson)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identities,
    Bounds,
    Rates,
    Distribution,
    #[serde(rename = "lemma4")]
    Delta,
    All,
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "identities" => Suite::Identities,
            "bounds" => Suite::Bounds,
            "rates" => Suite::Rates,
            "distribution" => Suite::Distribution,
            "lemma4" | "delta" => Suite::Delta,
            "all" => Suite::All,
            _ => {
                return Err(format!(
                    "unknown suite `{s}` (expected identities, bounds, rates, distribution, lemma4 or all)"
                ))
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    M,
    Hurst,
}

impl FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "m" | "level" => Ok(Axis::M),
            "hurst" | "h" => Ok(Axis::Hurst),
            _ => Err(format!("unknown axis `{s}` (expected m or hurst)")),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::M => "m",
            Axis::Hurst => "hurst",
        })
    }
}

/// Shared run parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub hurst: f64,
    pub level: u32,
    pub horizon: f64,
    pub seed: u64,
    pub epsilon: f64,
    /// Look-back ceiling in time units; `None` leaves only the epsilon rule.
    pub lookback: Option<f64>,
    pub replicas: usize,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = TruncationPolicy::default();
        Self {
            hurst: 0.75,
            level: 8,
            horizon: 1.0,
            seed: 1,
            epsilon: p.epsilon,
            lookback: p.max_lookback,
            replicas: 200,
            format: Format::Csv,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(config_error("hurst", format!("{} is not in (0, 1)", self.hurst)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(config_error("horizon", format!("{} must be positive and finite", self.horizon)));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(config_error("epsilon", format!("{} must be positive and finite", self.epsilon)));
        }
        if let Some(l) = self.lookback {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(config_error("lookback", format!("{l} must be non-negative and finite")));
            }
        }
        if self.replicas == 0 {
            return Err(config_error("replicas", "must be at least 1"));
        }
        if self.level > 15 {
            return Err(config_error("level", format!("{} is beyond the supported range 0..=15", self.level)));
        }
        Ok(())
    }

    pub fn policy(&self) -> CliResult<TruncationPolicy> {
        Ok(TruncationPolicy::new(self.epsilon, self.lookback)?)
    }
}

/// Real number with 17 significant digits.
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `t, B_m(t), B_m^H(t)` for every grid point of `[0, K]`.
pub fn run_generate<W: Write>(cfg: &RunConfig, out: &mut W) -> CliResult<()> {
    cfg.validate()?;
    let kernel = Kernel::new(cfg.hurst)?;
    let plan = FbmPlan::new(kernel, cfg.level, cfg.horizon, cfg.policy()?)?;
    let mut bm = TwoSidedBm::new(cfg.seed);
    let path = plan.run(&mut bm)?;
    let n = plan.grid_count();
    let bm_values = bm.side(Side::Right).bm(cfg.level)?.grid_values(n)?;
    let dt = path.dt();
    match cfg.format {
        Format::Csv => {
            writeln!(
                out,
                "# rwfbm generate hurst={} level={} horizon={} seed={} epsilon={} lookback={} tail_cutoff_used={} tail_sd_ratio={}",
                cfg.hurst,
                cfg.level,
                cfg.horizon,
                cfg.seed,
                cfg.epsilon,
                cfg.lookback.map_or("none".to_string(), |l| l.to_string()),
                path.tail_cutoff_used,
                real(path.tail_sd_ratio),
            )?;
            writeln!(out, "t,bm,fbm")?;
            for (k, (b, f)) in bm_values.iter().zip(path.values()).enumerate() {
                writeln!(out, "{},{},{}", real(k as f64 * dt), real(*b), real(*f))?;
            }
        }
        Format::Ndjson => {
            let header = json!({
                "config": cfg,
                "tail_cutoff_used": path.tail_cutoff_used,
                "tail_sd_ratio": path.tail_sd_ratio,
            });
            writeln!(out, "{header}")?;
            for (k, (b, f)) in bm_values.iter().zip(path.values()).enumerate() {
                writeln!(out, "{}", json!({"t": k as f64 * dt, "bm": b, "fbm": f}))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Options of `verify` beyond the shared configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub suite: Suite,
    /// Confidence parameter of the probabilistic bounds.
    pub c: f64,
    /// Window half-width of the summation-by-parts check.
    pub delta: f64,
    /// Negates one twisted step before the identity scan.
    pub inject_fault: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            suite: Suite::All,
            c: 3.0,
            delta: 0.01,
            inject_fault: false,
        }
    }
}

fn identity_reports(cfg: &RunConfig, opts: &VerifyOptions) -> CliResult<Vec<VerificationReport>> {
    let m = if opts.inject_fault { cfg.level.max(2) } else { cfg.level.max(1) };
    let mut bm = TwoSidedBm::new(cfg.seed);
    bm.extend_two_sided(m, cfg.horizon)?;
    if opts.inject_fault {
        bm.side_mut(Side::Right).corrupt_step(m - 1, 5);
    }
    Ok(vec![check_exact_identities(&mut bm, m, cfg.horizon)?])
}

fn bounds_reports(cfg: &RunConfig, opts: &VerifyOptions) -> CliResult<Vec<VerificationReport>> {
    let mut kinds = vec![BoundKind::TimeLag, BoundKind::BmConsecutive];
    if cfg.hurst > 0.25 {
        kinds.push(BoundKind::FbmConsecutive);
    }
    let bc = BoundsConfig {
        hurst: cfg.hurst,
        level: cfg.level,
        horizon: cfg.horizon,
        c: opts.c,
        replicas: cfg.replicas,
        seed: cfg.seed,
        epsilon: cfg.epsilon,
        lookback: cfg.lookback,
        uniform_depth: 2,
        kinds,
    };
    Ok(check_probabilistic_bounds(&bc)?)
}

fn rate_reports(cfg: &RunConfig) -> CliResult<Vec<VerificationReport>> {
    let rc = RateConfig {
        hurst: cfg.hurst,
        m_min: cfg.level.saturating_sub(4).max(1),
        m_max: cfg.level,
        horizon: cfg.horizon,
        replicas: cfg.replicas,
        seed: cfg.seed,
        epsilon: cfg.epsilon,
        lookback: cfg.lookback,
    };
    Ok(vec![fit_convergence_rate(&rc)?.1])
}

fn distribution_reports(cfg: &RunConfig) -> CliResult<Vec<VerificationReport>> {
    let dc = DistributionConfig {
        hurst: cfg.hurst,
        level: cfg.level,
        horizon: cfg.horizon,
        replicas: cfg.replicas,
        seed: cfg.seed,
        epsilon: cfg.epsilon,
        lookback: cfg.lookback,
    };
    Ok(check_distributional_properties(&dc)?)
}

fn delta_reports(cfg: &RunConfig, opts: &VerifyOptions) -> CliResult<Vec<VerificationReport>> {
    let dc = DeltaConfig {
        hurst: cfg.hurst,
        t: cfg.horizon.min(1.0),
        delta: opts.delta,
        level: cfg.level,
        replicas: cfg.replicas,
        seed: cfg.seed,
        c: 2.0,
    };
    Ok(vec![check_delta_truncation(&dc)?])
}

/// Runs one suite, writing each report as an NDJSON line as soon as it is ready.
///
/// Returns whether any hard failure occurred.
pub fn run_verify<W: Write>(cfg: &RunConfig, opts: &VerifyOptions, out: &mut W) -> CliResult<bool> {
    cfg.validate()?;
    if !(opts.c > 1.0) {
        return Err(config_error("c", format!("{} must exceed 1", opts.c)));
    }
    let suites = match opts.suite {
        Suite::All => vec![
            Suite::Identities,
            Suite::Bounds,
            Suite::Rates,
            Suite::Distribution,
            Suite::Delta,
        ],
        s => vec![s],
    };
    let mut hard_failure = false;
    for suite in suites {
        let reports = match suite {
            Suite::Identities => identity_reports(cfg, opts)?,
            Suite::Bounds => bounds_reports(cfg, opts)?,
            Suite::Rates => rate_reports(cfg)?,
            Suite::Distribution => distribution_reports(cfg)?,
            Suite::Delta => delta_reports(cfg, opts)?,
            Suite::All => unreachable!(),
        };
        for r in &reports {
            hard_failure |= r.is_hard_failure();
            writeln!(out, "{}", r.to_json_line())?;
        }
        out.flush()?;
    }
    Ok(hard_failure)
}

/// Parses a comma-separated list, expanding `a..b` integer ranges.
pub fn parse_values(s: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: i64 = a.trim().parse().map_err(|_| format!("bad range start in `{part}`"))?;
            let b: i64 = b.trim().parse().map_err(|_| format!("bad range end in `{part}`"))?;
            if b < a {
                return Err(format!("empty range `{part}`"));
            }
            out.extend((a..=b).map(|v| v as f64));
        } else {
            out.push(part.parse().map_err(|_| format!("`{part}` is not a number"))?);
        }
    }
    Ok(out)
}

/// One summary row per axis value: statistics over replicas of
/// `max_k |B_{m+1}^H(t_k) - B_m^H(t_k)|`.
pub fn run_sweep<W: Write>(cfg: &RunConfig, axis: Axis, values: &[f64], out: &mut W) -> CliResult<()> {
    cfg.validate()?;
    if values.len() < 2 {
        return Err(config_error("values", format!("a sweep needs at least 2 values, got {}", values.len())));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = cfg.clone();
        match axis {
            Axis::M => {
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(config_error("values", format!("level {v} is not a non-negative integer")));
                }
                c.level = v as u32;
            }
            Axis::Hurst => c.hurst = v,
        }
        c.validate()?;
        let kernel = Kernel::new(c.hurst)?;
        let policy = c.policy()?;
        let coarse = FbmPlan::new(kernel, c.level, c.horizon, policy)?;
        let fine = FbmPlan::new(kernel, c.level + 1, c.horizon, policy)?;
        let maxima: Vec<f64> = (0..c.replicas)
            .into_par_iter()
            .map(|i| -> rwfbm::Result<f64> {
                let mut bm = TwoSidedBm::new(replica_seed(c.seed, i as u64));
                let a = coarse.run(&mut bm)?.into_values();
                let b = fine.run(&mut bm)?.into_values();
                Ok(a.iter()
                    .enumerate()
                    .map(|(k, x)| (b[4 * k] - x).abs())
                    .fold(0.0, f64::max))
            })
            .collect::<rwfbm::Result<_>>()?;
        rows.push((v, c.hurst, c.level, median(&maxima), mean(&maxima), coarse.cutoff()));
    }
    writeln!(
        out,
        "# rwfbm sweep axis={axis} hurst={} level={} horizon={} seed={} epsilon={} lookback={} replicas={}",
        cfg.hurst,
        cfg.level,
        cfg.horizon,
        cfg.seed,
        cfg.epsilon,
        cfg.lookback.map_or("none".to_string(), |l| l.to_string()),
        cfg.replicas,
    )?;
    writeln!(
        out,
        "# columns: value = swept {axis}; median_max_diff and mean_max_diff summarise max_k |B_(m+1)^H(t_k) - B_m^H(t_k)| over replicas; tail_cutoff_used is the level-m look-back in steps"
    )?;
    writeln!(out, "value,hurst,level,replicas,median_max_diff,mean_max_diff,tail_cutoff_used")?;
    for (v, h, m, med, avg, cut) in rows {
        writeln!(out, "{},{},{},{},{},{},{}", real(v), real(h), m, cfg.replicas, real(med), real(avg), cut)?;
    }
    out.flush()?;
    Ok(())
}
