//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Runs as a plain binary (`harness = false`); expect roughly 20 minutes on one core.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use rwfbm::fbm::{exact_second_moment, fbm_grid_values, FbmPlan};
use rwfbm::seed::{replica_seed, splitmix64};
use rwfbm::stats::mean;
use rwfbm::verify::{
    check_delta_truncation, check_distributional_properties, check_exact_identities,
    check_probabilistic_bounds, estimate_hurst, fit_convergence_rate, BoundKind, BoundsConfig,
    DeltaConfig, DistributionConfig, RateConfig, VerificationReport,
};
use rwfbm::{brute_force_recompute, variance_constant, Kernel, Side, TruncationPolicy, TwoSidedBm};

const SEED: u64 = 20_240_601;

const REFINEMENT_SEEDS: u64 = 100;
const REFINEMENT_MAX_LEVEL: u32 = 8;
const REFINEMENT_TIME_LIMIT: Duration = Duration::from_secs(60);

const DEGENERACY_SEEDS: u64 = 20;
const DEGENERACY_TOL: f64 = 1e-12;

const ORACLE_CASES: u64 = 50;
const ORACLE_MAX_LEVEL: u32 = 6;
const ORACLE_TOL: f64 = 1e-12;

const VARIANCE_HURSTS: [f64; 4] = [0.3, 0.5, 0.75, 0.9];
const VARIANCE_LEVEL: u32 = 10;
const VARIANCE_REL_TOL: f64 = 0.02;
const VARIANCE_TIME_LIMIT: Duration = Duration::from_secs(60);

const DISTRIBUTION_REPLICAS: usize = 2000;
const DISTRIBUTION_LEVEL: u32 = 10;
// Look-back ceiling for the Monte Carlo runs at level 10; see the README.
const DISTRIBUTION_LOOKBACK: f64 = 16.0;
const COVARIANCE_Z: f64 = 3.0;
const NORMALITY_LEVEL: f64 = 0.01;

const RATE_REPLICAS: usize = 200;
const RATE_LOOKBACK: f64 = 1.0;
const RATE_TOL: f64 = 0.20;

const BOUNDS_REPLICAS: usize = 500;
const BOUNDS_LEVEL: u32 = 8;
const BOUNDS_C: f64 = 3.0;

const HURST_PATHS: u64 = 50;
const HURST_LEVEL: u32 = 10;
const HURST_TOL: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn report_line(r: &VerificationReport) -> String {
    format!("{} stat={:.4} bound={:.4} pass={}", r.check, r.statistic, r.bound, r.pass)
}

fn exact_refinement() -> Outcome {
    let start = Instant::now();
    let violations: Vec<f64> = (0..REFINEMENT_SEEDS)
        .into_par_iter()
        .map(|i| {
            let mut bm = TwoSidedBm::new(replica_seed(SEED, i));
            check_exact_identities(&mut bm, REFINEMENT_MAX_LEVEL, 1.0).unwrap().statistic
        })
        .collect();
    let total: f64 = violations.iter().sum();
    let elapsed = start.elapsed();
    outcome(
        total == 0.0 && elapsed < REFINEMENT_TIME_LIMIT,
        format!(
            "{REFINEMENT_SEEDS} seeds, m<={REFINEMENT_MAX_LEVEL}: {total} violations in {:.1}s (limit {}s)",
            elapsed.as_secs_f64(),
            REFINEMENT_TIME_LIMIT.as_secs()
        ),
    )
}

fn kernel_degeneracy() -> Outcome {
    let kernel = Kernel::new(0.5).unwrap();
    let policy = TruncationPolicy::default();
    let worst = (0..DEGENERACY_SEEDS)
        .into_par_iter()
        .map(|i| {
            let mut bm = TwoSidedBm::new(replica_seed(SEED ^ 1, i));
            let mut worst = 0.0f64;
            for m in 0..=REFINEMENT_MAX_LEVEL {
                let path = fbm_grid_values(&mut bm, m, &kernel, 1.0, &policy).unwrap();
                let b = bm.side(Side::Right).bm(m).unwrap().grid_values(path.grid_count()).unwrap();
                for (x, y) in path.values().iter().zip(&b) {
                    worst = worst.max((x - y).abs());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    outcome(
        worst <= DEGENERACY_TOL,
        format!("H=0.5, {DEGENERACY_SEEDS} seeds, m<={REFINEMENT_MAX_LEVEL}: max |B^H - B| = {worst:.2e} (tol {DEGENERACY_TOL:.0e})"),
    )
}

fn unit(x: u64) -> f64 {
    (x >> 11) as f64 / (1u64 << 53) as f64
}

fn oracle_equivalence() -> Outcome {
    let policy = TruncationPolicy::default();
    let mut worst = 0.0f64;
    let mut state = SEED;
    for _ in 0..ORACLE_CASES {
        let mut next = || {
            state = splitmix64(state);
            state
        };
        let hurst = 0.05 + 0.9 * unit(next());
        let m = (next() % (ORACLE_MAX_LEVEL as u64 + 1)) as u32;
        let seed = next();
        let plan = FbmPlan::new(Kernel::new(hurst).unwrap(), m, 1.0, policy).unwrap();
        let k = (next() % plan.grid_count() as u64) as usize;
        let mut bm = TwoSidedBm::new(seed);
        let path = plan.run(&mut bm).unwrap();
        let brute = brute_force_recompute(&bm, m, hurst, k, path.tail_cutoff_used).unwrap();
        worst = worst.max((path.values()[k] - brute).abs());
    }
    outcome(
        worst <= ORACLE_TOL,
        format!("{ORACLE_CASES} cases, m<={ORACLE_MAX_LEVEL}: max abs diff {worst:.2e} (tol {ORACLE_TOL:.0e})"),
    )
}

fn variance_convergence() -> Outcome {
    let start = Instant::now();
    let policy = TruncationPolicy::unbounded(1e-6).unwrap();
    let k = 1usize << (2 * VARIANCE_LEVEL);
    let mut pass = true;
    let mut parts = Vec::new();
    for h in VARIANCE_HURSTS {
        let kernel = Kernel::new(h).unwrap();
        let v = exact_second_moment(k, VARIANCE_LEVEL, &kernel, &policy);
        let target = variance_constant(h).unwrap().value;
        let rel = (v / target - 1.0).abs();
        pass &= rel <= VARIANCE_REL_TOL;
        parts.push(format!("H={h}: {rel:.4}"));
    }
    let elapsed = start.elapsed();
    outcome(
        pass && elapsed < VARIANCE_TIME_LIMIT,
        format!(
            "m={VARIANCE_LEVEL}, relative gaps [{}] (tol {VARIANCE_REL_TOL}) in {:.1}s",
            parts.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

fn distribution_reports() -> Vec<VerificationReport> {
    let cfg = DistributionConfig {
        hurst: 0.75,
        level: DISTRIBUTION_LEVEL,
        horizon: 1.0,
        replicas: DISTRIBUTION_REPLICAS,
        seed: SEED,
        epsilon: 1e-6,
        lookback: Some(DISTRIBUTION_LOOKBACK),
    };
    check_distributional_properties(&cfg).unwrap()
}

fn covariance(reports: &[VerificationReport]) -> Outcome {
    let r = reports.iter().find(|r| r.check == "covariance_0.5_1").unwrap();
    outcome(
        r.statistic <= COVARIANCE_Z,
        format!(
            "H=0.75, m={DISTRIBUTION_LEVEL}, {DISTRIBUTION_REPLICAS} replicas: |z| = {:.3} (limit {COVARIANCE_Z}), empirical {:.5} oracle {:.5}",
            r.statistic,
            r.details["empirical"].as_f64().unwrap_or(f64::NAN),
            r.details["oracle"].as_f64().unwrap_or(f64::NAN)
        ),
    )
}

fn gaussianity(reports: &[VerificationReport]) -> Outcome {
    let r = reports.iter().find(|r| r.check == "normality").unwrap();
    let p = r.details["p_value"].as_f64().unwrap_or(f64::NAN);
    outcome(
        p >= NORMALITY_LEVEL,
        format!(
            "KS on B^H(1), {DISTRIBUTION_REPLICAS} replicas: D = {:.4}, p = {p:.3} (level {NORMALITY_LEVEL})",
            r.statistic
        ),
    )
}

fn rate_fit() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for h in [0.75, 0.375] {
        let cfg = RateConfig {
            hurst: h,
            replicas: RATE_REPLICAS,
            seed: SEED,
            lookback: Some(RATE_LOOKBACK),
            ..RateConfig::default()
        };
        let (fit, _) = fit_convergence_rate(&cfg).unwrap();
        let ok = (fit.slope - fit.target).abs() <= RATE_TOL;
        pass &= ok;
        parts.push(format!("H={h}: slope {:.3} vs {:.3}", fit.slope, fit.target));
    }
    outcome(
        pass,
        format!("m=6..10, {RATE_REPLICAS} replicas: {} (tol {RATE_TOL})", parts.join(", ")),
    )
}

fn exceedance_budgets() -> Outcome {
    let base = BoundsConfig {
        level: BOUNDS_LEVEL,
        horizon: 1.0,
        c: BOUNDS_C,
        replicas: BOUNDS_REPLICAS,
        seed: SEED,
        ..BoundsConfig::default()
    };
    let mut reports = check_probabilistic_bounds(&BoundsConfig {
        hurst: 0.75,
        kinds: vec![BoundKind::TimeLag, BoundKind::BmConsecutive, BoundKind::FbmConsecutive],
        ..base.clone()
    })
    .unwrap();
    reports.extend(
        check_probabilistic_bounds(&BoundsConfig {
            hurst: 0.375,
            kinds: vec![BoundKind::FbmConsecutive],
            ..base
        })
        .unwrap(),
    );
    let parts: Vec<String> = reports
        .iter()
        .map(|r| format!("{}(H={}) {:.3}<={:.3}", r.check, r.config["hurst"], r.statistic, r.bound))
        .collect();
    outcome(
        reports.iter().all(|r| r.pass),
        format!("m={BOUNDS_LEVEL}, C={BOUNDS_C}, {BOUNDS_REPLICAS} replicas: {}", parts.join(", ")),
    )
}

fn delta_truncation() -> Outcome {
    let cfg = DeltaConfig {
        seed: SEED,
        ..DeltaConfig::default()
    };
    let r = check_delta_truncation(&cfg).unwrap();
    outcome(
        r.pass,
        format!("H=0.75, t=1, delta=0.01, m=10, {} replicas: {}", cfg.replicas, report_line(&r)),
    )
}

fn hurst_recovery() -> Outcome {
    let policy = TruncationPolicy::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for h in [0.5, 0.75] {
        let plan = FbmPlan::new(Kernel::new(h).unwrap(), HURST_LEVEL, 1.0, policy).unwrap();
        let estimates: Vec<f64> = (0..HURST_PATHS)
            .into_par_iter()
            .map(|i| {
                let mut bm = TwoSidedBm::new(replica_seed(SEED ^ 2, i));
                estimate_hurst(plan.run(&mut bm).unwrap().values()).unwrap().hurst
            })
            .collect();
        let avg = mean(&estimates);
        pass &= (avg - h).abs() <= HURST_TOL;
        parts.push(format!("H={h}: mean estimate {avg:.4}"));
    }
    outcome(
        pass,
        format!("m={HURST_LEVEL}, {HURST_PATHS} paths: {} (tol {HURST_TOL})", parts.join(", ")),
    )
}

fn main() -> ExitCode {
    // Harness flags forwarded by cargo (e.g. --nocapture) are ignored.
    let mut failures = 0;
    let mut emit = |name: &str, elapsed: Duration, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failures += usize::from(!o.pass);
        println!("{tag} {name}: {} [{:.1}s]", o.detail, elapsed.as_secs_f64());
    };
    let timed = |f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        (t.elapsed(), o)
    };
    let (d, o) = timed(&exact_refinement);
    emit("exact_refinement", d, o);
    let (d, o) = timed(&kernel_degeneracy);
    emit("kernel_degeneracy", d, o);
    let (d, o) = timed(&oracle_equivalence);
    emit("oracle_equivalence", d, o);
    let (d, o) = timed(&variance_convergence);
    emit("variance_convergence", d, o);
    let t = Instant::now();
    let dist = distribution_reports();
    let dist_time = t.elapsed();
    emit("covariance_reproduction", dist_time, covariance(&dist));
    let (d, o) = timed(&rate_fit);
    emit("rate_fit", d, o);
    let (d, o) = timed(&exceedance_budgets);
    emit("exceedance_budgets", d, o);
    emit("gaussianity", dist_time, gaussianity(&dist));
    let (d, o) = timed(&delta_truncation);
    emit("delta_truncation", d, o);
    let (d, o) = timed(&hurst_recovery);
    emit("hurst_recovery", d, o);
    println!("acceptance: {failures} of 10 criteria failed");
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
