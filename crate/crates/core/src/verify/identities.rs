use serde::Serialize;
use serde_json::json;

use super::VerificationReport;
use crate::error::{invalid, Result};
use crate::walk::{build_bm_approx, grid_count, Hierarchy, TwoSidedBm};

/// Per-level result of the exact identity scan on one side.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityOutcome {
    /// The finer level `m + 1`.
    pub level: u32,
    pub checked: usize,
    pub integer_violations: usize,
    pub grid_violations: usize,
    /// `max_k |T_{m+1}(k) 4^{-(m+1)} - k 4^{-m}|`.
    pub max_time_lag: f64,
    /// `T_{m+1}(k) 4^{-(m+1)} - k 4^{-m}` for `k = 1..=min(checked, 8)`.
    pub first_lags: Vec<f64>,
}

/// Scans `S̃_{m+1}(T_{m+1}(k)) = 2 S̃_m(k)` and its shrunken form for `k <= K 4^m`.
pub fn check_hierarchy_identities(h: &Hierarchy, m_max: u32, horizon: f64) -> Result<Vec<IdentityOutcome>> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(invalid("horizon", "must be positive and finite"));
    }
    let mut out = Vec::new();
    for m in 0..m_max {
        let (Some(coarse), Some(fine)) = (h.level(m), h.level(m + 1)) else {
            return Err(invalid("m_max", format!("level {} has not been generated", m + 1)));
        };
        let n = grid_count(horizon, m).min(fine.bridges()).min(coarse.len());
        let (bc, bf) = (build_bm_approx(coarse), build_bm_approx(fine));
        let (dt_c, dt_f) = (bc.dt(), bf.dt());
        let mut res = IdentityOutcome {
            level: m + 1,
            checked: n,
            integer_violations: 0,
            grid_violations: 0,
            max_time_lag: 0.0,
            first_lags: Vec::new(),
        };
        for k in 0..=n {
            let t = fine.stopping_time(k).expect("bridge count checked");
            if fine.partial_sum(t) != 2 * coarse.partial_sum(k) {
                res.integer_violations += 1;
            }
            if bf.value_at_index(t)? != bc.value_at_index(k)? {
                res.grid_violations += 1;
            }
            let lag = t as f64 * dt_f - k as f64 * dt_c;
            res.max_time_lag = res.max_time_lag.max(lag.abs());
            if (1..=8).contains(&k) {
                res.first_lags.push(lag);
            }
        }
        out.push(res);
    }
    Ok(out)
}

/// Exact refinement identities on both sides of `bm` for levels `1..=m_max`.
///
/// Extends `bm` over `[-K, K]` first. Any violation is a hard failure.
pub fn check_exact_identities(bm: &mut TwoSidedBm, m_max: u32, horizon: f64) -> Result<VerificationReport> {
    bm.extend_two_sided(m_max, horizon)?;
    Ok(identity_report(bm, m_max, horizon))
}

// Report for an already-extended walk; used directly by fixture tests.
pub(crate) fn identity_report(bm: &TwoSidedBm, m_max: u32, horizon: f64) -> VerificationReport {
    let scan = |h: &Hierarchy| check_hierarchy_identities(h, m_max, horizon);
    let (right, left) = match (scan(bm.right()), scan(bm.left())) {
        (Ok(r), Ok(l)) => (r, l),
        (r, l) => {
            let err = r.err().or(l.err()).map(|e| e.to_string()).unwrap_or_default();
            return failed_report(bm.master_seed(), m_max, horizon, err);
        }
    };
    let violations: usize = right
        .iter()
        .chain(&left)
        .map(|o| o.integer_violations + o.grid_violations)
        .sum();
    let max_lag = right.iter().map(|o| o.max_time_lag).fold(0.0, f64::max);
    VerificationReport {
        check: "exact_identities".into(),
        seed: bm.master_seed(),
        config: json!({"m_max": m_max, "horizon": horizon}),
        replicas: 1,
        statistic: violations as f64,
        bound: 0.0,
        pass: violations == 0,
        hard: true,
        notes: format!("violations across both sides; largest right-side time lag {max_lag:.6}"),
        details: json!({"right": right, "left": left}),
    }
}

fn failed_report(seed: u64, m_max: u32, horizon: f64, err: String) -> VerificationReport {
    VerificationReport {
        check: "exact_identities".into(),
        seed,
        config: json!({"m_max": m_max, "horizon": horizon}),
        replicas: 1,
        statistic: f64::NAN,
        bound: 0.0,
        pass: false,
        hard: true,
        notes: err,
        details: serde_json::Value::Null,
    }
}
