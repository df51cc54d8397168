//! Executable checks of the construction: exact identities, probabilistic
//! bounds, convergence-rate fits and distributional tests.
//!
//! Every check produces [`VerificationReport`] records. Only exact identities
//! are `hard`; statistical checks merely flag.

use serde::Serialize;
use serde_json::Value;

use crate::error::{invalid, Result};

mod bounds;
mod delta;
mod distribution;
mod hurst;
mod identities;
mod rates;

pub use bounds::{check_probabilistic_bounds, BoundKind, BoundsConfig, RateBound};
pub use delta::{check_delta_truncation, delta_components, DeltaComponents, DeltaConfig};
pub use distribution::{check_distributional_properties, DistributionConfig, COVARIANCE_PAIRS};
pub use hurst::{estimate_hurst, HurstEstimate};
pub use identities::{check_exact_identities, check_hierarchy_identities, IdentityOutcome};
pub use rates::{fit_convergence_rate, RateConfig, RateFit};

/// One check's outcome, serialisable as a single NDJSON line.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub seed: u64,
    pub config: Value,
    pub replicas: usize,
    pub statistic: f64,
    pub bound: f64,
    pub pass: bool,
    /// Whether a failure indicates an implementation bug rather than bad luck.
    pub hard: bool,
    pub notes: String,
    pub details: Value,
}

impl VerificationReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serialises")
    }

    pub fn is_hard_failure(&self) -> bool {
        self.hard && !self.pass
    }
}

/// Allowance added to every exception budget.
pub fn monte_carlo_allowance(replicas: usize) -> f64 {
    2.0 / (replicas as f64).sqrt()
}

pub(crate) fn require_replicas(replicas: usize) -> Result<()> {
    if replicas == 0 {
        return Err(invalid("replicas", "must be at least 1"));
    }
    Ok(())
}

pub(crate) fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}
