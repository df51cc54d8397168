//! Random-walk construction of fractional Brownian motion.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bits;
pub mod error;
pub mod fbm;
pub mod oracle;
pub mod seed;
pub mod stats;
pub mod verify;
pub mod walk;

pub use error::{Error, Result};
pub use fbm::{
    exact_second_moment, fbm_grid_values, moving_average_weights, FbmLevelPath, FbmPlan, Kernel,
    MovingAverageWeights, TruncationPolicy,
};
pub use oracle::{brute_force_recompute, fbm_covariance, reference_sample, variance_constant};
pub use verify::{estimate_hurst, VerificationReport};
pub use walk::{BmApprox, Hierarchy, Side, TwoSidedBm};
