//! Delay-optimal partial offloading for NOMA uplink edge computing.
//!
//! The [`solver`] module finds the min-max completion time for any number of
//! users by bisection on the delay level. [`closed_form`] gives the analytic
//! two-user solution, [`baselines`] the comparison schemes, and [`scenario`]
//! the seeded channel generator.

// Range checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod closed_form;
pub mod error;
pub mod lambert;
pub mod model;
pub mod oracle;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use model::{Allocation, ChannelRealization, DelayBreakdown, ScenarioConfig, ServerSpec, UserSpec};
