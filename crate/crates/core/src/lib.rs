//! Resource allocation for relay-assisted mobile edge computing.
//!
//! User A computes part of a task locally and offloads the rest to an edge
//! server co-located with a relay; the results reach user B over an
//! amplify-and-forward subchannel (local part) and a decode-and-forward
//! subchannel (offloaded part). The crate minimizes the weighted sum of
//! system energy and end-to-end delay over the offloading fraction, four
//! transmit powers and two CPU speeds.
//!
//! - [`model`]: rates, delays, energies, objectives and gradients.
//! - [`solver`]: smoothed inexact block coordinate descent.
//! - [`projection`]: projection onto the convexified power set.
//! - [`sca`]: successive convex approximation baseline.
//! - [`oracle`]: brute-force grid oracle.
//! - [`scenario`] and [`experiment`]: seeded channel draws, convergence
//!   traces and tradeoff sweeps.

pub mod bisect;
pub mod error;
pub mod experiment;
pub mod model;
pub mod oracle;
pub mod projection;
pub mod sca;
pub mod scenario;
pub mod solver;

pub use error::SolverError;
pub use model::{
    evaluate_metrics, grad_smoothed_objective_y, linearized_constraint, relay_power_lhs, Allocation, Metrics,
    ModelError, PowerBlock, ScalarBlock, SystemParams,
};
pub use oracle::{grid_oracle, GridSpec, OracleResult};
pub use projection::{project_power, project_power_weighted, Projection};
pub use sca::{sca_baseline, ScaConfig};
pub use solver::{
    initial_point, kkt_residual, optimize_scalar_block, pg_update_power, solve_bcd, SolveResult, SolveStatus,
    SolveTrace, SolverConfig, StepMetric, TraceRow,
};
