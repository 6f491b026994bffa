//! Successive convex approximation baseline.
//!
//! Each outer iteration freezes the linearization point `y_ref` of the relay
//! budget and solves the resulting problem to stationarity with the same
//! block updates as [`solve_bcd`](crate::solver::solve_bcd), then moves
//! `y_ref` to the new powers. Because every inner problem is solved rather
//! than stepped, the baseline needs few outer iterations but many more
//! gradient evaluations in total.

use crate::error::SolverError;
use crate::model::{smoothed_objective, Allocation, SystemParams};
use crate::solver::{
    kkt_residual, kkt_residual_at, power_step, prepare_start, release_idle_powers, scalar_sweep, trace_row,
    PowerStep, SolveResult, SolveStatus, SolveTrace, SolverConfig,
};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScaConfig {
    pub max_outer_iters: usize,
    /// Outer loop stops once `f_beta` decreases by less than this, relative.
    pub rel_obj_tol: f64,
    pub inner_max_iters: usize,
    /// Stationarity target of each inner solve, under the frozen linearization.
    pub inner_kkt_tol: f64,
    pub inner_rel_tol: f64,
    pub inner_stall_iters: usize,
}

impl Default for ScaConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 100,
            rel_obj_tol: 1e-8,
            inner_max_iters: 10_000,
            inner_kkt_tol: 1e-9,
            inner_rel_tol: 1e-13,
            inner_stall_iters: 5,
        }
    }
}

impl ScaConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.rel_obj_tol > 0.0 && self.inner_kkt_tol > 0.0 && self.inner_rel_tol > 0.0) {
            return Err(SolverError::InvalidConfig("sca tolerances must be positive".into()));
        }
        if self.inner_stall_iters == 0 {
            return Err(SolverError::InvalidConfig("inner_stall_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Inner solve under a frozen linearization point; returns the number of
/// block sweeps and the last power step.
fn solve_frozen(
    x: &mut Allocation,
    p: &SystemParams,
    cfg: &SolverConfig,
    sca: &ScaConfig,
) -> Result<(usize, Option<PowerStep>), SolverError> {
    let y_ref = x.power();
    let mut f_prev = smoothed_objective(x, p, cfg.beta);
    let mut stalled = 0;
    let mut last = None;
    for iter in 1..=sca.inner_max_iters {
        scalar_sweep(x, p, cfg);
        let step = power_step(x, &y_ref, p, cfg)?;
        x.set_power(step.y);
        last = Some(step);
        if kkt_residual_at(x, &y_ref, p, cfg) <= sca.inner_kkt_tol {
            return Ok((iter, last));
        }
        let f = smoothed_objective(x, p, cfg.beta);
        let rel = (f_prev - f) / f_prev.abs().max(f64::MIN_POSITIVE);
        f_prev = f;
        if rel < sca.inner_rel_tol {
            stalled += 1;
            if stalled >= sca.inner_stall_iters {
                return Ok((iter, last));
            }
        } else {
            stalled = 0;
        }
    }
    Ok((sca.inner_max_iters, last))
}

/// Runs the baseline from `init` (or the solver's initial point). Trace rows
/// are outer iterations.
pub fn sca_baseline(
    p: &SystemParams,
    cfg: &SolverConfig,
    sca: &ScaConfig,
    init: Option<Allocation>,
) -> Result<SolveResult, SolverError> {
    let started = Instant::now();
    sca.validate()?;
    let mut x = prepare_start(p, cfg, init)?;
    let mut trace = SolveTrace::default();
    trace.rows.push(trace_row(0, &x, p, cfg, None, kkt_residual(&x, p, cfg), started));

    let mut status = SolveStatus::MaxIterations;
    let mut f_prev = smoothed_objective(&x, p, cfg.beta);
    for iter in 1..=sca.max_outer_iters {
        let (_, step) = solve_frozen(&mut x, p, cfg, sca)?;
        x.set_power(release_idle_powers(x.power(), p));
        let kkt = kkt_residual(&x, p, cfg);
        let row = trace_row(iter, &x, p, cfg, step.as_ref(), kkt, started);
        let f = row.smoothed_objective;
        trace.rows.push(row);
        let rel = (f_prev - f) / f_prev.abs().max(f64::MIN_POSITIVE);
        f_prev = f;
        if rel < sca.rel_obj_tol {
            status = if kkt <= cfg.kkt_tol { SolveStatus::KktReached } else { SolveStatus::Stalled };
            break;
        }
    }
    Ok(SolveResult { allocation: x, trace, status })
}
