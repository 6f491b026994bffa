//! Inexact block coordinate descent on the smoothed objective.
//!
//! Each outer iteration updates, in order and always with the latest values
//! of the other blocks:
//!
//! 1. `alpha`, `F_l`, `F_r`: exact minimization of the convex scalar
//!    subproblem by derivative bisection;
//! 2. the power block `y`: one projected-gradient step
//!    `y+ = P_Omega[y - D grad f_beta(y)]` with `Omega` the feasible set whose
//!    relay budget is linearized at the current `y` and `D` a diagonal step
//!    metric (see [`StepMetric`]), followed by an Armijo backtracking search
//!    along `y + mu (y+ - y)`.
//!
//! `Omega` is an inner approximation of the true feasible set, so every
//! iterate stays feasible for the original bilinear relay budget.

use crate::bisect::minimize_by_derivative;
use crate::error::SolverError;
use crate::model::{
    evaluate_unchecked, grad_smoothed_objective_y, smoothed_objective, smoothed_partial, Allocation,
    PowerBlock, ScalarBlock, SystemParams,
};
use crate::projection::{project_power, project_power_weighted};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Tuning knobs of the solver. Defaults follow the reference setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Log-sum-exp smoothing factor.
    pub beta: f64,
    pub max_outer_iters: usize,
    /// Relative decrease of `f_beta` below which an iteration counts as stalled.
    pub rel_obj_tol: f64,
    /// Consecutive stalled iterations before stopping.
    pub stall_iters: usize,
    /// Bisection tolerance as a fraction of the search interval width.
    pub bisect_tol: f64,
    pub armijo_sigma: f64,
    pub armijo_shrink: f64,
    pub max_backtracks: usize,
    pub mu_init: f64,
    /// Scaling of the gradient step inside the projection.
    pub step_metric: StepMetric,
    /// Multiplier on the gradient inside the projection.
    pub grad_step_scale: f64,
    /// Tolerance on the linearized relay constraint, relative to `p_relay_max`.
    pub dual_tol: f64,
    pub dual_bracket_growth: f64,
    pub max_bracket_steps: usize,
    /// Lower clamp for both CPU speeds, in Hz.
    pub f_floor: f64,
    pub kkt_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta: 10.0,
            max_outer_iters: 500,
            rel_obj_tol: 1e-8,
            stall_iters: 3,
            bisect_tol: 1e-10,
            armijo_sigma: 0.1,
            armijo_shrink: 0.5,
            max_backtracks: 30,
            mu_init: 1.0,
            step_metric: StepMetric::DiagonalNewton,
            grad_step_scale: 1.0,
            dual_tol: 1e-10,
            dual_bracket_growth: 2.0,
            max_bracket_steps: 200,
            f_floor: 1e3,
            kkt_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, p: &SystemParams) -> Result<(), SolverError> {
        let bad = |what: &str| Err(SolverError::InvalidConfig(what.to_string()));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive");
        }
        if !(self.armijo_sigma > 0.0 && self.armijo_sigma < 1.0) {
            return bad("armijo_sigma must lie in (0, 1)");
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return bad("armijo_shrink must lie in (0, 1)");
        }
        if !(self.mu_init > 0.0 && self.mu_init <= 1.0) {
            return bad("mu_init must lie in (0, 1]");
        }
        if !(self.grad_step_scale > 0.0 && self.grad_step_scale.is_finite()) {
            return bad("grad_step_scale must be positive");
        }
        let tolerances = [self.rel_obj_tol, self.bisect_tol, self.dual_tol, self.kkt_tol];
        if !tolerances.iter().all(|t| *t > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.dual_bracket_growth > 1.0) {
            return bad("dual_bracket_growth must exceed 1");
        }
        if !(self.f_floor > 0.0 && self.f_floor < p.f_local_max.min(p.f_edge_max)) {
            return bad("f_floor must lie strictly between 0 and both speed caps");
        }
        Ok(())
    }

    /// Interval of a scalar block, with speeds floored at `f_floor`.
    pub fn bounds(&self, which: ScalarBlock, p: &SystemParams) -> (f64, f64) {
        match which {
            ScalarBlock::Alpha => (0.0, 1.0),
            ScalarBlock::FLocal => (self.f_floor, p.f_local_max),
            ScalarBlock::FEdge => (self.f_floor, p.f_edge_max),
        }
    }
}

/// Metric of the projected-gradient step on the power block.
///
/// The step is `y+ = argmin_{y in Omega} |y - (y0 - s D grad)|^2_{D^-1}` for a
/// positive diagonal `D` and `s = grad_step_scale`, followed by the Armijo
/// search on the segment toward `y+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMetric {
    /// `D = I`: plain gradient step and Euclidean projection.
    Euclidean,
    /// `D_ii = 1 / (d^2 f / dy_i^2)`, estimated by differencing the analytic
    /// gradient, with each coordinate's tentative move capped at
    /// [`MAX_RELATIVE_MOVE`] times its magnitude. The powers live on very
    /// different scales (the AF amplification gain settles in the hundreds
    /// or thousands while the uplink powers settle near a milliwatt), so a
    /// single step length cannot serve all four coordinates.
    #[default]
    DiagonalNewton,
}

/// Cap on `|D_ii * grad_i| / max(y_i, floor_i)` under [`StepMetric::DiagonalNewton`].
pub const MAX_RELATIVE_MOVE: f64 = 4.0;

/// Smallest magnitudes used by [`StepMetric::DiagonalNewton`], relative to
/// each power's natural scale, so that powers at zero can still move.
const METRIC_FLOOR: f64 = 1e-9;

fn natural_scales(p: &SystemParams) -> [f64; 4] {
    [
        p.p_user_max,
        p.p_user_max,
        p.p_relay_max / (p.noise_r1 + p.gain_a1 * p.p_user_max),
        p.p_relay_max,
    ]
}

/// Diagonal of the Hessian of `f_beta` in the power block by central
/// differences of the analytic gradient. Entries are NaN where the
/// gradient is undefined at a probe point.
pub fn power_curvature(x: &Allocation, p: &SystemParams, beta: f64) -> [f64; 4] {
    let scales = natural_scales(p);
    let y = x.power().to_array();
    std::array::from_fn(|i| {
        let h = 1e-4 * y[i].max(METRIC_FLOOR * scales[i]);
        let lo = (y[i] - h).max(0.0);
        let hi = y[i] + h;
        let probe = |v: f64| {
            let mut z = y;
            z[i] = v;
            grad_smoothed_objective_y(&x.with_power(PowerBlock::from_array(z)), p, beta).map(|g| g[i])
        };
        match (probe(hi), probe(lo)) {
            (Ok(a), Ok(b)) => (a - b) / (hi - lo),
            _ => f64::NAN,
        }
    })
}

fn step_scaling(metric: StepMetric, x: &Allocation, grad: &[f64; 4], p: &SystemParams, beta: f64) -> [f64; 4] {
    match metric {
        StepMetric::Euclidean => [1.0; 4],
        StepMetric::DiagonalNewton => {
            let scales = natural_scales(p);
            let y = x.power().to_array();
            let curvature = power_curvature(x, p, beta);
            std::array::from_fn(|i| {
                let magnitude = y[i].max(METRIC_FLOOR * scales[i]);
                let cap = if grad[i] != 0.0 {
                    MAX_RELATIVE_MOVE * magnitude / grad[i].abs()
                } else {
                    f64::INFINITY
                };
                let newton = if curvature[i] > 0.0 { 1.0 / curvature[i] } else { f64::INFINITY };
                let d = newton.min(cap);
                if d.is_finite() && d > 0.0 {
                    d
                } else {
                    // No gradient and no usable curvature: the coordinate
                    // does not move; any positive weight will do.
                    magnitude
                }
            })
        }
    }
}

/// One row of a [`SolveTrace`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub smoothed_objective: f64,
    pub objective: f64,
    pub allocation: Allocation,
    /// Accepted Armijo step (0 for the initial row and for null steps).
    pub mu: f64,
    /// Multiplier of the linearized relay budget in the last projection.
    pub lambda: f64,
    pub kkt_residual: f64,
    pub wall_s: f64,
    pub null_step: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub rows: Vec<TraceRow>,
}

impl SolveTrace {
    /// Whether `f_beta` never increases by more than `rel_tol` relative.
    pub fn is_monotone(&self, rel_tol: f64) -> bool {
        self.rows.windows(2).all(|w| {
            let (a, b) = (w[0].smoothed_objective, w[1].smoothed_objective);
            b <= a + rel_tol * a.abs()
        })
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn wall_s(&self) -> f64 {
        self.last().map_or(0.0, |r| r.wall_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    KktReached,
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub allocation: Allocation,
    pub trace: SolveTrace,
    pub status: SolveStatus,
}

impl SolveResult {
    /// Outer iterations performed (the trace also holds the starting row).
    pub fn iterations(&self) -> usize {
        self.trace.rows.len().saturating_sub(1)
    }
}

/// Feasible starting point with half of the relay budget used.
pub fn initial_point(p: &SystemParams) -> Allocation {
    let p1a = p.p_user_max / 4.0;
    let relay = 0.5 * p.p_relay_max / (p.noise_r1 + p.gain_a1 * p1a + 1.0);
    Allocation {
        alpha: 0.5,
        p1a,
        p2a: p1a,
        p1r: relay,
        p2r: relay,
        f_local: p.f_local_max / 2.0,
        f_edge: p.f_edge_max / 2.0,
    }
}

/// Load share used to choose the variables of an idle branch.
const IDLE_PROBE_LOAD: f64 = 1e-6;

/// At `alpha = 0` (or 1) the objective does not depend on the edge-side (or
/// local-side) CPU speed and powers. Those variables are chosen as if the
/// idle branch carried a vanishing load, so that the alpha block sees the
/// best case when deciding whether to move load back onto it.
pub(crate) fn idle_probe(x: &Allocation) -> Allocation {
    let alpha = if x.alpha == 0.0 {
        IDLE_PROBE_LOAD
    } else if x.alpha == 1.0 {
        1.0 - IDLE_PROBE_LOAD
    } else {
        x.alpha
    };
    Allocation { alpha, ..*x }
}

/// Minimizer of `f_beta` over one scalar block with the others fixed.
pub fn optimize_scalar_block(which: ScalarBlock, x: &Allocation, p: &SystemParams, cfg: &SolverConfig) -> f64 {
    let (lo, hi) = cfg.bounds(which, p);
    let tol = cfg.bisect_tol * (hi - lo);
    let current = which.get(x);
    match which {
        ScalarBlock::Alpha => {
            let m = evaluate_unchecked(x, p, cfg.beta);
            let af_loaded = p.compress_ratio > 0.0;
            let edge_closed = m.r_df1 <= 0.0 || (af_loaded && m.r_df2 <= 0.0);
            let local_closed = af_loaded && m.r_af <= 0.0;
            match (local_closed, edge_closed) {
                (true, true) => return current,
                (false, true) => return 0.0,
                (true, false) => return 1.0,
                (false, false) => {}
            }
        }
        _ => {}
    }
    let mut probe = if which == ScalarBlock::Alpha { *x } else { idle_probe(x) };
    if !smoothed_objective(&probe, p, cfg.beta).is_finite() {
        return current;
    }
    minimize_by_derivative(lo, hi, tol, |v| {
        which.set(&mut probe, v);
        smoothed_partial(&probe, p, cfg.beta, which)
    })
}

/// Outcome of one projected-gradient step on the power block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerStep {
    pub y: PowerBlock,
    pub mu: f64,
    pub lambda: f64,
    /// The line search (or projection) failed and `y` is the input unchanged.
    pub null_step: bool,
}

/// One projected-gradient step with Armijo backtracking, linearizing the
/// relay budget at the current powers.
pub fn pg_update_power(x: &Allocation, p: &SystemParams, cfg: &SolverConfig) -> Result<PowerStep, SolverError> {
    power_step(x, &x.power(), p, cfg)
}

/// As [`pg_update_power`] with the linearization point given explicitly.
/// `x.power()` must lie in `Omega(y_ref)`.
pub fn power_step(
    x: &Allocation,
    y_ref: &PowerBlock,
    p: &SystemParams,
    cfg: &SolverConfig,
) -> Result<PowerStep, SolverError> {
    let y = x.power().to_array();
    let null = PowerStep { y: x.power(), mu: 0.0, lambda: 0.0, null_step: true };
    let f_true = smoothed_objective(x, p, cfg.beta);
    let mut probe = idle_probe(x);
    if !smoothed_objective(&probe, p, cfg.beta).is_finite() {
        probe = *x;
    }
    let grad = grad_smoothed_objective_y(&probe, p, cfg.beta)?;
    let f0 = smoothed_objective(&probe, p, cfg.beta);
    let scaling = step_scaling(cfg.step_metric, &probe, &grad, p, cfg.beta);
    let z: [f64; 4] = std::array::from_fn(|i| y[i] - cfg.grad_step_scale * scaling[i] * grad[i]);
    let weights = scaling.map(|d| 1.0 / d);
    let proj = match project_power_weighted(z, weights, y_ref, p, cfg) {
        Ok(proj) => proj,
        Err(SolverError::BracketNotFound { .. }) => return Ok(null),
        Err(e) => return Err(e),
    };
    let target = proj.y.to_array();
    let d: [f64; 4] = std::array::from_fn(|i| target[i] - y[i]);
    // Squared step length in the projection norm; the sufficient decrease
    // is measured against it.
    let dd: f64 = (0..4).map(|i| weights[i] * d[i] * d[i]).sum();
    if target == y {
        return Ok(PowerStep { y: x.power(), mu: 0.0, lambda: proj.lambda, null_step: false });
    }

    let mut mu = cfg.mu_init;
    for _ in 0..=cfg.max_backtracks {
        let trial = if mu == 1.0 {
            proj.y
        } else {
            PowerBlock::from_array(std::array::from_fn(|i| (y[i] + mu * d[i]).max(0.0)))
        };
        let f1 = smoothed_objective(&probe.with_power(trial), p, cfg.beta);
        let sufficient = f1 <= f0 - cfg.armijo_sigma * mu * dd / cfg.grad_step_scale;
        if sufficient && smoothed_objective(&x.with_power(trial), p, cfg.beta) <= f_true {
            return Ok(PowerStep { y: trial, mu, lambda: proj.lambda, null_step: false });
        }
        mu *= cfg.armijo_shrink;
    }
    Ok(PowerStep { lambda: proj.lambda, ..null })
}

/// Blockwise stationarity measure; zero exactly at blockwise KKT points.
pub fn kkt_residual(x: &Allocation, p: &SystemParams, cfg: &SolverConfig) -> f64 {
    kkt_residual_at(x, &x.power(), p, cfg)
}

pub(crate) fn kkt_residual_at(x: &Allocation, y_ref: &PowerBlock, p: &SystemParams, cfg: &SolverConfig) -> f64 {
    let mut worst = 0.0f64;
    for which in ScalarBlock::ALL {
        let (lo, hi) = cfg.bounds(which, p);
        let g = smoothed_partial(x, p, cfg.beta, which);
        let g = if g.is_nan() { 0.0 } else { g };
        let s = which.get(x);
        worst = worst.max((s - (s - g).clamp(lo, hi)).abs());
    }
    let y = x.power().to_array();
    let Ok(grad) = grad_smoothed_objective_y(x, p, cfg.beta) else {
        return f64::INFINITY;
    };
    let z: [f64; 4] = std::array::from_fn(|i| y[i] - grad[i]);
    match project_power(z, y_ref, p, cfg) {
        Ok(proj) => {
            let t = proj.y.to_array();
            let r = (0..4).map(|i| (y[i] - t[i]).powi(2)).sum::<f64>().sqrt();
            worst.max(r)
        }
        Err(_) => f64::INFINITY,
    }
}

/// Zeroes powers of links that carry no bits for any offloading fraction.
/// With no result bits the AF subchannel and DF downlink are idle, so their
/// powers cost nothing and help nothing.
pub fn release_idle_powers(y: PowerBlock, p: &SystemParams) -> PowerBlock {
    if p.compress_ratio == 0.0 {
        PowerBlock { p1a: 0.0, p1r: 0.0, p2r: 0.0, ..y }
    } else {
        y
    }
}

/// Updates the three scalar blocks in order, keeping each update only if it
/// does not increase `f_beta`.
pub(crate) fn scalar_sweep(x: &mut Allocation, p: &SystemParams, cfg: &SolverConfig) {
    for which in ScalarBlock::ALL {
        let before = smoothed_objective(x, p, cfg.beta);
        let old = which.get(x);
        let new = optimize_scalar_block(which, x, p, cfg);
        which.set(x, new);
        if !(smoothed_objective(x, p, cfg.beta) <= before) {
            which.set(x, old);
        }
    }
}

pub(crate) fn trace_row(
    iter: usize,
    x: &Allocation,
    p: &SystemParams,
    cfg: &SolverConfig,
    step: Option<&PowerStep>,
    kkt: f64,
    started: Instant,
) -> TraceRow {
    let m = evaluate_unchecked(x, p, cfg.beta);
    TraceRow {
        iter,
        smoothed_objective: m.smoothed_objective,
        objective: m.objective,
        allocation: *x,
        mu: step.map_or(0.0, |s| s.mu),
        lambda: step.map_or(0.0, |s| s.lambda),
        kkt_residual: kkt,
        wall_s: started.elapsed().as_secs_f64(),
        null_step: step.is_some_and(|s| s.null_step),
    }
}

pub(crate) fn prepare_start(
    p: &SystemParams,
    cfg: &SolverConfig,
    init: Option<Allocation>,
) -> Result<Allocation, SolverError> {
    p.validate()?;
    cfg.validate(p)?;
    let mut x = init.unwrap_or_else(|| initial_point(p));
    x.check_feasible(p, 0.0).map_err(SolverError::InfeasibleInit)?;
    x.f_local = x.f_local.max(cfg.f_floor);
    x.f_edge = x.f_edge.max(cfg.f_floor);
    if !smoothed_objective(&x, p, cfg.beta).is_finite() {
        return Err(SolverError::Unsolvable);
    }
    Ok(x)
}

/// Runs block coordinate descent from `init` (or [`initial_point`]).
pub fn solve_bcd(p: &SystemParams, cfg: &SolverConfig, init: Option<Allocation>) -> Result<SolveResult, SolverError> {
    let started = Instant::now();
    let mut x = prepare_start(p, cfg, init)?;
    let mut trace = SolveTrace::default();
    trace.rows.push(trace_row(0, &x, p, cfg, None, kkt_residual(&x, p, cfg), started));

    let mut status = SolveStatus::MaxIterations;
    let mut stalled = 0;
    let mut f_prev = smoothed_objective(&x, p, cfg.beta);
    for iter in 1..=cfg.max_outer_iters {
        scalar_sweep(&mut x, p, cfg);
        let step = pg_update_power(&x, p, cfg)?;
        x.set_power(release_idle_powers(step.y, p));

        let kkt = kkt_residual(&x, p, cfg);
        let row = trace_row(iter, &x, p, cfg, Some(&step), kkt, started);
        let f = row.smoothed_objective;
        trace.rows.push(row);

        if kkt <= cfg.kkt_tol {
            status = SolveStatus::KktReached;
            break;
        }
        let rel = (f_prev - f) / f_prev.abs().max(f64::MIN_POSITIVE);
        f_prev = f;
        if rel < cfg.rel_obj_tol {
            stalled += 1;
            if stalled >= cfg.stall_iters {
                status = SolveStatus::Stalled;
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Ok(SolveResult { allocation: x, trace, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::relay_power_lhs;

    #[test]
    fn initial_point_is_feasible_with_half_relay_budget() {
        let p = SystemParams::default();
        let x = initial_point(&p);
        assert!(x.is_feasible(&p, 0.0));
        let lhs = relay_power_lhs(&x.power(), &p);
        assert!((lhs - 2.5).abs() < 1e-15);
        let expected = 2.5 / (1e-9 + 1e-3 * 0.25 + 1.0);
        assert!((x.p1r - expected).abs() < 1e-15);
        assert!((x.p1r - 2.4994).abs() < 1e-4);
    }

    #[test]
    fn zero_uplink_power_forces_local_computing() {
        let p = SystemParams::default();
        let x = Allocation { p2a: 0.0, ..initial_point(&p) };
        let cfg = SolverConfig::default();
        assert_eq!(optimize_scalar_block(ScalarBlock::Alpha, &x, &p, &cfg), 0.0);
    }

    #[test]
    fn zero_gamma_sends_local_speed_to_floor() {
        let p = SystemParams { gamma: 0.0, ..SystemParams::default() };
        let cfg = SolverConfig::default();
        let x = initial_point(&p);
        let f = optimize_scalar_block(ScalarBlock::FLocal, &x, &p, &cfg);
        assert_eq!(f, cfg.f_floor);
        let at_floor = Allocation { f_local: f, ..x };
        let r = kkt_residual_scalar(&at_floor, &p, &cfg, ScalarBlock::FLocal);
        assert_eq!(r, 0.0);
    }

    fn kkt_residual_scalar(x: &Allocation, p: &SystemParams, cfg: &SolverConfig, which: ScalarBlock) -> f64 {
        let (lo, hi) = cfg.bounds(which, p);
        let g = smoothed_partial(x, p, cfg.beta, which);
        let s = which.get(x);
        (s - (s - g).clamp(lo, hi)).abs()
    }

    #[test]
    fn rejects_infeasible_init() {
        let p = SystemParams::default();
        let x = Allocation { p1a: 0.8, p2a: 0.8, ..initial_point(&p) };
        let err = solve_bcd(&p, &SolverConfig::default(), Some(x)).unwrap_err();
        assert!(matches!(err, SolverError::InfeasibleInit(_)));
    }

    #[test]
    fn rejects_bad_config() {
        let p = SystemParams::default();
        let cfg = SolverConfig { armijo_sigma: 1.5, ..SolverConfig::default() };
        assert!(matches!(solve_bcd(&p, &cfg, None), Err(SolverError::InvalidConfig(_))));
    }

    #[test]
    fn unreachable_start_is_unsolvable() {
        let p = SystemParams::default();
        let x = Allocation { p1a: 0.0, p2a: 0.0, ..initial_point(&p) };
        assert_eq!(solve_bcd(&p, &SolverConfig::default(), Some(x)), Err(SolverError::Unsolvable));
    }

    #[test]
    fn idle_branch_step_keeps_objective_and_busy_powers() {
        let cfg = SolverConfig::default();
        // No result bits and no DF load: only the idle P2A may move.
        let p = SystemParams { compress_ratio: 0.0, ..SystemParams::default() };
        let x = Allocation { alpha: 0.0, ..initial_point(&p) };
        let step = pg_update_power(&x, &p, &cfg).unwrap();
        let y = x.power();
        assert_eq!((step.y.p1a, step.y.p1r, step.y.p2r), (y.p1a, y.p1r, y.p2r));
        let f = |y: PowerBlock| smoothed_objective(&x.with_power(y), &p, cfg.beta);
        assert_eq!(f(step.y), f(y));
    }

    #[test]
    fn reference_setup_descends_and_stays_feasible() {
        let p = SystemParams::default();
        let cfg = SolverConfig::default();
        let res = solve_bcd(&p, &cfg, None).unwrap();
        assert!(res.trace.is_monotone(1e-9));
        for row in &res.trace.rows {
            row.allocation.check_feasible(&p, 1e-9).unwrap();
        }
    }
}
