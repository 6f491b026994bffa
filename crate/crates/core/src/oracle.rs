//! Brute-force grid oracle.
//!
//! The power grid is laid out in budget fractions so that every grid point
//! is feasible:
//!
//! ```text
//! P1A = u1 * PA_max
//! P2A = u2 * (PA_max - P1A)
//! P2R = u4 * PR_max
//! P1R = u3 * (PR_max - P2R) / (s_R1 + |h_A1|^2 P1A)
//! ```
//!
//! Each fraction axis holds 0 plus log-spaced values, since rates respond to
//! powers over many decades of SNR. For each `(alpha, u)` the CPU speeds are
//! optimized exactly; the F-subproblem is jointly convex, so alternating
//! derivative bisection converges to its minimizer. Refinement rounds
//! re-center a narrower grid on the incumbent. Points are ranked by `f_beta`
//! with ties broken toward the lexicographically smallest allocation vector.

use crate::bisect::minimize_by_derivative;
use crate::error::SolverError;
use crate::model::{evaluate_metrics, evaluate_unchecked, smooth_max, smooth_max_weights, Allocation, SystemParams};
use crate::solver::SolverConfig;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    /// Points per power-fraction axis, including the zero point.
    pub points_per_power_axis: usize,
    pub points_alpha: usize,
    pub refinement_rounds: usize,
    /// Each refinement narrows every axis by this factor.
    pub shrink: f64,
    /// Decades spanned by the log-spaced part of the coarse fraction axes.
    pub power_decades: f64,
    /// Restrict the search to one offloading fraction.
    pub fixed_alpha: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points_per_power_axis: 9,
            points_alpha: 21,
            refinement_rounds: 2,
            shrink: 4.0,
            power_decades: 6.0,
            fixed_alpha: None,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |what: &str| Err(SolverError::InvalidConfig(what.to_string()));
        if self.points_per_power_axis < 2 || self.points_alpha < 2 {
            return bad("grid axes need at least 2 points");
        }
        if !(self.shrink > 1.0) {
            return bad("grid shrink factor must exceed 1");
        }
        if !(self.power_decades > 0.0 && self.power_decades.is_finite()) {
            return bad("power_decades must be positive");
        }
        if let Some(a) = self.fixed_alpha {
            if !(0.0..=1.0).contains(&a) {
                return bad("fixed_alpha must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub allocation: Allocation,
    /// True objective `E_sys + gamma * t_sys` of the best point.
    pub objective: f64,
    pub smoothed_objective: f64,
    /// Grid points evaluated over all rounds.
    pub evaluated: usize,
}

/// Point `(alpha, u1..u4)` of the search space.
type Point = [f64; 5];

/// Allocation of a grid point, with CPU speeds still unset.
fn allocation_at(pt: &Point, p: &SystemParams) -> Allocation {
    let [alpha, u1, u2, u3, u4] = *pt;
    let p1a = u1 * p.p_user_max;
    let p2a = u2 * (p.p_user_max - p1a);
    let p2r = u4 * p.p_relay_max;
    let p1r = u3 * (p.p_relay_max - p2r) / (p.noise_r1 + p.gain_a1 * p1a);
    Allocation { alpha, p1a, p2a, p1r, p2r, f_local: p.f_local_max, f_edge: p.f_edge_max }
}

/// Minimizes `f_beta` over `(F_l, F_r)` with everything else fixed and
/// returns the completed allocation and its `f_beta`. The speed terms are
/// `B F^2` in energy and `A / F` in delay on each branch.
fn optimize_speeds(mut x: Allocation, p: &SystemParams, cfg: &SolverConfig, tol: f64) -> (Allocation, f64) {
    let m = evaluate_unchecked(&x, p, cfg.beta);
    let fixed_energy = m.e_af + m.e_df;
    let (c_l, c_r) = (m.t_af, m.t_df1 + m.t_df2);
    if !(fixed_energy.is_finite() && c_l.is_finite() && c_r.is_finite()) {
        return (x, f64::INFINITY);
    }
    let local_bits = (1.0 - x.alpha) * p.task_bits;
    let edge_bits = x.alpha * p.task_bits;
    let a_l = p.cycles_per_bit_local * local_bits;
    let a_r = p.cycles_per_bit_edge * edge_bits;
    let b_l = a_l * p.chip_coeff_local;
    let b_r = a_r * p.chip_coeff_edge;
    let branch = |a: f64, c: f64, f: f64| if a == 0.0 { c } else { c + a / f };
    let value = |fl: f64, fr: f64| {
        fixed_energy + b_l * fl * fl + b_r * fr * fr + p.gamma * smooth_max(branch(a_l, c_l, fl), branch(a_r, c_r, fr), cfg.beta)
    };

    // Idle CPUs sit at the floor; their speed does not enter the objective.
    let (mut fl, mut fr) = (
        if a_l == 0.0 { cfg.f_floor } else { p.f_local_max },
        if a_r == 0.0 { cfg.f_floor } else { p.f_edge_max },
    );
    for _ in 0..100 {
        let (old_l, old_r) = (fl, fr);
        if a_l > 0.0 {
            let tl = tol * (p.f_local_max - cfg.f_floor);
            fl = minimize_by_derivative(cfg.f_floor, p.f_local_max, tl, |v| {
                let (w, _) = smooth_max_weights(c_l + a_l / v, branch(a_r, c_r, fr), cfg.beta);
                2.0 * b_l * v - p.gamma * w * a_l / (v * v)
            });
        }
        if a_r > 0.0 {
            let tr = tol * (p.f_edge_max - cfg.f_floor);
            fr = minimize_by_derivative(cfg.f_floor, p.f_edge_max, tr, |v| {
                let (_, w) = smooth_max_weights(branch(a_l, c_l, fl), c_r + a_r / v, cfg.beta);
                2.0 * b_r * v - p.gamma * w * a_r / (v * v)
            });
        }
        let moved = (fl - old_l).abs() / p.f_local_max + (fr - old_r).abs() / p.f_edge_max;
        if moved <= 2.0 * tol {
            break;
        }
    }
    x.f_local = fl;
    x.f_edge = fr;
    (x, value(fl, fr))
}

/// 0 followed by `n - 1` log-spaced fractions.
fn fraction_axis(n: usize, center: Option<f64>, width: f64, decades: f64) -> Vec<f64> {
    let c = center.filter(|u| *u > 0.0).map_or(-decades, f64::log10);
    let (mut lo, mut hi) = (c - width / 2.0, c + width / 2.0);
    if hi > 0.0 {
        lo -= hi;
        hi = 0.0;
    }
    let mut axis = vec![0.0];
    let k = n - 1;
    for i in 0..k {
        let t = if k == 1 { 1.0 } else { i as f64 / (k - 1) as f64 };
        axis.push(10f64.powf(lo + t * (hi - lo)));
    }
    axis
}

fn alpha_axis(n: usize, center: f64, width: f64) -> Vec<f64> {
    let (mut lo, mut hi) = (center - width / 2.0, center + width / 2.0);
    if lo < 0.0 {
        hi -= lo;
        lo = 0.0;
    }
    if hi > 1.0 {
        lo = (lo - (hi - 1.0)).max(0.0);
        hi = 1.0;
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn better(f: f64, x: &Allocation, best: &Option<(f64, Allocation)>) -> bool {
    match best {
        None => f.is_finite(),
        Some((bf, bx)) => match f.partial_cmp(bf) {
            Some(Ordering::Less) => true,
            Some(Ordering::Equal) => x.to_array() < bx.to_array(),
            _ => false,
        },
    }
}

/// Coarse speed tolerance used while scanning; the winner is re-solved tightly.
const SCAN_TOL: f64 = 1e-7;

pub fn grid_oracle(p: &SystemParams, gs: &GridSpec, cfg: &SolverConfig) -> Result<OracleResult, SolverError> {
    p.validate()?;
    cfg.validate(p)?;
    gs.validate()?;
    let mut best: Option<(f64, Allocation)> = None;
    let mut best_pt: Option<Point> = None;
    let mut evaluated = 0;

    for round in 0..=gs.refinement_rounds {
        let scale = gs.shrink.powi(round as i32);
        let alphas = match gs.fixed_alpha {
            Some(a) => vec![a],
            None if round == 0 => alpha_axis(gs.points_alpha, 0.5, 1.0),
            None => alpha_axis(gs.points_alpha, best_pt.map_or(0.5, |b| b[0]), 1.0 / scale),
        };
        let axes: [Vec<f64>; 4] = std::array::from_fn(|k| {
            let center = best_pt.map(|b| b[k + 1]);
            let center = if round == 0 { Some(1.0 / 10f64.powf(gs.power_decades / 2.0)) } else { center };
            let width = gs.power_decades / scale;
            fraction_axis(gs.points_per_power_axis, center, width, gs.power_decades)
        });
        let mut round_best = best_pt;
        for &alpha in &alphas {
            for &u1 in &axes[0] {
                for &u2 in &axes[1] {
                    for &u3 in &axes[2] {
                        for &u4 in &axes[3] {
                            let pt = [alpha, u1, u2, u3, u4];
                            let (x, f) = optimize_speeds(allocation_at(&pt, p), p, cfg, SCAN_TOL);
                            evaluated += 1;
                            if better(f, &x, &best) {
                                best = Some((f, x));
                                round_best = Some(pt);
                            }
                        }
                    }
                }
            }
        }
        best_pt = round_best;
    }

    let pt = best_pt.ok_or(SolverError::EmptyGrid)?;
    let (x, _) = optimize_speeds(allocation_at(&pt, p), p, cfg, cfg.bisect_tol);
    let (_, incumbent) = best.ok_or(SolverError::EmptyGrid)?;
    let m_tight = evaluate_metrics(&x, p, cfg.beta)?;
    let m_scan = evaluate_metrics(&incumbent, p, cfg.beta)?;
    let (x, m) = if m_tight.smoothed_objective <= m_scan.smoothed_objective { (x, m_tight) } else { (incumbent, m_scan) };
    Ok(OracleResult { allocation: x, objective: m.objective, smoothed_objective: m.smoothed_objective, evaluated })
}
