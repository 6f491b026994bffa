//! Euclidean projection of a power vector onto the convexified feasible set
//!
//! ```text
//! Omega(y_ref) = { y >= 0, P1A + P2A <= P_user_max, U(y; y_ref) <= 0 }
//! ```
//!
//! where `U` is the linearized relay budget. The single nonlinear constraint
//! is dualized: for a multiplier `lambda >= 0` the partial Lagrangian
//! `|y - z|^2 + lambda * U(y; y_ref)` is minimized over the polyhedral
//! constraints in closed form, and `lambda` is found by bisection on the
//! nonincreasing map `lambda -> U(y*(lambda); y_ref)`.
//!
//! `U` contains `(P1R + P1A)^2`, so P1A and P1R stay coupled inside the
//! Lagrangian. The inner problem splits into a clamp for P2R and a strictly
//! convex three-variable QP in (P1A, P2A, P1R), solved by enumerating the
//! active sets of its four linear constraints.

use crate::error::SolverError;
use crate::model::{linearized_constraint, PowerBlock, SystemParams};
use crate::solver::SolverConfig;

/// Result of [`project_power`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub y: PowerBlock,
    /// Multiplier of the linearized relay constraint.
    pub lambda: f64,
    /// `U(y; y_ref)` at the returned point, always `<= 0`.
    pub constraint_value: f64,
}

/// Projects `z` onto `Omega(y_ref)`.
pub fn project_power(
    z: [f64; 4],
    y_ref: &PowerBlock,
    p: &SystemParams,
    cfg: &SolverConfig,
) -> Result<Projection, SolverError> {
    project_power_weighted(z, [1.0; 4], y_ref, p, cfg)
}

/// Projection onto `Omega(y_ref)` in the weighted norm
/// `sum_i weights[i] * (y_i - z_i)^2`. Weights must be positive.
pub fn project_power_weighted(
    z: [f64; 4],
    weights: [f64; 4],
    y_ref: &PowerBlock,
    p: &SystemParams,
    cfg: &SolverConfig,
) -> Result<Projection, SolverError> {
    if !z.iter().all(|v| v.is_finite()) {
        return Err(SolverError::NonFiniteInput(z));
    }
    debug_assert!(weights.iter().all(|w| *w > 0.0 && w.is_finite()));
    let u_at = |lambda: f64| {
        let y = lagrangian_minimizer(&z, &weights, y_ref, p, lambda);
        (y, linearized_constraint(&y, y_ref, p))
    };

    let (y0, u0) = u_at(0.0);
    if u0 <= 0.0 {
        return Ok(Projection { y: y0, lambda: 0.0, constraint_value: u0 });
    }

    let tol = cfg.dual_tol * p.p_relay_max;
    let mut lo = 0.0;
    let mut hi = 1.0;
    let (mut y_hi, mut u_hi) = u_at(hi);
    let mut steps = 0;
    while u_hi > 0.0 {
        steps += 1;
        if steps > cfg.max_bracket_steps || !hi.is_finite() {
            return Err(SolverError::BracketNotFound { steps, lambda: hi });
        }
        lo = hi;
        hi *= cfg.dual_bracket_growth;
        (y_hi, u_hi) = u_at(hi);
    }

    // Invariant: U(lo) > 0 >= U(hi).
    for _ in 0..MAX_DUAL_BISECTIONS {
        if u_hi >= -tol || hi - lo <= f64::EPSILON * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (y_mid, u_mid) = u_at(mid);
        if u_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            y_hi = y_mid;
            u_hi = u_mid;
        }
    }
    if u_hi < -tol {
        // `lambda` is pinned to adjacent floats but `y` is still short of the
        // boundary; walk the segment towards y(lo) instead.
        let (y_lo, _) = u_at(lo);
        let (a, b) = (y_hi.to_array(), y_lo.to_array());
        let at = |t: f64| PowerBlock::from_array(std::array::from_fn(|i| a[i] + t * (b[i] - a[i])));
        let (mut t_in, mut t_out) = (0.0, 1.0);
        for _ in 0..MAX_DUAL_BISECTIONS {
            let t = 0.5 * (t_in + t_out);
            if t == t_in || t == t_out {
                break;
            }
            let u = linearized_constraint(&at(t), y_ref, p);
            if u > 0.0 {
                t_out = t;
            } else {
                t_in = t;
                u_hi = u;
                if u >= -tol {
                    break;
                }
            }
        }
        y_hi = at(t_in);
    }
    Ok(Projection { y: y_hi, lambda: hi, constraint_value: u_hi })
}

const MAX_DUAL_BISECTIONS: usize = 300;

/// Minimizer of `sum_i w_i (y_i - z_i)^2 + lambda * U(y; y_ref)` over
/// `y >= 0`, `P1A + P2A <= P_user_max`.
pub fn lagrangian_minimizer(
    z: &[f64; 4],
    w: &[f64; 4],
    y_ref: &PowerBlock,
    p: &SystemParams,
    lambda: f64,
) -> PowerBlock {
    let p2r = (z[3] - 0.5 * lambda / w[3]).max(0.0);

    // Variables (P1A, P2A, P1R); objective 1/2 x'Hx + g'x.
    let la = lambda * p.gain_a1;
    let h = [[2.0 * w[0] + la, 0.0, la], [0.0, 2.0 * w[1], 0.0], [la, 0.0, 2.0 * w[2] + la]];
    let g = [
        -2.0 * w[0] * z[0] - la * y_ref.p1a,
        -2.0 * w[1] * z[1],
        -2.0 * w[2] * z[2] + lambda * p.noise_r1 - la * y_ref.p1r,
    ];
    let x = triangle_box_qp(&h, &g, p.p_user_max);
    let (mut p1a, mut p2a) = (x[0].max(0.0), x[1].max(0.0));
    let sum = p1a + p2a;
    if sum > p.p_user_max {
        p1a *= p.p_user_max / sum;
        p2a *= p.p_user_max / sum;
    }
    PowerBlock::new(p1a, p2a, x[2].max(0.0), p2r)
}

/// Constraint rows `a . x <= b` of the (P1A, P2A, P1R) polyhedron.
const ROWS: [[f64; 3]; 4] = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, -1.0]];

/// Active sets to try, smallest first. Sets containing rows 0, 1 and 2
/// together are inconsistent (u = v = 0 and u + v = budget > 0).
const ACTIVE_SETS: [u8; 14] = [
    0b0000, 0b0001, 0b0010, 0b0100, 0b1000, 0b0011, 0b0101, 0b1001, 0b0110, 0b1010, 0b1100, 0b1011,
    0b1101, 0b1110,
];

/// Solves `min 1/2 x'Hx + g'x` over `x0, x1, x2 >= 0`, `x0 + x1 <= budget`
/// for symmetric positive definite `H` by KKT case enumeration.
///
/// The cases are solved in the variables `x_i / s_i` with `s_i` the power of
/// two nearest `H_ii^-1/2`, so the pivots stay comparable when the projection
/// weights span many decades and the rescaling itself is exact.
fn triangle_box_qp(h: &[[f64; 3]; 3], g: &[f64; 3], budget: f64) -> [f64; 3] {
    let s: [f64; 3] = std::array::from_fn(|i| 2f64.powi(-(h[i][i].log2() / 2.0).round() as i32));
    let hs: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| s[i] * h[i][j] * s[j]));
    let gs: [f64; 3] = std::array::from_fn(|i| s[i] * g[i]);
    let rows: [[f64; 3]; 4] = ROWS.map(|r| std::array::from_fn(|j| r[j] * s[j]));
    let b = [0.0, 0.0, budget, 0.0];
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let dual_tol = 1e-12 * (f64::MIN_POSITIVE + max_abs(g));

    let mut best: Option<([f64; 3], f64)> = None;
    for &set in ACTIVE_SETS.iter() {
        let active: Vec<usize> = (0..4).filter(|i| set & (1 << i) != 0).collect();
        let Some((xs, nu)) = solve_equality_qp(&hs, &gs, &rows, &active, &b) else {
            continue;
        };
        let x: [f64; 3] = std::array::from_fn(|i| s[i] * xs[i]);
        let primal_tol = 1e-12 * (1.0 + budget + max_abs(&x));
        let primal = (0..4)
            .map(|i| dot(&ROWS[i], &x) - b[i])
            .fold(0.0f64, |m, v| m.max(v));
        let dual = nu.iter().fold(0.0f64, |m, &v| m.max(-v));
        if primal <= primal_tol && dual <= dual_tol {
            return x;
        }
        let violation = (primal / primal_tol).max(dual / dual_tol);
        if best.is_none_or(|(_, v)| violation < v) {
            best = Some((x, violation));
        }
    }
    best.map(|(x, _)| x).unwrap_or([0.0; 3])
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Stationary point of the QP with the given rows held as equalities.
/// Returns `(x, multipliers)` or `None` if the KKT matrix is singular.
fn solve_equality_qp(
    h: &[[f64; 3]; 3],
    g: &[f64; 3],
    rows: &[[f64; 3]; 4],
    active: &[usize],
    b: &[f64; 4],
) -> Option<([f64; 3], Vec<f64>)> {
    let n = 3 + active.len();
    let mut m = [[0.0f64; 7]; 6];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&h[i]);
        for (k, &row) in active.iter().enumerate() {
            m[i][3 + k] = rows[row][i];
        }
        m[i][n] = -g[i];
    }
    for (k, &row) in active.iter().enumerate() {
        m[3 + k][..3].copy_from_slice(&rows[row]);
        m[3 + k][n] = b[row];
    }
    let sol = gauss_solve(&mut m, n)?;
    Some(([sol[0], sol[1], sol[2]], sol[3..n].to_vec()))
}

/// Gaussian elimination with partial pivoting on an `n x (n+1)` augmented
/// matrix stored in the top-left of `m`.
fn gauss_solve(m: &mut [[f64; 7]; 6], n: usize) -> Option<[f64; 6]> {
    let scale = (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).fold(0.0f64, |s, (r, c)| s.max(m[r][c].abs()));
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() <= 1e-13 * scale {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != 0.0 {
                for k in col..=n {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    let mut x = [0.0; 6];
    for row in (0..n).rev() {
        let mut acc = m[row][n];
        for k in row + 1..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::relay_power_lhs;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn point_inside_is_fixed() {
        let p = SystemParams::default();
        let y_ref = PowerBlock::new(0.3, 0.4, 2.0, 1.0);
        let z = [0.2, 0.1, 1.5, 0.5];
        let proj = project_power(z, &y_ref, &p, &cfg()).unwrap();
        assert_eq!(proj.y.to_array(), z);
        assert_eq!(proj.lambda, 0.0);
    }

    #[test]
    fn negative_components_clamp() {
        let p = SystemParams::default();
        let y_ref = PowerBlock::new(0.3, 0.4, 2.0, 1.0);
        let proj = project_power([-1.0, 0.2, -3.0, 0.5], &y_ref, &p, &cfg()).unwrap();
        assert_eq!(proj.y.to_array(), [0.0, 0.2, 0.0, 0.5]);
    }

    #[test]
    fn user_budget_edge() {
        let p = SystemParams::default();
        let y_ref = PowerBlock::new(0.3, 0.4, 2.0, 1.0);
        let proj = project_power([0.9, 0.7, 1.0, 0.5], &y_ref, &p, &cfg()).unwrap();
        assert!((proj.y.p1a - 0.6).abs() < 1e-12);
        assert!((proj.y.p2a - 0.4).abs() < 1e-12);
    }

    #[test]
    fn relay_budget_becomes_active() {
        let p = SystemParams::default();
        let y_ref = PowerBlock::new(0.3, 0.4, 2.0, 1.0);
        let proj = project_power([0.3, 0.4, 2.0, 9.0], &y_ref, &p, &cfg()).unwrap();
        assert!(proj.lambda > 0.0);
        assert!(proj.constraint_value <= 0.0);
        assert!(proj.constraint_value >= -cfg().dual_tol * p.p_relay_max);
        assert!(relay_power_lhs(&proj.y, &p) <= p.p_relay_max);
    }

    #[test]
    fn rejects_nan() {
        let p = SystemParams::default();
        let err = project_power([f64::NAN, 0.0, 0.0, 0.0], &PowerBlock::default(), &p, &cfg());
        assert!(matches!(err, Err(SolverError::NonFiniteInput(_))));
    }

    #[test]
    fn qp_enumeration_matches_unconstrained_when_interior() {
        let h = [[3.0, 0.0, 1.0], [0.0, 2.0, 0.0], [1.0, 0.0, 3.0]];
        let g = [-1.0, -0.4, -1.0];
        let x = triangle_box_qp(&h, &g, 5.0);
        // H x = -g
        for i in 0..3 {
            let r = dot(&h[i], &x) + g[i];
            assert!(r.abs() < 1e-12);
        }
    }
}
