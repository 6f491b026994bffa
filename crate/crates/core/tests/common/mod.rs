//! Shared oracles and instance generators for the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use relay_mec::model::{linearized_constraint, Allocation, PowerBlock, SystemParams};
use relay_mec::scenario::{random_feasible_allocation, Scenario};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Default parameters with channel gains from draw `k` of `seed`.
pub fn instance(seed: u64, k: u64) -> SystemParams {
    Scenario::sample(seed, k, &SystemParams::default()).params
}

/// A linearization point inside the true feasible set and a target `z`
/// scattered around it, often outside `Omega(y_ref)`.
pub fn projection_case(r: &mut ChaCha20Rng, p: &SystemParams) -> ([f64; 4], PowerBlock) {
    let y_ref = random_feasible_allocation(r, p).power();
    let spread = [0.5 * p.p_user_max, 0.5 * p.p_user_max, 0.5 * y_ref.p1r + 1.0, p.p_relay_max];
    let mut z = y_ref.to_array();
    for (zi, s) in z.iter_mut().zip(spread) {
        *zi += Normal::new(0.0, s).unwrap().sample(r);
    }
    (z, y_ref)
}

/// Projection onto `{y >= 0, y0 + y1 <= cap}` in the norm
/// `sum_i w_i (y_i - c_i)^2`.
fn project_polyhedron(c: [f64; 4], w: [f64; 4], cap: f64) -> [f64; 4] {
    let mut y = c.map(|v| v.max(0.0));
    if y[0] + y[1] > cap {
        // The sum constraint is active; minimize over the segment a + b = cap.
        let a = ((w[0] * c[0] + w[1] * (cap - c[1])) / (w[0] + w[1])).clamp(0.0, cap);
        y[0] = a;
        y[1] = cap - a;
    }
    y
}

/// Gradient of `U(y; y_ref)` in `y`.
fn grad_u(y: &[f64; 4], y_ref: &PowerBlock, p: &SystemParams) -> [f64; 4] {
    let s = y[0] + y[2];
    [
        p.gain_a1 * (s - y_ref.p1a),
        0.0,
        p.noise_r1 + p.gain_a1 * (s - y_ref.p1r),
        1.0,
    ]
}

/// Projection onto `Omega(y_ref)` by an augmented Lagrangian method. Inner
/// problems are solved by diagonally scaled projected gradient, projecting in
/// the matching diagonal norm.
pub fn slow_projection(z: [f64; 4], y_ref: &PowerBlock, p: &SystemParams) -> [f64; 4] {
    let u = |y: &[f64; 4]| linearized_constraint(&PowerBlock::from_array(*y), y_ref, p);
    let mut rho = 10.0;
    let mut lambda = 0.0f64;
    let mut last_violation = f64::INFINITY;
    let mut y = project_polyhedron(z, [1.0; 4], p.p_user_max);
    for _ in 0..2000 {
        let merit = |y: &[f64; 4], lambda: f64| {
            let d: f64 = y.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
            let c = (u(y) + lambda / rho).max(0.0);
            d + 0.5 * rho * c * c
        };
        let mut step = 1.0f64;
        for _ in 0..100_000 {
            let c = (u(&y) + lambda / rho).max(0.0);
            let gu = grad_u(&y, y_ref, p);
            let g: [f64; 4] = std::array::from_fn(|i| 2.0 * (y[i] - z[i]) + rho * c * gu[i]);
            let curv: [f64; 4] = std::array::from_fn(|i| {
                let hess_u = if i == 0 || i == 2 { p.gain_a1 } else { 0.0 };
                2.0 + rho * (gu[i] * gu[i] + c * hess_u)
            });
            let scale = curv.map(|h| 1.0 / h);
            let m0 = merit(&y, lambda);
            step = (step * 2.0).min(1.0);
            let next = loop {
                let target = std::array::from_fn(|i| y[i] - step * scale[i] * g[i]);
                let trial = project_polyhedron(target, curv, p.p_user_max);
                let moved: f64 = (0..4).map(|i| g[i] * (y[i] - trial[i])).sum();
                if merit(&trial, lambda) <= m0 - 0.25 * moved || step < 1e-16 {
                    break trial;
                }
                step *= 0.5;
            };
            let settled = (0..4).all(|i| (next[i] - y[i]).abs() <= 1e-15 * (1.0 + y[i].abs()));
            y = next;
            if settled {
                break;
            }
        }
        let next_lambda = (lambda + rho * u(&y)).max(0.0);
        let s = y[0] + y[2];
        let u_scale = 1.0 + p.gain_a1 * (s * s + y_ref.p1r.powi(2) + y_ref.p1a.powi(2));
        let done = (next_lambda - lambda).abs() <= 1e-12 * (1.0 + lambda) && u(&y) <= 1e-14 * u_scale;
        lambda = next_lambda;
        if done {
            break;
        }
        let violation = u(&y).max(0.0);
        if violation > 0.25 * last_violation {
            rho = (rho * 10.0).min(1e12);
        }
        last_violation = violation;
    }
    y
}

/// A point of `Omega(y_ref)`: rejection sampling over a box, with half the
/// accepted points pushed onto the boundary along the segment from `anchor`.
pub fn point_in_omega(r: &mut ChaCha20Rng, y_ref: &PowerBlock, p: &SystemParams, anchor: &PowerBlock) -> PowerBlock {
    let p1r_max = y_ref.p1r + (2.0 * p.p_relay_max / p.gain_a1).sqrt() + 1.0;
    loop {
        let p1a = r.random_range(0.0..p.p_user_max);
        let p2a = r.random_range(0.0..(p.p_user_max - p1a));
        let y = PowerBlock::new(p1a, p2a, r.random_range(0.0..p1r_max), r.random_range(0.0..p.p_relay_max));
        if linearized_constraint(&y, y_ref, p) > 0.0 {
            if r.random_bool(0.5) {
                continue;
            }
            // U is convex, so the feasible part of the segment is an interval.
            let at = |t: f64| {
                let (a, b) = (anchor.to_array(), y.to_array());
                PowerBlock::from_array(std::array::from_fn(|i| a[i] + t * (b[i] - a[i])))
            };
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if linearized_constraint(&at(mid), y_ref, p) <= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return at(lo);
        }
        return y;
    }
}

/// Minimum of `f` over an `n`-point uniform grid on `[lo, hi]`.
pub fn scan_minimum(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .map(|v| (v, f(v)))
        .fold((f64::NAN, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
}

/// Central difference with Richardson extrapolation, step `h`.
pub fn richardson(f: impl Fn(f64) -> f64, v: f64, h: f64) -> f64 {
    let d = |h: f64| (f(v + h) - f(v - h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// An allocation with every coordinate strictly inside its bounds.
pub fn interior_point(seed: u64) -> (SystemParams, Allocation) {
    let mut rng = rng(seed);
    let exp = |rng: &mut ChaCha20Rng| -1e-3 * (1.0 - rng.random::<f64>()).ln();
    let p = SystemParams {
        gain_a1: exp(&mut rng),
        gain_b1: exp(&mut rng),
        gain_a2: exp(&mut rng),
        gain_b2: exp(&mut rng),
        ..SystemParams::default()
    };
    let p1a = rng.random_range(0.01..0.5);
    let p2a = rng.random_range(0.01..0.5);
    let p2r = rng.random_range(0.01..2.5);
    let p1r = rng.random_range(0.05..0.95) * (p.p_relay_max - p2r) / (p.noise_r1 + p.gain_a1 * p1a);
    let x = Allocation {
        alpha: rng.random_range(0.05..0.95),
        p1a,
        p2a,
        p1r,
        p2r,
        f_local: rng.random_range(0.1..1.0) * p.f_local_max,
        f_edge: rng.random_range(0.1..1.0) * p.f_edge_max,
    };
    (p, x)
}

pub fn inner(w: &[f64; 4], a: &[f64; 4], b: &[f64; 4]) -> f64 {
    (0..4).map(|i| w[i] * a[i] * b[i]).sum()
}

pub fn diff(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    std::array::from_fn(|i| a[i] - b[i])
}

/// `z - y = (lambda / 2) W^-1 grad U` at the projection, so convexity of `U`
/// gives `<z - y, v - y>_W <= (lambda / 2) |U(y)|` for any feasible `v`; the
/// dual bisection leaves `|U(y)|` at its tolerance. On top comes the forward
/// error of the inner QP, `kappa` ulps of `y`, times `|z - y|`.
pub fn vi_tolerance(w: &[f64; 4], z: [f64; 4], y: [f64; 4], lambda: f64, u: f64, kappa: f64) -> f64 {
    let d = diff(z, y);
    let ulps = 64.0 * kappa * f64::EPSILON * y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rounding = inner(w, &d, &d).sqrt() * ulps * w.iter().fold(0.0f64, |m, v| m.max(v.sqrt()));
    1e-8 + 0.5 * lambda * u.abs() + rounding
}
