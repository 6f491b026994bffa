//! Derivative-sign bisection for convex scalar problems.

const MAX_STEPS: usize = 200;

/// Minimizes a convex function on `[lo, hi]` given its derivative.
///
/// Returns an endpoint when the derivative has constant sign on the
/// interval, otherwise the bracketed root of the derivative to within `tol`.
pub fn minimize_by_derivative(mut lo: f64, mut hi: f64, tol: f64, mut derivative: impl FnMut(f64) -> f64) -> f64 {
    debug_assert!(lo <= hi);
    let g_lo = derivative(lo);
    if !(g_lo < 0.0) {
        return lo;
    }
    let g_hi = derivative(hi);
    if g_hi <= 0.0 {
        return hi;
    }
    for _ in 0..MAX_STEPS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let g = derivative(mid);
        if g > 0.0 {
            hi = mid;
        } else if g < 0.0 {
            lo = mid;
        } else {
            return mid;
        }
    }
    0.5 * (lo + hi)
}
