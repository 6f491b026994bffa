mod common;

use common::{interior_point, richardson};
use proptest::prelude::*;
use relay_mec::model::{
    af_rate, df_downlink_rate, df_uplink_rate, evaluate_metrics, grad_smoothed_objective_y, linearized_constraint,
    relay_power_lhs, relay_power_lhs_dc, Allocation, PowerBlock, SystemParams,
};
use std::f64::consts::LN_2;

const BETA: f64 = 10.0;

fn gain() -> impl Strategy<Value = f64> {
    (-5.0f64..-1.5).prop_map(|e| 10f64.powf(e))
}

fn params() -> impl Strategy<Value = SystemParams> {
    (gain(), gain(), gain(), gain(), 0.0f64..=1.0, 0.0f64..1.0).prop_map(|(a1, b1, a2, b2, rho, gamma)| SystemParams {
        gain_a1: a1,
        gain_b1: b1,
        gain_a2: a2,
        gain_b2: b2,
        compress_ratio: rho,
        gamma,
        ..SystemParams::default()
    })
}

/// Feasible allocation drawn over budget fractions.
fn allocation(p: SystemParams) -> impl Strategy<Value = Allocation> {
    (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.01f64..=1.0, 0.01f64..=1.0).prop_map(
        move |(alpha, u1, u2, u3, u4, fl, fr)| {
            let p1a = u1 * p.p_user_max;
            let p2a = u2 * (p.p_user_max - p1a);
            let p2r = u4 * p.p_relay_max;
            let p1r = u3 * (p.p_relay_max - p2r) / (p.noise_r1 + p.gain_a1 * p1a);
            Allocation { alpha, p1a, p2a, p1r, p2r, f_local: fl * p.f_local_max, f_edge: fr * p.f_edge_max }
        },
    )
}

fn instance() -> impl Strategy<Value = (SystemParams, Allocation)> {
    params().prop_flat_map(|p| (Just(p), allocation(p)))
}

fn power() -> impl Strategy<Value = PowerBlock> {
    (0.0f64..2.0, 0.0f64..2.0, 0.0f64..2e3, 0.0f64..5.0).prop_map(|(a, b, c, d)| PowerBlock::new(a, b, c, d))
}

/// Independent scalar re-implementation of the delays and energies.
fn reference_objective(x: &Allocation, p: &SystemParams) -> (f64, f64, f64) {
    let w = p.bandwidth_hz;
    let l = p.task_bits;
    let snr_af = x.p1a * x.p1r * p.gain_a1 * p.gain_b1 / (x.p1r * p.gain_b1 * p.noise_r1 + p.noise_b1);
    let r_af = w / 2.0 * (1.0 + snr_af).log2();
    let r1 = w * (1.0 + x.p2a * p.gain_a2 / p.noise_r2).log2();
    let r2 = w * (1.0 + x.p2r * p.gain_b2 / p.noise_b2).log2();
    let div = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };
    let t_af = div((1.0 - x.alpha) * p.compress_ratio * l, r_af);
    let t1 = div(x.alpha * l, r1);
    let t2 = div(x.alpha * p.compress_ratio * l, r2);
    let t_l = div(p.cycles_per_bit_local * (1.0 - x.alpha) * l, x.f_local);
    let t_r = div(p.cycles_per_bit_edge * x.alpha * l, x.f_edge);
    let e_af = (x.p1a + x.p1r * x.p1a * p.gain_a1 + x.p1r * p.noise_r1) * t_af;
    let e_df = x.p2a * t1 + x.p2r * t2;
    let e_l = (1.0 - x.alpha) * l * p.cycles_per_bit_local * p.chip_coeff_local * x.f_local.powi(2);
    let e_r = x.alpha * l * p.cycles_per_bit_edge * p.chip_coeff_edge * x.f_edge.powi(2);
    let t_sys = (t_l + t_af).max(t1 + t_r + t2);
    let e = e_af + e_df + e_l + e_r;
    (e, t_sys, e + p.gamma * t_sys)
}

/// Magnitude of the squared terms, which cancel in the DC forms.
fn scale(y: &PowerBlock, y_ref: &PowerBlock, p: &SystemParams) -> f64 {
    let s = y.p1r + y.p1a;
    1.0 + p.gain_a1 * (s * s + y_ref.p1r.powi(2) + y_ref.p1a.powi(2)) + y.p1r * p.noise_r1 + y.p2r
}

fn smoothed(x: &Allocation, p: &SystemParams) -> f64 {
    evaluate_metrics(x, p, BETA).unwrap().smoothed_objective
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn smoothing_sandwich((p, x) in instance()) {
        let m = evaluate_metrics(&x, &p, BETA).unwrap();
        prop_assume!(m.t_sys.is_finite());
        prop_assert!(m.t_sys <= m.smoothed_delay);
        prop_assert!(m.smoothed_delay <= m.t_sys + LN_2 / BETA);
    }

    #[test]
    fn energy_and_delay_decompose((p, x) in instance()) {
        let m = evaluate_metrics(&x, &p, BETA).unwrap();
        prop_assume!(m.t_sys.is_finite());
        prop_assert_eq!(m.e_sys, m.e_local + m.e_edge + m.e_af + m.e_df);
        prop_assert_eq!(m.t_sys, m.local_branch().max(m.edge_branch()));
        let (e, t, f) = reference_objective(&x, &p);
        prop_assert!((m.e_sys - e).abs() <= 1e-12 * e.abs().max(1e-300));
        prop_assert!((m.t_sys - t).abs() <= 1e-12 * t);
        prop_assert!((m.objective - f).abs() <= 1e-12 * f.abs().max(1e-300));
    }

    #[test]
    fn rates_grow_with_own_power(p in params(), a in 0.0f64..3.0, b in 0.0f64..3.0, r in 0.0f64..1e4) {
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(df_uplink_rate(lo, &p) <= df_uplink_rate(hi, &p));
        prop_assert!(df_downlink_rate(lo, &p) <= df_downlink_rate(hi, &p));
        prop_assert!(af_rate(lo, r, &p) <= af_rate(hi, r, &p));
        prop_assert!(af_rate(r.min(1.0), lo, &p) <= af_rate(r.min(1.0), hi, &p));
    }

    #[test]
    fn dc_form_equals_bilinear_form(p in params(), y in power()) {
        let a = relay_power_lhs(&y, &p);
        let b = relay_power_lhs_dc(&y, &p);
        prop_assert!((a - b).abs() <= 1e-13 * scale(&y, &y, &p));
    }

    #[test]
    fn linearization_is_tangent_majorant(p in params(), y in power(), y_ref in power()) {
        let exact = relay_power_lhs(&y, &p) - p.p_relay_max;
        let at_self = linearized_constraint(&y, &y, &p);
        prop_assert!((at_self - exact).abs() <= 1e-13 * scale(&y, &y, &p));
        prop_assert!(linearized_constraint(&y, &y_ref, &p) >= exact - 1e-13 * scale(&y, &y_ref, &p));
    }

    #[test]
    fn full_offload_ignores_local_side((p, x) in instance(), p1a in 0.0f64..1.0, p1r in 0.0f64..100.0, fl in 1e3f64..2e8) {
        let x = Allocation { alpha: 1.0, ..x };
        let y = Allocation { p1a, p1r, f_local: fl, ..x };
        let (mx, my) = (evaluate_metrics(&x, &p, BETA).unwrap(), evaluate_metrics(&y, &p, BETA).unwrap());
        prop_assert_eq!((mx.r_df1, mx.r_df2, mx.t_df1, mx.t_df2, mx.t_edge), (my.r_df1, my.r_df2, my.t_df1, my.t_df2, my.t_edge));
        prop_assert_eq!((mx.e_df, mx.e_edge, mx.t_sys, mx.e_sys), (my.e_df, my.e_edge, my.t_sys, my.e_sys));
    }
}

#[test]
fn gradient_matches_finite_differences() {
    for seed in 0..100 {
        let (p, x) = interior_point(seed);
        let g = grad_smoothed_objective_y(&x, &p, BETA).unwrap();
        let y = x.power().to_array();
        for i in 0..4 {
            let f = |v: f64| {
                let mut z = y;
                z[i] = v;
                smoothed(&x.with_power(PowerBlock::from_array(z)), &p)
            };
            let h = 1e-3 * y[i];
            let fd = richardson(f, y[i], h);
            let err = (g[i] - fd).abs() / g[i].abs().max(fd.abs());
            assert!(err <= 1e-5, "seed {seed} component {i}: analytic {} fd {fd} rel {err:e}", g[i]);
        }
    }
}

#[test]
fn downlink_power_gradient_sign_matches_differences() {
    for seed in 100..200 {
        let (p, x) = interior_point(seed);
        let g = grad_smoothed_objective_y(&x, &p, BETA).unwrap();
        let f = |v: f64| smoothed(&Allocation { p2r: v, ..x }, &p);
        let fd = richardson(f, x.p2r, 1e-3 * x.p2r);
        assert_eq!(g[3].signum(), fd.signum(), "seed {seed}");
    }
}

#[test]
fn reference_examples() {
    let p = SystemParams::default();
    let x = Allocation { alpha: 0.0, p1a: 1.0, p2a: 0.0, p1r: 1.0, p2r: 1.0, f_local: 2e8, f_edge: 3e8 };
    let m = evaluate_metrics(&x, &p, BETA).unwrap();
    assert!((m.t_local - 0.9).abs() < 1e-12);
    assert!((m.e_local - 7.2e-4).abs() < 1e-16);
    let snr = 1e-6 / (1e-12 + 1e-9);
    assert!((m.r_af - 0.5e6 * (1.0f64 + snr).log2()).abs() < 1e-6);
    let y = PowerBlock::new(1.0, 0.0, 1.0, 1.0);
    assert!((relay_power_lhs(&y, &p) - 1.001).abs() < 1e-8);
    assert!((linearized_constraint(&y, &y, &p) + 3.999).abs() < 1e-8);
}
