//! System model of the relay-assisted edge computing link.
//!
//! User A splits a task of `L` bits: a fraction `alpha` is offloaded to the
//! relay's edge server over the decode-and-forward (DF) subchannel and the rest
//! is computed locally, with the results forwarded to user B over the
//! amplify-and-forward (AF) subchannel. Everything here is a pure function of
//! an [`Allocation`] and the [`SystemParams`].
//!
//! Delay convention: a link that carries zero bits has zero delay regardless of
//! its rate, and a positive load over a zero-rate link has infinite delay. The
//! infinity saturates into every derived energy and objective.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    /// A positive bit load rides on a link whose rate is zero.
    #[error("gradient undefined: `{0}` carries a positive load at zero rate")]
    GradientUndefined(&'static str),
}

/// Physical, task and budget constants of one problem instance.
///
/// Channel state is stored as power gains `|h|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Per-subchannel bandwidth `W` in Hz (both subchannels have equal width).
    pub bandwidth_hz: f64,
    /// `|h_A^(1)|^2`, user A to relay on the AF subchannel.
    pub gain_a1: f64,
    /// `|h_B^(1)|^2`, relay to user B on the AF subchannel.
    pub gain_b1: f64,
    /// `|h_A^(2)|^2`, user A to relay on the DF subchannel.
    pub gain_a2: f64,
    /// `|h_B^(2)|^2`, relay to user B on the DF subchannel.
    pub gain_b2: f64,
    pub noise_r1: f64,
    pub noise_b1: f64,
    pub noise_r2: f64,
    pub noise_b2: f64,
    /// Task size `L` in bits.
    pub task_bits: f64,
    pub cycles_per_bit_local: f64,
    pub cycles_per_bit_edge: f64,
    /// Result size per input bit, in `[0, 1]`.
    pub compress_ratio: f64,
    /// Chip coefficient `eta`: CPU power is `eta * F^3`.
    pub chip_coeff_local: f64,
    pub chip_coeff_edge: f64,
    pub f_local_max: f64,
    pub f_edge_max: f64,
    /// Sum transmit power budget of user A over both subchannels.
    pub p_user_max: f64,
    /// Relay transmit power budget (AF amplification plus DF retransmission).
    pub p_relay_max: f64,
    /// Delay weight in J/s.
    pub gamma: f64,
}

impl Default for SystemParams {
    /// The reference setup with every channel gain at its mean `1e-3`.
    fn default() -> Self {
        Self {
            bandwidth_hz: 1e6,
            gain_a1: 1e-3,
            gain_b1: 1e-3,
            gain_a2: 1e-3,
            gain_b2: 1e-3,
            noise_r1: 1e-9,
            noise_b1: 1e-9,
            noise_r2: 1e-9,
            noise_b2: 1e-9,
            task_bits: 1.8e5,
            cycles_per_bit_local: 1e3,
            cycles_per_bit_edge: 1e3,
            compress_ratio: 0.1,
            chip_coeff_local: 1e-28,
            chip_coeff_edge: 1e-28,
            f_local_max: 2e8,
            f_edge_max: 6e8,
            p_user_max: 1.0,
            p_relay_max: 5.0,
            gamma: 0.01,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("gain_a1", self.gain_a1),
            ("gain_b1", self.gain_b1),
            ("gain_a2", self.gain_a2),
            ("gain_b2", self.gain_b2),
            ("noise_r1", self.noise_r1),
            ("noise_b1", self.noise_b1),
            ("noise_r2", self.noise_r2),
            ("noise_b2", self.noise_b2),
            ("task_bits", self.task_bits),
            ("cycles_per_bit_local", self.cycles_per_bit_local),
            ("cycles_per_bit_edge", self.cycles_per_bit_edge),
            ("chip_coeff_local", self.chip_coeff_local),
            ("chip_coeff_edge", self.chip_coeff_edge),
            ("f_local_max", self.f_local_max),
            ("f_edge_max", self.f_edge_max),
            ("p_user_max", self.p_user_max),
            ("p_relay_max", self.p_relay_max),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidParam {
                    name,
                    value,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        if !(0.0..=1.0).contains(&self.compress_ratio) {
            return Err(ModelError::InvalidParam {
                name: "compress_ratio",
                value: self.compress_ratio,
                reason: "must lie in [0, 1]",
            });
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(ModelError::InvalidParam {
                name: "gamma",
                value: self.gamma,
                reason: "must be finite and nonnegative",
            });
        }
        Ok(())
    }

    /// Bits carried by the AF subchannel per unit of `1 - alpha`.
    fn af_bits(&self) -> f64 {
        self.compress_ratio * self.task_bits
    }

    /// Bits carried by the DF downlink per unit of `alpha`.
    fn df2_bits(&self) -> f64 {
        self.compress_ratio * self.task_bits
    }
}

/// The transmit-power block `y = (P1A, P2A, P1R, P2R)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerBlock {
    pub p1a: f64,
    pub p2a: f64,
    pub p1r: f64,
    pub p2r: f64,
}

impl PowerBlock {
    pub const fn new(p1a: f64, p2a: f64, p1r: f64, p2r: f64) -> Self {
        Self { p1a, p2a, p1r, p2r }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.p1a, self.p2a, self.p1r, self.p2r]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_nonnegative(&self) -> bool {
        self.to_array().iter().all(|&v| v >= 0.0)
    }
}

/// One full decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// Fraction of the task offloaded to the edge server.
    pub alpha: f64,
    pub p1a: f64,
    pub p2a: f64,
    pub p1r: f64,
    pub p2r: f64,
    pub f_local: f64,
    pub f_edge: f64,
}

impl Allocation {
    pub fn power(&self) -> PowerBlock {
        PowerBlock::new(self.p1a, self.p2a, self.p1r, self.p2r)
    }

    pub fn set_power(&mut self, y: PowerBlock) {
        self.p1a = y.p1a;
        self.p2a = y.p2a;
        self.p1r = y.p1r;
        self.p2r = y.p2r;
    }

    pub fn with_power(mut self, y: PowerBlock) -> Self {
        self.set_power(y);
        self
    }

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.alpha,
            self.p1a,
            self.p2a,
            self.p1r,
            self.p2r,
            self.f_local,
            self.f_edge,
        ]
    }

    /// Checks every budget and box constraint of the problem. `relay_tol` is
    /// the slack in watts allowed on the relay budget and the user sum budget.
    pub fn check_feasible(&self, p: &SystemParams, relay_tol: f64) -> Result<(), Infeasibility> {
        if !self.to_array().iter().all(|v| v.is_finite()) {
            return Err(Infeasibility::NonFinite);
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Infeasibility::Alpha(self.alpha));
        }
        if !(self.f_local > 0.0 && self.f_local <= p.f_local_max) {
            return Err(Infeasibility::LocalSpeed(self.f_local));
        }
        if !(self.f_edge > 0.0 && self.f_edge <= p.f_edge_max) {
            return Err(Infeasibility::EdgeSpeed(self.f_edge));
        }
        if !self.power().is_nonnegative() {
            return Err(Infeasibility::NegativePower(self.power()));
        }
        let user = self.p1a + self.p2a;
        if user > p.p_user_max + relay_tol {
            return Err(Infeasibility::UserBudget(user));
        }
        let relay = relay_power_lhs(&self.power(), p);
        if relay > p.p_relay_max + relay_tol {
            return Err(Infeasibility::RelayBudget(relay));
        }
        Ok(())
    }

    pub fn is_feasible(&self, p: &SystemParams, relay_tol: f64) -> bool {
        self.check_feasible(p, relay_tol).is_ok()
    }
}

/// First violated constraint of an [`Allocation`].
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum Infeasibility {
    #[error("allocation has a non-finite component")]
    NonFinite,
    #[error("offloading fraction {0} outside [0, 1]")]
    Alpha(f64),
    #[error("local CPU speed {0} Hz outside (0, f_local_max]")]
    LocalSpeed(f64),
    #[error("edge CPU speed {0} Hz outside (0, f_edge_max]")]
    EdgeSpeed(f64),
    #[error("negative transmit power in {0:?}")]
    NegativePower(PowerBlock),
    #[error("user A power {0} W exceeds its budget")]
    UserBudget(f64),
    #[error("relay power {0} W exceeds its budget")]
    RelayBudget(f64),
}

/// All derived rates, delays and energies of an allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub r_af: f64,
    pub r_df1: f64,
    pub r_df2: f64,
    pub t_af: f64,
    pub t_df1: f64,
    pub t_df2: f64,
    pub t_local: f64,
    pub t_edge: f64,
    pub e_af: f64,
    pub e_df: f64,
    pub e_local: f64,
    pub e_edge: f64,
    /// `max(t_local + t_af, t_df1 + t_edge + t_df2)`.
    pub t_sys: f64,
    pub e_sys: f64,
    /// `e_sys + gamma * t_sys`.
    pub objective: f64,
    /// Log-sum-exp overestimate of `t_sys`.
    pub smoothed_delay: f64,
    /// `e_sys + gamma * smoothed_delay`.
    pub smoothed_objective: f64,
}

impl Metrics {
    /// Delay of the local-compute-then-AF branch.
    pub fn local_branch(&self) -> f64 {
        self.t_local + self.t_af
    }

    /// Delay of the offload-compute-forward branch.
    pub fn edge_branch(&self) -> f64 {
        self.t_df1 + self.t_edge + self.t_df2
    }
}

fn delay(load: f64, rate: f64) -> f64 {
    if load == 0.0 {
        0.0
    } else if rate > 0.0 {
        load / rate
    } else {
        f64::INFINITY
    }
}

fn energy(power: f64, t: f64) -> f64 {
    if t.is_infinite() {
        f64::INFINITY
    } else {
        power * t
    }
}

/// `(1/beta) * ln(exp(beta a) + exp(beta b))`, shifted by the max.
pub fn smooth_max(a: f64, b: f64, beta: f64) -> f64 {
    let m = a.max(b);
    if m.is_infinite() {
        return m;
    }
    let d = (a - b).abs();
    m + (-beta * d).exp().ln_1p() / beta
}

/// Softmax weights `(w_a, w_b)` of the two arguments of [`smooth_max`].
pub fn smooth_max_weights(a: f64, b: f64, beta: f64) -> (f64, f64) {
    match (a.is_infinite(), b.is_infinite()) {
        (true, true) => (0.5, 0.5),
        (true, false) => (1.0, 0.0),
        (false, true) => (0.0, 1.0),
        (false, false) => {
            let wa = 1.0 / (1.0 + (beta * (b - a)).exp());
            let wb = 1.0 / (1.0 + (beta * (a - b)).exp());
            (wa, wb)
        }
    }
}

/// SNR of the dual-hop AF link.
fn af_snr(p1a: f64, p1r: f64, p: &SystemParams) -> f64 {
    p1a * p1r * p.gain_a1 * p.gain_b1 / (p1r * p.gain_b1 * p.noise_r1 + p.noise_b1)
}

/// AF rate; the half pre-log accounts for the two-hop half-duplex relaying.
pub fn af_rate(p1a: f64, p1r: f64, p: &SystemParams) -> f64 {
    0.5 * p.bandwidth_hz * af_snr(p1a, p1r, p).ln_1p() / LN_2
}

pub fn df_uplink_rate(p2a: f64, p: &SystemParams) -> f64 {
    p.bandwidth_hz * (p2a * p.gain_a2 / p.noise_r2).ln_1p() / LN_2
}

pub fn df_downlink_rate(p2r: f64, p: &SystemParams) -> f64 {
    p.bandwidth_hz * (p2r * p.gain_b2 / p.noise_b2).ln_1p() / LN_2
}

/// Total power drawn by the AF subchannel while it is active: the user's
/// transmission and the relay's amplification of signal plus noise.
fn af_power(p1a: f64, p1r: f64, p: &SystemParams) -> f64 {
    p1a + p1r * p1a * p.gain_a1 + p1r * p.noise_r1
}

pub fn evaluate_metrics(x: &Allocation, p: &SystemParams, beta: f64) -> Result<Metrics, ModelError> {
    p.validate()?;
    Ok(evaluate_unchecked(x, p, beta))
}

/// [`evaluate_metrics`] without parameter validation, for inner loops that
/// validated once up front.
pub(crate) fn evaluate_unchecked(x: &Allocation, p: &SystemParams, beta: f64) -> Metrics {
    let local_share = 1.0 - x.alpha;
    let l = p.task_bits;

    let r_af = af_rate(x.p1a, x.p1r, p);
    let r_df1 = df_uplink_rate(x.p2a, p);
    let r_df2 = df_downlink_rate(x.p2r, p);

    let t_af = delay(local_share * p.af_bits(), r_af);
    let t_df1 = delay(x.alpha * l, r_df1);
    let t_df2 = delay(x.alpha * p.df2_bits(), r_df2);
    let t_local = delay(p.cycles_per_bit_local * local_share * l, x.f_local);
    let t_edge = delay(p.cycles_per_bit_edge * x.alpha * l, x.f_edge);

    let e_af = energy(af_power(x.p1a, x.p1r, p), t_af);
    let e_df = energy(x.p2a, t_df1) + energy(x.p2r, t_df2);
    let e_local = local_share * l * p.cycles_per_bit_local * p.chip_coeff_local * x.f_local * x.f_local;
    let e_edge = x.alpha * l * p.cycles_per_bit_edge * p.chip_coeff_edge * x.f_edge * x.f_edge;

    let branch_local = t_local + t_af;
    let branch_edge = t_df1 + t_edge + t_df2;
    let t_sys = branch_local.max(branch_edge);
    let e_sys = e_local + e_edge + e_af + e_df;
    let smoothed_delay = smooth_max(branch_local, branch_edge, beta);

    Metrics {
        r_af,
        r_df1,
        r_df2,
        t_af,
        t_df1,
        t_df2,
        t_local,
        t_edge,
        e_af,
        e_df,
        e_local,
        e_edge,
        t_sys,
        e_sys,
        objective: e_sys + p.gamma * t_sys,
        smoothed_delay,
        smoothed_objective: e_sys + p.gamma * smoothed_delay,
    }
}

/// Smoothed objective `f_beta` only.
pub fn smoothed_objective(x: &Allocation, p: &SystemParams, beta: f64) -> f64 {
    evaluate_unchecked(x, p, beta).smoothed_objective
}

/// Left-hand side of the relay power budget, `P1R s_R1 + |h_A1|^2 P1R P1A + P2R`.
pub fn relay_power_lhs(y: &PowerBlock, p: &SystemParams) -> f64 {
    y.p1r * p.noise_r1 + p.gain_a1 * y.p1r * y.p1a + y.p2r
}

/// The difference-of-convex form of [`relay_power_lhs`].
pub fn relay_power_lhs_dc(y: &PowerBlock, p: &SystemParams) -> f64 {
    let s = y.p1r + y.p1a;
    y.p2r + y.p1r * p.noise_r1 + 0.5 * p.gain_a1 * (s * s - y.p1r * y.p1r - y.p1a * y.p1a)
}

/// Convex majorant of `relay_power_lhs(y) - p_relay_max` obtained by
/// linearizing the concave part `-(P1R^2 + P1A^2)` at `y_ref`.
pub fn linearized_constraint(y: &PowerBlock, y_ref: &PowerBlock, p: &SystemParams) -> f64 {
    let s = y.p1r + y.p1a;
    let (r, q) = (y_ref.p1r, y_ref.p1a);
    y.p2r + y.p1r * p.noise_r1
        + 0.5 * p.gain_a1 * (s * s + r * r + q * q - 2.0 * r * y.p1r - 2.0 * q * y.p1a)
        - p.p_relay_max
}

/// Which scalar block of the allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarBlock {
    Alpha,
    FLocal,
    FEdge,
}

impl ScalarBlock {
    pub const ALL: [ScalarBlock; 3] = [ScalarBlock::Alpha, ScalarBlock::FLocal, ScalarBlock::FEdge];

    pub fn get(self, x: &Allocation) -> f64 {
        match self {
            ScalarBlock::Alpha => x.alpha,
            ScalarBlock::FLocal => x.f_local,
            ScalarBlock::FEdge => x.f_edge,
        }
    }

    pub fn set(self, x: &mut Allocation, v: f64) {
        match self {
            ScalarBlock::Alpha => x.alpha = v,
            ScalarBlock::FLocal => x.f_local = v,
            ScalarBlock::FEdge => x.f_edge = v,
        }
    }
}

/// `coeff / rate` with the zero-load convention.
fn per_rate(coeff: f64, rate: f64) -> f64 {
    if coeff == 0.0 {
        0.0
    } else if rate > 0.0 {
        coeff / rate
    } else {
        f64::INFINITY
    }
}

/// `w * slope`, treating a zero weight on an infinite slope as zero.
fn weighted(w: f64, slope: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * slope
    }
}

/// Partial derivative of `f_beta` with respect to one scalar block, the
/// others held fixed. May be infinite when a branch is at the edge of its
/// finite domain.
pub fn smoothed_partial(x: &Allocation, p: &SystemParams, beta: f64, which: ScalarBlock) -> f64 {
    let m = evaluate_unchecked(x, p, beta);
    let (w1, w2) = smooth_max_weights(m.local_branch(), m.edge_branch(), beta);
    let l = p.task_bits;
    match which {
        ScalarBlock::Alpha => {
            let af_per_bit = per_rate(p.af_bits(), m.r_af);
            let df1_per_bit = per_rate(l, m.r_df1);
            let df2_per_bit = per_rate(p.df2_bits(), m.r_df2);
            let energy_slope = -l * p.cycles_per_bit_local * p.chip_coeff_local * x.f_local * x.f_local
                + l * p.cycles_per_bit_edge * p.chip_coeff_edge * x.f_edge * x.f_edge
                - weighted(af_power(x.p1a, x.p1r, p), af_per_bit)
                + weighted(x.p2a, df1_per_bit)
                + weighted(x.p2r, df2_per_bit);
            let slope_local = -p.cycles_per_bit_local * l / x.f_local - af_per_bit;
            let slope_edge = df1_per_bit + p.cycles_per_bit_edge * l / x.f_edge + df2_per_bit;
            energy_slope + p.gamma * (weighted(w1, slope_local) + weighted(w2, slope_edge))
        }
        ScalarBlock::FLocal => {
            let cycles = (1.0 - x.alpha) * l * p.cycles_per_bit_local;
            2.0 * cycles * p.chip_coeff_local * x.f_local
                - p.gamma * w1 * cycles / (x.f_local * x.f_local)
        }
        ScalarBlock::FEdge => {
            let cycles = x.alpha * l * p.cycles_per_bit_edge;
            2.0 * cycles * p.chip_coeff_edge * x.f_edge - p.gamma * w2 * cycles / (x.f_edge * x.f_edge)
        }
    }
}

/// Delay of `load` bits over a rate `rate(s)` and its derivative with
/// respect to the SNR-controlling power, given `drate` = d rate / d power.
fn delay_and_slope(load: f64, rate: f64, drate: f64) -> (f64, f64) {
    let t = load / rate;
    (t, -t / rate * drate)
}

/// Analytic gradient of `f_beta` with respect to `(P1A, P2A, P1R, P2R)`,
/// holding `alpha`, `F_l` and `F_r` fixed.
pub fn grad_smoothed_objective_y(x: &Allocation, p: &SystemParams, beta: f64) -> Result<[f64; 4], ModelError> {
    let m = evaluate_unchecked(x, p, beta);
    let (w1, w2) = smooth_max_weights(m.local_branch(), m.edge_branch(), beta);
    let gw1 = p.gamma * w1;
    let gw2 = p.gamma * w2;
    let mut g = [0.0; 4];

    let af_load = (1.0 - x.alpha) * p.af_bits();
    if af_load > 0.0 {
        if m.r_af <= 0.0 {
            return Err(ModelError::GradientUndefined("af"));
        }
        let den = x.p1r * p.gain_b1 * p.noise_r1 + p.noise_b1;
        let snr = af_snr(x.p1a, x.p1r, p);
        let drate_dsnr = 0.5 * p.bandwidth_hz / (LN_2 * (1.0 + snr));
        let dsnr_dp1a = x.p1r * p.gain_a1 * p.gain_b1 / den;
        let dsnr_dp1r = x.p1a * p.gain_a1 * p.gain_b1 * p.noise_b1 / (den * den);
        let (t, dt_dp1a) = delay_and_slope(af_load, m.r_af, drate_dsnr * dsnr_dp1a);
        let (_, dt_dp1r) = delay_and_slope(af_load, m.r_af, drate_dsnr * dsnr_dp1r);
        let c = af_power(x.p1a, x.p1r, p);
        g[0] = (1.0 + x.p1r * p.gain_a1) * t + (c + gw1) * dt_dp1a;
        g[2] = (x.p1a * p.gain_a1 + p.noise_r1) * t + (c + gw1) * dt_dp1r;
    }

    let df1_load = x.alpha * p.task_bits;
    if df1_load > 0.0 {
        if m.r_df1 <= 0.0 {
            return Err(ModelError::GradientUndefined("df_uplink"));
        }
        let snr = x.p2a * p.gain_a2 / p.noise_r2;
        let drate = p.bandwidth_hz * p.gain_a2 / (p.noise_r2 * LN_2 * (1.0 + snr));
        let (t, dt) = delay_and_slope(df1_load, m.r_df1, drate);
        g[1] = t + (x.p2a + gw2) * dt;
    }

    let df2_load = x.alpha * p.df2_bits();
    if df2_load > 0.0 {
        if m.r_df2 <= 0.0 {
            return Err(ModelError::GradientUndefined("df_downlink"));
        }
        let snr = x.p2r * p.gain_b2 / p.noise_b2;
        let drate = p.bandwidth_hz * p.gain_b2 / (p.noise_b2 * LN_2 * (1.0 + snr));
        let (t, dt) = delay_and_slope(df2_load, m.r_df2, drate);
        g[3] = t + (x.p2r + gw2) * dt;
    }

    Ok(g)
}
