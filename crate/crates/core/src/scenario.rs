//! Seeded channel realizations.
//!
//! Gains are `|h|^2` of circularly-symmetric complex Gaussian channels, i.e.
//! exponential with mean [`MEAN_CHANNEL_GAIN`]. Draws come from ChaCha20
//! (`rand_chacha`), keyed by the seed with the draw index as the stream id,
//! so a `(seed, draw_index)` pair always reproduces the same gains on every
//! platform.

use crate::model::{Allocation, SystemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

/// Average channel power loss of every link.
pub const MEAN_CHANNEL_GAIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGains {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl ChannelGains {
    pub fn apply(&self, p: &SystemParams) -> SystemParams {
        SystemParams {
            gain_a1: self.a1,
            gain_b1: self.b1,
            gain_a2: self.a2,
            gain_b2: self.b2,
            ..*p
        }
    }
}

pub fn channel_rng(seed: u64, draw_index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(draw_index);
    rng
}

/// Four independent Rayleigh-fading power gains.
pub fn sample_channels(seed: u64, draw_index: u64) -> ChannelGains {
    let mut rng = channel_rng(seed, draw_index);
    sample_gains(&mut rng)
}

pub fn sample_gains<R: Rng>(rng: &mut R) -> ChannelGains {
    let exp = Exp::new(1.0 / MEAN_CHANNEL_GAIN).expect("positive rate");
    ChannelGains {
        a1: exp.sample(rng),
        b1: exp.sample(rng),
        a2: exp.sample(rng),
        b2: exp.sample(rng),
    }
}

/// One problem instance: base parameters with sampled channel gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub draw_index: u64,
    pub params: SystemParams,
}

impl Scenario {
    pub fn sample(seed: u64, draw_index: u64, base: &SystemParams) -> Self {
        Self {
            seed,
            draw_index,
            params: sample_channels(seed, draw_index).apply(base),
        }
    }
}

/// A random allocation strictly inside the feasible set, for multi-start
/// runs. Both user powers and both relay powers are positive.
pub fn random_feasible_allocation<R: Rng>(rng: &mut R, p: &SystemParams) -> Allocation {
    let user_total = p.p_user_max * rng.random_range(0.05..1.0);
    let split = rng.random_range(0.05..0.95);
    let p1a = user_total * split;
    let p2a = user_total * (1.0 - split);
    let relay_total = p.p_relay_max * rng.random_range(0.05..1.0);
    let relay_split = rng.random_range(0.05..0.95);
    let p2r = relay_total * (1.0 - relay_split);
    let p1r = relay_total * relay_split / (p.noise_r1 + p.gain_a1 * p1a);
    Allocation {
        alpha: rng.random_range(0.0..1.0),
        p1a,
        p2a,
        p1r,
        p2r,
        f_local: p.f_local_max * rng.random_range(0.05..1.0),
        f_edge: p.f_edge_max * rng.random_range(0.05..1.0),
    }
}
