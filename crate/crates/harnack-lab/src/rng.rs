//! Counter-based random numbers for reproducible parallel Monte Carlo.
//!
//! Every Gaussian draw is addressed by the tuple
//! `(seed, replicate, step, channel, lane)` and produced by hashing that
//! address with a splitmix64-style mixer followed by a Box-Muller transform.
//! No generator state is carried between draws, so replicate `r` produces
//! bit-identical noise no matter how work is scheduled across threads, and
//! truncated models automatically share the low lanes (= modes) of the same
//! Brownian sheet.

/// Noise channels. Keeping them on separate counters means auxiliary
/// variables never perturb the Brownian increments of a coarser model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Brownian increments shared by every scheme.
    Brownian = 0,
    /// Residual noise of the exact Ornstein-Uhlenbeck increment, conditional
    /// on the Brownian increment of the same step.
    OuResidual = 1,
    /// Free-standing draws (stochastic convolution sampling, random pairs).
    Aux = 2,
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58476d1ce4e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    z
}

#[inline]
fn counter_hash(seed: u64, replicate: u64, step: u64, channel: u64, lane: u64) -> u64 {
    let mut h = mix64(seed ^ 0x9e3779b97f4a7c15);
    h = mix64(h ^ replicate.wrapping_mul(0xa0761d6478bd642f));
    h = mix64(h ^ step.wrapping_mul(0xe7037ed1a0b428db));
    h = mix64(h ^ channel.wrapping_mul(0x8ebc6af09c88c6e3));
    h = mix64(h ^ lane.wrapping_mul(0x589965cc75374cc3));
    h
}

/// Map a hash to the open interval (0, 1); never returns 0 or 1, so
/// `ln(u)` below is always finite.
#[inline]
fn to_unit_open(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}

/// Stateless Gaussian stream for one (seed, replicate) pair.
#[derive(Debug, Clone, Copy)]
pub struct GaussianStream {
    seed: u64,
    replicate: u64,
}

impl GaussianStream {
    pub fn new(seed: u64, replicate: u64) -> Self {
        GaussianStream { seed, replicate }
    }

    /// Fill `out` with independent standard normals addressed by
    /// `(step, channel, lane)`, lane running over the output index.
    pub fn fill_normals(&self, step: u64, channel: Channel, out: &mut [f64]) {
        let n = out.len();
        let mut k = 0;
        while k < n {
            let u1 = to_unit_open(counter_hash(
                self.seed,
                self.replicate,
                step,
                channel as u64,
                k as u64,
            ));
            let u2 = to_unit_open(counter_hash(
                self.seed,
                self.replicate,
                step,
                channel as u64,
                (k + 1) as u64,
            ));
            let r = (-2.0 * u1.ln()).sqrt();
            let theta = std::f64::consts::TAU * u2;
            out[k] = r * theta.cos();
            if k + 1 < n {
                out[k + 1] = r * theta.sin();
            }
            k += 2;
        }
    }

    /// Single standard normal at an explicit address.
    pub fn normal(&self, step: u64, channel: Channel, lane: u64) -> f64 {
        // Lane pairs share one Box-Muller transform; reproduce the pairing
        // used by `fill_normals` so scalar and vector access agree.
        let base = lane & !1;
        let u1 = to_unit_open(counter_hash(
            self.seed,
            self.replicate,
            step,
            channel as u64,
            base,
        ));
        let u2 = to_unit_open(counter_hash(
            self.seed,
            self.replicate,
            step,
            channel as u64,
            base + 1,
        ));
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        if lane & 1 == 0 {
            r * theta.cos()
        } else {
            r * theta.sin()
        }
    }

    /// Uniform draw in [lo, hi) at an explicit address.
    pub fn uniform(&self, step: u64, channel: Channel, lane: u64, lo: f64, hi: f64) -> f64 {
        let u = to_unit_open(counter_hash(
            self.seed,
            self.replicate,
            step,
            channel as u64,
            lane,
        ));
        lo + (hi - lo) * u
    }
}

/// Stable 64-bit hash of a string, used to derive per-job seeds from job
/// names. FNV-1a; must not change across releases or reports stop being
/// byte-reproducible.
pub fn stable_name_hash(name: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Derive a job seed from a suite seed and a job name.
pub fn derive_seed(suite_seed: u64, name: &str) -> u64 {
    mix64(suite_seed ^ stable_name_hash(name))
}

/// Deterministic pairwise (cascade) summation. The result depends only on
/// the order of `xs`, not on thread scheduling, and is far more accurate
/// than a running sum for large `n`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
