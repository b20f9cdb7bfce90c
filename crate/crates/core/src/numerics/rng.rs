use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};

/// Purpose tag folded into the stream index so that, e.g., chain 0 and
/// simulation trial 0 never share a sequence under one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamDomain {
    General = 0,
    Chain = 1,
    Trial = 2,
    Posterior = 3,
    Permutation = 4,
    Sweep = 5,
}

/// Deterministic, splittable random stream identified by
/// `(master_seed, stream_index)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_index);
        RngStream {
            master_seed,
            stream_index,
            inner,
        }
    }

    /// Stream `index` within a purpose domain.
    pub fn derive(master_seed: u64, domain: StreamDomain, index: u64) -> Self {
        debug_assert!(index < 1 << 48);
        RngStream::new(master_seed, ((domain as u64) << 48) | index)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Beta(a, b) as `X / (X + Y)` with `X ~ Gamma(a)`, `Y ~ Gamma(b)`.
#[derive(Debug, Clone, Copy)]
pub struct BetaSampler {
    alpha: f64,
    beta: f64,
    gx: Gamma<f64>,
    gy: Gamma<f64>,
}

impl BetaSampler {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let shape_err = || Error::domain(format!("beta shape ({alpha}, {beta}) must be positive"));
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(shape_err());
        }
        Ok(BetaSampler {
            alpha,
            beta,
            gx: Gamma::new(alpha, 1.0).map_err(|_| shape_err())?,
            gy: Gamma::new(beta, 1.0).map_err(|_| shape_err())?,
        })
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let x = self.gx.sample(rng);
        let y = self.gy.sample(rng);
        let s = x + y;
        if s > 0.0 {
            x / s
        } else if self.alpha >= self.beta {
            // both gamma draws underflowed; only possible for tiny shapes
            1.0
        } else {
            0.0
        }
    }
}

pub fn sample_beta(a: f64, b: f64, rng: &mut RngStream) -> Result<f64> {
    Ok(BetaSampler::new(a, b)?.sample(rng))
}
