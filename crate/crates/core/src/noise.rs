use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Counter-addressed random source: the stream for draw `n` depends only on
/// `(seed, domain, n)`, so draws can be evaluated in any order or in parallel.
#[derive(Debug, Clone)]
pub struct DrawRng {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl DrawRng {
    pub fn new(seed: u64, domain: u64, draw: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&domain.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(draw);
        Self { rng, spare: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via the Box-Muller transform.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let (s, c) = libm::sincos(core::f64::consts::TAU * u2);
        self.spare = Some(r * s);
        r * c
    }

    /// Exponential with the given rate, by inverse CDF.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -libm::log(self.uniform()) / rate
    }

    /// Laplace with location 0 and scale `b`, by inverse CDF.
    pub fn laplace(&mut self, b: f64) -> f64 {
        let u = self.uniform() - 0.5;
        let mag = -b * libm::log1p(-2.0 * libm::fabs(u));
        if u < 0.0 {
            -mag
        } else {
            mag
        }
    }
}
