//! Seeded generator backed by ChaCha8, a counter-based stream cipher.
//!
//! Frozen derivations (part of the reproducibility contract):
//! * `uniform(lo, hi) = lo + (hi - lo) * (next_u64 >> 11) * 2^-53`
//! * `choice(n)` is Lemire's widening-multiply method with rejection
//! * `normal()` is Box-Muller on two `uniform(0, 1)` draws, no caching
//! * `shuffle` is Fisher-Yates from the back, using `choice`

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream derived from this generator's seed.
    pub fn fork(&self, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(stream.wrapping_add(1));
        Self {
            seed: self.seed,
            inner,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::contract(format!("empty uniform range [{lo}, {hi})")));
        }
        Ok(lo + (hi - lo) * self.unit())
    }

    pub fn uniform_vec(&mut self, lo: f64, hi: f64, len: usize) -> Result<Vec<f64>> {
        (0..len).map(|_| self.uniform(lo, hi)).collect()
    }

    /// Uniform index in `[0, n)`.
    pub fn choice(&mut self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(Error::contract("choice over an empty range"));
        }
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let wide = (self.next_u64() as u128) * (n as u128);
            if (wide as u64) >= threshold {
                return Ok((wide >> 64) as usize);
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.choice(i + 1).expect("nonempty");
            items.swap(i, j);
        }
    }
}
