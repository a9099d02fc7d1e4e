//! Reproducible random Grassmann points.
//!
//! All randomness goes through ChaCha8 seeded from a `u64`, so the same seed
//! yields bit-identical samples on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grassmann::{full_mask, GrassmannNumber, Parity};
use crate::superexpr::CoordinateSystem;

pub const DEFAULT_SEED: u64 = 0x5eed_2024;

#[derive(Clone, Debug)]
pub struct Sampler {
    rng: ChaCha8Rng,
    generators: usize,
    body: (f64, f64),
    soul: f64,
}

impl Sampler {
    /// Bodies of even samples are drawn from `[0.5, 1.5]`, nilpotent
    /// coefficients from `[-0.5, 0.5]`.
    pub fn new(seed: u64, generators: usize) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            generators,
            body: (0.5, 1.5),
            soul: 0.5,
        }
    }

    pub fn with_body_range(mut self, lo: f64, hi: f64) -> Self {
        self.body = (lo, hi);
        self
    }

    pub fn with_soul_scale(mut self, scale: f64) -> Self {
        self.soul = scale;
        self
    }

    pub fn generators(&self) -> usize {
        self.generators
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..=hi)
    }

    fn element(&mut self, body: Option<f64>, parity: Option<u32>) -> GrassmannNumber {
        let s = self.soul;
        let mut terms = Vec::new();
        if let Some(b) = body {
            terms.push((0u32, b));
        }
        for mask in 1..=full_mask(self.generators) {
            if parity.map_or(true, |p| mask.count_ones() % 2 == p) {
                terms.push((mask, self.rng.gen_range(-s..=s)));
            }
        }
        GrassmannNumber::from_terms(self.generators, terms).expect("masks within range")
    }

    /// Even element with body in the configured range.
    pub fn even(&mut self) -> GrassmannNumber {
        let b = self.uniform(self.body.0, self.body.1);
        self.element(Some(b), Some(0))
    }

    /// Even element with the given body and a random nilpotent part.
    pub fn even_with_body(&mut self, body: f64) -> GrassmannNumber {
        self.element(Some(body), Some(0))
    }

    pub fn odd(&mut self) -> GrassmannNumber {
        self.element(None, Some(1))
    }

    /// Element of the requested parity (`Inhomogeneous` gives a mixed one).
    pub fn of_parity(&mut self, parity: Parity) -> GrassmannNumber {
        match parity {
            Parity::Even => self.even(),
            Parity::Odd => self.odd(),
            Parity::Inhomogeneous => {
                let b = self.uniform(self.body.0, self.body.1);
                self.element(Some(b), None)
            }
        }
    }

    /// Point of a superdomain: even slots even, odd slots odd.
    pub fn point(&mut self, coords: &CoordinateSystem) -> Vec<GrassmannNumber> {
        (0..coords.dim()).map(|i| self.of_parity(coords.parity(i))).collect()
    }

    /// Components with parities `ε_i + shift`.
    pub fn components(&mut self, coords: &CoordinateSystem, shift: u8) -> Vec<GrassmannNumber> {
        (0..coords.dim())
            .map(|i| self.of_parity(Parity::from_bit(coords.eps(i) + shift)))
            .collect()
    }

    /// `count` points of `coords`.
    pub fn points(&mut self, coords: &CoordinateSystem, count: usize) -> Vec<Vec<GrassmannNumber>> {
        (0..count).map(|_| self.point(coords)).collect()
    }
}
