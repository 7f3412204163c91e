//! Reproducible counter-based random number generation.
//!
//! The generator is SplitMix64 used in counter mode: the j-th output of the
//! stream keyed by `key` is
//!
//! ```text
//! out(key, j) = mix(key + (j+1) * 0x9E3779B97F4A7C15)
//! mix(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//!         z ^= z >> 27; z *= 0x94D049BB133111EB;
//!         z ^= z >> 31
//! ```
//!
//! Stream keys are derived per logical sample as `mix(seed) ^ mix(index)`, so
//! the randomness consumed by sample `i` is a pure function of `(seed, i)`.
//! Splitting a sample range across any number of workers therefore cannot
//! change any per-sample draw, which is what makes Monte Carlo results
//! bit-identical across thread counts.

const GOLDEN: u64 = 0x9E3779B97F4A7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58476D1CE4E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D049BB133111EB);
    z ^= z >> 31;
    z
}

/// One independent stream of the counter-based generator.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    /// Stream for a top-level seed.
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix(seed.wrapping_add(GOLDEN)),
            counter: 0,
        }
    }

    /// Substream for logical sample `index` of run `seed`. Independent of how
    /// samples are distributed over workers.
    pub fn for_sample(seed: u64, index: u64) -> Self {
        Self {
            key: mix(seed.wrapping_add(GOLDEN)) ^ mix(index.wrapping_mul(GOLDEN).wrapping_add(1)),
            counter: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Unbiased uniform draw in `[0, bound)` by rejection.
    #[inline]
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        if bound.is_power_of_two() {
            return self.next_u64() & (bound - 1);
        }
        let zone = u64::MAX - u64::MAX % bound;
        loop {
            let u = self.next_u64();
            if u < zone {
                return u % bound;
            }
        }
    }

    /// Uniform residue in `[0, p)`.
    #[inline]
    pub fn residue(&mut self, p: u32) -> u8 {
        self.below(p as u64) as u8
    }

    /// Uniform coordinate vector in F_p^n (one `below` draw per coordinate).
    pub fn point_coords(&mut self, p: u32, n: usize) -> Vec<u8> {
        (0..n).map(|_| self.residue(p)).collect()
    }
}
