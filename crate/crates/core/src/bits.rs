//! Bit-packed truth tables over F_2.
//!
//! A table holds one bit per point of F_2^n, indexed by rank (= coordinate
//! bitmask). The shift x -> x ^ h is a butterfly permutation: low bits of h
//! permute bits inside each word, high bits swap whole words. Unused high
//! bits of the last word are kept at zero.

const LOW_MASKS: [u64; 6] = [
    0x5555_5555_5555_5555,
    0x3333_3333_3333_3333,
    0x0f0f_0f0f_0f0f_0f0f,
    0x00ff_00ff_00ff_00ff,
    0x0000_ffff_0000_ffff,
    0x0000_0000_ffff_ffff,
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitTable {
    n: usize,
    words: Vec<u64>,
}

impl BitTable {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= 40, "bit table dimension {n} too large");
        let bits = 1usize << n;
        Self {
            n,
            words: vec![0; bits.div_ceil(64)],
        }
    }

    pub fn from_bits(n: usize, bit_at: impl Fn(usize) -> bool) -> Self {
        let mut t = Self::zeros(n);
        for x in 0..1usize << n {
            if bit_at(x) {
                t.words[x >> 6] |= 1u64 << (x & 63);
            }
        }
        t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, x: usize) -> u8 {
        (self.words[x >> 6] >> (x & 63) & 1) as u8
    }

    #[inline]
    pub fn set(&mut self, x: usize, v: u8) {
        let w = &mut self.words[x >> 6];
        *w = (*w & !(1u64 << (x & 63))) | ((v as u64) << (x & 63));
    }

    /// Table of x -> self[x ^ h].
    pub fn xor_shift(&self, h: u64) -> BitTable {
        let mut out = Self::zeros(self.n);
        self.xor_shift_into(h, &mut out);
        out
    }

    /// Writes x -> self[x ^ h] into `out` without allocating.
    pub fn xor_shift_into(&self, h: u64, out: &mut BitTable) {
        debug_assert_eq!(out.n, self.n);
        // Word-level swaps for shift bits >= 6.
        let word_delta = (h >> 6) as usize;
        for (i, w) in out.words.iter_mut().enumerate() {
            *w = self.words[i ^ word_delta];
        }
        // In-word butterflies for shift bits < 6.
        for (b, &mask) in LOW_MASKS.iter().enumerate() {
            if h >> b & 1 == 1 {
                let s = 1u32 << b;
                for w in out.words.iter_mut() {
                    *w = ((*w & mask) << s) | ((*w >> s) & mask);
                }
            }
        }
        out.mask_tail();
    }

    /// F_2 derivative D_h: `self[x ^ h] ^ self[x]`.
    pub fn derivative(&self, h: u64) -> BitTable {
        let mut t = self.xor_shift(h);
        for (w, s) in t.words.iter_mut().zip(&self.words) {
            *w ^= s;
        }
        t
    }

    /// Writes D_h self into `out` without allocating.
    pub fn derivative_into(&self, h: u64, out: &mut BitTable) {
        self.xor_shift_into(h, out);
        for (w, s) in out.words.iter_mut().zip(&self.words) {
            *w ^= s;
        }
    }

    pub fn xor_with(&mut self, other: &BitTable) {
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            *w ^= o;
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Signed count: #zeros - #ones = 2^n - 2 * count_ones.
    pub fn bias_int(&self) -> i128 {
        (1i128 << self.n) - 2 * self.count_ones() as i128
    }

    /// Signed correlation count between two tables: sum over x of
    /// `(-1)^(self[x] + other[x])`.
    pub fn correlation_int(&self, other: &BitTable) -> i128 {
        let diff: u64 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as u64)
            .sum();
        (1i128 << self.n) - 2 * diff as i128
    }

    fn mask_tail(&mut self) {
        let bits = 1usize << self.n;
        if bits < 64 {
            self.words[0] &= (1u64 << bits) - 1;
        }
    }
}
