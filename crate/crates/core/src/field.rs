//! Prime-field scalar arithmetic, the additive character, and point/cube
//! geometry in F_p^n.
//!
//! Points are ranked in little-endian mixed radix: coordinate 1 is the least
//! significant digit. For p = 2 a point's rank is exactly its coordinate
//! bitmask, so the popcount of the rank is the Hamming weight |x|.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// The fixed prime modulus p and ambient dimension n.
///
/// The point-index integer is `u128`: construction fails when p^n does not
/// fit, so every point of a valid context has a rank in `[0, p^n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrimeFieldCtx {
    p: u32,
    n: usize,
}

fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

impl PrimeFieldCtx {
    /// Checks primality by trial division and that p^n fits the point index.
    pub fn new(p: u32, n: usize) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::Domain(format!("modulus {p} is not prime")));
        }
        if p > 251 {
            return Err(Error::Domain(format!(
                "modulus {p} too large; residues are stored in bytes (p <= 251)"
            )));
        }
        if n == 0 {
            return Err(Error::Domain("dimension n must be at least 1".into()));
        }
        let mut count: u128 = 1;
        for _ in 0..n {
            count = count
                .checked_mul(p as u128)
                .ok_or_else(|| Error::Domain(format!("p^n overflows the point index (p={p}, n={n})")))?;
        }
        let _ = count;
        Ok(Self { p, n })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// p^n as a u128 (guaranteed to fit by construction).
    pub fn num_points(&self) -> u128 {
        (0..self.n).fold(1u128, |acc, _| acc * self.p as u128)
    }

    /// p^n as a usize, for operations that materialize tables.
    pub fn num_points_usize(&self) -> Result<usize> {
        let np = self.num_points();
        usize::try_from(np).map_err(|_| Error::Resource {
            what: format!("point table over F_{}^{}", self.p, self.n),
            needed: np,
            cap: usize::MAX as u128,
        })
    }

    /// Residue addition mod p.
    #[inline]
    pub fn add(&self, a: u8, b: u8) -> u8 {
        let s = a as u32 + b as u32;
        if s >= self.p { (s - self.p) as u8 } else { s as u8 }
    }

    /// Residue subtraction mod p.
    #[inline]
    pub fn sub(&self, a: u8, b: u8) -> u8 {
        if a >= b { a - b } else { (a as u32 + self.p - b as u32) as u8 }
    }

    /// Residue multiplication mod p.
    #[inline]
    pub fn mul(&self, a: u8, b: u8) -> u8 {
        ((a as u32 * b as u32) % self.p) as u8
    }

    /// Residue negation mod p.
    #[inline]
    pub fn neg(&self, a: u8) -> u8 {
        if a == 0 { 0 } else { (self.p - a as u32) as u8 }
    }

    /// Multiplicative inverse of a nonzero residue (p is prime).
    pub fn inv(&self, a: u8) -> Result<u8> {
        if a == 0 {
            return Err(Error::Domain("inverse of 0".into()));
        }
        // Fermat: a^(p-2) mod p.
        let mut acc = 1u32;
        let mut base = a as u32 % self.p;
        let mut e = self.p - 2;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base % self.p;
            }
            base = base * base % self.p;
            e >>= 1;
        }
        Ok(acc as u8)
    }

    #[inline]
    pub fn pow(&self, a: u8, e: u32) -> u8 {
        let mut acc = 1u32;
        let mut base = a as u32 % self.p;
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base % self.p;
            }
            base = base * base % self.p;
            e >>= 1;
        }
        acc as u8
    }

    /// Rank of a coordinate vector in little-endian mixed radix.
    pub fn rank(&self, coords: &[u8]) -> u128 {
        debug_assert_eq!(coords.len(), self.n);
        let mut r: u128 = 0;
        for &c in coords.iter().rev() {
            r = r * self.p as u128 + c as u128;
        }
        r
    }

    /// Inverse of [`rank`](Self::rank).
    pub fn unrank(&self, mut r: u128) -> Point {
        let mut coords = vec![0u8; self.n];
        for c in coords.iter_mut() {
            *c = (r % self.p as u128) as u8;
            r /= self.p as u128;
        }
        Point { coords }
    }

    /// Streams all p^n points exactly once, in rank order.
    pub fn enumerate_points(&self) -> PointIter {
        PointIter {
            ctx: *self,
            next: Some(Point {
                coords: vec![0u8; self.n],
            }),
        }
    }

    /// e_F(t) = exp(2 pi i t / p). For p = 2 this is exactly +1 or -1.
    pub fn char_value(&self, t: u8) -> Result<Complex> {
        if t as u32 >= self.p {
            return Err(Error::Domain(format!(
                "character argument {t} out of range for p={}",
                self.p
            )));
        }
        if self.p == 2 {
            return Ok(Complex::new(if t == 0 { 1.0 } else { -1.0 }, 0.0));
        }
        let theta = 2.0 * std::f64::consts::PI * t as f64 / self.p as f64;
        Ok(Complex::new(theta.cos(), theta.sin()))
    }
}

/// A point of F_p^n: n residues in {0, ..., p-1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Point {
    coords: Vec<u8>,
}

impl Point {
    pub fn new(ctx: &PrimeFieldCtx, coords: Vec<u8>) -> Result<Self> {
        if coords.len() != ctx.n() {
            return Err(Error::CtxMismatch(format!(
                "point has {} coordinates, context dimension is {}",
                coords.len(),
                ctx.n()
            )));
        }
        if let Some(&c) = coords.iter().find(|&&c| c as u32 >= ctx.p()) {
            return Err(Error::Domain(format!(
                "coordinate {c} out of range for p={}",
                ctx.p()
            )));
        }
        Ok(Self { coords })
    }

    pub fn zero(ctx: &PrimeFieldCtx) -> Self {
        Self {
            coords: vec![0u8; ctx.n()],
        }
    }

    /// i-th standard basis vector (0-based).
    pub fn basis(ctx: &PrimeFieldCtx, i: usize) -> Self {
        let mut coords = vec![0u8; ctx.n()];
        coords[i] = 1;
        Self { coords }
    }

    pub fn coords(&self) -> &[u8] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Coordinate-wise sum mod p.
    pub fn add(&self, ctx: &PrimeFieldCtx, other: &Point) -> Result<Point> {
        if self.dim() != ctx.n() || other.dim() != ctx.n() {
            return Err(Error::CtxMismatch("point dimension mismatch".into()));
        }
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| ctx.add(a, b))
            .collect();
        Ok(Point { coords })
    }

    /// Number of nonzero coordinates. For p = 2 this is the weight |x|.
    pub fn weight(&self) -> usize {
        self.coords.iter().filter(|&&c| c != 0).count()
    }
}

/// For p = 2: Hamming weight |x| of a bitmask rank.
#[inline]
pub fn popcount(rank: u128) -> u32 {
    rank.count_ones()
}

/// Vertex x + sum over set bits of omega of h_i, coordinate-wise mod p.
pub fn cube_vertex(ctx: &PrimeFieldCtx, x: &Point, hs: &[Point], omega: u32) -> Result<Point> {
    if omega as u64 >= (1u64 << hs.len()) {
        return Err(Error::Domain(format!(
            "vertex selector {omega:#b} out of range for {} shifts",
            hs.len()
        )));
    }
    let mut v = x.clone();
    for (i, h) in hs.iter().enumerate() {
        if omega >> i & 1 == 1 {
            v = v.add(ctx, h)?;
        }
    }
    Ok(v)
}

/// Rank-order point stream.
pub struct PointIter {
    ctx: PrimeFieldCtx,
    next: Option<Point>,
}

impl Iterator for PointIter {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        let cur = self.next.take()?;
        // Mixed-radix increment, coordinate 1 least significant.
        let mut succ = cur.clone();
        let mut i = 0;
        loop {
            if i == succ.coords.len() {
                self.next = None;
                break;
            }
            succ.coords[i] += 1;
            if (succ.coords[i] as u32) < self.ctx.p() {
                self.next = Some(succ);
                break;
            }
            succ.coords[i] = 0;
            i += 1;
        }
        Some(cur)
    }
}

/// Exact histogram of character arguments: `counts[t]` terms with value e_F(t).
///
/// Addition of CycloSums is component-wise and the total mass equals the
/// number of accumulated terms, so F_2 statistics stay in integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycloSum {
    counts: Vec<u64>,
}

impl CycloSum {
    pub fn new(p: u32) -> Self {
        Self {
            counts: vec![0; p as usize],
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    #[inline]
    pub fn add_term(&mut self, t: u8) {
        self.counts[t as usize] += 1;
    }

    #[inline]
    pub fn add_terms(&mut self, t: u8, multiplicity: u64) {
        self.counts[t as usize] += multiplicity;
    }

    pub fn merge(&mut self, other: &CycloSum) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_mass(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Sum over t of `counts[t] * e_F(t)`, one complex reconstruction.
    pub fn value(&self) -> Complex {
        let p = self.counts.len() as u32;
        if p == 2 {
            let d = self.counts[0] as i128 - self.counts[1] as i128;
            return Complex::new(d as f64, 0.0);
        }
        let mut z = Complex::new(0.0, 0.0);
        for (t, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let theta = 2.0 * std::f64::consts::PI * t as f64 / p as f64;
            z.re += c as f64 * theta.cos();
            z.im += c as f64 * theta.sin();
        }
        z
    }

    /// Exact signed count for p = 2: `counts[0] - counts[1]`.
    pub fn value_exact_p2(&self) -> i128 {
        debug_assert_eq!(self.counts.len(), 2);
        self.counts[0] as i128 - self.counts[1] as i128
    }
}

/// Minimal complex value carrier for character sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn scale(&self, s: f64) -> Complex {
        Complex::new(self.re * s, self.im * s)
    }
}
