//! Symmetric-polynomial apparatus: the characteristic-2 counterexample
//! machinery, weight-profile arithmetic through Lucas' theorem, the
//! partition-lattice Möbius calculus, the variety identity, and the greedy
//! simultaneous Ramsey extraction.
//!
//! Over F_2, S_d(x) = binom(|x|, d) mod 2 depends on x only through its
//! Hamming weight, so correlations of symmetric phases reduce to counts of
//! |x| in residue classes; those counts are kept exact in big integers.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{popcount, Point, PrimeFieldCtx};
use crate::gowers::Budget;
use crate::par;
use crate::poly::symmetric_poly;
use crate::rng::CounterRng;

/// B(a, b) = sum over i != j of a_i b_j over F_2, computed as
/// |a| |b| + a.b mod 2 on bitmask points.
#[inline]
pub fn bilinear_b_masks(a: u64, b: u64) -> u8 {
    (((a.count_ones() as u64) * (b.count_ones() as u64) + (a & b).count_ones() as u64) & 1) as u8
}

/// B(a, b) on coordinate points; p = 2 only. The popcount fast path; the
/// literal double sum is `bilinear_b_double_sum`.
pub fn bilinear_b(ctx: &PrimeFieldCtx, a: &Point, b: &Point) -> Result<u8> {
    if ctx.p() != 2 {
        return Err(Error::Domain("B(a,b) is defined over F_2".into()));
    }
    if a.dim() != ctx.n() || b.dim() != ctx.n() {
        return Err(Error::CtxMismatch("bilinear_b".into()));
    }
    let wa = a.weight() as u64;
    let wb = b.weight() as u64;
    let dot = a
        .coords()
        .iter()
        .zip(b.coords())
        .filter(|&(&x, &y)| x == 1 && y == 1)
        .count() as u64;
    Ok(((wa * wb + dot) & 1) as u8)
}

/// The literal double sum over i != j, for cross-checking the fast path.
pub fn bilinear_b_double_sum(a: &Point, b: &Point) -> u8 {
    let mut acc = 0u64;
    for (i, &ai) in a.coords().iter().enumerate() {
        for (j, &bj) in b.coords().iter().enumerate() {
            if i != j {
                acc += (ai & bj) as u64;
            }
        }
    }
    (acc & 1) as u8
}

/// S_d over F_2 evaluated on a bitmask point via Lucas: binom(|x|, d) mod 2.
#[inline]
pub fn sd_mask(x: u64, d: u32) -> u8 {
    ((x.count_ones() & d) == d) as u8
}

/// Checks D_a D_b D_c D_d S_4 = B(a,b)B(c,d) + B(a,c)B(b,d) + B(a,d)B(b,c)
/// on F_2^n, exhaustively over all shift quadruples when n <= 4 and on
/// `trials` sampled quadruples otherwise; the base point x is sampled fresh
/// every time since the left side must not depend on it.
pub fn quartic_derivative_identity_check(n: usize, trials: u64, seed: u64) -> Result<bool> {
    if n > 64 {
        return Err(Error::Domain("mask points need n <= 64".into()));
    }
    if n > 4 && trials == 0 {
        return Err(Error::Domain(
            "n > 4 is sampled; pass a positive trial count".into(),
        ));
    }
    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let check = |a: u64, b: u64, c: u64, d: u64, x: u64| -> bool {
        let rhs = (bilinear_b_masks(a, b) & bilinear_b_masks(c, d))
            ^ (bilinear_b_masks(a, c) & bilinear_b_masks(b, d))
            ^ (bilinear_b_masks(a, d) & bilinear_b_masks(b, c));
        let mut lhs = 0u8;
        for omega in 0..16u32 {
            let mut v = x;
            if omega & 1 != 0 {
                v ^= a;
            }
            if omega & 2 != 0 {
                v ^= b;
            }
            if omega & 4 != 0 {
                v ^= c;
            }
            if omega & 8 != 0 {
                v ^= d;
            }
            lhs ^= sd_mask(v, 4);
        }
        lhs == rhs
    };
    if n <= 4 {
        let size = 1u64 << n;
        let mut rng = CounterRng::new(seed);
        for a in 0..size {
            for b in 0..size {
                for c in 0..size {
                    for d in 0..size {
                        let x = rng.next_u64() & mask;
                        if !check(a, b, c, d, x) {
                            return Ok(false);
                        }
                    }
                }
            }
        }
        return Ok(true);
    }
    for s in 0..trials {
        let mut rng = CounterRng::for_sample(seed, s);
        let a = rng.next_u64() & mask;
        let b = rng.next_u64() & mask;
        let c = rng.next_u64() & mask;
        let d = rng.next_u64() & mask;
        let x = rng.next_u64() & mask;
        if !check(a, b, c, d, x) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Distribution of the sextuple (B(a,b), B(a,c), B(a,d), B(b,c), B(b,d),
/// B(c,d)) over F_2^6.
#[derive(Debug, Clone, Serialize)]
pub struct B6Histogram {
    pub counts: Vec<u64>,
    pub total: u64,
    pub exhaustive: bool,
    /// max over cells of |count/total - 1/64|.
    pub max_deviation: f64,
}

pub fn b6_histogram(n: usize, trials: u64, seed: u64, budget: &Budget) -> Result<B6Histogram> {
    if n > 64 {
        return Err(Error::Domain("mask points need n <= 64".into()));
    }
    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let cell = |a: u64, b: u64, c: u64, d: u64| -> usize {
        ((bilinear_b_masks(a, b) as usize) << 5)
            | ((bilinear_b_masks(a, c) as usize) << 4)
            | ((bilinear_b_masks(a, d) as usize) << 3)
            | ((bilinear_b_masks(b, c) as usize) << 2)
            | ((bilinear_b_masks(b, d) as usize) << 1)
            | (bilinear_b_masks(c, d) as usize)
    };
    let exhaustive = n <= 32 && (1u128 << (4 * n)) <= budget.cube_cap;
    if !exhaustive && trials == 0 {
        return Err(Error::Domain(
            "this size is sampled; pass a positive trial count".into(),
        ));
    }
    let counts = if exhaustive {
        let size = 1u64 << n;
        par::map_chunks(
            size,
            budget.threads,
            |range| {
                let mut counts = vec![0u64; 64];
                for a in range {
                    for b in 0..size {
                        for c in 0..size {
                            for d in 0..size {
                                counts[cell(a, b, c, d)] += 1;
                            }
                        }
                    }
                }
                counts
            },
            merge_counts,
        )
        .unwrap()
    } else {
        par::map_chunks(
            trials,
            budget.threads,
            |range| {
                let mut counts = vec![0u64; 64];
                for s in range {
                    let mut rng = CounterRng::for_sample(seed, s);
                    let a = rng.next_u64() & mask;
                    let b = rng.next_u64() & mask;
                    let c = rng.next_u64() & mask;
                    let d = rng.next_u64() & mask;
                    counts[cell(a, b, c, d)] += 1;
                }
                counts
            },
            merge_counts,
        )
        .unwrap()
    };
    let total: u64 = counts.iter().sum();
    let max_deviation = counts
        .iter()
        .map(|&c| (c as f64 / total as f64 - 1.0 / 64.0).abs())
        .fold(0.0, f64::max);
    Ok(B6Histogram {
        counts,
        total,
        exhaustive,
        max_deviation,
    })
}

fn merge_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Exact counts of |x| mod m over F_2^n, by Pascal accumulation in big
/// integers: `counts[a]` = sum of binom(n, j) over j = a mod m.
pub fn mod_profile(n: usize, m: usize) -> Result<Vec<BigUint>> {
    if n > 10_000 {
        return Err(Error::Resource {
            what: "big-integer binomial profile".into(),
            needed: n as u128,
            cap: 10_000,
        });
    }
    if m == 0 {
        return Err(Error::Domain("modulus must be positive".into()));
    }
    let mut counts = vec![BigUint::ZERO; m];
    let mut binom = BigUint::from(1u32);
    for j in 0..=n {
        counts[j % m] += &binom;
        if j < n {
            binom = binom * BigUint::from((n - j) as u64) / BigUint::from((j + 1) as u64);
        }
    }
    Ok(counts)
}

/// Counts of |x| mod 8 with the multisection cross-check.
#[derive(Debug, Clone, Serialize)]
pub struct Mod8Profile {
    pub counts: Vec<String>,
    /// `counts[a]` / 2^n.
    pub fractions: [f64; 8],
    /// Multisection closed form evaluated per class.
    pub multisection: [f64; 8],
    /// max |fraction - multisection|.
    pub max_error: f64,
}

/// Ratio of a big count to 2^n without overflowing f64 for large n.
fn ratio_to_f64(count: &BigUint, n: usize) -> f64 {
    if count == &BigUint::ZERO {
        return 0.0;
    }
    let bits = count.bits();
    if bits <= 53 {
        let m: u64 = count.try_into().ok().unwrap_or(u64::MAX);
        return m as f64 * 2f64.powi(-(n as i32));
    }
    let top: u64 = (count >> (bits - 53)).try_into().unwrap_or(u64::MAX);
    top as f64 * 2f64.powi(bits as i32 - 53 - n as i32)
}

pub fn mod8_profile(n: usize) -> Result<Mod8Profile> {
    let counts = mod_profile(n, 8)?;
    let mut fractions = [0.0f64; 8];
    for (a, c) in counts.iter().enumerate() {
        fractions[a] = ratio_to_f64(c, n);
    }
    // (1/8) sum_r e^{-2 pi i r a / 8} ((1 + e^{2 pi i r / 8}) / 2)^n, with
    // (1 + e^{i t}) / 2 = cos(t/2) e^{i t/2}.
    let mut multisection = [0.0f64; 8];
    for (a, slot) in multisection.iter_mut().enumerate() {
        let mut acc = 0.0;
        for r in 0..8 {
            let t = 2.0 * std::f64::consts::PI * r as f64 / 8.0;
            let modulus = (t / 2.0).cos();
            let magnitude = modulus.abs().powi(n as i32);
            if magnitude == 0.0 {
                continue;
            }
            let sign = if modulus < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
            let angle = n as f64 * t / 2.0 - t * a as f64;
            acc += sign * magnitude * angle.cos();
        }
        *slot = acc / 8.0;
    }
    let max_error = fractions
        .iter()
        .zip(&multisection)
        .map(|(f, m)| (f - m).abs())
        .fold(0.0, f64::max);
    Ok(Mod8Profile {
        counts: counts.iter().map(|c| c.to_string()).collect(),
        fractions,
        multisection,
        max_error,
    })
}

/// binom(a, b) mod p by Lucas' theorem: the product of base-p digit
/// binomials.
pub fn lucas_binomial(a: u64, b: u64, p: u32) -> u8 {
    let mut a = a;
    let mut b = b;
    let mut acc: u32 = 1;
    // Small Pascal table mod p for digit binomials.
    let mut pascal = vec![vec![0u32; p as usize]; p as usize];
    for i in 0..p as usize {
        pascal[i][0] = 1;
        for j in 1..=i {
            pascal[i][j] = (pascal[i - 1][j - 1] + if j < i { pascal[i - 1][j] } else { 0 }) % p;
        }
    }
    while a > 0 || b > 0 {
        let ad = (a % p as u64) as usize;
        let bd = (b % p as u64) as usize;
        if bd > ad {
            return 0;
        }
        acc = acc * pascal[ad][bd] % p;
        a /= p as u64;
        b /= p as u64;
    }
    acc as u8
}

/// E_x (-1)^(S_target(x) + sum_i c_i S_i(x)) over F_2^n, exactly, through
/// the |x| mod M profile with M = 2^(ceil(log2 target) + 1). The value is
/// numerator / 2^n.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetricCorrelation {
    pub numerator: String,
    pub log2_denominator: usize,
    pub value: f64,
}

pub fn symmetric_correlation(
    n: usize,
    target_d: usize,
    coeffs: &[u8],
) -> Result<SymmetricCorrelation> {
    if target_d == 0 || target_d > 8 {
        return Err(Error::Domain("target degree must be in 1..=8".into()));
    }
    if coeffs.len() > target_d {
        return Err(Error::Domain(format!(
            "at most {target_d} lower-order coefficients (c_0..c_{})",
            target_d - 1
        )));
    }
    let m = (2 * target_d.next_power_of_two()).max(2);
    let counts = mod_profile(n, m)?;
    let mut numerator = BigInt::ZERO;
    for (a, count) in counts.iter().enumerate() {
        let mut s = lucas_binomial(a as u64, target_d as u64, 2);
        for (i, &c) in coeffs.iter().enumerate() {
            if c & 1 == 1 {
                s ^= lucas_binomial(a as u64, i as u64, 2);
            }
        }
        let signed = BigInt::from(count.clone());
        if s & 1 == 0 {
            numerator += signed;
        } else {
            numerator -= signed;
        }
    }
    let value = {
        let (sign, mag) = (numerator.sign(), numerator.magnitude());
        let v = ratio_to_f64(mag, n);
        if sign == num_bigint::Sign::Minus {
            -v
        } else {
            v
        }
    };
    Ok(SymmetricCorrelation {
        numerator: numerator.to_string(),
        log2_denominator: n,
        value,
    })
}

/// Brute-force version of [`symmetric_correlation`] over the full cube, for
/// cross-checking at small n.
pub fn symmetric_correlation_brute(n: usize, target_d: usize, coeffs: &[u8]) -> Result<i64> {
    if n > 24 {
        return Err(Error::Resource {
            what: "brute symmetric correlation".into(),
            needed: 1u128 << n,
            cap: 1 << 24,
        });
    }
    let mut acc: i64 = 0;
    for x in 0..(1u64 << n) {
        let w = popcount(x as u128) as u64;
        let mut s = lucas_binomial(w, target_d as u64, 2);
        for (i, &c) in coeffs.iter().enumerate() {
            if c & 1 == 1 {
                s ^= lucas_binomial(w, i as u64, 2);
            }
        }
        acc += if s & 1 == 0 { 1 } else { -1 };
    }
    Ok(acc)
}

/// Lucas factorization of S_d over F_2: when d is not a power of two,
/// S_d = S_{d1} S_{d2} with d1 the lowest set bit of d and d2 = d - d1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SdFactorization {
    PowerOfTwo,
    Product { d1: usize, d2: usize },
}

pub fn sd_factorization(d: usize) -> Result<SdFactorization> {
    if d == 0 {
        return Err(Error::Domain("degree must be at least 1".into()));
    }
    if d.is_power_of_two() {
        return Ok(SdFactorization::PowerOfTwo);
    }
    let d1 = 1 << d.trailing_zeros();
    Ok(SdFactorization::Product { d1, d2: d - d1 })
}

/// Verifies S_d = S_{d1} S_{d2} on the full truth table of F_2^n.
pub fn verify_sd_factorization(n: usize, d: usize, budget: &Budget) -> Result<bool> {
    if n > 16 {
        return Err(Error::Resource {
            what: "S_d factorization table check".into(),
            needed: 1u128 << n,
            cap: 1 << 16,
        });
    }
    let SdFactorization::Product { d1, d2 } = sd_factorization(d)? else {
        return Err(Error::Domain(format!("S_{d} does not factor (power of two)")));
    };
    let ctx = PrimeFieldCtx::new(2, n)?;
    let sd = symmetric_poly(ctx, d)?.truth_table(budget.table_cap)?;
    let s1 = symmetric_poly(ctx, d1)?.truth_table(budget.table_cap)?;
    let s2 = symmetric_poly(ctx, d2)?.truth_table(budget.table_cap)?;
    Ok(sd
        .values()
        .iter()
        .zip(s1.values().iter().zip(s2.values()))
        .all(|(&v, (&a, &b))| v == a & b))
}

/// A partition of {1, ..., d} in canonical form: blocks sorted by minimum,
/// elements ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn ground_size(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    /// The all-singletons partition.
    pub fn minimal(d: usize) -> Self {
        Partition {
            blocks: (1..=d).map(|i| vec![i]).collect(),
        }
    }

    /// Refinement order: self <= other iff every block of self is contained
    /// in some block of other.
    pub fn refines(&self, other: &Partition) -> bool {
        let d = self.ground_size();
        let mut owner = vec![0usize; d + 1];
        for (bi, block) in other.blocks.iter().enumerate() {
            for &e in block {
                owner[e] = bi;
            }
        }
        self.blocks.iter().all(|block| {
            let o = owner[block[0]];
            block.iter().all(|&e| owner[e] == o)
        })
    }

    /// Standard partition-lattice Möbius function relative to the minimum:
    /// the product over blocks of (-1)^(|C|-1) (|C|-1)!.
    pub fn moebius_standard(&self) -> i64 {
        self.blocks
            .iter()
            .map(|b| {
                let k = b.len() as i64;
                let sign = if (k - 1) % 2 == 0 { 1 } else { -1 };
                sign * factorial(k - 1)
            })
            .product()
    }

    /// The alternative sign convention (-1)^|C| (|C|-1)! that puts the
    /// block size itself in the exponent. It differs from the standard
    /// convention by (-1)^d overall and fails the inversion identity
    /// mu(min) = 1 on odd ground sets, so nothing downstream uses it; it is
    /// kept callable so the two conventions can be compared directly.
    pub fn moebius_block_size_sign_variant(&self) -> i64 {
        self.blocks
            .iter()
            .map(|b| {
                let k = b.len() as i64;
                let sign = if k % 2 == 0 { 1 } else { -1 };
                sign * factorial(k - 1)
            })
            .product()
    }
}

fn factorial(k: i64) -> i64 {
    (1..=k).product::<i64>().max(1)
}

/// All partitions of {1, ..., d} with the standard Möbius value, enumerated
/// canonically by restricted growth strings.
pub fn partitions_and_moebius(d: usize) -> Result<Vec<(Partition, i64)>> {
    if d == 0 || d > 10 {
        return Err(Error::Domain("partition ground set must have 1..=10 elements".into()));
    }
    let mut out = Vec::new();
    let mut rgs = vec![0usize; d];
    loop {
        let nblocks = rgs.iter().max().unwrap() + 1;
        let mut blocks = vec![Vec::new(); nblocks];
        for (i, &b) in rgs.iter().enumerate() {
            blocks[b].push(i + 1);
        }
        let p = Partition { blocks };
        let mu = p.moebius_standard();
        out.push((p, mu));
        // Next restricted growth string.
        let mut i = d;
        loop {
            if i <= 1 {
                return Ok(out);
            }
            i -= 1;
            let prefix_max = rgs[..i].iter().max().copied().unwrap();
            if rgs[i] <= prefix_max {
                rgs[i] += 1;
                for slot in rgs.iter_mut().skip(i + 1) {
                    *slot = 0;
                }
                break;
            }
            rgs[i] = 0;
        }
    }
}

/// Checks both inversion identities: mu(min) = 1 and, for every partition
/// pi above the minimum, sum of mu over refinements of pi is 0.
pub fn moebius_inversion_check(d: usize) -> Result<bool> {
    let all = partitions_and_moebius(d)?;
    let min = Partition::minimal(d);
    for (p, mu) in &all {
        if *p == min && *mu != 1 {
            return Ok(false);
        }
        if *p != min {
            let total: i64 = all
                .iter()
                .filter(|(q, _)| q.refines(p))
                .map(|(_, mu)| *mu)
                .sum();
            if total != 0 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Value of the elementary symmetric polynomial S_d at arbitrary residue
/// coordinates, by the product DP prod_j (1 + x_j t) mod t^{d+1}.
pub fn elementary_symmetric_value(ctx: &PrimeFieldCtx, coords: &[u8], d: usize) -> u8 {
    let mut e = vec![0u8; d + 1];
    e[0] = 1;
    for &x in coords {
        if x == 0 {
            continue;
        }
        for j in (1..=d).rev() {
            e[j] = ctx.add(e[j], ctx.mul(e[j - 1], x));
        }
    }
    e[d]
}

/// The multilinear form R_pi: the product over blocks C of
/// sum_j prod_{i in C} h^{(i)}_j.
#[allow(clippy::needless_range_loop)]
pub fn r_pi(ctx: &PrimeFieldCtx, pi: &Partition, hs: &[&[u8]]) -> u8 {
    let mut acc = 1u8;
    for block in &pi.blocks {
        let mut s = 0u8;
        for j in 0..ctx.n() {
            let mut prod = 1u8;
            for &i in block {
                prod = ctx.mul(prod, hs[i - 1][j]);
                if prod == 0 {
                    break;
                }
            }
            s = ctx.add(s, prod);
        }
        acc = ctx.mul(acc, s);
        if acc == 0 {
            return 0;
        }
    }
    acc
}

/// Checks D_{h^(1)} ... D_{h^(d)} S_d(x) = sum over partitions pi of
/// mu(pi) R_pi(h^(1), ..., h^(d)) with the standard-sign Möbius function.
/// Exhaustive over all (x, h^(1..d)) when trials = 0.
pub fn moebius_derivative_identity_check(
    p: u32,
    d: usize,
    n: usize,
    trials: u64,
    seed: u64,
) -> Result<bool> {
    if d > 5 || n > 8 {
        return Err(Error::Resource {
            what: "Möbius derivative identity check".into(),
            needed: (d.max(n)) as u128,
            cap: 8,
        });
    }
    let ctx = PrimeFieldCtx::new(p, n)?;
    let parts = partitions_and_moebius(d)?;
    let check = |x: &[u8], hs: &[Vec<u8>]| -> bool {
        // Left: alternating cube sum of S_d.
        let mut lhs = 0u8;
        for omega in 0..(1u32 << d) {
            let mut v = x.to_vec();
            for (i, h) in hs.iter().enumerate() {
                if omega >> i & 1 == 1 {
                    for (vi, &hi) in v.iter_mut().zip(h) {
                        *vi = ctx.add(*vi, hi);
                    }
                }
            }
            let val = elementary_symmetric_value(&ctx, &v, d);
            let positive = (d as u32 - omega.count_ones()).is_multiple_of(2);
            lhs = if positive { ctx.add(lhs, val) } else { ctx.sub(lhs, val) };
        }
        // Right: sum of mu(pi) R_pi.
        let refs: Vec<&[u8]> = hs.iter().map(|h| h.as_slice()).collect();
        let mut rhs = 0u8;
        for (pi, mu) in &parts {
            let m = mu.rem_euclid(p as i64) as u8;
            if m == 0 {
                continue;
            }
            rhs = ctx.add(rhs, ctx.mul(m, r_pi(&ctx, pi, &refs)));
        }
        lhs == rhs
    };
    if trials == 0 {
        // Exhaustive over all (x, h^(1..d)).
        let npoints = ctx.num_points() as u64;
        let total = (npoints as u128).checked_pow(d as u32 + 1);
        match total {
            Some(t) if t <= 1 << 24 => {}
            _ => {
                return Err(Error::Resource {
                    what: "exhaustive Möbius identity".into(),
                    needed: total.unwrap_or(u128::MAX),
                    cap: 1 << 24,
                })
            }
        }
        let mut tuple = vec![0u64; d + 1];
        loop {
            let x = ctx.unrank(tuple[0] as u128).coords().to_vec();
            let hs: Vec<Vec<u8>> = tuple[1..]
                .iter()
                .map(|&r| ctx.unrank(r as u128).coords().to_vec())
                .collect();
            if !check(&x, &hs) {
                return Ok(false);
            }
            let mut i = 0;
            loop {
                if i == tuple.len() {
                    return Ok(true);
                }
                tuple[i] += 1;
                if tuple[i] < npoints {
                    break;
                }
                tuple[i] = 0;
                i += 1;
            }
        }
    }
    for s in 0..trials {
        let mut rng = CounterRng::for_sample(seed, s);
        let x = rng.point_coords(p, n);
        let hs: Vec<Vec<u8>> = (0..d).map(|_| rng.point_coords(p, n)).collect();
        if !check(&x, &hs) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Report of the variety identity check for V = {S_1 = ... = S_p = 0}.
#[derive(Debug, Clone, Serialize)]
pub struct VarietyReport {
    pub trials: u64,
    /// Cubes with every vertex inside V (where the identity is nontrivial).
    pub cubes_inside: u64,
    pub identity_holds: bool,
    /// |V| / p^n, exact count over the full space.
    pub variety_fraction: f64,
    /// Whether |V|/p^n >= 2^(-(p-1) p^2), the recurrence lower bound.
    pub recurrence_bound_ok: bool,
    /// ||1_V||_{U^1} = |V|/p^n, the start of the monotone norm chain.
    pub u1_norm: f64,
}

/// Checks that the d-fold multiplicative derivative of e_F(S_d) 1_V equals
/// that of 1_V: nontrivial exactly when the whole cube lies in V, where it
/// reduces to the d-fold derivative of S_d vanishing. `trials = 0` runs
/// exhaustively over all (x, h^(1..d)) within the cube budget.
pub fn variety_identity_check(
    p: u32,
    d: usize,
    n: usize,
    trials: u64,
    seed: u64,
    budget: &Budget,
) -> Result<VarietyReport> {
    if d <= p as usize {
        return Err(Error::Domain(format!(
            "the variety identity needs d > p (got d={d}, p={p})"
        )));
    }
    let ctx = PrimeFieldCtx::new(p, n)?;
    let npoints = ctx.num_points();
    if npoints > budget.table_cap {
        return Err(Error::Resource {
            what: "variety census".into(),
            needed: npoints,
            cap: budget.table_cap,
        });
    }
    let in_variety = |coords: &[u8]| -> bool {
        (1..=p as usize).all(|j| elementary_symmetric_value(&ctx, coords, j) == 0)
    };
    // Exact |V|.
    let mut vcount: u64 = 0;
    for x in ctx.enumerate_points() {
        if in_variety(x.coords()) {
            vcount += 1;
        }
    }
    let variety_fraction = vcount as f64 / npoints as f64;
    let bound = 2f64.powi(-((p as i32 - 1) * p as i32 * p as i32));

    let check_cube = |x: &[u8], hs: &[Vec<u8>]| -> (bool, bool) {
        // (cube inside V, identity violated)
        let mut alt = 0u8;
        for omega in 0..(1u32 << d) {
            let mut v = x.to_vec();
            for (i, h) in hs.iter().enumerate() {
                if omega >> i & 1 == 1 {
                    for (vi, &hi) in v.iter_mut().zip(h) {
                        *vi = ctx.add(*vi, hi);
                    }
                }
            }
            if !in_variety(&v) {
                return (false, false);
            }
            let val = elementary_symmetric_value(&ctx, &v, d);
            let positive = (d as u32 - omega.count_ones()).is_multiple_of(2);
            alt = if positive { ctx.add(alt, val) } else { ctx.sub(alt, val) };
        }
        (true, alt != 0)
    };

    let (actual_trials, cubes_inside, failures) = if trials == 0 {
        let total = (npoints).checked_pow(d as u32 + 1);
        match total {
            Some(t) if t <= budget.cube_cap => {}
            _ => {
                return Err(Error::Resource {
                    what: "exhaustive variety identity".into(),
                    needed: total.unwrap_or(u128::MAX),
                    cap: budget.cube_cap,
                })
            }
        }
        let total = total.unwrap() as u64;
        let (inside, failures) = par::map_chunks(
            total,
            budget.threads,
            |range| {
                let mut inside = 0u64;
                let mut failures = 0u64;
                let np = npoints as u64;
                for t in range {
                    let mut rem = t;
                    let x = ctx.unrank((rem % np) as u128).coords().to_vec();
                    rem /= np;
                    let hs: Vec<Vec<u8>> = (0..d)
                        .map(|_| {
                            let h = ctx.unrank((rem % np) as u128).coords().to_vec();
                            rem /= np;
                            h
                        })
                        .collect();
                    let (is_in, bad) = check_cube(&x, &hs);
                    inside += is_in as u64;
                    failures += bad as u64;
                }
                (inside, failures)
            },
            |a, b| (a.0 + b.0, a.1 + b.1),
        )
        .unwrap_or((0, 0));
        (total, inside, failures)
    } else {
        let (inside, failures) = par::map_chunks(
            trials,
            budget.threads,
            |range| {
                let mut inside = 0u64;
                let mut failures = 0u64;
                for s in range {
                    let mut rng = CounterRng::for_sample(seed, s);
                    let x = rng.point_coords(p, n);
                    let hs: Vec<Vec<u8>> = (0..d).map(|_| rng.point_coords(p, n)).collect();
                    let (is_in, bad) = check_cube(&x, &hs);
                    inside += is_in as u64;
                    failures += bad as u64;
                }
                (inside, failures)
            },
            |a, b| (a.0 + b.0, a.1 + b.1),
        )
        .unwrap_or((0, 0));
        (trials, inside, failures)
    };
    Ok(VarietyReport {
        trials: actual_trials,
        cubes_inside,
        identity_holds: failures == 0,
        variety_fraction,
        recurrence_bound_ok: variety_fraction >= bound,
        u1_norm: variety_fraction,
    })
}

/// Edge-list input for the simultaneous Ramsey extraction; vertices are
/// 1-indexed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RamseyInput {
    pub n: usize,
    #[serde(default)]
    pub edges2: Vec<[usize; 2]>,
    #[serde(default)]
    pub edges3: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RamseyReport {
    /// The monochromatic set, 1-indexed, ascending.
    pub set: Vec<usize>,
    /// Whether all pairs of the set lie inside E2 (true) or outside (false).
    pub pairs_inside: Option<bool>,
    /// Same for triples against E3.
    pub triples_inside: Option<bool>,
    /// Independent post-check over every pair and triple of the set.
    pub verified: bool,
    /// Length of the greedy pigeonhole sequence before extraction.
    pub sequence_len: usize,
}

/// Greedy pigeonhole extraction of a set monochromatic for a graph and a
/// 3-uniform hypergraph simultaneously.
///
/// Phase 1 repeatedly keeps the largest class of survivors whose pair and
/// triple relations to all chosen vertices are constant (ties to the
/// lexicographically smallest class signature) and takes its minimum.
/// Phase 2 makes the pair colors constant by pigeonhole, then runs the
/// greedy graph-Ramsey extraction on the induced triple coloring.
pub fn simultaneous_ramsey(input: &RamseyInput) -> Result<RamseyReport> {
    let n = input.n;
    if n < 2 {
        return Err(Error::Domain("need at least two vertices".into()));
    }
    for e in &input.edges2 {
        if e.iter().any(|&v| v == 0 || v > n) {
            return Err(Error::Domain(format!("edge {e:?} out of range 1..={n}")));
        }
    }
    for e in &input.edges3 {
        if e.iter().any(|&v| v == 0 || v > n) {
            return Err(Error::Domain(format!("edge {e:?} out of range 1..={n}")));
        }
    }
    let mut e2 = std::collections::HashSet::new();
    for e in &input.edges2 {
        let mut k = [e[0] - 1, e[1] - 1];
        k.sort();
        e2.insert((k[0], k[1]));
    }
    let mut e3 = std::collections::HashSet::new();
    for e in &input.edges3 {
        let mut k = [e[0] - 1, e[1] - 1, e[2] - 1];
        k.sort();
        e3.insert((k[0], k[1], k[2]));
    }
    let has2 = |a: usize, b: usize| -> bool {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        e2.contains(&(a, b))
    };
    let has3 = |a: usize, b: usize, c: usize| -> bool {
        let mut k = [a, b, c];
        k.sort();
        e3.contains(&(k[0], k[1], k[2]))
    };

    // Phase 1: greedy pigeonhole sequence.
    let mut survivors: Vec<usize> = (0..n).collect();
    let mut chosen: Vec<usize> = Vec::new();
    while !survivors.is_empty() {
        let l = chosen.len();
        let mut classes: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
        for &x in &survivors {
            let mut sig = Vec::with_capacity(l + l * l / 2);
            for &ci in &chosen {
                sig.push(has2(ci, x) as u8);
            }
            for i in 0..l {
                for j in (i + 1)..l {
                    sig.push(has3(chosen[i], chosen[j], x) as u8);
                }
            }
            classes.entry(sig).or_default().push(x);
        }
        // Largest class, ties to the smallest signature.
        let best = classes
            .values()
            .max_by_key(|v| v.len())
            .expect("survivors nonempty")
            .clone();
        let next = best[0];
        chosen.push(next);
        survivors = best[1..].to_vec();
    }
    let len = chosen.len();
    debug_assert!(len >= 2);

    // Pair color of sequence index i (constant over later partners).
    let b2 = |i: usize| has2(chosen[i], chosen[i + 1]);
    // Triple color of (i, j), i < j < len-1 (constant over later partners).
    let b3 = |i: usize, j: usize| has3(chosen[i], chosen[j], chosen[j + 1]);

    // Phase 2a: pigeonhole indices 0..len-1 on pair color.
    let side_true: Vec<usize> = (0..len - 1).filter(|&i| b2(i)).collect();
    let side_false: Vec<usize> = (0..len - 1).filter(|&i| !b2(i)).collect();
    let t = if side_true.len() > side_false.len() {
        side_true
    } else {
        side_false
    };

    // Phase 2b: greedy graph-Ramsey on the triple coloring within t.
    let mut pool = t;
    let mut pivots: Vec<(usize, Option<bool>)> = Vec::new();
    while let Some((&v, rest)) = pool.split_first() {
        if rest.is_empty() {
            pivots.push((v, None));
            break;
        }
        let yes: Vec<usize> = rest.iter().copied().filter(|&w| b3(v, w)).collect();
        let no: Vec<usize> = rest.iter().copied().filter(|&w| !b3(v, w)).collect();
        if yes.len() > no.len() {
            pivots.push((v, Some(true)));
            pool = yes;
        } else {
            pivots.push((v, Some(false)));
            pool = no;
        }
    }
    let colored: Vec<(usize, bool)> = pivots
        .iter()
        .filter_map(|&(v, c)| c.map(|c| (v, c)))
        .collect();
    let count_true = colored.iter().filter(|&&(_, c)| c).count();
    let majority = count_true > colored.len() - count_true;
    let mut idx_set: Vec<usize> = colored
        .iter()
        .filter(|&&(_, c)| c == majority)
        .map(|&(v, _)| v)
        .collect();
    if let Some(&(last, None)) = pivots.last() {
        idx_set.push(last);
    }
    // The final sequence vertex joins for free: its pair colors come from
    // the earlier endpoint and it never opens a new triple.
    idx_set.push(len - 1);
    idx_set.sort();
    idx_set.dedup();

    let set: Vec<usize> = idx_set.iter().map(|&i| chosen[i] + 1).collect();
    let mut set_sorted = set.clone();
    set_sorted.sort();

    // Independent verification pass over all pairs and triples.
    let vs: Vec<usize> = set_sorted.iter().map(|&v| v - 1).collect();
    let mut pairs_inside = None;
    let mut verified = true;
    for i in 0..vs.len() {
        for j in (i + 1)..vs.len() {
            let inside = has2(vs[i], vs[j]);
            match pairs_inside {
                None => pairs_inside = Some(inside),
                Some(prev) => {
                    if prev != inside {
                        verified = false;
                    }
                }
            }
        }
    }
    let mut triples_inside = None;
    for i in 0..vs.len() {
        for j in (i + 1)..vs.len() {
            for k in (j + 1)..vs.len() {
                let inside = has3(vs[i], vs[j], vs[k]);
                match triples_inside {
                    None => triples_inside = Some(inside),
                    Some(prev) => {
                        if prev != inside {
                            verified = false;
                        }
                    }
                }
            }
        }
    }
    Ok(RamseyReport {
        set: set_sorted,
        pairs_inside,
        triples_inside,
        verified,
        sequence_len: len,
    })
}
