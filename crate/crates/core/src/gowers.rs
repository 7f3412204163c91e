//! Exact and Monte-Carlo Gowers norms, weak norms, bias, and correlations
//! for polynomial phases f = e_F(P).
//!
//! The order-m power mean is E over (h_1, ..., h_m, x) of the m-fold
//! multiplicative derivative of f, computed here as e_F of the m-fold
//! additive derivative of P. Exact mode collapses the innermost (h_m, x)
//! average into |sum_x e_F(T(x))|^2 for the depth-(m-1) derivative table T,
//! so everything accumulates in integer histograms; Monte-Carlo mode draws
//! whole shift tuples and also accumulates integer residue counts, which
//! makes both modes bit-identical across thread counts.

use serde::Serialize;

use crate::bits::BitTable;
use crate::error::{Error, Result};
use crate::field::{Complex, CycloSum, PrimeFieldCtx};
use crate::par;
use crate::poly::{monomials_up_to, PhaseTable, Poly};
use crate::rng::CounterRng;

/// Resource budgets threaded through every operation that can enumerate.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    /// Max entries of a dense truth table.
    pub table_cap: u128,
    /// Max p^(n * order) for exact norm enumeration.
    pub cube_cap: u128,
    /// Max candidate count for the exhaustive weak-norm search.
    pub search_cap: u128,
    /// Worker threads; 0 means all available cores.
    pub threads: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            table_cap: crate::DEFAULT_TABLE_CAP,
            cube_cap: crate::DEFAULT_CUBE_CAP,
            search_cap: crate::DEFAULT_SEARCH_CAP,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

/// Exact value of a power mean as integer cyclotomic counts over a power
/// of p: value = sum_u `counts[u]` * cos(2 pi u / p) / p^log_p_denominator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExactPowerMean {
    pub cyclo_counts: Vec<u128>,
    pub log_p_denominator: u32,
}

impl ExactPowerMean {
    pub fn to_f64(&self, p: u32) -> f64 {
        let den = (p as f64).powi(self.log_p_denominator as i32);
        if p == 2 {
            return (self.cyclo_counts[0] as i128 - self.cyclo_counts[1] as i128) as f64 / den;
        }
        let mut acc = 0.0;
        for (u, &c) in self.cyclo_counts.iter().enumerate() {
            acc += c as f64 * (2.0 * std::f64::consts::PI * u as f64 / p as f64).cos();
        }
        acc / den
    }
}

/// Result of a U^{d+1} power-mean computation.
#[derive(Debug, Clone, Serialize)]
pub struct GowersResult {
    /// Order of the norm (d+1).
    pub d_plus_1: usize,
    /// E of the (d+1)-fold multiplicative derivative: the 2^{d+1}-th power
    /// of the norm.
    pub power_mean: f64,
    /// max(power_mean, 0)^{1 / 2^{d+1}}.
    pub norm: f64,
    pub method: Method,
    /// Standard error of the sample mean (0 for exact).
    pub stderr: f64,
    /// Enumerated shift tuples (exact) or drawn samples (Monte Carlo).
    pub samples: u64,
    /// Imaginary part of the sample mean (exactly 0 for exact mode).
    pub imag_mean: f64,
    /// Present for exact mode: the power mean as exact integer counts.
    pub exact: Option<ExactPowerMean>,
}

fn finish_result(
    order: usize,
    power_mean: f64,
    method: Method,
    stderr: f64,
    samples: u64,
    imag_mean: f64,
    exact: Option<ExactPowerMean>,
) -> GowersResult {
    let clamped = power_mean.max(0.0);
    GowersResult {
        d_plus_1: order,
        power_mean,
        norm: clamped.powf(1.0 / (1u64 << order) as f64),
        method,
        stderr,
        samples,
        imag_mean,
        exact,
    }
}

/// E_x e_F(P(x)) through the histogram path: exact counts, one complex
/// reconstruction at the end.
#[derive(Debug, Clone, Serialize)]
pub struct BiasResult {
    pub value: Complex,
    pub magnitude: f64,
    /// Histogram of P's values over all points.
    pub counts: Vec<u64>,
}

pub fn bias(poly: &Poly, budget: &Budget) -> Result<BiasResult> {
    let table = poly.truth_table(budget.table_cap)?;
    Ok(bias_of_table(&table))
}

pub fn bias_of_table(table: &PhaseTable) -> BiasResult {
    let hist = table.histogram();
    let npoints = table.values().len() as f64;
    let z = hist.value().scale(1.0 / npoints);
    BiasResult {
        value: z,
        magnitude: z.abs(),
        counts: hist.counts().to_vec(),
    }
}

/// E_x f(x) e_F(-Q(x)) for f = e_F(P): the histogram of P - Q.
pub fn correlate_with(p_table: &PhaseTable, q: &Poly, budget: &Budget) -> Result<Complex> {
    if q.ctx() != p_table.ctx() {
        return Err(Error::CtxMismatch("correlate_with".into()));
    }
    let q_table = q.truth_table(budget.table_cap)?;
    let f = p_table.ctx();
    let mut cs = CycloSum::new(f.p());
    for (&a, &b) in p_table.values().iter().zip(q_table.values()) {
        cs.add_term(f.sub(a, b));
    }
    Ok(cs.value().scale(1.0 / p_table.values().len() as f64))
}

fn checked_pow(p: u32, e: u128) -> Option<u128> {
    let mut acc: u128 = 1;
    for _ in 0..e {
        acc = acc.checked_mul(p as u128)?;
    }
    Some(acc)
}

/// Exact power mean by the derivative recursion on truth tables.
///
/// Fails (advising Monte Carlo) when p^(n * order) exceeds the cube budget.
pub fn gowers_norm_exact(poly: &Poly, order: usize, budget: &Budget) -> Result<GowersResult> {
    if order == 0 {
        return Err(Error::Domain("norm order must be at least 1".into()));
    }
    let ctx = poly.ctx();
    let cost = checked_pow(ctx.p(), (ctx.n() * order) as u128);
    match cost {
        Some(c) if c <= budget.cube_cap => {}
        _ => {
            return Err(Error::Resource {
                what: format!(
                    "exact U^{order} enumeration over F_{}^{} (use monte_carlo)",
                    ctx.p(),
                    ctx.n()
                ),
                needed: cost.unwrap_or(u128::MAX),
                cap: budget.cube_cap,
            })
        }
    }
    let table = poly.truth_table(budget.table_cap)?;
    let exact = if ctx.p() == 2 {
        exact_p2(&table, order, budget.threads)
    } else {
        exact_general(&table, order, budget.threads)
    };
    let power_mean = exact.to_f64(ctx.p());
    let samples = cost.unwrap() as u64;
    Ok(finish_result(
        order,
        power_mean,
        Method::Exact,
        0.0,
        samples,
        0.0,
        Some(exact),
    ))
}

fn exact_p2(table: &PhaseTable, order: usize, threads: usize) -> ExactPowerMean {
    let n = table.ctx().n();
    let bits = table.to_bits().expect("p = 2");
    let npoints = 1u64 << n;
    let depth = order - 1;

    // Sum over all depth-(m-1) shift prefixes of bias^2 of the derived table.
    fn rec(cur: &BitTable, level: usize, scratch: &mut [BitTable], acc: &mut u128, npoints: u64) {
        if level == 0 {
            let c = cur.bias_int();
            *acc += (c * c) as u128;
            return;
        }
        let (head, tail) = scratch.split_first_mut().expect("scratch per level");
        for h in 0..npoints {
            cur.derivative_into(h, head);
            rec(head, level - 1, tail, acc, npoints);
        }
    }

    let sum_sq = if depth == 0 {
        let c = bits.bias_int();
        (c * c) as u128
    } else {
        par::map_chunks(
            npoints,
            threads,
            |range| {
                let mut scratch: Vec<BitTable> = (0..depth).map(|_| BitTable::zeros(n)).collect();
                let mut acc: u128 = 0;
                for h1 in range {
                    let (head, tail) = scratch.split_first_mut().unwrap();
                    bits.derivative_into(h1, head);
                    rec(head, depth - 1, tail, &mut acc, npoints);
                }
                acc
            },
            |a, b| a + b,
        )
        .unwrap_or(0)
    };
    // power_mean = sum_sq / 2^{n(order+1)}; counts: A0 - A1 = sum_sq with
    // A0 + A1 = 2^{n(order+1)}.
    let log_den = (n * (order + 1)) as u32;
    let mass = 1u128 << log_den;
    let a0 = (mass + sum_sq) / 2;
    let a1 = mass - a0;
    ExactPowerMean {
        cyclo_counts: vec![a0, a1],
        log_p_denominator: log_den,
    }
}

/// Rank permutation of x -> x + h over the full point table.
fn shift_perm(ctx: &PrimeFieldCtx, h_rank: u64, perm: &mut [usize]) {
    let h = ctx.unrank(h_rank as u128);
    let mut coords = vec![0u8; ctx.n()];
    for slot in perm.iter_mut() {
        let shifted: Vec<u8> = coords
            .iter()
            .zip(h.coords())
            .map(|(&a, &b)| ctx.add(a, b))
            .collect();
        *slot = ctx.rank(&shifted) as usize;
        for c in coords.iter_mut() {
            *c += 1;
            if (*c as u32) < ctx.p() {
                break;
            }
            *c = 0;
        }
    }
}

fn exact_general(table: &PhaseTable, order: usize, threads: usize) -> ExactPowerMean {
    let ctx = table.ctx();
    let p = ctx.p() as usize;
    let npoints = ctx.num_points() as u64;
    let depth = order - 1;

    fn derive(ctx: &PrimeFieldCtx, src: &[u8], perm: &[usize], out: &mut [u8]) {
        for (x, o) in out.iter_mut().enumerate() {
            *o = ctx.sub(src[perm[x]], src[x]);
        }
    }

    fn leaf_counts(p: usize, table: &[u8]) -> Vec<u128> {
        let mut hist = vec![0u64; p];
        for &v in table {
            hist[v as usize] += 1;
        }
        // |sum_t c_t e(t)|^2 = sum_u A_u e(u), A_u = sum_t c_t c_{t-u}.
        let mut a = vec![0u128; p];
        for (u, au) in a.iter_mut().enumerate() {
            for t in 0..p {
                let s = (t + p - u) % p;
                *au += hist[t] as u128 * hist[s] as u128;
            }
        }
        a
    }

    fn rec(
        ctx: &PrimeFieldCtx,
        cur: &[u8],
        level: usize,
        scratch: &mut [Vec<u8>],
        perm: &mut [usize],
        acc: &mut [u128],
        npoints: u64,
    ) {
        if level == 0 {
            let counts = leaf_counts(acc.len(), cur);
            for (a, c) in acc.iter_mut().zip(counts) {
                *a += c;
            }
            return;
        }
        let (head, tail) = scratch.split_first_mut().expect("scratch per level");
        for h in 0..npoints {
            shift_perm(ctx, h, perm);
            derive(ctx, cur, perm, head);
            rec(ctx, head, level - 1, tail, perm, acc, npoints);
        }
    }

    let size = ctx.num_points_usize().expect("cap-checked");
    let acc: Vec<u128> = if depth == 0 {
        leaf_counts(p, table.values())
    } else {
        par::map_chunks(
            npoints,
            threads,
            |range| {
                let mut scratch: Vec<Vec<u8>> = (0..depth).map(|_| vec![0u8; size]).collect();
                let mut perm = vec![0usize; size];
                let mut acc = vec![0u128; p];
                for h1 in range {
                    shift_perm(&ctx, h1, &mut perm);
                    let (head, tail) = scratch.split_first_mut().unwrap();
                    derive(&ctx, table.values(), &perm, head);
                    rec(&ctx, head, depth - 1, tail, &mut perm, &mut acc, npoints);
                }
                acc
            },
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
        .unwrap_or_else(|| vec![0u128; p])
    };
    ExactPowerMean {
        cyclo_counts: acc,
        log_p_denominator: (ctx.n() * (order + 1)) as u32,
    }
}

/// How sample vertices are evaluated in Monte-Carlo mode.
enum McEval {
    /// p = 2, combination of symmetric polynomials: value from |x| only.
    WeightLut(Vec<u8>),
    /// Dense truth table lookups.
    Table(PhaseTable),
    /// Direct sparse evaluation (no table fits the budget).
    Direct,
}

/// Monte-Carlo estimate of the order-m power mean.
///
/// Sample i draws (x, h_1, ..., h_m) from its own counter-based stream, so
/// the estimate is a pure function of (seed, samples) and is bit-identical
/// for any thread count. The real part of the sample mean is reported;
/// negatives are clamped to 0 before the 2^m-th root since the true
/// expectation is a nonnegative real.
pub fn gowers_norm_mc(
    poly: &Poly,
    order: usize,
    samples: u64,
    seed: u64,
    budget: &Budget,
) -> Result<GowersResult> {
    if order == 0 {
        return Err(Error::Domain("norm order must be at least 1".into()));
    }
    if samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let ctx = poly.ctx();
    let p = ctx.p();
    let eval = if p == 2 && poly.symmetric_decomposition().is_some() && ctx.n() <= 64 {
        let coeffs = poly.symmetric_decomposition().unwrap();
        let lut: Vec<u8> = (0..=ctx.n())
            .map(|w| {
                coeffs
                    .iter()
                    .enumerate()
                    .filter(|&(d, &c)| c == 1 && (w & d) == d)
                    .count() as u8
                    & 1
            })
            .collect();
        McEval::WeightLut(lut)
    } else if ctx.num_points() <= budget.table_cap {
        McEval::Table(poly.truth_table(budget.table_cap)?)
    } else {
        McEval::Direct
    };

    let counts = par::map_chunks(
        samples,
        budget.threads,
        |range| {
            let mut counts = vec![0u64; p as usize];
            for s in range {
                let mut rng = CounterRng::for_sample(seed, s);
                let value = match &eval {
                    McEval::WeightLut(lut) => sample_value_p2_masks(ctx.n(), order, lut, &mut rng),
                    McEval::Table(t) => sample_value_table(&ctx, order, t, &mut rng),
                    McEval::Direct => sample_value_direct(&ctx, order, poly, &mut rng),
                };
                counts[value as usize] += 1;
            }
            counts
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        },
    )
    .unwrap();

    // Mean and spread from the exact residue histogram.
    let nf = samples as f64;
    let mut sum_re = 0.0;
    let mut sum_re2 = 0.0;
    let mut sum_im = 0.0;
    for (t, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let theta = 2.0 * std::f64::consts::PI * t as f64 / p as f64;
        sum_re += c as f64 * theta.cos();
        sum_re2 += c as f64 * theta.cos() * theta.cos();
        sum_im += c as f64 * theta.sin();
    }
    let mean = sum_re / nf;
    let var = if samples > 1 {
        ((sum_re2 - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    let stderr = (var / nf).sqrt();
    Ok(finish_result(
        order,
        mean,
        Method::MonteCarlo,
        stderr,
        samples,
        sum_im / nf,
        None,
    ))
}

/// p = 2, points as bitmask ranks, f determined by Hamming weight.
fn sample_value_p2_masks(n: usize, order: usize, lut: &[u8], rng: &mut CounterRng) -> u8 {
    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let x = rng.next_u64() & mask;
    let hs: Vec<u64> = (0..order).map(|_| rng.next_u64() & mask).collect();
    // XOR of f over the cube; signs vanish mod 2. Gray-code walk.
    let mut acc = lut[x.count_ones() as usize];
    let mut vertex = x;
    let mut gray = 0u64;
    for g in 1..(1u64 << order) {
        let next = g ^ (g >> 1);
        let flipped = (gray ^ next).trailing_zeros() as usize;
        vertex ^= hs[flipped];
        gray = next;
        acc ^= lut[vertex.count_ones() as usize];
    }
    acc
}

/// Generic p: coordinate vectors, table lookups, alternating signs.
fn sample_value_table(
    ctx: &PrimeFieldCtx,
    order: usize,
    table: &PhaseTable,
    rng: &mut CounterRng,
) -> u8 {
    let x = rng.point_coords(ctx.p(), ctx.n());
    let hs: Vec<Vec<u8>> = (0..order)
        .map(|_| rng.point_coords(ctx.p(), ctx.n()))
        .collect();
    alternating_sum(ctx, order, &x, &hs, |coords| {
        table.get_rank(ctx.rank(coords) as usize)
    })
}

fn sample_value_direct(ctx: &PrimeFieldCtx, order: usize, poly: &Poly, rng: &mut CounterRng) -> u8 {
    let x = rng.point_coords(ctx.p(), ctx.n());
    let hs: Vec<Vec<u8>> = (0..order)
        .map(|_| rng.point_coords(ctx.p(), ctx.n()))
        .collect();
    alternating_sum(ctx, order, &x, &hs, |coords| poly.evaluate_coords(coords))
}

/// sum over omega of (-1)^(m - |omega|) P(x + omega . h) mod p: the m-fold
/// additive derivative at x, walked in Gray-code order.
fn alternating_sum(
    ctx: &PrimeFieldCtx,
    order: usize,
    x: &[u8],
    hs: &[Vec<u8>],
    f: impl Fn(&[u8]) -> u8,
) -> u8 {
    let mut vertex = x.to_vec();
    let mut acc = 0u8;
    let mut gray = 0u64;
    let mut popcnt: u32 = 0;
    let base_sign_even = order.is_multiple_of(2);
    let add_vertex = |vertex: &[u8], pc: u32, acc: &mut u8| {
        let v = f(vertex);
        let positive = pc.is_multiple_of(2) == base_sign_even;
        *acc = if positive {
            ctx.add(*acc, v)
        } else {
            ctx.sub(*acc, v)
        };
    };
    add_vertex(&vertex, 0, &mut acc);
    for g in 1..(1u64 << order) {
        let next = g ^ (g >> 1);
        let flipped = (gray ^ next).trailing_zeros() as usize;
        let turned_on = next >> flipped & 1 == 1;
        for (vi, hi) in vertex.iter_mut().zip(&hs[flipped]) {
            *vi = if turned_on {
                ctx.add(*vi, *hi)
            } else {
                ctx.sub(*vi, *hi)
            };
        }
        popcnt = if turned_on { popcnt + 1 } else { popcnt - 1 };
        gray = next;
        add_vertex(&vertex, popcnt, &mut acc);
    }
    acc
}

/// Result of the exhaustive weak-norm search.
#[derive(Debug, Clone, Serialize)]
pub struct WeakNormResult {
    pub d_plus_1: usize,
    /// sup over Q of |E_x f(x) e_F(-Q(x))|.
    pub best_value: f64,
    /// A maximizing Q of degree <= d; ties break to the smallest canonical
    /// coefficient index, so witnesses are reproducible.
    #[serde(serialize_with = "ser_poly")]
    pub witness: Poly,
    /// Candidates examined: p^dim(P_d).
    pub search_size: u128,
}

fn ser_poly<S: serde::Serializer>(p: &Poly, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&p.to_string())
}

/// Exhaustively maximizes |E_x f(x) e_F(-Q(x))| over all Q in P_d, for
/// f = e_F(P) given by its phase table.
#[allow(clippy::needless_range_loop)]
pub fn weak_norm_exhaustive(
    p_table: &PhaseTable,
    order: usize,
    budget: &Budget,
) -> Result<WeakNormResult> {
    if order == 0 {
        return Err(Error::Domain("norm order must be at least 1".into()));
    }
    let ctx = p_table.ctx();
    let d = order - 1;
    let monos = monomials_up_to(ctx, d);
    let dim = monos.len();
    let search_size = checked_pow(ctx.p(), dim as u128).filter(|&s| s <= budget.search_cap);
    let Some(search_size) = search_size else {
        return Err(Error::Resource {
            what: format!(
                "exhaustive weak-norm search over P_{d}(F_{}^{}) with {dim} monomials \
                 (use correlate_with against chosen candidates)",
                ctx.p(),
                ctx.n()
            ),
            needed: checked_pow(ctx.p(), dim as u128).unwrap_or(u128::MAX),
            cap: budget.search_cap,
        });
    };

    // Chunk over the top digits so the chunk count is independent of the
    // thread count; merge prefers larger value then smaller index.
    let threads = if budget.threads == 0 {
        par::default_threads()
    } else {
        budget.threads
    };
    let mut top = 0usize;
    let mut chunks: u128 = 1;
    while top < dim && chunks < (threads as u128) * 4 {
        chunks *= ctx.p() as u128;
        top += 1;
    }
    let low_digits = dim - top;

    let best = if ctx.p() == 2 {
        let f_bits = p_table.to_bits()?;
        let mono_bits: Vec<BitTable> = monos
            .iter()
            .map(|m| mono_table(ctx, m, budget).to_bits().expect("p = 2"))
            .collect();
        par::map_chunks(
            chunks as u64,
            budget.threads,
            |range| {
                let mut best: Option<(i128, u128)> = None;
                let mut q = BitTable::zeros(ctx.n());
                for prefix in range {
                    let mut applied: Vec<usize> = Vec::new();
                    for (k, j) in (low_digits..dim).enumerate() {
                        if prefix >> k & 1 == 1 {
                            q.xor_with(&mono_bits[j]);
                            applied.push(j);
                        }
                    }
                    let base_index = (prefix as u128) << low_digits;
                    dfs_p2(&f_bits, &mono_bits, &mut q, low_digits, base_index, &mut best);
                    for &j in &applied {
                        q.xor_with(&mono_bits[j]);
                    }
                }
                best
            },
            merge_best_i128,
        )
        .flatten()
        .map(|(v, idx)| (v.unsigned_abs() as f64 / ctx.num_points() as f64, idx))
    } else {
        let size = ctx.num_points_usize()?;
        let mono_tables: Vec<Vec<u8>> = monos
            .iter()
            .map(|m| mono_table(ctx, m, budget).values().to_vec())
            .collect();
        let cos: Vec<f64> = (0..ctx.p())
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / ctx.p() as f64).cos())
            .collect();
        let sin: Vec<f64> = (0..ctx.p())
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / ctx.p() as f64).sin())
            .collect();
        par::map_chunks(
            chunks as u64,
            budget.threads,
            |range| {
                let mut best: Option<(f64, u128)> = None;
                let mut q = vec![0u8; size];
                for prefix in range {
                    let mut digits = prefix as u128;
                    let mut applied: Vec<(usize, u8)> = Vec::new();
                    let mut base_index: u128 = 0;
                    for j in low_digits..dim {
                        let c = (digits % ctx.p() as u128) as u8;
                        digits /= ctx.p() as u128;
                        base_index += c as u128 * checked_pow(ctx.p(), j as u128).unwrap();
                        if c != 0 {
                            add_scaled(&ctx, &mut q, &mono_tables[j], c);
                            applied.push((j, c));
                        }
                    }
                    dfs_general(
                        &ctx,
                        p_table.values(),
                        &mono_tables,
                        &cos,
                        &sin,
                        &mut q,
                        low_digits,
                        base_index,
                        &mut best,
                    );
                    for &(j, c) in &applied {
                        add_scaled(&ctx, &mut q, &mono_tables[j], ctx.neg(c));
                    }
                }
                best
            },
            merge_best_f64,
        )
        .flatten()
        .map(|(v, idx)| (v.sqrt() / ctx.num_points() as f64, idx))
    };

    let (best_value, best_index) = best.ok_or_else(|| Error::Domain("empty search".into()))?;
    let witness = poly_from_index(ctx, &monos, best_index);
    // Independent recomputation of the winner.
    let check = correlate_with(p_table, &witness, budget)?.abs();
    debug_assert!(
        (check - best_value).abs() <= 1e-12,
        "witness replay {check} vs search {best_value}"
    );
    Ok(WeakNormResult {
        d_plus_1: order,
        best_value,
        witness,
        search_size,
    })
}

fn mono_table(ctx: PrimeFieldCtx, exps: &[u8], budget: &Budget) -> PhaseTable {
    let mut poly = Poly::zero(ctx);
    poly.add_term(&exps.iter().map(|&e| e as u64).collect::<Vec<u64>>(), 1);
    poly.truth_table(budget.table_cap).expect("cap-checked")
}

fn merge_best_i128(a: Option<(i128, u128)>, b: Option<(i128, u128)>) -> Option<(i128, u128)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some((va, ia)), Some((vb, ib))) => {
            let (aa, ab) = (va.unsigned_abs(), vb.unsigned_abs());
            if ab > aa || (ab == aa && ib < ia) {
                Some((vb, ib))
            } else {
                Some((va, ia))
            }
        }
    }
}

fn merge_best_f64(a: Option<(f64, u128)>, b: Option<(f64, u128)>) -> Option<(f64, u128)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some((va, ia)), Some((vb, ib))) => {
            if vb > va || (vb == va && ib < ia) {
                Some((vb, ib))
            } else {
                Some((va, ia))
            }
        }
    }
}

fn dfs_p2(
    f_bits: &BitTable,
    mono_bits: &[BitTable],
    q: &mut BitTable,
    digit: usize,
    index: u128,
    best: &mut Option<(i128, u128)>,
) {
    if digit == 0 {
        let corr = f_bits.correlation_int(q);
        let replace = match *best {
            None => true,
            Some((v, i)) => {
                corr.unsigned_abs() > v.unsigned_abs()
                    || (corr.unsigned_abs() == v.unsigned_abs() && index < i)
            }
        };
        if replace {
            *best = Some((corr, index));
        }
        return;
    }
    let j = digit - 1;
    dfs_p2(f_bits, mono_bits, q, j, index, best);
    q.xor_with(&mono_bits[j]);
    dfs_p2(f_bits, mono_bits, q, j, index + (1u128 << j), best);
    q.xor_with(&mono_bits[j]);
}

fn add_scaled(ctx: &PrimeFieldCtx, q: &mut [u8], mono: &[u8], c: u8) {
    for (qv, &mv) in q.iter_mut().zip(mono) {
        *qv = ctx.add(*qv, ctx.mul(c, mv));
    }
}

#[allow(clippy::too_many_arguments)]
fn dfs_general(
    ctx: &PrimeFieldCtx,
    f_vals: &[u8],
    mono_tables: &[Vec<u8>],
    cos: &[f64],
    sin: &[f64],
    q: &mut Vec<u8>,
    digit: usize,
    index: u128,
    best: &mut Option<(f64, u128)>,
) {
    if digit == 0 {
        // |sum_x e(P(x) - Q(x))|^2 from the exact diff histogram.
        let mut hist = vec![0u64; ctx.p() as usize];
        for (&pv, &qv) in f_vals.iter().zip(q.iter()) {
            hist[ctx.sub(pv, qv) as usize] += 1;
        }
        let (mut re, mut im) = (0.0, 0.0);
        for (t, &c) in hist.iter().enumerate() {
            re += c as f64 * cos[t];
            im += c as f64 * sin[t];
        }
        let mag2 = re * re + im * im;
        let replace = match *best {
            None => true,
            Some((v, i)) => mag2 > v || (mag2 == v && index < i),
        };
        if replace {
            *best = Some((mag2, index));
        }
        return;
    }
    let j = digit - 1;
    let step = checked_pow(ctx.p(), j as u128).unwrap();
    for c in 0..ctx.p() as u8 {
        if c != 0 {
            add_scaled(ctx, q, &mono_tables[j], 1);
        }
        dfs_general(
            ctx,
            f_vals,
            mono_tables,
            cos,
            sin,
            q,
            j,
            index + c as u128 * step,
            best,
        );
    }
    // Remove the p-1 accumulated additions.
    add_scaled(ctx, q, &mono_tables[j], 1);
}

/// Rebuilds the polynomial with canonical coefficient index `index`.
fn poly_from_index(ctx: PrimeFieldCtx, monos: &[Vec<u8>], mut index: u128) -> Poly {
    let mut poly = Poly::zero(ctx);
    for m in monos {
        let c = (index % ctx.p() as u128) as u64;
        index /= ctx.p() as u128;
        if c != 0 {
            poly.add_term(&m.iter().map(|&e| e as u64).collect::<Vec<u64>>(), c);
        }
    }
    poly
}

/// Canonical coefficient index of a polynomial of degree <= d: position of
/// its coefficient vector in the search enumeration.
pub fn canonical_index(poly: &Poly, d: usize) -> Option<u128> {
    let ctx = poly.ctx();
    let monos = monomials_up_to(ctx, d);
    let mut index: u128 = 0;
    let mut step: u128 = 1;
    let mut seen = 0usize;
    for m in &monos {
        if let Some(&c) = poly.terms().get(m) {
            index += c as u128 * step;
            seen += 1;
        }
        step *= ctx.p() as u128;
    }
    if seen == poly.terms().len() {
        Some(index)
    } else {
        None
    }
}

/// Both sides of the inverse-theorem probe: the U norm (exact) and the weak
/// norm (exhaustive) of e_F(P).
pub fn inverse_probe(
    poly: &Poly,
    order: usize,
    budget: &Budget,
) -> Result<(GowersResult, WeakNormResult)> {
    let u = gowers_norm_exact(poly, order, budget)?;
    let table = poly.truth_table(budget.table_cap)?;
    let w = weak_norm_exhaustive(&table, order, budget)?;
    Ok((u, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::symmetric_poly;

    fn ctx(p: u32, n: usize) -> PrimeFieldCtx {
        PrimeFieldCtx::new(p, n).unwrap()
    }

    fn budget() -> Budget {
        Budget::default()
    }

    #[test]
    fn bias_examples() {
        // S_2 on F_2^2: values (0,0,0,1) -> (3-1)/4.
        let c = ctx(2, 2);
        let s2 = symmetric_poly(c, 2).unwrap();
        let b = bias(&s2, &budget()).unwrap();
        assert_eq!(b.value.re, 0.5);
        assert_eq!(b.value.im, 0.0);
        assert_eq!(b.counts, vec![3, 1]);

        // Full character sum vanishes.
        let c5 = ctx(5, 1);
        let x1 = Poly::parse("x1", c5).unwrap();
        assert!(bias(&x1, &budget()).unwrap().magnitude < 1e-12);

        // Quadratic Gauss sum over F_3: 1 + 2 e(1), magnitude sqrt(3)/3.
        let c3 = ctx(3, 1);
        let sq = Poly::parse("x1^2", c3).unwrap();
        let b = bias(&sq, &budget()).unwrap();
        assert!((b.magnitude - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn exact_norm_of_low_degree_phase_is_one() {
        for &(p, n, order) in &[(2u32, 3usize, 2usize), (3, 2, 3), (2, 4, 4)] {
            let c = ctx(p, n);
            let mut rng = crate::rng::CounterRng::new(order as u64);
            let q = crate::testutil::random_poly(&c, order - 1, &mut rng);
            let r = gowers_norm_exact(&q, order, &budget()).unwrap();
            assert!(
                (r.power_mean - 1.0).abs() < 1e-12,
                "p={p} n={n} order={order} pm={}",
                r.power_mean
            );
            assert_eq!(r.norm, 1.0);
        }
    }

    #[test]
    fn exact_s4_power_mean_n4_golden() {
        // Independent oracle: all 2^16 shift quadruples of the three-term
        // bilinear product, B from popcounts.
        let b2 = |a: u64, b: u64| -> u64 {
            ((a.count_ones() * b.count_ones()) as u64 + (a & b).count_ones() as u64) & 1
        };
        let mut acc: i64 = 0;
        for a in 0..16u64 {
            for b in 0..16u64 {
                for c in 0..16u64 {
                    for d in 0..16u64 {
                        let v = (b2(a, b) & b2(c, d)) ^ (b2(a, c) & b2(b, d)) ^ (b2(a, d) & b2(b, c));
                        acc += 1 - 2 * v as i64;
                    }
                }
            }
        }
        assert_eq!(acc, 25216, "frozen oracle value");
        let c4 = ctx(2, 4);
        let s4 = symmetric_poly(c4, 4).unwrap();
        let r = gowers_norm_exact(&s4, 4, &budget()).unwrap();
        assert_eq!(r.power_mean, 25216.0 / 65536.0);
    }

    #[test]
    fn u1_of_mean_zero_phase_is_zero() {
        let c = ctx(2, 1);
        let x1 = Poly::parse("x1", c).unwrap();
        let r = gowers_norm_exact(&x1, 1, &budget()).unwrap();
        assert_eq!(r.power_mean, 0.0);
        assert_eq!(r.norm, 0.0);
        // Odd characteristic goes through the cyclotomic accumulator.
        let c3 = ctx(3, 1);
        let y = Poly::parse("x1", c3).unwrap();
        let r = gowers_norm_exact(&y, 1, &budget()).unwrap();
        assert!(r.power_mean.abs() < 1e-12);
    }

    /// Direct nested-loop power mean over all (x, h_1..h_m) tuples.
    fn nested_loop_power_mean(poly: &Poly, order: usize) -> f64 {
        let c = poly.ctx();
        let n = c.num_points() as u64;
        let mut cs = CycloSum::new(c.p());
        let mut tuple = vec![0u64; order + 1];
        loop {
            let x = c.unrank(tuple[0] as u128);
            let hs: Vec<crate::field::Point> =
                tuple[1..].iter().map(|&r| c.unrank(r as u128)).collect();
            let mut acc = 0u8;
            for omega in 0..(1u32 << order) {
                let v = crate::field::cube_vertex(&c, &x, &hs, omega).unwrap();
                let value = poly.evaluate(&v).unwrap();
                let sign_positive = (order as u32 - omega.count_ones()) % 2 == 0;
                acc = if sign_positive {
                    c.add(acc, value)
                } else {
                    c.sub(acc, value)
                };
            }
            cs.add_term(acc);
            let mut i = 0;
            loop {
                if i == tuple.len() {
                    let total = cs.total_mass() as f64;
                    return cs.value().re / total;
                }
                tuple[i] += 1;
                if tuple[i] < n {
                    break;
                }
                tuple[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn recursion_matches_nested_loop_on_tiny_instances() {
        let mut rng = crate::rng::CounterRng::new(8);
        for &(p, n, order) in &[(2u32, 2usize, 2usize), (2, 3, 2), (2, 2, 3), (3, 1, 2)] {
            let c = ctx(p, n);
            for _ in 0..5 {
                let poly = crate::testutil::random_poly(&c, 2, &mut rng);
                let direct = nested_loop_power_mean(&poly, order);
                let rec = gowers_norm_exact(&poly, order, &budget()).unwrap();
                assert!(
                    (direct - rec.power_mean).abs() < 1e-10,
                    "p={p} n={n} order={order}: {direct} vs {}",
                    rec.power_mean
                );
            }
        }
    }

    #[test]
    fn exact_power_mean_is_nonnegative_real() {
        let mut rng = crate::rng::CounterRng::new(21);
        for &(p, n, order) in &[(2u32, 4usize, 3usize), (3, 2, 2), (5, 1, 2)] {
            let c = ctx(p, n);
            for _ in 0..10 {
                let poly = crate::testutil::random_poly(&c, 3, &mut rng);
                let r = gowers_norm_exact(&poly, order, &budget()).unwrap();
                assert!(r.power_mean >= -1e-15, "{}", r.power_mean);
            }
        }
    }

    #[test]
    fn exact_cap_advises_monte_carlo() {
        let c = ctx(2, 24);
        let s4 = symmetric_poly(c, 4).unwrap();
        match gowers_norm_exact(&s4, 4, &budget()) {
            Err(Error::Resource { what, .. }) => assert!(what.contains("monte_carlo")),
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn mc_deterministic_and_exact_on_low_degree() {
        let c = ctx(2, 6);
        let mut rng = crate::rng::CounterRng::new(2);
        let q = crate::testutil::random_poly(&c, 2, &mut rng);
        let a = gowers_norm_mc(&q, 3, 2000, 77, &budget()).unwrap();
        let b = gowers_norm_mc(&q, 3, 2000, 77, &budget()).unwrap();
        assert_eq!(a.power_mean.to_bits(), b.power_mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        // Low-degree phase: every sample is 1.
        assert_eq!(a.power_mean, 1.0);
        assert_eq!(a.stderr, 0.0);
    }

    #[test]
    fn mc_matches_exact_within_four_sigma() {
        let mut rng = crate::rng::CounterRng::new(13);
        for &(p, n, order) in &[(2u32, 5usize, 3usize), (2, 6, 4), (3, 2, 2)] {
            let c = ctx(p, n);
            for trial in 0..3 {
                let poly = crate::testutil::random_poly(&c, order, &mut rng);
                let exact = gowers_norm_exact(&poly, order, &budget()).unwrap();
                let mc = gowers_norm_mc(&poly, order, 100_000, 1000 + trial, &budget()).unwrap();
                let tol = 4.0 * mc.stderr + 1e-9;
                assert!(
                    (mc.power_mean - exact.power_mean).abs() <= tol,
                    "p={p} n={n} order={order}: mc={} exact={} stderr={}",
                    mc.power_mean,
                    exact.power_mean,
                    mc.stderr
                );
                assert!(mc.imag_mean.abs() <= 4.0 * mc.stderr + 1e-9);
            }
        }
    }

    #[test]
    fn weak_norm_recovers_low_degree_phase() {
        let c = ctx(2, 4);
        let q0 = Poly::parse("x1*x2 + x3", c).unwrap();
        let t = q0.truth_table(1 << 28).unwrap();
        let r = weak_norm_exhaustive(&t, 3, &budget()).unwrap();
        assert_eq!(r.best_value, 1.0);
        assert_eq!(r.witness, q0);
        // 11 monomials of degree <= 2 on F_2^4.
        assert_eq!(r.search_size, 1 << 11);
    }

    #[test]
    fn weak_norm_s3_at_least_quarter() {
        let c = ctx(2, 4);
        let s3 = symmetric_poly(c, 3).unwrap();
        let t = s3.truth_table(1 << 28).unwrap();
        let r = weak_norm_exhaustive(&t, 3, &budget()).unwrap();
        assert!(r.best_value >= 0.25 - 1e-12, "{}", r.best_value);
    }

    #[test]
    fn weak_norm_general_p_recovers_phase() {
        let c = ctx(3, 2);
        let q0 = Poly::parse("x1*x2 + 2*x2", c).unwrap();
        let t = q0.truth_table(1 << 28).unwrap();
        let r = weak_norm_exhaustive(&t, 3, &budget()).unwrap();
        assert!((r.best_value - 1.0).abs() < 1e-9);
        assert_eq!(r.witness, q0);
    }

    #[test]
    fn weak_norm_ties_break_to_smallest_index() {
        // f the zero phase: every Q with |E e(-Q)| = 1 ties; the zero
        // polynomial has index 0 and must win.
        let c = ctx(2, 3);
        let zero = Poly::zero(c);
        let t = zero.truth_table(1 << 28).unwrap();
        let r = weak_norm_exhaustive(&t, 2, &budget()).unwrap();
        assert_eq!(r.best_value, 1.0);
        assert!(r.witness.is_zero());
    }

    #[test]
    fn weak_norm_witness_has_minimal_canonical_index() {
        // Independent rescan: among all maximizers, the returned witness
        // must carry the smallest canonical coefficient index.
        let c = ctx(2, 3);
        let s2 = symmetric_poly(c, 2).unwrap();
        let t = s2.truth_table(1 << 28).unwrap();
        let r = weak_norm_exhaustive(&t, 2, &budget()).unwrap();
        let monos = monomials_up_to(c, 1);
        let mut best_abs = -1i64;
        let mut min_index = u128::MAX;
        for idx in 0..(1u128 << monos.len()) {
            let q = super::poly_from_index(c, &monos, idx);
            let corr = correlate_with(&t, &q, &budget()).unwrap();
            let scaled = (corr.re * 8.0).round() as i64;
            if scaled.abs() > best_abs {
                best_abs = scaled.abs();
                min_index = idx;
            }
        }
        assert_eq!(canonical_index(&r.witness, 1), Some(min_index));
        assert!((r.best_value - best_abs as f64 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn weak_norm_search_is_thread_count_invariant() {
        let c = ctx(2, 4);
        let s4 = symmetric_poly(c, 4).unwrap();
        let t = s4.truth_table(1 << 28).unwrap();
        let mut results = Vec::new();
        for threads in [1usize, 2, 8] {
            let b = Budget {
                threads,
                ..Budget::default()
            };
            let r = weak_norm_exhaustive(&t, 4, &b).unwrap();
            results.push((r.best_value.to_bits(), r.witness.to_string()));
        }
        assert_eq!(results[0], results[1]);
        assert_eq!(results[0], results[2]);
    }

    #[test]
    fn correlate_examples() {
        let c = ctx(2, 2);
        let p = Poly::parse("x1*x2", c).unwrap();
        let t = p.truth_table(1 << 28).unwrap();
        // With itself: exactly 1.
        let z = correlate_with(&t, &p, &budget()).unwrap();
        assert_eq!(z.re, 1.0);
        // With zero: the bias 1/2.
        let z = correlate_with(&t, &Poly::zero(c), &budget()).unwrap();
        assert_eq!(z.re, 0.5);
    }

    #[test]
    fn phase_invariance_of_both_norms() {
        // Multiplying f by a degree <= d phase changes neither power mean
        // nor weak norm (exact equality of the integer accumulators).
        let mut rng = crate::rng::CounterRng::new(31);
        for &(p, n, order) in &[(2u32, 4usize, 3usize), (3, 2, 2)] {
            let c = ctx(p, n);
            for _ in 0..5 {
                let poly = crate::testutil::random_poly(&c, order, &mut rng);
                let g = crate::testutil::random_poly(&c, order - 1, &mut rng);
                let sum = poly.add(&g).unwrap();
                let a = gowers_norm_exact(&poly, order, &budget()).unwrap();
                let b = gowers_norm_exact(&sum, order, &budget()).unwrap();
                assert_eq!(a.exact, b.exact, "power mean changed under phase shift");
                let ta = poly.truth_table(1 << 28).unwrap();
                let tb = sum.truth_table(1 << 28).unwrap();
                let wa = weak_norm_exhaustive(&ta, order, &budget()).unwrap();
                let wb = weak_norm_exhaustive(&tb, order, &budget()).unwrap();
                assert!((wa.best_value - wb.best_value).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_probe_u_dominates_weak() {
        let mut rng = crate::rng::CounterRng::new(41);
        for &(p, n, order) in &[(2u32, 3usize, 2usize), (2, 4, 3), (3, 2, 2)] {
            let c = ctx(p, n);
            for _ in 0..5 {
                let poly = crate::testutil::random_poly(&c, order, &mut rng);
                let (u, w) = inverse_probe(&poly, order, &budget()).unwrap();
                assert!(
                    w.best_value <= u.norm + 1e-9,
                    "u={} > U={}",
                    w.best_value,
                    u.norm
                );
            }
        }
    }
}
