//! Multivariate polynomials over F_p^n: construction, evaluation, degree,
//! derivatives, symmetric polynomials, and dense truth tables.
//!
//! Exponents are reduced by x^p = x at insertion, so every stored exponent is
//! strictly below p and representations of equal functions are identical.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::field::{CycloSum, Point, PrimeFieldCtx};

/// Sparse monomial map with per-variable exponents below p and no stored
/// zero coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly {
    ctx: PrimeFieldCtx,
    terms: BTreeMap<Vec<u8>, u8>,
}

/// Reduce an exponent by the functional identity x^p = x.
#[inline]
fn reduce_exp(e: u64, p: u32) -> u8 {
    if e == 0 {
        0
    } else {
        (((e - 1) % (p as u64 - 1)) + 1) as u8
    }
}

impl Poly {
    pub fn zero(ctx: PrimeFieldCtx) -> Self {
        Self {
            ctx,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(ctx: PrimeFieldCtx, c: u8) -> Self {
        let mut poly = Self::zero(ctx);
        poly.add_term(&vec![0u64; ctx.n()], c as u64);
        poly
    }

    /// The coordinate function x_{i+1} (0-based index).
    pub fn variable(ctx: PrimeFieldCtx, i: usize) -> Self {
        let mut exps = vec![0u64; ctx.n()];
        exps[i] = 1;
        let mut poly = Self::zero(ctx);
        poly.add_term(&exps, 1);
        poly
    }

    pub fn ctx(&self) -> PrimeFieldCtx {
        self.ctx
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u8>, u8> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Max total degree of a term; -1 for the zero polynomial.
    pub fn degree(&self) -> i32 {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&x| x as i32).sum())
            .max()
            .unwrap_or(-1)
    }

    /// Adds `coeff * x^exps` with exponent and coefficient reduction.
    pub fn add_term(&mut self, exps: &[u64], coeff: u64) {
        let p = self.ctx.p();
        let c = (coeff % p as u64) as u8;
        if c == 0 {
            return;
        }
        let key: Vec<u8> = exps.iter().map(|&e| reduce_exp(e, p)).collect();
        let entry = self.terms.entry(key).or_insert(0);
        *entry = self.ctx.add(*entry, c);
        if *entry == 0 {
            let key: Vec<u8> = exps.iter().map(|&e| reduce_exp(e, p)).collect();
            self.terms.remove(&key);
        }
    }

    fn add_reduced_term(&mut self, key: Vec<u8>, c: u8) {
        if c == 0 {
            return;
        }
        let entry = self.terms.entry(key.clone()).or_insert(0);
        *entry = self.ctx.add(*entry, c);
        if *entry == 0 {
            self.terms.remove(&key);
        }
    }

    pub fn add(&self, other: &Poly) -> Result<Poly> {
        self.check_ctx(other)?;
        let mut out = self.clone();
        for (k, &c) in &other.terms {
            out.add_reduced_term(k.clone(), c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Poly) -> Result<Poly> {
        self.check_ctx(other)?;
        let mut out = self.clone();
        for (k, &c) in &other.terms {
            out.add_reduced_term(k.clone(), self.ctx.neg(c));
        }
        Ok(out)
    }

    pub fn scale(&self, c: u8) -> Poly {
        let mut out = Poly::zero(self.ctx);
        for (k, &a) in &self.terms {
            out.add_reduced_term(k.clone(), self.ctx.mul(a, c));
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Result<Poly> {
        self.check_ctx(other)?;
        let mut out = Poly::zero(self.ctx);
        for (ka, &ca) in &self.terms {
            for (kb, &cb) in &other.terms {
                let exps: Vec<u64> = ka
                    .iter()
                    .zip(kb)
                    .map(|(&a, &b)| a as u64 + b as u64)
                    .collect();
                out.add_term(&exps, ca as u64 * cb as u64);
            }
        }
        Ok(out)
    }

    fn check_ctx(&self, other: &Poly) -> Result<()> {
        if self.ctx != other.ctx {
            return Err(Error::CtxMismatch(format!(
                "p={},n={} vs p={},n={}",
                self.ctx.p(),
                self.ctx.n(),
                other.ctx.p(),
                other.ctx.n()
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &Point) -> Result<u8> {
        if x.dim() != self.ctx.n() {
            return Err(Error::CtxMismatch("point dimension mismatch".into()));
        }
        Ok(self.evaluate_coords(x.coords()))
    }

    pub fn evaluate_coords(&self, coords: &[u8]) -> u8 {
        let f = &self.ctx;
        let mut acc = 0u8;
        'terms: for (exps, &c) in &self.terms {
            let mut v = c;
            for (i, &e) in exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if coords[i] == 0 {
                    continue 'terms;
                }
                v = f.mul(v, f.pow(coords[i], e as u32));
            }
            acc = f.add(acc, v);
        }
        acc
    }

    /// Additive derivative D_h P(x) = P(x+h) - P(x), symbolically via
    /// binomial expansion of (x_i + h_i)^{e_i} followed by reduction.
    pub fn additive_derivative(&self, h: &Point) -> Result<Poly> {
        if h.dim() != self.ctx.n() {
            return Err(Error::CtxMismatch("shift dimension mismatch".into()));
        }
        let f = &self.ctx;
        let pascal = pascal_mod(f.p());
        let mut out = Poly::zero(self.ctx);
        for (exps, &c) in &self.terms {
            // Expand coeff * prod_i (x_i + h_i)^{e_i}; variables with h_i = 0
            // pass through unchanged.
            let mut partial: Vec<(Vec<u8>, u8)> = vec![(vec![0u8; f.n()], c)];
            for (i, &e) in exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let hi = h.coords()[i];
                if hi == 0 {
                    for (k, _) in partial.iter_mut() {
                        k[i] = e;
                    }
                    continue;
                }
                let mut next = Vec::with_capacity(partial.len() * (e as usize + 1));
                for (k, coeff) in &partial {
                    for j in 0..=e {
                        let binom = pascal[e as usize][j as usize];
                        if binom == 0 {
                            continue;
                        }
                        let scale = f.mul(binom, f.pow(hi, (e - j) as u32));
                        let cc = f.mul(*coeff, scale);
                        if cc == 0 {
                            continue;
                        }
                        let mut k2 = k.clone();
                        k2[i] = j;
                        next.push((k2, cc));
                    }
                }
                partial = next;
            }
            for (k, cc) in partial {
                out.add_reduced_term(k, cc);
            }
            // Subtract the original term.
            out.add_reduced_term(exps.clone(), f.neg(c));
        }
        Ok(out)
    }

    /// Left fold of [`additive_derivative`](Self::additive_derivative) over
    /// the shifts; the result does not depend on their order.
    pub fn iterated_derivative(&self, hs: &[Point]) -> Result<Poly> {
        let mut acc = self.clone();
        for h in hs {
            acc = acc.additive_derivative(h)?;
        }
        Ok(acc)
    }

    /// When the polynomial is a combination of elementary symmetric
    /// polynomials (every degree class complete with one coefficient),
    /// returns the coefficients per degree.
    pub fn symmetric_decomposition(&self) -> Option<Vec<u8>> {
        let n = self.ctx.n();
        let deg = self.degree();
        if deg < 0 {
            return Some(vec![]);
        }
        let mut by_degree: Vec<(u64, Option<u8>)> = vec![(0, None); deg as usize + 1];
        for (exps, &c) in &self.terms {
            if exps.iter().any(|&e| e > 1) {
                return None;
            }
            let d: usize = exps.iter().map(|&e| e as usize).sum();
            let slot = &mut by_degree[d];
            slot.0 += 1;
            match slot.1 {
                None => slot.1 = Some(c),
                Some(prev) if prev == c => {}
                Some(_) => return None,
            }
        }
        let mut coeffs = vec![0u8; deg as usize + 1];
        for (d, &(count, coeff)) in by_degree.iter().enumerate() {
            match coeff {
                None => {}
                Some(c) => {
                    if count != binomial_u64(n as u64, d as u64)? {
                        return None;
                    }
                    coeffs[d] = c;
                }
            }
        }
        Some(coeffs)
    }

    /// Dense evaluation over all p^n points, indexed by rank.
    ///
    /// `max_entries` is the memory budget; exceeding it is a resource error,
    /// never a truncated answer. Combinations of symmetric polynomials over
    /// F_2 take an O(n + 2^n) path through Lucas' theorem on |x|; it produces
    /// output identical to the generic path.
    pub fn truth_table(&self, max_entries: u128) -> Result<PhaseTable> {
        let npoints = self.ctx.num_points();
        if npoints > max_entries {
            return Err(Error::Resource {
                what: format!("truth table over F_{}^{}", self.ctx.p(), self.ctx.n()),
                needed: npoints,
                cap: max_entries,
            });
        }
        let size = self.ctx.num_points_usize()?;
        if self.ctx.p() == 2 {
            if let Some(coeffs) = self.symmetric_decomposition() {
                let n = self.ctx.n();
                // f(w) = sum_d c_d * binom(w, d) mod 2; binom(w,d) is odd iff
                // the bits of d are contained in the bits of w.
                let by_weight: Vec<u8> = (0..=n)
                    .map(|w| {
                        coeffs
                            .iter()
                            .enumerate()
                            .filter(|&(d, &c)| c == 1 && (w & d) == d)
                            .count() as u8
                            & 1
                    })
                    .collect();
                let values = (0..size)
                    .map(|x| by_weight[x.count_ones() as usize])
                    .collect();
                return Ok(PhaseTable {
                    ctx: self.ctx,
                    values,
                });
            }
        }
        let mut values = vec![0u8; size];
        let mut coords = vec![0u8; self.ctx.n()];
        for v in values.iter_mut() {
            *v = self.evaluate_coords(&coords);
            increment_coords(&mut coords, self.ctx.p());
        }
        Ok(PhaseTable {
            ctx: self.ctx,
            values,
        })
    }

    /// Grammar: terms joined by '+'; a term is an optional decimal
    /// coefficient and '*'-separated variables `x<i>` with optional `^<e>`;
    /// whitespace insignificant. Example: `2*x1^2*x3 + x2 + 1`.
    pub fn parse(text: &str, ctx: PrimeFieldCtx) -> Result<Poly> {
        Parser {
            bytes: text.as_bytes(),
            pos: 0,
            ctx,
        }
        .parse()
    }
}

fn increment_coords(coords: &mut [u8], p: u32) {
    for c in coords.iter_mut() {
        *c += 1;
        if (*c as u32) < p {
            return;
        }
        *c = 0;
    }
}

/// Pascal's triangle mod p up to row p-1 (exponents are below p).
fn pascal_mod(p: u32) -> Vec<Vec<u8>> {
    let rows = p as usize;
    let mut t = vec![vec![0u8; rows]; rows];
    for e in 0..rows {
        t[e][0] = 1;
        for j in 1..=e {
            let a = t[e - 1][j - 1] as u32;
            let b = if j < e { t[e - 1][j] as u32 } else { 0 };
            t[e][j] = ((a + b) % p) as u8;
        }
    }
    t
}

fn binomial_u64(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// The elementary symmetric polynomial S_d: all C(n, d) squarefree degree-d
/// monomials with coefficient 1. Errors when d > n; use
/// [`symmetric_poly_allow_zero`] to get S_d = 0 explicitly.
pub fn symmetric_poly(ctx: PrimeFieldCtx, d: usize) -> Result<Poly> {
    if d > ctx.n() {
        return Err(Error::Domain(format!(
            "S_{d} on {} variables is identically zero; pass allow_zero to get it",
            ctx.n()
        )));
    }
    Ok(symmetric_poly_allow_zero(ctx, d))
}

pub fn symmetric_poly_allow_zero(ctx: PrimeFieldCtx, d: usize) -> Poly {
    let mut poly = Poly::zero(ctx);
    if d > ctx.n() {
        return poly;
    }
    if d == 0 {
        return Poly::constant(ctx, 1);
    }
    // Iterate d-subsets of {0, ..., n-1} in lexicographic order.
    let n = ctx.n();
    let mut subset: Vec<usize> = (0..d).collect();
    loop {
        let key: Vec<u8> = {
            let mut k = vec![0u8; n];
            for &i in &subset {
                k[i] = 1;
            }
            k
        };
        poly.add_reduced_term(key, 1);
        // Next subset.
        let mut i = d;
        loop {
            if i == 0 {
                return poly;
            }
            i -= 1;
            if subset[i] != i + n - d {
                break;
            }
        }
        subset[i] += 1;
        for j in i + 1..d {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    ctx: PrimeFieldCtx,
}

impl<'a> Parser<'a> {
    fn parse(mut self) -> Result<Poly> {
        let mut poly = Poly::zero(self.ctx);
        loop {
            self.skip_ws();
            let (exps, coeff) = self.term()?;
            poly.add_term(&exps, coeff);
            self.skip_ws();
            match self.peek() {
                None => return Ok(poly),
                Some(b'+') => {
                    self.pos += 1;
                }
                Some(c) => {
                    return Err(Error::Parse {
                        pos: self.pos,
                        msg: format!("expected '+' or end of input, found {:?}", c as char),
                    })
                }
            }
        }
    }

    fn term(&mut self) -> Result<(Vec<u64>, u64)> {
        let mut exps = vec![0u64; self.ctx.n()];
        let mut coeff: u64 = 1;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'0'..=b'9') => {
                    let c = self.number()?;
                    coeff = (coeff as u128 * c as u128 % self.ctx.p() as u128) as u64;
                }
                Some(b'x') => {
                    self.pos += 1;
                    let start = self.pos;
                    let idx = self.number()? as usize;
                    if idx == 0 || idx > self.ctx.n() {
                        return Err(Error::Parse {
                            pos: start,
                            msg: format!(
                                "variable index {idx} out of range 1..={}",
                                self.ctx.n()
                            ),
                        });
                    }
                    let mut e: u64 = 1;
                    self.skip_ws();
                    if self.peek() == Some(b'^') {
                        self.pos += 1;
                        self.skip_ws();
                        e = self.number()?;
                    }
                    exps[idx - 1] = exps[idx - 1].saturating_add(e);
                }
                other => {
                    return Err(Error::Parse {
                        pos: self.pos,
                        msg: match other {
                            Some(c) => format!("expected a factor, found {:?}", c as char),
                            None => "expected a factor, found end of input".into(),
                        },
                    })
                }
            }
            self.skip_ws();
            if self.peek() == Some(b'*') {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok((exps, coeff))
    }

    fn number(&mut self) -> Result<u64> {
        let start = self.pos;
        let mut v: u64 = 0;
        let mut any = false;
        while let Some(c @ b'0'..=b'9') = self.peek() {
            v = v
                .checked_mul(10)
                .and_then(|v| v.checked_add((c - b'0') as u64))
                .ok_or(Error::Parse {
                    pos: start,
                    msg: "number too large".into(),
                })?;
            self.pos += 1;
            any = true;
        }
        if !any {
            return Err(Error::Parse {
                pos: self.pos,
                msg: "expected a number".into(),
            });
        }
        Ok(v)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ') | Some(b'\t')) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }
}

impl fmt::Display for Poly {
    /// Canonical graded-lexicographic printing; the zero polynomial prints
    /// as "0".
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut keys: Vec<&Vec<u8>> = self.terms.keys().collect();
        keys.sort_by_key(|e| {
            (
                std::cmp::Reverse(e.iter().map(|&x| x as u32).sum::<u32>()),
                (*e).clone(),
            )
        });
        for (i, key) in keys.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            let c = self.terms[*key];
            let is_const = key.iter().all(|&e| e == 0);
            let mut wrote = false;
            if c != 1 || is_const {
                write!(f, "{c}")?;
                wrote = true;
            }
            for (v, &e) in key.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if wrote {
                    write!(f, "*")?;
                }
                write!(f, "x{}", v + 1)?;
                if e > 1 {
                    write!(f, "^{e}")?;
                }
                wrote = true;
            }
        }
        Ok(())
    }
}

/// Dense evaluation of an F_p-valued function over all p^n points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseTable {
    ctx: PrimeFieldCtx,
    values: Vec<u8>,
}

impl PhaseTable {
    pub fn from_values(ctx: PrimeFieldCtx, values: Vec<u8>) -> Result<Self> {
        if values.len() as u128 != ctx.num_points() {
            return Err(Error::Domain(format!(
                "table length {} != p^n = {}",
                values.len(),
                ctx.num_points()
            )));
        }
        Ok(Self { ctx, values })
    }

    pub fn ctx(&self) -> PrimeFieldCtx {
        self.ctx
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    #[inline]
    pub fn get_rank(&self, rank: usize) -> u8 {
        self.values[rank]
    }

    /// Histogram of values as a CycloSum; total mass p^n.
    pub fn histogram(&self) -> CycloSum {
        let mut cs = CycloSum::new(self.ctx.p());
        for &v in &self.values {
            cs.add_term(v);
        }
        cs
    }

    /// Table-based derivative: T'(x) = T(x+h) - T(x). Cross-checks the
    /// symbolic derivative.
    pub fn shift_subtract(&self, h: &Point) -> Result<PhaseTable> {
        if h.dim() != self.ctx.n() {
            return Err(Error::CtxMismatch("shift dimension mismatch".into()));
        }
        let f = &self.ctx;
        let size = self.values.len();
        let mut values = vec![0u8; size];
        let mut coords = vec![0u8; f.n()];
        for (x, v) in values.iter_mut().enumerate() {
            let shifted: Vec<u8> = coords
                .iter()
                .zip(h.coords())
                .map(|(&a, &b)| f.add(a, b))
                .collect();
            let xr = f.rank(&shifted) as usize;
            *v = f.sub(self.values[xr], self.values[x]);
            increment_coords(&mut coords, f.p());
        }
        Ok(PhaseTable { ctx: self.ctx, values })
    }

    /// Packs an F_2 table into machine words.
    pub fn to_bits(&self) -> Result<crate::bits::BitTable> {
        if self.ctx.p() != 2 {
            return Err(Error::Domain("bit packing requires p = 2".into()));
        }
        Ok(crate::bits::BitTable::from_bits(self.ctx.n(), |x| {
            self.values[x] == 1
        }))
    }
}

/// Multilinear coefficients of a function on the cube {0,1}^k over F_p,
/// by Möbius inversion over subsets, plus the re-evaluation check.
#[derive(Debug, Clone)]
pub struct MultilinearExtension {
    /// `coeffs[S]` multiplies the product of x_i over i in S.
    pub coeffs: Vec<u8>,
    /// Whether the interpolant reproduces the input at every vertex
    /// (always true; asserted by reconstruction).
    pub reproduces: bool,
}

/// Checks that the unique multilinear interpolant of `values` on {0,1}^k is
/// determined by (and reproduces) its cube values. In particular a function
/// vanishing on the cube has all 2^k coefficients zero.
pub fn multilinear_cube_extension_check(
    p: u32,
    k: usize,
    values: &[u8],
) -> Result<MultilinearExtension> {
    if k > 20 {
        return Err(Error::Resource {
            what: format!("multilinear extension on a {k}-cube"),
            needed: 1u128 << k,
            cap: 1 << 20,
        });
    }
    if values.len() != 1 << k {
        return Err(Error::Domain(format!(
            "cube table has {} entries, expected 2^{k}",
            values.len()
        )));
    }
    let f = PrimeFieldCtx::new(p, 1)?;
    // Subset Möbius transform: coeffs[S] = sum_{T subseteq S} (-1)^{|S|-|T|} Q(T).
    let mut coeffs: Vec<u8> = values.to_vec();
    for b in 0..k {
        for mask in 0..1usize << k {
            if mask >> b & 1 == 1 {
                coeffs[mask] = f.sub(coeffs[mask], coeffs[mask ^ (1 << b)]);
            }
        }
    }
    // Zeta transform re-evaluates the interpolant at every vertex.
    let mut evals = coeffs.clone();
    for b in 0..k {
        for mask in 0..1usize << k {
            if mask >> b & 1 == 1 {
                evals[mask] = f.add(evals[mask], evals[mask ^ (1 << b)]);
            }
        }
    }
    let reproduces = evals == values;
    Ok(MultilinearExtension { coeffs, reproduces })
}

/// Exponent vectors of all monomials of total degree <= d with per-variable
/// exponents < p, in the canonical order (degree, then exponent vector).
pub fn monomials_up_to(ctx: PrimeFieldCtx, d: usize) -> Vec<Vec<u8>> {
    let mut out: Vec<Vec<u8>> = Vec::new();
    let mut cur = vec![0u8; ctx.n()];
    'all: loop {
        let deg: usize = cur.iter().map(|&e| e as usize).sum();
        if deg <= d {
            out.push(cur.clone());
        }
        // Mixed-radix increment over exponents < p.
        let mut i = 0;
        loop {
            if i == cur.len() {
                break 'all;
            }
            cur[i] += 1;
            if (cur[i] as u32) < ctx.p() {
                break;
            }
            cur[i] = 0;
            i += 1;
        }
    }
    out.sort_by_key(|e| (e.iter().map(|&x| x as u32).sum::<u32>(), e.clone()));
    out
}
