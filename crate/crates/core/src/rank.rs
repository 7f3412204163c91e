//! Degree-d rank: exact quadratic reduction via bilinear linear algebra,
//! guarded brute-force rank for tiny instances, measurability testing, and
//! the quadratic bias/rank law.
//!
//! The degree-d rank of P is the least k such that P = B(Q_1, ..., Q_k) for
//! some Q_i of degree at most d and some function B. Measurability of P with
//! respect to (Q_1, ..., Q_k) is exactly fiber-constancy of P under
//! x -> (Q_1(x), ..., Q_k(x)).

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::field::PrimeFieldCtx;
use crate::gowers::Budget;
use crate::linalg::MatGF;
use crate::poly::{monomials_up_to, Poly};

/// Witnessed rank bound: P = B(Q_1, ..., Q_k) with the realizing lookup.
#[derive(Debug, Clone)]
pub struct RankCertificate {
    /// Degree bound of the witnesses.
    pub d: usize,
    /// Claimed rank value (number of witnesses).
    pub k: usize,
    /// Witnesses, each of degree <= d.
    pub witnesses: Vec<Poly>,
    /// Map from witness-value tuples to the value of P on that fiber.
    pub lookup: HashMap<Vec<u8>, u8>,
}

impl RankCertificate {
    /// Replays B(Q_1(x), ..., Q_k(x)) over all points and checks it
    /// reproduces P exactly.
    pub fn replay(&self, p: &Poly, budget: &Budget) -> Result<bool> {
        let table = p.truth_table(budget.table_cap)?;
        let wtabs: Vec<_> = self
            .witnesses
            .iter()
            .map(|w| w.truth_table(budget.table_cap))
            .collect::<Result<Vec<_>>>()?;
        for x in 0..table.values().len() {
            let key: Vec<u8> = wtabs.iter().map(|t| t.get_rank(x)).collect();
            match self.lookup.get(&key) {
                Some(&v) if v == table.get_rank(x) => {}
                _ => return Ok(false),
            }
        }
        Ok(true)
    }
}

/// Coefficient data of a polynomial of degree <= 2: P(x) = x^T A x + L.x + c,
/// with the rank of the associated symmetric/symplectic form.
#[derive(Debug, Clone)]
pub struct BilinearData {
    /// The matrix as read off the monomials (upper triangular for the cross
    /// terms; diagonal holds square coefficients, which only exist for odd
    /// p). For odd p the symmetrized form is (A + A^T)/2; for p = 2 the
    /// symplectic form is A + A^T.
    pub matrix: MatGF,
    pub linear: Vec<u8>,
    pub constant: u8,
    /// Rank of the symmetrized (p odd) or symplectic (p = 2) form.
    pub sym_rank: usize,
}

/// Reads the bilinear data off the monomials of a polynomial of degree <= 2.
pub fn quadratic_decompose(p: &Poly) -> Result<BilinearData> {
    if p.degree() > 2 {
        return Err(Error::Domain(format!(
            "quadratic_decompose needs degree <= 2, got {}",
            p.degree()
        )));
    }
    let ctx = p.ctx();
    let n = ctx.n();
    let mut a = MatGF::zeros(ctx.p(), n, n);
    let mut linear = vec![0u8; n];
    let mut constant = 0u8;
    for (exps, &c) in p.terms() {
        let support: Vec<usize> = (0..n).filter(|&i| exps[i] > 0).collect();
        match support.as_slice() {
            [] => constant = c,
            [i] if exps[*i] == 1 => linear[*i] = c,
            [i] if exps[*i] == 2 => a.set(*i, *i, c),
            [i, j] if exps[*i] == 1 && exps[*j] == 1 => a.set(*i, *j, c),
            _ => unreachable!("degree <= 2 reduced polynomial"),
        }
    }
    let sym = symmetrized_form(ctx, &a)?;
    let sym_rank = sym.rank();
    Ok(BilinearData {
        matrix: a,
        linear,
        constant,
        sym_rank,
    })
}

/// (A + A^T)/2 for odd p, A + A^T for p = 2.
fn symmetrized_form(ctx: PrimeFieldCtx, a: &MatGF) -> Result<MatGF> {
    let n = a.rows();
    let mut b = MatGF::zeros(ctx.p(), n, n);
    let half = if ctx.p() == 2 { 1 } else { ctx.inv(2)? };
    for i in 0..n {
        for j in 0..n {
            let s = ctx.add(a.get(i, j), a.get(j, i));
            b.set(i, j, if ctx.p() == 2 { s } else { ctx.mul(s, half) });
        }
    }
    Ok(b)
}

/// Quadratic Gauss law: the bias magnitude of a degree <= 2 phase is either
/// 0 or exactly p^(-sym_rank/2).
#[derive(Debug, Clone)]
pub struct GaussLawReport {
    pub bias_magnitude: f64,
    pub sym_rank: usize,
    pub consistent: bool,
}

pub fn gauss_law_check(p: &Poly, budget: &Budget) -> Result<GaussLawReport> {
    let data = quadratic_decompose(p)?;
    let bias = crate::gowers::bias(p, budget)?;
    let expected = (p.ctx().p() as f64).powf(-(data.sym_rank as f64) / 2.0);
    let consistent =
        bias.magnitude.abs() < 1e-9 || (bias.magnitude - expected).abs() < 1e-9;
    Ok(GaussLawReport {
        bias_magnitude: bias.magnitude,
        sym_rank: data.sym_rank,
        consistent,
    })
}

/// True iff P is constant on every nonempty fiber of x -> (Q_1(x), ...,
/// Q_k(x)); on success also returns the realizing lookup.
pub fn is_measurable(
    p: &Poly,
    qs: &[Poly],
    budget: &Budget,
) -> Result<Option<HashMap<Vec<u8>, u8>>> {
    let ctx = p.ctx();
    for q in qs {
        if q.ctx() != ctx {
            return Err(Error::CtxMismatch("is_measurable witness".into()));
        }
    }
    let ptab = p.truth_table(budget.table_cap)?;
    let qtabs: Vec<_> = qs
        .iter()
        .map(|q| q.truth_table(budget.table_cap))
        .collect::<Result<Vec<_>>>()?;
    let mut lookup: HashMap<Vec<u8>, u8> = HashMap::new();
    for x in 0..ptab.values().len() {
        let key: Vec<u8> = qtabs.iter().map(|t| t.get_rank(x)).collect();
        match lookup.entry(key) {
            std::collections::hash_map::Entry::Occupied(e) => {
                if *e.get() != ptab.get_rank(x) {
                    return Ok(None);
                }
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(ptab.get_rank(x));
            }
        }
    }
    Ok(Some(lookup))
}

/// Exhaustive degree-d rank for hard-guarded tiny instances: p = 2, n <= 3,
/// d <= 2. Witness tuples are enumerated in canonical order (strictly
/// increasing coefficient indices), so certificates are reproducible.
pub fn brute_rank(p: &Poly, d: usize, budget: &Budget) -> Result<RankCertificate> {
    let ctx = p.ctx();
    if ctx.p() != 2 || ctx.n() > 3 || d > 2 {
        return Err(Error::Intractable(format!(
            "brute_rank is guarded to p=2, n<=3, d<=2 (got p={}, n={}, d={d})",
            ctx.p(),
            ctx.n()
        )));
    }
    // k = 0: P is constant.
    if p.degree() <= 0 {
        let value = p.evaluate_coords(&vec![0u8; ctx.n()]);
        return Ok(RankCertificate {
            d,
            k: 0,
            witnesses: vec![],
            lookup: HashMap::from([(vec![], value)]),
        });
    }
    let monos = monomials_up_to(ctx, d);
    let candidates: u128 = (ctx.p() as u128).pow(monos.len() as u32);
    let polys: Vec<Poly> = (0..candidates)
        .map(|idx| {
            let mut q = Poly::zero(ctx);
            let mut rem = idx;
            for m in &monos {
                let c = (rem % ctx.p() as u128) as u64;
                rem /= ctx.p() as u128;
                if c != 0 {
                    q.add_term(&m.iter().map(|&e| e as u64).collect::<Vec<u64>>(), c);
                }
            }
            q
        })
        .collect();
    for k in 1..=monos.len() {
        let mut tuple: Vec<usize> = (0..k).collect();
        loop {
            let witnesses: Vec<Poly> = tuple.iter().map(|&i| polys[i].clone()).collect();
            if let Some(lookup) = is_measurable(p, &witnesses, budget)? {
                return Ok(RankCertificate {
                    d,
                    k,
                    witnesses,
                    lookup,
                });
            }
            // Next strictly increasing index tuple.
            let mut i = k;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if tuple[i] != polys.len() - k + i {
                    break;
                }
                if i == 0 {
                    i = k;
                    break;
                }
            }
            if i == k {
                break;
            }
            tuple[i] += 1;
            for j in i + 1..k {
                tuple[j] = tuple[j - 1] + 1;
            }
        }
    }
    Err(Error::Intractable(
        "no witness tuple found within the degree bound".into(),
    ))
}

/// Expresses a polynomial of degree <= 2 through sym_rank independent linear
/// forms plus an affine remainder, following the lower-triangular reduction:
/// returns witnesses W with P measurable in W and every W of degree <= 1.
///
/// For p = 2 the quadratic part is C(x,x) with C the lower triangle of the
/// symplectic form in reduced coordinates; for odd p the full symmetric form
/// is used. The affine remainder is appended as a final witness when it is
/// nonconstant.
pub fn quadratic_witnesses(p: &Poly) -> Result<Vec<Poly>> {
    let ctx = p.ctx();
    if p.degree() > 2 {
        return Err(Error::Domain("quadratic_witnesses needs degree <= 2".into()));
    }
    if p.degree() <= 1 {
        return Ok(if p.degree() == 1 { vec![p.clone()] } else { vec![] });
    }
    let data = quadratic_decompose(p)?;
    let sym = symmetrized_form(ctx, &data.matrix)?;
    // Row-reduce to get basis rows L_a with pivot columns j_a; representa-
    // tives u_a = e_{j_a} satisfy L_b(u_a) = delta_ab.
    let mut reduced = sym.clone();
    let pivots = reduced.rref();
    let k = pivots.len();
    let ls: Vec<Poly> = (0..k)
        .map(|a| {
            let mut l = Poly::zero(ctx);
            for j in 0..ctx.n() {
                let c = reduced.get(a, j);
                if c != 0 {
                    let mut exps = vec![0u64; ctx.n()];
                    exps[j] = 1;
                    l.add_term(&exps, c as u64);
                }
            }
            l
        })
        .collect();
    // K_ab = sym(u_a, u_b) evaluated at the pivot representatives.
    let mut quad_part = Poly::zero(ctx);
    if ctx.p() == 2 {
        // Lower triangle only; the full symmetric sum cancels mod 2.
        for a in 0..k {
            for b in (a + 1)..k {
                let coeff = sym.get(pivots[a], pivots[b]);
                if coeff != 0 {
                    quad_part = quad_part.add(&ls[a].mul(&ls[b])?.scale(coeff))?;
                }
            }
        }
    } else {
        for a in 0..k {
            for b in 0..k {
                let coeff = sym.get(pivots[a], pivots[b]);
                if coeff != 0 {
                    quad_part = quad_part.add(&ls[a].mul(&ls[b])?.scale(coeff))?;
                }
            }
        }
    }
    let remainder = p.sub(&quad_part)?;
    if remainder.degree() > 1 {
        return Err(Error::Domain(format!(
            "triangular reduction left degree {} remainder",
            remainder.degree()
        )));
    }
    let mut witnesses = ls;
    if remainder.degree() == 1 {
        witnesses.push(remainder);
    }
    Ok(witnesses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::symmetric_poly;
    use crate::rng::CounterRng;

    fn ctx(p: u32, n: usize) -> PrimeFieldCtx {
        PrimeFieldCtx::new(p, n).unwrap()
    }

    fn budget() -> Budget {
        Budget::default()
    }

    #[test]
    fn quadratic_decompose_examples() {
        let c = ctx(2, 2);
        let p = Poly::parse("x1*x2", c).unwrap();
        assert_eq!(quadratic_decompose(&p).unwrap().sym_rank, 2);

        let lin = Poly::parse("x1 + x2", c).unwrap();
        assert_eq!(quadratic_decompose(&lin).unwrap().sym_rank, 0);

        let c4 = ctx(2, 4);
        let q = Poly::parse("x1*x2 + x3*x4", c4).unwrap();
        assert_eq!(quadratic_decompose(&q).unwrap().sym_rank, 4);

        let cubic = Poly::parse("x1*x2*x3", ctx(2, 3)).unwrap();
        assert!(quadratic_decompose(&cubic).is_err());
    }

    #[test]
    fn decompose_reproduces_p_pointwise() {
        let mut rng = CounterRng::new(7);
        for &(p, n) in &[(2u32, 4usize), (3, 3), (5, 2)] {
            let c = ctx(p, n);
            for _ in 0..30 {
                let poly = crate::testutil::random_poly(&c, 2, &mut rng);
                let data = quadratic_decompose(&poly).unwrap();
                for x in c.enumerate_points() {
                    let xc = x.coords();
                    let mut v = data.constant;
                    for i in 0..n {
                        v = c.add(v, c.mul(data.linear[i], xc[i]));
                        for j in 0..n {
                            let prod = c.mul(c.mul(data.matrix.get(i, j), xc[i]), xc[j]);
                            v = c.add(v, prod);
                        }
                    }
                    assert_eq!(v, poly.evaluate(&x).unwrap(), "P={poly}");
                }
            }
        }
    }

    #[test]
    fn symplectic_rank_is_even_for_p2() {
        let mut rng = CounterRng::new(23);
        let c = ctx(2, 5);
        for _ in 0..50 {
            let poly = crate::testutil::random_poly(&c, 2, &mut rng);
            let data = quadratic_decompose(&poly).unwrap();
            assert_eq!(data.sym_rank % 2, 0);
            // Zero diagonal of A + A^T.
            let sym = super::symmetrized_form(c, &data.matrix).unwrap();
            for i in 0..5 {
                assert_eq!(sym.get(i, i), 0);
            }
        }
    }

    #[test]
    fn gauss_law_examples() {
        let c = ctx(2, 2);
        let r = gauss_law_check(&Poly::parse("x1*x2", c).unwrap(), &budget()).unwrap();
        assert_eq!((r.bias_magnitude, r.sym_rank, r.consistent), (0.5, 2, true));

        let r = gauss_law_check(&Poly::parse("x1*x2 + x1", c).unwrap(), &budget()).unwrap();
        assert_eq!((r.bias_magnitude, r.sym_rank, r.consistent), (0.5, 2, true));

        let r = gauss_law_check(&Poly::parse("x1", c).unwrap(), &budget()).unwrap();
        assert!(r.bias_magnitude < 1e-12);
        assert_eq!((r.sym_rank, r.consistent), (0, true));
    }

    #[test]
    fn gauss_law_on_random_quadratics() {
        let mut rng = CounterRng::new(99);
        for &p in &[2u32, 3, 5] {
            for n in 2..=4usize {
                let c = ctx(p, n);
                for _ in 0..40 {
                    let poly = crate::testutil::random_poly(&c, 2, &mut rng);
                    let r = gauss_law_check(&poly, &budget()).unwrap();
                    assert!(r.consistent, "p={p} n={n} P={poly} |bias|={}", r.bias_magnitude);
                }
            }
        }
    }

    #[test]
    fn measurable_examples() {
        let c = ctx(2, 2);
        let p = Poly::parse("x1*x2", c).unwrap();
        let qs = [Poly::parse("x1", c).unwrap(), Poly::parse("x2", c).unwrap()];
        assert!(is_measurable(&p, &qs, &budget()).unwrap().is_some());

        let c3 = ctx(2, 3);
        let p = Poly::parse("x1*x2 + x3", c3).unwrap();
        let qs = [Poly::parse("x1", c3).unwrap(), Poly::parse("x2", c3).unwrap()];
        assert!(is_measurable(&p, &qs, &budget()).unwrap().is_none());

        // S_6 = S_2 * S_4 pointwise over F_2^7.
        let c7 = ctx(2, 7);
        let s6 = symmetric_poly(c7, 6).unwrap();
        let qs = [symmetric_poly(c7, 2).unwrap(), symmetric_poly(c7, 4).unwrap()];
        let lookup = is_measurable(&s6, &qs, &budget()).unwrap().unwrap();
        assert_eq!(lookup[&vec![1, 1]], 1);
        assert_eq!(lookup[&vec![0, 1]], 0);
    }

    #[test]
    fn brute_rank_examples() {
        let c = ctx(2, 2);
        let constant = Poly::constant(c, 1);
        assert_eq!(brute_rank(&constant, 1, &budget()).unwrap().k, 0);

        let x1 = Poly::parse("x1", c).unwrap();
        let cert = brute_rank(&x1, 1, &budget()).unwrap();
        assert_eq!(cert.k, 1);
        assert_eq!(cert.witnesses[0], x1);
        assert!(cert.replay(&x1, &budget()).unwrap());

        // Guard violations are hard errors.
        let c4 = ctx(2, 4);
        assert!(matches!(
            brute_rank(&Poly::parse("x1", c4).unwrap(), 1, &budget()),
            Err(Error::Intractable(_))
        ));
        assert!(matches!(
            brute_rank(&Poly::parse("x1", ctx(3, 2)).unwrap(), 1, &budget()),
            Err(Error::Intractable(_))
        ));
    }

    #[test]
    fn brute_rank_of_triple_product() {
        // x1*x2*x3 = B(S_1, S_2) on F_2^3 and no single quadratic works.
        let c = ctx(2, 3);
        let p = Poly::parse("x1*x2*x3", c).unwrap();
        let cert = brute_rank(&p, 2, &budget()).unwrap();
        assert_eq!(cert.k, 2);
        assert!(cert.replay(&p, &budget()).unwrap());
        // Golden witness pair for the canonical enumeration order.
        assert_eq!(cert.witnesses[0].to_string(), "x3");
        assert_eq!(cert.witnesses[1].to_string(), "x1*x2");
    }

    #[test]
    fn brute_rank_exhausts_to_three_witnesses() {
        // No pair of affine forms determines x1 x2 x3, so the search must
        // walk every 1- and 2-tuple before finding a triple.
        let c = ctx(2, 3);
        let p = Poly::parse("x1*x2*x3", c).unwrap();
        let cert = brute_rank(&p, 1, &budget()).unwrap();
        assert_eq!(cert.k, 3);
        assert!(cert.replay(&p, &budget()).unwrap());
    }

    #[test]
    fn brute_rank_monotone_in_degree() {
        let c = ctx(2, 3);
        let mut rng = CounterRng::new(5);
        for _ in 0..10 {
            let p = crate::testutil::random_poly(&c, 2, &mut rng);
            let r1 = brute_rank(&p, 1, &budget()).unwrap().k;
            let r2 = brute_rank(&p, 2, &budget()).unwrap().k;
            assert!(r2 <= r1, "P={p}: rank_2={r2} > rank_1={r1}");
        }
    }

    #[test]
    fn brute_rank_stable_under_low_degree_shift() {
        let c = ctx(2, 2);
        let mut rng = CounterRng::new(6);
        for _ in 0..10 {
            let p = crate::testutil::random_poly(&c, 2, &mut rng);
            let g = crate::testutil::random_poly(&c, 1, &mut rng);
            let shifted = p.add(&g).unwrap();
            let a = brute_rank(&p, 1, &budget()).unwrap().k as i64;
            let b = brute_rank(&shifted, 1, &budget()).unwrap().k as i64;
            assert!((a - b).abs() <= 1, "P={p} g={g}: {a} vs {b}");
        }
    }

    #[test]
    fn quadratic_witnesses_reduce_rank() {
        let mut rng = CounterRng::new(55);
        for &(p, n) in &[(2u32, 4usize), (2, 5), (3, 3), (5, 2)] {
            let c = ctx(p, n);
            for _ in 0..30 {
                let poly = crate::testutil::random_poly(&c, 2, &mut rng);
                let ws = quadratic_witnesses(&poly).unwrap();
                for w in &ws {
                    assert!(w.degree() <= 1, "witness degree {}", w.degree());
                }
                assert!(
                    is_measurable(&poly, &ws, &budget()).unwrap().is_some(),
                    "P={poly} not measurable in its witnesses"
                );
                let data = quadratic_decompose(&poly).unwrap();
                assert!(ws.len() <= data.sym_rank + 1);
            }
        }
    }
}
