//! Polynomial factors: evaluation maps, atoms, regularity checking and
//! refinement, face-vector constraint spaces, parallelepiped counting,
//! factor-degree representation, and nullstellensatz ideal membership.
//!
//! A factor of degree d is a collection (P_{i,j}) with deg P_{i,j} <= i for
//! i = 1..d; its evaluation map sends x to the tuple of values and its atoms
//! are the fibers. Regularity demands that every nonzero combination within
//! a degree slot have rank at least F(dim), for a caller-chosen growth
//! function F and rank oracle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Point, PrimeFieldCtx};
use crate::gowers::Budget;
use crate::linalg::{solve, MatGF};
use crate::poly::{monomials_up_to, PhaseTable, Poly};
use crate::rank;

/// Degree-graded collection of polynomials P_{i,j}, deg P_{i,j} <= i.
#[derive(Debug, Clone)]
pub struct Factor {
    ctx: PrimeFieldCtx,
    slots: Vec<Vec<Poly>>,
}

impl Factor {
    /// `slots[i]` holds the degree-(i+1) part. Every polynomial must have
    /// degree at most its slot index (1-based).
    pub fn new(ctx: PrimeFieldCtx, slots: Vec<Vec<Poly>>) -> Result<Self> {
        for (i, slot) in slots.iter().enumerate() {
            for p in slot {
                if p.ctx() != ctx {
                    return Err(Error::CtxMismatch("factor polynomial".into()));
                }
                if p.degree() > (i + 1) as i32 {
                    return Err(Error::Domain(format!(
                        "degree {} polynomial in slot {}",
                        p.degree(),
                        i + 1
                    )));
                }
            }
        }
        Ok(Self { ctx, slots })
    }

    pub fn ctx(&self) -> PrimeFieldCtx {
        self.ctx
    }

    /// Degree d of the factor (number of slots).
    pub fn degree(&self) -> usize {
        self.slots.len()
    }

    /// (M_1, ..., M_d).
    pub fn dims(&self) -> Vec<usize> {
        self.slots.iter().map(|s| s.len()).collect()
    }

    /// dim = M_1 + ... + M_d.
    pub fn dim(&self) -> usize {
        self.slots.iter().map(|s| s.len()).sum()
    }

    pub fn slots(&self) -> &[Vec<Poly>] {
        &self.slots
    }

    /// All polynomials in slot order, with their 1-based (i, j) labels.
    pub fn labeled(&self) -> Vec<(usize, usize, &Poly)> {
        self.slots
            .iter()
            .enumerate()
            .flat_map(|(i, slot)| {
                slot.iter()
                    .enumerate()
                    .map(move |(j, p)| (i + 1, j + 1, p))
            })
            .collect()
    }

    /// |Sigma| = p^dim.
    pub fn sigma_size(&self) -> u128 {
        (0..self.dim()).fold(1u128, |acc, _| acc.saturating_mul(self.ctx.p() as u128))
    }

    /// The evaluation map Phi(x) = (P_{i,j}(x)).
    pub fn eval_map(&self, x: &Point) -> Result<ConfigPoint> {
        let mut entries = Vec::with_capacity(self.dim());
        for slot in &self.slots {
            for p in slot {
                entries.push(p.evaluate(x)?);
            }
        }
        Ok(ConfigPoint { entries })
    }

    /// Truth tables of every polynomial, in slot order.
    fn tables(&self, budget: &Budget) -> Result<Vec<PhaseTable>> {
        self.slots
            .iter()
            .flatten()
            .map(|p| p.truth_table(budget.table_cap))
            .collect()
    }
}

/// A point of the configuration space, flattened in slot order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConfigPoint {
    pub entries: Vec<u8>,
}

/// JSON description of a factor: polynomials in the text grammar with their
/// degree slots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorSpecFile {
    pub p: u32,
    pub n: usize,
    pub polys: Vec<FactorPolySpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorPolySpec {
    pub degree_slot: usize,
    pub text: String,
}

pub fn factor_from_spec(spec: &FactorSpecFile) -> Result<Factor> {
    let ctx = PrimeFieldCtx::new(spec.p, spec.n)?;
    let max_slot = spec.polys.iter().map(|p| p.degree_slot).max().unwrap_or(0);
    if spec.polys.iter().any(|p| p.degree_slot == 0) {
        return Err(Error::Domain("degree slots are 1-based".into()));
    }
    let mut slots = vec![Vec::new(); max_slot];
    for ps in &spec.polys {
        slots[ps.degree_slot - 1].push(Poly::parse(&ps.text, ctx)?);
    }
    Factor::new(ctx, slots)
}

/// Exact atom census over all points.
#[derive(Debug, Clone)]
pub struct AtomCensus {
    pub counts: BTreeMap<ConfigPoint, u64>,
    pub nonempty_atoms: usize,
    pub min_nonempty: u64,
    pub max_count: u64,
    /// max nonempty / min nonempty.
    pub ratio: f64,
    /// max over all of Sigma of |count * |Sigma| / p^n - 1|.
    pub max_rel_deviation: f64,
    /// p^n / |Sigma| as a float.
    pub expected: f64,
}

pub fn atom_census(factor: &Factor, budget: &Budget) -> Result<AtomCensus> {
    let ctx = factor.ctx();
    let npoints = ctx.num_points();
    if npoints > budget.table_cap {
        return Err(Error::Resource {
            what: "atom census".into(),
            needed: npoints,
            cap: budget.table_cap,
        });
    }
    let tables = factor.tables(budget)?;
    let mut counts: BTreeMap<ConfigPoint, u64> = BTreeMap::new();
    let size = ctx.num_points_usize()?;
    for x in 0..size {
        let entries: Vec<u8> = tables.iter().map(|t| t.get_rank(x)).collect();
        *counts.entry(ConfigPoint { entries }).or_insert(0) += 1;
    }
    let sigma = factor.sigma_size();
    let expected = npoints as f64 / sigma as f64;
    let min_nonempty = counts.values().copied().min().unwrap_or(0);
    let max_count = counts.values().copied().max().unwrap_or(0);
    // Empty atoms deviate by exactly 1.
    let mut max_rel_deviation: f64 = if (counts.len() as u128) < sigma { 1.0 } else { 0.0 };
    for &c in counts.values() {
        max_rel_deviation = max_rel_deviation.max((c as f64 / expected - 1.0).abs());
    }
    Ok(AtomCensus {
        nonempty_atoms: counts.len(),
        min_nonempty,
        max_count,
        ratio: max_count as f64 / min_nonempty.max(1) as f64,
        max_rel_deviation,
        expected,
        counts,
    })
}

/// Growth function F mapping factor dimension to required rank.
#[derive(Debug, Clone)]
pub enum GrowthFn {
    Constant(f64),
    /// Value at dimension i is table[min(i, len-1)]; must be nondecreasing.
    Table(Vec<f64>),
}

impl GrowthFn {
    pub fn eval(&self, dim: usize) -> f64 {
        match self {
            GrowthFn::Constant(c) => *c,
            GrowthFn::Table(t) => t[dim.min(t.len() - 1)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let GrowthFn::Table(t) = self {
            if t.is_empty() {
                return Err(Error::Domain("empty growth table".into()));
            }
            if t.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::Domain("growth function must be nondecreasing".into()));
            }
        }
        Ok(())
    }
}

/// Strategy for estimating rank_{i-1} of a degree-i combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankOracle {
    /// Exact symplectic/symmetric matrix rank for quadratics; falls back to
    /// the analytic proxy above degree 2.
    ExactQuadratic,
    /// -log_p |bias|, a one-sided certificate: high bias certifies low
    /// rank, but low bias does not prove high rank.
    AnalyticProxy,
    /// Guarded exhaustive search (p=2, n<=3, degree<=2 only).
    Brute,
}

/// Regularity requirements: the growth function and the rank oracle.
#[derive(Debug, Clone)]
pub struct RegularityBudget {
    pub growth: GrowthFn,
    pub rank_oracle: RankOracle,
}

pub const ORACLE_NOTE: &str = "rank estimates above degree 2 use the analytic proxy \
    -log_p |bias|; low bias does not certify high rank, so regularity under this \
    oracle is necessary evidence, not proof";

#[derive(Debug, Clone)]
pub struct Violation {
    pub degree_slot: usize,
    pub coeffs: Vec<u8>,
    pub rank_estimate: f64,
}

#[derive(Debug, Clone)]
pub struct RegularityReport {
    pub violations: Vec<Violation>,
    pub required: f64,
    pub oracle_note: &'static str,
}

impl RegularityReport {
    pub fn is_regular(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Estimates rank_{slot-1} of a degree-slot combination.
fn estimate_rank(q: &Poly, slot: usize, oracle: RankOracle, budget: &Budget) -> Result<f64> {
    let deg = q.degree();
    if deg <= 0 {
        return Ok(0.0);
    }
    if deg < (slot as i32) {
        return Ok(1.0);
    }
    if slot == 1 {
        // Nonconstant linear combination: rank_0 is infinite.
        return Ok(f64::INFINITY);
    }
    match oracle {
        RankOracle::ExactQuadratic if slot == 2 => {
            Ok(rank::quadratic_decompose(q)?.sym_rank as f64)
        }
        RankOracle::Brute => Ok(rank::brute_rank(q, slot - 1, budget)?.k as f64),
        _ => {
            let b = crate::gowers::bias(q, budget)?;
            if b.magnitude <= 0.0 {
                Ok(f64::INFINITY)
            } else {
                Ok(-b.magnitude.ln() / (q.ctx().p() as f64).ln())
            }
        }
    }
}

/// Estimates rank_{i-1} of every nonzero combination in every degree slot
/// and reports those below the growth requirement.
pub fn regularity_check(
    factor: &Factor,
    reg: &RegularityBudget,
    budget: &Budget,
) -> Result<RegularityReport> {
    reg.growth.validate()?;
    let ctx = factor.ctx();
    let required = reg.growth.eval(factor.dim());
    let mut violations = Vec::new();
    for (i, slot) in factor.slots.iter().enumerate() {
        let m = slot.len();
        if m == 0 {
            continue;
        }
        let combos = (ctx.p() as u128).checked_pow(m as u32);
        match combos {
            Some(c) if c <= 1 << 20 => {}
            _ => {
                return Err(Error::Resource {
                    what: format!("coefficient enumeration in degree slot {}", i + 1),
                    needed: combos.unwrap_or(u128::MAX),
                    cap: 1 << 20,
                })
            }
        }
        // Lexicographically over coefficient vectors (c_1 varies fastest).
        let mut coeffs = vec![0u8; m];
        loop {
            let mut idx = 0;
            loop {
                if idx == m {
                    break;
                }
                coeffs[idx] += 1;
                if (coeffs[idx] as u32) < ctx.p() {
                    break;
                }
                coeffs[idx] = 0;
                idx += 1;
            }
            if idx == m {
                break;
            }
            let mut combo = Poly::zero(ctx);
            for (j, &c) in coeffs.iter().enumerate() {
                if c != 0 {
                    combo = combo.add(&slot[j].scale(c))?;
                }
            }
            let estimate = estimate_rank(&combo, i + 1, reg.rank_oracle, budget)?;
            if estimate < required {
                violations.push(Violation {
                    degree_slot: i + 1,
                    coeffs: coeffs.clone(),
                    rank_estimate: estimate,
                });
            }
        }
    }
    Ok(RegularityReport {
        violations,
        required,
        oracle_note: ORACLE_NOTE,
    })
}

/// Supplies lower-degree witnesses for a low-rank degree-`slot` combination.
pub type Decomposer<'a> = dyn Fn(&Poly, usize) -> Result<Vec<Poly>> + 'a;

/// Built-in decomposer: constants vanish, degree-dropped combinations stand
/// for themselves, quadratics go through the triangular reduction. Anything
/// else is a stuck combination.
pub fn default_decomposer(q: &Poly, slot: usize) -> Result<Vec<Poly>> {
    let deg = q.degree();
    if deg <= 0 {
        return Ok(vec![]);
    }
    if deg < slot as i32 {
        return Ok(vec![q.clone()]);
    }
    if slot == 2 {
        return rank::quadratic_witnesses(q);
    }
    Err(Error::DecomposerStuck {
        degree: slot,
        coeffs: vec![],
        msg: format!("no built-in decomposition for a degree-{deg} combination"),
    })
}

/// Iterates the regularity-lemma step: find a violating combination
/// (highest degree first, then lexicographically smallest coefficients),
/// remove one unprotected polynomial appearing in it, and append the
/// decomposer's lower-degree witnesses. The dimension vector strictly
/// descends in reverse-lexicographic order, so this terminates.
///
/// `protected` lists 1-based (i, j) positions of the input factor that must
/// survive into the output unchanged.
pub fn regularize(
    factor: &Factor,
    reg: &RegularityBudget,
    decomposer: &Decomposer,
    protected: &[(usize, usize)],
    budget: &Budget,
) -> Result<Factor> {
    let ctx = factor.ctx();
    let mut slots: Vec<Vec<(Poly, bool)>> = factor
        .slots
        .iter()
        .enumerate()
        .map(|(i, slot)| {
            slot.iter()
                .enumerate()
                .map(|(j, p)| (p.clone(), protected.contains(&(i + 1, j + 1))))
                .collect()
        })
        .collect();

    let mut steps = 0usize;
    loop {
        steps += 1;
        if steps > 10_000 {
            return Err(Error::Intractable(
                "regularization did not terminate within 10000 steps".into(),
            ));
        }
        let current = Factor::new(
            ctx,
            slots
                .iter()
                .map(|s| s.iter().map(|(p, _)| p.clone()).collect())
                .collect(),
        )?;
        let report = regularity_check(&current, reg, budget)?;
        if report.violations.is_empty() {
            return Ok(current);
        }
        // Highest degree first, then lexicographically smallest coefficient
        // vector; regularity_check already enumerates lexicographically.
        let v = report
            .violations
            .iter()
            .max_by(|a, b| {
                a.degree_slot
                    .cmp(&b.degree_slot)
                    .then_with(|| b.coeffs.cmp(&a.coeffs))
            })
            .expect("nonempty violations");
        let i = v.degree_slot - 1;
        let combo = {
            let mut c = Poly::zero(ctx);
            for (j, &cj) in v.coeffs.iter().enumerate() {
                if cj != 0 {
                    c = c.add(&slots[i][j].0.scale(cj))?;
                }
            }
            c
        };
        // Remove the largest-index unprotected polynomial in the support.
        let j0 = (0..v.coeffs.len())
            .rev()
            .find(|&j| v.coeffs[j] != 0 && !slots[i][j].1);
        let Some(j0) = j0 else {
            return Err(Error::DecomposerStuck {
                degree: v.degree_slot,
                coeffs: v.coeffs.clone(),
                msg: "every polynomial in the violating combination is protected".into(),
            });
        };
        let witnesses = decomposer(&combo, v.degree_slot).map_err(|e| match e {
            Error::DecomposerStuck { degree, msg, .. } => Error::DecomposerStuck {
                degree,
                coeffs: v.coeffs.clone(),
                msg,
            },
            other => other,
        })?;
        slots[i].remove(j0);
        for w in witnesses {
            let deg = w.degree();
            if deg <= 0 {
                continue;
            }
            if deg >= v.degree_slot as i32 {
                return Err(Error::Domain(format!(
                    "decomposer returned a degree-{deg} witness for slot {}",
                    v.degree_slot
                )));
            }
            slots[deg as usize - 1].push((w, false));
        }
    }
}

/// Checks that `coarse`'s sigma-algebra is refined by `fine`'s: any two
/// points with equal fine configurations have equal coarse configurations.
pub fn refines(fine: &Factor, coarse: &Factor, budget: &Budget) -> Result<bool> {
    let ctx = fine.ctx();
    if coarse.ctx() != ctx {
        return Err(Error::CtxMismatch("refinement check".into()));
    }
    let ft = fine.tables(budget)?;
    let ct = coarse.tables(budget)?;
    let size = ctx.num_points_usize()?;
    let mut map: std::collections::HashMap<Vec<u8>, Vec<u8>> = std::collections::HashMap::new();
    for x in 0..size {
        let fkey: Vec<u8> = ft.iter().map(|t| t.get_rank(x)).collect();
        let ckey: Vec<u8> = ct.iter().map(|t| t.get_rank(x)).collect();
        match map.entry(fkey) {
            std::collections::hash_map::Entry::Occupied(e) => {
                if e.get() != &ckey {
                    return Ok(false);
                }
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(ckey);
            }
        }
    }
    Ok(true)
}

/// A lower face vector r(i0, j0, F): the support is one slot and one lower
/// face, with entries (-1)^|omega|.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FaceVector {
    /// 1-based (i, j) slot label.
    pub slot: (usize, usize),
    /// Free-coordinate mask of the lower face (fixed coordinates are 0).
    pub free_mask: u32,
    pub face_dim: usize,
}

impl FaceVector {
    /// Dense entries over Sigma^{0,1}^k, flattened as (omega, slot) with
    /// slot varying fastest.
    pub fn entries(&self, k: usize, factor_dim: usize, slot_index: usize, p: u32) -> Vec<u8> {
        let mut v = vec![0u8; (1usize << k) * factor_dim];
        for omega in 0..(1u32 << k) {
            if omega & !self.free_mask != 0 {
                continue;
            }
            let sign = if omega.count_ones() % 2 == 0 { 1 } else { p as u8 - 1 };
            v[omega as usize * factor_dim + slot_index] = sign;
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct LowerFaceBasis {
    pub vectors: Vec<FaceVector>,
    /// Rank of the stacked vectors over F_p.
    pub rank: usize,
    /// 2^k * dim - #vectors, checked against the closed formula.
    pub dim_sigma_box: u128,
    pub formula_dim: u128,
    pub independent: bool,
}

/// All relevant lower face vectors for a factor shape, any k >= 1.
pub fn relevant_lower_face_vectors(dims: &[usize], k: usize) -> Vec<FaceVector> {
    let mut vectors = Vec::new();
    for (i, &m) in dims.iter().enumerate() {
        let degree = i + 1;
        for j in 0..m {
            for mask in 0..(1u32 << k) {
                let face_dim = mask.count_ones() as usize;
                if face_dim > degree {
                    vectors.push(FaceVector {
                        slot: (degree, j + 1),
                        free_mask: mask,
                        face_dim,
                    });
                }
            }
        }
    }
    vectors
}

fn binom_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Constructs all relevant lower face vectors for a factor shape, checks
/// their linear independence by Gaussian elimination, and compares the
/// resulting dim(Sigma_box) with the closed formula. Requires k > d.
pub fn lower_face_basis(p: u32, dims: &[usize], k: usize) -> Result<LowerFaceBasis> {
    let d = dims.len();
    if k <= d {
        return Err(Error::Domain(format!(
            "face dimension formula needs k > d (got k={k}, d={d})"
        )));
    }
    let factor_dim: usize = dims.iter().sum();
    let cube = 1usize << k;
    if cube.saturating_mul(factor_dim) > 1 << 22 {
        return Err(Error::Resource {
            what: "face vector matrix".into(),
            needed: (cube * factor_dim) as u128,
            cap: 1 << 22,
        });
    }
    let mut vectors = Vec::new();
    let mut rows: Vec<Vec<u8>> = Vec::new();
    let mut slot_index = 0usize;
    for (i, &m) in dims.iter().enumerate() {
        let degree = i + 1;
        for j in 0..m {
            for mask in 0..(1u32 << k) {
                let face_dim = mask.count_ones() as usize;
                if face_dim > degree {
                    let fv = FaceVector {
                        slot: (degree, j + 1),
                        free_mask: mask,
                        face_dim,
                    };
                    rows.push(fv.entries(k, factor_dim, slot_index, p));
                    vectors.push(fv);
                }
            }
            slot_index += 1;
        }
    }
    let rank = if rows.is_empty() {
        0
    } else {
        MatGF::from_rows(p, rows).rank()
    };
    let dim_sigma_box = (cube as u128) * factor_dim as u128 - vectors.len() as u128;
    let formula_dim: u128 = dims
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let per: u128 = (0..=(i + 1)).map(|j| binom_u128(k, j)).sum();
            m as u128 * per
        })
        .sum();
    Ok(LowerFaceBasis {
        independent: rank == vectors.len(),
        rank,
        vectors,
        dim_sigma_box,
        formula_dim,
    })
}

/// Exact count of shift tuples h with Phi(x + omega . h) = t_box(omega).
#[derive(Debug, Clone)]
pub struct BoxCount {
    pub count: u64,
    /// nk - sum_i M_i sum_{1<=j<=i} binom(k, j).
    pub expected_log_p: i64,
    /// p^expected_log_p.
    pub expected: f64,
    pub ratio: f64,
}

/// Validates that `t_box` satisfies the parallelepiped constraints (it is
/// orthogonal to every relevant lower face vector and matches Phi(x) at the
/// origin) and counts exactly.
pub fn count_parallelepipeds(
    factor: &Factor,
    x: &Point,
    t_box: &[ConfigPoint],
    k: usize,
    budget: &Budget,
) -> Result<BoxCount> {
    let ctx = factor.ctx();
    let dim = factor.dim();
    if t_box.len() != 1 << k {
        return Err(Error::Domain(format!(
            "t_box needs 2^{k} = {} entries, got {}",
            1 << k,
            t_box.len()
        )));
    }
    if t_box.iter().any(|c| c.entries.len() != dim) {
        return Err(Error::Domain("configuration shape mismatch".into()));
    }
    let phi_x = factor.eval_map(x)?;
    if t_box[0] != phi_x {
        return Err(Error::Domain(
            "t_box(0) must equal the configuration of the base point".into(),
        ));
    }
    // Orthogonality to each relevant lower face vector, recomputed here
    // rather than trusted.
    let labels = factor.labeled();
    for fv in relevant_lower_face_vectors(&factor.dims(), k) {
        let slot_index = labels
            .iter()
            .position(|&(i, j, _)| (i, j) == fv.slot)
            .expect("face vector labels a factor slot");
        let mut acc = 0u8;
        for omega in 0..(1u32 << k) {
            if omega & !fv.free_mask != 0 {
                continue;
            }
            let v = t_box[omega as usize].entries[slot_index];
            acc = if omega.count_ones() % 2 == 0 {
                ctx.add(acc, v)
            } else {
                ctx.sub(acc, v)
            };
        }
        if acc != 0 {
            return Err(Error::Domain(format!(
                "t_box violates the lower face vector at slot {:?} with free mask {:#b}",
                fv.slot, fv.free_mask
            )));
        }
    }
    // Enumeration cost p^{nk}.
    let cost = (ctx.num_points()).checked_pow(k as u32);
    match cost {
        Some(c) if c <= budget.cube_cap => {}
        _ => {
            return Err(Error::Resource {
                what: format!("parallelepiped enumeration over (F^n)^{k}"),
                needed: cost.unwrap_or(u128::MAX),
                cap: budget.cube_cap,
            })
        }
    }
    let tables = factor.tables(budget)?;
    let npoints = ctx.num_points() as u64;
    let total = cost.unwrap() as u64;
    let count = crate::par::map_chunks(
        total,
        budget.threads,
        |range| {
            let mut count = 0u64;
            'tuples: for t in range {
                let mut rem = t;
                let hs: Vec<Point> = (0..k)
                    .map(|_| {
                        let h = ctx.unrank((rem % npoints) as u128);
                        rem /= npoints;
                        h
                    })
                    .collect();
                for omega in 0..(1u32 << k) {
                    let vertex = crate::field::cube_vertex(&ctx, x, &hs, omega)
                        .expect("validated shapes");
                    let rank = ctx.rank(vertex.coords()) as usize;
                    for (ti, table) in tables.iter().enumerate() {
                        if table.get_rank(rank) != t_box[omega as usize].entries[ti] {
                            continue 'tuples;
                        }
                    }
                }
                count += 1;
            }
            count
        },
        |a, b| a + b,
    )
    .unwrap_or(0);
    let constrained: i64 = factor
        .dims()
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let per: i64 = (1..=(i + 1)).map(|j| binom_u128(k, j) as i64).sum();
            m as i64 * per
        })
        .sum();
    let expected_log_p = (ctx.n() * k) as i64 - constrained;
    let expected = (ctx.p() as f64).powi(expected_log_p as i32);
    Ok(BoxCount {
        count,
        expected_log_p,
        expected,
        ratio: count as f64 / expected,
    })
}

/// A factor-polynomial representation: coefficients over weighted exponent
/// tuples s = (s_{i,j}), weight sum of i * s_{i,j}.
#[derive(Debug, Clone)]
pub struct FactorDegreeRepr {
    /// (tuple flattened in slot order, coefficient).
    pub terms: Vec<(Vec<u8>, u8)>,
    pub weight_bound: usize,
    pub tuples_searched: usize,
}

/// Solves for a representation P = sum_s c_s prod P_{i,j}^{s_{i,j}} with
/// weight(s) <= D, one linear equation per point. Returns the canonical
/// solution (free variables zero) or None when no representation of weight
/// at most D exists.
pub fn factor_degree_representation(
    p: &Poly,
    factor: &Factor,
    max_weight: usize,
    budget: &Budget,
) -> Result<Option<FactorDegreeRepr>> {
    let ctx = factor.ctx();
    if p.ctx() != ctx {
        return Err(Error::CtxMismatch("factor_degree_representation".into()));
    }
    let all: Vec<Poly> = factor.slots.iter().flatten().cloned().collect();
    if rank::is_measurable(p, &all, budget)?.is_none() {
        return Err(Error::Domain(
            "polynomial is not measurable with respect to the factor".into(),
        ));
    }
    // Weights of the flattened slots.
    let weights: Vec<usize> = factor
        .slots
        .iter()
        .enumerate()
        .flat_map(|(i, slot)| std::iter::repeat_n(i + 1, slot.len()))
        .collect();
    let dim = weights.len();
    let pm1 = (ctx.p() - 1) as u8;
    // Enumerate exponent tuples of weight <= max_weight.
    let mut tuples: Vec<Vec<u8>> = Vec::new();
    let mut cur = vec![0u8; dim];
    'enumerate: loop {
        let w: usize = cur
            .iter()
            .zip(&weights)
            .map(|(&s, &wt)| s as usize * wt)
            .sum();
        if w <= max_weight {
            tuples.push(cur.clone());
        }
        let mut i = 0;
        loop {
            if i == dim {
                break 'enumerate;
            }
            cur[i] += 1;
            if cur[i] <= pm1 {
                break;
            }
            cur[i] = 0;
            i += 1;
        }
    }
    tuples.sort();
    let size = ctx.num_points_usize()?;
    if (size as u128) * (tuples.len() as u128) > 1 << 26 {
        return Err(Error::Resource {
            what: "factor-degree linear system".into(),
            needed: size as u128 * tuples.len() as u128,
            cap: 1 << 26,
        });
    }
    let tables = factor.tables(budget)?;
    let ptable = p.truth_table(budget.table_cap)?;
    let mut mat = MatGF::zeros(ctx.p(), size, tuples.len());
    for x in 0..size {
        for (col, s) in tuples.iter().enumerate() {
            let mut v = 1u8;
            for (ti, &e) in s.iter().enumerate() {
                if e > 0 {
                    v = ctx.mul(v, ctx.pow(tables[ti].get_rank(x), e as u32));
                }
                if v == 0 {
                    break;
                }
            }
            mat.set(x, col, v);
        }
    }
    let rhs: Vec<u8> = (0..size).map(|x| ptable.get_rank(x)).collect();
    let Some(solution) = solve(&mat, &rhs)? else {
        return Ok(None);
    };
    let terms: Vec<(Vec<u8>, u8)> = tuples
        .into_iter()
        .zip(&solution)
        .filter(|(_, &c)| c != 0)
        .map(|(t, &c)| (t, c))
        .collect();
    Ok(Some(FactorDegreeRepr {
        terms,
        weight_bound: max_weight,
        tuples_searched: solution.len(),
    }))
}

/// Replays a factor-degree representation pointwise.
pub fn replay_factor_degree(
    repr: &FactorDegreeRepr,
    p: &Poly,
    factor: &Factor,
    budget: &Budget,
) -> Result<bool> {
    let ctx = factor.ctx();
    let tables = factor.tables(budget)?;
    let ptable = p.truth_table(budget.table_cap)?;
    let size = ctx.num_points_usize()?;
    for x in 0..size {
        let mut acc = 0u8;
        for (s, c) in &repr.terms {
            let mut v = *c;
            for (ti, &e) in s.iter().enumerate() {
                if e > 0 {
                    v = ctx.mul(v, ctx.pow(tables[ti].get_rank(x), e as u32));
                }
            }
            acc = ctx.add(acc, v);
        }
        if acc != ptable.get_rank(x) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Solves Q = sum_i P_i R_i with deg R_i <= bound_i by one linear equation
/// per point; unknowns are the monomial coefficients of the R_i. Returns
/// canonical witnesses or None (no witness at these bounds).
pub fn ideal_membership(
    q: &Poly,
    ps: &[Poly],
    deg_bounds: &[usize],
    budget: &Budget,
) -> Result<Option<Vec<Poly>>> {
    let ctx = q.ctx();
    if ps.len() != deg_bounds.len() {
        return Err(Error::Domain("one degree bound per ideal generator".into()));
    }
    for p in ps {
        if p.ctx() != ctx {
            return Err(Error::CtxMismatch("ideal_membership".into()));
        }
    }
    let size = ctx.num_points_usize()?;
    let monos: Vec<Vec<Vec<u8>>> = deg_bounds
        .iter()
        .map(|&b| monomials_up_to(ctx, b))
        .collect();
    let cols: usize = monos.iter().map(|m| m.len()).sum();
    if (size as u128) * (cols as u128) > 1 << 26 {
        return Err(Error::Resource {
            what: "ideal membership linear system".into(),
            needed: size as u128 * cols as u128,
            cap: 1 << 26,
        });
    }
    let ptables: Vec<PhaseTable> = ps
        .iter()
        .map(|p| p.truth_table(budget.table_cap))
        .collect::<Result<Vec<_>>>()?;
    let qtable = q.truth_table(budget.table_cap)?;
    let mut mat = MatGF::zeros(ctx.p(), size, cols);
    let mut coords = vec![0u8; ctx.n()];
    for x in 0..size {
        let mut col = 0;
        for (i, mono_list) in monos.iter().enumerate() {
            let pv = ptables[i].get_rank(x);
            for m in mono_list {
                let mut v = pv;
                if v != 0 {
                    for (vi, &e) in m.iter().enumerate() {
                        if e > 0 {
                            v = ctx.mul(v, ctx.pow(coords[vi], e as u32));
                            if v == 0 {
                                break;
                            }
                        }
                    }
                }
                mat.set(x, col, v);
                col += 1;
            }
        }
        // mixed-radix increment
        for c in coords.iter_mut() {
            *c += 1;
            if (*c as u32) < ctx.p() {
                break;
            }
            *c = 0;
        }
    }
    let rhs: Vec<u8> = (0..size).map(|x| qtable.get_rank(x)).collect();
    let Some(solution) = solve(&mat, &rhs)? else {
        return Ok(None);
    };
    let mut witnesses = Vec::with_capacity(ps.len());
    let mut offset = 0;
    for mono_list in &monos {
        let mut r = Poly::zero(ctx);
        for (j, m) in mono_list.iter().enumerate() {
            let c = solution[offset + j];
            if c != 0 {
                r.add_term(&m.iter().map(|&e| e as u64).collect::<Vec<u64>>(), c as u64);
            }
        }
        offset += mono_list.len();
        witnesses.push(r);
    }
    Ok(Some(witnesses))
}

/// Replays an ideal-membership witness list pointwise.
pub fn replay_ideal_membership(
    q: &Poly,
    ps: &[Poly],
    rs: &[Poly],
    budget: &Budget,
) -> Result<bool> {
    let ctx = q.ctx();
    let qtable = q.truth_table(budget.table_cap)?;
    let ptables: Vec<PhaseTable> = ps
        .iter()
        .map(|p| p.truth_table(budget.table_cap))
        .collect::<Result<Vec<_>>>()?;
    let rtables: Vec<PhaseTable> = rs
        .iter()
        .map(|r| r.truth_table(budget.table_cap))
        .collect::<Result<Vec<_>>>()?;
    let size = ctx.num_points_usize()?;
    for x in 0..size {
        let mut acc = 0u8;
        for (pt, rt) in ptables.iter().zip(&rtables) {
            acc = ctx.add(acc, ctx.mul(pt.get_rank(x), rt.get_rank(x)));
        }
        if acc != qtable.get_rank(x) {
            return Ok(false);
        }
    }
    Ok(true)
}
