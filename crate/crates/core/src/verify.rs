//! Named suites that exercise distributional facts on random small
//! instances: nonvanishing of nonzero polynomials, multiple polynomial
//! recurrence, and the norm-domination scatter. Every suite takes a seed and
//! reports counts and witnesses; the inequalities are exact, so violations
//! are compared in integers.

use serde::Serialize;

use crate::error::Result;
use crate::field::PrimeFieldCtx;
use crate::gowers::{self, Budget};
use crate::poly::monomials_up_to;
use crate::poly::Poly;
use crate::rng::CounterRng;

/// Random polynomial of degree at most `max_deg` with coefficients drawn
/// from the sample stream.
fn random_poly(ctx: &PrimeFieldCtx, max_deg: usize, rng: &mut CounterRng) -> Poly {
    let monos = monomials_up_to(*ctx, max_deg);
    let mut poly = Poly::zero(*ctx);
    for m in monos {
        let c = rng.residue(ctx.p());
        if c != 0 {
            poly.add_term(&m.iter().map(|&e| e as u64).collect::<Vec<u64>>(), c as u64);
        }
    }
    poly
}

fn random_nonzero_poly(ctx: &PrimeFieldCtx, max_deg: usize, rng: &mut CounterRng) -> Poly {
    loop {
        let p = random_poly(ctx, max_deg, rng);
        if !p.is_zero() {
            return p;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub trials: u64,
    pub violations: u64,
    /// Trials meeting the bound with equality (extremal witnesses).
    pub extremal: u64,
    /// Worst observed slack (bound side minus observed side), 0 at the
    /// extremal configurations.
    pub min_slack: f64,
    pub notes: Vec<String>,
}

/// For random nonzero P of degree at most d, the vanishing fraction never
/// exceeds 1 - 2^-d; checked in exact integers:
/// zeros * 2^d <= (2^d - 1) * p^n.
pub fn suite_nonvanishing(
    p: u32,
    d: usize,
    n: usize,
    trials: u64,
    seed: u64,
    budget: &Budget,
) -> Result<SuiteReport> {
    let ctx = PrimeFieldCtx::new(p, n)?;
    let npoints = ctx.num_points();
    let mut violations = 0;
    let mut extremal = 0;
    let mut min_slack = f64::INFINITY;
    let mut notes = Vec::new();
    for s in 0..trials {
        let mut rng = CounterRng::for_sample(seed, s);
        let poly = random_nonzero_poly(&ctx, d, &mut rng);
        let hist = poly.truth_table(budget.table_cap)?.histogram();
        let zeros = hist.counts()[0] as u128;
        let lhs = zeros << d;
        let rhs = ((1u128 << d) - 1) * npoints;
        if lhs > rhs {
            violations += 1;
            notes.push(format!("violation: {poly} vanishes on {zeros} points"));
        } else if lhs == rhs {
            extremal += 1;
            if notes.len() < 8 {
                notes.push(format!("extremal: {poly}"));
            }
        }
        min_slack = min_slack.min((rhs as f64 - lhs as f64) / (npoints as f64 * (1 << d) as f64));
    }
    Ok(SuiteReport {
        trials,
        violations,
        extremal,
        min_slack,
        notes,
    })
}

/// For random P_1..P_k of degree at most d and a random base point, the
/// atom {x : P_i(x) = P_i(x_0) for all i} has probability at least
/// 2^-(p-1)kd; checked as count * 2^((p-1)kd) >= p^n.
pub fn suite_recurrence(
    p: u32,
    d: usize,
    k: usize,
    n: usize,
    trials: u64,
    seed: u64,
    budget: &Budget,
) -> Result<SuiteReport> {
    let ctx = PrimeFieldCtx::new(p, n)?;
    let npoints = ctx.num_points();
    let exponent = (p as usize - 1) * k * d;
    if exponent >= 100 {
        return Err(crate::error::Error::Resource {
            what: "recurrence bound exponent".into(),
            needed: exponent as u128,
            cap: 100,
        });
    }
    let size = ctx.num_points_usize()?;
    let mut violations = 0;
    let mut extremal = 0;
    let mut min_slack = f64::INFINITY;
    let mut notes = Vec::new();
    for s in 0..trials {
        let mut rng = CounterRng::for_sample(seed, s);
        let polys: Vec<Poly> = (0..k).map(|_| random_poly(&ctx, d, &mut rng)).collect();
        let x0 = rng.below(size as u64) as usize;
        let tables: Vec<_> = polys
            .iter()
            .map(|p| p.truth_table(budget.table_cap))
            .collect::<Result<Vec<_>>>()?;
        let targets: Vec<u8> = tables.iter().map(|t| t.get_rank(x0)).collect();
        let mut count: u128 = 0;
        for x in 0..size {
            if tables
                .iter()
                .zip(&targets)
                .all(|(t, &trg)| t.get_rank(x) == trg)
            {
                count += 1;
            }
        }
        let lhs = count << exponent;
        if lhs < npoints {
            violations += 1;
            notes.push(format!(
                "violation: atom of size {count} at base {x0} under {:?}",
                polys.iter().map(|p| p.to_string()).collect::<Vec<_>>()
            ));
        } else if lhs == npoints {
            extremal += 1;
        }
        min_slack = min_slack.min(lhs as f64 / npoints as f64 - 1.0);
    }
    Ok(SuiteReport {
        trials,
        violations,
        extremal,
        min_slack,
        notes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct InverseScatter {
    /// (U norm, weak norm) per random phase.
    pub points: Vec<(f64, f64)>,
    /// Count of points with u > U + 1e-9 (must be 0).
    pub violations: u64,
    pub trials: u64,
}

/// Emits (U^{d+1}, u^{d+1}) pairs for random polynomial phases of degree up
/// to d+1 and checks the weak norm never exceeds the full norm.
pub fn suite_inverse_smallcase(
    p: u32,
    d: usize,
    n: usize,
    trials: u64,
    seed: u64,
    budget: &Budget,
) -> Result<InverseScatter> {
    let ctx = PrimeFieldCtx::new(p, n)?;
    let order = d + 1;
    let mut points = Vec::new();
    let mut violations = 0;
    for s in 0..trials {
        let mut rng = CounterRng::for_sample(seed, s);
        let poly = random_poly(&ctx, order, &mut rng);
        let u = gowers::gowers_norm_exact(&poly, order, budget)?;
        let table = poly.truth_table(budget.table_cap)?;
        let w = gowers::weak_norm_exhaustive(&table, order, budget)?;
        if w.best_value > u.norm + 1e-9 {
            violations += 1;
        }
        points.push((u.norm, w.best_value));
    }
    Ok(InverseScatter {
        points,
        violations,
        trials,
    })
}
