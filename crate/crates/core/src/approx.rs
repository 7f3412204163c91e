//! The derivative-sampling low-rank approximation of a biased polynomial.
//!
//! For fixed x and uniform h, the derivative D_h P(x) is distributed as the
//! shifted value distribution mu_{P(x)}, where mu_r(t) = P_x(P(x) = t + r).
//! Sampling k shifts and classifying x by the measure nearest (in L1) to
//! the observed derivative histogram yields a function that reads x only
//! through k polynomials of lower degree. All distances are compared as
//! exact integers over the common denominator k p^n.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Point, PrimeFieldCtx};
use crate::gowers::Budget;
use crate::poly::{PhaseTable, Poly};
use crate::rng::CounterRng;

/// mu_r: the distribution of P(x) - r over uniform x, as exact counts over
/// denominator p^n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DerivedMeasure {
    pub r: u8,
    /// `counts[t]` = #{x : P(x) = t + r}.
    pub counts: Vec<u64>,
    /// log_p of the denominator (the dimension n).
    pub n: usize,
}

impl DerivedMeasure {
    /// Integer numerator of the L1 distance over denominator p^n.
    pub fn l1_numerator(&self, other: &DerivedMeasure) -> u64 {
        self.counts
            .iter()
            .zip(&other.counts)
            .map(|(&a, &b)| a.abs_diff(b))
            .sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivedMeasuresReport {
    pub measures: Vec<DerivedMeasure>,
    /// min over r != s of ||mu_r - mu_s||_1.
    pub min_pairwise_l1: f64,
    pub bias_magnitude: f64,
    /// Whether min pairwise L1 >= 4 |bias| / p; vacuous (None) at bias 0.
    pub separation_ok: Option<bool>,
}

/// All p derived measures of P with the pairwise separation check.
pub fn derived_measures(p: &Poly, budget: &Budget) -> Result<DerivedMeasuresReport> {
    let table = p.truth_table(budget.table_cap)?;
    Ok(derived_measures_of_table(&table))
}

pub fn derived_measures_of_table(table: &PhaseTable) -> DerivedMeasuresReport {
    let ctx = table.ctx();
    let pf = ctx.p() as usize;
    let hist = table.histogram();
    let measures: Vec<DerivedMeasure> = (0..pf as u8)
        .map(|r| DerivedMeasure {
            r,
            counts: (0..pf as u8)
                .map(|t| hist.counts()[ctx.add(t, r) as usize])
                .collect(),
            n: ctx.n(),
        })
        .collect();
    let npoints = ctx.num_points() as f64;
    let mut min_l1 = f64::INFINITY;
    for r in 0..pf {
        for s in (r + 1)..pf {
            let l1 = measures[r].l1_numerator(&measures[s]) as f64 / npoints;
            min_l1 = min_l1.min(l1);
        }
    }
    if pf == 1 || min_l1.is_infinite() {
        min_l1 = 0.0;
    }
    let bias = crate::gowers::bias_of_table(table);
    let separation_ok = if bias.magnitude > 1e-12 {
        Some(min_l1 + 1e-12 >= 4.0 * bias.magnitude / ctx.p() as f64)
    } else {
        None
    };
    DerivedMeasuresReport {
        measures,
        min_pairwise_l1: min_l1,
        bias_magnitude: bias.magnitude,
        separation_ok,
    }
}

/// The sampled approximant: k shifts, their derivative polynomials kept
/// symbolically, the p reference measures, and the L1-nearest decision rule
/// with smallest-r tie-break.
#[derive(Debug, Clone)]
pub struct BvApproximant {
    pub shifts: Vec<Point>,
    pub derivative_polys: Vec<Poly>,
    pub measures: Vec<DerivedMeasure>,
    ctx: PrimeFieldCtx,
}

impl BvApproximant {
    pub fn ctx(&self) -> PrimeFieldCtx {
        self.ctx
    }

    pub fn k(&self) -> usize {
        self.shifts.len()
    }

    /// Decides from the derivative-value tuple alone; this is the whole
    /// interface of the approximant, which is what certifies
    /// rank_{d-1} <= k.
    pub fn decide_from_tuple(&self, values: &[u8]) -> u8 {
        debug_assert_eq!(values.len(), self.k());
        let pf = self.ctx.p() as usize;
        let mut obs = vec![0u64; pf];
        for &v in values {
            obs[v as usize] += 1;
        }
        self.decide_from_histogram(&obs)
    }

    /// argmin over r of ||mu_obs - mu_r||_1 with exact integer numerators
    /// over k p^n; ties break to the smallest r.
    pub fn decide_from_histogram(&self, obs: &[u64]) -> u8 {
        let npoints = self.ctx.num_points();
        let k = obs.iter().sum::<u64>() as u128;
        let mut best: Option<(u128, u8)> = None;
        for m in &self.measures {
            let dist: u128 = obs
                .iter()
                .zip(&m.counts)
                .map(|(&o, &w)| (o as u128 * npoints).abs_diff(w as u128 * k))
                .sum();
            match best {
                Some((b, _)) if dist >= b => {}
                _ => best = Some((dist, m.r)),
            }
        }
        best.map(|(_, r)| r).unwrap_or(0)
    }

    /// Evaluates the approximant at a point by computing the stored
    /// derivative polynomials there.
    pub fn evaluate(&self, x: &Point) -> Result<u8> {
        let values: Vec<u8> = self
            .derivative_polys
            .iter()
            .map(|d| d.evaluate(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.decide_from_tuple(&values))
    }

    /// For p = 2: literal majority vote over the derivative values, ties to
    /// 0. Coincides with the L1 decision rule whenever P is biased toward 0
    /// (the zero-value class is the larger one).
    pub fn majority_vote_p2(&self, values: &[u8]) -> Result<u8> {
        if self.ctx.p() != 2 {
            return Err(Error::Domain("majority vote is the p = 2 reading".into()));
        }
        let ones = values.iter().filter(|&&v| v == 1).count() * 2;
        Ok((ones > values.len()) as u8)
    }
}

/// Samples k shifts (deterministically from the seed), differentiates P
/// symbolically along each, and packages the decision rule.
pub fn bv_approximate(p: &Poly, k: usize, seed: u64, budget: &Budget) -> Result<BvApproximant> {
    if k == 0 {
        return Err(Error::Domain("need at least one sampled shift".into()));
    }
    let ctx = p.ctx();
    let mut rng = CounterRng::new(seed);
    let shifts: Vec<Point> = (0..k)
        .map(|_| Point::new(&ctx, rng.point_coords(ctx.p(), ctx.n())))
        .collect::<Result<Vec<_>>>()?;
    let derivative_polys: Vec<Poly> = shifts
        .iter()
        .map(|h| p.additive_derivative(h))
        .collect::<Result<Vec<_>>>()?;
    let measures = derived_measures(p, budget)?.measures;
    Ok(BvApproximant {
        shifts,
        derivative_polys,
        measures,
        ctx,
    })
}

/// Exact agreement fraction |{x : P(x) = approx(x)}| / p^n.
#[derive(Debug, Clone, Serialize)]
pub struct Agreement {
    pub matching: u64,
    pub total: u64,
    pub fraction: f64,
}

pub fn agreement(p: &Poly, approx: &BvApproximant, budget: &Budget) -> Result<Agreement> {
    let ctx = p.ctx();
    if approx.ctx() != ctx {
        return Err(Error::CtxMismatch("agreement".into()));
    }
    let ptable = p.truth_table(budget.table_cap)?;
    let dtables: Vec<PhaseTable> = approx
        .derivative_polys
        .iter()
        .map(|d| d.truth_table(budget.table_cap))
        .collect::<Result<Vec<_>>>()?;
    let size = ctx.num_points_usize()?;
    let mut matching = 0u64;
    let pf = ctx.p() as usize;
    let mut obs = vec![0u64; pf];
    for x in 0..size {
        obs.iter_mut().for_each(|o| *o = 0);
        for t in &dtables {
            obs[t.get_rank(x) as usize] += 1;
        }
        if approx.decide_from_histogram(&obs) == ptable.get_rank(x) {
            matching += 1;
        }
    }
    Ok(Agreement {
        matching,
        total: size as u64,
        fraction: matching as f64 / size as f64,
    })
}

/// Default sample count ceil(p^5 / (2 sigma delta^2)) for a target
/// misclassification rate sigma at bias delta.
pub fn default_sample_count(p: u32, delta: f64, sigma: f64) -> usize {
    ((p as f64).powi(5) / (2.0 * sigma * delta * delta)).ceil() as usize
}

/// Empirical check of the concentration step: over fresh draws of
/// (x, h_1..h_k), the rate of |mu_obs(t) - mu_{P(x)}(t)| >= eta stays within
/// 1/(4 k eta^2) plus three binomial sigmas, per residue t.
#[derive(Debug, Clone, Serialize)]
pub struct ChebyshevReport {
    pub rates: Vec<f64>,
    pub bound: f64,
    pub tolerance: f64,
    pub within_bound: bool,
}

pub fn chebyshev_regime_check(
    p: &Poly,
    k: usize,
    eta: f64,
    trials: u64,
    seed: u64,
    budget: &Budget,
) -> Result<ChebyshevReport> {
    let ctx = p.ctx();
    let table = p.truth_table(budget.table_cap)?;
    let hist = table.histogram();
    let npoints = ctx.num_points() as f64;
    let pf = ctx.p() as usize;
    let size = ctx.num_points_usize()?;
    let failures = crate::par::map_chunks(
        trials,
        budget.threads,
        |range| {
            let mut failures = vec![0u64; pf];
            for s in range {
                let mut rng = CounterRng::for_sample(seed, s);
                let x = (rng.below(size as u64)) as usize;
                let px = table.get_rank(x);
                let mut obs = vec![0u64; pf];
                for _ in 0..k {
                    let h = rng.below(size as u64) as usize;
                    // D_h P(x) = P(x + h) - P(x) through table ranks.
                    let xv = ctx.unrank(x as u128);
                    let hv = ctx.unrank(h as u128);
                    let shifted = xv.add(&ctx, &hv).expect("same ctx");
                    let v = ctx.sub(table.get_rank(ctx.rank(shifted.coords()) as usize), px);
                    obs[v as usize] += 1;
                }
                for t in 0..pf {
                    // mu_{P(x)}(t) = P(P = t + P(x)).
                    let mu = hist.counts()[ctx.add(t as u8, px) as usize] as f64 / npoints;
                    if (obs[t] as f64 / k as f64 - mu).abs() >= eta {
                        failures[t] += 1;
                    }
                }
            }
            failures
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        },
    )
    .unwrap_or_else(|| vec![0; pf]);
    let bound = (1.0 / (4.0 * k as f64 * eta * eta)).min(1.0);
    let tolerance = 3.0 * (bound * (1.0 - bound) / trials as f64).sqrt();
    let rates: Vec<f64> = failures
        .iter()
        .map(|&f| f as f64 / trials as f64)
        .collect();
    let within_bound = rates.iter().all(|&r| r <= bound + tolerance);
    Ok(ChebyshevReport {
        rates,
        bound,
        tolerance,
        within_bound,
    })
}
