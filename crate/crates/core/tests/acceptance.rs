//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.
//!
//! Every expected value here is either computed by an independent oracle in
//! this file (brute-force enumeration that never touches the implementation
//! path it checks) or asserted against a frozen golden that such an oracle
//! produced.

use std::time::Instant;

use polydist_core::approx;
use polydist_core::factor;
use polydist_core::field::PrimeFieldCtx;
use polydist_core::gowers::{self, Budget};
use polydist_core::poly::{symmetric_poly, Poly};
use polydist_core::rank;
use polydist_core::rng::CounterRng;
use polydist_core::symmetric;
use polydist_core::verify;

fn budget() -> Budget {
    Budget::default()
}

fn report(criterion: &str, ok: bool, detail: &str) {
    println!(
        "[acceptance] {criterion}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "{criterion}: {detail}");
}

/// Independent oracle for the S_4 power mean: brute force over all shift
/// quadruples of the three-term bilinear product, B computed from popcounts.
fn qident_power_mean_oracle(n: usize, threads: usize) -> (i128, u32) {
    let size = 1u64 << n;
    let b2 = |a: u64, b: u64| -> u64 {
        ((a.count_ones() * b.count_ones()) as u64 + (a & b).count_ones() as u64) & 1
    };
    let total = polydist_core::par::map_chunks(
        size,
        threads,
        |range| {
            let mut acc: i128 = 0;
            for a in range {
                for b in 0..size {
                    let bab = b2(a, b);
                    for c in 0..size {
                        let bac = b2(a, c);
                        let bbc = b2(b, c);
                        let mut inner: i64 = 0;
                        for d in 0..size {
                            let v = (bab & b2(c, d)) ^ (bac & b2(b, d)) ^ (b2(a, d) & bbc);
                            inner += 1 - 2 * v as i64;
                        }
                        acc += inner as i128;
                    }
                }
            }
            acc
        },
        |x, y| x + y,
    )
    .unwrap();
    (total, 4 * n as u32)
}

#[test]
fn criterion_1_s4_norm_side() {
    // Monte Carlo at n = 24: within 0.01 of 1/8, under 2 minutes.
    let t0 = Instant::now();
    let c24 = PrimeFieldCtx::new(2, 24).unwrap();
    let s4 = symmetric_poly(c24, 4).unwrap();
    let mc = gowers::gowers_norm_mc(&s4, 4, 1_000_000, 7, &budget()).unwrap();
    let mc_elapsed = t0.elapsed();
    let mc_ok = (mc.power_mean - 0.125).abs() <= 0.01 && mc_elapsed.as_secs() < 120;

    // Exact at n = 8 under 10 minutes, equal to the independent oracle over
    // all 2^32 quadruples, frozen golden 610041856 / 2^32.
    let t1 = Instant::now();
    let c8 = PrimeFieldCtx::new(2, 8).unwrap();
    let s4_8 = symmetric_poly(c8, 4).unwrap();
    let exact8 = gowers::gowers_norm_exact(&s4_8, 4, &budget()).unwrap();
    let exact_elapsed = t1.elapsed();
    let (oracle8, log8) = qident_power_mean_oracle(8, 0);
    let oracle8_pm = oracle8 as f64 / 2f64.powi(log8 as i32);
    let golden8 = 610_041_856.0 / 2f64.powi(32);
    let exact_ok = (exact8.power_mean - oracle8_pm).abs() < 1e-15
        && (exact8.power_mean - golden8).abs() < 1e-15
        && exact_elapsed.as_secs() < 600;

    // Exact n = 6 and n = 8 approach 1/8.
    let c6 = PrimeFieldCtx::new(2, 6).unwrap();
    let s4_6 = symmetric_poly(c6, 4).unwrap();
    let exact6 = gowers::gowers_norm_exact(&s4_6, 4, &budget()).unwrap();
    let (oracle6, log6) = qident_power_mean_oracle(6, 0);
    let oracle6_pm = oracle6 as f64 / 2f64.powi(log6 as i32);
    let approach_ok = (exact6.power_mean - oracle6_pm).abs() < 1e-15
        && (exact6.power_mean - 0.125).abs() > (exact8.power_mean - 0.125).abs();

    report(
        "criterion 1 (S4 counterexample, norm side)",
        mc_ok && exact_ok && approach_ok,
        &format!(
            "mc={:.6} in {:?}, exact8={:.10} (oracle {:.10}) in {:?}, exact6={:.10}",
            mc.power_mean, mc_elapsed, exact8.power_mean, oracle8_pm, exact_elapsed,
            exact6.power_mean
        ),
    );
}

#[test]
fn criterion_2_s4_correlation_side() {
    // All 16 symmetric coefficient vectors at n = 64: max |value| <= 0.02,
    // exact rationals.
    let mut max_abs: f64 = 0.0;
    for bits in 0..16u8 {
        let coeffs = [bits & 1, bits >> 1 & 1, bits >> 2 & 1, bits >> 3 & 1];
        let r = symmetric::symmetric_correlation(64, 4, &coeffs).unwrap();
        max_abs = max_abs.max(r.value.abs());
    }
    let corr_ok = max_abs <= 0.02;

    // Exhaustive weak norm at n = 4, order 4: byte-identical across runs
    // and equal to the frozen golden (7/8, zero witness) derived from the
    // exhaustive oracle below.
    let c4 = PrimeFieldCtx::new(2, 4).unwrap();
    let s4 = symmetric_poly(c4, 4).unwrap();
    let table = s4.truth_table(1 << 28).unwrap();
    let run1 = gowers::weak_norm_exhaustive(&table, 4, &budget()).unwrap();
    let run2 = gowers::weak_norm_exhaustive(&table, 4, &budget()).unwrap();
    let ser1 = serde_json::to_string(&run1).unwrap();
    let ser2 = serde_json::to_string(&run2).unwrap();

    // Independent oracle: plain loop over all 2^15 cubics via coefficient
    // masks against the 16-entry truth table of S_4.
    let mut table_bits = [0u8; 16];
    for (x, slot) in table_bits.iter_mut().enumerate() {
        *slot = ((x.count_ones() % 8) >= 4) as u8;
    }
    let monos: Vec<u16> = (0..16u16)
        .filter(|m| m.count_ones() <= 3)
        .collect();
    assert_eq!(monos.len(), 15);
    let mut best_corr = 0i32;
    for cand in 0..(1u32 << 15) {
        let mut corr = 0i32;
        for x in 0..16u16 {
            let mut q = 0u8;
            for (j, &m) in monos.iter().enumerate() {
                if cand >> j & 1 == 1 && (x & m) == m {
                    q ^= 1;
                }
            }
            corr += if table_bits[x as usize] == q { 1 } else { -1 };
        }
        best_corr = best_corr.max(corr.abs());
    }
    let oracle_best = best_corr as f64 / 16.0;

    let weak_ok = ser1 == ser2
        && (run1.best_value - oracle_best).abs() < 1e-15
        && run1.best_value == 0.875
        && run1.witness.to_string() == "0";
    report(
        "criterion 2 (S4 counterexample, correlation side)",
        corr_ok && weak_ok,
        &format!(
            "max |corr| at n=64 = {max_abs:.6}, weak norm = {} witness {:?} (oracle {oracle_best})",
            run1.best_value,
            run1.witness.to_string()
        ),
    );
}

#[test]
fn criterion_3_gauss_law() {
    let t0 = Instant::now();
    let mut rng = CounterRng::new(303);
    let mut checked = 0u64;
    let mut ok = true;
    for p in [2u32, 3, 5] {
        for n in 2..=6usize {
            let ctx = PrimeFieldCtx::new(p, n).unwrap();
            let monos = polydist_core::poly::monomials_up_to(ctx, 2);
            for _ in 0..200 {
                let mut poly = Poly::zero(ctx);
                for m in &monos {
                    let c = rng.residue(p);
                    if c != 0 {
                        poly.add_term(&m.iter().map(|&e| e as u64).collect::<Vec<u64>>(), c as u64);
                    }
                }
                let r = rank::gauss_law_check(&poly, &budget()).unwrap();
                if !r.consistent {
                    ok = false;
                }
                checked += 1;
            }
        }
    }
    report(
        "criterion 3 (Gauss law dichotomy)",
        ok && checked == 3000,
        &format!("{checked} quadratics in {:?}", t0.elapsed()),
    );
}

#[test]
fn criterion_4_identity_suites() {
    // Quartic derivative identity: exhaustive for n <= 4 and sampled n=16.
    let mut qident_ok = true;
    for n in 1..=4usize {
        qident_ok &= symmetric::quartic_derivative_identity_check(n, 0, n as u64).unwrap();
    }
    qident_ok &= symmetric::quartic_derivative_identity_check(16, 100_000, 41).unwrap();

    // Möbius derivative identity with the standard sign.
    let mut symderiv_ok = true;
    for &(d, p) in &[(2usize, 3u32), (3, 2), (4, 2), (3, 5)] {
        let n = 6.min(8);
        symderiv_ok &=
            symmetric::moebius_derivative_identity_check(p, d, n, 500, d as u64).unwrap();
    }

    // Variety identity at p=2, d in {3,4}, n=8, 10^4 sampled cubes.
    let mut defv_ok = true;
    for d in [3usize, 4] {
        let r = symmetric::variety_identity_check(2, d, 8, 10_000, d as u64, &budget()).unwrap();
        defv_ok &= r.identity_holds;
    }

    // Lucas consistency: evaluate(S_d, x) = binom(|x|, d) mod 2, exhaustive
    // for all n <= 12 and all d <= n.
    let mut lucas_ok = true;
    'outer: for n in 1..=12usize {
        let ctx = PrimeFieldCtx::new(2, n).unwrap();
        for d in 0..=n {
            let sd = symmetric_poly(ctx, d).unwrap();
            let table = sd.truth_table(1 << 28).unwrap();
            for x in 0..(1usize << n) {
                let want = symmetric::lucas_binomial(x.count_ones() as u64, d as u64, 2);
                if table.get_rank(x) != want {
                    lucas_ok = false;
                    break 'outer;
                }
            }
        }
    }
    report(
        "criterion 4 (identity suites)",
        qident_ok && symderiv_ok && defv_ok && lucas_ok,
        &format!("qident={qident_ok} symderiv={symderiv_ok} defv={defv_ok} lucas={lucas_ok}"),
    );
}

#[test]
fn criterion_5_face_vector_dimension() {
    let mut ok = true;
    let mut cases = 0;
    for p in [2u32, 3] {
        for d in 1..=4usize {
            for k in (d + 1)..=5usize {
                let mut dims = vec![1usize; d];
                loop {
                    let b = factor::lower_face_basis(p, &dims, k).unwrap();
                    if !b.independent || b.dim_sigma_box != b.formula_dim {
                        ok = false;
                    }
                    cases += 1;
                    let mut i = 0;
                    loop {
                        if i == d {
                            break;
                        }
                        dims[i] += 1;
                        if dims[i] <= 2 {
                            break;
                        }
                        dims[i] = 1;
                        i += 1;
                    }
                    if i == d {
                        break;
                    }
                }
            }
        }
    }
    report(
        "criterion 5 (face-vector dimension formula)",
        ok,
        &format!("{cases} (p, d, k, M) shapes, exact equality"),
    );
}

#[test]
fn criterion_6_derivative_sampling() {
    let ctx = PrimeFieldCtx::new(2, 10).unwrap();
    let p = Poly::parse("x1*x2 + x3*x4", ctx).unwrap();
    // Exact census: bias must be exactly 1/4.
    let b = gowers::bias(&p, &budget()).unwrap();
    let bias_ok = b.value.re == 0.25 && b.value.im == 0.0;

    let mut good_seeds = 0;
    let mut replay_ok = true;
    let mut fiber_checks = 0u64;
    for seed in 0..100u64 {
        let a = approx::bv_approximate(&p, 201, seed, &budget()).unwrap();
        let agr = approx::agreement(&p, &a, &budget()).unwrap();
        if agr.fraction >= 0.9 {
            good_seeds += 1;
        }
        // Measurability replay on sampled fiber pairs: equal derivative
        // tuples must give equal outputs (100 pairs per seed).
        let dtables: Vec<_> = a
            .derivative_polys
            .iter()
            .map(|d| d.truth_table(1 << 28).unwrap())
            .collect();
        let mut rng = CounterRng::for_sample(seed, 424_242);
        for _ in 0..100 {
            let x = rng.below(1024) as usize;
            let y = rng.below(1024) as usize;
            let tx: Vec<u8> = dtables.iter().map(|t| t.get_rank(x)).collect();
            let ty: Vec<u8> = dtables.iter().map(|t| t.get_rank(y)).collect();
            fiber_checks += 1;
            if tx == ty && a.decide_from_tuple(&tx) != a.decide_from_tuple(&ty) {
                replay_ok = false;
            }
        }
    }
    report(
        "criterion 6 (derivative-sampling approximation)",
        bias_ok && good_seeds >= 95 && replay_ok && fiber_checks == 10_000,
        &format!("bias=1/4: {bias_ok}, agreement >= 0.9 on {good_seeds}/100 seeds, {fiber_checks} fiber replays"),
    );
}

#[test]
fn criterion_7_statement_suites() {
    let mut ok = true;
    for p in [2u32, 3] {
        let n = 6;
        let r = verify::suite_nonvanishing(p, 3, n, 500, 7 + p as u64, &budget()).unwrap();
        if r.violations != 0 {
            ok = false;
        }
        let r = verify::suite_recurrence(p, 2, 2, 6, 500, 9 + p as u64, &budget()).unwrap();
        if r.violations != 0 {
            ok = false;
        }
    }
    report(
        "criterion 7 (nonvanishing and recurrence suites)",
        ok,
        "500 random instances each at p in {2,3}, n = 6, exact inequalities",
    );
}

#[test]
fn criterion_8_linear_solve_representations() {
    let mut rng = CounterRng::new(88);
    let mut in_ideal_ok = 0;
    let mut out_ideal_ok = 0;
    for trial in 0..100u64 {
        let p = if trial % 2 == 0 { 2u32 } else { 3 };
        let n = 3 + (trial as usize % 3); // 3, 4, 5
        let ctx = PrimeFieldCtx::new(p, n).unwrap();
        let monos = polydist_core::poly::monomials_up_to(ctx, 2);
        let mut random_poly = |max_deg: usize| {
            let mut poly = Poly::zero(ctx);
            for m in &monos {
                if m.iter().map(|&e| e as usize).sum::<usize>() > max_deg {
                    continue;
                }
                let c = rng.residue(p);
                if c != 0 && rng.below(2) == 0 {
                    poly.add_term(&m.iter().map(|&e| e as u64).collect::<Vec<u64>>(), c as u64);
                }
            }
            poly
        };
        // In-ideal: Q = P1 R1 + P2 R2 planted.
        let p1 = random_poly(2);
        let p2 = random_poly(2);
        let r1 = random_poly(1);
        let r2 = random_poly(1);
        let q = p1.mul(&r1).unwrap().add(&p2.mul(&r2).unwrap()).unwrap();
        let ps = [p1.clone(), p2.clone()];
        if let Some(rs) = factor::ideal_membership(&q, &ps, &[3, 3], &budget()).unwrap() {
            if factor::replay_ideal_membership(&q, &ps, &rs, &budget()).unwrap() {
                in_ideal_ok += 1;
            }
        }
        // Out-of-ideal: generators vanish at 0, Q(0) != 0.
        let z1 = {
            let v = random_poly(2);
            let c = v.evaluate_coords(&vec![0; n]);
            v.sub(&Poly::constant(ctx, c)).unwrap()
        };
        let z2 = {
            let v = random_poly(2);
            let c = v.evaluate_coords(&vec![0; n]);
            v.sub(&Poly::constant(ctx, c)).unwrap()
        };
        let q_out = {
            let v = random_poly(2);
            let c = v.evaluate_coords(&vec![0; n]);
            // Force a nonzero constant term so Q(0) = 1.
            v.sub(&Poly::constant(ctx, c))
                .unwrap()
                .add(&Poly::constant(ctx, 1))
                .unwrap()
        };
        if factor::ideal_membership(&q_out, &[z1, z2], &[3, 3], &budget())
            .unwrap()
            .is_none()
        {
            out_ideal_ok += 1;
        }
    }

    // Factor-degree representation: S_6 = S_2 S_4 on F_2^7 at weight 6,
    // and no representation of x1 x2 through {x1, x2} at weight 1.
    let c7 = PrimeFieldCtx::new(2, 7).unwrap();
    let f = factor::Factor::new(
        c7,
        vec![
            vec![],
            vec![symmetric_poly(c7, 2).unwrap()],
            vec![],
            vec![symmetric_poly(c7, 4).unwrap()],
        ],
    )
    .unwrap();
    let s6 = symmetric_poly(c7, 6).unwrap();
    let repr = factor::factor_degree_representation(&s6, &f, 6, &budget())
        .unwrap()
        .expect("S_6 has a weight-6 representation");
    let repr_ok = factor::replay_factor_degree(&repr, &s6, &f, &budget()).unwrap()
        && repr.terms == vec![(vec![1, 1], 1)];

    let c2 = PrimeFieldCtx::new(2, 2).unwrap();
    let f2 = factor::Factor::new(
        c2,
        vec![vec![
            Poly::parse("x1", c2).unwrap(),
            Poly::parse("x2", c2).unwrap(),
        ]],
    )
    .unwrap();
    let none_ok = factor::factor_degree_representation(
        &Poly::parse("x1*x2", c2).unwrap(),
        &f2,
        1,
        &budget(),
    )
    .unwrap()
    .is_none();

    report(
        "criterion 8 (linear-solve representations)",
        in_ideal_ok == 100 && out_ideal_ok == 100 && repr_ok && none_ok,
        &format!(
            "in-ideal {in_ideal_ok}/100, planted-out {out_ideal_ok}/100, S6=S2*S4 {repr_ok}, weight-1 none {none_ok}"
        ),
    );
}

#[test]
fn criterion_9_thread_determinism() {
    let ctx = PrimeFieldCtx::new(2, 12).unwrap();
    let s4 = symmetric_poly(ctx, 4).unwrap();
    let mut ok = true;
    let mut details = Vec::new();

    // Gowers Monte Carlo.
    let reference = {
        let b = Budget { threads: 1, ..budget() };
        gowers::gowers_norm_mc(&s4, 4, 100_000, 99, &b).unwrap()
    };
    for threads in [4usize, 8] {
        let b = Budget { threads, ..budget() };
        let r = gowers::gowers_norm_mc(&s4, 4, 100_000, 99, &b).unwrap();
        if r.power_mean.to_bits() != reference.power_mean.to_bits()
            || r.stderr.to_bits() != reference.stderr.to_bits()
        {
            ok = false;
            details.push(format!("gowers mc diverged at {threads} threads"));
        }
    }

    // Sampled B6 histogram.
    let ref_b6 = {
        let b = Budget { threads: 1, ..budget() };
        symmetric::b6_histogram(20, 50_000, 5, &b).unwrap()
    };
    for threads in [4usize, 8] {
        let b = Budget { threads, ..budget() };
        let r = symmetric::b6_histogram(20, 50_000, 5, &b).unwrap();
        if r.counts != ref_b6.counts {
            ok = false;
            details.push(format!("b6 diverged at {threads} threads"));
        }
    }

    // Sampled variety identity report.
    let ref_var = {
        let b = Budget { threads: 1, ..budget() };
        symmetric::variety_identity_check(2, 4, 8, 20_000, 3, &b).unwrap()
    };
    for threads in [4usize, 8] {
        let b = Budget { threads, ..budget() };
        let r = symmetric::variety_identity_check(2, 4, 8, 20_000, 3, &b).unwrap();
        if r.cubes_inside != ref_var.cubes_inside || r.identity_holds != ref_var.identity_holds {
            ok = false;
            details.push(format!("variety diverged at {threads} threads"));
        }
    }

    let detail = if details.is_empty() {
        "all monte_carlo results bit-identical across threads {1, 4, 8}".to_string()
    } else {
        details.join("; ")
    };
    report("criterion 9 (thread-count determinism)", ok, &detail);
}
