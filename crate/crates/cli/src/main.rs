//! Command-line front end: every library operation behind a subcommand,
//! seeds always explicit, machine-readable JSON reports on stdout.
//!
//! Exit codes: 0 success, 2 usage, 3 resource cap exceeded, 4 domain error.

use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use polydist_core::approx;
use polydist_core::error::Error;
use polydist_core::factor::{self, FactorSpecFile, GrowthFn, RankOracle, RegularityBudget};
use polydist_core::field::{Point, PrimeFieldCtx};
use polydist_core::gowers::{self, Budget};
use polydist_core::poly::{symmetric_poly, Poly};
use polydist_core::symmetric::{self, RamseyInput};
use polydist_core::verify;

#[derive(Parser)]
#[command(
    name = "polydist",
    about = "Distribution of polynomials over prime fields: norms, rank, factors, and symmetric counterexamples",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format for the result payload.
    #[arg(long, global = true, default_value = "json", value_parser = ["json", "csv"])]
    format: String,
    #[command(flatten)]
    limits: Limits,
}

#[derive(Args, Clone)]
struct Limits {
    /// Worker threads (0 = all available cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// log2 of the dense truth-table entry budget.
    #[arg(long, global = true, default_value_t = 28)]
    max_table_bits: u32,
    /// log2 of the exact-enumeration budget p^(n*order).
    #[arg(long, global = true, default_value_t = 34)]
    max_cube_bits: u32,
    /// log2 of the exhaustive weak-norm candidate budget.
    #[arg(long, global = true, default_value_t = 30)]
    max_search_bits: u32,
}

impl Limits {
    fn budget(&self) -> Budget {
        Budget {
            table_cap: 1u128 << self.max_table_bits.min(127),
            cube_cap: 1u128 << self.max_cube_bits.min(127),
            search_cap: 1u128 << self.max_search_bits.min(127),
            threads: self.threads,
        }
    }
}

#[derive(Args, Clone)]
struct FieldArgs {
    /// Prime modulus.
    #[arg(long)]
    p: u32,
    /// Ambient dimension.
    #[arg(long)]
    n: usize,
}

impl FieldArgs {
    fn ctx(&self) -> Result<PrimeFieldCtx, Error> {
        PrimeFieldCtx::new(self.p, self.n)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Gowers norm of a polynomial phase: exact, Monte Carlo, or the
    /// exhaustive weak norm.
    Norm {
        #[command(flatten)]
        field: FieldArgs,
        /// Polynomial text, or an alias S1..S8 for a symmetric polynomial.
        #[arg(long)]
        poly: String,
        /// Norm order d+1.
        #[arg(long)]
        order: usize,
        #[arg(long, value_parser = ["exact", "mc", "weak"])]
        method: String,
        /// Sample count (Monte Carlo only).
        #[arg(long)]
        samples: Option<u64>,
        /// RNG seed; required for any stochastic run.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// E_x e_F(P(x)) through exact value counts.
    Bias {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        poly: String,
    },
    /// Rank operations.
    Rank {
        #[command(subcommand)]
        cmd: RankCmd,
    },
    /// Factor operations driven by a JSON factor description.
    Factor {
        #[command(subcommand)]
        cmd: FactorCmd,
    },
    /// Derivative-sampling approximation.
    Bv {
        #[command(subcommand)]
        cmd: BvCmd,
    },
    /// Symmetric-polynomial apparatus.
    Sym {
        #[command(subcommand)]
        cmd: SymCmd,
    },
    /// Named statement-verification suites.
    Verify {
        #[command(subcommand)]
        cmd: VerifyCmd,
    },
}

#[derive(Subcommand)]
enum RankCmd {
    /// Bilinear decomposition and symmetric/symplectic rank of a quadratic.
    Quadratic {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        poly: String,
    },
    /// Bias dichotomy |E e(P)| in {0, p^(-rank/2)} for quadratics.
    GaussLaw {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        poly: String,
    },
    /// Guarded exhaustive rank search (p=2, n<=3, d<=2).
    Brute {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        poly: String,
        /// Witness degree bound.
        #[arg(long)]
        d: usize,
    },
    /// Fiber-constancy of P with respect to witness polynomials.
    Measurable {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        poly: String,
        /// Witness polynomial (repeatable).
        #[arg(long = "with")]
        witnesses: Vec<String>,
    },
}

#[derive(Subcommand)]
enum FactorCmd {
    /// Exact atom census of the evaluation map.
    Census {
        /// Path to the factor JSON file {p, n, polys: [{degree_slot, text}]}.
        #[arg(long)]
        factor: String,
    },
    /// Report all low-rank combinations under a growth requirement.
    Check {
        #[arg(long)]
        factor: String,
        /// Growth function: one value (constant) or a comma list by dimension.
        #[arg(long)]
        growth: String,
        #[arg(long, default_value = "exact-quadratic", value_parser = ["exact-quadratic", "analytic-proxy", "brute"])]
        oracle: String,
    },
    /// Refine the factor until it passes the growth requirement.
    Regularize {
        #[arg(long)]
        factor: String,
        #[arg(long)]
        growth: String,
        #[arg(long, default_value = "exact-quadratic", value_parser = ["exact-quadratic", "analytic-proxy", "brute"])]
        oracle: String,
        /// Protected position i,j (repeatable; 1-based).
        #[arg(long = "protect")]
        protected: Vec<String>,
    },
    /// Relevant lower face vectors and dim(Sigma_box) vs the closed formula.
    Faces {
        #[arg(long)]
        p: u32,
        /// Comma-separated M_1,...,M_d.
        #[arg(long)]
        dims: String,
        #[arg(long)]
        k: usize,
    },
    /// Exact parallelepiped count against a box assignment.
    CountBoxes {
        #[arg(long)]
        factor: String,
        /// Base point coordinates, comma-separated.
        #[arg(long)]
        x: String,
        #[arg(long)]
        k: usize,
        /// JSON file with 2^k rows of configuration entries; when omitted,
        /// the constant assignment t(omega) = Phi(x) is used.
        #[arg(long)]
        tbox: Option<String>,
    },
    /// Factor-degree representation of a measurable polynomial.
    Represent {
        #[arg(long)]
        factor: String,
        #[arg(long)]
        poly: String,
        #[arg(long)]
        max_weight: usize,
    },
    /// Ideal membership by linear solve: Q = sum P_i R_i.
    Ideal {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        q: String,
        /// Ideal generator (repeatable).
        #[arg(long = "gen")]
        gens: Vec<String>,
        /// Comma-separated degree bounds, one per generator.
        #[arg(long)]
        bounds: String,
    },
}

#[derive(Subcommand)]
enum BvCmd {
    /// Sample shifts and build the approximant.
    Approximate {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        poly: String,
        /// Sample count; defaults to ceil(p^5 / (2 sigma delta^2)) when
        /// --delta and --sigma are given instead.
        #[arg(long)]
        k: Option<usize>,
        /// Target bias for the default sample count.
        #[arg(long)]
        delta: Option<f64>,
        /// Target misclassification rate for the default sample count.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        seed: u64,
    },
    /// Exact agreement fraction between P and its approximant.
    Agreement {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        poly: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        seed: u64,
    },
    /// The p derived measures and their separation.
    Measures {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        poly: String,
    },
}

#[derive(Subcommand)]
enum SymCmd {
    /// Quartic derivative identity check (exhaustive for n <= 4).
    Qident {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        trials: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Distribution of the B_6 sextuple.
    B6 {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        trials: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Counts of |x| mod 8 with the multisection cross-check.
    Mod8 {
        #[arg(long)]
        n: usize,
    },
    /// Exact symmetric correlation E (-1)^(S_t + sum c_i S_i).
    Correlate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        target_d: usize,
        /// Comma-separated bits c_0,...,c_{target_d-1}.
        #[arg(long, default_value = "")]
        coeffs: String,
    },
    /// Partition lattice with Möbius values; optional derivative identity.
    Moebius {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        p: Option<u32>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        trials: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Variety identity for V = {S_1 = ... = S_p = 0}.
    Variety {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        trials: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simultaneous monochromatic extraction from a graph JSON file.
    Ramsey {
        /// Path to `{n, edges2: [[i,j]], edges3: [[i,j,k]]}` (1-indexed).
        #[arg(long)]
        graph: String,
    },
    /// Lucas factorization of S_d with optional table verification.
    Factorize {
        #[arg(long)]
        d: usize,
        /// Verify the product identity on F_2^n tables.
        #[arg(long)]
        verify_n: Option<usize>,
    },
    /// Lucas binomial coefficient mod p.
    Lucas {
        #[arg(long)]
        a: u64,
        #[arg(long)]
        b: u64,
        #[arg(long)]
        p: u32,
    },
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Nonzero polynomials vanish on at most 1 - 2^-d of points.
    Nonvanishing {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Multiple polynomial recurrence bound.
    Recurrence {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
    },
    /// U-versus-weak-norm scatter for random phases.
    InverseSmallcase {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    let start = Instant::now();
    match run(&cli) {
        Ok((command, params, result, provenance, csv)) => {
            let wall_time_ms = start.elapsed().as_millis() as u64;
            if cli.format == "csv" {
                match csv {
                    Some(rows) => print!("{rows}"),
                    None => {
                        eprintln!("error: this payload has no tabular form; use --format json");
                        std::process::exit(2);
                    }
                }
            } else {
                let report = json!({
                    "command": command,
                    "params": params,
                    "result": result,
                    "provenance": provenance,
                    "wall_time_ms": wall_time_ms,
                });
                println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Resource { .. } => 3,
                _ => 4,
            };
            std::process::exit(code);
        }
    }
}

type RunOutput = (String, Value, Value, &'static str, Option<String>);

fn parse_poly_arg(text: &str, ctx: PrimeFieldCtx) -> Result<Poly, Error> {
    if let Some(d) = text
        .strip_prefix('S')
        .and_then(|rest| rest.parse::<usize>().ok())
    {
        if (1..=8).contains(&d) {
            return symmetric_poly(ctx, d);
        }
    }
    Poly::parse(text, ctx)
}

fn parse_u8_list(text: &str) -> Result<Vec<u8>, Error> {
    if text.trim().is_empty() {
        return Ok(vec![]);
    }
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<u8>()
                .map_err(|_| Error::Domain(format!("bad list entry {t:?}")))
        })
        .collect()
}

fn parse_usize_list(text: &str) -> Result<Vec<usize>, Error> {
    if text.trim().is_empty() {
        return Ok(vec![]);
    }
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Domain(format!("bad list entry {t:?}")))
        })
        .collect()
}

fn parse_growth(text: &str) -> Result<GrowthFn, Error> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Domain(format!("bad growth value {t:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let g = if vals.len() == 1 {
        GrowthFn::Constant(vals[0])
    } else {
        GrowthFn::Table(vals)
    };
    g.validate()?;
    Ok(g)
}

fn parse_oracle(text: &str) -> RankOracle {
    match text {
        "analytic-proxy" => RankOracle::AnalyticProxy,
        "brute" => RankOracle::Brute,
        _ => RankOracle::ExactQuadratic,
    }
}

fn load_factor(path: &str) -> Result<(FactorSpecFile, factor::Factor), Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Domain(format!("cannot read {path}: {e}")))?;
    let spec: FactorSpecFile = serde_json::from_str(&text)
        .map_err(|e| Error::Domain(format!("bad factor JSON in {path}: {e}")))?;
    let f = factor::factor_from_spec(&spec)?;
    Ok((spec, f))
}

fn run(cli: &Cli) -> Result<RunOutput, Error> {
    let budget = cli.limits.budget();
    match &cli.command {
        Command::Norm {
            field,
            poly,
            order,
            method,
            samples,
            seed,
        } => {
            let ctx = field.ctx()?;
            let p = parse_poly_arg(poly, ctx)?;
            let params = json!({
                "p": field.p, "n": field.n, "poly": poly, "order": order,
                "method": method, "samples": samples, "seed": seed,
                "threads": cli.limits.threads,
            });
            match method.as_str() {
                "exact" => {
                    let r = gowers::gowers_norm_exact(&p, *order, &budget)?;
                    Ok((
                        "norm".into(),
                        params,
                        serde_json::to_value(&r).expect("serializable"),
                        "exact",
                        None,
                    ))
                }
                "mc" => {
                    let samples = samples
                        .ok_or_else(|| Error::Domain("--samples is required for mc".into()))?;
                    let seed = seed.ok_or_else(|| {
                        Error::Domain("--seed is required for any stochastic run".into())
                    })?;
                    let r = gowers::gowers_norm_mc(&p, *order, samples, seed, &budget)?;
                    Ok((
                        "norm".into(),
                        params,
                        serde_json::to_value(&r).expect("serializable"),
                        "monte_carlo",
                        None,
                    ))
                }
                _ => {
                    let table = p.truth_table(budget.table_cap)?;
                    let r = gowers::weak_norm_exhaustive(&table, *order, &budget)?;
                    Ok((
                        "norm".into(),
                        params,
                        serde_json::to_value(&r).expect("serializable"),
                        "exhaustive",
                        None,
                    ))
                }
            }
        }
        Command::Bias { field, poly } => {
            let ctx = field.ctx()?;
            let p = parse_poly_arg(poly, ctx)?;
            let r = gowers::bias(&p, &budget)?;
            Ok((
                "bias".into(),
                json!({"p": field.p, "n": field.n, "poly": poly}),
                serde_json::to_value(&r).expect("serializable"),
                "exact",
                None,
            ))
        }
        Command::Rank { cmd } => run_rank(cmd, &budget),
        Command::Factor { cmd } => run_factor(cmd, &budget),
        Command::Bv { cmd } => run_bv(cmd, &budget),
        Command::Sym { cmd } => run_sym(cmd, &budget),
        Command::Verify { cmd } => run_verify(cmd, &budget),
    }
}

fn run_rank(cmd: &RankCmd, budget: &Budget) -> Result<RunOutput, Error> {
    use polydist_core::rank;
    match cmd {
        RankCmd::Quadratic { field, poly } => {
            let ctx = field.ctx()?;
            let p = parse_poly_arg(poly, ctx)?;
            let d = rank::quadratic_decompose(&p)?;
            let matrix: Vec<Vec<u8>> = (0..ctx.n())
                .map(|i| (0..ctx.n()).map(|j| d.matrix.get(i, j)).collect())
                .collect();
            Ok((
                "rank quadratic".into(),
                json!({"p": field.p, "n": field.n, "poly": poly}),
                json!({
                    "matrix": matrix,
                    "linear": d.linear,
                    "constant": d.constant,
                    "sym_rank": d.sym_rank,
                }),
                "exact",
                None,
            ))
        }
        RankCmd::GaussLaw { field, poly } => {
            let ctx = field.ctx()?;
            let p = parse_poly_arg(poly, ctx)?;
            let r = rank::gauss_law_check(&p, budget)?;
            Ok((
                "rank gauss-law".into(),
                json!({"p": field.p, "n": field.n, "poly": poly}),
                json!({
                    "bias_magnitude": r.bias_magnitude,
                    "sym_rank": r.sym_rank,
                    "consistent": r.consistent,
                }),
                "exact",
                None,
            ))
        }
        RankCmd::Brute { field, poly, d } => {
            let ctx = field.ctx()?;
            let p = parse_poly_arg(poly, ctx)?;
            let cert = rank::brute_rank(&p, *d, budget)?;
            Ok((
                "rank brute".into(),
                json!({"p": field.p, "n": field.n, "poly": poly, "d": d}),
                json!({
                    "k": cert.k,
                    "witnesses": cert.witnesses.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
                    "replay_ok": cert.replay(&p, budget)?,
                }),
                "exhaustive",
                None,
            ))
        }
        RankCmd::Measurable {
            field,
            poly,
            witnesses,
        } => {
            let ctx = field.ctx()?;
            let p = parse_poly_arg(poly, ctx)?;
            let qs: Vec<Poly> = witnesses
                .iter()
                .map(|w| parse_poly_arg(w, ctx))
                .collect::<Result<Vec<_>, _>>()?;
            let lookup = rank::is_measurable(&p, &qs, budget)?;
            Ok((
                "rank measurable".into(),
                json!({"p": field.p, "n": field.n, "poly": poly, "witnesses": witnesses}),
                json!({
                    "measurable": lookup.is_some(),
                    "fibers": lookup.map(|l| l.len()),
                }),
                "exact",
                None,
            ))
        }
    }
}

fn run_factor(cmd: &FactorCmd, budget: &Budget) -> Result<RunOutput, Error> {
    match cmd {
        FactorCmd::Census { factor: path } => {
            let (spec, f) = load_factor(path)?;
            let census = factor::atom_census(&f, budget)?;
            let counts: Vec<Value> = census
                .counts
                .iter()
                .map(|(k, v)| json!({"config": k.entries, "count": v}))
                .collect();
            let csv = {
                let mut s = String::from("config,count\n");
                for (k, v) in &census.counts {
                    let cfg: Vec<String> = k.entries.iter().map(|e| e.to_string()).collect();
                    s.push_str(&format!("{},{v}\n", cfg.join(" ")));
                }
                s
            };
            Ok((
                "factor census".into(),
                serde_json::to_value(&spec).expect("serializable"),
                json!({
                    "atoms": counts,
                    "nonempty_atoms": census.nonempty_atoms,
                    "min_nonempty": census.min_nonempty,
                    "max_count": census.max_count,
                    "ratio": census.ratio,
                    "max_rel_deviation": census.max_rel_deviation,
                    "expected": census.expected,
                }),
                "exact",
                Some(csv),
            ))
        }
        FactorCmd::Check {
            factor: path,
            growth,
            oracle,
        } => {
            let (spec, f) = load_factor(path)?;
            let reg = RegularityBudget {
                growth: parse_growth(growth)?,
                rank_oracle: parse_oracle(oracle),
            };
            let report = factor::regularity_check(&f, &reg, budget)?;
            Ok((
                "factor check".into(),
                json!({"factor": spec, "growth": growth, "oracle": oracle}),
                json!({
                    "regular": report.is_regular(),
                    "required": report.required,
                    "violations": report.violations.iter().map(|v| json!({
                        "degree_slot": v.degree_slot,
                        "coeffs": v.coeffs,
                        "rank_estimate": v.rank_estimate,
                    })).collect::<Vec<_>>(),
                    "oracle_note": report.oracle_note,
                }),
                "exact",
                None,
            ))
        }
        FactorCmd::Regularize {
            factor: path,
            growth,
            oracle,
            protected,
        } => {
            let (spec, f) = load_factor(path)?;
            let reg = RegularityBudget {
                growth: parse_growth(growth)?,
                rank_oracle: parse_oracle(oracle),
            };
            let protected: Vec<(usize, usize)> = protected
                .iter()
                .map(|s| {
                    let parts = parse_usize_list(s)?;
                    if parts.len() != 2 {
                        return Err(Error::Domain(format!("bad protect position {s:?}")));
                    }
                    Ok((parts[0], parts[1]))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let out = factor::regularize(&f, &reg, &factor::default_decomposer, &protected, budget)?;
            let polys: Vec<Value> = out
                .labeled()
                .iter()
                .map(|(i, j, p)| json!({"degree_slot": i, "index": j, "text": p.to_string()}))
                .collect();
            Ok((
                "factor regularize".into(),
                json!({"factor": spec, "growth": growth, "oracle": oracle}),
                json!({
                    "dims": out.dims(),
                    "polys": polys,
                    "refines_input": factor::refines(&out, &f, budget)?,
                }),
                "exact",
                None,
            ))
        }
        FactorCmd::Faces { p, dims, k } => {
            let dims = parse_usize_list(dims)?;
            let basis = factor::lower_face_basis(*p, &dims, *k)?;
            Ok((
                "factor faces".into(),
                json!({"p": p, "dims": dims, "k": k}),
                json!({
                    "vectors": basis.vectors.len(),
                    "rank": basis.rank,
                    "independent": basis.independent,
                    "dim_sigma_box": basis.dim_sigma_box.to_string(),
                    "formula_dim": basis.formula_dim.to_string(),
                    "matches_formula": basis.dim_sigma_box == basis.formula_dim,
                }),
                "exact",
                None,
            ))
        }
        FactorCmd::CountBoxes {
            factor: path,
            x,
            k,
            tbox,
        } => {
            let (spec, f) = load_factor(path)?;
            let ctx = f.ctx();
            let coords = parse_u8_list(x)?;
            let point = Point::new(&ctx, coords)?;
            let t_box: Vec<factor::ConfigPoint> = match tbox {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| Error::Domain(format!("cannot read {path}: {e}")))?;
                    let rows: Vec<Vec<u8>> = serde_json::from_str(&text)
                        .map_err(|e| Error::Domain(format!("bad t_box JSON: {e}")))?;
                    rows.into_iter()
                        .map(|entries| factor::ConfigPoint { entries })
                        .collect()
                }
                None => {
                    let phi = f.eval_map(&point)?;
                    (0..(1usize << k)).map(|_| phi.clone()).collect()
                }
            };
            let r = factor::count_parallelepipeds(&f, &point, &t_box, *k, budget)?;
            Ok((
                "factor count-boxes".into(),
                json!({"factor": spec, "x": x, "k": k}),
                json!({
                    "count": r.count,
                    "expected_log_p": r.expected_log_p,
                    "expected": r.expected,
                    "ratio": r.ratio,
                }),
                "exact",
                None,
            ))
        }
        FactorCmd::Represent {
            factor: path,
            poly,
            max_weight,
        } => {
            let (spec, f) = load_factor(path)?;
            let p = parse_poly_arg(poly, f.ctx())?;
            let repr = factor::factor_degree_representation(&p, &f, *max_weight, budget)?;
            let result = match &repr {
                None => json!({"found": false}),
                Some(r) => json!({
                    "found": true,
                    "terms": r.terms.iter().map(|(s, c)| json!({
                        "exponents": s, "coeff": c,
                    })).collect::<Vec<_>>(),
                    "tuples_searched": r.tuples_searched,
                    "replay_ok": factor::replay_factor_degree(r, &p, &f, budget)?,
                }),
            };
            Ok((
                "factor represent".into(),
                json!({"factor": spec, "poly": poly, "max_weight": max_weight}),
                result,
                "exact",
                None,
            ))
        }
        FactorCmd::Ideal {
            field,
            q,
            gens,
            bounds,
        } => {
            let ctx = field.ctx()?;
            let qp = parse_poly_arg(q, ctx)?;
            let ps: Vec<Poly> = gens
                .iter()
                .map(|g| parse_poly_arg(g, ctx))
                .collect::<Result<Vec<_>, _>>()?;
            let bounds = parse_usize_list(bounds)?;
            let rs = factor::ideal_membership(&qp, &ps, &bounds, budget)?;
            let result = match &rs {
                None => json!({"found": false}),
                Some(rs) => json!({
                    "found": true,
                    "witnesses": rs.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
                    "replay_ok": factor::replay_ideal_membership(&qp, &ps, rs, budget)?,
                }),
            };
            Ok((
                "factor ideal".into(),
                json!({"p": field.p, "n": field.n, "q": q, "gens": gens, "bounds": bounds}),
                result,
                "exact",
                None,
            ))
        }
    }
}

fn resolve_k(
    p: u32,
    k: &Option<usize>,
    delta: &Option<f64>,
    sigma: &Option<f64>,
) -> Result<usize, Error> {
    match (k, delta, sigma) {
        (Some(k), _, _) => Ok(*k),
        (None, Some(d), Some(s)) if *d > 0.0 && *s > 0.0 => {
            Ok(approx::default_sample_count(p, *d, *s))
        }
        _ => Err(Error::Domain(
            "pass --k, or both --delta and --sigma for the default sample count".into(),
        )),
    }
}

fn run_bv(cmd: &BvCmd, budget: &Budget) -> Result<RunOutput, Error> {
    match cmd {
        BvCmd::Approximate {
            field,
            poly,
            k,
            delta,
            sigma,
            seed,
        } => {
            let ctx = field.ctx()?;
            let p = parse_poly_arg(poly, ctx)?;
            let k = resolve_k(field.p, k, delta, sigma)?;
            let a = approx::bv_approximate(&p, k, *seed, budget)?;
            Ok((
                "bv approximate".into(),
                json!({"p": field.p, "n": field.n, "poly": poly, "k": k,
                       "delta": delta, "sigma": sigma, "seed": seed}),
                json!({
                    "shifts": a.shifts.iter().map(|s| s.coords().to_vec()).collect::<Vec<_>>(),
                    "derivative_polys": a.derivative_polys.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
                    "measures": serde_json::to_value(&a.measures).expect("serializable"),
                }),
                "monte_carlo",
                None,
            ))
        }
        BvCmd::Agreement {
            field,
            poly,
            k,
            delta,
            sigma,
            seed,
        } => {
            let ctx = field.ctx()?;
            let p = parse_poly_arg(poly, ctx)?;
            let k = resolve_k(field.p, k, delta, sigma)?;
            let a = approx::bv_approximate(&p, k, *seed, budget)?;
            let agr = approx::agreement(&p, &a, budget)?;
            Ok((
                "bv agreement".into(),
                json!({"p": field.p, "n": field.n, "poly": poly, "k": k,
                       "delta": delta, "sigma": sigma, "seed": seed}),
                serde_json::to_value(&agr).expect("serializable"),
                "monte_carlo",
                None,
            ))
        }
        BvCmd::Measures { field, poly } => {
            let ctx = field.ctx()?;
            let p = parse_poly_arg(poly, ctx)?;
            let r = approx::derived_measures(&p, budget)?;
            let csv = {
                let mut s = String::from("r,counts\n");
                for m in &r.measures {
                    let c: Vec<String> = m.counts.iter().map(|v| v.to_string()).collect();
                    s.push_str(&format!("{},{}\n", m.r, c.join(" ")));
                }
                s
            };
            Ok((
                "bv measures".into(),
                json!({"p": field.p, "n": field.n, "poly": poly}),
                serde_json::to_value(&r).expect("serializable"),
                "exact",
                Some(csv),
            ))
        }
    }
}

fn require_seed(trials: u64, seed: Option<u64>) -> Result<u64, Error> {
    if trials == 0 {
        return Ok(seed.unwrap_or(0));
    }
    seed.ok_or_else(|| Error::Domain("--seed is required for any stochastic run".into()))
}

fn run_sym(cmd: &SymCmd, budget: &Budget) -> Result<RunOutput, Error> {
    match cmd {
        SymCmd::Qident { n, trials, seed } => {
            let seed = require_seed(if *n <= 4 { 0 } else { *trials }, *seed)?;
            let ok = symmetric::quartic_derivative_identity_check(*n, *trials, seed)?;
            Ok((
                "sym qident".into(),
                json!({"n": n, "trials": trials, "seed": seed}),
                json!({"holds": ok, "exhaustive": *n <= 4}),
                if *n <= 4 { "exhaustive" } else { "monte_carlo" },
                None,
            ))
        }
        SymCmd::B6 { n, trials, seed } => {
            let exhaustive = *n <= 32 && (1u128 << (4 * (*n).min(32))) <= budget.cube_cap;
            let seed = require_seed(if exhaustive { 0 } else { *trials }, *seed)?;
            let h = symmetric::b6_histogram(*n, *trials, seed, budget)?;
            let csv = {
                let mut s = String::from("cell,count\n");
                for (i, c) in h.counts.iter().enumerate() {
                    s.push_str(&format!("{i},{c}\n"));
                }
                s
            };
            Ok((
                "sym b6".into(),
                json!({"n": n, "trials": trials, "seed": seed}),
                serde_json::to_value(&h).expect("serializable"),
                if h.exhaustive { "exhaustive" } else { "monte_carlo" },
                Some(csv),
            ))
        }
        SymCmd::Mod8 { n } => {
            let r = symmetric::mod8_profile(*n)?;
            let csv = {
                let mut s = String::from("residue,count,fraction,multisection\n");
                for a in 0..8 {
                    s.push_str(&format!(
                        "{a},{},{},{}\n",
                        r.counts[a], r.fractions[a], r.multisection[a]
                    ));
                }
                s
            };
            Ok((
                "sym mod8".into(),
                json!({"n": n}),
                serde_json::to_value(&r).expect("serializable"),
                "exact",
                Some(csv),
            ))
        }
        SymCmd::Correlate {
            n,
            target_d,
            coeffs,
        } => {
            let c = parse_u8_list(coeffs)?;
            let r = symmetric::symmetric_correlation(*n, *target_d, &c)?;
            Ok((
                "sym correlate".into(),
                json!({"n": n, "target_d": target_d, "coeffs": c}),
                serde_json::to_value(&r).expect("serializable"),
                "exact",
                None,
            ))
        }
        SymCmd::Moebius {
            d,
            p,
            n,
            trials,
            seed,
        } => {
            let parts = symmetric::partitions_and_moebius(*d)?;
            let inversion_ok = if *d <= 8 {
                Some(symmetric::moebius_inversion_check(*d)?)
            } else {
                None
            };
            let derivative_identity = match (p, n) {
                (Some(p), Some(n)) => {
                    let seed = require_seed(*trials, *seed)?;
                    Some(symmetric::moebius_derivative_identity_check(
                        *p, *d, *n, *trials, seed,
                    )?)
                }
                _ => None,
            };
            Ok((
                "sym moebius".into(),
                json!({"d": d, "p": p, "n": n, "trials": trials, "seed": seed}),
                json!({
                    "partitions": parts.len(),
                    "moebius": parts.iter().take(64).map(|(part, mu)| json!({
                        "blocks": part.blocks, "mu": mu,
                    })).collect::<Vec<_>>(),
                    "inversion_ok": inversion_ok,
                    "derivative_identity_holds": derivative_identity,
                }),
                "exact",
                None,
            ))
        }
        SymCmd::Variety {
            p,
            d,
            n,
            trials,
            seed,
        } => {
            let seed = require_seed(*trials, *seed)?;
            let r = symmetric::variety_identity_check(*p, *d, *n, *trials, seed, budget)?;
            Ok((
                "sym variety".into(),
                json!({"p": p, "d": d, "n": n, "trials": trials, "seed": seed}),
                serde_json::to_value(&r).expect("serializable"),
                if *trials == 0 { "exhaustive" } else { "monte_carlo" },
                None,
            ))
        }
        SymCmd::Ramsey { graph } => {
            let text = std::fs::read_to_string(graph)
                .map_err(|e| Error::Domain(format!("cannot read {graph}: {e}")))?;
            let input: RamseyInput = serde_json::from_str(&text)
                .map_err(|e| Error::Domain(format!("bad graph JSON: {e}")))?;
            let r = symmetric::simultaneous_ramsey(&input)?;
            Ok((
                "sym ramsey".into(),
                json!({"graph": graph, "n": input.n,
                       "edges2": input.edges2.len(), "edges3": input.edges3.len()}),
                serde_json::to_value(&r).expect("serializable"),
                "exact",
                None,
            ))
        }
        SymCmd::Factorize { d, verify_n } => {
            let f = symmetric::sd_factorization(*d)?;
            let verified = match (verify_n, &f) {
                (Some(n), symmetric::SdFactorization::Product { .. }) => {
                    Some(symmetric::verify_sd_factorization(*n, *d, budget)?)
                }
                _ => None,
            };
            Ok((
                "sym factorize".into(),
                json!({"d": d, "verify_n": verify_n}),
                json!({
                    "factorization": serde_json::to_value(f).expect("serializable"),
                    "table_verified": verified,
                }),
                "exact",
                None,
            ))
        }
        SymCmd::Lucas { a, b, p } => Ok((
            "sym lucas".into(),
            json!({"a": a, "b": b, "p": p}),
            json!({"value": symmetric::lucas_binomial(*a, *b, *p)}),
            "exact",
            None,
        )),
    }
}

fn run_verify(cmd: &VerifyCmd, budget: &Budget) -> Result<RunOutput, Error> {
    match cmd {
        VerifyCmd::Nonvanishing {
            p,
            d,
            n,
            trials,
            seed,
        } => {
            let r = verify::suite_nonvanishing(*p, *d, *n, *trials, *seed, budget)?;
            Ok((
                "verify nonvanishing".into(),
                json!({"p": p, "d": d, "n": n, "trials": trials, "seed": seed}),
                serde_json::to_value(&r).expect("serializable"),
                "monte_carlo",
                None,
            ))
        }
        VerifyCmd::Recurrence {
            p,
            d,
            k,
            n,
            trials,
            seed,
        } => {
            let r = verify::suite_recurrence(*p, *d, *k, *n, *trials, *seed, budget)?;
            Ok((
                "verify recurrence".into(),
                json!({"p": p, "d": d, "k": k, "n": n, "trials": trials, "seed": seed}),
                serde_json::to_value(&r).expect("serializable"),
                "monte_carlo",
                None,
            ))
        }
        VerifyCmd::InverseSmallcase {
            p,
            d,
            n,
            trials,
            seed,
        } => {
            let r = verify::suite_inverse_smallcase(*p, *d, *n, *trials, *seed, budget)?;
            let csv = {
                let mut s = String::from("u_norm,weak_norm\n");
                for (u, w) in &r.points {
                    s.push_str(&format!("{u},{w}\n"));
                }
                s
            };
            Ok((
                "verify inverse-smallcase".into(),
                json!({"p": p, "d": d, "n": n, "trials": trials, "seed": seed}),
                serde_json::to_value(&r).expect("serializable"),
                "monte_carlo",
                Some(csv),
            ))
        }
    }
}
