use std::io::Write;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use rkpos::adversary::{
    first_step_counterexample, negative_entry_counterexample, rk4_counterexample, vertex_assignment,
    CounterexampleReport,
};
use rkpos::bounds::{radius_abs_monotonicity, ssp_coefficient, stability_polynomial, RadiusResult};
use rkpos::gamma::{
    compute_gamma, default_tol, region_csv, region_scan, sample_upper_bound, sweep, sweep_csv, Condition,
    GammaCertificate, VertexTable,
};
use rkpos::molsim::{
    max_step, run, Limiter, QProvider, RunOptions, SemiDiscreteProblem, Speed, StepRule,
};
use rkpos::multilinear::DEFAULT_VAR_LIMIT;
use rkpos::polygen::{generate, StencilSpec};
use rkpos::rational::{parse_q, qi, Q};
use rkpos::tableau::{parse_method, ButcherTableau, FamilyKind};

mod reproduce;

#[derive(Parser)]
#[command(name = "rkpos", version, about = "Exact positivity step-size analysis for explicit Runge-Kutta methods")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Rational,
    Float,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Construction {
    FirstStep,
    NegativeEntry,
    Rk4,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProblemKind {
    Advection,
    Burgers,
    Constant,
    Heat,
}

#[derive(Subcommand)]
enum Command {
    /// Print the propagation polynomials P_i.
    Polys {
        #[arg(long)]
        method: String,
        #[arg(long, default_value = "upwind")]
        stencil: String,
        /// Name variables x_1..x_n in universe order.
        #[arg(long)]
        relabel: bool,
    },
    /// Certify the step-size coefficient gamma.
    Gamma {
        #[arg(long)]
        method: String,
        #[arg(long, default_value = "upwind")]
        stencil: String,
        /// Interval width below which irrational values are reported as brackets.
        #[arg(long)]
        tol: Option<String>,
        /// Also report a sampled upper bound (not a certificate).
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sweep a one-parameter family.
    Sweep {
        #[arg(long)]
        family: String,
        #[arg(long)]
        lo: String,
        #[arg(long)]
        hi: String,
        #[arg(long)]
        step: String,
        /// Second parameter held fixed (Case I sweeps alpha).
        #[arg(long)]
        beta: Option<String>,
        #[arg(long, default_value = "upwind")]
        stencil: String,
        #[arg(long)]
        ssp: bool,
        #[arg(long)]
        tol: Option<String>,
    },
    /// Scan the Case I parameter square.
    Region {
        #[arg(long, default_value = "1/32")]
        spacing: String,
    },
    /// SSP coefficient.
    Ssp {
        #[arg(long)]
        method: String,
        #[arg(long)]
        tol: Option<String>,
    },
    /// Threshold factor of absolute monotonicity of the stability polynomial.
    Rphi {
        #[arg(long)]
        method: String,
        #[arg(long)]
        tol: Option<String>,
    },
    /// Build and verify a first-step counterexample.
    Adversary {
        #[arg(long, default_value = "rk4")]
        method: String,
        #[arg(long, value_enum, default_value_t = Construction::FirstStep)]
        construction: Construction,
        #[arg(long, default_value = "upwind")]
        stencil: String,
        /// Step ratio at which the failing vertex is taken (default: the certificate witness).
        #[arg(long)]
        delta: Option<String>,
        /// Step ratio for the RK4 construction.
        #[arg(long, default_value = "1")]
        eps: String,
    },
    /// Run the semi-discretisation with a method.
    Simulate {
        #[arg(long)]
        method: String,
        #[arg(long, value_enum, default_value_t = ProblemKind::Advection)]
        problem: ProblemKind,
        #[arg(long, default_value = "minmod")]
        limiter: String,
        /// Advection speed, constant q, or diffusivity.
        #[arg(long, default_value = "1")]
        speed: String,
        #[arg(long, default_value_t = 32)]
        n: usize,
        #[arg(long, default_value = "1/32")]
        dx: String,
        /// Comma-separated rationals, or `random:SEED`.
        #[arg(long, default_value = "random:0")]
        initial: String,
        #[arg(long, conflicts_with = "cfl_fraction")]
        dt: Option<String>,
        /// Step as a fraction of gamma * tau0.
        #[arg(long)]
        cfl_fraction: Option<String>,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = Mode::Rational)]
        mode: Mode,
        #[arg(long)]
        stop_on_violation: bool,
        /// Re-evaluate tau0 on the current state each step.
        #[arg(long)]
        recompute: bool,
    },
    /// Recompute a published table and compare against the embedded values.
    Reproduce {
        #[arg(value_parser = ["erk22-table", "caseII-figure", "caseI-region", "rk4-negative", "heat-table"])]
        id: String,
    },
}

fn rational(s: &str) -> Result<Q> {
    parse_q(s).map_err(|e| anyhow!("{s:?}: {e}"))
}

fn tol_or_default(tol: &Option<String>) -> Result<Q> {
    tol.as_deref().map(rational).transpose().map(|t| t.unwrap_or_else(default_tol))
}

fn method(s: &str) -> Result<ButcherTableau> {
    if std::path::Path::new(s).is_file() {
        let text = std::fs::read_to_string(s).with_context(|| format!("reading {s}"))?;
        return Ok(ButcherTableau::from_json(&text)?);
    }
    Ok(parse_method(s)?)
}

fn stencil(s: &str) -> Result<StencilSpec> {
    Ok(StencilSpec::by_name(s)?)
}

fn opt(q: &Option<Q>) -> String {
    q.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn pretty<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn certificate_csv(c: &GammaCertificate) -> String {
    let witness = c.witness.as_ref();
    format!(
        "lower,upper,exact,zero,unbounded,witness_poly,witness_subset,witness_delta,witness_value\n{},{},{},{},{},{},{},{},{}\n",
        opt(&c.lower),
        opt(&c.upper),
        opt(&c.exact),
        c.is_zero(),
        c.unbounded,
        witness.map(|w| w.poly.to_string()).unwrap_or_default(),
        witness.map(|w| w.subset.clone()).unwrap_or_default(),
        witness.map(|w| w.delta.to_string()).unwrap_or_default(),
        witness.map(|w| w.value.to_string()).unwrap_or_default(),
    )
}

fn radius_csv(r: &RadiusResult) -> String {
    let cell = |x: Option<&Q>| x.map(|v| v.to_string()).unwrap_or_else(|| "inf".into());
    format!("exact,lo,hi\n{},{},{}\n", r.exact().map(|v| v.to_string()).unwrap_or_default(), cell(r.lo()), cell(r.hi()))
}

fn report_csv(r: &CounterexampleReport) -> String {
    let mut out = String::from("cell,initial,u1\n");
    for (k, (a, b)) in r.initial.iter().zip(&r.u1).enumerate() {
        out.push_str(&format!("{},{a},{b}\n", k + 1));
    }
    out
}

fn initial_data(spec: &str, n: usize) -> Result<Vec<Q>> {
    if let Some(seed) = spec.strip_prefix("random:") {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.parse().context("random seed")?);
        return Ok((0..n).map(|_| Q::new(rng.gen_range(0..=64).into(), 64.into())).collect());
    }
    let values = spec.split(',').map(rational).collect::<Result<Vec<_>>>()?;
    if values.len() != n {
        bail!("initial data has {} values but n = {n}", values.len());
    }
    Ok(values)
}

fn adversary_report(
    t: &ButcherTableau,
    construction: Construction,
    stencil_name: &str,
    delta: &Option<String>,
    eps: &str,
) -> Result<CounterexampleReport> {
    match construction {
        Construction::Rk4 => Ok(rk4_counterexample(&rational(eps)?)?),
        Construction::NegativeEntry => Ok(negative_entry_counterexample(t)?),
        Construction::FirstStep => {
            let s = stencil(stencil_name)?;
            let ps = generate(t, &s)?;
            let table = VertexTable::build(&ps, DEFAULT_VAR_LIMIT)?;
            let witness = match delta {
                Some(d) => match table.condition_at(&rational(d)?) {
                    Condition::Fail(w) => w,
                    Condition::Pass => bail!("every vertex value is nonnegative at delta = {d}"),
                },
                None => table
                    .certificate(&default_tol())?
                    .witness
                    .ok_or_else(|| anyhow!("gamma is unbounded; no vertex ever goes negative"))?,
            };
            Ok(first_step_counterexample(t, &s, witness.poly, &vertex_assignment(&witness.vertex, &witness.delta))?)
        }
    }
}

fn simulate_problem(
    kind: ProblemKind,
    limiter: &str,
    speed: &Q,
    n: usize,
    dx: Q,
    initial: Vec<Q>,
) -> Result<SemiDiscreteProblem> {
    let (stencil, q) = match kind {
        ProblemKind::Advection => (
            StencilSpec::upwind(),
            QProvider::Advection { speed: Speed::constant(speed.clone()), limiter: Limiter::by_name(limiter)? },
        ),
        ProblemKind::Burgers => (
            StencilSpec::upwind(),
            QProvider::ConservationLaw { flux: vec![qi(0), qi(0), Q::new(1.into(), 2.into())], limiter: Limiter::by_name(limiter)?, fprime_bound: None },
        ),
        ProblemKind::Constant => (StencilSpec::upwind(), QProvider::Constant(speed.clone())),
        ProblemKind::Heat => (StencilSpec::heat(), QProvider::Heat(vec![speed.clone(); n])),
    };
    Ok(SemiDiscreteProblem::new(dx, stencil, q, initial)?)
}

fn execute(cli: Cli) -> Result<(String, bool)> {
    let csv = cli.format == Format::Csv;
    let out = match cli.command {
        Command::Polys { method: m, stencil: s, relabel } => {
            let ps = generate(&method(&m)?, &stencil(&s)?)?;
            for w in ps.warnings() {
                eprintln!("warning: {w}");
            }
            if csv {
                let mut out = String::from("i,poly\n");
                for (i, p) in ps.polys() {
                    out.push_str(&format!("{i},\"{}\"\n", p.render(relabel)));
                }
                out
            } else {
                let vars: Vec<String> = ps.vars().iter().map(|v| v.to_string()).collect();
                let polys: Vec<_> =
                    ps.polys().iter().map(|(i, p)| json!({"i": i, "poly": p.render(relabel)})).collect();
                pretty(&json!({"vars": vars, "polys": polys}))?
            }
        }
        Command::Gamma { method: m, stencil: s, tol, samples, seed } => {
            let tol = tol_or_default(&tol)?;
            let t = method(&m)?;
            let st = stencil(&s)?;
            let c = compute_gamma(&t, &st, &tol)?;
            let sampled = match samples {
                Some(k) => Some(sample_upper_bound(&generate(&t, &st)?, k, seed, &tol)),
                None => None,
            };
            if csv {
                certificate_csv(&c)
            } else {
                pretty(&json!({"certificate": c, "sampled": sampled}))?
            }
        }
        Command::Sweep { family, lo, hi, step, beta, stencil: s, ssp, tol } => {
            let kind = FamilyKind::from_shorthand(&family).ok_or_else(|| anyhow!("unknown family {family:?}"))?;
            let beta = beta.as_deref().map(rational).transpose()?;
            let rows = sweep(
                kind,
                &rational(&lo)?,
                &rational(&hi)?,
                &rational(&step)?,
                beta.as_ref(),
                &stencil(&s)?,
                &tol_or_default(&tol)?,
                ssp,
            )?;
            if csv {
                sweep_csv(&rows)
            } else {
                pretty(&rows)?
            }
        }
        Command::Region { spacing } => {
            let cells = region_scan(&rational(&spacing)?)?;
            if csv {
                region_csv(&cells)
            } else {
                pretty(&cells)?
            }
        }
        Command::Ssp { method: m, tol } => {
            let r = ssp_coefficient(&method(&m)?, &tol_or_default(&tol)?);
            if csv {
                radius_csv(&r)
            } else {
                pretty(&r)?
            }
        }
        Command::Rphi { method: m, tol } => {
            let phi = stability_polynomial(&method(&m)?);
            let r = radius_abs_monotonicity(&phi, &tol_or_default(&tol)?);
            if csv {
                radius_csv(&r)
            } else {
                pretty(&json!({"stability_polynomial": phi.to_string(), "radius": r}))?
            }
        }
        Command::Adversary { method: m, construction, stencil: s, delta, eps } => {
            let t = method(&m)?;
            let r = adversary_report(&t, construction, &s, &delta, &eps)?;
            if csv {
                report_csv(&r)
            } else {
                r.to_json() + "\n"
            }
        }
        Command::Simulate {
            method: m,
            problem,
            limiter,
            speed,
            n,
            dx,
            initial,
            dt,
            cfl_fraction,
            steps,
            mode,
            stop_on_violation,
            recompute,
        } => {
            let t = method(&m)?;
            let p = simulate_problem(problem, &limiter, &rational(&speed)?, n, rational(&dx)?, initial_data(&initial, n)?)?;
            let rule = match (dt, cfl_fraction) {
                (Some(dt), _) => StepRule::Fixed(rational(&dt)?),
                (None, fraction) => {
                    let fraction = fraction.as_deref().map(rational).transpose()?.unwrap_or_else(|| qi(1));
                    let c = compute_gamma(&t, &p.stencil, &default_tol())?;
                    let gamma = c.exact.clone().or(c.lower.clone()).ok_or_else(|| anyhow!("gamma is unbounded"))?;
                    if recompute {
                        StepRule::Recompute(fraction * gamma)
                    } else {
                        StepRule::Fixed(fraction * max_step(&gamma, &p)?)
                    }
                }
            };
            let mut options = RunOptions::fixed(qi(0), steps);
            options.rule = rule;
            options.stop_on_violation = stop_on_violation;
            let (lines, rows) = match mode {
                Mode::Rational => {
                    let r = run::<Q>(&p, &t, &options)?;
                    (r.to_json_lines(), r.stats.iter().map(|s| format!("{},{},{},{}", s.step, s.min, s.max, s.tv)).collect::<Vec<_>>())
                }
                Mode::Float => {
                    let r = run::<f64>(&p, &t, &options)?;
                    (r.to_json_lines(), r.stats.iter().map(|s| format!("{},{:?},{:?},{:?}", s.step, s.min, s.max, s.tv)).collect::<Vec<_>>())
                }
            };
            if csv {
                format!("step,min,max,tv\n{}\n", rows.join("\n"))
            } else {
                lines
            }
        }
        Command::Reproduce { id } => {
            let checks = reproduce::run(&id)?;
            let ok = checks.iter().all(|c| c.ok());
            for c in checks.iter().filter(|c| !c.ok()) {
                eprintln!("mismatch {}: expected {}, got {}", c.name, c.expected, c.got);
            }
            let text = if csv {
                reproduce::to_csv(&checks)
            } else {
                pretty(&checks)?
            };
            return Ok((text, ok));
        }
    };
    Ok((out, true))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = std::env::var("RKPOS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("warning: {e}");
        }
    }
    match execute(cli) {
        Ok((text, ok)) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).is_err() {
                return ExitCode::FAILURE;
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
