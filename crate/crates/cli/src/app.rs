//! Subcommands and their reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use clap::{Args, Parser, Subcommand};
use num_traits::One;
use ptcws_core::calculus::Network;
use ptcws_core::gossip::{build_case, case_env, catalog, claimed_tolerance, message, CaseId};
use ptcws_core::laws::replay_at;
use ptcws_core::oracle::{
    case_row, decimal, default_horizon, exact_reachability, monte_carlo, DeliveryQuery, OracleRow, Predicate,
    CSV_HEADER,
};
use ptcws_core::quasimetric::{check_tolerance, min_quasimetric, Config, MetricError};
use ptcws_core::semantics::{check_time_properties, reachable_states, Env, SemError};
use ptcws_core::{parse_rational, to_f64, Q};

use crate::syntax::{parse, pretty, ParseError};
use crate::tolerance::parse_poly;

/// Exit status of a run.
pub mod code {
    pub const OK: i32 = 0;
    pub const FAILS: i32 = 1;
    pub const BUDGET: i32 = 2;
    pub const INPUT: i32 = 3;
}

#[derive(Parser, Debug)]
#[command(name = "ptcws", version, about = "Distances, law derivations and delivery oracles for probabilistic timed broadcast networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Gossip probability used to build catalog cases and as parameter `p` in files.
    #[arg(long, default_value = "4/5")]
    p: String,
    /// State budget; defaults to $PTCWS_STATE_BUDGET or 10000.
    #[arg(long)]
    budget: Option<usize>,
    /// Iteration budget of the distance fixed point; defaults to $PTCWS_ITER_BUDGET or 64.
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a network file and check well-formedness.
    Wf {
        file: String,
        #[arg(long, default_value = "4/5")]
        p: String,
    },
    /// Dump the reachable transition system.
    Lts {
        /// Catalog case (GSP1..GSP6, DONE1..DONE6) or network file.
        #[arg(long)]
        case: String,
        #[command(flatten)]
        common: Common,
    },
    /// Compute the simulation distance from LEFT to RIGHT.
    Distance {
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        #[command(flatten)]
        common: Common,
    },
    /// Check that LEFT is simulated by RIGHT within a tolerance polynomial in p.
    Check {
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        #[arg(long)]
        tol: String,
        #[command(flatten)]
        common: Common,
    },
    /// Replay the law derivation of a gossip case.
    Derive {
        #[arg(long)]
        case: String,
        /// Also confirm the root tolerance against the computed distance.
        #[arg(long)]
        verify: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Exact delivery bracket as CSV, optionally with a simulation.
    Oracle {
        #[arg(long)]
        case: String,
        /// Comma-separated list of probabilities.
        #[arg(long, default_value = "4/5")]
        p: String,
        #[arg(long)]
        horizon: Option<usize>,
        /// Simulated trials per row; 0 leaves the simulation columns empty.
        #[arg(long, default_value_t = 0)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        no_header: bool,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Monte Carlo delivery estimate under the uniform scheduler.
    Simulate {
        #[arg(long)]
        case: String,
        #[arg(long, default_value = "4/5")]
        p: String,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Destination node for network files.
        #[arg(long, default_value = "d")]
        dest: String,
        /// Message value for network files.
        #[arg(long, default_value = "v")]
        value: String,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// List the gossip cases, or print one as a network file.
    Catalog {
        #[arg(long)]
        print: Option<String>,
        #[arg(long, default_value = "4/5")]
        p: String,
    },
}

/// Result of a run: exit status and the two output streams.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

struct Fail(i32, String);

type R = Result<Outcome, Fail>;

fn input(msg: impl std::fmt::Display) -> Fail {
    Fail(code::INPUT, msg.to_string())
}

fn ok(stdout: String) -> R {
    Ok(Outcome { code: code::OK, stdout, stderr: String::new() })
}

fn env_usize(var: &str, default: usize) -> usize {
    std::env::var(var).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(default)
}

fn state_budget(flag: Option<usize>) -> usize {
    flag.unwrap_or_else(|| env_usize("PTCWS_STATE_BUDGET", 10_000))
}

fn config(c: &Common) -> Config {
    Config {
        state_budget: state_budget(c.budget),
        iter_budget: c.iters.unwrap_or_else(|| env_usize("PTCWS_ITER_BUDGET", 64)),
        ..Config::default()
    }
}

fn probability(s: &str) -> Result<Q, Fail> {
    match parse_rational(s) {
        Some(q) if q >= Q::from_integer(0.into()) && q <= Q::one() => Ok(q),
        _ => Err(input(format!("probability {s:?} is not a rational in [0,1]"))),
    }
}

/// A catalog case or a network file.
enum Spec {
    Case(CaseId),
    File(Network, Env),
}

fn load(spec: &str, p: &Q) -> Result<Spec, Fail> {
    if let Ok(id) = spec.parse::<CaseId>() {
        return Ok(Spec::Case(id));
    }
    let text = std::fs::read_to_string(spec).map_err(|e| input(format!("{spec}: {e}")))?;
    let over = BTreeMap::from([("p".to_string(), p.clone())]);
    let f = parse(&text, &over).map_err(|e| input(format!("{spec}: {e}")))?;
    Ok(Spec::File(f.network, f.env))
}

fn resolve(spec: &str, p: &Q) -> Result<(Network, Env), Fail> {
    Ok(match load(spec, p)? {
        Spec::Case(id) => (build_case(id, p), case_env()),
        Spec::File(m, e) => (m, e),
    })
}

fn merge(a: &Env, b: &Env) -> Env {
    Env {
        listeners: a.listeners.union(&b.listeners).cloned().collect(),
        transmitters: a.transmitters.union(&b.transmitters).cloned().collect(),
        values: a.values.union(&b.values).cloned().collect(),
    }
}

fn metric(e: MetricError) -> Fail {
    match e {
        MetricError::Semantics(SemError::Budget(_) | SemError::WeakBudget(_)) => Fail(code::BUDGET, e.to_string()),
        other => input(other),
    }
}

fn gossip_case(spec: &str) -> Result<u8, Fail> {
    match spec.parse::<CaseId>() {
        Ok(CaseId::Gsp(i)) => Ok(i),
        _ => Err(input(format!("{spec:?} is not a gossip case GSP1..GSP6"))),
    }
}

fn cmd_wf(file: &str, p: &str) -> R {
    let p = probability(p)?;
    let text = std::fs::read_to_string(file).map_err(|e| input(format!("{file}: {e}")))?;
    let over = BTreeMap::from([("p".to_string(), p)]);
    match parse(&text, &over) {
        Ok(f) => ok(format!("well-formed: {} nodes\n", f.network.nodes().len())),
        Err(ParseError::IllFormed(vs)) => {
            let mut out = String::from("ill-formed\n");
            for v in vs {
                let _ = writeln!(out, "  {v}");
            }
            Ok(Outcome { code: code::FAILS, stdout: out, stderr: String::new() })
        }
        Err(e) => Err(input(format!("{file}: {e}"))),
    }
}

fn cmd_lts(case: &str, c: &Common) -> R {
    let p = probability(&c.p)?;
    let (m, env) = resolve(case, &p)?;
    let (lts, root) = reachable_states(&m, &env, state_budget(c.budget)).map_err(|e| Fail(code::BUDGET, e.to_string()))?;
    let mut out = format!("states: {}\nroot: s{root}\n", lts.reachable_from(root).len());
    out.push_str(&lts.dump(root));
    let issues = check_time_properties(&lts, root);
    if !issues.is_empty() {
        out.push_str("time property violations:\n");
        for i in &issues {
            let _ = writeln!(out, "  {i}");
        }
    }
    ok(out)
}

fn cmd_distance(left: &str, right: &str, c: &Common) -> R {
    let p = probability(&c.p)?;
    let (m, e1) = resolve(left, &p)?;
    let (n, e2) = resolve(right, &p)?;
    let cfg = config(c);
    let qm = min_quasimetric(&merge(&e1, &e2), &[(m.clone(), n.clone())], &cfg).map_err(metric)?;
    let d = qm.distance(&m, &n).expect("root pair present");
    let out = format!(
        "distance: {d} (~{:.6})\nconverged: {}\niterations: {}\nstates: {}\n",
        to_f64(&d),
        if qm.table.converged { "yes" } else { "no" },
        qm.table.iterations,
        qm.lts.len()
    );
    let code = if qm.table.converged { code::OK } else { code::BUDGET };
    Ok(Outcome { code, stdout: out, stderr: String::new() })
}

fn cmd_check(left: &str, right: &str, tol: &str, c: &Common) -> R {
    let p = probability(&c.p)?;
    let poly = parse_poly(tol).map_err(input)?;
    let (m, e1) = resolve(left, &p)?;
    let (n, e2) = resolve(right, &p)?;
    let r = poly.eval(&p);
    let v = check_tolerance(&m, &n, &merge(&e1, &e2), &r, &config(c)).map_err(metric)?;
    let verdict = match (v.converged, v.holds) {
        (false, _) => "unknown (not converged)",
        (true, true) => "holds",
        (true, false) => "does not hold",
    };
    let out = format!(
        "{verdict}\ntolerance: {poly} = {r} (~{:.6})\ncomputed bound: {} (~{:.6})\niterations: {}\n",
        to_f64(&r),
        v.computed_bound,
        to_f64(&v.computed_bound),
        v.iterations
    );
    let code = match (v.converged, v.holds) {
        (false, _) => code::BUDGET,
        (true, true) => code::OK,
        (true, false) => code::FAILS,
    };
    Ok(Outcome { code, stdout: out, stderr: String::new() })
}

fn cmd_derive(case: &str, verify: bool, c: &Common) -> R {
    let i = gossip_case(case)?;
    let p = probability(&c.p)?;
    if p.is_one() || p == Q::from_integer(0.into()) {
        return Err(input("derivations need p strictly between 0 and 1"));
    }
    let cert = match replay_at(i, &p) {
        Ok(cert) => cert,
        Err(e) => return Ok(Outcome { code: code::FAILS, stdout: String::new(), stderr: format!("{e}\n") }),
    };
    let mut out = cert.render(&p);
    let r = cert.value(&p);
    let _ = writeln!(out, "root: DONE{i} ⊑ GSP{i}");
    let _ = writeln!(out, "root tolerance: {} = {r} (~{:.6}) at p = {p}", cert.tolerance, to_f64(&r));
    let _ = writeln!(out, "steps: {}", cert.size());
    let mut code = if cert.tolerance == claimed_tolerance(i) { code::OK } else { code::FAILS };
    if verify {
        let v = check_tolerance(&cert.left, &cert.right, &case_env(), &r, &config(c)).map_err(metric)?;
        let _ = writeln!(
            out,
            "verified: {} (computed bound {}, converged {})",
            if v.holds && v.converged { "yes" } else { "no" },
            v.computed_bound,
            v.converged
        );
        if !v.converged {
            code = code::BUDGET;
        } else if !v.holds {
            code = code::FAILS;
        }
    }
    Ok(Outcome { code, stdout: out, stderr: String::new() })
}

fn probabilities(list: &str) -> Result<Vec<Q>, Fail> {
    list.split(',').map(|s| probability(s.trim())).collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_oracle(case: &str, ps: &str, horizon: Option<usize>, trials: u64, seed: u64, header: bool, budget: Option<usize>) -> R {
    let ps = probabilities(ps)?;
    let mut out = String::new();
    if header {
        out.push_str(CSV_HEADER);
        out.push('\n');
    }
    let mut code = code::OK;
    for p in ps {
        let row = match (case.parse::<CaseId>(), horizon, budget) {
            (Ok(CaseId::Gsp(i)), None, None) => {
                case_row(i, &p, (trials > 0).then_some((trials, seed))).map_err(|e| Fail(code::BUDGET, e.to_string()))?
            }
            _ => {
                let q = query(case, &p, horizon, "d", "v", budget)?;
                let bracket = exact_reachability(&q.0).map_err(|e| Fail(code::BUDGET, e.to_string()))?;
                let estimate = if trials > 0 {
                    Some(monte_carlo(&q.0, trials, seed).map_err(|e| Fail(code::BUDGET, e.to_string()))?)
                } else {
                    None
                };
                let law_bound = match q.1 {
                    Some(i) => Q::one() - claimed_tolerance(i).eval(&p),
                    None => Q::from_integer(0.into()),
                };
                OracleRow { p: p.clone(), law_bound, bracket, estimate }
            }
        };
        if row.bracket.min < row.law_bound {
            code = code::FAILS;
        }
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    Ok(Outcome { code, stdout: out, stderr: String::new() })
}

/// The delivery query for a spec, with the gossip case index when there is one.
fn query(
    spec: &str,
    p: &Q,
    horizon: Option<usize>,
    dest: &str,
    value: &str,
    budget: Option<usize>,
) -> Result<(DeliveryQuery, Option<u8>), Fail> {
    let (mut q, case) = match load(spec, p)? {
        Spec::Case(id) => {
            let case = matches!(id, CaseId::Gsp(_)).then(|| id.index());
            (DeliveryQuery::for_case(id, p), case)
        }
        Spec::File(m, env) => {
            let pred = Predicate::delivered(dest, &ptcws_core::calculus::Value::new(value));
            (DeliveryQuery::new(m, env, pred, 3), None)
        }
    };
    if let Some(h) = horizon {
        q.horizon = h;
    }
    q.budget = state_budget(budget);
    Ok((q, case))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    case: &str,
    p: &str,
    horizon: Option<usize>,
    trials: u64,
    seed: u64,
    dest: &str,
    value: &str,
    budget: Option<usize>,
) -> R {
    let p = probability(p)?;
    let (q, _) = query(case, &p, horizon, dest, value, budget)?;
    let e = monte_carlo(&q, trials, seed).map_err(|e| match e {
        ptcws_core::oracle::OracleError::Trials | ptcws_core::oracle::OracleError::Horizon => input(e),
        other => Fail(code::BUDGET, other.to_string()),
    })?;
    ok(format!(
        "trials,successes,mc_estimate,ci_lo,ci_hi\n{},{},{:.6},{:.6},{:.6}\n",
        e.trials, e.successes, e.mean, e.ci_lo, e.ci_hi
    ))
}

fn cmd_catalog(print: Option<&str>, p: &str) -> R {
    let p = probability(p)?;
    if let Some(spec) = print {
        let id: CaseId = spec.parse().map_err(input)?;
        return ok(pretty(&build_case(id, &p), &case_env()));
    }
    let mut out = String::from("case  horizon  tolerance                              success at p  summary\n");
    for c in catalog() {
        let r = c.tolerance.eval(&p);
        let _ = writeln!(
            out,
            "{:<5} {:<8} {:<38} {:<13} {}",
            c.id.to_string(),
            default_horizon(c.id).max(c.horizon),
            c.tolerance.to_string(),
            decimal(&(Q::one() - r), 6),
            c.summary
        );
    }
    let _ = writeln!(out, "message: {}; p = {p}", message());
    ok(out)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { code::INPUT } else { code::OK };
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code, stdout: String::new(), stderr: text }
            } else {
                Outcome { code, stdout: text, stderr: String::new() }
            };
        }
    };
    let r = match &cli.command {
        Command::Wf { file, p } => cmd_wf(file, p),
        Command::Lts { case, common } => cmd_lts(case, common),
        Command::Distance { left, right, common } => cmd_distance(left, right, common),
        Command::Check { left, right, tol, common } => cmd_check(left, right, tol, common),
        Command::Derive { case, verify, common } => cmd_derive(case, *verify, common),
        Command::Oracle { case, p, horizon, trials, seed, no_header, budget } => {
            cmd_oracle(case, p, *horizon, *trials, *seed, !no_header, *budget)
        }
        Command::Simulate { case, p, horizon, trials, seed, dest, value, budget } => {
            cmd_simulate(case, p, *horizon, *trials, *seed, dest, value, *budget)
        }
        Command::Catalog { print, p } => cmd_catalog(print.as_deref(), p),
    };
    match r {
        Ok(o) => o,
        Err(Fail(code, msg)) => Outcome { code, stdout: String::new(), stderr: format!("error: {msg}\n") },
    }
}
