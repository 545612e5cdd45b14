//! Delivery probabilities by exact finite-horizon reachability and by Monte Carlo
//! simulation, both over the explicit transition graph.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::calculus::{head, name, Name, Network, Process, Term, Value};
use crate::gossip::{build_case, case_env, claimed_tolerance, message, CaseId};
use crate::semantics::{reachable_states, Env, Label, Lts, SemError, StateId};
use crate::{to_f64, Q};

/// Success condition on canonical networks.
#[derive(Clone)]
pub enum Predicate {
    /// `dest` is bound to broadcast `value`, possibly after some σ-delays.
    Delivered { dest: Name, value: Value },
    Never,
    Custom(Arc<dyn Fn(&Network) -> bool + Send + Sync>),
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Delivered { dest, value } => write!(f, "Delivered({dest}, {value})"),
            Predicate::Never => f.write_str("Never"),
            Predicate::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Whether `p` broadcasts `v` on every resolution before doing anything else observable.
pub fn certain_sender(p: &Process, v: &Value) -> bool {
    match head(p) {
        Process::Bcast(Term::Val(w), _) => &w == v,
        Process::Sigma(c) => c.as_det().is_some_and(|q| certain_sender(q, v)),
        Process::Tau(c) => c.branches().iter().all(|(_, q)| certain_sender(q, v)),
        _ => false,
    }
}

impl Predicate {
    pub fn delivered(dest: &str, value: &Value) -> Self {
        Predicate::Delivered { dest: name(dest), value: value.clone() }
    }

    pub fn holds(&self, m: &Network) -> bool {
        match self {
            Predicate::Delivered { dest, value } => m.node(dest).is_some_and(|n| certain_sender(&n.proc, value)),
            Predicate::Never => false,
            Predicate::Custom(f) => f(m),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DeliveryQuery {
    pub network: Network,
    pub env: Env,
    pub predicate: Predicate,
    /// Number of σ-rounds allowed.
    pub horizon: usize,
    pub budget: usize,
}

/// Rounds needed by the catalog cases.
pub fn default_horizon(id: CaseId) -> usize {
    if id.index() == 6 {
        5
    } else {
        3
    }
}

impl DeliveryQuery {
    pub fn new(network: Network, env: Env, predicate: Predicate, horizon: usize) -> Self {
        DeliveryQuery { network, env, predicate, horizon, budget: 10_000 }
    }

    /// Delivery to `d` in a catalog network.
    pub fn for_case(id: CaseId, p: &Q) -> Self {
        DeliveryQuery::new(build_case(id, p), case_env(), Predicate::delivered("d", &message()), default_horizon(id))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bracket {
    pub min: Q,
    pub max: Q,
    pub states: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Semantics(#[from] SemError),
    #[error("horizon must be at least 1")]
    Horizon,
    #[error("instantaneous cycle through state {0}")]
    Cycle(StateId),
    #[error("trials must be at least 1")]
    Trials,
}

fn explore(q: &DeliveryQuery) -> Result<(Lts, StateId), OracleError> {
    if q.horizon == 0 {
        return Err(OracleError::Horizon);
    }
    Ok(reachable_states(&q.network, &q.env, q.budget)?)
}

/// Steps a scheduler may pick: everything except receptions from outside.
fn choosable(lts: &Lts, s: StateId) -> impl Iterator<Item = &crate::semantics::Step> {
    lts.steps(s).iter().filter(|st| !matches!(st.label, Label::Rcv { .. }))
}

struct Solver<'a> {
    lts: &'a Lts,
    goal: Vec<bool>,
    horizon: usize,
    maximize: bool,
    memo: HashMap<(StateId, usize), Q>,
    active: Vec<(StateId, usize)>,
}

impl Solver<'_> {
    fn value(&mut self, s: StateId, round: usize) -> Result<Q, OracleError> {
        if self.goal[s] {
            return Ok(Q::one());
        }
        if let Some(v) = self.memo.get(&(s, round)) {
            return Ok(v.clone());
        }
        if self.active.contains(&(s, round)) {
            return Err(OracleError::Cycle(s));
        }
        self.active.push((s, round));
        let mut best: Option<Q> = None;
        let steps: Vec<_> = choosable(self.lts, s).cloned().collect();
        for st in steps {
            let next = if st.label == Label::Sigma { round + 1 } else { round };
            let v = if next > self.horizon {
                Q::zero()
            } else {
                let mut acc = Q::zero();
                for (t, w) in &st.dist {
                    acc += w * self.value(*t, next)?;
                }
                acc
            };
            best = Some(match best {
                None => v,
                Some(b) if (self.maximize && v > b) || (!self.maximize && v < b) => v,
                Some(b) => b,
            });
        }
        self.active.pop();
        let v = best.unwrap_or_else(Q::zero);
        self.memo.insert((s, round), v.clone());
        Ok(v)
    }
}

/// Minimum and maximum probability, over schedulers, of meeting the predicate within the horizon.
pub fn exact_reachability(q: &DeliveryQuery) -> Result<Bracket, OracleError> {
    let (lts, root) = explore(q)?;
    let goal: Vec<bool> = (0..lts.len()).map(|s| q.predicate.holds(lts.network(s))).collect();
    let mut out = Vec::new();
    for maximize in [false, true] {
        let mut solver =
            Solver { lts: &lts, goal: goal.clone(), horizon: q.horizon, maximize, memo: HashMap::new(), active: Vec::new() };
        out.push(solver.value(root, 0)?);
    }
    let max = out.pop().expect("two passes");
    let min = out.pop().expect("two passes");
    Ok(Bracket { min, max, states: lts.len() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub trials: u64,
    pub successes: u64,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Estimate {
    /// Standard error of the sample mean.
    pub fn sigma(&self) -> f64 {
        (self.mean * (1.0 - self.mean) / self.trials as f64).sqrt()
    }
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = phat + z2 / (2.0 * n);
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    (((centre - half) / denom).max(0.0), ((centre + half) / denom).min(1.0))
}

const Z95: f64 = 1.959_963_984_540_054;
const STEP_CAP: usize = 100_000;

fn sample_index<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

/// A step the walker may choose: whether it advances time, targets and their weights.
type Move = (bool, Vec<StateId>, Vec<f64>);

struct Walker {
    goal: Vec<bool>,
    moves: Vec<Vec<Move>>,
    horizon: usize,
}

impl Walker {
    fn run(&self, root: StateId, seed: u64, trial: u64) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        let (mut s, mut round) = (root, 0usize);
        for _ in 0..STEP_CAP {
            if self.goal[s] {
                return true;
            }
            let moves = &self.moves[s];
            if moves.is_empty() {
                return false;
            }
            let (tick, targets, weights) = &moves[rng.gen_range(0..moves.len())];
            if *tick {
                round += 1;
                if round > self.horizon {
                    return false;
                }
            }
            s = targets[sample_index(&mut rng, weights)];
        }
        false
    }
}

/// Uniform-scheduler simulation; trial `i` draws from stream `i` of a generator seeded by `seed`.
pub fn monte_carlo(q: &DeliveryQuery, trials: u64, seed: u64) -> Result<Estimate, OracleError> {
    if trials == 0 {
        return Err(OracleError::Trials);
    }
    let (lts, root) = explore(q)?;
    let goal: Vec<bool> = (0..lts.len()).map(|s| q.predicate.holds(lts.network(s))).collect();
    let moves = (0..lts.len())
        .map(|s| {
            if !lts.is_explored(s) {
                return Vec::new();
            }
            choosable(&lts, s)
                .map(|st| {
                    (
                        st.label == Label::Sigma,
                        st.dist.iter().map(|(t, _)| *t).collect(),
                        st.dist.iter().map(|(_, w)| to_f64(w)).collect(),
                    )
                })
                .collect()
        })
        .collect();
    let walker = Walker { goal, moves, horizon: q.horizon };
    let successes: u64 = (0..trials).into_par_iter().map(|t| walker.run(root, seed, t) as u64).sum();
    let mean = successes as f64 / trials as f64;
    let (ci_lo, ci_hi) = wilson(successes, trials, Z95);
    Ok(Estimate { trials, successes, mean, ci_lo, ci_hi })
}

/// Column names of [`OracleRow::to_csv`].
pub const CSV_HEADER: &str = "p,law_bound,exact_min,exact_max,mc_estimate,ci_lo,ci_hi";

/// One line of the delivery report. All probabilities are of success.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleRow {
    pub p: Q,
    pub law_bound: Q,
    pub bracket: Bracket,
    pub estimate: Option<Estimate>,
}

/// `x` rounded down to `digits` decimals, computed exactly.
pub fn decimal(x: &Q, digits: u32) -> String {
    let scale = num_bigint::BigInt::from(10).pow(digits);
    let neg = *x < Q::zero();
    let a = if neg { -x.clone() } else { x.clone() };
    let scaled = (a * Q::from_integer(scale.clone())).floor().to_integer();
    let int = &scaled / &scale;
    let frac = (&scaled % &scale).to_string();
    let pad = "0".repeat(digits as usize - frac.len());
    format!("{}{int}.{pad}{frac}", if neg && !scaled.is_zero() { "-" } else { "" })
}

impl OracleRow {
    pub fn to_csv(&self) -> String {
        let (mc, lo, hi) = match &self.estimate {
            Some(e) => (format!("{:.6}", e.mean), format!("{:.6}", e.ci_lo), format!("{:.6}", e.ci_hi)),
            None => (String::new(), String::new(), String::new()),
        };
        format!(
            "{},{},{},{},{mc},{lo},{hi}",
            decimal(&self.p, 6),
            decimal(&self.law_bound, 6),
            decimal(&self.bracket.min, 6),
            decimal(&self.bracket.max, 6)
        )
    }
}

/// Law bound, exact bracket and optionally a simulation for a gossip case.
pub fn case_row(case: u8, p: &Q, simulate: Option<(u64, u64)>) -> Result<OracleRow, OracleError> {
    let q = DeliveryQuery::for_case(CaseId::Gsp(case), p);
    let tol = claimed_tolerance(case).eval(p);
    let law_bound = if tol > Q::one() { Q::zero() } else { Q::one() - tol };
    let bracket = exact_reachability(&q)?;
    let estimate = match simulate {
        Some((trials, seed)) => Some(monte_carlo(&q, trials, seed)?),
        None => None,
    };
    Ok(OracleRow { p: p.clone(), law_bound, bracket, estimate })
}
