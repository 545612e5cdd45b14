//! Kantorovich lifting and the weak simulation quasimetric as an iterated fixed point.
//!
//! Iteration starts from the zero table with `d(M,⊥) = 1` and `d(⊥,N) = 0`.
//! Each sweep recomputes `d(M,N)` as the maximum over strong steps `M →α Δ`
//! of the cheapest weak answer `N ⇒̂α Θ`, priced by the Kantorovich lifting of
//! the previous table with `Θ` padded to mass one by `⊥`.
//!
//! Answers to a Dirac step `M →α M̄′` are optimized exactly by dynamic
//! programming over the τ-graph of `N`. Answers to a step with a larger
//! support enumerate deterministic-scheduler weak derivatives up to
//! cost-equivalence and also consider mixtures of per-point optimal answers.
//! Every answer considered is a genuine weak transition, so the computed
//! table bounds the minimal quasimetric from above.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::calculus::Network;
use crate::semantics::{Env, Label, Lts, SemError, StateId, SubDist, WeakEnumerator, STUCK};
use crate::transport::{self, TransportError};
use crate::Q;

#[derive(Clone, Debug)]
pub struct Config {
    pub state_budget: usize,
    pub iter_budget: usize,
    /// Cap on enumerated answer profiles per state before falling back to mixtures.
    pub profile_limit: usize,
    pub parallel: bool,
    pub keep_history: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config { state_budget: 10_000, iter_budget: 64, profile_limit: 4_000, parallel: true, keep_history: false }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error(transparent)]
    Semantics(#[from] SemError),
    #[error("cycle of instantaneous actions through state s{0}")]
    TauCycle(StateId),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Joint distribution over state pairs with prescribed marginals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    pub joint: Vec<((StateId, StateId), Q)>,
}

/// Converged (or budget-truncated) distances over a closed set of pairs.
#[derive(Clone, Debug)]
pub struct DistanceTable {
    pub pairs: Vec<(StateId, StateId)>,
    index: HashMap<(StateId, StateId), usize>,
    pub values: Vec<Q>,
    pub iterations: usize,
    pub converged: bool,
}

impl DistanceTable {
    pub fn get(&self, a: StateId, b: StateId) -> Option<&Q> {
        self.index.get(&(a, b)).map(|&i| &self.values[i])
    }

    pub fn set(&mut self, a: StateId, b: StateId, v: Q) {
        if let Some(&i) = self.index.get(&(a, b)) {
            self.values[i] = v;
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToleranceVerdict {
    pub holds: bool,
    pub computed_bound: Q,
    pub requested: Q,
    pub converged: bool,
    pub iterations: usize,
}

/// Optimal cost with the joint mass of each matched pair.
pub type Lifting<T> = (Q, Vec<(T, T, Q)>);

/// Kantorovich lifting of `cost` between two distributions of equal mass.
pub fn kantorovich<T: Ord + Clone>(
    cost: impl Fn(&T, &T) -> Q,
    delta: &SubDist<T>,
    theta: &SubDist<T>,
) -> Result<Lifting<T>, TransportError> {
    let rows: Vec<(&T, &Q)> = delta.iter().collect();
    let cols: Vec<(&T, &Q)> = theta.iter().collect();
    let supply: Vec<Q> = rows.iter().map(|(_, w)| (*w).clone()).collect();
    let demand: Vec<Q> = cols.iter().map(|(_, w)| (*w).clone()).collect();
    let c: Vec<Vec<Q>> = rows.iter().map(|(a, _)| cols.iter().map(|(b, _)| cost(a, b)).collect()).collect();
    let plan = transport::solve(&supply, &demand, &c)?;
    let joint = plan.flows.into_iter().map(|(i, j, f)| (rows[i].0.clone(), cols[j].0.clone(), f)).collect();
    Ok((plan.cost, joint))
}

type Dist = Vec<(StateId, Q)>;

/// Label-indexed view of the explored graph.
struct Graph {
    labels: Vec<Label>,
    tau: Vec<Vec<Dist>>,
    visible: Vec<Vec<(usize, Dist)>>,
    all: Vec<Vec<(usize, Dist)>>,
}

const TAU: usize = 0;

impl Graph {
    fn new(lts: &Lts) -> Self {
        let mut labels = vec![Label::Tau];
        let mut ids: HashMap<Label, usize> = HashMap::from([(Label::Tau, TAU)]);
        let n = lts.len();
        let (mut tau, mut visible, mut all) = (vec![Vec::new(); n], vec![Vec::new(); n], vec![Vec::new(); n]);
        for s in 0..n {
            if !lts.is_explored(s) {
                continue;
            }
            for st in lts.steps(s) {
                let id = *ids.entry(st.label.clone()).or_insert_with(|| {
                    labels.push(st.label.clone());
                    labels.len() - 1
                });
                if id == TAU {
                    tau[s].push(st.dist.clone());
                } else {
                    visible[s].push((id, st.dist.clone()));
                }
                all[s].push((id, st.dist.clone()));
            }
        }
        Graph { labels, tau, visible, all }
    }

    fn can(&self, s: StateId, a: usize) -> bool {
        self.visible[s].iter().any(|(l, _)| *l == a)
    }

    fn tau_closure(&self, s: StateId, memo: &mut HashMap<StateId, BTreeSet<StateId>>) -> BTreeSet<StateId> {
        if let Some(c) = memo.get(&s) {
            return c.clone();
        }
        let mut seen = BTreeSet::from([s]);
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for d in &self.tau[u] {
                for &(t, _) in d {
                    if seen.insert(t) {
                        stack.push(t);
                    }
                }
            }
        }
        memo.insert(s, seen.clone());
        seen
    }

    fn weak_targets(&self, s: StateId, a: usize, memo: &mut HashMap<StateId, BTreeSet<StateId>>) -> BTreeSet<StateId> {
        let pre = self.tau_closure(s, memo);
        if a == TAU {
            return pre;
        }
        let mut out = BTreeSet::new();
        for u in pre {
            for (l, d) in &self.visible[u] {
                if *l == a {
                    for &(t, _) in d {
                        out.extend(self.tau_closure(t, memo));
                    }
                }
            }
        }
        out
    }
}

fn bot_cost(g: &Graph, m: StateId) -> Q {
    if m == STUCK || g.all[m].is_empty() {
        Q::zero()
    } else {
        Q::one()
    }
}

/// Read-only view of the previous iterate.
struct View<'a> {
    g: &'a Graph,
    table: &'a DistanceTable,
}

impl View<'_> {
    fn d(&self, m: StateId, n: StateId) -> Q {
        if m == n || m == STUCK {
            return Q::zero();
        }
        if n == STUCK {
            return bot_cost(self.g, m);
        }
        self.table.get(m, n).cloned().unwrap_or_else(|| panic!("pair (s{m}, s{n}) missing from the closure"))
    }
}

/// A weak answer up to cost-equivalence: mass per cost vector plus one representative.
#[derive(Clone)]
struct Cand {
    profile: BTreeMap<Vec<Q>, Q>,
    theta: BTreeMap<StateId, Q>,
}

struct Truncated;

/// Per-sweep memo tables.
struct Solver<'a> {
    v: View<'a>,
    limit: usize,
    post: HashMap<(StateId, StateId), Q>,
    pre: HashMap<(StateId, usize, StateId), Q>,
    stack: Vec<StateId>,
    cyc: Option<StateId>,
}

impl<'a> Solver<'a> {
    fn new(v: View<'a>, limit: usize) -> Self {
        Solver { v, limit, post: HashMap::new(), pre: HashMap::new(), stack: Vec::new(), cyc: None }
    }

    fn guard(&mut self, s: StateId) -> bool {
        if self.stack.contains(&s) {
            self.cyc = Some(s);
            return false;
        }
        true
    }

    /// `min { K(d)(M̄′, Θ) : t̄ ⇒̂τ Θ }`.
    fn v_post(&mut self, m: StateId, t: StateId) -> Q {
        if let Some(x) = self.post.get(&(m, t)) {
            return x.clone();
        }
        let mut best = self.v.d(m, t);
        if !best.is_zero() && self.guard(t) {
            self.stack.push(t);
            let g = self.v.g;
            for d in &g.tau[t] {
                let mut s = Q::zero();
                for (u, w) in d {
                    s += w * self.v_post(m, *u);
                }
                if s < best {
                    best = s;
                }
            }
            self.stack.pop();
        }
        self.post.insert((m, t), best.clone());
        best
    }

    /// `min { K(d)(M̄′, Θ ⊕ ⊥) : t̄ ⇒̂α Θ }` for visible `α`.
    fn v_pre(&mut self, m: StateId, a: usize, t: StateId) -> Q {
        if let Some(x) = self.pre.get(&(m, a, t)) {
            return x.clone();
        }
        let g = self.v.g;
        let mut best = if g.can(t, a) {
            let mut b: Option<Q> = None;
            for (l, d) in &g.visible[t] {
                if *l != a {
                    continue;
                }
                let mut s = Q::zero();
                for (u, w) in d {
                    s += w * self.v_post(m, *u);
                }
                if b.as_ref().is_none_or(|x| s < *x) {
                    b = Some(s);
                }
            }
            b.unwrap()
        } else {
            bot_cost(g, m)
        };
        if !best.is_zero() && self.guard(t) {
            self.stack.push(t);
            for d in &g.tau[t] {
                let mut s = Q::zero();
                for (u, w) in d {
                    s += w * self.v_pre(m, a, *u);
                }
                if s < best {
                    best = s;
                }
            }
            self.stack.pop();
        }
        self.pre.insert((m, a, t), best.clone());
        best
    }

    fn dirac(&mut self, m: StateId, a: usize, n: StateId) -> Q {
        if a == TAU {
            self.v_post(m, n)
        } else {
            self.v_pre(m, a, n)
        }
    }

    fn costs(&self, support: &[StateId], t: StateId) -> Vec<Q> {
        support.iter().map(|&m| self.v.d(m, t)).collect()
    }

    fn combine(&self, parts: Vec<(Q, std::rc::Rc<Vec<Cand>>)>) -> Result<Vec<Cand>, Truncated> {
        let mut acc: Vec<Cand> = vec![Cand { profile: BTreeMap::new(), theta: BTreeMap::new() }];
        for (w, set) in parts {
            let mut next: BTreeMap<BTreeMap<Vec<Q>, Q>, BTreeMap<StateId, Q>> = BTreeMap::new();
            for a in &acc {
                for c in set.iter() {
                    let mut p = a.profile.clone();
                    for (k, x) in &c.profile {
                        *p.entry(k.clone()).or_insert_with(Q::zero) += x * &w;
                    }
                    if next.contains_key(&p) {
                        continue;
                    }
                    let mut th = a.theta.clone();
                    for (k, x) in &c.theta {
                        *th.entry(*k).or_insert_with(Q::zero) += x * &w;
                    }
                    next.insert(p, th);
                }
                if next.len() > self.limit {
                    return Err(Truncated);
                }
            }
            acc = next.into_iter().map(|(profile, theta)| Cand { profile, theta }).collect();
        }
        Ok(acc)
    }

    fn w_post(
        &mut self,
        support: &[StateId],
        t: StateId,
        memo: &mut HashMap<StateId, std::rc::Rc<Vec<Cand>>>,
    ) -> Result<std::rc::Rc<Vec<Cand>>, Truncated> {
        if let Some(x) = memo.get(&t) {
            return Ok(x.clone());
        }
        let g = self.v.g;
        let mut out: BTreeMap<BTreeMap<Vec<Q>, Q>, BTreeMap<StateId, Q>> = BTreeMap::new();
        out.insert(BTreeMap::from([(self.costs(support, t), Q::one())]), BTreeMap::from([(t, Q::one())]));
        if self.guard(t) {
            self.stack.push(t);
            for d in &g.tau[t] {
                let mut parts = Vec::new();
                for (u, w) in d {
                    parts.push((w.clone(), self.w_post(support, *u, memo)?));
                }
                for c in self.combine(parts)? {
                    out.entry(c.profile).or_insert(c.theta);
                }
                if out.len() > self.limit {
                    return Err(Truncated);
                }
            }
            self.stack.pop();
        }
        let res = std::rc::Rc::new(out.into_iter().map(|(profile, theta)| Cand { profile, theta }).collect());
        memo.insert(t, std::rc::Rc::clone(&res));
        Ok(res)
    }

    fn w_pre(
        &mut self,
        support: &[StateId],
        a: usize,
        t: StateId,
        post: &mut HashMap<StateId, std::rc::Rc<Vec<Cand>>>,
        memo: &mut HashMap<StateId, std::rc::Rc<Vec<Cand>>>,
    ) -> Result<std::rc::Rc<Vec<Cand>>, Truncated> {
        if let Some(x) = memo.get(&t) {
            return Ok(x.clone());
        }
        let g = self.v.g;
        let mut out: BTreeMap<BTreeMap<Vec<Q>, Q>, BTreeMap<StateId, Q>> = BTreeMap::new();
        if g.can(t, a) {
            for (l, d) in &g.visible[t] {
                if *l != a {
                    continue;
                }
                let mut parts = Vec::new();
                for (u, w) in d {
                    parts.push((w.clone(), self.w_post(support, *u, post)?));
                }
                for c in self.combine(parts)? {
                    out.entry(c.profile).or_insert(c.theta);
                }
            }
        } else {
            let bot: Vec<Q> = support.iter().map(|&m| bot_cost(g, m)).collect();
            out.insert(BTreeMap::from([(bot, Q::one())]), BTreeMap::from([(STUCK, Q::one())]));
        }
        if self.guard(t) {
            self.stack.push(t);
            for d in &g.tau[t] {
                let mut parts = Vec::new();
                for (u, w) in d {
                    parts.push((w.clone(), self.w_pre(support, a, *u, post, memo)?));
                }
                for c in self.combine(parts)? {
                    out.entry(c.profile).or_insert(c.theta);
                }
                if out.len() > self.limit {
                    return Err(Truncated);
                }
            }
            self.stack.pop();
        }
        let res = std::rc::Rc::new(out.into_iter().map(|(profile, theta)| Cand { profile, theta }).collect());
        memo.insert(t, std::rc::Rc::clone(&res));
        Ok(res)
    }

    /// Cheapest priced answer among enumerated profiles.
    fn best_profile(&mut self, delta: &Dist, a: usize, n: StateId) -> Result<Option<(Q, Cand)>, Truncated> {
        let depth = self.stack.len();
        let r = self.best_profile_inner(delta, a, n);
        self.stack.truncate(depth);
        r
    }

    fn best_profile_inner(&mut self, delta: &Dist, a: usize, n: StateId) -> Result<Option<(Q, Cand)>, Truncated> {
        let support: Vec<StateId> = delta.iter().map(|(m, _)| *m).collect();
        let mut post = HashMap::new();
        let cands = if a == TAU {
            self.w_post(&support, n, &mut post)?
        } else {
            let mut memo = HashMap::new();
            self.w_pre(&support, a, n, &mut post, &mut memo)?
        };
        let supply: Vec<Q> = delta.iter().map(|(_, w)| w.clone()).collect();
        let bot: Vec<Q> = support.iter().map(|&m| bot_cost(self.v.g, m)).collect();
        let mut best: Option<(Q, Cand)> = None;
        for c in cands.iter() {
            let mass = c.profile.values().fold(Q::zero(), |x, y| x + y);
            let mut prof = c.profile.clone();
            let mut theta = c.theta.clone();
            if mass < Q::one() {
                let gap = Q::one() - &mass;
                *prof.entry(bot.clone()).or_insert_with(Q::zero) += &gap;
                *theta.entry(STUCK).or_insert_with(Q::zero) += gap;
            }
            let keys: Vec<&Vec<Q>> = prof.keys().collect();
            let demand: Vec<Q> = prof.values().cloned().collect();
            let cost: Vec<Vec<Q>> = (0..support.len()).map(|i| keys.iter().map(|k| k[i].clone()).collect()).collect();
            let plan = transport::solve(&supply, &demand, &cost).expect("marginals agree");
            if best.as_ref().is_none_or(|(b, _)| plan.cost < *b) {
                let done = plan.cost.is_zero();
                best = Some((plan.cost, Cand { profile: prof, theta }));
                if done {
                    break;
                }
            }
        }
        Ok(best)
    }

    /// Value of the cheapest answer by `n` to `M →a Δ`.
    fn answer(&mut self, delta: &Dist, a: usize, n: StateId) -> Q {
        if let [(m, _)] = delta.as_slice() {
            return self.dirac(*m, a, n);
        }
        let mut mix = Q::zero();
        for (m, w) in delta {
            mix += w * self.dirac(*m, a, n);
        }
        if mix.is_zero() {
            return mix;
        }
        match self.best_profile(delta, a, n) {
            Ok(Some((v, _))) if v < mix => v,
            _ => mix,
        }
    }

    fn entry(&mut self, m: StateId, n: StateId) -> Q {
        if m == n || m == STUCK {
            return Q::zero();
        }
        if n == STUCK {
            return bot_cost(self.v.g, m);
        }
        let g = self.v.g;
        let mut worst = Q::zero();
        for (a, delta) in &g.all[m] {
            let x = self.answer(delta, *a, n);
            if x > worst {
                worst = x;
                if worst.is_one() {
                    break;
                }
            }
        }
        worst
    }
}

/// Result of a fixed-point computation.
#[derive(Clone, Debug)]
pub struct Quasimetric {
    pub lts: Lts,
    pub table: DistanceTable,
    /// Table values after each sweep when requested.
    pub history: Vec<Vec<Q>>,
    pub config: Config,
}

/// Closes `roots` under the pairs the fixed-point equation consults.
fn close_pairs(g: &Graph, roots: &[(StateId, StateId)]) -> Vec<(StateId, StateId)> {
    let mut seen: BTreeSet<(StateId, StateId)> = BTreeSet::new();
    let mut work: Vec<(StateId, StateId)> = Vec::new();
    let mut tc: HashMap<StateId, BTreeSet<StateId>> = HashMap::new();
    let mut wt: HashMap<(StateId, usize), BTreeSet<StateId>> = HashMap::new();
    let push = |p: (StateId, StateId), seen: &mut BTreeSet<_>, work: &mut Vec<_>| {
        if p.0 != STUCK && p.1 != STUCK && p.0 != p.1 && seen.insert(p) {
            work.push(p);
        }
    };
    for &p in roots {
        push(p, &mut seen, &mut work);
    }
    while let Some((m, n)) = work.pop() {
        for (a, delta) in &g.all[m] {
            let targets = wt.entry((n, *a)).or_insert_with(|| g.weak_targets(n, *a, &mut tc)).clone();
            for (m2, _) in delta {
                for &t in &targets {
                    push((*m2, t), &mut seen, &mut work);
                }
            }
        }
    }
    seen.into_iter().collect()
}

/// Iterates the weak simulation functional on the pairs reachable from `roots`.
pub fn min_quasimetric(env: &Env, roots: &[(Network, Network)], cfg: &Config) -> Result<Quasimetric, MetricError> {
    let mut lts = Lts::new(env.clone());
    let mut root_ids = Vec::new();
    for (m, n) in roots {
        let a = lts.intern(m);
        let b = lts.intern(n);
        lts.explore(a, cfg.state_budget)?;
        lts.explore(b, cfg.state_budget)?;
        root_ids.push((a, b));
    }
    let g = Graph::new(&lts);
    let pairs = close_pairs(&g, &root_ids);
    let index = pairs.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    let mut table =
        DistanceTable { values: vec![Q::zero(); pairs.len()], pairs, index, iterations: 0, converged: false };
    let mut groups: BTreeMap<StateId, Vec<usize>> = BTreeMap::new();
    for (i, (m, _)) in table.pairs.iter().enumerate() {
        groups.entry(*m).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = groups.into_values().collect();
    let mut history = Vec::new();
    while table.iterations < cfg.iter_budget {
        let sweep = |idxs: &Vec<usize>| -> Result<Vec<(usize, Q)>, MetricError> {
            let mut s = Solver::new(View { g: &g, table: &table }, cfg.profile_limit);
            let mut out = Vec::with_capacity(idxs.len());
            for &i in idxs {
                let (m, n) = table.pairs[i];
                out.push((i, s.entry(m, n)));
                if let Some(c) = s.cyc {
                    return Err(MetricError::TauCycle(c));
                }
            }
            Ok(out)
        };
        let results: Vec<Result<Vec<(usize, Q)>, MetricError>> =
            if cfg.parallel { groups.par_iter().map(sweep).collect() } else { groups.iter().map(sweep).collect() };
        let mut next = table.values.clone();
        for r in results {
            for (i, v) in r? {
                next[i] = v;
            }
        }
        table.iterations += 1;
        let unchanged = next == table.values;
        table.values = next;
        if cfg.keep_history {
            history.push(table.values.clone());
        }
        if unchanged {
            table.converged = true;
            break;
        }
    }
    Ok(Quasimetric { lts, table, history, config: cfg.clone() })
}

/// One strong step of the left network with its cheapest weak answer.
#[derive(Clone, Debug)]
pub struct StepAnswer {
    pub label: Label,
    pub delta: Vec<(StateId, Q)>,
    pub value: Q,
    pub theta: Vec<(StateId, Q)>,
    pub matching: Matching,
}

impl Quasimetric {
    pub fn id(&self, m: &Network) -> Option<StateId> {
        self.lts.lookup(m)
    }

    /// Table entry for two states, using the fixed values off the table.
    pub fn get(&self, m: StateId, n: StateId) -> Option<Q> {
        if m == n || m == STUCK {
            return Some(Q::zero());
        }
        if n == STUCK {
            return Some(if self.lts.steps(m).is_empty() { Q::zero() } else { Q::one() });
        }
        self.table.get(m, n).cloned()
    }

    pub fn distance(&self, m: &Network, n: &Network) -> Option<Q> {
        self.get(self.id(m)?, self.id(n)?)
    }

    /// Replays every step of `m` against `n` on the final table and returns witnesses.
    pub fn explain(&self, m: StateId, n: StateId) -> Vec<StepAnswer> {
        let g = Graph::new(&self.lts);
        let mut s = Solver::new(View { g: &g, table: &self.table }, self.config.profile_limit);
        let mut out = Vec::new();
        for (a, delta) in &g.all[m] {
            let label = g.labels[*a].clone();
            let mix_theta = || {
                let mut th: BTreeMap<StateId, Q> = BTreeMap::new();
                for (mi, w) in delta {
                    for (t, x) in witness(&mut Solver::new(View { g: &g, table: &self.table }, 0), *mi, *a, n) {
                        *th.entry(t).or_insert_with(Q::zero) += x * w;
                    }
                }
                th
            };
            let theta: BTreeMap<StateId, Q> = if delta.len() == 1 {
                witness(&mut s, delta[0].0, *a, n)
            } else {
                let mix = mix_theta();
                match s.best_profile(delta, *a, n) {
                    Ok(Some((v, c))) => {
                        let mixv = price(self, delta, &mix);
                        if v < mixv {
                            c.theta
                        } else {
                            mix
                        }
                    }
                    _ => mix,
                }
            };
            let dsub: SubDist<StateId> = delta.iter().cloned().collect();
            let tsub: SubDist<StateId> = theta.iter().map(|(a, b)| (*a, b.clone())).collect();
            let (value, joint) =
                kantorovich(|x, y| self.get(*x, *y).expect("pair in table"), &dsub, &tsub).expect("equal masses");
            out.push(StepAnswer {
                label,
                delta: delta.clone(),
                value,
                theta: theta.into_iter().collect(),
                matching: Matching { joint: joint.into_iter().map(|(x, y, w)| ((x, y), w)).collect() },
            });
        }
        out
    }
}

fn price(q: &Quasimetric, delta: &Dist, theta: &BTreeMap<StateId, Q>) -> Q {
    let dsub: SubDist<StateId> = delta.iter().cloned().collect();
    let tsub: SubDist<StateId> = theta.iter().map(|(a, b)| (*a, b.clone())).collect();
    kantorovich(|x, y| q.get(*x, *y).expect("pair in table"), &dsub, &tsub).expect("equal masses").0
}

/// Reconstructs an optimal Dirac answer, padded with `⊥`.
fn witness(s: &mut Solver<'_>, m: StateId, a: usize, n: StateId) -> BTreeMap<StateId, Q> {
    fn post(s: &mut Solver<'_>, m: StateId, t: StateId, w: Q, out: &mut BTreeMap<StateId, Q>) {
        let target = s.v_post(m, t);
        if s.v.d(m, t) == target {
            *out.entry(t).or_insert_with(Q::zero) += w;
            return;
        }
        let g = s.v.g;
        for d in &g.tau[t] {
            let val = d.iter().fold(Q::zero(), |acc, (u, x)| acc + x * s.v_post(m, *u));
            if val == target {
                for (u, x) in d {
                    post(s, m, *u, &w * x, out);
                }
                return;
            }
        }
        unreachable!("post value without witness");
    }
    fn pre(s: &mut Solver<'_>, m: StateId, a: usize, t: StateId, w: Q, out: &mut BTreeMap<StateId, Q>) {
        let target = s.v_pre(m, a, t);
        let g = s.v.g;
        if g.can(t, a) {
            for (l, d) in &g.visible[t] {
                if *l != a {
                    continue;
                }
                let val = d.iter().fold(Q::zero(), |acc, (u, x)| acc + x * s.v_post(m, *u));
                if val == target {
                    for (u, x) in d {
                        post(s, m, *u, &w * x, out);
                    }
                    return;
                }
            }
        } else if bot_cost(g, m) == target {
            *out.entry(STUCK).or_insert_with(Q::zero) += w;
            return;
        }
        for d in &g.tau[t] {
            let val = d.iter().fold(Q::zero(), |acc, (u, x)| acc + x * s.v_pre(m, a, *u));
            if val == target {
                for (u, x) in d {
                    pre(s, m, a, *u, &w * x, out);
                }
                return;
            }
        }
        unreachable!("pre value without witness");
    }
    let mut out = BTreeMap::new();
    if a == TAU {
        post(s, m, n, Q::one(), &mut out);
    } else {
        pre(s, m, a, n, Q::one(), &mut out);
    }
    out
}

/// Upper bound on `𝐝(M, N)` and the verdict against `tolerance`.
pub fn check_tolerance(m: &Network, n: &Network, env: &Env, tolerance: &Q, cfg: &Config) -> Result<ToleranceVerdict, MetricError> {
    let qm = min_quasimetric(env, &[(m.clone(), n.clone())], cfg)?;
    let bound = qm.distance(m, n).expect("root pair present");
    Ok(ToleranceVerdict {
        holds: bound <= *tolerance,
        computed_bound: bound,
        requested: tolerance.clone(),
        converged: qm.table.converged,
        iterations: qm.table.iterations,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KernelIssue {
    /// No weak answer prices the step at zero.
    Unanswered { left: StateId, right: StateId, label: Label },
    /// Enumeration of weak answers exceeded its budget.
    Inconclusive { left: StateId, right: StateId },
}

#[derive(Clone, Debug, Default)]
pub struct KernelReport {
    pub checked_pairs: usize,
    pub checked_steps: usize,
    pub issues: Vec<KernelIssue>,
}

impl KernelReport {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for KernelReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} zero pairs, {} steps, {} issues", self.checked_pairs, self.checked_steps, self.issues.len())
    }
}

/// Replays one round of the simulation game on every zero-distance pair.
///
/// Answers are enumerated independently of the fixed-point solver, by brute
/// force over weak transitions of the right network.
pub fn kernel_is_simulation(qm: &Quasimetric, enum_limit: usize) -> KernelReport {
    let mut report = KernelReport::default();
    let mut zero: Vec<(StateId, StateId)> =
        qm.table.pairs.iter().zip(&qm.table.values).filter(|(_, v)| v.is_zero()).map(|(p, _)| *p).collect();
    let diag: BTreeSet<StateId> = qm.table.pairs.iter().map(|p| p.0).collect();
    zero.extend(diag.into_iter().map(|m| (m, m)));
    for (m, n) in zero {
        report.checked_pairs += 1;
        let mut en = WeakEnumerator::new(&qm.lts.env, enum_limit);
        let nn = SubDist::dirac(qm.lts.network(n).clone());
        for st in qm.lts.steps(m) {
            report.checked_steps += 1;
            let answers = match en.weak_step(&nn, &st.label) {
                Ok(a) => a,
                Err(_) => {
                    report.issues.push(KernelIssue::Inconclusive { left: m, right: n });
                    continue;
                }
            };
            let delta: SubDist<StateId> = st.dist.iter().cloned().collect();
            let ok = answers.iter().any(|theta| {
                let mut t: SubDist<StateId> = SubDist::zero();
                for (net, w) in theta.iter() {
                    match qm.lts.lookup(net) {
                        Some(id) => t.add(id, w.clone()),
                        None => return false,
                    }
                }
                let gap = Q::one() - t.mass();
                t.add(STUCK, gap);
                let cost = |x: &StateId, y: &StateId| qm.get(*x, *y).unwrap_or_else(Q::one);
                matches!(kantorovich(cost, &delta, &t), Ok((c, _)) if c.is_zero())
            });
            if !ok {
                report.issues.push(KernelIssue::Unanswered { left: m, right: n, label: st.label.clone() });
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{Choice, Node, Process, Value};
    use crate::q;

    fn bcast(v: &str) -> Process {
        Process::bcast(&Value::new(v), Process::Nil.then())
    }

    #[test]
    fn kantorovich_examples() {
        let d = SubDist::dirac(1usize);
        let t = SubDist::dirac(2usize);
        let (c, _) = kantorovich(|_, _| q(3, 7), &d, &t).unwrap();
        assert_eq!(c, q(3, 7));
        let h = q(1, 2);
        let delta: SubDist<usize> = [(0, h.clone()), (1, h.clone())].into_iter().collect();
        let (c, _) = kantorovich(|a, b| if a == b { q(0, 1) } else { q(1, 1) }, &delta, &delta).unwrap();
        assert_eq!(c, q(0, 1));
    }

    #[test]
    fn identical_networks_are_at_zero() {
        let env = Env::listening(&["o"]);
        let m = Network::of(vec![Node::new("n", &["o"], Process::tau(Choice::binary(q(1, 3), bcast("v"), Process::Nil)))]);
        let v = check_tolerance(&m, &m, &env, &q(0, 1), &Config::default()).unwrap();
        assert!(v.holds && v.converged);
    }

    #[test]
    fn simple_law_one_tolerance() {
        let env = Env::listening(&["o"]);
        let p = q(2, 3);
        let left = Network::of(vec![Node::new("n", &["o"], bcast("v"))]);
        let right = Network::of(vec![Node::new("n", &["o"], Process::tau(Choice::binary(p.clone(), bcast("v"), Process::Nil)))]);
        let v = check_tolerance(&left, &right, &env, &(q(1, 1) - &p), &Config::default()).unwrap();
        assert!(v.holds, "{:?}", v);
        assert_eq!(v.computed_bound, q(1, 3));
    }

    #[test]
    fn sequential_and_parallel_sweeps_agree() {
        let env = Env::listening(&["o"]);
        let left = Network::of(vec![Node::new("n", &["o"], Process::tau(Choice::binary(q(1, 2), bcast("v"), bcast("w"))))]);
        let right = Network::of(vec![Node::new("n", &["o"], Process::tau(Choice::binary(q(1, 3), bcast("v"), bcast("w"))))]);
        let seq = Config { parallel: false, ..Config::default() };
        let a = min_quasimetric(&env, &[(left.clone(), right.clone())], &seq).unwrap();
        let b = min_quasimetric(&env, &[(left, right)], &Config::default()).unwrap();
        assert_eq!(a.table.values, b.table.values);
        assert_eq!(a.table.pairs, b.table.pairs);
    }
}
