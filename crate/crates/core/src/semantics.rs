//! Probabilistic labelled transition system and weak transitions.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use num_traits::{One, Zero};

use crate::calculus::{
    canonical_form, canonical_process, head, subst_value, values_of, Choice, Name, Network, Node,
    Process, Term, Value,
};
use crate::Q;

/// Transition labels.
///
/// `Snd` is the internal whole-network broadcast; extensional steps expose it as
/// `Tau` (no outside receiver) or `Obs` (observable by the outside names in `targets`).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Label {
    Snd { sender: Name, value: Value, targets: BTreeSet<Name> },
    Rcv { sender: Name, value: Value },
    Tau,
    Sigma,
    Obs { value: Value, targets: BTreeSet<Name> },
}

impl Label {
    pub fn is_tau(&self) -> bool {
        matches!(self, Label::Tau)
    }

    pub fn obs(v: &str, targets: &[&str]) -> Label {
        Label::Obs { value: Value::new(v), targets: targets.iter().map(|s| crate::calculus::name(s)).collect() }
    }
}

fn names(s: &BTreeSet<Name>) -> String {
    s.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Snd { sender, value, targets } => write!(f, "{sender}!{value}>{{{}}}", names(targets)),
            Label::Rcv { sender, value } => write!(f, "{sender}?{value}"),
            Label::Tau => f.write_str("tau"),
            Label::Sigma => f.write_str("sigma"),
            Label::Obs { value, targets } => write!(f, "!{value}>{{{}}}", names(targets)),
        }
    }
}

/// Finite-support sub-distribution with exact weights.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct SubDist<T: Ord>(BTreeMap<T, Q>);

impl<T: Ord + Clone> SubDist<T> {
    pub fn zero() -> Self {
        SubDist(BTreeMap::new())
    }

    pub fn dirac(t: T) -> Self {
        SubDist(BTreeMap::from([(t, Q::one())]))
    }

    pub fn add(&mut self, t: T, w: Q) {
        if w.is_zero() {
            return;
        }
        *self.0.entry(t).or_insert_with(Q::zero) += w;
    }

    pub fn mass(&self) -> Q {
        self.0.values().fold(Q::zero(), |a, b| a + b)
    }

    pub fn weight(&self, t: &T) -> Q {
        self.0.get(t).cloned().unwrap_or_else(Q::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, &Q)> {
        self.0.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &T> {
        self.0.keys()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, w: &Q) -> Self {
        SubDist(self.0.iter().map(|(t, x)| (t.clone(), x * w)).filter(|(_, x)| !x.is_zero()).collect())
    }

    pub fn merge(&mut self, other: &SubDist<T>) {
        for (t, w) in other.iter() {
            self.add(t.clone(), w.clone());
        }
    }
}

impl<T: Ord + Clone> FromIterator<(T, Q)> for SubDist<T> {
    fn from_iter<I: IntoIterator<Item = (T, Q)>>(iter: I) -> Self {
        let mut d = SubDist::zero();
        for (t, w) in iter {
            d.add(t, w);
        }
        d
    }
}

/// Environment of a network: outside names and the value alphabet.
///
/// `listeners` only receive (e.g. an observer); `transmitters` may also send,
/// which exposes `Rcv` transitions for every declared value.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Env {
    pub listeners: BTreeSet<Name>,
    pub transmitters: BTreeSet<Name>,
    pub values: BTreeSet<Value>,
}

impl Env {
    pub fn listening(names_: &[&str]) -> Self {
        Env { listeners: names_.iter().map(|s| crate::calculus::name(s)).collect(), ..Env::default() }
    }

    pub fn externals(&self) -> BTreeSet<Name> {
        self.listeners.union(&self.transmitters).cloned().collect()
    }

    /// Adds every closed value occurring in `m` to the alphabet.
    pub fn with_values_of(mut self, m: &Network) -> Self {
        for n in m.nodes() {
            values_of(&n.proc, &mut self.values);
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SemError {
    #[error("state budget of {0} states exhausted")]
    Budget(usize),
    #[error("weak transition enumeration exceeded {0} sub-distributions")]
    WeakBudget(usize),
    #[error("open term: node {0} broadcasts a variable")]
    Open(Name),
}

fn choice_dist(c: &Choice) -> Vec<(Process, Q)> {
    let mut m: BTreeMap<Process, Q> = BTreeMap::new();
    for (w, p) in c.branches() {
        *m.entry(canonical_process(p)).or_insert_with(Q::zero) += w;
    }
    m.into_iter().collect()
}

fn receive_dist(var: &str, c: &Choice, v: &Value) -> Vec<(Process, Q)> {
    let mut m: BTreeMap<Process, Q> = BTreeMap::new();
    for (w, p) in c.branches() {
        *m.entry(canonical_process(&subst_value(p, var, v))).or_insert_with(Q::zero) += w;
    }
    m.into_iter().collect()
}

fn product(nodes: &[Node], parts: Vec<Vec<(Process, Q)>>) -> SubDist<Network> {
    let mut acc: Vec<(Vec<Node>, Q)> = vec![(Vec::with_capacity(nodes.len()), Q::one())];
    for (node, part) in nodes.iter().zip(parts) {
        let mut next = Vec::with_capacity(acc.len() * part.len());
        for (prefix, w) in &acc {
            for (p, x) in &part {
                let mut ns = prefix.clone();
                ns.push(node.with_proc(p.clone()));
                next.push((ns, w * x));
            }
        }
        acc = next;
    }
    acc.into_iter().map(|(ns, w)| (Network::Par(ns), w)).collect()
}

fn keep(n: &Node) -> Vec<(Process, Q)> {
    vec![(n.proc.clone(), Q::one())]
}

/// Node-level time step: `nil`, σ-prefix and receiver timeout.
fn node_sigma(h: &Process) -> Option<Vec<(Process, Q)>> {
    match h {
        Process::Nil => Some(vec![(Process::Nil, Q::one())]),
        Process::Sigma(c) => Some(choice_dist(c)),
        Process::Rcv { else_, .. } => Some(choice_dist(else_)),
        _ => None,
    }
}

/// The unique σ-derivative, or `None` when a sender or τ-prefix blocks time.
pub fn sigma_step(m: &Network) -> Option<SubDist<Network>> {
    let ns = match m {
        Network::Stuck => return None,
        Network::Par(ns) => ns,
    };
    let mut parts = Vec::with_capacity(ns.len());
    for n in ns {
        parts.push(node_sigma(&head(&n.proc))?);
    }
    Some(product(ns, parts))
}

fn reception(n: &Node, h: &Process, sender: &Name, v: &Value) -> Vec<(Process, Q)> {
    match h {
        Process::Rcv { var, then, .. } if n.nbrs.contains(sender) => receive_dist(var, then, v),
        _ => keep(n),
    }
}

/// Internal broadcasts `m!v▷μ` before the extensional rewrite.
pub fn broadcasts(m: &Network) -> Result<Vec<(Label, SubDist<Network>)>, SemError> {
    let ns = m.nodes();
    let heads: Vec<Process> = ns.iter().map(|n| head(&n.proc)).collect();
    let names_ = m.names();
    let mut out = Vec::new();
    for (i, n) in ns.iter().enumerate() {
        if let Process::Bcast(t, c) = &heads[i] {
            let v = match t {
                Term::Val(v) => v,
                Term::Var(_) => return Err(SemError::Open(n.name.clone())),
            };
            let parts = ns
                .iter()
                .enumerate()
                .map(|(j, o)| if j == i { choice_dist(c) } else { reception(o, &heads[j], &n.name, v) })
                .collect();
            let mu: BTreeSet<Name> = n.nbrs.difference(&names_).cloned().collect();
            out.push((Label::Snd { sender: n.name.clone(), value: v.clone(), targets: mu }, product(ns, parts)));
        }
    }
    Ok(out)
}

/// All strong extensional transitions of `m`, sorted and deduplicated.
pub fn strong_steps(m: &Network, env: &Env) -> Result<Vec<(Label, SubDist<Network>)>, SemError> {
    if m.is_stuck() {
        return Ok(Vec::new());
    }
    let ns = m.nodes();
    let heads: Vec<Process> = ns.iter().map(|n| head(&n.proc)).collect();
    let mut out = Vec::new();
    for (l, d) in broadcasts(m)? {
        if let Label::Snd { value, targets, .. } = l {
            if targets.is_empty() {
                out.push((Label::Tau, d));
            } else {
                out.push((Label::Obs { value, targets }, d));
            }
        }
    }
    for (i, h) in heads.iter().enumerate() {
        if let Process::Tau(c) = h {
            let parts = ns.iter().enumerate().map(|(j, o)| if j == i { choice_dist(c) } else { keep(o) }).collect();
            out.push((Label::Tau, product(ns, parts)));
        }
    }
    if let Some(d) = sigma_step(m) {
        out.push((Label::Sigma, d));
    }
    for sender in &env.transmitters {
        for v in &env.values {
            let parts = ns.iter().zip(&heads).map(|(o, h)| reception(o, h, sender, v)).collect();
            out.push((Label::Rcv { sender: sender.clone(), value: v.clone() }, product(ns, parts)));
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

pub type StateId = usize;

/// Identifier of `⊥` in every [`Lts`].
pub const STUCK: StateId = 0;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Step {
    pub label: Label,
    pub dist: Vec<(StateId, Q)>,
}

/// Explicit state graph over interned canonical networks.
#[derive(Clone, Debug)]
pub struct Lts {
    pub env: Env,
    states: Vec<Network>,
    index: HashMap<Network, StateId>,
    steps: Vec<Option<Vec<Step>>>,
}

impl Lts {
    pub fn new(env: Env) -> Self {
        let mut l = Lts { env, states: Vec::new(), index: HashMap::new(), steps: Vec::new() };
        let s = l.intern(&Network::Stuck);
        debug_assert_eq!(s, STUCK);
        l.steps[STUCK] = Some(Vec::new());
        l
    }

    pub fn intern(&mut self, m: &Network) -> StateId {
        let m = canonical_form(m);
        if let Some(&s) = self.index.get(&m) {
            return s;
        }
        let s = self.states.len();
        self.states.push(m.clone());
        self.index.insert(m, s);
        self.steps.push(None);
        s
    }

    pub fn lookup(&self, m: &Network) -> Option<StateId> {
        self.index.get(&canonical_form(m)).copied()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn network(&self, s: StateId) -> &Network {
        &self.states[s]
    }

    /// Strong steps of an explored state.
    pub fn steps(&self, s: StateId) -> &[Step] {
        self.steps[s].as_deref().expect("state not explored")
    }

    pub fn is_explored(&self, s: StateId) -> bool {
        self.steps[s].is_some()
    }

    /// Breadth-first expansion of everything reachable from `root`.
    pub fn explore(&mut self, root: StateId, budget: usize) -> Result<(), SemError> {
        let mut queue = VecDeque::from([root]);
        while let Some(s) = queue.pop_front() {
            if self.steps[s].is_some() {
                continue;
            }
            let raw = strong_steps(&self.states[s].clone(), &self.env)?;
            let mut steps = Vec::with_capacity(raw.len());
            for (label, d) in raw {
                let mut dist: Vec<(StateId, Q)> = d.iter().map(|(m, w)| (self.intern(m), w.clone())).collect();
                dist.sort();
                for &(t, _) in &dist {
                    if self.steps[t].is_none() {
                        queue.push_back(t);
                    }
                }
                steps.push(Step { label, dist });
            }
            steps.sort();
            steps.dedup();
            self.steps[s] = Some(steps);
            if self.states.len() > budget {
                return Err(SemError::Budget(budget));
            }
        }
        Ok(())
    }

    /// Explored states reachable from `root`, in breadth-first order.
    pub fn reachable_from(&self, root: StateId) -> Vec<StateId> {
        let mut seen = vec![false; self.len()];
        let mut order = vec![root];
        seen[root] = true;
        let mut i = 0;
        while i < order.len() {
            let s = order[i];
            i += 1;
            for st in self.steps(s) {
                for &(t, _) in &st.dist {
                    if !seen[t] {
                        seen[t] = true;
                        order.push(t);
                    }
                }
            }
        }
        order
    }

    /// Deterministic line-oriented dump of the states reachable from `root`.
    pub fn dump(&self, root: StateId) -> String {
        let mut order = self.reachable_from(root);
        order.sort();
        let mut out = String::new();
        for &s in &order {
            out.push_str(&format!("s{s} = {}\n", crate::calculus::brief(&self.states[s])));
        }
        for &s in &order {
            for st in self.steps(s) {
                let targets: Vec<String> =
                    st.dist.iter().map(|(t, w)| format!("{}/{}:s{t}", w.numer(), w.denom())).collect();
                out.push_str(&format!("s{s} --{}--> [{}]\n", st.label, targets.join(", ")));
            }
        }
        out
    }
}

/// Explores the state space of `m`, returning the graph and the root id.
pub fn reachable_states(m: &Network, env: &Env, budget: usize) -> Result<(Lts, StateId), SemError> {
    let mut lts = Lts::new(env.clone());
    let root = lts.intern(m);
    lts.explore(root, budget)?;
    Ok((lts, root))
}

/// Prefix depth bounding the number of instantaneous actions a process can take.
pub fn prefix_depth(p: &Process) -> usize {
    fn max_branch(c: &Choice) -> usize {
        c.branches().iter().map(|(_, q)| prefix_depth(q)).max().unwrap_or(0)
    }
    match p {
        Process::Nil | Process::Var(_) | Process::Sigma(_) => 0,
        Process::Bcast(_, c) | Process::Tau(c) => 1 + max_branch(c),
        Process::Rcv { then, .. } => max_branch(then),
        Process::Fix(_, b) => prefix_depth(b),
    }
}

/// Sum of node prefix depths.
pub fn network_depth(m: &Network) -> usize {
    m.nodes().iter().map(|n| prefix_depth(&n.proc)).sum()
}

/// Reports violations of time determinism, maximal progress, patience,
/// well-timedness, input enabledness and step mass on states reachable from `root`.
pub fn check_time_properties(lts: &Lts, root: StateId) -> Vec<String> {
    let states = lts.reachable_from(root);
    let mut out = Vec::new();
    let mut longest: HashMap<StateId, usize> = HashMap::new();
    for &s in &states {
        let m = lts.network(s);
        if m.is_stuck() {
            continue;
        }
        let steps = lts.steps(s);
        let sigmas = steps.iter().filter(|st| st.label == Label::Sigma).count();
        if sigmas > 1 {
            out.push(format!("s{s}: {sigmas} distinct sigma-derivatives"));
        }
        let busy = m.nodes().iter().any(|n| matches!(head(&n.proc), Process::Bcast(..) | Process::Tau(_)));
        if busy && sigmas > 0 {
            out.push(format!("s{s}: sigma despite a sender or tau head"));
        }
        if !busy && sigmas == 0 {
            out.push(format!("s{s}: no sigma although no sender or tau head"));
        }
        for snd in &lts.env.transmitters {
            for v in &lts.env.values {
                let want = Label::Rcv { sender: snd.clone(), value: v.clone() };
                if !steps.iter().any(|st| st.label == want) {
                    out.push(format!("s{s}: not input-enabled for {want}"));
                }
            }
        }
        for st in steps {
            let mass = st.dist.iter().fold(Q::zero(), |a, (_, w)| a + w);
            if !mass.is_one() {
                out.push(format!("s{s}: step {} has mass {mass}", st.label));
            }
        }
        let bound = network_depth(m);
        let len = instant_path(lts, s, &mut longest, &mut Vec::new());
        match len {
            Some(len) if len <= bound => {}
            Some(len) => out.push(format!("s{s}: instantaneous path of length {len} exceeds bound {bound}")),
            None => out.push(format!("s{s}: cycle of instantaneous actions")),
        }
    }
    out
}

fn instant_path(lts: &Lts, s: StateId, memo: &mut HashMap<StateId, usize>, stack: &mut Vec<StateId>) -> Option<usize> {
    if let Some(&v) = memo.get(&s) {
        return Some(v);
    }
    if stack.contains(&s) {
        return None;
    }
    stack.push(s);
    let mut best = 0;
    for st in lts.steps(s) {
        if matches!(st.label, Label::Sigma | Label::Rcv { .. }) {
            continue;
        }
        for &(t, _) in &st.dist {
            best = best.max(1 + instant_path(lts, t, memo, stack)?);
        }
    }
    stack.pop();
    memo.insert(s, best);
    Some(best)
}

/// Brute-force weak transitions `Δ ⇒̂α Θ` under per-network deterministic schedulers.
pub struct WeakEnumerator<'a> {
    env: &'a Env,
    cache: HashMap<Network, Vec<(Label, SubDist<Network>)>>,
    limit: usize,
}

impl<'a> WeakEnumerator<'a> {
    pub fn new(env: &'a Env, limit: usize) -> Self {
        WeakEnumerator { env, cache: HashMap::new(), limit }
    }

    fn steps(&mut self, m: &Network) -> Result<Vec<(Label, SubDist<Network>)>, SemError> {
        if let Some(s) = self.cache.get(m) {
            return Ok(s.clone());
        }
        let s = strong_steps(m, self.env)?;
        self.cache.insert(m.clone(), s.clone());
        Ok(s)
    }

    /// One lifted step; `stay` allows support networks to remain (the τ case).
    fn lift(&mut self, d: &SubDist<Network>, alpha: &Label) -> Result<Vec<SubDist<Network>>, SemError> {
        let tau = alpha.is_tau();
        let mut acc: Vec<(SubDist<Network>, bool)> = vec![(SubDist::zero(), false)];
        for (m, w) in d.iter() {
            let mut opts: Vec<Option<SubDist<Network>>> = Vec::new();
            if tau {
                opts.push(Some(SubDist::dirac(m.clone())));
            }
            for (l, t) in self.steps(m)? {
                if &l == alpha {
                    opts.push(Some(t));
                }
            }
            if opts.is_empty() {
                opts.push(None);
            }
            let mut next = Vec::with_capacity(acc.len() * opts.len());
            for (partial, fired) in &acc {
                for o in &opts {
                    let mut p = partial.clone();
                    let f = match o {
                        Some(t) => {
                            p.merge(&t.scaled(w));
                            true
                        }
                        None => *fired,
                    };
                    next.push((p, f || *fired));
                }
            }
            acc = next;
            if acc.len() > self.limit {
                return Err(SemError::WeakBudget(self.limit));
            }
        }
        let mut out: Vec<SubDist<Network>> = acc.into_iter().filter(|(_, f)| *f).map(|(p, _)| p).collect();
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// `⇒̂τ` closure of a set of sub-distributions.
    pub fn tau_closure(&mut self, start: Vec<SubDist<Network>>) -> Result<BTreeSet<SubDist<Network>>, SemError> {
        let mut seen: BTreeSet<SubDist<Network>> = BTreeSet::new();
        let mut work: Vec<SubDist<Network>> = Vec::new();
        for d in start {
            if seen.insert(d.clone()) {
                work.push(d);
            }
        }
        while let Some(d) = work.pop() {
            for e in self.lift(&d, &Label::Tau)? {
                if seen.insert(e.clone()) {
                    work.push(e);
                    if seen.len() > self.limit {
                        return Err(SemError::WeakBudget(self.limit));
                    }
                }
            }
        }
        Ok(seen)
    }

    /// All `Θ` with `Δ ⇒̂α Θ`.
    pub fn weak_step(&mut self, d: &SubDist<Network>, alpha: &Label) -> Result<BTreeSet<SubDist<Network>>, SemError> {
        let pre = self.tau_closure(vec![d.clone()])?;
        if alpha.is_tau() {
            return Ok(pre);
        }
        let mut mid = Vec::new();
        for p in &pre {
            mid.extend(self.lift(p, alpha)?);
        }
        self.tau_closure(mid)
    }
}

/// Convenience wrapper around [`WeakEnumerator::weak_step`].
pub fn weak_step(d: &SubDist<Network>, alpha: &Label, env: &Env) -> Result<BTreeSet<SubDist<Network>>, SemError> {
    WeakEnumerator::new(env, 200_000).weak_step(d, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::Node;
    use crate::q;

    fn v(s: &str) -> Value {
        Value::new(s)
    }

    fn bnil(s: &str) -> Process {
        Process::bcast(&v(s), Process::Nil.then())
    }

    #[test]
    fn tau_choice_step() {
        let p = Process::tau(Choice::binary(q(1, 3), bnil("v1"), bnil("v2")));
        let m = Network::of(vec![Node::new("n", &["o"], p)]);
        let env = Env::listening(&["o"]);
        let steps = strong_steps(&m, &env).unwrap();
        assert_eq!(steps.len(), 1);
        let (l, d) = &steps[0];
        assert_eq!(*l, Label::Tau);
        let a = Network::of(vec![Node::new("n", &["o"], bnil("v1"))]);
        let b = Network::of(vec![Node::new("n", &["o"], bnil("v2"))]);
        assert_eq!(d.weight(&a), q(1, 3));
        assert_eq!(d.weight(&b), q(2, 3));
    }

    #[test]
    fn weak_observation_drops_other_branch() {
        let p = Process::tau(Choice::binary(q(1, 3), bnil("v1"), bnil("v2")));
        let m = Network::of(vec![Node::new("n", &["o"], p)]);
        let env = Env::listening(&["o"]);
        let res = weak_step(&SubDist::dirac(m), &Label::obs("v1", &["o"]), &env).unwrap();
        let nil = Network::of(vec![Node::new("n", &["o"], Process::Nil)]);
        let want: SubDist<Network> = [(nil, q(1, 3))].into_iter().collect();
        assert!(res.contains(&want));
    }

    #[test]
    fn weak_tau_is_reflexive() {
        let m = Network::of(vec![Node::new("n", &[], Process::tau(Process::Nil.then()))]);
        let res = weak_step(&SubDist::dirac(m.clone()), &Label::Tau, &Env::default()).unwrap();
        assert!(res.contains(&SubDist::dirac(m)));
    }

    #[test]
    fn empty_network_idles() {
        let steps = strong_steps(&Network::empty(), &Env::default()).unwrap();
        assert_eq!(steps, vec![(Label::Sigma, SubDist::dirac(Network::empty()))]);
        assert!(strong_steps(&Network::Stuck, &Env::default()).unwrap().is_empty());
    }

    #[test]
    fn sigma_cases() {
        let s = Network::of(vec![Node::new("n", &[], Process::sigma(Process::Nil.then()))]);
        let nil = Network::of(vec![Node::new("n", &[], Process::Nil)]);
        assert_eq!(sigma_step(&s), Some(SubDist::dirac(nil.clone())));
        let b = Network::of(vec![Node::new("n", &[], bnil("v"))]);
        assert_eq!(sigma_step(&b), None);
        let r = Network::of(vec![Node::new("n", &[], Process::rcv("x", Process::Nil.then(), bnil("w").then()))]);
        let d = Network::of(vec![Node::new("n", &[], bnil("w"))]);
        assert_eq!(sigma_step(&r), Some(SubDist::dirac(d)));
    }

    #[test]
    fn broadcast_reaches_listening_neighbor_only() {
        let recv = Process::rcv("x", Process::Bcast(Term::Var(crate::calculus::name("x")), Process::Nil.then()).then(), Process::Nil.then());
        let m = Network::of(vec![
            Node::new("a", &["b"], bnil("v")),
            Node::new("b", &["a", "c"], recv.clone()),
            Node::new("c", &["b"], recv.clone()),
        ]);
        let steps = strong_steps(&m, &Env::default()).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].0, Label::Tau);
        let after = Network::of(vec![
            Node::new("a", &["b"], Process::Nil),
            Node::new("b", &["a", "c"], bnil("v")),
            Node::new("c", &["b"], recv),
        ]);
        assert_eq!(steps[0].1, SubDist::dirac(after));
    }

    #[test]
    fn external_transmitter_exposes_receptions() {
        let recv = Process::rcv("x", Process::Nil.then(), Process::Nil.then());
        let m = Network::of(vec![Node::new("a", &["src"], recv)]);
        let env = Env { transmitters: [crate::calculus::name("src")].into(), values: [v("v")].into(), ..Env::default() };
        let steps = strong_steps(&m, &env).unwrap();
        let want = Label::Rcv { sender: crate::calculus::name("src"), value: v("v") };
        assert!(steps.iter().any(|(l, _)| *l == want));
        let (lts, root) = reachable_states(&m, &env, 100).unwrap();
        assert!(check_time_properties(&lts, root).is_empty());
    }

    #[test]
    fn budget_is_enforced() {
        let p = Process::tau(Choice::binary(q(1, 2), bnil("a"), bnil("b")));
        let m = Network::of(vec![Node::new("n", &["o"], p)]);
        let env = Env::listening(&["o"]);
        assert_eq!(reachable_states(&m, &env, 2).unwrap_err(), SemError::Budget(2));
        assert!(reachable_states(&m, &env, 100).is_ok());
    }
}
