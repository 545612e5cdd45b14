//! Abstract syntax of processes and networks, substitution, canonical forms
//! and well-formedness.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::Q;

pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

/// A closed value: an opaque atom.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Value(pub Name);

impl Value {
    pub fn new(s: &str) -> Self {
        Value(name(s))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Payload of a broadcast: a closed value or a value variable.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Term {
    Val(Value),
    Var(Name),
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Process {
    Nil,
    Bcast(Term, Choice),
    Rcv { var: Name, then: Choice, else_: Choice },
    Tau(Choice),
    Sigma(Choice),
    Var(Name),
    Fix(Name, Arc<Process>),
}

/// Probabilistic choice `⊕ pᵢ:Pᵢ` with weights in (0,1] summing to one.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Choice(Arc<Vec<(Q, Process)>>);

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum ChoiceError {
    #[error("empty probabilistic choice")]
    Empty,
    #[error("weight {0} outside (0,1]")]
    Weight(Q),
    #[error("weights sum to {0}, expected 1")]
    Sum(Q),
}

impl Choice {
    /// Validated constructor. Zero weights are rejected; use [`Choice::normalized`] to drop them.
    pub fn new(branches: Vec<(Q, Process)>) -> Result<Self, ChoiceError> {
        if branches.is_empty() {
            return Err(ChoiceError::Empty);
        }
        let mut sum = Q::zero();
        for (w, _) in &branches {
            if *w <= Q::zero() || *w > Q::one() {
                return Err(ChoiceError::Weight(w.clone()));
            }
            sum += w;
        }
        if !sum.is_one() {
            return Err(ChoiceError::Sum(sum));
        }
        Ok(Choice(Arc::new(branches)))
    }

    /// Drops zero-weight branches, then validates.
    pub fn normalized(branches: Vec<(Q, Process)>) -> Result<Self, ChoiceError> {
        Choice::new(branches.into_iter().filter(|(w, _)| !w.is_zero()).collect())
    }

    /// The deterministic continuation `1:P`.
    pub fn det(p: Process) -> Self {
        Choice(Arc::new(vec![(Q::one(), p)]))
    }

    /// `P ⊕_w Q`, dropping whichever side carries no weight. Panics unless `w ∈ [0,1]`.
    pub fn binary(w: Q, p: Process, q: Process) -> Self {
        let rest = Q::one() - &w;
        Choice::normalized(vec![(w, p), (rest, q)]).expect("binary choice weight in [0,1]")
    }

    pub fn branches(&self) -> &[(Q, Process)] {
        &self.0
    }

    /// The process of a deterministic choice.
    pub fn as_det(&self) -> Option<&Process> {
        match self.0.as_slice() {
            [(w, p)] if w.is_one() => Some(p),
            _ => None,
        }
    }

    fn map(&self, mut f: impl FnMut(&Process) -> Process) -> Choice {
        Choice(Arc::new(self.0.iter().map(|(w, p)| (w.clone(), f(p))).collect()))
    }
}

impl Process {
    pub fn bcast(v: &Value, c: Choice) -> Self {
        Process::Bcast(Term::Val(v.clone()), c)
    }

    pub fn then(self) -> Choice {
        Choice::det(self)
    }

    pub fn tau(c: Choice) -> Self {
        Process::Tau(c)
    }

    pub fn sigma(c: Choice) -> Self {
        Process::Sigma(c)
    }

    /// `σᵏ.P`.
    pub fn sigma_pow(k: usize, p: Process) -> Self {
        (0..k).fold(p, |acc, _| Process::Sigma(Choice::det(acc)))
    }

    pub fn rcv(var: &str, then: Choice, else_: Choice) -> Self {
        Process::Rcv { var: name(var), then, else_ }
    }

    pub fn fix(x: &str, body: Process) -> Self {
        Process::Fix(name(x), Arc::new(body))
    }

    pub fn var(x: &str) -> Self {
        Process::Var(name(x))
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Process::Nil)
    }

    /// Strips `k` leading deterministic σ-prefixes.
    pub fn strip_sigma(&self, k: usize) -> Option<Process> {
        let mut cur = self.clone();
        for _ in 0..k {
            cur = match &cur {
                Process::Sigma(c) => c.as_det()?.clone(),
                _ => return None,
            };
        }
        Some(cur)
    }

    /// Number of leading deterministic σ-prefixes.
    pub fn sigma_depth(&self) -> usize {
        let mut k = 0;
        let mut cur = self;
        while let Process::Sigma(c) = cur {
            match c.as_det() {
                Some(p) => {
                    k += 1;
                    cur = p;
                }
                None => break,
            }
        }
        k
    }
}

/// Replaces free occurrences of the value variable `x` by `v`.
pub fn subst_value(p: &Process, x: &str, v: &Value) -> Process {
    match p {
        Process::Nil | Process::Var(_) => p.clone(),
        Process::Bcast(t, c) => {
            let t = match t {
                Term::Var(y) if &**y == x => Term::Val(v.clone()),
                other => other.clone(),
            };
            Process::Bcast(t, c.map(|q| subst_value(q, x, v)))
        }
        Process::Rcv { var, then, else_ } => {
            let then = if &**var == x { then.clone() } else { then.map(|q| subst_value(q, x, v)) };
            Process::Rcv { var: var.clone(), then, else_: else_.map(|q| subst_value(q, x, v)) }
        }
        Process::Tau(c) => Process::Tau(c.map(|q| subst_value(q, x, v))),
        Process::Sigma(c) => Process::Sigma(c.map(|q| subst_value(q, x, v))),
        Process::Fix(y, b) => Process::Fix(y.clone(), Arc::new(subst_value(b, x, v))),
    }
}

/// Replaces free occurrences of the process variable `x` by the closed process `r`.
pub fn subst_process(p: &Process, x: &str, r: &Process) -> Process {
    match p {
        Process::Nil => Process::Nil,
        Process::Var(y) if &**y == x => r.clone(),
        Process::Var(_) => p.clone(),
        Process::Bcast(t, c) => Process::Bcast(t.clone(), c.map(|q| subst_process(q, x, r))),
        Process::Rcv { var, then, else_ } => Process::Rcv {
            var: var.clone(),
            then: then.map(|q| subst_process(q, x, r)),
            else_: else_.map(|q| subst_process(q, x, r)),
        },
        Process::Tau(c) => Process::Tau(c.map(|q| subst_process(q, x, r))),
        Process::Sigma(c) => Process::Sigma(c.map(|q| subst_process(q, x, r))),
        Process::Fix(y, _) if &**y == x => p.clone(),
        Process::Fix(y, b) => Process::Fix(y.clone(), Arc::new(subst_process(b, x, r))),
    }
}

/// One unfolding `fix X.P ↦ {fix X.P/X}P`; `None` for non-fix processes.
pub fn unfold(p: &Process) -> Option<Process> {
    match p {
        Process::Fix(x, body) => Some(subst_process(body, x, p)),
        _ => None,
    }
}

/// Unfolds leading fixpoints until a prefix, `nil` or free variable is exposed.
pub fn head(p: &Process) -> Process {
    let mut cur = p.clone();
    let mut guard = 0;
    while let Some(next) = unfold(&cur) {
        cur = next;
        guard += 1;
        assert!(guard < 1024, "unguarded recursion");
    }
    cur
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
#[error("not a fixpoint: node {0}")]
pub struct NotAFix(pub Name);

/// Node-level rule `n[fix X.P] ≡ n[{fix X.P/X}P]`.
pub fn unfold_fix(n: &Node) -> Result<Node, NotAFix> {
    match unfold(&n.proc) {
        Some(p) => Ok(Node { proc: p, ..n.clone() }),
        None => Err(NotAFix(n.name.clone())),
    }
}

fn free_vars_into(p: &Process, vals: &mut Vec<Name>, procs: &mut Vec<Name>, bv: &mut Vec<Name>, bp: &mut Vec<Name>) {
    let choice = |c: &Choice, vals: &mut Vec<Name>, procs: &mut Vec<Name>, bv: &mut Vec<Name>, bp: &mut Vec<Name>| {
        for (_, q) in c.branches() {
            free_vars_into(q, vals, procs, bv, bp);
        }
    };
    match p {
        Process::Nil => {}
        Process::Var(x) => {
            if !bp.contains(x) {
                procs.push(x.clone());
            }
        }
        Process::Bcast(t, c) => {
            if let Term::Var(x) = t {
                if !bv.contains(x) {
                    vals.push(x.clone());
                }
            }
            choice(c, vals, procs, bv, bp);
        }
        Process::Rcv { var, then, else_ } => {
            bv.push(var.clone());
            choice(then, vals, procs, bv, bp);
            bv.pop();
            choice(else_, vals, procs, bv, bp);
        }
        Process::Tau(c) | Process::Sigma(c) => choice(c, vals, procs, bv, bp),
        Process::Fix(x, b) => {
            bp.push(x.clone());
            free_vars_into(b, vals, procs, bv, bp);
            bp.pop();
        }
    }
}

/// Free value variables and free process variables, sorted and deduplicated.
pub fn free_vars(p: &Process) -> (BTreeSet<Name>, BTreeSet<Name>) {
    let (mut v, mut x) = (Vec::new(), Vec::new());
    free_vars_into(p, &mut v, &mut x, &mut Vec::new(), &mut Vec::new());
    (v.into_iter().collect(), x.into_iter().collect())
}

pub fn is_closed(p: &Process) -> bool {
    let (v, x) = free_vars(p);
    v.is_empty() && x.is_empty()
}

/// Checks that every recursion variable occurs under a σ-prefix or in a timeout branch.
pub fn is_time_guarded(p: &Process) -> bool {
    fn go(p: &Process, unguarded: &mut Vec<Name>) -> bool {
        let all = |c: &Choice, ung: &mut Vec<Name>| c.branches().iter().all(|(_, q)| go(q, ung));
        match p {
            Process::Nil => true,
            Process::Var(x) => !unguarded.contains(x),
            Process::Bcast(_, c) | Process::Tau(c) => all(c, unguarded),
            Process::Sigma(c) => all(c, &mut Vec::new()),
            Process::Rcv { then, else_, .. } => all(then, unguarded) && all(else_, &mut Vec::new()),
            Process::Fix(x, b) => {
                let mut inner = unguarded.clone();
                inner.push(x.clone());
                go(b, &mut inner)
            }
        }
    }
    go(p, &mut Vec::new())
}

/// Closed values occurring syntactically.
pub fn values_of(p: &Process, out: &mut BTreeSet<Value>) {
    match p {
        Process::Nil | Process::Var(_) => {}
        Process::Bcast(t, c) => {
            if let Term::Val(v) = t {
                out.insert(v.clone());
            }
            c.branches().iter().for_each(|(_, q)| values_of(q, out));
        }
        Process::Rcv { then, else_, .. } => {
            then.branches().iter().chain(else_.branches()).for_each(|(_, q)| values_of(q, out));
        }
        Process::Tau(c) | Process::Sigma(c) => c.branches().iter().for_each(|(_, q)| values_of(q, out)),
        Process::Fix(_, b) => values_of(b, out),
    }
}

#[derive(Default)]
struct Renamer {
    procs: Vec<(Name, Name)>,
    vals: Vec<(Name, Name)>,
}

impl Renamer {
    fn lookup(stack: &[(Name, Name)], x: &Name) -> Name {
        stack.iter().rev().find(|(o, _)| o == x).map(|(_, n)| n.clone()).unwrap_or_else(|| x.clone())
    }

    fn choice(&mut self, c: &Choice) -> Choice {
        let mut merged: BTreeMap<Process, Q> = BTreeMap::new();
        for (w, p) in c.branches() {
            if w.is_zero() {
                continue;
            }
            *merged.entry(self.process(p)).or_insert_with(Q::zero) += w;
        }
        Choice(Arc::new(merged.into_iter().map(|(p, w)| (w, p)).collect()))
    }

    fn process(&mut self, p: &Process) -> Process {
        match p {
            Process::Nil => Process::Nil,
            Process::Var(x) => Process::Var(Self::lookup(&self.procs, x)),
            Process::Bcast(t, c) => {
                let t = match t {
                    Term::Var(x) => Term::Var(Self::lookup(&self.vals, x)),
                    v => v.clone(),
                };
                Process::Bcast(t, self.choice(c))
            }
            Process::Rcv { var, then, else_ } => {
                let fresh = name(&format!("x{}", self.vals.len()));
                self.vals.push((var.clone(), fresh.clone()));
                let then = self.choice(then);
                self.vals.pop();
                let else_ = self.choice(else_);
                Process::Rcv { var: fresh, then, else_ }
            }
            Process::Tau(c) => Process::Tau(self.choice(c)),
            Process::Sigma(c) => Process::Sigma(self.choice(c)),
            Process::Fix(x, b) => {
                let fresh = name(&format!("X{}", self.procs.len()));
                self.procs.push((x.clone(), fresh.clone()));
                let b = self.process(b);
                self.procs.pop();
                Process::Fix(fresh, Arc::new(b))
            }
        }
    }
}

/// α-normal form with binders renamed by depth and choices merged and sorted.
pub fn canonical_process(p: &Process) -> Process {
    Renamer::default().process(p)
}

/// `n[P]^ν`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Node {
    pub name: Name,
    pub nbrs: Arc<BTreeSet<Name>>,
    pub proc: Process,
}

impl Node {
    pub fn new(name_: &str, nbrs: &[&str], proc: Process) -> Self {
        Node { name: name(name_), nbrs: Arc::new(nbrs.iter().map(|s| name(s)).collect()), proc }
    }

    pub fn with_proc(&self, proc: Process) -> Self {
        Node { proc, ..self.clone() }
    }
}

/// Flat parallel composition of nodes, or the stuck network `⊥`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Network {
    Stuck,
    Par(Vec<Node>),
}

impl Network {
    pub fn empty() -> Self {
        Network::Par(Vec::new())
    }

    /// Canonical network built from `nodes`.
    pub fn of(nodes: Vec<Node>) -> Self {
        canonical_form(&Network::Par(nodes))
    }

    pub fn nodes(&self) -> &[Node] {
        match self {
            Network::Stuck => &[],
            Network::Par(ns) => ns,
        }
    }

    pub fn is_stuck(&self) -> bool {
        matches!(self, Network::Stuck)
    }

    pub fn node(&self, n: &str) -> Option<&Node> {
        self.nodes().iter().find(|x| &*x.name == n)
    }

    pub fn names(&self) -> BTreeSet<Name> {
        self.nodes().iter().map(|n| n.name.clone()).collect()
    }

    /// Parallel composition `M | N`; `⊥` absorbs.
    pub fn par(&self, other: &Network) -> Network {
        match (self, other) {
            (Network::Par(a), Network::Par(b)) => Network::of(a.iter().chain(b).cloned().collect()),
            _ => Network::Stuck,
        }
    }

    /// Replaces the process of node `n` (canonicalized).
    pub fn with_proc(&self, n: &str, proc: Process) -> Network {
        let nodes = self
            .nodes()
            .iter()
            .map(|x| if &*x.name == n { x.with_proc(canonical_process(&proc)) } else { x.clone() })
            .collect();
        Network::Par(nodes)
    }

    /// Sub-network of the named nodes.
    pub fn restrict(&self, keep: &BTreeSet<Name>) -> Network {
        Network::Par(self.nodes().iter().filter(|n| keep.contains(&n.name)).cloned().collect())
    }
}

/// `nds(M)`.
pub fn nodes(m: &Network) -> BTreeSet<Name> {
    m.names()
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
#[error("unknown node {0}")]
pub struct UnknownNode(pub Name);

/// `cell(n, M)`: the neighbor set of node `n`.
pub fn cell(n: &str, m: &Network) -> Result<BTreeSet<Name>, UnknownNode> {
    m.node(n).map(|x| (*x.nbrs).clone()).ok_or_else(|| UnknownNode(name(n)))
}

/// Sorts nodes, α-normalizes processes and merges equal choice branches.
pub fn canonical_form(m: &Network) -> Network {
    match m {
        Network::Stuck => Network::Stuck,
        Network::Par(ns) => {
            let mut ns: Vec<Node> = ns.iter().map(|n| n.with_proc(canonical_process(&n.proc))).collect();
            ns.sort_by(|a, b| a.name.cmp(&b.name));
            Network::Par(ns)
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, PartialOrd, Ord)]
pub enum Violation {
    SelfNeighbor(Name),
    DuplicateName(Name),
    Asymmetric { from: Name, to: Name },
    UnknownNeighbor { node: Name, nbr: Name },
    Disconnected(Vec<Vec<Name>>),
    NotClosed(Name),
    Unguarded(Name),
    StuckInput,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SelfNeighbor(n) => write!(f, "self-neighbor: {n} lists itself"),
            Violation::DuplicateName(n) => write!(f, "duplicate: node name {n} used twice"),
            Violation::Asymmetric { from, to } => {
                write!(f, "asymmetric: {from} lists {to} but {to} does not list {from}")
            }
            Violation::UnknownNeighbor { node, nbr } => {
                write!(f, "unknown-neighbor: {node} lists {nbr}, which is neither a node nor external")
            }
            Violation::Disconnected(cs) => {
                let parts: Vec<String> = cs.iter().map(|c| format!("{{{}}}", join(c))).collect();
                write!(f, "disconnected: components {}", parts.join(" "))
            }
            Violation::NotClosed(n) => write!(f, "not-closed: process of {n} has free variables"),
            Violation::Unguarded(n) => write!(f, "unguarded: recursion in {n} is not time-guarded"),
            Violation::StuckInput => write!(f, "stuck: the stuck network is not a valid input"),
        }
    }
}

fn join(names: &[Name]) -> String {
    names.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ")
}

/// Well-formedness over internal nodes; `externals` are exempt from symmetry and connectivity.
pub fn check_well_formed(m: &Network, externals: &BTreeSet<Name>) -> Result<(), Vec<Violation>> {
    let ns = match m {
        Network::Stuck => return Err(vec![Violation::StuckInput]),
        Network::Par(ns) => ns,
    };
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for n in ns {
        if !seen.insert(n.name.clone()) {
            out.push(Violation::DuplicateName(n.name.clone()));
        }
    }
    let by_name: BTreeMap<&Name, &Node> = ns.iter().map(|n| (&n.name, n)).collect();
    for n in ns {
        if n.nbrs.contains(&n.name) {
            out.push(Violation::SelfNeighbor(n.name.clone()));
        }
        for x in n.nbrs.iter() {
            if x == &n.name {
                continue;
            }
            match by_name.get(x) {
                Some(other) => {
                    if !other.nbrs.contains(&n.name) {
                        out.push(Violation::Asymmetric { from: n.name.clone(), to: x.clone() });
                    }
                }
                None if externals.contains(x) => {}
                None => out.push(Violation::UnknownNeighbor { node: n.name.clone(), nbr: x.clone() }),
            }
        }
        if !is_closed(&n.proc) {
            out.push(Violation::NotClosed(n.name.clone()));
        }
        if !is_time_guarded(&n.proc) {
            out.push(Violation::Unguarded(n.name.clone()));
        }
    }
    let comps = components(ns);
    if comps.len() > 1 {
        out.push(Violation::Disconnected(comps));
    }
    out.sort();
    out.dedup();
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

fn components(ns: &[Node]) -> Vec<Vec<Name>> {
    let names: BTreeSet<&Name> = ns.iter().map(|n| &n.name).collect();
    let mut adj: BTreeMap<&Name, BTreeSet<&Name>> = names.iter().map(|n| (*n, BTreeSet::new())).collect();
    for n in ns {
        for x in n.nbrs.iter().filter(|x| names.contains(x) && *x != &n.name) {
            adj.get_mut(&n.name).unwrap().insert(x);
            adj.get_mut(x).unwrap().insert(&n.name);
        }
    }
    let mut seen: BTreeSet<&Name> = BTreeSet::new();
    let mut out = Vec::new();
    for start in &names {
        if seen.contains(start) {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![*start];
        seen.insert(start);
        while let Some(n) = stack.pop() {
            comp.push(n.clone());
            for x in &adj[n] {
                if seen.insert(x) {
                    stack.push(x);
                }
            }
        }
        comp.sort();
        out.push(comp);
    }
    out
}

fn fmt_weight(w: &Q) -> String {
    if w.is_integer() {
        w.numer().to_string()
    } else {
        format!("{}/{}", w.numer(), w.denom())
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = self.as_det() {
            return write!(f, "{p}");
        }
        f.write_str("(")?;
        for (i, (w, p)) in self.branches().iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{}: {p}", fmt_weight(w))?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Val(v) => write!(f, "{v}"),
            Term::Var(x) => write!(f, "{x}"),
        }
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Process::Nil => f.write_str("nil"),
            Process::Bcast(t, c) => write!(f, "!<{t}>.{c}"),
            Process::Rcv { var, then, else_ } => write!(f, "?({var}).{then} else {else_}"),
            Process::Tau(c) => write!(f, "tau.{c}"),
            Process::Sigma(c) => write!(f, "sigma.{c}"),
            Process::Var(x) => write!(f, "{x}"),
            Process::Fix(x, b) => write!(f, "fix {x}.{b}"),
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nbrs: Vec<Name> = self.nbrs.iter().cloned().collect();
        write!(f, "node {} nbrs {{ {} }} proc {}", self.name, join(&nbrs), self.proc)
    }
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Network::Stuck => f.write_str("⊥"),
            Network::Par(ns) if ns.is_empty() => f.write_str("0"),
            Network::Par(ns) => {
                for (i, n) in ns.iter().enumerate() {
                    if i > 0 {
                        f.write_str("\n")?;
                    }
                    write!(f, "{n}")?;
                }
                Ok(())
            }
        }
    }
}

/// Compact one-line rendering `n[P] | m[Q]` for state dumps.
pub fn brief(m: &Network) -> String {
    match m {
        Network::Stuck => "⊥".into(),
        Network::Par(ns) if ns.is_empty() => "0".into(),
        Network::Par(ns) => ns.iter().map(|n| format!("{}[{}]", n.name, n.proc)).collect::<Vec<_>>().join(" | "),
    }
}
