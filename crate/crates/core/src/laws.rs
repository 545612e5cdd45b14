//! Algebraic laws of the simulation quasimetric as checked rewrite steps.
//!
//! Every law takes the network on the simulating side, checks its shape and
//! side conditions, and returns a [`Certificate`] stating
//! `left ⊑_r right` where `left` is the rewritten network and `r` a polynomial
//! in the gossip probability. Certificates chain by transitivity, nest under
//! σ-prefixes and combine through the composition laws.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use num_traits::{One, Zero};

use crate::calculus::{
    canonical_form, canonical_process, check_well_formed, head, name, subst_value, values_of, Choice, Name,
    Network, Node, Process, Term, Value,
};
use crate::gossip::{mk_fwd, mk_fwdc, mk_fwdu, mk_resnd, mk_resndc, mk_resndu, mk_snd};
use crate::poly::Poly;
use crate::semantics::{reachable_states, sigma_step, strong_steps, Env, Label, Lts, SemError, StateId};
use crate::Q;

mod replay;

pub use replay::{replay_at, replay_paper_derivations};

/// Identifiers of the laws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Law {
    Reflexivity,
    Transitivity,
    /// Timing rules 1 to 5.
    Timing(u8),
    TauIntro,
    TauElim,
    /// Simple laws 1 to 5.
    Simple(u8),
    Trivial,
    Parallel,
    Propagation,
    Collisions,
    RandomDelays,
    ComposeNetworks,
    ComposePaths,
    Concat,
    ConcatSigma,
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Law::Reflexivity => f.write_str("reflexivity"),
            Law::Transitivity => f.write_str("transitivity"),
            Law::Timing(i) => write!(f, "timing-{i}"),
            Law::TauIntro => f.write_str("tau-intro"),
            Law::TauElim => f.write_str("tau-elim"),
            Law::Simple(i) => write!(f, "simple-{i}"),
            Law::Trivial => f.write_str("trivial"),
            Law::Parallel => f.write_str("parallel"),
            Law::Propagation => f.write_str("propagation"),
            Law::Collisions => f.write_str("propagation-collisions"),
            Law::RandomDelays => f.write_str("propagation-random-delays"),
            Law::ComposeNetworks => f.write_str("compose-networks"),
            Law::ComposePaths => f.write_str("compose-paths"),
            Law::Concat => f.write_str("concat"),
            Law::ConcatSigma => f.write_str("concat-sigma"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// A process does not have the form the law rewrites.
    Shape,
    /// A topological or behavioural premise fails.
    SideCondition,
    /// Sub-certificates do not fit together.
    Mismatch,
    /// Branch weights are not a distribution.
    Weights,
    /// Exploring the semantics failed.
    Semantics,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Shape => "shape",
            ErrorKind::SideCondition => "side condition",
            ErrorKind::Mismatch => "mismatch",
            ErrorKind::Weights => "weights",
            ErrorKind::Semantics => "semantics",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{law}: {kind}: {detail}")]
pub struct LawError {
    pub law: Law,
    pub kind: ErrorKind,
    pub detail: String,
}

fn fail<T>(law: Law, kind: ErrorKind, detail: impl Into<String>) -> Result<T, LawError> {
    Err(LawError { law, kind, detail: detail.into() })
}

fn sem(law: Law, e: SemError) -> LawError {
    LawError { law, kind: ErrorKind::Semantics, detail: e.to_string() }
}

/// Parameters shared by every law application.
#[derive(Clone, Debug)]
pub struct Ctx {
    /// The concrete gossip probability the networks are built at.
    pub p: Q,
    pub env: Env,
    pub state_budget: usize,
}

impl Ctx {
    pub fn new(p: Q, env: Env) -> Self {
        Ctx { p, env, state_budget: 100_000 }
    }

    fn at(&self, poly: &Poly) -> Q {
        poly.eval(&self.p)
    }
}

/// A checked claim `left ⊑_r right` with `r = min(1, tolerance(p))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub law: Law,
    pub left: Network,
    pub right: Network,
    pub tolerance: Poly,
    pub evidence: Vec<String>,
    pub premises: Vec<Certificate>,
}

impl Certificate {
    fn new(law: Law, left: Network, right: Network, tolerance: Poly) -> Self {
        Certificate {
            law,
            left: canonical_form(&left),
            right: canonical_form(&right),
            tolerance,
            evidence: Vec::new(),
            premises: Vec::new(),
        }
    }

    fn note(mut self, s: impl Into<String>) -> Self {
        self.evidence.push(s.into());
        self
    }

    fn with_premises(mut self, ps: Vec<Certificate>) -> Self {
        self.premises = ps;
        self
    }

    /// The tolerance at `p`, capped at one.
    pub fn value(&self, p: &Q) -> Q {
        let v = self.tolerance.eval(p);
        if v > Q::one() {
            Q::one()
        } else {
            v
        }
    }

    /// Number of law applications in the derivation tree.
    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Certificate::size).sum::<usize>()
    }

    /// Law applications in post-order.
    pub fn steps(&self) -> Vec<&Certificate> {
        let mut out = Vec::new();
        fn walk<'a>(c: &'a Certificate, out: &mut Vec<&'a Certificate>) {
            for p in &c.premises {
                walk(p, out);
            }
            out.push(c);
        }
        walk(self, &mut out);
        out
    }

    /// Human-readable derivation with numbered steps; premises precede their uses.
    pub fn render(&self, p: &Q) -> String {
        let mut out = String::new();
        let mut next = 0usize;
        render_into(self, p, &mut out, &mut next);
        out
    }
}

fn render_into(c: &Certificate, p: &Q, out: &mut String, next: &mut usize) -> usize {
    let ids: Vec<usize> = c.premises.iter().map(|q| render_into(q, p, out, next)).collect();
    *next += 1;
    let id = *next;
    let v = c.value(p);
    out.push_str(&format!("[{id}] {}  r = {}  (= {v} at p = {p})\n", c.law, c.tolerance));
    if !ids.is_empty() {
        let refs: Vec<String> = ids.iter().map(|i| format!("[{i}]")).collect();
        out.push_str(&format!("    from {}\n", refs.join(" ")));
    }
    out.push_str(&format!("    left:  {}\n", crate::calculus::brief(&c.left)));
    out.push_str(&format!("    right: {}\n", crate::calculus::brief(&c.right)));
    for e in &c.evidence {
        out.push_str(&format!("    - {e}\n"));
    }
    id
}

/// `left ⊑_0 left`.
pub fn reflexivity(m: &Network) -> Certificate {
    Certificate::new(Law::Reflexivity, m.clone(), m.clone(), Poly::zero())
}

/// From `A ⊑_r B` and `B ⊑_s C` derives `A ⊑_{r+s} C`. Reflexive premises are dropped
/// and nested transitivity is flattened.
pub fn transitivity(ab: Certificate, bc: Certificate) -> Result<Certificate, LawError> {
    if ab.right != bc.left {
        return fail(
            Law::Transitivity,
            ErrorKind::Mismatch,
            format!(
                "middle networks differ: {} vs {}",
                crate::calculus::brief(&ab.right),
                crate::calculus::brief(&bc.left)
            ),
        );
    }
    if ab.law == Law::Reflexivity {
        return Ok(bc);
    }
    if bc.law == Law::Reflexivity {
        return Ok(ab);
    }
    let tol = &ab.tolerance + &bc.tolerance;
    let (left, right) = (ab.left.clone(), bc.right.clone());
    let mut premises = Vec::new();
    for c in [ab, bc] {
        if c.law == Law::Transitivity {
            premises.extend(c.premises);
        } else {
            premises.push(c);
        }
    }
    Ok(Certificate::new(Law::Transitivity, left, right, tol).with_premises(premises))
}

/// Rewrites a network step by step; each step's `right` is the current network.
pub struct Chain<'a> {
    ctx: &'a Ctx,
    cert: Certificate,
}

impl<'a> Chain<'a> {
    pub fn start(ctx: &'a Ctx, m: &Network) -> Self {
        Chain { ctx, cert: reflexivity(&canonical_form(m)) }
    }

    /// Continues rewriting the left side of `cert`.
    pub fn from(ctx: &'a Ctx, cert: Certificate) -> Self {
        Chain { ctx, cert }
    }

    pub fn current(&self) -> &Network {
        &self.cert.left
    }

    pub fn step(self, law: impl FnOnce(&Ctx, &Network) -> Result<Certificate, LawError>) -> Result<Self, LawError> {
        let s = law(self.ctx, &self.cert.left)?;
        self.then(s)
    }

    /// Appends a prepared certificate whose right side is the current network.
    pub fn then(self, s: Certificate) -> Result<Self, LawError> {
        let cert = transitivity(s, self.cert)?;
        Ok(Chain { ctx: self.ctx, cert })
    }

    pub fn finish(self) -> Certificate {
        self.cert
    }
}

/// Tolerance formulas of the compositional laws, shared with the certificates.
pub mod formula {
    use super::Poly;

    /// `∏(1 − pᵢ)`: no sender gossips.
    pub fn propagation(senders: &[Poly]) -> Poly {
        senders.iter().map(Poly::complement).product()
    }

    /// `1 − Σᵢ pᵢ ∏_{j≠i}(1 − pⱼ)`: not exactly one sender gossips.
    pub fn collisions(senders: &[Poly]) -> Poly {
        let exactly_one: Poly = (0..senders.len())
            .map(|i| {
                let others: Poly =
                    senders.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, q)| q.complement()).product();
                &senders[i] * &others
            })
            .sum();
        exactly_one.complement()
    }

    /// `p·q₁ + (1 − p)·q₂`.
    pub fn compose_networks(p: &Poly, q1: &Poly, q2: &Poly) -> Poly {
        &(p * q1) + &(&p.complement() * q2)
    }

    /// `Σ pᵢ·sᵢ`.
    pub fn compose_paths(parts: &[(Poly, Poly)]) -> Poly {
        parts.iter().map(|(p, s)| p * s).sum()
    }

    /// `a·(1 − q) + q`.
    pub fn concat(a: &Poly, q: &Poly) -> Poly {
        &(a * &q.complement()) + q
    }

    /// `p + q`; the certificate value caps it at one.
    pub fn parallel(p: &Poly, q: &Poly) -> Poly {
        p + q
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Capability {
    Transmit,
    Receive,
}

fn capable(p: &Process, want: Capability, seen: &mut Vec<Name>) -> bool {
    let any = |c: &Choice, seen: &mut Vec<Name>| c.branches().iter().any(|(_, q)| capable(q, want, seen));
    match p {
        Process::Nil | Process::Var(_) | Process::Sigma(_) => false,
        Process::Bcast(_, c) => want == Capability::Transmit || any(c, seen),
        Process::Rcv { then, .. } => want == Capability::Receive || any(then, seen),
        Process::Tau(c) => any(c, seen),
        Process::Fix(x, b) => {
            if seen.contains(x) {
                return false;
            }
            seen.push(x.clone());
            capable(b, want, seen)
        }
    }
}

/// Whether the process may broadcast before the next time step.
pub fn can_transmit_now(p: &Process) -> bool {
    capable(p, Capability::Transmit, &mut Vec::new())
}

/// Whether the process may wait on a reception before the next time step.
pub fn can_receive_now(p: &Process) -> bool {
    capable(p, Capability::Receive, &mut Vec::new())
}

const PROBE: &str = "\u{1}probe";

/// Explores `n[P]` next to a transmitting probe neighbor, never letting time pass.
fn probe_states(p: &Process, budget: usize) -> Result<(Lts, Vec<StateId>), SemError> {
    let mut env = Env { transmitters: BTreeSet::from([name(PROBE)]), ..Env::default() };
    values_of(p, &mut env.values);
    env.values.insert(Value::new(PROBE));
    let m = Network::of(vec![Node::new("n", &[PROBE], p.clone())]);
    let mut lts = Lts::new(env);
    let root = lts.intern(&m);
    let mut seen = vec![root];
    let mut queue = VecDeque::from([root]);
    let mut visited = BTreeSet::from([root]);
    while let Some(s) = queue.pop_front() {
        let net = lts.network(s).clone();
        for (l, d) in strong_steps(&net, &lts.env)? {
            if matches!(l, Label::Sigma) {
                continue;
            }
            for (t, _) in d.iter() {
                let id = lts.intern(t);
                if visited.insert(id) {
                    seen.push(id);
                    queue.push_back(id);
                }
            }
        }
        if visited.len() > budget {
            return Err(SemError::Budget(budget));
        }
    }
    Ok((lts, seen))
}

/// Semantic counterpart of [`can_transmit_now`], by exploring instantaneous steps.
pub fn can_transmit_now_semantic(p: &Process) -> Result<bool, SemError> {
    let (lts, states) = probe_states(p, 10_000)?;
    for s in states {
        for (l, _) in strong_steps(lts.network(s), &lts.env)? {
            if matches!(l, Label::Obs { .. } | Label::Snd { .. }) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Semantic counterpart of [`can_receive_now`]: some reachable state changes on a reception.
pub fn can_receive_now_semantic(p: &Process) -> Result<bool, SemError> {
    let (lts, states) = probe_states(p, 10_000)?;
    for s in states {
        let net = lts.network(s);
        for (l, d) in strong_steps(net, &lts.env)? {
            if matches!(l, Label::Rcv { .. }) && d.iter().any(|(t, _)| t != net) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

fn proc_of<'m>(law: Law, m: &'m Network, n: &str) -> Result<&'m Node, LawError> {
    match m.node(n) {
        Some(x) => Ok(x),
        None => fail(law, ErrorKind::Shape, format!("no node {n}")),
    }
}

fn same(a: &Process, b: &Process) -> bool {
    canonical_process(a) == canonical_process(b)
}

/// The unique closed value of a process.
fn sole_value(law: Law, n: &str, p: &Process) -> Result<Value, LawError> {
    let mut vs = BTreeSet::new();
    values_of(p, &mut vs);
    match vs.len() {
        1 => Ok(vs.into_iter().next().expect("one value")),
        k => fail(law, ErrorKind::Shape, format!("node {n} carries {k} values, expected one")),
    }
}

fn names_list<'a>(it: impl IntoIterator<Item = &'a Name>) -> String {
    let v: Vec<&str> = it.into_iter().map(|n| &**n).collect();
    format!("{{{}}}", v.join(","))
}

fn distinct(law: Law, names_: &[&str]) -> Result<(), LawError> {
    let set: BTreeSet<&str> = names_.iter().copied().collect();
    if set.len() != names_.len() {
        return fail(law, ErrorKind::Shape, "node names repeat");
    }
    Ok(())
}

/// Which forwarding discipline a propagation law rewrites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Discipline {
    Plain,
    Collisions,
    Delays(usize),
}

fn propagate(
    law: Law,
    discipline: Discipline,
    ctx: &Ctx,
    m: &Network,
    senders: &[(&str, Poly)],
    forwarders: &[(&str, Poly)],
) -> Result<Certificate, LawError> {
    if senders.is_empty() {
        return fail(law, ErrorKind::Shape, "no sender");
    }
    let all: Vec<&str> = senders.iter().chain(forwarders).map(|(n, _)| *n).collect();
    distinct(law, &all)?;
    let first = proc_of(law, m, senders[0].0)?;
    let v = sole_value(law, senders[0].0, &first.proc)?;
    let mut left = m.clone();
    let mut ev = Vec::new();
    for (s, w) in senders {
        let node = proc_of(law, m, s)?;
        let expect = mk_snd(&v, &ctx.at(w));
        if !same(&node.proc, &expect) {
            return fail(law, ErrorKind::Shape, format!("node {s} is not snd<{v}>_{}", w));
        }
        left = left.with_proc(s, Process::Nil);
    }
    for (f, w) in forwarders {
        let node = proc_of(law, m, f)?;
        let w = ctx.at(w);
        let (expect, becomes) = match discipline {
            Discipline::Plain => (mk_fwd(&w), mk_resnd(&v, &w)),
            Discipline::Collisions => (mk_fwdc(&w), mk_resndc(&v, &w)),
            Discipline::Delays(k) => (mk_fwdu(&w, k), mk_resndu(&v, &w, k)),
        };
        if !same(&node.proc, &expect) {
            return fail(law, ErrorKind::Shape, format!("node {f} is not the expected forwarder with p = {w}"));
        }
        left = left.with_proc(f, becomes);
    }
    let internal = m.names();
    let targets: BTreeSet<Name> = forwarders.iter().map(|(f, _)| name(f)).collect();
    let involved: BTreeSet<Name> = all.iter().map(|n| name(n)).collect();
    for (s, _) in senders {
        let nu = &*proc_of(law, m, s)?.nbrs;
        if !targets.is_subset(nu) {
            return fail(law, ErrorKind::SideCondition, format!("forwarders not all neighbors of {s}"));
        }
        if let Some(out) = nu.iter().find(|x| !internal.contains(*x)) {
            return fail(law, ErrorKind::SideCondition, format!("{s} has outside neighbor {out}"));
        }
        for x in nu.difference(&involved) {
            let p = &proc_of(law, m, x)?.proc;
            if can_receive_now(p) {
                return fail(law, ErrorKind::SideCondition, format!("neighbor {x} of {s} can receive"));
            }
        }
        ev.push(format!(
            "{} ⊆ nbrs({s}) = {} ⊆ nodes; other neighbors cannot receive",
            names_list(&targets),
            names_list(nu.iter())
        ));
    }
    let weights: Vec<Poly> = senders.iter().map(|(_, w)| w.clone()).collect();
    let tol = match discipline {
        Discipline::Plain => formula::propagation(&weights),
        Discipline::Collisions => formula::collisions(&weights),
        Discipline::Delays(_) => {
            if senders.len() != 1 || !ctx.at(&weights[0]).is_one() {
                return fail(law, ErrorKind::Shape, "random delays need a single certain sender");
            }
            Poly::zero()
        }
    };
    let mut c = Certificate::new(law, left, m.clone(), tol);
    c.evidence = ev;
    Ok(c)
}

/// Senders `snd⟨v⟩_{pᵢ}` reach forwarders `fwd_{qⱼ}`, which become `resnd⟨v⟩_{qⱼ}`;
/// tolerance `∏(1 − pᵢ)`.
pub fn propagation(
    ctx: &Ctx,
    m: &Network,
    senders: &[(&str, Poly)],
    forwarders: &[(&str, Poly)],
) -> Result<Certificate, LawError> {
    propagate(Law::Propagation, Discipline::Plain, ctx, m, senders, forwarders)
}

/// The collision-aware variant: `fwdc` becomes `resndc`, tolerance
/// `1 − Σ pᵢ ∏_{j≠i}(1 − pⱼ)`.
pub fn propagation_collisions(
    ctx: &Ctx,
    m: &Network,
    senders: &[(&str, Poly)],
    forwarders: &[(&str, Poly)],
) -> Result<Certificate, LawError> {
    propagate(Law::Collisions, Discipline::Collisions, ctx, m, senders, forwarders)
}

/// A certain sender `snd⟨v⟩₁` reaches `fwdu_{q,k}` forwarders exactly.
pub fn random_delays(
    ctx: &Ctx,
    m: &Network,
    sender: &str,
    forwarders: &[(&str, Poly)],
    k: usize,
) -> Result<Certificate, LawError> {
    propagate(Law::RandomDelays, Discipline::Delays(k), ctx, m, &[(sender, Poly::one())], forwarders)
}

/// `n[σᵏ.nil] → n[nil]`.
pub fn timing_nil(_ctx: &Ctx, m: &Network, n: &str) -> Result<Certificate, LawError> {
    let law = Law::Timing(1);
    let node = proc_of(law, m, n)?;
    let k = node.proc.sigma_depth();
    match node.proc.strip_sigma(k) {
        Some(Process::Nil) => {}
        _ => return fail(law, ErrorKind::Shape, format!("node {n} is not σᵏ.nil")),
    }
    Ok(Certificate::new(law, m.with_proc(n, Process::Nil), m.clone(), Poly::zero())
        .note(format!("{n}: σ^{k}.nil becomes nil")))
}

/// A receiver whose neighbors stay silent times out: `⌊?(x).C⌋D → σ.D`.
/// Rule 4 when the receiver is a fixpoint, rule 3 otherwise.
pub fn timing_timeout(ctx: &Ctx, m: &Network, n: &str) -> Result<Certificate, LawError> {
    let node = proc_of(Law::Timing(3), m, n)?;
    let law = if matches!(node.proc, Process::Fix(..)) { Law::Timing(4) } else { Law::Timing(3) };
    let else_ = match head(&node.proc) {
        Process::Rcv { else_, .. } => else_,
        _ => return fail(law, ErrorKind::Shape, format!("node {n} is not a receiver")),
    };
    for x in node.nbrs.iter() {
        match m.node(x) {
            Some(o) if can_transmit_now(&o.proc) => {
                return fail(law, ErrorKind::SideCondition, format!("neighbor {x} of {n} can transmit"));
            }
            Some(_) => {}
            None if ctx.env.transmitters.contains(x) => {
                return fail(law, ErrorKind::SideCondition, format!("outside neighbor {x} of {n} transmits"));
            }
            None => {}
        }
    }
    Ok(Certificate::new(law, m.with_proc(n, Process::Sigma(else_)), m.clone(), Poly::zero())
        .note(format!("no neighbor of {n} in {} can transmit", names_list(node.nbrs.iter()))))
}

/// Drops a sender `τ.(!v ⊕_q nil)` all of whose neighbors are internal and not listening.
pub fn no_trans(_ctx: &Ctx, m: &Network, n: &str) -> Result<Certificate, LawError> {
    let law = Law::Timing(5);
    let node = proc_of(law, m, n)?;
    let ok = match &node.proc {
        Process::Tau(c) => c.branches().iter().all(|(_, b)| match b {
            Process::Nil => true,
            Process::Bcast(Term::Val(_), k) => k.as_det().is_some_and(Process::is_nil),
            _ => false,
        }),
        _ => false,
    };
    if !ok {
        return fail(law, ErrorKind::Shape, format!("node {n} is not τ.(!v ⊕ nil)"));
    }
    for x in node.nbrs.iter() {
        match m.node(x) {
            None => return fail(law, ErrorKind::SideCondition, format!("{n} has outside neighbor {x}")),
            Some(o) if can_receive_now(&o.proc) => {
                return fail(law, ErrorKind::SideCondition, format!("neighbor {x} of {n} can receive"));
            }
            Some(_) => {}
        }
    }
    Ok(Certificate::new(law, m.with_proc(n, Process::Nil), m.clone(), Poly::zero())
        .note(format!("neighbors {} are internal and not receiving", names_list(node.nbrs.iter()))))
}

/// Applies `inner` below `k` σ-prefixes: every node must be `σᵏ.P` or `nil`.
pub fn under_sigma(
    ctx: &Ctx,
    m: &Network,
    k: usize,
    inner: impl FnOnce(&Ctx, &Network) -> Result<Certificate, LawError>,
) -> Result<Certificate, LawError> {
    let law = Law::Timing(2);
    if k == 0 {
        return inner(ctx, m);
    }
    let mut prefixed = BTreeSet::new();
    let mut stripped = Vec::new();
    for node in m.nodes() {
        match node.proc.strip_sigma(k) {
            Some(p) => {
                prefixed.insert(node.name.clone());
                stripped.push(node.with_proc(p));
            }
            None if node.proc.is_nil() => stripped.push(node.clone()),
            None => return fail(law, ErrorKind::Shape, format!("node {} is neither σ^{k}-prefixed nor nil", node.name)),
        }
    }
    let stripped = Network::of(stripped);
    let c = inner(ctx, &stripped)?;
    if c.right != stripped {
        return fail(law, ErrorKind::Mismatch, "inner certificate is about another network");
    }
    let mut left = Vec::new();
    for node in c.left.nodes() {
        if prefixed.contains(&node.name) {
            left.push(node.with_proc(Process::sigma_pow(k, node.proc.clone())));
        } else if node.proc.is_nil() {
            left.push(node.clone());
        } else {
            return fail(law, ErrorKind::Mismatch, format!("inner step changed unprefixed node {}", node.name));
        }
    }
    let tol = c.tolerance.clone();
    Ok(Certificate::new(law, Network::of(left), m.clone(), tol)
        .note(format!("under σ^{k}"))
        .with_premises(vec![c]))
}

/// Lifts a law under `k` σ-prefixes, for use with [`Chain::step`].
pub fn under<F>(k: usize, inner: F) -> impl FnOnce(&Ctx, &Network) -> Result<Certificate, LawError>
where
    F: FnOnce(&Ctx, &Network) -> Result<Certificate, LawError>,
{
    move |ctx, m| under_sigma(ctx, m, k, inner)
}

/// `n[P] → n[τ.P]` for a process that is not receiving.
pub fn tau_intro(_ctx: &Ctx, m: &Network, n: &str) -> Result<Certificate, LawError> {
    let law = Law::TauIntro;
    let node = proc_of(law, m, n)?;
    if can_receive_now(&node.proc) {
        return fail(law, ErrorKind::SideCondition, format!("node {n} can receive"));
    }
    Ok(Certificate::new(law, m.with_proc(n, Process::tau(node.proc.clone().then())), m.clone(), Poly::zero())
        .note(format!("{n} cannot receive")))
}

/// `n[τ.P] → n[P]`.
pub fn tau_elim(_ctx: &Ctx, m: &Network, n: &str) -> Result<Certificate, LawError> {
    let law = Law::TauElim;
    let node = proc_of(law, m, n)?;
    let inner = match &node.proc {
        Process::Tau(c) => match c.as_det() {
            Some(p) => p.clone(),
            None => return fail(law, ErrorKind::Shape, format!("node {n} has a probabilistic τ")),
        },
        _ => return fail(law, ErrorKind::Shape, format!("node {n} is not τ-prefixed")),
    };
    Ok(Certificate::new(law, m.with_proc(n, inner), m.clone(), Poly::zero()))
}

fn tau_branches(law: Law, m: &Network, n: &str) -> Result<Vec<(Q, Process)>, LawError> {
    match &proc_of(law, m, n)?.proc {
        Process::Tau(c) => Ok(c.branches().to_vec()),
        _ => fail(law, ErrorKind::Shape, format!("node {n} is not τ-prefixed")),
    }
}

fn weight_of(branches: &[(Q, Process)], target: &Process) -> Q {
    branches.iter().filter(|(_, p)| same(p, target)).fold(Q::zero(), |a, (w, _)| a + w)
}

/// `n[P] ⊑_{1−w} n[τ.(P ⊕_w Q)]`: commit to one branch.
pub fn simple1(ctx: &Ctx, m: &Network, n: &str, target: &Process, w: &Poly) -> Result<Certificate, LawError> {
    let law = Law::Simple(1);
    let bs = tau_branches(law, m, n)?;
    let got = weight_of(&bs, target);
    if got != ctx.at(w) {
        return fail(law, ErrorKind::Weights, format!("branch weight {got}, claimed {}", ctx.at(w)));
    }
    Ok(Certificate::new(law, m.with_proc(n, target.clone()), m.clone(), w.complement()))
}

/// `n[Q] ⊑_{(1−p)+pq} n[τ.(τ.(P ⊕_q Q) ⊕_p R)]`.
pub fn simple2(
    ctx: &Ctx,
    m: &Network,
    n: &str,
    target: &Process,
    p: &Poly,
    q: &Poly,
) -> Result<Certificate, LawError> {
    let law = Law::Simple(2);
    let bs = tau_branches(law, m, n)?;
    let (pv, qv) = (ctx.at(p), ctx.at(q));
    let found = bs.iter().any(|(w, b)| {
        *w == pv
            && matches!(b, Process::Tau(c) if weight_of(c.branches(), target) == Q::one() - &qv)
    });
    if !found {
        return fail(law, ErrorKind::Shape, format!("no branch τ.(… ⊕ {} : target) of weight {pv}", Q::one() - &qv));
    }
    let tol = &p.complement() + &(p * q);
    Ok(Certificate::new(law, m.with_proc(n, target.clone()), m.clone(), tol))
}

/// Flattens nested τ-choices: `τ.(⊕ pᵢ: τ.(⊕ qᵢⱼ: Pᵢⱼ)) ≃ τ.(⊕ pᵢqᵢⱼ: Pᵢⱼ)`;
/// branches that are not τ-prefixed are kept.
pub fn simple3(_ctx: &Ctx, m: &Network, n: &str) -> Result<Certificate, LawError> {
    let law = Law::Simple(3);
    let bs = tau_branches(law, m, n)?;
    if !bs.iter().any(|(_, b)| matches!(b, Process::Tau(_))) {
        return fail(law, ErrorKind::Shape, format!("node {n} has no nested τ-choice"));
    }
    let mut flat = Vec::new();
    for (w, b) in bs {
        match b {
            Process::Tau(c) => flat.extend(c.branches().iter().map(|(x, p)| (&w * x, p.clone()))),
            other => flat.push((w, other)),
        }
    }
    let c = Choice::new(flat).map_err(|e| LawError { law, kind: ErrorKind::Weights, detail: e.to_string() })?;
    Ok(Certificate::new(law, m.with_proc(n, Process::tau(c)), m.clone(), Poly::zero()))
}

/// `n[!v.(P ⊕_p τ.Q)] ≃ n[!v.(τ.(P ⊕_q τ.P) ⊕_p Q)]`, rewriting the right-hand form.
pub fn simple4(_ctx: &Ctx, m: &Network, n: &str) -> Result<Certificate, LawError> {
    let law = Law::Simple(4);
    let node = proc_of(law, m, n)?;
    let (t, c) = match &node.proc {
        Process::Bcast(t, c) => (t.clone(), c.clone()),
        _ => return fail(law, ErrorKind::Shape, format!("node {n} is not a broadcast")),
    };
    let Some((i, inner)) = c.branches().iter().enumerate().find_map(|(i, (_, b))| match b {
        Process::Tau(d) => {
            let bs = d.branches();
            let p = bs.iter().find_map(|(_, x)| bs.iter().any(|(_, y)| same(y, &Process::tau(x.clone().then()))).then(|| x.clone()));
            p.map(|p| (i, p))
        }
        _ => None,
    }) else {
        return fail(law, ErrorKind::Shape, "no branch τ.(P ⊕ τ.P)");
    };
    let branches: Vec<(Q, Process)> = c
        .branches()
        .iter()
        .enumerate()
        .map(|(j, (w, b))| if j == i { (w.clone(), inner.clone()) } else { (w.clone(), Process::tau(b.clone().then())) })
        .collect();
    let c = Choice::new(branches).map_err(|e| LawError { law, kind: ErrorKind::Weights, detail: e.to_string() })?;
    Ok(Certificate::new(law, m.with_proc(n, Process::Bcast(t, c)), m.clone(), Poly::zero()).note("holds both ways"))
}

/// `n[!v.!w] ⊑_{1−pq} n[τ.(!v.τ.(!w ⊕_q P) ⊕_p Q)]`.
pub fn simple5(ctx: &Ctx, m: &Network, n: &str, p: &Poly, q: &Poly) -> Result<Certificate, LawError> {
    let law = Law::Simple(5);
    let bs = tau_branches(law, m, n)?;
    let (pv, qv) = (ctx.at(p), ctx.at(q));
    let found = bs.iter().find_map(|(w, b)| {
        if *w != pv {
            return None;
        }
        let Process::Bcast(t1, k) = b else { return None };
        let Process::Tau(c2) = k.as_det()? else { return None };
        c2.branches().iter().find_map(|(x, b2)| match b2 {
            Process::Bcast(t2, k2) if *x == qv && k2.as_det().is_some_and(Process::is_nil) => {
                Some((t1.clone(), t2.clone()))
            }
            _ => None,
        })
    });
    let Some((t1, t2)) = found else {
        return fail(law, ErrorKind::Shape, format!("node {n} is not τ.(!v.τ.(!w ⊕_{qv} P) ⊕_{pv} Q)"));
    };
    let left = Process::Bcast(t1, Process::Bcast(t2, Process::Nil.then()).then());
    let tol = (p * q).complement();
    Ok(Certificate::new(law, m.with_proc(n, left), m.clone(), tol))
}

/// Any two networks are at distance at most one.
pub fn trivial(left: &Network, right: &Network) -> Certificate {
    Certificate::new(Law::Trivial, left.clone(), right.clone(), Poly::one())
}

/// `M|O ⊑_{r+s} N|P` from `M ⊑_r N` and `O ⊑_s P` over disjoint node names.
pub fn parallel(a: Certificate, b: Certificate) -> Result<Certificate, LawError> {
    let law = Law::Parallel;
    let na: BTreeSet<Name> = a.left.names().union(&a.right.names()).cloned().collect();
    let nb: BTreeSet<Name> = b.left.names().union(&b.right.names()).cloned().collect();
    if let Some(x) = na.intersection(&nb).next() {
        return fail(law, ErrorKind::SideCondition, format!("node {x} occurs on both sides"));
    }
    let tol = formula::parallel(&a.tolerance, &b.tolerance);
    Ok(Certificate::new(law, a.left.par(&b.left), a.right.par(&b.right), tol).with_premises(vec![a, b]))
}

/// Splits on whether sender `m` gossips.
///
/// `o` has `m[snd⟨v⟩_p]` and receivers `J`, each headed by `⌊?(x).Pⱼ⌋Qⱼ`.
/// `with` is about `o` after delivery (`m` nil, `Pⱼ{v/x}`), `without` about `o` with `m`
/// silent. Both must share their left side.
pub fn compose_networks(
    ctx: &Ctx,
    o: &Network,
    m: &str,
    receivers: &[&str],
    p: &Poly,
    with: Certificate,
    without: Certificate,
) -> Result<Certificate, LawError> {
    let law = Law::ComposeNetworks;
    let mut all = vec![m];
    all.extend_from_slice(receivers);
    distinct(law, &all)?;
    let sender = proc_of(law, o, m)?;
    let v = sole_value(law, m, &sender.proc)?;
    if !same(&sender.proc, &mk_snd(&v, &ctx.at(p))) {
        return fail(law, ErrorKind::Shape, format!("node {m} is not snd<{v}>_{p}"));
    }
    let silent = o.with_proc(m, Process::Nil);
    let mut delivered = silent.clone();
    for r in receivers {
        let node = proc_of(law, o, r)?;
        match head(&node.proc) {
            Process::Rcv { var, then, .. } => match then.as_det() {
                Some(body) => delivered = delivered.with_proc(r, subst_value(body, &var, &v)),
                None => return fail(law, ErrorKind::Shape, format!("receiver {r} continues probabilistically")),
            },
            _ => return fail(law, ErrorKind::Shape, format!("node {r} is not a receiver")),
        }
    }
    if with.right != canonical_form(&delivered) {
        return fail(law, ErrorKind::Mismatch, "first premise is not about the delivered network");
    }
    if without.right != canonical_form(&silent) {
        return fail(law, ErrorKind::Mismatch, "second premise is not about the silent network");
    }
    if with.left != without.left {
        return fail(law, ErrorKind::Mismatch, "premises have different left sides");
    }
    let nu = &*sender.nbrs;
    let targets: BTreeSet<Name> = receivers.iter().map(|r| name(r)).collect();
    if !targets.is_subset(nu) {
        return fail(law, ErrorKind::SideCondition, format!("receivers not all neighbors of {m}"));
    }
    for x in nu.difference(&targets) {
        match o.node(x) {
            None => return fail(law, ErrorKind::SideCondition, format!("{m} has outside neighbor {x}")),
            Some(n) if can_receive_now(&n.proc) => {
                return fail(law, ErrorKind::SideCondition, format!("neighbor {x} of {m} can receive"));
            }
            Some(_) => {}
        }
    }
    let tol = formula::compose_networks(p, &with.tolerance, &without.tolerance);
    let left = with.left.clone();
    let time = if sigma_step(&left).is_some() { "can" } else { "cannot" };
    Ok(Certificate::new(law, left, o.clone(), tol)
        .note(format!("{} ⊆ nbrs({m}) ⊆ nodes; other neighbors cannot receive", names_list(&targets)))
        .note(format!("left side {time} let time pass"))
        .with_premises(vec![with, without]))
}

/// Splits on the branches of `m[τ.(⊕ wᵢ: Qᵢ)]`. Branch `i` is certified by a premise about
/// `o` with `m[Qᵢ]` whose left side is idle except at `dest`; the result has
/// `dest[τ.(⊕ wᵢ: Pᵢ)]`.
pub fn compose_paths(
    ctx: &Ctx,
    o: &Network,
    m: &str,
    dest: &str,
    branches: Vec<(Poly, Certificate)>,
) -> Result<Certificate, LawError> {
    let law = Law::ComposePaths;
    let total: Poly = branches.iter().map(|(w, _)| w.clone()).sum();
    if total != Poly::one() {
        return fail(law, ErrorKind::Weights, format!("weights sum to {total}"));
    }
    let node = proc_of(law, o, m)?;
    let mut expect = Vec::new();
    let mut dest_branches = Vec::new();
    let mut dest_node: Option<Node> = None;
    for (i, (w, c)) in branches.iter().enumerate() {
        let qi = match c.right.node(m) {
            Some(n) => n.proc.clone(),
            None => return fail(law, ErrorKind::Mismatch, format!("premise {i} has no node {m}")),
        };
        if c.right != canonical_form(&o.with_proc(m, qi.clone())) {
            return fail(law, ErrorKind::Mismatch, format!("premise {i} differs from the network outside {m}"));
        }
        for n in c.left.nodes() {
            if &*n.name != dest && !n.proc.is_nil() {
                return fail(law, ErrorKind::Shape, format!("premise {i}: node {} is not nil", n.name));
            }
        }
        let d = match c.left.node(dest) {
            Some(d) => d.clone(),
            None => return fail(law, ErrorKind::Shape, format!("premise {i} has no node {dest}")),
        };
        if c.left.names() != o.names() {
            return fail(law, ErrorKind::Mismatch, format!("premise {i} has other node names"));
        }
        if dest_node.as_ref().is_some_and(|x| x.nbrs != d.nbrs) {
            return fail(law, ErrorKind::Mismatch, format!("premise {i} changes the neighbors of {dest}"));
        }
        dest_branches.push((ctx.at(w), d.proc.clone()));
        expect.push((ctx.at(w), qi));
        dest_node = Some(d);
    }
    let wrong = |e: crate::calculus::ChoiceError| LawError { law, kind: ErrorKind::Weights, detail: e.to_string() };
    let expect = Process::tau(Choice::normalized(expect).map_err(wrong)?);
    if !same(&node.proc, &expect) {
        return fail(law, ErrorKind::Mismatch, format!("node {m} is not τ over the premises' processes"));
    }
    let ext = ctx.env.externals();
    if let Err(vs) = check_well_formed(o, &ext) {
        let vs: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
        return fail(law, ErrorKind::SideCondition, format!("ill-formed network: {}", vs.join("; ")));
    }
    let d = Process::tau(Choice::normalized(dest_branches).map_err(wrong)?);
    let left = branches[0].1.left.with_proc(dest, d);
    let parts: Vec<(Poly, Poly)> = branches.iter().map(|(w, c)| (w.clone(), c.tolerance.clone())).collect();
    let tol = formula::compose_paths(&parts);
    Ok(Certificate::new(law, left, o.clone(), tol)
        .note(format!("branches of {m} resolved into {dest}"))
        .with_premises(branches.into_iter().map(|(_, c)| c).collect()))
}

/// Largest probability with which `from` reaches exactly `target` by τ-steps alone.
pub fn max_tau_reach(env: &Env, from: &Network, target: &Network, budget: usize) -> Result<Q, SemError> {
    let (lts, root) = reachable_states(from, env, budget)?;
    let goal = lts.lookup(target);
    fn value(lts: &Lts, s: StateId, goal: Option<StateId>, memo: &mut HashMap<StateId, Q>) -> Q {
        if Some(s) == goal {
            return Q::one();
        }
        if let Some(v) = memo.get(&s) {
            return v.clone();
        }
        memo.insert(s, Q::zero());
        let mut best = Q::zero();
        for st in lts.steps(s) {
            if !st.label.is_tau() {
                continue;
            }
            let v = st.dist.iter().fold(Q::zero(), |a, (t, w)| a + w * value(lts, *t, goal, memo));
            if v > best {
                best = v;
            }
        }
        memo.insert(s, best.clone());
        best
    }
    Ok(value(&lts, root, goal, &mut HashMap::new()))
}

/// From `M ⊑_a N` and `N ⊑_q O` derives `M ⊑_{a(1−q)+q} O`, provided `O` reaches `N`
/// by τ-steps with probability at least `1 − q`.
pub fn concat(ctx: &Ctx, mn: Certificate, no: Certificate) -> Result<Certificate, LawError> {
    let law = Law::Concat;
    if mn.right != no.left {
        return fail(law, ErrorKind::Mismatch, "middle networks differ");
    }
    let need = no.value(&ctx.p).clone();
    let need = Q::one() - need;
    let got = max_tau_reach(&ctx.env, &no.right, &no.left, ctx.state_budget).map_err(|e| sem(law, e))?;
    if got < need {
        return fail(law, ErrorKind::SideCondition, format!("τ-reach probability {got} below {need}"));
    }
    let tol = formula::concat(&mn.tolerance, &no.tolerance);
    Ok(Certificate::new(law, mn.left.clone(), no.right.clone(), tol)
        .note(format!("τ-reaches the middle network with probability {got} ≥ {need}"))
        .with_premises(vec![mn, no]))
}

/// The timed variant: `N` only lets time pass, to some `N'` without τ-steps, and `O`
/// σ-steps to `O'`, which τ-reaches `N'` with probability at least `1 − q`.
pub fn concat_sigma(ctx: &Ctx, mn: Certificate, no: Certificate) -> Result<Certificate, LawError> {
    let law = Law::ConcatSigma;
    if mn.right != no.left {
        return fail(law, ErrorKind::Mismatch, "middle networks differ");
    }
    let n = &no.left;
    let steps = strong_steps(n, &ctx.env).map_err(|e| sem(law, e))?;
    let n1 = match steps.as_slice() {
        [(Label::Sigma, d)] if d.len() == 1 => d.support().next().expect("dirac").clone(),
        _ => return fail(law, ErrorKind::SideCondition, "middle network does more than let time pass"),
    };
    let after = strong_steps(&n1, &ctx.env).map_err(|e| sem(law, e))?;
    if after.iter().any(|(l, _)| l.is_tau()) {
        return fail(law, ErrorKind::SideCondition, "middle network has a τ-step after time passes");
    }
    let o1 = match sigma_step(&no.right) {
        Some(d) if d.len() == 1 => d.support().next().expect("dirac").clone(),
        _ => return fail(law, ErrorKind::SideCondition, "outer network has no deterministic σ-step"),
    };
    let need = Q::one() - no.value(&ctx.p);
    let got = max_tau_reach(&ctx.env, &o1, &n1, ctx.state_budget).map_err(|e| sem(law, e))?;
    if got < need {
        return fail(law, ErrorKind::SideCondition, format!("τ-reach probability {got} below {need}"));
    }
    let tol = formula::concat(&mn.tolerance, &no.tolerance);
    Ok(Certificate::new(law, mn.left.clone(), no.right.clone(), tol)
        .note("middle network only lets time pass".to_string())
        .note(format!("after σ, τ-reaches it with probability {got} ≥ {need}"))
        .with_premises(vec![mn, no]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gossip::{case_env, message, mk_resndc};
    use crate::{q, qi};

    fn p() -> Poly {
        Poly::p()
    }

    #[test]
    fn tolerance_formulas() {
        let two = [p(), p()];
        assert_eq!(formula::propagation(&two).eval(&q(4, 5)), q(1, 25));
        assert_eq!(formula::collisions(&two).eval(&q(1, 2)), q(1, 2));
        assert_eq!(formula::collisions(&[p()]), p().complement());
        assert_eq!(formula::concat(&Poly::zero(), &p()), p());
        assert_eq!(formula::compose_networks(&p(), &Poly::zero(), &Poly::one()), p().complement());
    }

    #[test]
    fn capabilities() {
        let v = message();
        let one = qi(1);
        assert!(can_transmit_now(&mk_snd(&v, &q(1, 2))));
        assert!(!can_transmit_now(&mk_resnd(&v, &one)));
        assert!(!can_transmit_now(&mk_fwd(&one)));
        assert!(can_receive_now(&mk_fwd(&one)));
        assert!(!can_transmit_now(&mk_resndc(&v, &one)));
        assert!(can_receive_now(&mk_resndc(&v, &one)));
        assert!(!can_receive_now(&mk_snd(&v, &one)));
        for pr in [mk_snd(&v, &q(1, 2)), mk_fwd(&one), mk_resndc(&v, &one), mk_resnd(&v, &one), Process::Nil] {
            assert_eq!(can_transmit_now(&pr), can_transmit_now_semantic(&pr).unwrap(), "{pr}");
            assert_eq!(can_receive_now(&pr), can_receive_now_semantic(&pr).unwrap(), "{pr}");
        }
    }

    #[test]
    fn transitivity_adds_and_checks_middle() {
        let ctx = Ctx::new(q(1, 2), case_env());
        let m = crate::gossip::build_case(crate::gossip::CaseId::Gsp(1), &ctx.p);
        let a = propagation(&ctx, &m, &[("s1", p()), ("s2", p())], &[("d", Poly::one())]).unwrap();
        assert_eq!(a.value(&ctx.p), q(1, 4));
        let r = transitivity(reflexivity(&a.left), a.clone()).unwrap();
        assert_eq!(r, a);
        assert!(transitivity(a.clone(), a).is_err());
    }

    #[test]
    fn timeout_refuses_live_neighbor() {
        let ctx = Ctx::new(q(1, 2), case_env());
        let m = crate::gossip::build_case(crate::gossip::CaseId::Gsp(1), &ctx.p);
        let e = timing_timeout(&ctx, &m, "d").unwrap_err();
        assert_eq!(e.kind, ErrorKind::SideCondition);
    }
}
