//! Gossip processes and the catalog of case-study networks.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};

use crate::calculus::{Choice, Network, Node, Process, Term, Value};
use crate::poly::Poly;
use crate::semantics::Env;
use crate::{q, Q};

/// Name of the observer outside every case network.
pub const TESTER: &str = "tester";
/// The message propagated in every case.
pub const MESSAGE: &str = "v";

/// Gossip probability and delay window of the randomized variant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GossipParams {
    pub p: Q,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParamError {
    #[error("gossip probability {0} outside [0,1]")]
    Probability(Q),
    #[error("delay window must be at least 1")]
    Window,
}

impl GossipParams {
    pub fn new(p: Q, k: usize) -> Result<Self, ParamError> {
        if p < Q::zero() || p > Q::one() {
            return Err(ParamError::Probability(p));
        }
        if k == 0 {
            return Err(ParamError::Window);
        }
        Ok(GossipParams { p, k })
    }
}

fn snd_term(t: Term, p: &Q) -> Process {
    Process::tau(Choice::binary(p.clone(), Process::Bcast(t, Process::Nil.then()), Process::Nil))
}

fn var(x: &str) -> Term {
    Term::Var(crate::calculus::name(x))
}

/// `snd⟨v⟩_p = τ.(!⟨v⟩ ⊕_p nil)`.
pub fn mk_snd(v: &Value, p: &Q) -> Process {
    snd_term(Term::Val(v.clone()), p)
}

/// `resnd⟨v⟩_p = σ.snd⟨v⟩_p`.
pub fn mk_resnd(v: &Value, p: &Q) -> Process {
    Process::sigma(mk_snd(v, p).then())
}

/// `rcv(x).C = fix X.⌊?(x).C⌋X`.
pub fn mk_rcv(x: &str, body: Process) -> Process {
    Process::fix("X", Process::rcv(x, body.then(), Process::var("X").then()))
}

/// `fwd_p = rcv(x).resnd⟨x⟩_p`.
pub fn mk_fwd(p: &Q) -> Process {
    mk_rcv("x", Process::sigma(snd_term(var("x"), p).then()))
}

fn resndc_term(t: Term, p: &Q) -> Process {
    Process::rcv("y", Process::Nil.then(), snd_term(t, p).then())
}

/// `resndc⟨v⟩_p = ⌊?(y).nil⌋snd⟨v⟩_p`: a second reception in the same round aborts.
pub fn mk_resndc(v: &Value, p: &Q) -> Process {
    resndc_term(Term::Val(v.clone()), p)
}

/// `fwdc_p = rcv(x).resndc⟨x⟩_p`.
pub fn mk_fwdc(p: &Q) -> Process {
    mk_rcv("x", resndc_term(var("x"), p))
}

/// `τ.(⊕ᵢ 1/k : σⁱ.snd⟨t⟩₁)` for `i = 1..k`.
fn delays(t: &Term, k: usize) -> Process {
    let w = q(1, k as i64);
    let one = Q::one();
    let branches = (1..=k).map(|i| (w.clone(), Process::sigma_pow(i, snd_term(t.clone(), &one)))).collect();
    Process::tau(Choice::new(branches).expect("uniform delay weights"))
}

fn sndu_term(t: Term, p: &Q, k: usize) -> Process {
    Process::tau(Choice::binary(p.clone(), delays(&t, k), Process::Nil))
}

/// `sndu⟨v⟩_{p,k} = τ.(τ.(⊕ᵢ 1/k : σⁱ.snd⟨v⟩₁) ⊕_p nil)`.
pub fn mk_sndu(v: &Value, p: &Q, k: usize) -> Process {
    sndu_term(Term::Val(v.clone()), p, k)
}

/// The delayed-sender core `τ.(⊕ᵢ 1/k : σⁱ.snd⟨v⟩₁)` left after a successful gossip coin.
pub fn mk_delays(v: &Value, k: usize) -> Process {
    delays(&Term::Val(v.clone()), k)
}

fn resndu_term(t: Term, p: &Q, k: usize) -> Process {
    Process::rcv("y", Process::Nil.then(), sndu_term(t, p, k).then())
}

/// `resndu⟨v⟩_{p,k} = ⌊?(y).nil⌋sndu⟨v⟩_{p,k}`.
pub fn mk_resndu(v: &Value, p: &Q, k: usize) -> Process {
    resndu_term(Term::Val(v.clone()), p, k)
}

/// `fwdu_{p,k} = rcv(x).resndu⟨x⟩_{p,k}`.
pub fn mk_fwdu(p: &Q, k: usize) -> Process {
    mk_rcv("x", resndu_term(var("x"), p, k))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CaseId {
    Gsp(u8),
    Done(u8),
}

impl CaseId {
    pub const GOSSIP: [CaseId; 6] =
        [CaseId::Gsp(1), CaseId::Gsp(2), CaseId::Gsp(3), CaseId::Gsp(4), CaseId::Gsp(5), CaseId::Gsp(6)];

    pub fn index(self) -> u8 {
        match self {
            CaseId::Gsp(i) | CaseId::Done(i) => i,
        }
    }

    /// The idealized counterpart of a gossip network.
    pub fn done(self) -> CaseId {
        CaseId::Done(self.index())
    }

    pub fn all() -> Vec<CaseId> {
        (1..=6).flat_map(|i| [CaseId::Gsp(i), CaseId::Done(i)]).collect()
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseId::Gsp(i) => write!(f, "GSP{i}"),
            CaseId::Done(i) => write!(f, "DONE{i}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown case {0:?}; expected GSP1..GSP6 or DONE1..DONE6")]
pub struct UnknownCase(pub String);

impl FromStr for CaseId {
    type Err = UnknownCase;
    fn from_str(s: &str) -> Result<Self, UnknownCase> {
        let up = s.trim().to_ascii_uppercase();
        let (ctor, rest): (fn(u8) -> CaseId, &str) = if let Some(r) = up.strip_prefix("GSP") {
            (CaseId::Gsp, r)
        } else if let Some(r) = up.strip_prefix("DONE") {
            (CaseId::Done, r)
        } else {
            return Err(UnknownCase(s.to_string()));
        };
        match rest.parse::<u8>() {
            Ok(i) if (1..=6).contains(&i) => Ok(ctor(i)),
            _ => Err(UnknownCase(s.to_string())),
        }
    }
}

/// The case networks' environment: `tester` listens and never transmits.
pub fn case_env() -> Env {
    let mut env = Env::listening(&[TESTER]);
    env.values.insert(message());
    env
}

pub fn message() -> Value {
    Value::new(MESSAGE)
}

/// Neighbor sets of the three topologies used by the catalog.
pub fn topology(id: CaseId) -> Vec<(&'static str, Vec<&'static str>)> {
    match id.index() {
        1 | 4 | 6 => vec![("s1", vec!["d"]), ("s2", vec!["d"]), ("d", vec!["s1", "s2", TESTER])],
        2 | 5 => vec![
            ("s1", vec!["n1"]),
            ("s2", vec!["n1", "n2"]),
            ("n1", vec!["s1", "s2", "n3"]),
            ("n2", vec!["s2", "n3"]),
            ("n3", vec!["n1", "n2", "d"]),
            ("d", vec!["n3", TESTER]),
        ],
        3 => vec![("s1", vec!["d"]), ("s2", vec!["n"]), ("n", vec!["s2", "d"]), ("d", vec!["s1", "n", TESTER])],
        _ => unreachable!("case index in 1..=6"),
    }
}

/// Builds a network on the case topology with `proc(name)` at each node.
pub fn on_topology(id: CaseId, mut proc: impl FnMut(&str) -> Process) -> Network {
    Network::of(topology(id).into_iter().map(|(n, nb)| Node::new(n, &nb, proc(n))).collect())
}

/// The exact case network at gossip probability `p`.
pub fn build_case(id: CaseId, p: &Q) -> Network {
    let v = message();
    let one = Q::one();
    let is_source = |n: &str| n.starts_with('s');
    match id {
        CaseId::Gsp(i) => on_topology(id, |n| match (i, n) {
            (1..=5, n) if is_source(n) => mk_snd(&v, p),
            (6, n) if is_source(n) => mk_sndu(&v, p, 2),
            (1 | 3, "d") | (2, "d") => mk_fwd(&one),
            (2 | 3, _) => mk_fwd(p),
            (4 | 5, "d") => mk_fwdc(&one),
            (5, _) => mk_fwdc(p),
            (6, "d") => mk_fwdu(&one, 1),
            _ => unreachable!("node {n} in GSP{i}"),
        }),
        CaseId::Done(i) => {
            let d = match i {
                1 | 4 => mk_resnd(&v, &one),
                2 | 5 => Process::sigma_pow(2, mk_resnd(&v, &one)),
                3 => Process::tau(Choice::binary(
                    p.clone(),
                    Process::sigma_pow(1, mk_snd(&v, &one)),
                    Process::sigma_pow(2, mk_snd(&v, &one)),
                )),
                6 => Process::tau(Choice::binary(
                    done6_weight().eval(p),
                    Process::sigma_pow(3, mk_snd(&v, &one)),
                    Process::sigma_pow(4, mk_snd(&v, &one)),
                )),
                _ => unreachable!("case index in 1..=6"),
            };
            on_topology(id, |n| if n == "d" { d.clone() } else { Process::Nil })
        }
    }
}

/// `1/2 + p²/2`, the weight of the earlier rebroadcast in the randomized idealization.
pub fn done6_weight() -> Poly {
    let half = Poly::constant(q(1, 2));
    &half + &Poly::p().pow(2).scale(&q(1, 2))
}

/// Catalog entry describing a gossip case.
#[derive(Clone, Debug)]
pub struct CaseInfo {
    pub id: CaseId,
    pub summary: &'static str,
    /// σ-rounds explored by the delivery oracle.
    pub horizon: usize,
    /// Tolerance of the derived simulation by the idealized network, as a polynomial in `p`.
    pub tolerance: Poly,
}

/// Closed-form tolerance `r` with `DONEᵢ ⊑_r GSPᵢ`.
pub fn claimed_tolerance(i: u8) -> Poly {
    let p = Poly::p();
    let one = Poly::one();
    let c = |n: i64, d: i64| Poly::constant(q(n, d));
    match i {
        1 => (&one - &p).pow(2),
        2 => &one - &(&(&c(3, 1) * &p.pow(3)) - &(&c(2, 1) * &p.pow(4))),
        3 => &(&p * &(&one - &p)) + &(&(&one - &p) * &(&one - &p.pow(2))),
        4 => &one - &(&c(2, 1) * &(&p * &(&one - &p))),
        5 => &one - &(&(&(&c(3, 1) * &p.pow(3)) - &(&c(4, 1) * &p.pow(4))) + &(&c(2, 1) * &p.pow(5))),
        6 => &one - &(&(&c(2, 1) * &p) - &(&c(3, 2) * &p.pow(2))),
        _ => panic!("case index {i} outside 1..=6"),
    }
}

pub fn catalog() -> Vec<CaseInfo> {
    let summary = |i: u8| match i {
        1 => "two sources, destination in both cells",
        2 => "two sources, three relays, destination behind n3",
        3 => "two paths of different length to the destination",
        4 => "GSP1 with collision-sensitive destination",
        5 => "GSP2 with collision-sensitive relays",
        6 => "GSP1 with random delays in 1..2",
        _ => unreachable!(),
    };
    (1..=6)
        .map(|i| CaseInfo {
            id: CaseId::Gsp(i),
            summary: summary(i),
            horizon: if i == 6 { 5 } else { 3 },
            tolerance: claimed_tolerance(i),
        })
        .collect()
}
