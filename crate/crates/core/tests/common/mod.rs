//! Seeded generators of small closed, time-guarded networks.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ptcws_core::calculus::{name, Choice, Network, Node, Process, Term, Value};
use ptcws_core::gossip::{mk_fwd, mk_fwdc, mk_resnd, mk_snd};
use ptcws_core::semantics::Env;
use ptcws_core::{q, Q};

pub const VALUES: [&str; 2] = ["u", "v"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn weight(r: &mut ChaCha8Rng) -> Q {
    let d = [2, 3, 4, 5][r.gen_range(0..4)];
    q(r.gen_range(1..d), d)
}

fn value(r: &mut ChaCha8Rng) -> Value {
    Value::new(VALUES[r.gen_range(0..VALUES.len())])
}

fn cont(r: &mut ChaCha8Rng, depth: usize, bound: Option<&str>) -> Choice {
    if depth > 0 && r.gen_bool(0.3) {
        Choice::binary(weight(r), process_in(r, depth - 1, bound), process_in(r, depth - 1, bound))
    } else {
        Choice::det(process_in(r, depth.saturating_sub(1), bound))
    }
}

fn process_in(r: &mut ChaCha8Rng, depth: usize, bound: Option<&str>) -> Process {
    if depth == 0 {
        return match r.gen_range(0..4) {
            0 => Process::sigma(Process::Nil.then()),
            1 => Process::bcast(&value(r), Process::Nil.then()),
            _ => Process::Nil,
        };
    }
    match r.gen_range(0..8) {
        0 => Process::Nil,
        1 => {
            let t = match bound {
                Some(x) if r.gen_bool(0.5) => Term::Var(name(x)),
                _ => Term::Val(value(r)),
            };
            Process::Bcast(t, cont(r, depth, bound))
        }
        2 => Process::tau(cont(r, depth, bound)),
        3 => Process::sigma(cont(r, depth, bound)),
        4 | 5 => {
            let x = if bound.is_some() { "y" } else { "x" };
            Process::rcv(x, cont(r, depth, Some(x)), cont(r, depth, bound))
        }
        6 => mk_snd(&value(r), &weight(r)),
        _ => mk_resnd(&value(r), &weight(r)),
    }
}

/// Random closed process of nesting depth at most `depth`.
pub fn process(r: &mut ChaCha8Rng, depth: usize) -> Process {
    if r.gen_bool(0.1) {
        return if r.gen_bool(0.5) { mk_fwd(&weight(r)) } else { mk_fwdc(&weight(r)) };
    }
    process_in(r, depth, None)
}

fn mutate(r: &mut ChaCha8Rng, p: &Process, bound: Option<&str>) -> Process {
    let recurse = |r: &mut ChaCha8Rng, c: &Choice, bound: Option<&str>| -> Choice {
        let bs = c.branches();
        let i = r.gen_range(0..bs.len());
        let out: Vec<(Q, Process)> =
            bs.iter().enumerate().map(|(j, (w, b))| (w.clone(), if i == j { mutate(r, b, bound) } else { b.clone() })).collect();
        if out.len() == 2 && r.gen_bool(0.5) {
            let w = weight(r);
            return Choice::binary(w, out[0].1.clone(), out[1].1.clone());
        }
        Choice::new(out).expect("weights kept")
    };
    match r.gen_range(0..6) {
        0 => process_in(r, 1, bound),
        1 => Process::tau(p.clone().then()),
        _ => match p {
            Process::Bcast(t, c) => Process::Bcast(t.clone(), recurse(r, c, bound)),
            Process::Tau(c) => Process::tau(recurse(r, c, bound)),
            Process::Sigma(c) => Process::sigma(recurse(r, c, bound)),
            Process::Rcv { var, then, else_ } => {
                if r.gen_bool(0.5) {
                    Process::Rcv { var: var.clone(), then: recurse(r, then, Some(var)), else_: else_.clone() }
                } else {
                    Process::Rcv { var: var.clone(), then: then.clone(), else_: recurse(r, else_, bound) }
                }
            }
            _ => process_in(r, 1, bound),
        },
    }
}

/// Fixed neighbourhoods shared by a family of networks.
#[derive(Clone, Debug)]
pub struct Shape {
    pub nodes: Vec<(String, Vec<String>)>,
    pub env: Env,
}

impl Shape {
    /// One or two nodes named `prefix1`, `prefix2`, each linked to the listener `o`,
    /// optionally to the external transmitter `t`, and to `extra` outside names.
    pub fn random(r: &mut ChaCha8Rng, prefix: &str, extra: &[&str]) -> Shape {
        let k = r.gen_range(1..=2);
        let names: Vec<String> = (1..=k).map(|i| format!("{prefix}{i}")).collect();
        let mut env = Env::listening(&["o"]);
        env.values = VALUES.iter().map(|v| Value::new(v)).collect();
        let talker = r.gen_bool(0.3);
        if talker {
            env.transmitters.insert(name("t"));
        }
        let mut nodes = Vec::new();
        for (i, n) in names.iter().enumerate() {
            let mut nbrs: Vec<String> = names.iter().filter(|m| *m != n).cloned().collect();
            if i == 0 || r.gen_bool(0.5) {
                nbrs.push("o".into());
            }
            if talker && i == 0 {
                nbrs.push("t".into());
            }
            if i == 0 {
                nbrs.extend(extra.iter().map(|s| s.to_string()));
            }
            nodes.push((n.clone(), nbrs));
        }
        Shape { nodes, env }
    }

    pub fn network(&self, r: &mut ChaCha8Rng, depth: usize) -> Network {
        Network::of(
            self.nodes
                .iter()
                .map(|(n, nbrs)| {
                    let nb: Vec<&str> = nbrs.iter().map(|s| s.as_str()).collect();
                    Node::new(n, &nb, process(r, depth))
                })
                .collect(),
        )
    }

    /// `m` with one node process perturbed.
    pub fn variant(&self, r: &mut ChaCha8Rng, m: &Network) -> Network {
        let nodes = m.nodes();
        let k = r.gen_range(0..nodes.len());
        let n = &nodes[k];
        m.with_proc(&n.name, mutate(r, &n.proc, None))
    }

    pub fn names(&self) -> BTreeSet<String> {
        self.nodes.iter().map(|(n, _)| n.clone()).collect()
    }
}

/// Two shapes `a*` and `b*` whose first nodes are linked to each other, with the
/// environments each side sees in isolation and the environment of the composition.
pub fn linked_pair(r: &mut ChaCha8Rng) -> (Shape, Shape, Env) {
    let linked = r.gen_bool(0.6);
    let (ea, eb): (&[&str], &[&str]) = if linked { (&["b1"], &["a1"]) } else { (&[], &[]) };
    let mut a = Shape::random(r, "a", ea);
    let mut b = Shape::random(r, "b", eb);
    let mut joint = Env::listening(&["o"]);
    joint.values = VALUES.iter().map(|v| Value::new(v)).collect();
    for s in [&a, &b] {
        joint.transmitters.extend(s.env.transmitters.iter().cloned());
    }
    if linked {
        a.env.listeners.insert(name("b1"));
        a.env.transmitters.insert(name("b1"));
        b.env.listeners.insert(name("a1"));
        b.env.transmitters.insert(name("a1"));
    }
    (a, b, joint)
}
