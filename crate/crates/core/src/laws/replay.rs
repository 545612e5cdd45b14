//! Law-by-law derivations of the six gossip tolerances.

use num_traits::One;

use super::{
    compose_networks, compose_paths, concat, concat_sigma, no_trans, propagation, propagation_collisions,
    random_delays, simple1, simple3, tau_elim, tau_intro, timing_nil, timing_timeout, transitivity, trivial, under,
    Certificate, Chain, Ctx, ErrorKind, LawError, Law,
};
use crate::calculus::{Network, Process};
use crate::gossip::{
    build_case, case_env, mk_delays, mk_fwd, mk_fwdc, mk_fwdu, mk_resnd, mk_resndc, mk_snd, mk_sndu, on_topology,
    message, CaseId,
};
use crate::poly::Poly;
use crate::{q, Q};

type R = Result<Certificate, LawError>;

fn p() -> Poly {
    Poly::p()
}

fn one() -> Poly {
    Poly::one()
}

fn half() -> Poly {
    Poly::constant(q(1, 2))
}

/// Replays the derivation for `GSP{case}` at a generic probability.
pub fn replay_paper_derivations(case: u8) -> R {
    replay_at(case, &q(2, 7))
}

/// Replays the derivation for `GSP{case}` with networks built at `p`, which must lie in `(0,1)`.
///
/// The result certifies `DONE{case} ⊑_r GSP{case}`.
pub fn replay_at(case: u8, pv: &Q) -> R {
    let law = Law::Transitivity;
    if *pv <= Q::from_integer(0.into()) || *pv >= Q::one() {
        return Err(LawError { law, kind: ErrorKind::Weights, detail: format!("p = {pv} outside (0,1)") });
    }
    let ctx = Ctx::new(pv.clone(), case_env());
    let cert = match case {
        1 => gsp1(&ctx),
        2 => gsp2(&ctx),
        3 => gsp3(&ctx),
        4 => gsp4(&ctx),
        5 => gsp5(&ctx),
        6 => gsp6(&ctx),
        _ => return Err(LawError { law, kind: ErrorKind::Shape, detail: format!("no case {case}") }),
    }?;
    if cert.right != build_case(CaseId::Gsp(case), pv) || cert.left != build_case(CaseId::Done(case), pv) {
        return Err(LawError { law, kind: ErrorKind::Mismatch, detail: format!("derivation for case {case} ends elsewhere") });
    }
    Ok(cert)
}

fn gsp1(ctx: &Ctx) -> R {
    let g = build_case(CaseId::Gsp(1), &ctx.p);
    Ok(Chain::start(ctx, &g)
        .step(|c, n| propagation(c, n, &[("s1", p()), ("s2", p())], &[("d", one())]))?
        .finish())
}

fn gsp4(ctx: &Ctx) -> R {
    let g = build_case(CaseId::Gsp(4), &ctx.p);
    Ok(Chain::start(ctx, &g)
        .step(|c, n| propagation_collisions(c, n, &[("s1", p()), ("s2", p())], &[("d", one())]))?
        .step(|c, n| timing_timeout(c, n, "d"))?
        .finish())
}

/// A network on the topology of `case` with the given processes; unnamed nodes are nil.
fn net(case: u8, procs: &[(&str, Process)]) -> Network {
    on_topology(CaseId::Gsp(case), |n| {
        procs.iter().find(|(m, _)| *m == n).map(|(_, p)| p.clone()).unwrap_or(Process::Nil)
    })
}

fn gsp2(ctx: &Ctx) -> R {
    let (v, pr, unit) = (message(), ctx.p.clone(), Q::one());
    let done = build_case(CaseId::Done(2), &pr);

    let gossiped = net(
        2,
        &[
            ("s1", mk_snd(&v, &pr)),
            ("n1", mk_resnd(&v, &pr)),
            ("n2", mk_resnd(&v, &pr)),
            ("n3", mk_fwd(&pr)),
            ("d", mk_fwd(&unit)),
        ],
    );
    let quiet = Chain::start(ctx, &gossiped)
        .step(|c, n| no_trans(c, n, "s1"))?
        .step(|c, n| timing_timeout(c, n, "n3"))?
        .step(|c, n| timing_timeout(c, n, "d"))?
        .finish();
    let first = Chain::start(ctx, &quiet.left)
        .step(under(1, |c, n| propagation(c, n, &[("n1", p()), ("n2", p())], &[("n3", p())])))?
        .finish();
    let rest = Chain::start(ctx, &first.left)
        .step(|c, n| timing_nil(c, n, "n1"))?
        .step(|c, n| timing_nil(c, n, "n2"))?
        .step(under(1, |c, n| timing_timeout(c, n, "d")))?
        .step(under(2, |c, n| propagation(c, n, &[("n3", p())], &[("d", one())])))?
        .step(|c, n| timing_nil(c, n, "n3"))?
        .finish();
    let with = transitivity(concat_sigma(ctx, rest, first)?, quiet)?;

    let silent = net(
        2,
        &[("s1", mk_snd(&v, &pr)), ("n1", mk_fwd(&pr)), ("n2", mk_fwd(&pr)), ("n3", mk_fwd(&pr)), ("d", mk_fwd(&unit))],
    );
    let reach = Chain::start(ctx, &silent).step(|c, n| propagation(c, n, &[("s1", p())], &[("n1", p())]))?.finish();
    let wait = Chain::start(ctx, &reach.left)
        .step(|c, n| timing_timeout(c, n, "n2"))?
        .step(|c, n| timing_timeout(c, n, "n3"))?
        .step(|c, n| timing_timeout(c, n, "d"))?
        .finish();
    let hop = Chain::start(ctx, &wait.left)
        .step(under(1, |c, n| propagation(c, n, &[("n1", p())], &[("n3", p())])))?
        .finish();
    let tail = Chain::start(ctx, &hop.left)
        .step(|c, n| timing_nil(c, n, "n1"))?
        .step(under(1, |c, n| timing_timeout(c, n, "n2")))?
        .step(under(1, |c, n| timing_timeout(c, n, "d")))?
        .step(under(2, |c, n| propagation(c, n, &[("n3", p())], &[("n2", p()), ("d", one())])))?
        .step(|c, n| timing_nil(c, n, "n3"))?
        .step(under(3, |c, n| no_trans(c, n, "n2")))?
        .step(|c, n| timing_nil(c, n, "n2"))?
        .finish();
    let after = transitivity(concat_sigma(ctx, tail, hop)?, wait)?;
    let without = concat(ctx, after, reach)?;

    let g = build_case(CaseId::Gsp(2), &pr);
    let c = compose_networks(ctx, &g, "s2", &["n1", "n2"], &p(), with, without)?;
    debug_assert_eq!(c.left, done);
    Ok(c)
}

fn gsp3(ctx: &Ctx) -> R {
    let (v, pr) = (message(), ctx.p.clone());
    let g = build_case(CaseId::Gsp(3), &pr);

    let bcast = Process::bcast(&v, Process::Nil.then());
    let sent = g.with_proc("s1", bcast.clone());
    let early = Chain::start(ctx, &sent)
        .step(|c, n| tau_intro(c, n, "s1"))?
        .step(|c, n| propagation(c, n, &[("s1", one())], &[("d", one())]))?
        .step(|c, n| propagation(c, n, &[("s2", p())], &[("n", p())]))?
        .step(under(1, |c, n| no_trans(c, n, "n")))?
        .step(|c, n| timing_nil(c, n, "n"))?
        .finish();

    let idle = g.with_proc("s1", Process::Nil);
    let reach = Chain::start(ctx, &idle).step(|c, n| propagation(c, n, &[("s2", p())], &[("n", p())]))?.finish();
    let relay = Chain::start(ctx, &reach.left)
        .step(|c, n| timing_timeout(c, n, "d"))?
        .step(under(1, |c, n| propagation(c, n, &[("n", p())], &[("d", one())])))?
        .step(|c, n| timing_nil(c, n, "n"))?
        .finish();
    let late = concat(ctx, relay, reach)?;

    compose_paths(ctx, &g, "s1", "d", vec![(p(), early), (p().complement(), late)])
}

fn gsp5(ctx: &Ctx) -> R {
    let (v, pr, unit) = (message(), ctx.p.clone(), Q::one());

    // Both sources gossiped: n1 is done, n2 holds the message.
    let both = net(5, &[("n2", mk_resndc(&v, &pr)), ("n3", mk_fwdc(&pr)), ("d", mk_fwdc(&unit))]);
    let wait = Chain::start(ctx, &both)
        .step(|c, n| timing_timeout(c, n, "n3"))?
        .step(|c, n| timing_timeout(c, n, "d"))?
        .step(|c, n| timing_timeout(c, n, "n2"))?
        .finish();
    let hop = Chain::start(ctx, &wait.left)
        .step(under(1, |c, n| propagation_collisions(c, n, &[("n2", p())], &[("n3", p())])))?
        .finish();
    let tail = Chain::start(ctx, &hop.left)
        .step(|c, n| timing_nil(c, n, "n2"))?
        .step(under(1, |c, n| timing_timeout(c, n, "n3")))?
        .step(under(1, |c, n| timing_timeout(c, n, "d")))?
        .step(under(2, |c, n| propagation_collisions(c, n, &[("n3", p())], &[("d", one())])))?
        .step(|c, n| timing_nil(c, n, "n3"))?
        .step(under(2, |c, n| timing_timeout(c, n, "d")))?
        .finish();
    let both_cert = transitivity(concat_sigma(ctx, tail, hop)?, wait)?;

    // Only s2 gossiped: n1 and n2 both hold the message.
    let only2 = net(
        5,
        &[("n1", mk_resndc(&v, &pr)), ("n2", mk_resndc(&v, &pr)), ("n3", mk_fwdc(&pr)), ("d", mk_fwdc(&unit))],
    );
    let wait = Chain::start(ctx, &only2)
        .step(|c, n| timing_timeout(c, n, "n1"))?
        .step(|c, n| timing_timeout(c, n, "n2"))?
        .step(|c, n| timing_timeout(c, n, "n3"))?
        .step(|c, n| timing_timeout(c, n, "d"))?
        .finish();
    let hop = Chain::start(ctx, &wait.left)
        .step(under(1, |c, n| propagation_collisions(c, n, &[("n1", p()), ("n2", p())], &[("n3", p())])))?
        .finish();
    let tail = Chain::start(ctx, &hop.left)
        .step(|c, n| timing_nil(c, n, "n1"))?
        .step(|c, n| timing_nil(c, n, "n2"))?
        .step(under(1, |c, n| timing_timeout(c, n, "n3")))?
        .step(under(1, |c, n| timing_timeout(c, n, "d")))?
        .step(under(2, |c, n| propagation_collisions(c, n, &[("n3", p())], &[("d", one())])))?
        .step(|c, n| timing_nil(c, n, "n3"))?
        .step(under(2, |c, n| timing_timeout(c, n, "d")))?
        .finish();
    let only2_cert = transitivity(concat_sigma(ctx, tail, hop)?, wait)?;

    let s2_gossiped = net(
        5,
        &[
            ("s1", mk_snd(&v, &pr)),
            ("n1", mk_resndc(&v, &pr)),
            ("n2", mk_resndc(&v, &pr)),
            ("n3", mk_fwdc(&pr)),
            ("d", mk_fwdc(&unit)),
        ],
    );
    let with = compose_networks(ctx, &s2_gossiped, "s1", &["n1"], &p(), both_cert, only2_cert)?;

    // s2 stayed silent: everything hinges on s1.
    let silent = net(
        5,
        &[("s1", mk_snd(&v, &pr)), ("n1", mk_fwdc(&pr)), ("n2", mk_fwdc(&pr)), ("n3", mk_fwdc(&pr)), ("d", mk_fwdc(&unit))],
    );
    let reach =
        Chain::start(ctx, &silent).step(|c, n| propagation_collisions(c, n, &[("s1", p())], &[("n1", p())]))?.finish();
    let wait = Chain::start(ctx, &reach.left)
        .step(|c, n| timing_timeout(c, n, "n1"))?
        .step(|c, n| timing_timeout(c, n, "n2"))?
        .step(|c, n| timing_timeout(c, n, "n3"))?
        .step(|c, n| timing_timeout(c, n, "d"))?
        .finish();
    let hop = Chain::start(ctx, &wait.left)
        .step(under(1, |c, n| propagation_collisions(c, n, &[("n1", p())], &[("n3", p())])))?
        .finish();
    let tail = Chain::start(ctx, &hop.left)
        .step(|c, n| timing_nil(c, n, "n1"))?
        .step(under(1, |c, n| timing_timeout(c, n, "n2")))?
        .step(under(1, |c, n| timing_timeout(c, n, "d")))?
        .step(under(1, |c, n| timing_timeout(c, n, "n3")))?
        .step(under(2, |c, n| propagation_collisions(c, n, &[("n3", p())], &[("n2", p()), ("d", one())])))?
        .step(|c, n| timing_nil(c, n, "n3"))?
        .step(under(2, |c, n| timing_timeout(c, n, "n2")))?
        .step(under(2, |c, n| timing_timeout(c, n, "d")))?
        .step(under(3, |c, n| no_trans(c, n, "n2")))?
        .step(|c, n| timing_nil(c, n, "n2"))?
        .finish();
    let after = transitivity(concat_sigma(ctx, tail, hop)?, wait)?;
    let without = concat(ctx, after, reach)?;

    let g = build_case(CaseId::Gsp(5), &pr);
    compose_networks(ctx, &g, "s2", &["n1", "n2"], &p(), with, without)
}

#[derive(Clone, Copy)]
enum Src {
    S1,
    S2,
}

impl Src {
    fn name(self) -> &'static str {
        match self {
            Src::S1 => "s1",
            Src::S2 => "s2",
        }
    }
}

/// `first[σʰ.snd⟨v⟩₁]` alone reaches `d`, which ends as `σ^{h+2}.snd⟨v⟩₁`.
fn lone_sender(ctx: &Ctx, first: Src, h: usize) -> R {
    let v = message();
    let unit = Q::one();
    let s = first.name();
    let start = net(6, &[(s, Process::sigma_pow(h, mk_snd(&v, &unit))), ("d", mk_fwdu(&unit, 1))]);
    let mut chain = Chain::start(ctx, &start);
    for i in 0..h {
        chain = chain.step(under(i, |c, n| timing_timeout(c, n, "d")))?;
    }
    Ok(chain
        .step(under(h, |c, n| random_delays(c, n, s, &[("d", one())], 1)))?
        .step(|c, n| timing_nil(c, n, s))?
        .step(under(h, |c, n| timing_timeout(c, n, "d")))?
        .step(under(h + 1, |c, n| tau_elim(c, n, "d")))?
        .step(under(h + 1, |c, n| tau_elim(c, n, "d")))?
        .finish())
}

/// `first` fires one round before `second`; only the first delivery counts.
fn staggered(ctx: &Ctx, first: Src, second: Src) -> R {
    let v = message();
    let unit = Q::one();
    let (a, b) = (first.name(), second.name());
    let start = net(
        6,
        &[
            (a, Process::sigma_pow(1, mk_snd(&v, &unit))),
            (b, Process::sigma_pow(2, mk_snd(&v, &unit))),
            ("d", mk_fwdu(&unit, 1)),
        ],
    );
    Ok(Chain::start(ctx, &start)
        .step(|c, n| timing_timeout(c, n, "d"))?
        .step(under(1, |c, n| random_delays(c, n, a, &[("d", one())], 1)))?
        .step(|c, n| timing_nil(c, n, a))?
        .step(under(1, |c, n| timing_timeout(c, n, "d")))?
        .step(under(2, |c, n| tau_elim(c, n, "d")))?
        .step(under(2, |c, n| tau_elim(c, n, "d")))?
        .step(under(2, |c, n| no_trans(c, n, b)))?
        .step(|c, n| timing_nil(c, n, b))?
        .finish())
}

/// Both sources fire in round `h`: their broadcasts collide, bounded trivially.
fn same_round(h: usize) -> Certificate {
    let v = message();
    let unit = Q::one();
    let right = net(
        6,
        &[
            ("s1", Process::sigma_pow(h, mk_snd(&v, &unit))),
            ("s2", Process::sigma_pow(h, mk_snd(&v, &unit))),
            ("d", mk_fwdu(&unit, 1)),
        ],
    );
    let left = net(6, &[("d", Process::sigma_pow(3, mk_snd(&v, &unit)))]);
    trivial(&left, &right)
}

/// `first[delays]` with the other source silent.
fn lone_delays(ctx: &Ctx, first: Src) -> R {
    let v = message();
    let unit = Q::one();
    let o = net(6, &[(first.name(), mk_delays(&v, 2)), ("d", mk_fwdu(&unit, 1))]);
    compose_paths(
        ctx,
        &o,
        first.name(),
        "d",
        vec![(half(), lone_sender(ctx, first, 1)?), (half(), lone_sender(ctx, first, 2)?)],
    )
}

fn gsp6(ctx: &Ctx) -> R {
    let (v, pr, unit) = (message(), ctx.p.clone(), Q::one());
    let delays = mk_delays(&v, 2);
    let d = ("d", mk_fwdu(&unit, 1));
    let at = |h: usize| Process::sigma_pow(h, mk_snd(&v, &unit));

    let only1 = net(6, &[("s1", mk_sndu(&v, &pr, 2)), d.clone()]);
    let only1 = Chain::start(ctx, &only1)
        .step(|c, n| simple1(c, n, "s1", &delays, &p()))?
        .then(lone_delays(ctx, Src::S1)?)?
        .finish();
    let only2 = lone_delays(ctx, Src::S2)?;

    let o = net(6, &[("s1", at(1)), ("s2", delays.clone()), d.clone()]);
    let s1_early =
        compose_paths(ctx, &o, "s2", "d", vec![(half(), same_round(1)), (half(), staggered(ctx, Src::S1, Src::S2)?)])?;
    let s1_early = Chain::from(ctx, s1_early).step(|c, n| tau_elim(c, n, "d"))?.finish();

    let o = net(6, &[("s1", at(2)), ("s2", delays.clone()), d.clone()]);
    let s1_late =
        compose_paths(ctx, &o, "s2", "d", vec![(half(), staggered(ctx, Src::S2, Src::S1)?), (half(), same_round(2))])?;
    let s1_late = Chain::from(ctx, s1_late).step(|c, n| tau_elim(c, n, "d"))?.finish();

    let o = net(6, &[("s1", delays.clone()), ("s2", delays.clone()), d.clone()]);
    let both = compose_paths(ctx, &o, "s1", "d", vec![(half(), s1_early), (half(), s1_late)])?;
    let both = Chain::from(ctx, both).step(|c, n| tau_elim(c, n, "d"))?.finish();

    let o = net(6, &[("s1", mk_sndu(&v, &pr, 2)), ("s2", delays.clone()), d.clone()]);
    let s2_gossiped = compose_paths(ctx, &o, "s1", "d", vec![(p(), both), (p().complement(), only2)])?;
    let s2_gossiped = Chain::from(ctx, s2_gossiped).step(|c, n| simple3(c, n, "d"))?.finish();

    let g = build_case(CaseId::Gsp(6), &pr);
    let all = compose_paths(ctx, &g, "s2", "d", vec![(p(), s2_gossiped), (p().complement(), only1)])?;
    Ok(Chain::from(ctx, all).step(|c, n| simple3(c, n, "d"))?.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gossip::claimed_tolerance;

    #[test]
    fn every_case_replays_to_its_closed_form() {
        for i in 1..=6u8 {
            let c = replay_paper_derivations(i).unwrap_or_else(|e| panic!("case {i}: {e}"));
            assert_eq!(c.tolerance, claimed_tolerance(i), "case {i}");
        }
    }
}
