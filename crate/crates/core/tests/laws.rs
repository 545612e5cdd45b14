use std::collections::BTreeSet;

use num_traits::{One, Zero};

use ptcws_core::calculus::{Choice, Network, Node, Process, Value};
use ptcws_core::gossip::{build_case, case_env, claimed_tolerance, mk_fwd, mk_fwdc, mk_resnd, mk_snd, CaseId};
use ptcws_core::laws::{self, formula, replay_at, Ctx, ErrorKind, Law};
use ptcws_core::oracle::{exact_reachability, DeliveryQuery};
use ptcws_core::poly::Poly;
use ptcws_core::quasimetric::{check_tolerance, min_quasimetric, Config};
use ptcws_core::semantics::{reachable_states, Env};
use ptcws_core::{q, Q};

fn v() -> Value {
    Value::new("v")
}

fn p() -> Poly {
    Poly::p()
}

fn c(x: Q) -> Poly {
    Poly::constant(x)
}

fn env() -> Env {
    let mut e = Env::listening(&["o"]);
    e.values.insert(v());
    e
}

/// `left ⊑_r right` holds on the computed quasimetric.
fn sound(cert: &laws::Certificate, env: &Env, pv: &Q) -> Q {
    let r = cert.value(pv);
    let verdict = check_tolerance(&cert.left, &cert.right, env, &r, &Config::default()).expect("closes under budget");
    assert!(verdict.converged, "{} did not converge", cert.law);
    assert!(
        verdict.holds,
        "{} claims {} but the quasimetric gives {}\nleft  {}\nright {}",
        cert.law,
        r,
        verdict.computed_bound,
        ptcws_core::calculus::brief(&cert.left),
        ptcws_core::calculus::brief(&cert.right)
    );
    verdict.computed_bound
}

#[test]
fn every_derivation_step_is_sound() {
    let mut checked = 0;
    for pv in [q(2, 7), q(4, 5)] {
        for i in 1..=6u8 {
            let root = replay_at(i, &pv).unwrap();
            assert_eq!(root.right, build_case(CaseId::Gsp(i), &pv));
            assert_eq!(root.left, build_case(CaseId::Done(i), &pv));
            assert_eq!(root.tolerance, claimed_tolerance(i));
            let mut seen = BTreeSet::new();
            checked += root.size();
            for step in root.steps() {
                if seen.insert((step.left.clone(), step.right.clone(), step.tolerance.to_string())) {
                    sound(step, &case_env(), &pv);
                }
            }
        }
    }
    assert!(checked > 100, "{checked} law applications");
}

#[test]
fn rendered_derivation_lists_every_step() {
    let root = replay_at(6, &q(1, 2)).unwrap();
    let text = root.render(&q(1, 2));
    assert_eq!(text.lines().filter(|l| l.starts_with('[')).count(), root.size());
    assert!(text.contains("3/8"));
}

fn two_senders(p1: &Q, p2: &Q, fwd: impl Fn(&Q) -> Process) -> Network {
    let one = Q::one();
    Network::of(vec![
        Node::new("s1", &["f1", "f2"], mk_snd(&v(), p1)),
        Node::new("s2", &["f1", "f2"], mk_snd(&v(), p2)),
        Node::new("f1", &["s1", "s2", "o"], fwd(&one)),
        Node::new("f2", &["s1", "s2", "o"], fwd(&one)),
    ])
}

#[test]
fn two_sender_propagation_matches_closed_form() {
    let (p1, p2) = (q(1, 3), q(3, 4));
    let ctx = Ctx::new(q(1, 2), env());
    let m = two_senders(&p1, &p2, mk_fwd);
    let cert = laws::propagation(&ctx, &m, &[("s1", c(p1.clone())), ("s2", c(p2.clone()))], &[("f1", Poly::one()), ("f2", Poly::one())])
        .unwrap();
    let want = (Q::one() - &p1) * (Q::one() - &p2);
    assert_eq!(cert.value(&ctx.p), want);
    assert_eq!(cert.left.node("f1").unwrap().proc, mk_resnd(&v(), &Q::one()));
    // Tight: with probability (1-p1)(1-p2) nobody gossips.
    assert_eq!(sound(&cert, &ctx.env, &ctx.p), want);
}

#[test]
fn two_sender_collisions_match_closed_form() {
    let (p1, p2) = (q(1, 3), q(3, 4));
    let ctx = Ctx::new(q(1, 2), env());
    let m = two_senders(&p1, &p2, mk_fwdc);
    let cert = laws::propagation_collisions(
        &ctx,
        &m,
        &[("s1", c(p1.clone())), ("s2", c(p2.clone()))],
        &[("f1", Poly::one()), ("f2", Poly::one())],
    )
    .unwrap();
    let want = Q::one() - (&p1 * (Q::one() - &p2) + &p2 * (Q::one() - &p1));
    assert_eq!(cert.value(&ctx.p), want);
    sound(&cert, &ctx.env, &ctx.p);
}

#[test]
fn composition_formulas() {
    let one = Poly::one();
    let a = (&one - &p()).pow(2);
    let b = &one - &p();
    assert_eq!(formula::compose_networks(&p(), &a, &b.pow(0)), &(&p() * &a) + &(&one - &p()));
    assert_eq!(formula::concat(&a, &b), &(&a * &(&one - &b)) + &b);
    assert_eq!(formula::concat(&a, &b), &(&one - &(&c(q(2, 1)) * &p().pow(2))) + &p().pow(3));
    let gsp2_last = &(&p() * &(&(&one - &(&c(q(2, 1)) * &p().pow(2))) + &p().pow(3))) + &(&(&one - &p()) * &(&one - &p().pow(3)));
    assert_eq!(gsp2_last, claimed_tolerance(2));
    let gsp5_last = &(&p()
        * &(&(&(&one - &(&c(q(2, 1)) * &p().pow(2))) + &(&c(q(3, 1)) * &p().pow(3))) - &(&c(q(2, 1)) * &p().pow(4))))
        + &(&(&one - &p()) * &(&one - &p().pow(3)));
    assert_eq!(gsp5_last, claimed_tolerance(5));
    let gsp6_last = formula::compose_paths(&[(p(), &p() * &c(q(1, 2))), (&one - &p(), &one - &p())]);
    assert_eq!(gsp6_last, claimed_tolerance(6));
    assert_eq!(formula::parallel(&a, &b), &a + &b);
}

fn single(proc: Process, nbrs: &[&str]) -> Network {
    Network::of(vec![Node::new("n", nbrs, proc)])
}

#[test]
fn simple_laws_are_sound() {
    let ctx = Ctx::new(q(3, 5), env());
    let pv = ctx.p.clone();
    let bang = |k: Process| Process::bcast(&v(), k.then());

    let m = single(Process::tau(Choice::binary(pv.clone(), Process::Nil, bang(Process::Nil))), &["o"]);
    let c1 = laws::simple1(&ctx, &m, "n", &Process::Nil, &p()).unwrap();
    assert_eq!(c1.value(&pv), Q::one() - &pv);
    sound(&c1, &ctx.env, &pv);

    let qv = q(1, 4);
    let inner = Process::tau(Choice::binary(qv.clone(), bang(Process::Nil), Process::Nil));
    let m = single(Process::tau(Choice::binary(pv.clone(), inner, bang(Process::Nil))), &["o"]);
    let c2 = laws::simple2(&ctx, &m, "n", &Process::Nil, &p(), &c(qv.clone())).unwrap();
    assert_eq!(c2.value(&pv), (Q::one() - &pv) + &pv * &qv);
    sound(&c2, &ctx.env, &pv);

    let c3 = laws::simple3(&ctx, &m, "n").unwrap();
    assert!(c3.value(&pv).is_zero());
    sound(&c3, &ctx.env, &pv);

    let w = Value::new("w");
    let mut e2 = env();
    e2.values.insert(w.clone());
    let ctx2 = Ctx::new(pv.clone(), e2);
    let second = Process::tau(Choice::binary(qv.clone(), Process::bcast(&w, Process::Nil.then()), Process::Nil));
    let m = single(Process::tau(Choice::binary(pv.clone(), Process::bcast(&v(), second.then()), Process::Nil)), &["o"]);
    let c5 = laws::simple5(&ctx2, &m, "n", &p(), &c(qv.clone())).unwrap();
    assert_eq!(c5.value(&pv), Q::one() - &pv * &qv);
    sound(&c5, &ctx2.env, &pv);

    let body = bang(Process::Nil);
    let loopy = Process::tau(Choice::binary(q(1, 2), body.clone(), Process::tau(body.clone().then())));
    let m = single(Process::bcast(&v(), Choice::binary(q(1, 3), Process::Nil, loopy)), &["o"]);
    let c4 = laws::simple4(&ctx, &m, "n").unwrap();
    assert!(c4.value(&pv).is_zero());
    sound(&c4, &ctx.env, &pv);
    let back = check_tolerance(&c4.right, &c4.left, &ctx.env, &Q::zero(), &Config::default()).unwrap();
    assert!(back.holds, "the rewrite is an equality");
}

#[test]
fn timing_laws_are_sound() {
    let ctx = Ctx::new(q(1, 2), env());
    let m = single(Process::sigma_pow(3, Process::Nil), &["o"]);
    let c = laws::timing_nil(&ctx, &m, "n").unwrap();
    assert!(c.left.node("n").unwrap().proc.is_nil());
    sound(&c, &ctx.env, &ctx.p);
    let back = check_tolerance(&c.right, &c.left, &ctx.env, &Q::zero(), &Config::default()).unwrap();
    assert!(back.holds);

    let rcv = Process::rcv("x", Process::bcast(&v(), Process::Nil.then()).then(), Process::bcast(&v(), Process::Nil.then()).then());
    let m = Network::of(vec![Node::new("n", &["k", "o"], rcv.clone()), Node::new("k", &["n"], Process::Nil)]);
    let c = laws::timing_timeout(&ctx, &m, "n").unwrap();
    assert_eq!(c.law, Law::Timing(3));
    sound(&c, &ctx.env, &ctx.p);

    let m = Network::of(vec![Node::new("n", &["k", "o"], mk_fwd(&q(1, 2))), Node::new("k", &["n"], Process::Nil)]);
    let c = laws::timing_timeout(&ctx, &m, "n").unwrap();
    assert_eq!(c.law, Law::Timing(4));
    sound(&c, &ctx.env, &ctx.p);

    let m = Network::of(vec![Node::new("s", &["k"], mk_snd(&v(), &q(1, 3))), Node::new("k", &["s", "o"], Process::Nil)]);
    let c = laws::no_trans(&ctx, &m, "s").unwrap();
    assert!(c.left.node("s").unwrap().proc.is_nil());
    sound(&c, &ctx.env, &ctx.p);

    let m = single(Process::bcast(&v(), Process::Nil.then()), &["o"]);
    let up = laws::tau_intro(&ctx, &m, "n").unwrap();
    sound(&up, &ctx.env, &ctx.p);
    let down = laws::tau_elim(&ctx, &up.left, "n").unwrap();
    assert_eq!(down.left, m);
    sound(&down, &ctx.env, &ctx.p);

    let m = Network::of(vec![Node::new("a", &["o"], Process::sigma(Process::sigma_pow(2, Process::Nil).then())), Node::new("b", &["o"], Process::Nil)]);
    let c = laws::under_sigma(&ctx, &m, 1, |ctx, m| laws::timing_nil(ctx, m, "a")).unwrap();
    sound(&c, &ctx.env, &ctx.p);
}

#[test]
fn side_conditions_are_enforced() {
    let ctx = Ctx::new(q(1, 2), env());
    let half = c(q(1, 2));

    let m = Network::of(vec![Node::new("s", &["f", "g"], mk_snd(&v(), &q(1, 2))), Node::new("f", &["s", "o"], mk_fwd(&q(1, 2))), Node::new("g", &["s"], mk_fwd(&q(1, 2)))]);
    let e = laws::propagation(&ctx, &m, &[("s", half.clone())], &[("f", half.clone())]).unwrap_err();
    assert_eq!(e.kind, ErrorKind::SideCondition, "{e}");

    let m = Network::of(vec![Node::new("s", &["f", "o"], mk_snd(&v(), &q(1, 2))), Node::new("f", &["s", "o"], mk_fwd(&q(1, 2)))]);
    let e = laws::propagation(&ctx, &m, &[("s", half.clone())], &[("f", half.clone())]).unwrap_err();
    assert_eq!(e.kind, ErrorKind::SideCondition, "outside neighbor: {e}");

    let m = Network::of(vec![Node::new("s", &["f"], mk_snd(&v(), &q(1, 2))), Node::new("f", &["s", "o"], mk_fwd(&q(1, 2)))]);
    let e = laws::propagation(&ctx, &m, &[("s", c(q(1, 3)))], &[("f", half.clone())]).unwrap_err();
    assert_eq!(e.kind, ErrorKind::Shape);
    let e = laws::propagation_collisions(&ctx, &m, &[("s", half.clone())], &[("f", half.clone())]).unwrap_err();
    assert_eq!(e.kind, ErrorKind::Shape, "fwd is not fwdc");

    let m = Network::of(vec![Node::new("s", &["k"], mk_snd(&v(), &q(1, 3))), Node::new("k", &["s", "o"], mk_fwd(&q(1, 2)))]);
    assert_eq!(laws::no_trans(&ctx, &m, "s").unwrap_err().kind, ErrorKind::SideCondition);
    assert_eq!(laws::tau_intro(&ctx, &m, "k").unwrap_err().kind, ErrorKind::SideCondition);
    assert_eq!(laws::timing_timeout(&ctx, &m, "k").unwrap_err().kind, ErrorKind::SideCondition);
    assert_eq!(laws::timing_nil(&ctx, &m, "k").unwrap_err().kind, ErrorKind::Shape);
    assert_eq!(laws::tau_elim(&ctx, &m, "s").unwrap_err().kind, ErrorKind::Shape);

    let mut talk = env();
    talk.transmitters.insert(ptcws_core::calculus::name("t"));
    let tctx = Ctx::new(q(1, 2), talk);
    let m = single(mk_fwd(&q(1, 2)), &["t"]);
    assert_eq!(laws::timing_timeout(&tctx, &m, "n").unwrap_err().kind, ErrorKind::SideCondition);

    let m = single(Process::tau(Choice::binary(q(1, 2), Process::Nil, Process::bcast(&v(), Process::Nil.then()))), &["o"]);
    assert_eq!(laws::simple1(&ctx, &m, "n", &Process::Nil, &c(q(1, 3))).unwrap_err().kind, ErrorKind::Weights);

    let a = laws::trivial(&single(Process::Nil, &["o"]), &m);
    let b = laws::trivial(&m, &single(Process::Nil, &["o"]));
    assert!(laws::transitivity(a.clone(), a.clone()).is_err());
    assert_eq!(laws::parallel(a.clone(), a.clone()).unwrap_err().kind, ErrorKind::SideCondition);
    assert!(laws::transitivity(a, b).is_ok());
}

#[test]
fn concat_requires_tau_reachability() {
    let ctx = Ctx::new(q(1, 2), env());
    let bang = Process::bcast(&v(), Process::Nil.then());
    let o = single(Process::tau(Choice::binary(q(1, 4), bang.clone(), Process::Nil)), &["o"]);
    let n = single(bang.clone(), &["o"]);
    let no = laws::simple1(&ctx, &o, "n", &bang, &c(q(1, 4))).unwrap();
    let mn = laws::reflexivity(&n);
    let ok = laws::concat(&ctx, mn.clone(), no.clone()).unwrap();
    assert_eq!(ok.value(&ctx.p), q(3, 4));
    sound(&ok, &ctx.env, &ctx.p);

    // Claiming a smaller tolerance for the second step asks for more τ-reach than exists.
    let mut greedy = no;
    greedy.tolerance = c(q(1, 2));
    let e = laws::concat(&ctx, mn, greedy).unwrap_err();
    assert_eq!(e.kind, ErrorKind::SideCondition, "{e}");
}

#[test]
fn compose_paths_checks_weights() {
    let ctx = Ctx::new(q(1, 2), env());
    let o = single(Process::Nil, &["o"]);
    let e = laws::compose_paths(&ctx, &o, "n", "n", vec![(c(q(1, 3)), laws::reflexivity(&o))]).unwrap_err();
    assert_eq!(e.kind, ErrorKind::Weights);
}

#[test]
fn fwd_and_fwdc_agree_with_one_sender() {
    let pv = q(2, 3);
    let ctx = Ctx::new(pv.clone(), env());
    let net = |fwd: Process| Network::of(vec![Node::new("s", &["f"], mk_snd(&v(), &pv)), Node::new("f", &["s", "o"], fwd)]);
    let (plain, coll) = (net(mk_fwd(&q(1, 2))), net(mk_fwdc(&q(1, 2))));
    let a = laws::propagation(&ctx, &plain, &[("s", p())], &[("f", c(q(1, 2)))]).unwrap();
    let b = laws::propagation_collisions(&ctx, &coll, &[("s", p())], &[("f", c(q(1, 2)))]).unwrap();
    assert_eq!(a.tolerance, b.tolerance);
    assert_eq!(a.value(&pv), Q::one() - &pv);
    sound(&a, &ctx.env, &pv);
    sound(&b, &ctx.env, &pv);
    let qm = min_quasimetric(&ctx.env, &[(plain.clone(), coll.clone()), (coll.clone(), plain.clone())], &Config::default()).unwrap();
    assert!(qm.table.converged);
    assert_eq!(qm.distance(&plain, &coll), Some(Q::zero()));
    assert_eq!(qm.distance(&coll, &plain), Some(Q::zero()));
}

#[test]
fn collision_sensitive_relays_never_help() {
    let diff = &claimed_tolerance(5) - &claimed_tolerance(2);
    let two = c(q(2, 1));
    assert_eq!(diff, &(&two * &p().pow(4)) - &(&two * &p().pow(5)));
    for k in 1..=9 {
        let pv = q(k, 10);
        let g2 = exact_reachability(&DeliveryQuery::for_case(CaseId::Gsp(2), &pv)).unwrap();
        let g5 = exact_reachability(&DeliveryQuery::for_case(CaseId::Gsp(5), &pv)).unwrap();
        assert!(g5.max <= g2.min, "p = {pv}: {} > {}", g5.max, g2.min);
        assert!(diff.eval(&pv) > Q::zero());
    }
}

fn node_processes(m: &Network, out: &mut BTreeSet<Process>) {
    for n in m.nodes() {
        out.insert(n.proc.clone());
    }
}

#[test]
fn syntactic_capabilities_match_semantics() {
    let mut procs = BTreeSet::new();
    for id in CaseId::all() {
        let (lts, root) = reachable_states(&build_case(id, &q(1, 2)), &case_env(), 10_000).unwrap();
        for s in lts.reachable_from(root) {
            node_processes(lts.network(s), &mut procs);
        }
    }
    assert!(procs.len() > 20);
    for pr in &procs {
        assert_eq!(laws::can_transmit_now(pr), laws::can_transmit_now_semantic(pr).unwrap(), "transmit: {pr}");
        assert_eq!(laws::can_receive_now(pr), laws::can_receive_now_semantic(pr).unwrap(), "receive: {pr}");
    }
}

#[test]
fn gossip_capabilities() {
    let pv = q(4, 5);
    assert!(laws::can_transmit_now(&mk_snd(&v(), &pv)));
    assert!(!laws::can_transmit_now(&mk_resnd(&v(), &pv)));
    assert!(laws::can_receive_now(&mk_fwd(&pv)));
    assert!(!laws::can_receive_now(&mk_snd(&v(), &pv)));
}
