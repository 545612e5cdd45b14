use num_traits::{One, Zero};

use ptcws_core::calculus::{Choice, Network, Node, Process, Value};
use ptcws_core::gossip::{build_case, case_env, claimed_tolerance, CaseId};
use ptcws_core::quasimetric::{check_tolerance, kernel_is_simulation, min_quasimetric, Config};
use ptcws_core::semantics::Env;
use ptcws_core::{q, Q};

fn pair(i: u8, p: &Q) -> (Network, Network) {
    (build_case(CaseId::Done(i), p), build_case(CaseId::Gsp(i), p))
}

#[test]
fn first_case_distance_is_exact() {
    let p = q(4, 5);
    let (done, gsp) = pair(1, &p);
    let qm = min_quasimetric(&case_env(), &[(done.clone(), gsp.clone())], &Config::default()).unwrap();
    assert!(qm.table.converged);
    assert_eq!(qm.distance(&done, &gsp), Some(q(1, 25)));
}

#[test]
fn closed_form_is_tight_for_the_first_case() {
    let p = q(1, 2);
    let (done, gsp) = pair(1, &p);
    let tol = claimed_tolerance(1).eval(&p);
    let cfg = Config::default();
    assert!(check_tolerance(&done, &gsp, &case_env(), &tol, &cfg).unwrap().holds);
    let below = &tol - q(1, 1000);
    let v = check_tolerance(&done, &gsp, &case_env(), &below, &cfg).unwrap();
    assert!(!v.holds && v.converged);
    assert_eq!(v.computed_bound, tol);
}

#[test]
fn second_case_holds_at_four_fifths() {
    let p = q(4, 5);
    let (done, gsp) = pair(2, &p);
    let v = check_tolerance(&done, &gsp, &case_env(), &claimed_tolerance(2).eval(&p), &Config::default()).unwrap();
    assert!(v.holds && v.converged);
}

#[test]
fn idealization_is_not_simulated_backwards_for_free() {
    let p = q(4, 5);
    let (done, gsp) = pair(1, &p);
    let v = check_tolerance(&gsp, &done, &case_env(), &Q::zero(), &Config::default()).unwrap();
    assert!(!v.holds, "the lossy protocol has behaviour the idealization lacks");
}

#[test]
fn committing_to_nil_costs_the_other_branch() {
    let pv = q(3, 10);
    let bang = Process::bcast(&Value::new("v"), Process::Nil.then());
    let env = {
        let mut e = Env::listening(&["o"]);
        e.values.insert(Value::new("v"));
        e
    };
    let nil = Network::of(vec![Node::new("n", &["o"], Process::Nil)]);
    let choice = Network::of(vec![Node::new("n", &["o"], Process::tau(Choice::binary(pv.clone(), Process::Nil, bang)))]);
    let qm = min_quasimetric(&env, &[(nil.clone(), choice.clone())], &Config::default()).unwrap();
    let d = qm.distance(&nil, &choice).unwrap();
    assert!(d <= Q::one() - &pv);
    assert_eq!(d, Q::one() - &pv);
}

#[test]
fn zero_pairs_of_the_first_case_pass_the_game() {
    let p = q(4, 5);
    let (done, gsp) = pair(1, &p);
    let qm = min_quasimetric(&case_env(), &[(done.clone(), gsp.clone()), (gsp, done)], &Config::default()).unwrap();
    let rep = kernel_is_simulation(&qm, 20_000);
    assert!(rep.passed(), "{rep}: {:?}", rep.issues);
    assert!(rep.checked_pairs > 0);
}

#[test]
fn history_is_monotone() {
    let p = q(1, 2);
    let (done, gsp) = pair(6, &p);
    let cfg = Config { keep_history: true, ..Config::default() };
    let qm = min_quasimetric(&case_env(), &[(done, gsp)], &cfg).unwrap();
    assert!(qm.table.converged);
    for w in qm.history.windows(2) {
        assert!(w[0].iter().zip(&w[1]).all(|(a, b)| a <= b));
    }
    assert_eq!(qm.history.last().unwrap(), &qm.table.values);
}

#[test]
fn iteration_budget_is_reported() {
    let p = q(1, 2);
    let (done, gsp) = pair(6, &p);
    let cfg = Config { iter_budget: 1, ..Config::default() };
    let v = check_tolerance(&done, &gsp, &case_env(), &Q::one(), &cfg).unwrap();
    assert!(!v.converged);
}
