use num_traits::One;

use ptcws_core::gossip::{case_env, claimed_tolerance, message, CaseId};
use ptcws_core::oracle::{case_row, exact_reachability, monte_carlo, DeliveryQuery, Predicate, CSV_HEADER};
use ptcws_core::{q, to_f64, Q};

#[test]
fn first_case_bracket_is_exact() {
    let b = exact_reachability(&DeliveryQuery::for_case(CaseId::Gsp(1), &q(4, 5))).unwrap();
    assert_eq!(b.min, q(24, 25));
    assert_eq!(b.max, q(24, 25));
}

#[test]
fn collision_sensitive_relays_reach_the_law_bound() {
    let b = exact_reachability(&DeliveryQuery::for_case(CaseId::Gsp(5), &q(4, 5))).unwrap();
    assert!(b.min >= q(55_296, 100_000));
}

#[test]
fn simulation_interval_contains_the_reported_value() {
    let est = monte_carlo(&DeliveryQuery::for_case(CaseId::Gsp(2), &q(4, 5)), 100_000, 11).unwrap();
    assert!(est.ci_lo <= 0.7168 && 0.7168 <= est.ci_hi, "{est:?}");
    assert_eq!(est.trials, 100_000);
}

#[test]
fn estimates_lie_in_the_exact_brackets() {
    for i in 1..=6u8 {
        let query = DeliveryQuery::for_case(CaseId::Gsp(i), &q(1, 2));
        let b = exact_reachability(&query).unwrap();
        let est = monte_carlo(&query, 20_000, 3).unwrap();
        let slack = 4.0 * est.sigma().max(1e-3);
        assert!(est.mean >= to_f64(&b.min) - slack && est.mean <= to_f64(&b.max) + slack, "GSP{i}: {est:?} vs {b:?}");
    }
}

#[test]
fn bracket_is_ordered_and_bounded_by_the_law() {
    for i in 1..=6u8 {
        for p in [q(1, 3), q(3, 4)] {
            let b = exact_reachability(&DeliveryQuery::for_case(CaseId::Gsp(i), &p)).unwrap();
            assert!(b.min <= b.max && b.max <= Q::one());
            assert!(b.min >= Q::one() - claimed_tolerance(i).eval(&p));
        }
    }
}

#[test]
fn idealized_networks_deliver_surely() {
    for i in 1..=6u8 {
        let d = CaseId::Done(i);
        let query = DeliveryQuery::new(
            ptcws_core::gossip::build_case(d, &q(1, 2)),
            case_env(),
            Predicate::delivered("d", &message()),
            ptcws_core::oracle::default_horizon(d),
        );
        let b = exact_reachability(&query).unwrap();
        assert!(b.min.is_one(), "DONE{i}: {b:?}");
    }
}

#[test]
fn csv_rows_are_reproducible() {
    let a = case_row(5, &q(4, 5), Some((5_000, 42))).unwrap().to_csv();
    let b = case_row(5, &q(4, 5), Some((5_000, 42))).unwrap().to_csv();
    assert_eq!(a, b);
    assert_eq!(a.split(',').count(), CSV_HEADER.split(',').count());
    assert!(a.starts_with("0.8"));
    let exact: f64 = a.split(',').nth(2).unwrap().parse().unwrap();
    assert!(exact >= 0.55296);
}

#[test]
fn short_horizon_loses_late_deliveries() {
    let mut query = DeliveryQuery::for_case(CaseId::Gsp(2), &q(4, 5));
    query.horizon = 1;
    let b = exact_reachability(&query).unwrap();
    assert!(b.max < q(7168, 10_000));
    query.horizon = 0;
    assert!(exact_reachability(&query).is_err());
}
