mod common;

use num_traits::{One, Zero};
use proptest::prelude::*;

use ptcws_core::calculus::{canonical_form, canonical_process};
use ptcws_core::oracle::wilson;
use ptcws_core::poly::Poly;
use ptcws_core::quasimetric::{kantorovich, kernel_is_simulation, min_quasimetric, Config};
use ptcws_core::semantics::{check_time_properties, reachable_states, SubDist};
use ptcws_core::transport;
use ptcws_core::{q, Q};

use common::{linked_pair, rng, Shape};

fn cfg() -> Config {
    Config { state_budget: 4_000, ..Config::default() }
}

fn rat() -> impl Strategy<Value = Q> {
    (0i64..=12, 1i64..=6).prop_map(|(n, d)| q(n, d))
}

fn poly() -> impl Strategy<Value = Poly> {
    prop::collection::vec((-6i64..=6, 1i64..=4), 0..5).prop_map(|cs| Poly::new(cs.into_iter().map(|(n, d)| q(n, d)).collect()))
}

/// Positive weights rescaled to total `mass`.
fn marginal(raw: &[i64], mass: &Q) -> Vec<Q> {
    let total: i64 = raw.iter().sum();
    raw.iter().map(|x| q(*x, total) * mass).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, .. ProptestConfig::default() })]

    #[test]
    fn random_networks_respect_time(seed in any::<u64>()) {
        let mut g = rng(seed);
        let shape = Shape::random(&mut g, "a", &[]);
        let m = shape.network(&mut g, 3);
        let (lts, root) = reachable_states(&m, &shape.env, 20_000).unwrap();
        let issues = check_time_properties(&lts, root);
        prop_assert!(issues.is_empty(), "{}: {:?}", ptcws_core::calculus::brief(&m), issues);
    }

    #[test]
    fn triangle_inequality(seed in any::<u64>()) {
        let mut g = rng(seed);
        let shape = Shape::random(&mut g, "a", &[]);
        let first = shape.network(&mut g, 2);
        let second = shape.variant(&mut g, &first);
        let third = if seed % 2 == 0 { shape.variant(&mut g, &second) } else { shape.variant(&mut g, &first) };
        let nets = [first, second, third];
        let roots: Vec<_> = [(0, 1), (1, 2), (0, 2)].iter().map(|&(i, j)| (nets[i].clone(), nets[j].clone())).collect();
        let qm = min_quasimetric(&shape.env, &roots, &cfg()).unwrap();
        prop_assume!(qm.table.converged);
        let d = |i: usize, j: usize| qm.distance(&nets[i], &nets[j]).unwrap();
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2));
        prop_assert!(d(0, 0).is_zero());
        prop_assert!(d(0, 1) <= Q::one());
    }

    #[test]
    fn parallel_composition_is_non_expansive(seed in any::<u64>()) {
        let mut g = rng(seed);
        let (a, b, joint) = linked_pair(&mut g);
        let (m1, m2) = (a.network(&mut g, 1), b.network(&mut g, 1));
        let (n1, n2) = (a.variant(&mut g, &m1), b.variant(&mut g, &m2));
        let d1 = min_quasimetric(&a.env, &[(m1.clone(), n1.clone())], &cfg()).unwrap();
        let d2 = min_quasimetric(&b.env, &[(m2.clone(), n2.clone())], &cfg()).unwrap();
        let (m, n) = (m1.par(&m2), n1.par(&n2));
        let d = min_quasimetric(&joint, &[(m.clone(), n.clone())], &cfg()).unwrap();
        prop_assume!(d1.table.converged && d2.table.converged && d.table.converged);
        let bound = std::cmp::min(Q::one(), d1.distance(&m1, &n1).unwrap() + d2.distance(&m2, &n2).unwrap());
        prop_assert!(d.distance(&m, &n).unwrap() <= bound);
    }

    #[test]
    fn zero_pairs_are_simulations(seed in any::<u64>()) {
        let mut g = rng(seed);
        let shape = Shape::random(&mut g, "a", &[]);
        let m = shape.network(&mut g, 2);
        let n = shape.variant(&mut g, &m);
        let qm = min_quasimetric(&shape.env, &[(m.clone(), n.clone()), (n, m)], &cfg()).unwrap();
        prop_assume!(qm.table.converged);
        let rep = kernel_is_simulation(&qm, 20_000);
        prop_assert!(rep.passed(), "{rep}: {:?}", rep.issues);
    }

    #[test]
    fn solver_matches_vertex_enumeration(
        a in prop::collection::vec(1i64..8, 1..=4),
        b in prop::collection::vec(1i64..8, 1..=4),
        mass in 1i64..=4,
        costs in prop::collection::vec(0i64..=6, 16),
    ) {
        let mass = q(mass, 4);
        let (supply, demand) = (marginal(&a, &mass), marginal(&b, &mass));
        let cost: Vec<Vec<Q>> = (0..a.len()).map(|i| (0..b.len()).map(|j| q(costs[i * 4 + j], 6)).collect()).collect();
        let plan = transport::solve(&supply, &demand, &cost).unwrap();
        prop_assert_eq!(&plan.cost, &transport::brute_force(&supply, &demand, &cost).unwrap());
        prop_assert!(transport::verify(&supply, &demand, &cost, &plan));
    }

    #[test]
    fn lifting_a_distribution_onto_itself_is_free(raw in prop::collection::vec(1i64..8, 1..=4)) {
        let d: SubDist<usize> = marginal(&raw, &Q::one()).into_iter().enumerate().collect();
        let (cost, joint) = kantorovich(|i, j| if i == j { Q::zero() } else { Q::one() }, &d, &d).unwrap();
        prop_assert!(cost.is_zero());
        prop_assert!(joint.iter().all(|(i, j, _)| i == j));
    }

    #[test]
    fn canonical_forms_are_idempotent(seed in any::<u64>()) {
        let mut g = rng(seed);
        let shape = Shape::random(&mut g, "a", &[]);
        let m = shape.network(&mut g, 3);
        prop_assert_eq!(canonical_form(&m), m.clone());
        for n in m.nodes() {
            prop_assert_eq!(canonical_process(&n.proc), n.proc.clone());
        }
    }

    #[test]
    fn composition_commutes(seed in any::<u64>()) {
        let mut g = rng(seed);
        let (a, b, _) = linked_pair(&mut g);
        let (m, n) = (a.network(&mut g, 2), b.network(&mut g, 2));
        prop_assert_eq!(m.par(&n), n.par(&m));
    }

    #[test]
    fn polynomials_evaluate_homomorphically(a in poly(), b in poly(), x in rat()) {
        prop_assert_eq!((&a + &b).eval(&x), a.eval(&x) + b.eval(&x));
        prop_assert_eq!((&a * &b).eval(&x), a.eval(&x) * b.eval(&x));
        prop_assert_eq!((&a - &b).eval(&x), a.eval(&x) - b.eval(&x));
        prop_assert_eq!(a.complement().eval(&x), Q::one() - a.eval(&x));
    }

    #[test]
    fn wilson_interval_contains_the_sample_mean(n in 1u64..100_000, frac in 0.0f64..=1.0) {
        let s = ((n as f64) * frac).floor() as u64;
        let (lo, hi) = wilson(s, n, 1.959963984540054);
        let mean = s as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= mean + 1e-12 && mean <= hi + 1e-12 && hi <= 1.0);
    }
}
