mod common;

use codedcache::analytics::{t_dedicated, t_nondistinct, t_offline_limit, t_single_cache};
use codedcache::decode::verify_all;
use codedcache::delivery::{deliver_distinct, deliver_nondistinct, deliver_rounds};
use codedcache::{Association, DemandVector, Library, PlacementState, Rational, SystemParams};
use common::{random_exact, random_sampled, Gen};

#[test]
fn exact_mode_distinct_matches_formula() {
    let mut g = Gen::new(1);
    for case in 0..150 {
        let s = random_exact(&mut g, true);
        let pl = PlacementState::place_exact(&s.params).unwrap();
        let lib = Library::new(case, s.params.file_size);
        let log = deliver_distinct(&pl, &lib, &s.assoc, &s.demand).unwrap();
        let formula = t_offline_limit(&s.assoc.profile(), &s.params).unwrap();
        assert_eq!(
            log.normalized_time(),
            formula,
            "case {case}: {:?}",
            s.params
        );
        verify_all(&pl, &lib, &s.assoc, &s.demand, &log, false).unwrap();
    }
}

#[test]
fn exact_mode_repeated_demands_match_formula() {
    let mut g = Gen::new(2);
    for case in 0..150 {
        let s = random_exact(&mut g, false);
        let pl = PlacementState::place_exact(&s.params).unwrap();
        let lib = Library::new(case, s.params.file_size);
        let log = deliver_nondistinct(&pl, &lib, &s.assoc, &s.demand).unwrap();
        assert_eq!(
            log.normalized_time(),
            t_nondistinct(&s.demand, &s.assoc, &s.params),
            "case {case}"
        );
        verify_all(&pl, &lib, &s.assoc, &s.demand, &log, true).unwrap();
        let plain = deliver_rounds(&pl, &lib, &s.assoc, &s.demand);
        assert!(
            log.normalized_time() <= plain.normalized_time(),
            "case {case}"
        );
    }
}

#[test]
fn random_placement_decodes() {
    let mut g = Gen::new(3);
    for case in 0..200u64 {
        let distinct = case % 2 == 0;
        let s = random_sampled(&mut g, distinct);
        let pl = PlacementState::place_random(&s.params, case).unwrap();
        let lib = Library::new(case + 1000, s.params.file_size);
        let log = if distinct {
            deliver_distinct(&pl, &lib, &s.assoc, &s.demand).unwrap()
        } else {
            deliver_nondistinct(&pl, &lib, &s.assoc, &s.demand).unwrap()
        };
        verify_all(&pl, &lib, &s.assoc, &s.demand, &log, !distinct)
            .unwrap_or_else(|e| panic!("case {case}: {e}"));
    }
}

#[test]
fn all_distinct_both_schemes_agree() {
    let mut g = Gen::new(4);
    for case in 0..60 {
        let s = random_exact(&mut g, true);
        let pl = PlacementState::place_exact(&s.params).unwrap();
        let lib = Library::new(case, s.params.file_size);
        let a = deliver_distinct(&pl, &lib, &s.assoc, &s.demand).unwrap();
        let b = deliver_nondistinct(&pl, &lib, &s.assoc, &s.demand).unwrap();
        assert_eq!(a.normalized_time(), b.normalized_time(), "case {case}");
    }
}

#[test]
fn single_cache_is_local_caching_only() {
    for k in 2..=6u32 {
        for m in 0..=4 {
            let p = SystemParams::offline(6, k, 2, Rational::from_integer(m), 36).unwrap();
            let pl = PlacementState::place_exact(&p).unwrap();
            let a = Association::new(vec![(1..=k).collect(), vec![]]).unwrap();
            let d = DemandVector::new((1..=k).collect());
            let log = deliver_distinct(&pl, &Library::new(0, 36), &a, &d).unwrap();
            assert_eq!(log.normalized_time(), t_single_cache(k as usize, &p));
        }
    }
}

#[test]
fn one_user_per_cache_is_dedicated_scheme() {
    for k in 1..=5u32 {
        for m in 1..=3 {
            let f = 4usize.pow(k);
            let p = SystemParams::offline(4.max(k), k, k, Rational::from_integer(m), f).unwrap();
            let Ok(pl) = PlacementState::place_exact(&p) else {
                continue;
            };
            let a = Association::new((1..=k).map(|u| vec![u]).collect()).unwrap();
            let d = DemandVector::new((1..=k).collect());
            let log = deliver_distinct(&pl, &Library::new(0, f), &a, &d).unwrap();
            assert_eq!(
                log.normalized_time(),
                t_dedicated(k as usize, &p).unwrap(),
                "K={k} M={m}"
            );
        }
    }
}

#[test]
fn example_one_golden_trace() {
    let p = SystemParams::offline(4, 4, 2, Rational::from_integer(2), 4).unwrap();
    let pl = PlacementState::place_exact(&p).unwrap();
    let a = Association::new(vec![vec![1, 2, 3], vec![4]]).unwrap();
    let d = DemandVector::new(vec![1, 2, 3, 4]);
    let log = deliver_distinct(&pl, &Library::new(1, 4), &a, &d).unwrap();
    let golden = include_str!("data/example1_trace.txt");
    assert_eq!(log.to_trace(), golden);
}
