use codedcache::decode::verify_all;
use codedcache::delivery::deliver_distinct;
use codedcache::ecc::{
    encode_concatenated, inject_errors, restore_log, syndrome_decode, LinearBlockCode,
};
use codedcache::online::{Arrival, OnlineState, SlotInput};
use codedcache::{
    Association, DemandVector, Library, PlacementMode, PlacementState, Rational, SystemParams,
};

#[test]
fn example_one_survives_every_single_error() {
    let p = SystemParams::offline(4, 4, 2, Rational::from_integer(2), 4).unwrap();
    let pl = PlacementState::place_exact(&p).unwrap();
    let a = Association::new(vec![vec![1, 2, 3], vec![4]]).unwrap();
    let d = DemandVector::new(vec![1, 2, 3, 4]);
    let code = LinearBlockCode::hamming_11_7();
    for seed in 0..8 {
        let lib = Library::new(seed, 4);
        let log = deliver_distinct(&pl, &lib, &a, &d).unwrap();
        let run = encode_concatenated(&log, &code).unwrap();
        assert_eq!(run.padding, 0);
        assert_eq!(run.coded_time(), Rational::new(11, 4));
        for e in 0..11 {
            let bad = inject_errors(&run, &[e], 1).unwrap();
            let plain = syndrome_decode(&bad, &code).unwrap();
            let restored = restore_log(&log, &plain);
            verify_all(&pl, &lib, &a, &d, &restored, false).unwrap();
        }
    }
}

#[test]
fn repetition_baseline_is_longer() {
    let code = LinearBlockCode::repetition_per_bit(7, 3).unwrap();
    assert_eq!((code.n(), code.d()), (21, 3));
    let p = SystemParams::offline(4, 4, 2, Rational::from_integer(2), 4).unwrap();
    let pl = PlacementState::place_exact(&p).unwrap();
    let a = Association::new(vec![vec![1, 2, 3], vec![4]]).unwrap();
    let d = DemandVector::new(vec![1, 2, 3, 4]);
    let log = deliver_distinct(&pl, &Library::new(0, 4), &a, &d).unwrap();
    let run = encode_concatenated(&log, &code).unwrap();
    assert_eq!(run.coded_time(), Rational::new(21, 4));
    assert!(run.coded_time() > Rational::new(11, 4));
}

#[test]
fn online_slot_survives_single_errors() {
    let p = SystemParams::online(4, 5, 4, 2, Rational::from_integer(2), 25).unwrap();
    let mut st = OnlineState::new(
        &p,
        PlacementMode::ExactFraction,
        1,
        Library::new(1, 25),
        &[2, 3, 4, 5],
        &[1, 2, 3, 4, 5],
    )
    .unwrap();
    let a = Association::new(vec![vec![1, 2, 3], vec![4]]).unwrap();
    st.step(
        &a,
        &SlotInput {
            arrivals: vec![],
            demand: DemandVector::new(vec![2, 3, 4, 5]),
        },
    )
    .unwrap();
    st.evolve_popular(&[Arrival {
        file: 6,
        replaces: Some(5),
    }])
    .unwrap();
    let d = DemandVector::new(vec![6, 2, 3, 4]);
    let del = st.lrs_deliver(&a, &d).unwrap();
    assert_eq!(del.log.total_bits(), 64);
    let code = LinearBlockCode::optimal(64, 3).unwrap();
    assert_eq!(code.n(), 71);
    let run = encode_concatenated(&del.log, &code).unwrap();
    for e in 0..code.n() {
        let bad = inject_errors(&run, &[e], 1).unwrap();
        let restored = restore_log(&del.log, &syndrome_decode(&bad, &code).unwrap());
        verify_all(st.placement(), st.library(), &a, &d, &restored, true).unwrap();
    }
}
