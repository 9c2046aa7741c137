mod common;

use codedcache::analytics::t_offline;
use codedcache::delivery::deliver_distinct;
use codedcache::online::{Arrival, OnlineState, SlotInput};
use codedcache::{
    Association, DemandVector, Library, PlacementMode, PlacementState, Rational, SystemParams,
};
use common::{random_assoc, Gen};

fn random_trace(
    g: &mut Gen,
    state: &mut OnlineState,
    assoc: &Association,
    slots: usize,
    distinct: bool,
) -> usize {
    let k = state.params().num_users as usize;
    let mut next = 100;
    let mut evictions = 0;
    for slot in 0..slots {
        // Explicit departures first; implicit ones then draw from what is left.
        let mut popular: Vec<u32> = state.popular().iter().copied().collect();
        g.shuffle(&mut popular);
        let mut explicit = Vec::new();
        let mut implicit = Vec::new();
        for _ in 0..g.below(3) {
            if g.below(2) == 0 {
                explicit.push(Arrival {
                    file: next,
                    replaces: popular.pop(),
                });
            } else {
                implicit.push(Arrival {
                    file: next,
                    replaces: None,
                });
            }
            next += 1;
        }
        let mut arrivals = explicit;
        arrivals.extend(implicit);
        // Demands are drawn after the arrivals are applied, so predict the
        // popular set on a scratch copy.
        let mut scratch = state.clone();
        scratch.evolve_popular(&arrivals).unwrap();
        let mut popular: Vec<u32> = scratch.popular().iter().copied().collect();
        let demand = if distinct {
            g.shuffle(&mut popular);
            popular[..k].to_vec()
        } else {
            (0..k).map(|_| popular[g.below(popular.len())]).collect()
        };
        let report = state
            .step(
                assoc,
                &SlotInput {
                    arrivals,
                    demand: DemandVector::new(demand),
                },
            )
            .unwrap_or_else(|e| panic!("slot {slot}: {e}"));
        let n_prime = state.params().catalog_size as usize;
        assert_eq!(report.cached_after.len(), n_prime);
        let files: Vec<u32> = state.placement().files().collect();
        assert_eq!(files, state.cached_files());
        let mut orders: Vec<u32> = files.iter().map(|&f| state.order_of(f).unwrap()).collect();
        orders.sort_unstable();
        assert_eq!(orders, (1..=n_prime as u32).collect::<Vec<_>>());
        evictions += report.evictions.len();
        for ev in &report.evictions {
            // Whole files sent in the same slot carry distinct clocks, so
            // the ordering parameter never separates two of them.
            assert!(
                ev.tie_uncoded.iter().filter(|&&u| u).count() <= 1,
                "slot {slot}: {ev:?}"
            );
        }
        if state.placement().mode() == PlacementMode::ExactFraction {
            assert_eq!(report.formula, Some(report.measured));
        }
    }
    evictions
}

fn setup(mode: PlacementMode, f: usize, seed: u64) -> (OnlineState, Association, Gen) {
    let p = SystemParams::online(4, 6, 3, 2, Rational::from_integer(2), f).unwrap();
    let st = OnlineState::with_random_order(
        &p,
        mode,
        seed,
        Library::new(seed, f),
        &[1, 2, 3, 4],
        &[1, 2, 3, 4, 5, 6],
    )
    .unwrap();
    let mut g = Gen::new(seed);
    let a = random_assoc(&mut g, 3, 2);
    (st, a, g)
}

#[test]
fn fifty_slots_exact() {
    let (mut st, a, mut g) = setup(PlacementMode::ExactFraction, 18, 5);
    assert!(random_trace(&mut g, &mut st, &a, 50, true) > 10);
}

#[test]
fn fifty_slots_random_placement() {
    let (mut st, a, mut g) = setup(PlacementMode::RandomSampled, 60, 6);
    assert!(random_trace(&mut g, &mut st, &a, 50, true) > 10);
}

#[test]
fn fifty_slots_repeated_demands() {
    let (mut st, a, mut g) = setup(PlacementMode::ExactFraction, 9, 7);
    assert!(random_trace(&mut g, &mut st, &a, 50, false) > 10);
}

#[test]
fn no_arrivals_behaves_like_offline() {
    let (mut st, a, _) = setup(PlacementMode::ExactFraction, 9, 8);
    let p = st.params().clone();
    let offline_pl = PlacementState::place_exact_files(&p, &[1, 2, 3, 4, 5, 6]).unwrap();
    for demand in [vec![1, 2, 3], vec![4, 1, 2], vec![3, 4, 1]] {
        let d = DemandVector::new(demand);
        let r = st
            .step(
                &a,
                &SlotInput {
                    arrivals: vec![],
                    demand: d.clone(),
                },
            )
            .unwrap();
        let off = deliver_distinct(&offline_pl, st.library(), &a, &d).unwrap();
        assert_eq!(r.measured, off.normalized_time());
        assert_eq!(r.measured, t_offline(&a.profile(), &p).unwrap());
        assert!(r.evictions.is_empty());
    }
}
