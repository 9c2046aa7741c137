//! Online coded caching: least-recently-sent (LRS) replacement over shared
//! caches, with a unique ordering parameter `o` per cached file so that
//! every cache evicts the same file.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::analytics::{t_online, t_online_nondistinct, AnalyticsError};
use crate::association::{Association, Profile};
use crate::decode::{verify_all, DecodeError};
use crate::delivery::{
    run_nondistinct, run_rounds, Component, DeliveryError, DemandVector, Part, SubfileSource,
    Transmission, TransmissionKind, TransmissionLog,
};
use crate::library::Library;
use crate::params::SystemParams;
use crate::placement::{cache_quota, PlacementError, PlacementMode, PlacementState};
use crate::rng::{derive_key, select_indices, KeyedStream, DOMAIN_ORDER, DOMAIN_POPULAR};
use crate::{FileId, Rational, UserId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OnlineError {
    #[error("arrival {0} is already popular")]
    ArrivalAlreadyPopular(FileId),
    #[error("departing file {0} is not popular")]
    DepartureNotPopular(FileId),
    #[error("user {user} requests file {file}, which is not popular")]
    DemandOutsidePopularSet { user: UserId, file: FileId },
    #[error("expected {expected} {what} files, got {got}")]
    WrongCount {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("file {0} listed twice")]
    Duplicate(FileId),
    #[error("cache quota is not an integer: {0}")]
    QuotaNonIntegral(PlacementError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Delivery(#[from] DeliveryError),
    #[error("slot {slot}: {source}")]
    Decode { slot: u64, source: DecodeError },
    #[error("slot {slot}: measured time {measured} differs from formula {formula}")]
    FormulaMismatch {
        slot: u64,
        measured: Rational,
        formula: Rational,
    },
}

/// When a file was last sent: slot, then position inside the slot. Whole
/// files sent uncoded take ranks `0..u` in send order; every appearance in
/// the coded phase takes rank `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SendClock {
    pub slot: u64,
    pub rank: u32,
}

/// A new popular file, optionally naming the file it pushes out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arrival {
    pub file: FileId,
    pub replaces: Option<FileId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotInput {
    pub arrivals: Vec<Arrival>,
    pub demand: DemandVector,
}

/// One cache replacement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Eviction {
    pub evicted: FileId,
    pub inserted: FileId,
    /// Ordering parameter moved from `evicted` to `inserted`.
    pub order: u32,
    pub clock: Option<SendClock>,
    /// Files sharing the oldest clock, when `o` had to decide.
    pub tie: Vec<FileId>,
    /// For each tied file, whether its last send was an uncoded whole file.
    pub tie_uncoded: Vec<bool>,
}

/// Result of the delivery phase of one slot.
#[derive(Debug, Clone)]
pub struct SlotDelivery {
    pub log: TransmissionLog,
    /// Users still served by coded delivery.
    pub reduced: Association,
    /// Uncached demanded files, in send order.
    pub uncached: Vec<FileId>,
}

#[derive(Debug, Clone)]
pub struct SlotReport {
    pub slot: u64,
    pub demand: DemandVector,
    /// `(arrived, departed)` pairs.
    pub arrivals: Vec<(FileId, FileId)>,
    pub uncached: Vec<FileId>,
    pub reduced_profile: Profile,
    pub measured: Rational,
    /// Closed-form time, available in exact-fraction mode.
    pub formula: Option<Rational>,
    pub evictions: Vec<Eviction>,
    pub cached_after: Vec<FileId>,
    pub log: TransmissionLog,
}

impl SlotReport {
    pub fn u_count(&self) -> usize {
        self.uncached.len()
    }
}

#[derive(Debug, Clone)]
pub struct OnlineState {
    params: SystemParams,
    library: Library,
    seed: u64,
    popular: BTreeSet<FileId>,
    order: BTreeMap<FileId, u32>,
    placement: PlacementState,
    last_sent: BTreeMap<FileId, SendClock>,
    last_uncoded: BTreeSet<FileId>,
    slot: u64,
}

impl OnlineState {
    /// `cached` lists the `N'` initially cached files by ordering parameter:
    /// the first gets `o = 1`.
    pub fn new(
        params: &SystemParams,
        mode: PlacementMode,
        seed: u64,
        library: Library,
        popular: &[FileId],
        cached: &[FileId],
    ) -> Result<Self, OnlineError> {
        params.validate().map_err(PlacementError::from)?;
        if mode == PlacementMode::RandomSampled {
            cache_quota(params).map_err(OnlineError::QuotaNonIntegral)?;
        }
        let count =
            |what, list: &[FileId], expected: u32| -> Result<BTreeSet<FileId>, OnlineError> {
                let set: BTreeSet<FileId> = list.iter().copied().collect();
                if set.len() != list.len() {
                    let dup = list
                        .iter()
                        .find(|f| list.iter().filter(|g| g == f).count() > 1);
                    return Err(OnlineError::Duplicate(*dup.expect("duplicate present")));
                }
                if list.len() != expected as usize {
                    return Err(OnlineError::WrongCount {
                        what,
                        expected: expected as usize,
                        got: list.len(),
                    });
                }
                Ok(set)
            };
        let popular = count("popular", popular, params.num_files)?;
        count("cached", cached, params.catalog_size)?;
        let placement = match mode {
            PlacementMode::RandomSampled => {
                PlacementState::place_random_files(params, seed, cached)?
            }
            PlacementMode::ExactFraction => PlacementState::place_exact_files(params, cached)?,
        };
        Ok(Self {
            params: params.clone(),
            library,
            seed,
            popular,
            order: cached
                .iter()
                .enumerate()
                .map(|(i, &f)| (f, i as u32 + 1))
                .collect(),
            placement,
            last_sent: BTreeMap::new(),
            last_uncoded: BTreeSet::new(),
            slot: 0,
        })
    }

    /// As [`OnlineState::new`], with ordering parameters from a seeded shuffle.
    pub fn with_random_order(
        params: &SystemParams,
        mode: PlacementMode,
        seed: u64,
        library: Library,
        popular: &[FileId],
        cached: &[FileId],
    ) -> Result<Self, OnlineError> {
        let perm = select_indices(
            derive_key(&[DOMAIN_ORDER, seed]),
            cached.len(),
            cached.len(),
        );
        let shuffled: Vec<FileId> = perm.iter().map(|&i| cached[i as usize]).collect();
        Self::new(params, mode, seed, library, popular, &shuffled)
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn library(&self) -> &Library {
        &self.library
    }

    pub fn placement(&self) -> &PlacementState {
        &self.placement
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn popular(&self) -> &BTreeSet<FileId> {
        &self.popular
    }

    /// Cached files, ascending.
    pub fn cached_files(&self) -> Vec<FileId> {
        self.order.keys().copied().collect()
    }

    pub fn is_cached(&self, file: FileId) -> bool {
        self.order.contains_key(&file)
    }

    pub fn order_of(&self, file: FileId) -> Option<u32> {
        self.order.get(&file).copied()
    }

    pub fn last_sent(&self, file: FileId) -> Option<SendClock> {
        self.last_sent.get(&file).copied()
    }

    /// Starts the next slot and applies arrivals. Without an explicit
    /// departure, a seeded uniform choice among the current popular files
    /// leaves. Returns `(arrived, departed)` pairs.
    pub fn evolve_popular(
        &mut self,
        arrivals: &[Arrival],
    ) -> Result<Vec<(FileId, FileId)>, OnlineError> {
        self.slot += 1;
        let mut out = Vec::new();
        for (i, a) in arrivals.iter().enumerate() {
            if self.popular.contains(&a.file) {
                return Err(OnlineError::ArrivalAlreadyPopular(a.file));
            }
            let gone = match a.replaces {
                Some(f) if self.popular.contains(&f) => f,
                Some(f) => return Err(OnlineError::DepartureNotPopular(f)),
                None => {
                    let key = derive_key(&[DOMAIN_POPULAR, self.seed, self.slot, i as u64]);
                    let k = KeyedStream::new(key).below(self.popular.len() as u64) as usize;
                    *self.popular.iter().nth(k).expect("nonempty popular set")
                }
            };
            self.popular.remove(&gone);
            self.popular.insert(a.file);
            out.push((a.file, gone));
        }
        Ok(out)
    }

    /// Delivery phase: uncached demanded files go out whole, in order of
    /// first request; the remaining users are served from the caches.
    pub fn lrs_deliver(
        &mut self,
        assoc: &Association,
        demand: &DemandVector,
    ) -> Result<SlotDelivery, OnlineError> {
        let p = &self.params;
        if assoc.num_caches() != p.num_caches as usize
            || assoc.num_users() != p.num_users
            || demand.len() != p.num_users as usize
        {
            return Err(DeliveryError::ParamsMismatch(format!(
                "online system has K={} Λ={}, got {} users on {} caches with {} demands",
                p.num_users,
                p.num_caches,
                assoc.num_users(),
                assoc.num_caches(),
                demand.len()
            ))
            .into());
        }
        for u in 1..=demand.len() as UserId {
            if !self.popular.contains(&demand.of(u)) {
                return Err(OnlineError::DemandOutsidePopularSet {
                    user: u,
                    file: demand.of(u),
                });
            }
        }
        let mut uncached: Vec<(FileId, UserId)> = Vec::new();
        for u in 1..=demand.len() as UserId {
            let f = demand.of(u);
            if !self.is_cached(f) && !uncached.iter().any(|&(g, _)| g == f) {
                uncached.push((f, u));
            }
        }
        let mut log = TransmissionLog::new(p.file_size);
        let mut source = SubfileSource::new(&self.placement, &self.library);
        for &(f, u) in &uncached {
            let bits = source.file(f).clone();
            let comp = Component {
                user: Some(u),
                file: f,
                part: Part::Whole,
                len: bits.len(),
            };
            log.push(Transmission {
                kind: TransmissionKind::UncodedFile,
                round: 0,
                subset: None,
                components: vec![comp],
                payload: bits,
            });
        }
        let reduced = assoc.restricted(|u| self.is_cached(demand.of(u)));
        if demand.distinct_among(reduced.users()) == reduced.users().count() {
            run_rounds(&mut source, &reduced, demand, 1, false, &mut log);
        } else {
            run_nondistinct(&mut source, &reduced, demand, &mut log);
        }
        let u = uncached.len() as u32;
        for (rank, &(f, _)) in uncached.iter().enumerate() {
            self.last_sent.insert(
                f,
                SendClock {
                    slot: self.slot,
                    rank: rank as u32,
                },
            );
            self.last_uncoded.insert(f);
        }
        for t in log.transmissions() {
            if t.kind == TransmissionKind::UncodedFile {
                continue;
            }
            for c in &t.components {
                self.last_sent.insert(
                    c.file,
                    SendClock {
                        slot: self.slot,
                        rank: u,
                    },
                );
                self.last_uncoded.remove(&c.file);
            }
        }
        Ok(SlotDelivery {
            log,
            reduced,
            uncached: uncached.into_iter().map(|(f, _)| f).collect(),
        })
    }

    /// Replaces, for each uncached file in send order, the cached file with
    /// the oldest send clock (never sent counts as oldest), ties broken by
    /// the smallest ordering parameter.
    pub fn cache_update(&mut self, uncached: &[FileId]) -> Result<Vec<Eviction>, OnlineError> {
        let mut out = Vec::new();
        for &new in uncached {
            let key = |f: &FileId| (self.last_sent.get(f).copied(), self.order[f]);
            let victim = *self
                .order
                .keys()
                .min_by_key(|f| key(f))
                .expect("cache nonempty");
            let clock = self.last_sent.get(&victim).copied();
            let tie: Vec<FileId> = self
                .order
                .keys()
                .filter(|f| self.last_sent.get(f).copied() == clock)
                .copied()
                .collect();
            let tied = tie.len() > 1;
            let tie_uncoded = tie.iter().map(|f| self.last_uncoded.contains(f)).collect();
            let order = self.order.remove(&victim).expect("victim cached");
            self.placement.remove_file(victim)?;
            self.placement.insert_file(new, self.slot)?;
            self.order.insert(new, order);
            self.last_sent.remove(&victim);
            self.last_uncoded.remove(&victim);
            out.push(Eviction {
                evicted: victim,
                inserted: new,
                order,
                clock,
                tie: if tied { tie } else { Vec::new() },
                tie_uncoded: if tied { tie_uncoded } else { Vec::new() },
            });
        }
        Ok(out)
    }

    /// One full slot: arrivals, delivery, decoding check for every user,
    /// closed-form check in exact mode, then cache update.
    pub fn step(
        &mut self,
        assoc: &Association,
        input: &SlotInput,
    ) -> Result<SlotReport, OnlineError> {
        let arrivals = self.evolve_popular(&input.arrivals)?;
        let demand = &input.demand;
        let delivery = self.lrs_deliver(assoc, demand)?;
        verify_all(
            &self.placement,
            &self.library,
            assoc,
            demand,
            &delivery.log,
            true,
        )
        .map_err(|source| OnlineError::Decode {
            slot: self.slot,
            source,
        })?;
        let measured = delivery.log.normalized_time();
        let reduced_profile = delivery.reduced.profile();
        let formula = match self.placement.mode() {
            PlacementMode::RandomSampled => None,
            PlacementMode::ExactFraction => {
                Some(self.formula(demand, &delivery, &reduced_profile)?)
            }
        };
        if let Some(f) = formula {
            if f != measured {
                return Err(OnlineError::FormulaMismatch {
                    slot: self.slot,
                    measured,
                    formula: f,
                });
            }
        }
        let evictions = self.cache_update(&delivery.uncached)?;
        Ok(SlotReport {
            slot: self.slot,
            demand: demand.clone(),
            arrivals,
            uncached: delivery.uncached,
            reduced_profile,
            measured,
            formula,
            evictions,
            cached_after: self.cached_files(),
            log: delivery.log,
        })
    }

    fn formula(
        &self,
        demand: &DemandVector,
        delivery: &SlotDelivery,
        reduced_profile: &Profile,
    ) -> Result<Rational, OnlineError> {
        let u = delivery.uncached.len();
        let users = delivery.reduced.users().count();
        if demand.distinct_among(delivery.reduced.users()) == users {
            match t_online(reduced_profile, u, &self.params) {
                Ok(t) => Ok(t),
                Err(AnalyticsError::ZeroMemory { unicast_time }) => Ok(unicast_time),
                Err(e) => unreachable!("profile built from a valid association: {e}"),
            }
        } else {
            Ok(t_online_nondistinct(
                demand,
                &delivery.reduced,
                u,
                &self.params,
            ))
        }
    }
}

/// Runs a whole trace, stopping at the first error.
pub fn run_trace(
    state: &mut OnlineState,
    assoc: &Association,
    slots: &[SlotInput],
) -> Result<Vec<SlotReport>, OnlineError> {
    slots.iter().map(|s| state.step(assoc, s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slot(arrivals: &[(FileId, Option<FileId>)], demand: &[FileId]) -> SlotInput {
        SlotInput {
            arrivals: arrivals
                .iter()
                .map(|&(file, replaces)| Arrival { file, replaces })
                .collect(),
            demand: DemandVector::new(demand.to_vec()),
        }
    }

    fn example2() -> (OnlineState, Association) {
        let p = SystemParams::online(4, 5, 4, 2, Rational::from_integer(2), 25).unwrap();
        let st = OnlineState::new(
            &p,
            PlacementMode::ExactFraction,
            1,
            Library::new(1, 25),
            &[2, 3, 4, 5],
            &[1, 2, 3, 4, 5],
        )
        .unwrap();
        (st, Association::new(vec![vec![1, 2, 3], vec![4]]).unwrap())
    }

    #[test]
    fn two_slot_example() {
        let (mut st, a) = example2();
        let reports = run_trace(
            &mut st,
            &a,
            &[
                slot(&[], &[2, 3, 4, 5]),
                slot(&[(6, Some(5))], &[6, 2, 3, 4]),
            ],
        )
        .unwrap();
        assert_eq!(reports[0].measured, Rational::new(54, 25));
        assert!(reports[0].evictions.is_empty());
        assert_eq!(reports[1].measured, Rational::new(64, 25));
        assert_eq!(reports[1].u_count(), 1);
        assert_eq!(reports[1].evictions[0].evicted, 1);
        assert!(reports[1].evictions[0].tie.is_empty());
        assert_eq!(reports[1].cached_after, vec![2, 3, 4, 5, 6]);
        assert_eq!(st.order_of(6), Some(1));
    }

    #[test]
    fn ordering_breaks_never_sent_tie() {
        // A..E = 1..5 with o(E)=1, o(D)=2, ..., o(A)=5.
        let p = SystemParams::online(3, 5, 3, 3, Rational::from_integer(1), 125).unwrap();
        let mut st = OnlineState::new(
            &p,
            PlacementMode::ExactFraction,
            1,
            Library::new(2, 125),
            &[1, 2, 3],
            &[5, 4, 3, 2, 1],
        )
        .unwrap();
        let a = Association::new(vec![vec![1], vec![2], vec![3]]).unwrap();
        let r = run_trace(
            &mut st,
            &a,
            &[slot(&[], &[1, 2, 3]), slot(&[(6, Some(3))], &[1, 2, 6])],
        )
        .unwrap();
        let ev = &r[1].evictions[0];
        assert_eq!(ev.evicted, 5);
        assert_eq!(ev.tie, vec![4, 5]);
        assert_eq!(ev.clock, None);
    }

    #[test]
    fn ordering_breaks_same_slot_tie() {
        // A..G = 1..7, o(A)=1 ... o(F)=6.
        let p = SystemParams::online(3, 6, 2, 2, Rational::from_integer(1), 36).unwrap();
        let mut st = OnlineState::new(
            &p,
            PlacementMode::ExactFraction,
            3,
            Library::new(3, 36),
            &[1, 2, 3],
            &[1, 2, 3, 4, 5, 6],
        )
        .unwrap();
        let a = Association::new(vec![vec![1], vec![2]]).unwrap();
        let trace = [
            slot(&[], &[1, 2]),
            slot(&[(4, Some(1))], &[3, 4]),
            slot(&[(5, Some(2)), (6, Some(3))], &[5, 6]),
            slot(&[(7, Some(4))], &[5, 7]),
        ];
        let r = run_trace(&mut st, &a, &trace).unwrap();
        let ev = &r[3].evictions[0];
        assert_eq!(ev.evicted, 1);
        assert_eq!(ev.tie, vec![1, 2]);
        assert_eq!(ev.clock, Some(SendClock { slot: 1, rank: 0 }));
    }

    #[test]
    fn all_uncached_is_unicast() {
        let (mut st, a) = example2();
        let trace = [slot(
            &[(6, Some(2)), (7, Some(3)), (8, Some(4)), (9, Some(5))],
            &[6, 7, 8, 9],
        )];
        let r = run_trace(&mut st, &a, &trace).unwrap();
        assert_eq!(r[0].measured, Rational::from_integer(4));
        assert_eq!(r[0].evictions.len(), 4);
        // Same-slot uncoded files are clocked in send order.
        let ranks: Vec<u32> = (6..=9).map(|f| st.last_sent(f).unwrap().rank).collect();
        assert_eq!(ranks, vec![0, 1, 2, 3]);
        assert_eq!(st.cached_files().len(), 5);
    }

    #[test]
    fn popular_set_errors() {
        let (mut st, a) = example2();
        assert_eq!(
            st.evolve_popular(&[Arrival {
                file: 2,
                replaces: None
            }]),
            Err(OnlineError::ArrivalAlreadyPopular(2))
        );
        assert_eq!(
            st.evolve_popular(&[Arrival {
                file: 9,
                replaces: Some(1)
            }]),
            Err(OnlineError::DepartureNotPopular(1))
        );
        let err = st
            .lrs_deliver(&a, &DemandVector::new(vec![1, 2, 3, 4]))
            .unwrap_err();
        assert_eq!(
            err,
            OnlineError::DemandOutsidePopularSet { user: 1, file: 1 }
        );
    }

    #[test]
    fn random_departure_is_seeded() {
        let (mut a, _) = example2();
        let (mut b, _) = example2();
        let arr = [
            Arrival {
                file: 8,
                replaces: None,
            },
            Arrival {
                file: 9,
                replaces: None,
            },
        ];
        let x = a.evolve_popular(&arr).unwrap();
        assert_eq!(x, b.evolve_popular(&arr).unwrap());
        assert_eq!(a.popular().len(), 4);
        assert!(a.popular().contains(&8) && a.popular().contains(&9));
    }

    #[test]
    fn repeated_online_demands() {
        let (mut st, a) = example2();
        let r = run_trace(&mut st, &a, &[slot(&[(6, Some(5))], &[6, 2, 2, 6])]).unwrap();
        assert_eq!(r[0].u_count(), 1);
        assert_eq!(r[0].formula, Some(r[0].measured));
    }
}
