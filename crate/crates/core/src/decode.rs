//! User-side decoding from cache contents plus the broadcast log.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use bitvec::prelude::BitSlice;
use bitvec::prelude::Lsb0;
use thiserror::Error;

use crate::association::Association;
use crate::delivery::{extract, xor_prefix, DemandVector, Part, TransmissionLog};
use crate::gf2::{rref_tracked, Gf2Matrix};
use crate::library::Library;
use crate::placement::{all_subsets, PlacementState, SubfileLabel};
use crate::{Bits, FileId, UserId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("user {user} cannot recover part {part} of file {file}")]
    UndecodableSubfile {
        user: UserId,
        file: FileId,
        part: Part,
    },
    #[error("user {0} is not associated with any cache")]
    UnknownUser(UserId),
    #[error("user {user} decoded file {file} incorrectly")]
    Mismatch { user: UserId, file: FileId },
}

/// Everything one cache holds: the subfiles `W^n_S` with the cache in `S`.
#[derive(Debug, Clone)]
pub struct CacheStore {
    cache: usize,
    subfiles: HashMap<(FileId, SubfileLabel), Bits>,
}

impl CacheStore {
    pub fn build(placement: &PlacementState, library: &Library, cache: usize) -> Self {
        let mut subfiles = HashMap::new();
        for n in placement.files() {
            let file = library.file(n);
            for s in all_subsets(placement.num_caches()) {
                if s.contains(cache) {
                    subfiles.insert((n, s), extract(&file, placement.subfile(n, s)));
                }
            }
        }
        Self { cache, subfiles }
    }

    pub fn cache(&self) -> usize {
        self.cache
    }

    pub fn get(&self, file: FileId, label: SubfileLabel) -> Option<&Bits> {
        self.subfiles.get(&(file, label))
    }

    pub fn total_bits(&self) -> usize {
        self.subfiles.values().map(|b| b.len()).sum()
    }
}

type Var = (FileId, Part);

struct Knowledge<'a> {
    store: &'a CacheStore,
    learned: HashMap<Var, Bits>,
}

impl Knowledge<'_> {
    fn get(&self, var: &Var) -> Option<&Bits> {
        match var.1 {
            Part::Subfile(s) => self.store.get(var.0, s).or_else(|| self.learned.get(var)),
            Part::Whole => self.learned.get(var),
        }
    }

    fn knows(&self, var: &Var, len: usize) -> bool {
        len == 0 || self.get(var).is_some()
    }
}

/// The parts of `file` a user at `cache` must obtain from the broadcast.
fn wanted_parts(placement: &PlacementState, file: FileId, cache: usize) -> Vec<(Var, usize)> {
    if !placement.contains_file(file) {
        return vec![((file, Part::Whole), placement.file_size())];
    }
    all_subsets(placement.num_caches())
        .into_iter()
        .filter(|s| !s.contains(cache))
        .map(|s| ((file, Part::Subfile(s)), placement.subfile_len(file, s)))
        .collect()
}

/// Repeatedly recovers the single unknown component of any transmission.
fn peel(log: &TransmissionLog, know: &mut Knowledge<'_>) {
    loop {
        let mut progress = false;
        for t in log.transmissions() {
            let unknown: Vec<_> = t
                .components
                .iter()
                .filter(|c| !know.knows(&(c.file, c.part), c.len))
                .collect();
            if unknown.len() != 1 {
                continue;
            }
            let target = unknown[0];
            let mut acc = t.payload.clone();
            for c in &t.components {
                if std::ptr::eq(c, target) || c.len == 0 {
                    continue;
                }
                xor_prefix(&mut acc, know.get(&(c.file, c.part)).expect("known"));
            }
            acc.truncate(target.len);
            know.learned.insert((target.file, target.part), acc);
            progress = true;
        }
        if !progress {
            return;
        }
    }
}

/// Solves for the still-unknown `targets` by Gaussian elimination. Bit
/// positions are grouped into intervals over which the set of unknowns
/// present in each transmission is constant, and one elimination serves
/// the whole interval.
fn solve_linear(log: &TransmissionLog, know: &mut Knowledge<'_>, targets: &[(Var, usize)]) {
    let mut unknown_len: BTreeMap<Var, usize> = BTreeMap::new();
    for t in log.transmissions() {
        for c in &t.components {
            let v = (c.file, c.part);
            if !know.knows(&v, c.len) {
                unknown_len.insert(v, c.len);
            }
        }
    }
    if unknown_len.is_empty() {
        return;
    }
    // Payload with every known component cancelled.
    let reduced: Vec<Bits> = log
        .transmissions()
        .iter()
        .map(|t| {
            let mut acc = t.payload.clone();
            for c in &t.components {
                if c.len > 0 {
                    if let Some(bits) = know.get(&(c.file, c.part)) {
                        xor_prefix(&mut acc, bits);
                    }
                }
            }
            acc
        })
        .collect();
    let vars: Vec<Var> = unknown_len.keys().copied().collect();
    let index: HashMap<Var, usize> = vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut bounds: Vec<usize> = unknown_len
        .values()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    bounds.insert(0, 0);
    let mut out: HashMap<Var, Bits> = targets
        .iter()
        .filter(|(v, len)| unknown_len.contains_key(v) && *len > 0)
        .map(|(v, len)| (*v, Bits::repeat(false, *len)))
        .collect();
    let mut solved: HashMap<Var, usize> = HashMap::new();
    for w in bounds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mut rows = Vec::new();
        let mut sources = Vec::new();
        for (ti, t) in log.transmissions().iter().enumerate() {
            let mut row = Bits::repeat(false, vars.len());
            for c in &t.components {
                if c.len > lo {
                    if let Some(&i) = index.get(&(c.file, c.part)) {
                        row.set(i, true);
                    }
                }
            }
            if row.any() {
                rows.push(row);
                sources.push(ti);
            }
        }
        let m = Gf2Matrix::from_rows(vars.len(), rows).expect("uniform rows");
        let tracked = rref_tracked(&m);
        for (v, bits) in out.iter_mut() {
            if unknown_len[v] <= lo {
                continue;
            }
            let Some(combo) = tracked.unit_combination(index[v]) else {
                continue;
            };
            let dst: &mut BitSlice<u64, Lsb0> = &mut bits[lo..hi];
            for r in combo.iter_ones() {
                let src = &reduced[sources[r]][lo..hi];
                for (mut d, s) in dst.iter_mut().zip(src.iter().by_vals()) {
                    *d ^= s;
                }
            }
            *solved.entry(*v).or_default() += hi - lo;
        }
    }
    for (v, bits) in out {
        if solved.get(&v).copied().unwrap_or(0) == bits.len() {
            know.learned.insert(v, bits);
        }
    }
}

fn assemble(placement: &PlacementState, file: FileId, know: &Knowledge<'_>) -> Bits {
    if !placement.contains_file(file) {
        return know
            .get(&(file, Part::Whole))
            .cloned()
            .expect("whole file known");
    }
    let mut out = Bits::repeat(false, placement.file_size());
    for s in all_subsets(placement.num_caches()) {
        let idx = placement.subfile(file, s);
        if idx.is_empty() {
            continue;
        }
        let bits = know.get(&(file, Part::Subfile(s))).expect("part known");
        for (i, &b) in idx.iter().enumerate() {
            out.set(b as usize, bits[i]);
        }
    }
    out
}

fn decode_with(
    user: UserId,
    assoc: &Association,
    demand: &DemandVector,
    placement: &PlacementState,
    store: &CacheStore,
    log: &TransmissionLog,
    linear: bool,
) -> Result<Bits, DecodeError> {
    let cache = assoc.cache_of(user).ok_or(DecodeError::UnknownUser(user))?;
    assert_eq!(cache, store.cache(), "store belongs to another cache");
    let file = demand.of(user);
    let wanted = wanted_parts(placement, file, cache);
    let mut know = Knowledge {
        store,
        learned: HashMap::new(),
    };
    peel(log, &mut know);
    let missing: Vec<(Var, usize)> = wanted
        .iter()
        .filter(|(v, len)| !know.knows(v, *len))
        .copied()
        .collect();
    if linear && !missing.is_empty() {
        solve_linear(log, &mut know, &missing);
    }
    if let Some(((file, part), _)) = wanted.iter().find(|(v, len)| !know.knows(v, *len)) {
        return Err(DecodeError::UndecodableSubfile {
            user,
            file: *file,
            part: *part,
        });
    }
    Ok(assemble(placement, file, &know))
}

/// Decodes by direct cancellation only: each missing part must be the
/// sole unknown in some transmission once earlier parts are known.
pub fn decode_user(
    user: UserId,
    assoc: &Association,
    demand: &DemandVector,
    placement: &PlacementState,
    store: &CacheStore,
    log: &TransmissionLog,
) -> Result<Bits, DecodeError> {
    decode_with(user, assoc, demand, placement, store, log, false)
}

/// Direct cancellation first, then a GF(2) solve over all received
/// transmissions for whatever is still missing.
pub fn decode_user_general(
    user: UserId,
    assoc: &Association,
    demand: &DemandVector,
    placement: &PlacementState,
    store: &CacheStore,
    log: &TransmissionLog,
) -> Result<Bits, DecodeError> {
    decode_with(user, assoc, demand, placement, store, log, true)
}

/// Decodes every user in `assoc` and compares with the library.
pub fn verify_all(
    placement: &PlacementState,
    library: &Library,
    assoc: &Association,
    demand: &DemandVector,
    log: &TransmissionLog,
    general: bool,
) -> Result<(), DecodeError> {
    let stores: Vec<CacheStore> = (0..assoc.num_caches())
        .map(|c| CacheStore::build(placement, library, c))
        .collect();
    for user in assoc.users() {
        let store = &stores[assoc.cache_of(user).expect("listed user")];
        let bits = decode_with(user, assoc, demand, placement, store, log, general)?;
        if bits != library.file(demand.of(user)) {
            return Err(DecodeError::Mismatch {
                user,
                file: demand.of(user),
            });
        }
    }
    Ok(())
}
