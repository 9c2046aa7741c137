//! Offline delivery: round-based coded delivery for distinct demands and
//! the leader-based scheme for repeated demands, both producing a
//! bit-exact transmission log.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::association::Association;
use crate::library::Library;
use crate::placement::{subsets_of_size, PlacementState, SubfileLabel};
use crate::{Bits, FileId, Rational, UserId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeliveryError {
    #[error("file {file} is requested by users {users:?}; use the non-distinct scheme")]
    NonDistinctDemand { file: FileId, users: Vec<UserId> },
    #[error("parameter mismatch: {0}")]
    ParamsMismatch(String),
    #[error("file {0} is not placed in the caches")]
    FileNotPlaced(FileId),
}

/// Demands `d_1..d_K`, indexed by 1-based user id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DemandVector(Vec<FileId>);

impl DemandVector {
    pub fn new(files: Vec<FileId>) -> Self {
        Self(files)
    }

    pub fn of(&self, user: UserId) -> FileId {
        self.0[user as usize - 1]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[FileId] {
        &self.0
    }

    pub fn distinct_files(&self) -> BTreeSet<FileId> {
        self.0.iter().copied().collect()
    }

    /// `N_e(d)`.
    pub fn num_distinct(&self) -> usize {
        self.distinct_files().len()
    }

    pub fn is_distinct(&self) -> bool {
        self.num_distinct() == self.0.len()
    }

    /// Number of distinct files requested by `users`.
    pub fn distinct_among<I: IntoIterator<Item = UserId>>(&self, users: I) -> usize {
        users
            .into_iter()
            .map(|u| self.of(u))
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Per file, the users requesting it.
    pub fn requesters(&self) -> BTreeMap<FileId, Vec<UserId>> {
        let mut map: BTreeMap<FileId, Vec<UserId>> = BTreeMap::new();
        for (i, &f) in self.0.iter().enumerate() {
            map.entry(f).or_default().push(i as UserId + 1);
        }
        map
    }
}

/// Which piece of a file a transmission component carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Part {
    Subfile(SubfileLabel),
    Whole,
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Part::Subfile(s) => write!(f, "{s}"),
            Part::Whole => write!(f, "*"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// User the component is addressed to, when there is one.
    pub user: Option<UserId>,
    pub file: FileId,
    pub part: Part,
    /// True length in bits; the payload may be longer (zero padding).
    pub len: usize,
}

impl Component {
    /// `W^n_S` style name.
    pub fn name(&self) -> String {
        match self.part {
            Part::Subfile(s) if s.is_empty() => format!("W^{}_φ", self.file),
            Part::Subfile(s) => format!("W^{}_{s}", self.file),
            Part::Whole => format!("W^{}", self.file),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransmissionKind {
    Coded,
    UncodedSubfile,
    UncodedFile,
}

impl fmt::Display for TransmissionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransmissionKind::Coded => "coded",
            TransmissionKind::UncodedSubfile => "uncoded-subfile",
            TransmissionKind::UncodedFile => "uncoded-file",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transmission {
    pub kind: TransmissionKind,
    /// 1-based round; 0 for transmissions sent before the rounds.
    pub round: usize,
    /// The cache set `S` of the round loop, if any.
    pub subset: Option<SubfileLabel>,
    pub components: Vec<Component>,
    pub payload: Bits,
}

impl Transmission {
    fn from_components(
        kind: TransmissionKind,
        round: usize,
        subset: Option<SubfileLabel>,
        components: Vec<Component>,
        sources: &[&Bits],
    ) -> Self {
        let len = components.iter().map(|c| c.len).max().unwrap_or(0);
        let mut payload = Bits::repeat(false, len);
        for src in sources {
            xor_prefix(&mut payload, src);
        }
        Self {
            kind,
            round,
            subset,
            components,
            payload,
        }
    }

    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    /// `W^1_{2} ⊕ W^4_{1}` style description.
    pub fn describe(&self) -> String {
        self.components
            .iter()
            .map(Component::name)
            .collect::<Vec<_>>()
            .join(" ⊕ ")
    }

    /// First 16 hex digits of SHA-256 over the payload packed LSB-first.
    pub fn payload_hash(&self) -> String {
        let mut bytes = vec![0u8; self.payload.len().div_ceil(8)];
        for (i, b) in self.payload.iter().by_vals().enumerate() {
            if b {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        let digest = Sha256::digest(&bytes);
        hex::encode(&digest[..8])
    }
}

/// Ordered broadcast for one demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransmissionLog {
    file_size: usize,
    transmissions: Vec<Transmission>,
}

impl TransmissionLog {
    pub fn new(file_size: usize) -> Self {
        Self {
            file_size,
            transmissions: Vec::new(),
        }
    }

    pub fn push(&mut self, t: Transmission) {
        self.transmissions.push(t);
    }

    pub fn file_size(&self) -> usize {
        self.file_size
    }

    pub fn transmissions(&self) -> &[Transmission] {
        &self.transmissions
    }

    pub fn len(&self) -> usize {
        self.transmissions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transmissions.is_empty()
    }

    pub fn total_bits(&self) -> usize {
        self.transmissions.iter().map(Transmission::len).sum()
    }

    /// Total bits divided by the file size.
    pub fn normalized_time(&self) -> Rational {
        Rational::new(self.total_bits() as i128, self.file_size as i128)
    }

    /// Line-oriented trace: `round kind S components len hash`, tab separated.
    /// Components are written `file:part@user`, joined with `+`.
    pub fn to_trace(&self) -> String {
        let mut out = String::from("# round\tkind\tS\tcomponents\tlen\tsha256\n");
        for t in &self.transmissions {
            let comps: Vec<String> = t
                .components
                .iter()
                .map(|c| match c.user {
                    Some(u) => format!("{}:{}@{u}", c.file, c.part),
                    None => format!("{}:{}", c.file, c.part),
                })
                .collect();
            let subset = t.subset.map_or_else(|| "-".to_string(), |s| s.to_string());
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                t.round,
                t.kind,
                subset,
                comps.join("+"),
                t.len(),
                t.payload_hash()
            ));
        }
        out
    }
}

/// Normalized delivery time of a log.
pub fn measured_time(log: &TransmissionLog) -> Rational {
    log.normalized_time()
}

/// XORs `src` into the first `src.len()` bits of `dst`.
/// Copies `bits` into fresh storage when it does not start at bit 0 of
/// its first word, so raw word access lines up.
pub(crate) fn head_aligned(bits: &Bits) -> std::borrow::Cow<'_, Bits> {
    if bits.as_bitptr().bit().into_inner() == 0 {
        std::borrow::Cow::Borrowed(bits)
    } else {
        let mut out = Bits::with_capacity(bits.len());
        out.extend_from_bitslice(bits);
        std::borrow::Cow::Owned(out)
    }
}

pub(crate) fn xor_prefix(dst: &mut Bits, src: &Bits) {
    assert!(src.len() <= dst.len());
    dst.force_align();
    let src = head_aligned(src);
    let full = src.len() / 64;
    let rem = src.len() % 64;
    let s = src.as_raw_slice();
    let d = dst.as_raw_mut_slice();
    for i in 0..full {
        d[i] ^= s[i];
    }
    if rem > 0 {
        d[full] ^= s[full] & ((1u64 << rem) - 1);
    }
}

pub(crate) fn extract(file: &Bits, indices: &[u32]) -> Bits {
    indices.iter().map(|&i| file[i as usize]).collect()
}

/// Server-side access to subfile contents.
pub(crate) struct SubfileSource<'a> {
    placement: &'a PlacementState,
    library: &'a Library,
    files: HashMap<FileId, Bits>,
    subfiles: HashMap<(FileId, SubfileLabel), Bits>,
}

impl<'a> SubfileSource<'a> {
    pub(crate) fn new(placement: &'a PlacementState, library: &'a Library) -> Self {
        Self {
            placement,
            library,
            files: HashMap::new(),
            subfiles: HashMap::new(),
        }
    }

    pub(crate) fn file(&mut self, file: FileId) -> &Bits {
        let library = self.library;
        self.files.entry(file).or_insert_with(|| library.file(file))
    }

    fn load(&mut self, file: FileId, label: SubfileLabel) {
        if !self.subfiles.contains_key(&(file, label)) {
            let placement = self.placement;
            let bits = extract(self.file(file), placement.subfile(file, label));
            self.subfiles.insert((file, label), bits);
        }
    }

    fn subfile(&self, file: FileId, label: SubfileLabel) -> &Bits {
        &self.subfiles[&(file, label)]
    }
}

fn check_inputs(
    placement: &PlacementState,
    assoc: &Association,
    demand: &DemandVector,
) -> Result<(), DeliveryError> {
    let p = placement.params();
    if assoc.num_caches() != p.num_caches as usize {
        return Err(DeliveryError::ParamsMismatch(format!(
            "association has {} caches, placement has {}",
            assoc.num_caches(),
            p.num_caches
        )));
    }
    if assoc.num_users() != p.num_users || demand.len() != p.num_users as usize {
        return Err(DeliveryError::ParamsMismatch(format!(
            "K={} but association covers {} users and demand has {} entries",
            p.num_users,
            assoc.num_users(),
            demand.len()
        )));
    }
    for u in assoc.users() {
        if !placement.contains_file(demand.of(u)) {
            return Err(DeliveryError::FileNotPlaced(demand.of(u)));
        }
    }
    Ok(())
}

/// Round-based delivery over the users present in `assoc`: rounds `j`, sizes
/// `s = Λ..min_size`, subsets in lexicographic order. With `leader_gate`,
/// a transmission is sent only if its set contains the cache of a round
/// leader (lowest user id per distinct file among the round's users).
pub(crate) fn run_rounds(
    source: &mut SubfileSource<'_>,
    assoc: &Association,
    demand: &DemandVector,
    min_size: u32,
    leader_gate: bool,
    log: &mut TransmissionLog,
) {
    let lambda = source.placement.num_caches();
    for j in 1..=assoc.num_rounds() {
        let members: Vec<(usize, UserId)> = assoc.round_members(j).collect();
        let mut user_at = vec![None; lambda as usize];
        for &(c, u) in &members {
            user_at[c] = Some(u);
        }
        let leader_caches = if leader_gate {
            let mut first: BTreeMap<FileId, (UserId, usize)> = BTreeMap::new();
            for &(c, u) in &members {
                let e = first.entry(demand.of(u)).or_insert((u, c));
                if u < e.0 {
                    *e = (u, c);
                }
            }
            Some(SubfileLabel::from_caches(first.values().map(|&(_, c)| c)))
        } else {
            None
        };
        for s in (min_size.max(1)..=lambda).rev() {
            for set in subsets_of_size(lambda, s) {
                if let Some(leaders) = leader_caches {
                    if !set.intersects(leaders) {
                        continue;
                    }
                }
                let mut components = Vec::new();
                for c in set.caches() {
                    if let Some(u) = user_at[c] {
                        let file = demand.of(u);
                        let label = set.without(c);
                        components.push(Component {
                            user: Some(u),
                            file,
                            part: Part::Subfile(label),
                            len: source.placement.subfile_len(file, label),
                        });
                    }
                }
                if components.is_empty() {
                    continue;
                }
                for comp in &components {
                    if let Part::Subfile(l) = comp.part {
                        source.load(comp.file, l);
                    }
                }
                let sources: Vec<&Bits> = components
                    .iter()
                    .map(|c| match c.part {
                        Part::Subfile(l) => source.subfile(c.file, l),
                        Part::Whole => unreachable!(),
                    })
                    .collect();
                let kind = if components.len() > 1 {
                    TransmissionKind::Coded
                } else {
                    TransmissionKind::UncodedSubfile
                };
                log.push(Transmission::from_components(
                    kind,
                    j,
                    Some(set),
                    components,
                    &sources,
                ));
            }
        }
    }
}

/// Sends `W^n_φ` for every file requested by a user of `assoc`, ascending.
pub(crate) fn send_phi_subfiles(
    source: &mut SubfileSource<'_>,
    assoc: &Association,
    demand: &DemandVector,
    log: &mut TransmissionLog,
) {
    let mut first: BTreeMap<FileId, UserId> = BTreeMap::new();
    for u in assoc.users() {
        let e = first.entry(demand.of(u)).or_insert(u);
        *e = (*e).min(u);
    }
    for (&file, &user) in &first {
        source.load(file, SubfileLabel::EMPTY);
        let comp = Component {
            user: Some(user),
            file,
            part: Part::Subfile(SubfileLabel::EMPTY),
            len: source.placement.subfile_len(file, SubfileLabel::EMPTY),
        };
        let bits = source.subfile(file, SubfileLabel::EMPTY);
        log.push(Transmission::from_components(
            TransmissionKind::UncodedSubfile,
            0,
            None,
            vec![comp],
            &[bits],
        ));
    }
}

/// Leader-based delivery restricted to the users present in `assoc`.
pub(crate) fn run_nondistinct(
    source: &mut SubfileSource<'_>,
    assoc: &Association,
    demand: &DemandVector,
    log: &mut TransmissionLog,
) {
    send_phi_subfiles(source, assoc, demand, log);
    let dedup = assoc.dedup_within_caches(demand);
    run_rounds(source, &dedup.association, demand, 2, true, log);
}

/// Round-based delivery for a demand vector with all entries distinct.
pub fn deliver_distinct(
    placement: &PlacementState,
    library: &Library,
    assoc: &Association,
    demand: &DemandVector,
) -> Result<TransmissionLog, DeliveryError> {
    check_inputs(placement, assoc, demand)?;
    if let Some((&file, users)) = demand.requesters().iter().find(|(_, u)| u.len() > 1) {
        return Err(DeliveryError::NonDistinctDemand {
            file,
            users: users.clone(),
        });
    }
    Ok(deliver_rounds(placement, library, assoc, demand))
}

/// Round-based delivery without the distinctness check. Repeated demands are still
/// decodable, just wasteful.
pub fn deliver_rounds(
    placement: &PlacementState,
    library: &Library,
    assoc: &Association,
    demand: &DemandVector,
) -> TransmissionLog {
    let mut source = SubfileSource::new(placement, library);
    let mut log = TransmissionLog::new(placement.file_size());
    run_rounds(&mut source, assoc, demand, 1, false, &mut log);
    log
}

/// Delivery for arbitrary demands: `W^n_φ` of each distinct file first,
/// then rounds over the within-cache deduplicated association with
/// `|S| ≥ 2`, sending only sets that contain a leader's cache.
pub fn deliver_nondistinct(
    placement: &PlacementState,
    library: &Library,
    assoc: &Association,
    demand: &DemandVector,
) -> Result<TransmissionLog, DeliveryError> {
    check_inputs(placement, assoc, demand)?;
    let mut source = SubfileSource::new(placement, library);
    let mut log = TransmissionLog::new(placement.file_size());
    run_nondistinct(&mut source, assoc, demand, &mut log);
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::binom;
    use crate::SystemParams;

    fn example1(m: i128, groups: Vec<Vec<UserId>>) -> (PlacementState, Library, Association) {
        let p = SystemParams::offline(4, 4, 2, Rational::from_integer(m), 4).unwrap();
        (
            PlacementState::place_exact(&p).unwrap(),
            Library::new(1, 4),
            Association::new(groups).unwrap(),
        )
    }

    fn described(log: &TransmissionLog) -> Vec<(usize, String)> {
        log.transmissions()
            .iter()
            .map(|t| (t.round, t.describe()))
            .collect()
    }

    #[test]
    fn example_one_distinct_log() {
        let (pl, lib, a) = example1(2, vec![vec![1, 2, 3], vec![4]]);
        let log = deliver_distinct(&pl, &lib, &a, &DemandVector::new(vec![1, 2, 3, 4])).unwrap();
        let got = described(&log);
        let want: Vec<(usize, String)> = [
            (1, "W^1_{2} ⊕ W^4_{1}"),
            (1, "W^1_φ"),
            (1, "W^4_φ"),
            (2, "W^2_{2}"),
            (2, "W^2_φ"),
            (3, "W^3_{2}"),
            (3, "W^3_φ"),
        ]
        .iter()
        .map(|(r, s)| (*r, s.to_string()))
        .collect();
        assert_eq!(got, want);
        assert_eq!(log.normalized_time(), Rational::new(7, 4));
        assert_eq!(log.transmissions()[0].kind, TransmissionKind::Coded);
        assert_eq!(
            log.transmissions()[1].kind,
            TransmissionKind::UncodedSubfile
        );
    }

    #[test]
    fn uniform_two_by_two() {
        let (pl, lib, a) = example1(2, vec![vec![1, 2], vec![3, 4]]);
        let log = deliver_distinct(&pl, &lib, &a, &DemandVector::new(vec![1, 2, 3, 4])).unwrap();
        let got: Vec<String> = log.transmissions().iter().map(|t| t.describe()).collect();
        assert_eq!(
            got,
            [
                "W^1_{2} ⊕ W^3_{1}",
                "W^1_φ",
                "W^3_φ",
                "W^2_{2} ⊕ W^4_{1}",
                "W^2_φ",
                "W^4_φ"
            ]
        );
        assert_eq!(log.normalized_time(), Rational::new(3, 2));
    }

    #[test]
    fn full_memory_sends_empty_payloads() {
        let (pl, lib, a) = example1(4, vec![vec![1, 2, 3], vec![4]]);
        let log = deliver_distinct(&pl, &lib, &a, &DemandVector::new(vec![1, 2, 3, 4])).unwrap();
        assert!(!log.is_empty());
        assert!(log.transmissions().iter().all(|t| t.is_empty()));
        assert_eq!(log.normalized_time(), Rational::from_integer(0));
    }

    #[test]
    fn non_distinct_rejected_by_algorithm_one() {
        let (pl, lib, a) = example1(2, vec![vec![1, 2, 3], vec![4]]);
        let err =
            deliver_distinct(&pl, &lib, &a, &DemandVector::new(vec![1, 2, 2, 1])).unwrap_err();
        assert!(matches!(
            err,
            DeliveryError::NonDistinctDemand { file: 1, .. }
        ));
    }

    #[test]
    fn example_one_non_distinct_log() {
        let (pl, lib, a) = example1(2, vec![vec![1, 2, 3], vec![4]]);
        let log = deliver_nondistinct(&pl, &lib, &a, &DemandVector::new(vec![1, 2, 2, 1])).unwrap();
        let got: Vec<String> = log.transmissions().iter().map(|t| t.describe()).collect();
        assert_eq!(got, ["W^1_φ", "W^2_φ", "W^1_{2} ⊕ W^1_{1}", "W^2_{2}"]);
        assert_eq!(log.normalized_time(), Rational::from_integer(1));
    }

    #[test]
    fn single_file_demand() {
        let (pl, lib, a) = example1(2, vec![vec![1, 2], vec![3, 4]]);
        let log = deliver_nondistinct(&pl, &lib, &a, &DemandVector::new(vec![3, 3, 3, 3])).unwrap();
        assert_eq!(log.normalized_time(), Rational::new(1, 2));
    }

    #[test]
    fn mismatched_inputs() {
        let (pl, lib, _) = example1(2, vec![vec![1, 2, 3], vec![4]]);
        let three = Association::new(vec![vec![1, 2], vec![3], vec![4]]).unwrap();
        assert!(matches!(
            deliver_distinct(&pl, &lib, &three, &DemandVector::new(vec![1, 2, 3, 4])),
            Err(DeliveryError::ParamsMismatch(_))
        ));
        let a = Association::new(vec![vec![1, 2, 3], vec![4]]).unwrap();
        assert!(matches!(
            deliver_distinct(&pl, &lib, &a, &DemandVector::new(vec![1, 2, 3, 9])),
            Err(DeliveryError::FileNotPlaced(9))
        ));
    }

    #[test]
    fn transmissions_per_round_and_size() {
        let p = SystemParams::offline(8, 7, 4, Rational::from_integer(4), 16).unwrap();
        let pl = PlacementState::place_exact(&p).unwrap();
        let lib = Library::new(2, 16);
        let a = Association::new(vec![vec![1, 2, 3], vec![4, 5], vec![6], vec![7]]).unwrap();
        let log = deliver_distinct(&pl, &lib, &a, &DemandVector::new((1..=7).collect())).unwrap();
        for j in 1..=3usize {
            let r = a.round_users(j).unwrap().len() as i64;
            for s in 1..=4u32 {
                let n = log
                    .transmissions()
                    .iter()
                    .filter(|t| t.round == j && t.subset.unwrap().len() == s)
                    .count() as i128;
                assert_eq!(
                    n,
                    binom(4, s as i64) - binom(4 - r, s as i64),
                    "j={j} s={s}"
                );
            }
        }
        // Round-major, |S| descending, canonical subsets.
        let keys: Vec<(usize, std::cmp::Reverse<u32>, Vec<usize>)> = log
            .transmissions()
            .iter()
            .map(|t| {
                let s = t.subset.unwrap();
                (t.round, std::cmp::Reverse(s.len()), s.caches().collect())
            })
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn trace_lines() {
        let (pl, lib, a) = example1(2, vec![vec![1, 2, 3], vec![4]]);
        let log = deliver_distinct(&pl, &lib, &a, &DemandVector::new(vec![1, 2, 3, 4])).unwrap();
        let trace = log.to_trace();
        let first = trace.lines().nth(1).unwrap();
        assert!(
            first.starts_with("1\tcoded\t{1,2}\t1:{2}@1+4:{1}@4\t1\t"),
            "{first}"
        );
        assert_eq!(trace.lines().count(), 8);
        assert_eq!(first.split('\t').next_back().unwrap().len(), 16);
    }

    #[test]
    fn xor_prefix_masks_tail() {
        let mut dst = Bits::repeat(false, 70);
        let mut src = Bits::repeat(true, 66);
        src.truncate(65);
        xor_prefix(&mut dst, &src);
        assert_eq!(dst.count_ones(), 65);
        assert!(!dst[65]);
    }
}
