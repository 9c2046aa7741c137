//! Index-coding view of one delivery: instance construction, the
//! generalized independent set `H` used for the lower bound, and exact
//! brute-force `α` (maximum acyclic induced subgraph) and min-rank `κ` over
//! GF(2) for small instances.

use std::fmt;

use thiserror::Error;

use crate::association::Association;
use crate::delivery::{DemandVector, Part, TransmissionLog};
use crate::gf2::rank_of_words;
use crate::placement::{all_subsets, PlacementState, SubfileLabel};
use crate::{FileId, UserId};

/// Default limit on the number of messages for exact searches.
pub const DEFAULT_MESSAGE_BUDGET: usize = 24;

/// Default limit on the number of fitting matrices enumerated for `κ`.
pub const DEFAULT_MINRANK_BUDGET: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConverseError {
    #[error("file {file} is requested by users {users:?}; the instance needs distinct demands")]
    NonDistinct { file: FileId, users: Vec<UserId> },
    #[error("instance too large for exact search: {size} > {budget}")]
    TooLarge { size: u64, budget: u64 },
    #[error("acyclicity certificate fails: receiver of {group} knows {later}")]
    CertificateFailed { group: String, later: String },
    #[error("user {0} is not associated with any cache")]
    UnknownUser(UserId),
}

/// How finely subfiles are split into messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    /// One message per wanted bit.
    Bits,
    /// One message per nonempty wanted subfile (its first bit).
    OneBitPerSubfile,
}

/// A wanted piece of a file: `W^file_S`, or the whole file when uncached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Group {
    pub user: UserId,
    pub cache: usize,
    pub file: FileId,
    pub part: Part,
    pub len: usize,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.part {
            Part::Subfile(s) if s.is_empty() => write!(f, "W^{}_φ", self.file),
            Part::Subfile(s) => write!(f, "W^{}_{s}", self.file),
            Part::Whole => write!(f, "W^{}", self.file),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub group: usize,
    pub bit: usize,
}

/// Single-unicast instance: receiver `i` wants message `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexCodingInstance {
    groups: Vec<Group>,
    messages: Vec<Message>,
    /// `X_i`, ascending message ids.
    side: Vec<Vec<usize>>,
}

impl IndexCodingInstance {
    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn num_messages(&self) -> usize {
        self.messages.len()
    }

    /// `X_i` of the receiver wanting message `i`.
    pub fn side_information(&self, i: usize) -> &[usize] {
        &self.side[i]
    }

    /// `Y_i`: messages neither wanted nor known by receiver `i`.
    pub fn interfering(&self, i: usize) -> Vec<usize> {
        (0..self.messages.len())
            .filter(|&j| j != i && self.side[i].binary_search(&j).is_err())
            .collect()
    }

    /// Number of wanted subfiles counted per user, including empty ones:
    /// `2^{Λ−1}` per cached demand and one per uncached demand.
    pub fn wanted_subfile_count(&self, num_caches: u32) -> usize {
        let mut users: Vec<(UserId, bool)> = self
            .groups
            .iter()
            .map(|g| (g.user, g.part == Part::Whole))
            .collect();
        users.sort_unstable();
        users.dedup();
        users
            .iter()
            .map(|&(_, whole)| if whole { 1 } else { 1 << (num_caches - 1) })
            .sum()
    }

    /// `out[i]` has bit `j` set when receiver `i` knows message `j`.
    fn masks(&self, budget: usize) -> Result<Vec<u64>, ConverseError> {
        let n = self.messages.len();
        if n > budget.min(64) {
            return Err(ConverseError::TooLarge {
                size: n as u64,
                budget: budget.min(64) as u64,
            });
        }
        Ok(self
            .side
            .iter()
            .map(|x| x.iter().fold(0u64, |m, &j| m | 1 << j))
            .collect())
    }

    /// Plain-text dump. `m <id> <message>` lines name messages as
    /// `W^n_S[bit]`; `r <id> wants <id> knows <ids>` lines give receivers.
    pub fn to_adjacency_text(&self) -> String {
        let mut out = format!("# {} messages\n", self.messages.len());
        for (i, m) in self.messages.iter().enumerate() {
            out.push_str(&format!("m {i} {}[{}]\n", self.groups[m.group], m.bit));
        }
        for (i, x) in self.side.iter().enumerate() {
            let known: Vec<String> = x.iter().map(|j| j.to_string()).collect();
            out.push_str(&format!("r {i} wants {i} knows {}\n", known.join(" ")));
        }
        out
    }
}

fn check_distinct(demand: &DemandVector, assoc: &Association) -> Result<(), ConverseError> {
    let req = demand.requesters();
    for (&file, users) in &req {
        let present: Vec<UserId> = users
            .iter()
            .copied()
            .filter(|&u| assoc.cache_of(u).is_some())
            .collect();
        if present.len() > 1 {
            return Err(ConverseError::NonDistinct {
                file,
                users: present,
            });
        }
    }
    Ok(())
}

fn wanted_groups(
    placement: &PlacementState,
    assoc: &Association,
    demand: &DemandVector,
) -> Result<Vec<Group>, ConverseError> {
    check_distinct(demand, assoc)?;
    let mut users: Vec<UserId> = assoc.users().collect();
    users.sort_unstable();
    let mut groups = Vec::new();
    for user in users {
        let cache = assoc
            .cache_of(user)
            .ok_or(ConverseError::UnknownUser(user))?;
        let file = demand.of(user);
        if placement.contains_file(file) {
            for s in all_subsets(placement.num_caches())
                .into_iter()
                .filter(|s| !s.contains(cache))
            {
                groups.push(Group {
                    user,
                    cache,
                    file,
                    part: Part::Subfile(s),
                    len: placement.subfile_len(file, s),
                });
            }
        } else {
            groups.push(Group {
                user,
                cache,
                file,
                part: Part::Whole,
                len: placement.file_size(),
            });
        }
    }
    Ok(groups)
}

fn cached_at(part: Part, cache: usize) -> bool {
    matches!(part, Part::Subfile(s) if s.contains(cache))
}

/// The index-coding instance induced by a placement, association and
/// distinct demand. Demanded files missing from the placement are the
/// online uncached files: wanted whole, known by nobody.
pub fn build_instance(
    placement: &PlacementState,
    assoc: &Association,
    demand: &DemandVector,
    granularity: Granularity,
) -> Result<IndexCodingInstance, ConverseError> {
    let groups = wanted_groups(placement, assoc, demand)?;
    let mut messages = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        let bits = match granularity {
            Granularity::Bits => g.len,
            Granularity::OneBitPerSubfile => g.len.min(1),
        };
        messages.extend((0..bits).map(|bit| Message { group: gi, bit }));
    }
    let side = messages
        .iter()
        .map(|m| {
            let cache = groups[m.group].cache;
            messages
                .iter()
                .enumerate()
                .filter(|(_, other)| cached_at(groups[other.group].part, cache))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    Ok(IndexCodingInstance {
        groups,
        messages,
        side,
    })
}

/// The lower-bound set `H`, as subfile groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralizedIndependentSet {
    /// Members in certificate order.
    pub groups: Vec<Group>,
    pub size_bits: usize,
}

impl GeneralizedIndependentSet {
    /// Message ids of the members inside `instance`.
    pub fn members(&self, instance: &IndexCodingInstance) -> Vec<usize> {
        instance
            .messages()
            .iter()
            .enumerate()
            .filter(|(_, m)| {
                let g = &instance.groups()[m.group];
                self.groups
                    .iter()
                    .any(|h| h.file == g.file && h.part == g.part)
            })
            .map(|(i, _)| i)
            .collect()
    }

    pub fn describe(&self) -> String {
        let names: Vec<String> = self.groups.iter().map(|g| g.to_string()).collect();
        format!("{{{}}}", names.join(", "))
    }
}

/// Sort key for members of `H`: cache position, whole-file flag, |S| descending, file, label.
type HOrderKey = (usize, u8, std::cmp::Reverse<u32>, FileId, u32);

/// Builds `H`: for each requested cached file `n`, the subfiles `W^n_S`
/// with `S` disjoint from the caches at canonical positions `1..=c(n)`,
/// where `c(n)` is the position of the requester's cache after sorting
/// caches by load; plus every uncached requested file. The result is
/// checked to be acyclic by peeling groups in order of increasing `c(n)`,
/// then decreasing `|S|`, with whole files last.
pub fn construct_h(
    placement: &PlacementState,
    assoc: &Association,
    demand: &DemandVector,
) -> Result<GeneralizedIndependentSet, ConverseError> {
    let groups = wanted_groups(placement, assoc, demand)?;
    let cached_users = assoc.restricted(|u| placement.contains_file(demand.of(u)));
    let order = cached_users.canonical_order();
    let lambda = placement.num_caches();
    let mut keyed: Vec<(HOrderKey, Group)> = Vec::new();
    for g in groups {
        match g.part {
            Part::Whole => keyed.push(((usize::MAX, 1, std::cmp::Reverse(0), g.file, 0), g)),
            Part::Subfile(s) => {
                let c = order.position(g.cache);
                let prefix = SubfileLabel::from_caches((0..=c).map(|i| order.physical(i)));
                debug_assert!(lambda as usize > c);
                if !s.intersects(prefix) {
                    keyed.push(((c, 0, std::cmp::Reverse(s.len()), g.file, s.mask()), g));
                }
            }
        }
    }
    keyed.sort_by_key(|(k, _)| *k);
    let groups: Vec<Group> = keyed.into_iter().map(|(_, g)| g).collect();
    for (i, g) in groups.iter().enumerate() {
        if g.len == 0 {
            continue;
        }
        if let Some(later) = groups[i + 1..]
            .iter()
            .find(|h| h.len > 0 && cached_at(h.part, g.cache))
        {
            return Err(ConverseError::CertificateFailed {
                group: g.to_string(),
                later: later.to_string(),
            });
        }
    }
    let size_bits = groups.iter().map(|g| g.len).sum();
    Ok(GeneralizedIndependentSet { groups, size_bits })
}

fn is_acyclic(mut set: u64, out: &[u64]) -> bool {
    while set != 0 {
        let mut rest = set;
        let mut removed = false;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if out[v] & set == 0 {
                set &= !(1 << v);
                removed = true;
            }
        }
        if !removed {
            return false;
        }
    }
    true
}

/// Whether `set` (message ids) induces an acyclic subgraph.
pub fn induces_acyclic(
    instance: &IndexCodingInstance,
    set: &[usize],
) -> Result<bool, ConverseError> {
    let out = instance.masks(64)?;
    Ok(is_acyclic(set.iter().fold(0, |m, &j| m | 1 << j), &out))
}

/// Membership in `J(I)`: some receiver whose wanted message lies in `set`
/// knows nothing else in `set`.
pub fn in_j(instance: &IndexCodingInstance, set: &[usize]) -> bool {
    set.iter()
        .any(|&i| instance.side[i].iter().all(|j| !set.contains(j)))
}

/// Definition-level check that every nonempty subset of `set` lies in `J(I)`.
pub fn is_generalized_independent(
    instance: &IndexCodingInstance,
    set: &[usize],
    budget: usize,
) -> Result<bool, ConverseError> {
    if set.len() > budget.min(30) {
        return Err(ConverseError::TooLarge {
            size: set.len() as u64,
            budget: budget.min(30) as u64,
        });
    }
    for mask in 1u64..(1 << set.len()) {
        let sub: Vec<usize> = (0..set.len())
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| set[b])
            .collect();
        if !in_j(instance, &sub) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exact `α` by branch and bound over induced subgraphs.
pub fn alpha_bruteforce(
    instance: &IndexCodingInstance,
    budget: usize,
) -> Result<usize, ConverseError> {
    let out = instance.masks(budget)?;
    let n = out.len();
    fn go(v: usize, n: usize, cur: u64, size: usize, out: &[u64], best: &mut usize) {
        if size + (n - v) <= *best {
            return;
        }
        if v == n {
            *best = size;
            return;
        }
        let with = cur | 1 << v;
        if is_acyclic(with, out) {
            go(v + 1, n, with, size + 1, out, best);
        }
        go(v + 1, n, cur, size, out, best);
    }
    let mut best = 0;
    go(0, n, 0, 0, &out, &mut best);
    Ok(best)
}

fn minrank_search(
    instance: &IndexCodingInstance,
    budget: u64,
    floor: usize,
) -> Result<usize, ConverseError> {
    let out = instance.masks(64)?;
    let n = out.len();
    let total_bits: u32 = out.iter().map(|m| m.count_ones()).sum();
    if total_bits >= 64 || (1u64 << total_bits) > budget {
        return Err(ConverseError::TooLarge {
            size: if total_bits >= 64 {
                u64::MAX
            } else {
                1 << total_bits
            },
            budget,
        });
    }
    // Mixed-radix walk over submasks of every X_i.
    let mut choice = vec![0u64; n];
    let mut best = n;
    let mut rows = vec![0u64; n];
    loop {
        for i in 0..n {
            rows[i] = 1 << i | choice[i];
        }
        best = best.min(rank_of_words(&mut rows));
        if best <= floor {
            return Ok(best);
        }
        let mut i = 0;
        loop {
            if i == n {
                return Ok(best);
            }
            // Next submask of out[i].
            choice[i] = (choice[i].wrapping_sub(out[i])) & out[i];
            if choice[i] != 0 {
                break;
            }
            i += 1;
        }
    }
}

/// Exact min-rank over GF(2) by enumerating every fitting matrix.
pub fn minrank_bruteforce(
    instance: &IndexCodingInstance,
    budget: u64,
) -> Result<usize, ConverseError> {
    minrank_search(instance, budget, 0)
}

/// Min-rank search that stops once a fitting matrix reaches `floor`, a
/// known lower bound such as `α`.
pub fn minrank_with_floor(
    instance: &IndexCodingInstance,
    budget: u64,
    floor: usize,
) -> Result<usize, ConverseError> {
    minrank_search(instance, budget, floor)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub h: GeneralizedIndependentSet,
    pub measured_bits: usize,
    /// Exact values on the one-bit-per-subfile instance, when within budget.
    pub reduced_alpha: Option<usize>,
    pub reduced_kappa: Option<usize>,
    pub reduced_h: usize,
    pub reduced_transmissions: usize,
    /// Exact values on the bit-level instance, when within budget.
    pub alpha: Option<usize>,
    pub kappa: Option<usize>,
    pub failures: Vec<String>,
}

impl Verdict {
    pub fn is_optimal(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn label(&self) -> &'static str {
        if self.is_optimal() {
            "OPTIMAL"
        } else {
            "NOT-CERTIFIED"
        }
    }
}

/// Checks `|H| ≤ α ≤ κ ≤ measured` with equality throughout. The
/// constructive part `|H| = measured` always runs; exact `α` and `κ` are
/// computed where the instances fit the budgets.
pub fn certify_optimality(
    placement: &PlacementState,
    assoc: &Association,
    demand: &DemandVector,
    log: &TransmissionLog,
    message_budget: usize,
    minrank_budget: u64,
) -> Result<Verdict, ConverseError> {
    let h = construct_h(placement, assoc, demand)?;
    let measured_bits = log.total_bits();
    let mut failures = Vec::new();
    if h.size_bits != measured_bits {
        failures.push(format!(
            "|H| = {} but {} bits were sent",
            h.size_bits, measured_bits
        ));
    }
    let exact = |gran| -> Result<(Option<usize>, Option<usize>, usize), ConverseError> {
        let inst = build_instance(placement, assoc, demand, gran)?;
        let hm = h.members(&inst).len();
        let alpha = match alpha_bruteforce(&inst, message_budget) {
            Ok(a) => Some(a),
            Err(ConverseError::TooLarge { .. }) => None,
            Err(e) => return Err(e),
        };
        let kappa = match alpha.map(|a| minrank_with_floor(&inst, minrank_budget, a)) {
            Some(Ok(k)) => Some(k),
            Some(Err(ConverseError::TooLarge { .. })) | None => None,
            Some(Err(e)) => return Err(e),
        };
        Ok((alpha, kappa, hm))
    };
    let (alpha, kappa, _) = exact(Granularity::Bits)?;
    let (reduced_alpha, reduced_kappa, reduced_h) = exact(Granularity::OneBitPerSubfile)?;
    let reduced_transmissions = log.transmissions().iter().filter(|t| !t.is_empty()).count();
    if let Some(a) = alpha {
        if a != h.size_bits {
            failures.push(format!("α = {a} but |H| = {}", h.size_bits));
        }
    }
    if let Some(k) = kappa {
        if k != measured_bits {
            failures.push(format!("κ = {k} but {measured_bits} bits were sent"));
        }
    }
    if let Some(a) = reduced_alpha {
        if a != reduced_h {
            failures.push(format!("reduced α = {a} but reduced |H| = {reduced_h}"));
        }
    }
    if let Some(k) = reduced_kappa {
        if k != reduced_transmissions {
            failures.push(format!(
                "reduced κ = {k} but {reduced_transmissions} nonempty transmissions"
            ));
        }
    }
    Ok(Verdict {
        h,
        measured_bits,
        reduced_alpha,
        reduced_kappa,
        reduced_h,
        reduced_transmissions,
        alpha,
        kappa,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delivery::deliver_distinct;
    use crate::library::Library;
    use crate::{Rational, SystemParams};

    fn example1(f: usize) -> (PlacementState, Association, DemandVector) {
        let p = SystemParams::offline(4, 4, 2, Rational::from_integer(2), f).unwrap();
        (
            PlacementState::place_exact(&p).unwrap(),
            Association::new(vec![vec![1, 2, 3], vec![4]]).unwrap(),
            DemandVector::new(vec![1, 2, 3, 4]),
        )
    }

    /// Hand-built instance from explicit side-information lists.
    fn raw(side: Vec<Vec<usize>>) -> IndexCodingInstance {
        let n = side.len();
        IndexCodingInstance {
            groups: (0..n)
                .map(|i| Group {
                    user: i as UserId + 1,
                    cache: i,
                    file: i as FileId + 1,
                    part: Part::Whole,
                    len: 1,
                })
                .collect(),
            messages: (0..n).map(|group| Message { group, bit: 0 }).collect(),
            side,
        }
    }

    #[test]
    fn example_one_instance() {
        let (pl, a, d) = example1(4);
        let inst = build_instance(&pl, &a, &d, Granularity::Bits).unwrap();
        assert_eq!(inst.num_messages(), 8);
        assert_eq!(inst.wanted_subfile_count(2), 8);
        let h = construct_h(&pl, &a, &d).unwrap();
        assert_eq!(
            h.describe(),
            "{W^1_{2}, W^2_{2}, W^3_{2}, W^1_φ, W^2_φ, W^3_φ, W^4_φ}"
        );
        assert_eq!(h.size_bits, 7);
        let members = h.members(&inst);
        assert!(is_generalized_independent(&inst, &members, 24).unwrap());
        assert_eq!(alpha_bruteforce(&inst, 24).unwrap(), 7);
        assert_eq!(minrank_bruteforce(&inst, 1 << 24).unwrap(), 7);
    }

    #[test]
    fn certify_example_one() {
        let (pl, a, d) = example1(4);
        let log = deliver_distinct(&pl, &Library::new(1, 4), &a, &d).unwrap();
        let v = certify_optimality(&pl, &a, &d, &log, 24, 1 << 24).unwrap();
        assert!(v.is_optimal(), "{:?}", v.failures);
        assert_eq!((v.alpha, v.kappa), (Some(7), Some(7)));
        assert_eq!((v.reduced_alpha, v.reduced_kappa), (Some(7), Some(7)));
    }

    #[test]
    fn full_memory_has_empty_h() {
        let p = SystemParams::offline(4, 4, 2, Rational::from_integer(4), 4).unwrap();
        let pl = PlacementState::place_exact(&p).unwrap();
        let (_, a, d) = example1(4);
        assert_eq!(construct_h(&pl, &a, &d).unwrap().size_bits, 0);
        assert_eq!(
            build_instance(&pl, &a, &d, Granularity::Bits)
                .unwrap()
                .num_messages(),
            0
        );
    }

    #[test]
    fn trivial_graphs() {
        let empty = raw(vec![vec![], vec![], vec![]]);
        assert_eq!(alpha_bruteforce(&empty, 24).unwrap(), 3);
        assert_eq!(minrank_bruteforce(&empty, 1 << 20).unwrap(), 3);
        let pair = raw(vec![vec![1], vec![0]]);
        assert_eq!(alpha_bruteforce(&pair, 24).unwrap(), 1);
        assert_eq!(minrank_bruteforce(&pair, 1 << 20).unwrap(), 1);
        // Directed 3-cycle: α = 2, κ = 2.
        let cycle = raw(vec![vec![1], vec![2], vec![0]]);
        assert_eq!(alpha_bruteforce(&cycle, 24).unwrap(), 2);
        assert_eq!(minrank_bruteforce(&cycle, 1 << 20).unwrap(), 2);
    }

    #[test]
    fn budgets_enforced() {
        let (pl, a, d) = example1(16);
        let inst = build_instance(&pl, &a, &d, Granularity::Bits).unwrap();
        assert_eq!(inst.num_messages(), 32);
        assert!(matches!(
            alpha_bruteforce(&inst, 24),
            Err(ConverseError::TooLarge { .. })
        ));
        let small = build_instance(&pl, &a, &d, Granularity::OneBitPerSubfile).unwrap();
        assert_eq!(small.num_messages(), 8);
    }

    #[test]
    fn non_distinct_rejected() {
        let (pl, a, _) = example1(4);
        let d = DemandVector::new(vec![1, 2, 2, 1]);
        assert!(matches!(
            build_instance(&pl, &a, &d, Granularity::Bits),
            Err(ConverseError::NonDistinct { .. })
        ));
    }

    #[test]
    fn adjacency_dump() {
        let (pl, a, d) = example1(4);
        let inst = build_instance(&pl, &a, &d, Granularity::Bits).unwrap();
        let text = inst.to_adjacency_text();
        assert!(
            text.starts_with("# 8 messages\nm 0 W^1_φ[0]\nm 1 W^1_{2}[0]\n"),
            "{text}"
        );
        assert!(text.contains("r 0 wants 0 knows 7\n"));
        assert!(text.contains("r 6 wants 6 knows 1 3 5\n"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_instance() -> impl Strategy<Value = IndexCodingInstance> {
            (1usize..8).prop_flat_map(|n| {
                proptest::collection::vec(proptest::collection::vec(any::<bool>(), n), n).prop_map(
                    move |adj| {
                        raw((0..n)
                            .map(|i| (0..n).filter(|&j| j != i && adj[i][j]).collect())
                            .collect())
                    },
                )
            })
        }

        proptest! {
            #[test]
            fn alpha_matches_definition(inst in arb_instance()) {
                let n = inst.num_messages();
                let mut best = 0;
                for mask in 0u64..(1 << n) {
                    let set: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).collect();
                    if set.len() > best && is_generalized_independent(&inst, &set, 24).unwrap() {
                        best = set.len();
                    }
                }
                prop_assert_eq!(alpha_bruteforce(&inst, 24).unwrap(), best);
            }

            #[test]
            fn alpha_at_most_kappa(inst in arb_instance()) {
                let a = alpha_bruteforce(&inst, 24).unwrap();
                let k = minrank_bruteforce(&inst, 1 << 20);
                if let Ok(k) = k {
                    prop_assert!(a <= k);
                    prop_assert_eq!(minrank_with_floor(&inst, 1 << 20, a).unwrap() >= a, true);
                }
            }
        }
    }
}
