//! User-to-cache association, profiles and delivery rounds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::delivery::DemandVector;
use crate::{FileId, UserId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssociationError {
    #[error("groups do not partition users 1..={num_users}: {detail}")]
    NotAPartition { num_users: u32, detail: String },
    #[error("round {round} outside 1..={rounds}")]
    RoundOutOfRange { round: usize, rounds: usize },
    #[error("profile counts must be non-increasing: {0:?}")]
    UnsortedProfile(Vec<usize>),
}

/// Ordered user groups `U_1..U_Λ`, one per physical cache (0-based index).
/// The order inside a group defines `U_λ(j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Association {
    groups: Vec<Vec<UserId>>,
    num_users: u32,
}

impl Association {
    /// Groups must partition `1..=K`, where `K` is the total group size.
    pub fn new(groups: Vec<Vec<UserId>>) -> Result<Self, AssociationError> {
        let num_users = groups.iter().map(Vec::len).sum::<usize>() as u32;
        let mut seen = BTreeSet::new();
        for &u in groups.iter().flatten() {
            if u == 0 || u > num_users {
                return Err(AssociationError::NotAPartition {
                    num_users,
                    detail: format!("user {u} out of range"),
                });
            }
            if !seen.insert(u) {
                return Err(AssociationError::NotAPartition {
                    num_users,
                    detail: format!("user {u} appears twice"),
                });
            }
        }
        Ok(Self { groups, num_users })
    }

    /// Materializes consecutive user ids for the given per-cache counts.
    pub fn from_counts(counts: &[usize]) -> Self {
        let mut next = 1;
        let groups = counts
            .iter()
            .map(|&c| {
                let g: Vec<UserId> = (next..next + c as UserId).collect();
                next += c as UserId;
                g
            })
            .collect();
        Self {
            groups,
            num_users: next - 1,
        }
    }

    /// A reduced association over a subset of the original users.
    pub fn restricted<F: Fn(UserId) -> bool>(&self, keep: F) -> Self {
        Self {
            groups: self
                .groups
                .iter()
                .map(|g| g.iter().copied().filter(|&u| keep(u)).collect())
                .collect(),
            num_users: self.num_users,
        }
    }

    pub fn groups(&self) -> &[Vec<UserId>] {
        &self.groups
    }

    pub fn group(&self, cache: usize) -> &[UserId] {
        &self.groups[cache]
    }

    pub fn num_caches(&self) -> usize {
        self.groups.len()
    }

    /// Size of the user universe `K` (also for reduced associations).
    pub fn num_users(&self) -> u32 {
        self.num_users
    }

    /// Users actually present in the groups.
    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.groups.iter().flatten().copied()
    }

    pub fn cache_of(&self, user: UserId) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(&user))
    }

    /// `L_1`, the number of delivery rounds.
    pub fn num_rounds(&self) -> usize {
        self.groups.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn profile(&self) -> Profile {
        Profile::from_counts(self.groups.iter().map(Vec::len).collect())
    }

    /// Sorted profile plus the cache relabeling that produces it.
    pub fn profile_of(&self) -> (Profile, CacheOrder) {
        (self.profile(), self.canonical_order())
    }

    /// Caches sorted by non-increasing group size; equal sizes keep their
    /// physical order.
    pub fn canonical_order(&self) -> CacheOrder {
        let mut order: Vec<usize> = (0..self.groups.len()).collect();
        order.sort_by(|&a, &b| self.groups[b].len().cmp(&self.groups[a].len()));
        CacheOrder { order }
    }

    /// `R_j = { U_λ(j) : L_λ ≥ j }` for 1-based round `j`, in cache order.
    pub fn round_users(&self, round: usize) -> Result<Vec<UserId>, AssociationError> {
        let rounds = self.num_rounds();
        if round == 0 || round > rounds {
            return Err(AssociationError::RoundOutOfRange { round, rounds });
        }
        Ok(self.round_members(round).map(|(_, u)| u).collect())
    }

    /// `(cache, user)` pairs active in a 1-based round.
    pub fn round_members(&self, round: usize) -> impl Iterator<Item = (usize, UserId)> + '_ {
        self.groups
            .iter()
            .enumerate()
            .filter_map(move |(c, g)| g.get(round.wrapping_sub(1)).map(|&u| (c, u)))
    }

    /// Keeps one user per distinct file in each cache (the lowest user id
    /// among that cache's requesters of the file).
    pub fn dedup_within_caches(&self, demand: &DemandVector) -> Dedup {
        let mut keep = BTreeSet::new();
        let mut surrogate = BTreeMap::new();
        for g in &self.groups {
            let mut rep: BTreeMap<FileId, UserId> = BTreeMap::new();
            for &u in g {
                let e = rep.entry(demand.of(u)).or_insert(u);
                *e = (*e).min(u);
            }
            for &u in g {
                let r = rep[&demand.of(u)];
                if r == u {
                    keep.insert(u);
                } else {
                    surrogate.insert(u, r);
                }
            }
        }
        let association = self.restricted(|u| keep.contains(&u));
        let profile = association.profile();
        Dedup {
            association,
            profile,
            surrogate,
        }
    }
}

/// Result of removing within-cache redundant demands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dedup {
    pub association: Association,
    pub profile: Profile,
    /// Dropped user → retained user of the same cache with the same demand.
    pub surrogate: BTreeMap<UserId, UserId>,
}

/// Mapping between canonical (sorted-profile) positions and physical caches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheOrder {
    order: Vec<usize>,
}

impl CacheOrder {
    /// Physical cache at canonical position `i`.
    pub fn physical(&self, i: usize) -> usize {
        self.order[i]
    }

    /// Canonical position of physical cache `cache`.
    pub fn position(&self, cache: usize) -> usize {
        self.order
            .iter()
            .position(|&c| c == cache)
            .expect("cache in range")
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.order
    }
}

/// Association profile `L`: users per cache, non-increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Profile(Vec<usize>);

impl Profile {
    pub fn new(counts: Vec<usize>) -> Result<Self, AssociationError> {
        if counts.windows(2).any(|w| w[0] < w[1]) {
            return Err(AssociationError::UnsortedProfile(counts));
        }
        Ok(Self(counts))
    }

    pub fn from_counts(mut counts: Vec<usize>) -> Self {
        counts.sort_unstable_by(|a, b| b.cmp(a));
        Self(counts)
    }

    pub fn uniform(num_users: usize, num_caches: usize) -> Self {
        Self(vec![num_users / num_caches; num_caches])
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    pub fn num_caches(&self) -> usize {
        self.0.len()
    }

    pub fn num_users(&self) -> usize {
        self.0.iter().sum()
    }

    /// `L_1`.
    pub fn rounds(&self) -> usize {
        self.0.first().copied().unwrap_or(0)
    }

    /// `|R_j|` for 1-based `j`.
    pub fn round_size(&self, round: usize) -> usize {
        self.0.iter().filter(|&&l| l >= round).count()
    }

    /// Every profile of `num_users` users over `num_caches` caches.
    pub fn enumerate(num_users: usize, num_caches: usize) -> Vec<Profile> {
        fn rec(
            left: usize,
            slots: usize,
            cap: usize,
            cur: &mut Vec<usize>,
            out: &mut Vec<Profile>,
        ) {
            if slots == 0 {
                if left == 0 {
                    out.push(Profile(cur.clone()));
                }
                return;
            }
            for v in (0..=cap.min(left)).rev() {
                if v * slots < left {
                    break;
                }
                cur.push(v);
                rec(left - v, slots - 1, v, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(num_users, num_caches, num_users, &mut Vec::new(), &mut out);
        out
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, ")")
    }
}
