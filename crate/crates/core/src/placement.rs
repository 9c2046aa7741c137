//! Decentralized uncoded prefetching.
//!
//! Every cache independently stores `M·F / catalog_size` bits of each file.
//! The union of those choices labels each bit with the set `S` of caches
//! holding it, which partitions a file into `2^Λ` subfiles `W_S`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::params::{ParamsError, SystemParams};
use crate::rng::{derive_key, select_indices, DOMAIN_PLACEMENT};
use crate::{FileId, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlacementError {
    #[error("cache quota M·F/{catalog} = {quota} bits is not an integer")]
    NonIntegralCacheQuota { quota: Rational, catalog: u32 },
    #[error(transparent)]
    ParamsInvalid(#[from] ParamsError),
    #[error("subfile size for |S|={size} is {value} bits; exact placement needs integers")]
    FractionNotRealizable { size: u32, value: Rational },
    #[error("exact-fraction placement has no seed")]
    NotSeeded,
    #[error("file {0} is not placed")]
    UnknownFile(FileId),
    #[error("file {0} is already placed")]
    DuplicateFile(FileId),
    #[error("subset size {size} exceeds the number of caches {caches}")]
    SubsetTooLarge { size: u32, caches: u32 },
    #[error("invalid subfile label: {0}")]
    BadLabel(String),
}

/// A set of caches, stored as a bitmask (bit `i` is cache `i`, 0-based).
/// Displayed 1-based, with `φ` for the empty set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SubfileLabel(u32);

impl SubfileLabel {
    pub const EMPTY: SubfileLabel = SubfileLabel(0);

    pub fn from_mask(mask: u32) -> Self {
        Self(mask)
    }

    pub fn from_caches<I: IntoIterator<Item = usize>>(caches: I) -> Self {
        Self(caches.into_iter().fold(0, |m, c| m | (1 << c)))
    }

    pub fn full(num_caches: u32) -> Self {
        Self(((1u64 << num_caches) - 1) as u32)
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, cache: usize) -> bool {
        self.0 >> cache & 1 == 1
    }

    pub fn with(self, cache: usize) -> Self {
        Self(self.0 | 1 << cache)
    }

    pub fn without(self, cache: usize) -> Self {
        Self(self.0 & !(1 << cache))
    }

    pub fn intersects(self, other: SubfileLabel) -> bool {
        self.0 & other.0 != 0
    }

    /// Member caches, ascending, 0-based.
    pub fn caches(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&c| self.0 >> c & 1 == 1)
    }
}

impl Ord for SubfileLabel {
    /// Canonical order: by size, then lexicographically on sorted members.
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.caches().cmp(other.caches()))
    }
}

impl PartialOrd for SubfileLabel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SubfileLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "φ");
        }
        write!(f, "{{")?;
        for (i, c) in self.caches().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", c + 1)?;
        }
        write!(f, "}}")
    }
}

impl FromStr for SubfileLabel {
    type Err = PlacementError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t == "φ" || t == "phi" || t == "{}" {
            return Ok(Self::EMPTY);
        }
        let inner = t
            .strip_prefix('{')
            .and_then(|x| x.strip_suffix('}'))
            .ok_or_else(|| PlacementError::BadLabel(s.to_string()))?;
        let mut label = Self::EMPTY;
        for part in inner.split(',') {
            let c: usize = part
                .trim()
                .parse()
                .map_err(|_| PlacementError::BadLabel(s.to_string()))?;
            if c == 0 || c > 32 || label.contains(c - 1) {
                return Err(PlacementError::BadLabel(s.to_string()));
            }
            label = label.with(c - 1);
        }
        Ok(label)
    }
}

/// All `s`-subsets of `Λ` caches in lexicographic order.
pub fn subsets_of_size(num_caches: u32, s: u32) -> Vec<SubfileLabel> {
    let mut out = Vec::new();
    if s > num_caches {
        return out;
    }
    let n = num_caches as usize;
    let k = s as usize;
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        out.push(SubfileLabel::from_caches(combo.iter().copied()));
        let Some(i) = (0..k).rev().find(|&i| combo[i] < n - k + i) else {
            return out;
        };
        combo[i] += 1;
        for j in i + 1..k {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

/// Every subset of `Λ` caches in canonical order.
pub fn all_subsets(num_caches: u32) -> Vec<SubfileLabel> {
    (0..=num_caches)
        .flat_map(|s| subsets_of_size(num_caches, s))
        .collect()
}

/// Expected size `q^s (1-q)^(Λ-s) F` of a subfile with `|S| = s`, exactly.
pub fn expected_subfile_size(params: &SystemParams, s: u32) -> Result<Rational, PlacementError> {
    params.validate()?;
    if s > params.num_caches {
        return Err(PlacementError::SubsetTooLarge {
            size: s,
            caches: params.num_caches,
        });
    }
    let q = params.q();
    let p = Rational::one() - q;
    Ok(
        pow(q, s)
            * pow(p, params.num_caches - s)
            * Rational::from_integer(params.file_size as i128),
    )
}

pub(crate) fn pow(x: Rational, e: u32) -> Rational {
    (0..e).fold(Rational::one(), |acc, _| acc * x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementMode {
    /// Each cache samples its bits with a keyed pseudorandom shuffle.
    RandomSampled,
    /// Every subfile gets exactly its expected size, laid out canonically.
    ExactFraction,
}

/// Replay token for a placement. Exact placements are deterministic and
/// carry the reserved [`SeedToken::Exact`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedToken {
    Seeded(u64),
    Exact,
}

impl SeedToken {
    pub fn seed(self) -> Result<u64, PlacementError> {
        match self {
            SeedToken::Seeded(s) => Ok(s),
            SeedToken::Exact => Err(PlacementError::NotSeeded),
        }
    }
}

impl fmt::Display for SeedToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeedToken::Seeded(s) => write!(f, "{s}"),
            SeedToken::Exact => write!(f, "exact"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct FileLayout {
    epoch: u64,
    labels: Vec<SubfileLabel>,
    /// Bit indices per subfile, indexed by label mask.
    subfiles: Vec<Vec<u32>>,
}

impl FileLayout {
    fn from_labels(num_caches: u32, epoch: u64, labels: Vec<SubfileLabel>) -> Self {
        let mut subfiles = vec![Vec::new(); 1 << num_caches];
        for (b, l) in labels.iter().enumerate() {
            subfiles[l.mask() as usize].push(b as u32);
        }
        Self {
            epoch,
            labels,
            subfiles,
        }
    }
}

/// The realized cache contents: a subfile label for every bit of every
/// placed file. Immutable once built, except for online cache updates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementState {
    params: SystemParams,
    mode: PlacementMode,
    seed: Option<u64>,
    files: BTreeMap<FileId, FileLayout>,
}

impl PlacementState {
    /// Random placement of files `1..=catalog_size`.
    pub fn place_random(params: &SystemParams, seed: u64) -> Result<Self, PlacementError> {
        let files: Vec<FileId> = (1..=params.catalog_size).collect();
        Self::place_random_files(params, seed, &files)
    }

    pub fn place_random_files(
        params: &SystemParams,
        seed: u64,
        files: &[FileId],
    ) -> Result<Self, PlacementError> {
        params.validate()?;
        cache_quota(params)?;
        let mut state = Self {
            params: params.clone(),
            mode: PlacementMode::RandomSampled,
            seed: Some(seed),
            files: BTreeMap::new(),
        };
        for &n in files {
            state.insert_file(n, 0)?;
        }
        Ok(state)
    }

    /// Exact-fraction placement of files `1..=catalog_size`.
    pub fn place_exact(params: &SystemParams) -> Result<Self, PlacementError> {
        let files: Vec<FileId> = (1..=params.catalog_size).collect();
        Self::place_exact_files(params, &files)
    }

    pub fn place_exact_files(
        params: &SystemParams,
        files: &[FileId],
    ) -> Result<Self, PlacementError> {
        params.validate()?;
        exact_sizes(params)?;
        let mut state = Self {
            params: params.clone(),
            mode: PlacementMode::ExactFraction,
            seed: None,
            files: BTreeMap::new(),
        };
        for &n in files {
            state.insert_file(n, 0)?;
        }
        Ok(state)
    }

    /// Rebuilds a placement from its token and the `(file, epoch)` keys
    /// returned by [`PlacementState::file_keys`].
    pub fn replay(
        params: &SystemParams,
        token: SeedToken,
        keys: &[(FileId, u64)],
    ) -> Result<Self, PlacementError> {
        let mut state = match token {
            SeedToken::Seeded(seed) => Self::place_random_files(params, seed, &[])?,
            SeedToken::Exact => Self::place_exact_files(params, &[])?,
        };
        for &(n, epoch) in keys {
            state.insert_file(n, epoch)?;
        }
        Ok(state)
    }

    pub fn export_seed(&self) -> SeedToken {
        match (self.mode, self.seed) {
            (PlacementMode::RandomSampled, Some(s)) => SeedToken::Seeded(s),
            _ => SeedToken::Exact,
        }
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn mode(&self) -> PlacementMode {
        self.mode
    }

    pub fn num_caches(&self) -> u32 {
        self.params.num_caches
    }

    pub fn file_size(&self) -> usize {
        self.params.file_size
    }

    pub fn files(&self) -> impl Iterator<Item = FileId> + '_ {
        self.files.keys().copied()
    }

    pub fn file_keys(&self) -> Vec<(FileId, u64)> {
        self.files.iter().map(|(&n, l)| (n, l.epoch)).collect()
    }

    pub fn contains_file(&self, file: FileId) -> bool {
        self.files.contains_key(&file)
    }

    pub fn label_of(&self, file: FileId, bit: usize) -> Option<SubfileLabel> {
        self.files
            .get(&file)
            .and_then(|l| l.labels.get(bit).copied())
    }

    /// Ordered bit indices of subfile `W^file_S`; empty for unplaced files.
    pub fn subfile(&self, file: FileId, label: SubfileLabel) -> &[u32] {
        self.files
            .get(&file)
            .and_then(|l| l.subfiles.get(label.mask() as usize))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn subfile_len(&self, file: FileId, label: SubfileLabel) -> usize {
        self.subfile(file, label).len()
    }

    /// Number of bits of `file` stored at `cache`.
    pub fn cached_bits(&self, file: FileId, cache: usize) -> usize {
        self.files
            .get(&file)
            .map_or(0, |l| l.labels.iter().filter(|s| s.contains(cache)).count())
    }

    /// Places `file` using the key `(seed, cache, file, epoch)` in random
    /// mode, or the canonical layout in exact mode.
    pub(crate) fn insert_file(&mut self, file: FileId, epoch: u64) -> Result<(), PlacementError> {
        if self.files.contains_key(&file) {
            return Err(PlacementError::DuplicateFile(file));
        }
        let lambda = self.params.num_caches;
        let f = self.params.file_size;
        let labels = match self.mode {
            PlacementMode::RandomSampled => {
                let quota = cache_quota(&self.params)?;
                let seed = self.seed.unwrap_or_default();
                let mut labels = vec![SubfileLabel::EMPTY; f];
                for cache in 0..lambda as usize {
                    let key =
                        derive_key(&[DOMAIN_PLACEMENT, seed, cache as u64, file as u64, epoch]);
                    for b in select_indices(key, f, quota) {
                        labels[b as usize] = labels[b as usize].with(cache);
                    }
                }
                labels
            }
            PlacementMode::ExactFraction => {
                let sizes = exact_sizes(&self.params)?;
                let mut labels = Vec::with_capacity(f);
                for s in all_subsets(lambda) {
                    labels.extend(std::iter::repeat_n(s, sizes[s.len() as usize]));
                }
                labels
            }
        };
        self.files
            .insert(file, FileLayout::from_labels(lambda, epoch, labels));
        Ok(())
    }

    pub(crate) fn remove_file(&mut self, file: FileId) -> Result<(), PlacementError> {
        self.files
            .remove(&file)
            .map(|_| ())
            .ok_or(PlacementError::UnknownFile(file))
    }

    /// Tab-separated `file, label, size` rows, one per nonempty subfile,
    /// files ascending and labels in canonical order.
    pub fn summary_table(&self) -> String {
        let mut out = String::from("# file\tlabel\tsize\n");
        for &n in self.files.keys() {
            for s in all_subsets(self.params.num_caches) {
                let len = self.subfile_len(n, s);
                if len > 0 {
                    out.push_str(&format!("{n}\t{s}\t{len}\n"));
                }
            }
        }
        out
    }
}

/// `M·F / catalog_size`, required to be an integer.
pub fn cache_quota(params: &SystemParams) -> Result<usize, PlacementError> {
    let quota = params.q() * Rational::from_integer(params.file_size as i128);
    if !quota.is_integer() {
        return Err(PlacementError::NonIntegralCacheQuota {
            quota,
            catalog: params.catalog_size,
        });
    }
    Ok(quota.to_integer() as usize)
}

/// Exact subfile sizes indexed by `|S|`.
fn exact_sizes(params: &SystemParams) -> Result<Vec<usize>, PlacementError> {
    (0..=params.num_caches)
        .map(|s| {
            let v = expected_subfile_size(params, s)?;
            if !v.is_integer() || v < Rational::zero() {
                return Err(PlacementError::FractionNotRealizable { size: s, value: v });
            }
            Ok(v.to_integer() as usize)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: u32, k: u32, lambda: u32, m: i128, f: usize) -> SystemParams {
        SystemParams::offline(n, k, lambda, Rational::from_integer(m), f).unwrap()
    }

    fn l(s: &str) -> SubfileLabel {
        s.parse().unwrap()
    }

    #[test]
    fn label_order_and_display() {
        let all = all_subsets(3);
        let shown: Vec<String> = all.iter().map(|s| s.to_string()).collect();
        assert_eq!(
            shown,
            ["φ", "{1}", "{2}", "{3}", "{1,2}", "{1,3}", "{2,3}", "{1,2,3}"]
        );
        let mut sorted = all.clone();
        sorted.reverse();
        sorted.sort();
        assert_eq!(sorted, all);
        assert_eq!(l("{2,1}"), l("{1,2}"));
        assert!("{1,1}".parse::<SubfileLabel>().is_err());
        assert!("1,2".parse::<SubfileLabel>().is_err());
    }

    #[test]
    fn subset_counts_are_binomial() {
        for lambda in 0..=6u32 {
            for s in 0..=lambda + 1 {
                let n = subsets_of_size(lambda, s).len() as i128;
                assert_eq!(n, crate::analytics::binom(lambda as i64, s as i64));
            }
        }
        assert_eq!(subsets_of_size(0, 0), vec![SubfileLabel::EMPTY]);
    }

    #[test]
    fn random_quota_is_exact() {
        let p = params(4, 4, 2, 2, 8);
        let st = PlacementState::place_random(&p, 7).unwrap();
        for n in 1..=4 {
            for c in 0..2 {
                assert_eq!(st.cached_bits(n, c), 4);
            }
            let total: usize = all_subsets(2).iter().map(|&s| st.subfile_len(n, s)).sum();
            assert_eq!(total, 8);
        }
    }

    #[test]
    fn zero_memory_caches_nothing() {
        let p = params(4, 4, 2, 0, 8);
        let st = PlacementState::place_random(&p, 7).unwrap();
        for n in 1..=4 {
            assert_eq!(st.subfile_len(n, SubfileLabel::EMPTY), 8);
        }
        let ex = PlacementState::place_exact(&p).unwrap();
        assert_eq!(ex.subfile_len(1, SubfileLabel::EMPTY), 8);
    }

    #[test]
    fn random_concentrates_at_large_f() {
        let p = params(4, 4, 2, 2, 1_000_000);
        let st = PlacementState::place_random(&p, 42).unwrap();
        for n in 1..=4 {
            for s in all_subsets(2) {
                let frac = st.subfile_len(n, s) as f64 / 1e6;
                assert!((frac - 0.25).abs() <= 0.005, "file {n} {s}: {frac}");
            }
        }
    }

    #[test]
    fn non_integral_quota_rejected() {
        let p = params(4, 4, 2, 1, 6);
        assert!(matches!(
            PlacementState::place_random(&p, 1),
            Err(PlacementError::NonIntegralCacheQuota { .. })
        ));
    }

    #[test]
    fn exact_sizes_example_one() {
        let p = params(4, 4, 2, 2, 4);
        let st = PlacementState::place_exact(&p).unwrap();
        for n in 1..=4 {
            for s in all_subsets(2) {
                assert_eq!(st.subfile_len(n, s), 1);
            }
        }
    }

    #[test]
    fn exact_sizes_online_catalog() {
        let p = SystemParams::online(4, 5, 4, 2, Rational::from_integer(2), 25).unwrap();
        let st = PlacementState::place_exact(&p).unwrap();
        let sizes: Vec<usize> = all_subsets(2)
            .iter()
            .map(|&s| st.subfile_len(3, s))
            .collect();
        assert_eq!(sizes, vec![9, 6, 6, 4]);
    }

    #[test]
    fn exact_full_memory_caches_everything() {
        let p = params(4, 4, 2, 4, 4);
        let st = PlacementState::place_exact(&p).unwrap();
        assert_eq!(st.subfile_len(1, SubfileLabel::full(2)), 4);
        assert_eq!(st.subfile_len(1, SubfileLabel::EMPTY), 0);
    }

    #[test]
    fn exact_rejects_unrealizable_sizes() {
        let p = params(4, 4, 2, 2, 6);
        assert!(matches!(
            PlacementState::place_exact(&p),
            Err(PlacementError::FractionNotRealizable { .. })
        ));
    }

    #[test]
    fn expected_sizes() {
        let p = params(4, 4, 2, 2, 1);
        assert_eq!(expected_subfile_size(&p, 1).unwrap(), Rational::new(1, 4));
        let full = params(4, 4, 2, 4, 1);
        assert_eq!(expected_subfile_size(&full, 1).unwrap(), Rational::zero());
        let online = SystemParams::online(4, 5, 4, 2, Rational::from_integer(2), 25).unwrap();
        assert_eq!(
            expected_subfile_size(&online, 2).unwrap(),
            Rational::from_integer(4)
        );
        assert!(expected_subfile_size(&p, 3).is_err());
    }

    #[test]
    fn seed_export_and_replay() {
        let p = params(4, 4, 2, 2, 64);
        let st = PlacementState::place_random(&p, 7).unwrap();
        assert_eq!(st.export_seed(), SeedToken::Seeded(7));
        let again = PlacementState::replay(&p, st.export_seed(), &st.file_keys()).unwrap();
        assert_eq!(again, st);

        let p4 = params(4, 4, 2, 2, 4);
        let ex = PlacementState::place_exact(&p4).unwrap();
        assert_eq!(ex.export_seed(), SeedToken::Exact);
        assert_eq!(ex.export_seed().seed(), Err(PlacementError::NotSeeded));
        assert_eq!(
            PlacementState::replay(&p4, SeedToken::Exact, &ex.file_keys()).unwrap(),
            ex
        );
    }

    #[test]
    fn different_seeds_differ() {
        let p = params(4, 4, 2, 2, 10_000);
        let a = PlacementState::place_random(&p, 7).unwrap();
        let b = PlacementState::place_random(&p, 8).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn summary_lists_nonempty_subfiles() {
        let p = params(4, 4, 2, 2, 4);
        let st = PlacementState::place_exact(&p).unwrap();
        let table = st.summary_table();
        assert!(table.contains("1\tφ\t1\n"));
        assert!(table.contains("4\t{1,2}\t1\n"));
        assert_eq!(table.lines().count(), 1 + 16);
    }
}
