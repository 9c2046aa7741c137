//! Error-correcting delivery: the broadcast bits are encoded with a binary
//! linear block code of minimum distance `2δ + 1` and decoded with a
//! syndrome table.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::delivery::TransmissionLog;
use crate::gf2::{Gf2Matrix, MatrixError};
use crate::{Bits, Rational};

/// Largest `n − k` for which a syndrome table is built.
pub const MAX_REDUNDANCY: usize = 24;

/// Largest `k` for which the minimum distance is found by enumeration.
pub const MAX_EXHAUSTIVE_DIMENSION: usize = 20;

/// The shortened Hamming code used for `N_2[7,3] = 11`, as `[I_7 | P]`.
pub const HAMMING_11_7: &str = "\
10000000011
01000000101
00100000110
00010000111
00001001001
00000101010
00000011011
";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EccError {
    #[error("no optimal length known for k={k}, d={d}")]
    UnknownCodeParameters { k: usize, d: usize },
    #[error("{plaintext} plaintext bits do not fit a code of dimension {k}")]
    DimensionMismatch { plaintext: usize, k: usize },
    #[error("{count} error positions exceed δ = {delta}")]
    TooManyErrors { count: usize, delta: usize },
    #[error("error position {position} outside codeword of length {n}")]
    PositionOutOfRange { position: usize, n: usize },
    #[error("syndrome {syndrome:#x} has coset leader weight {weight}, more than {radius} errors")]
    UncorrectableSyndrome {
        syndrome: u32,
        weight: usize,
        radius: usize,
    },
    #[error("generator matrix has rank {rank} < {k} rows")]
    NotFullRank { rank: usize, k: usize },
    #[error("code too large: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Where an optimal length comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthSource {
    /// A published table value.
    Table,
    /// Attained by a construction in this module that meets a known bound.
    Constructive,
}

impl fmt::Display for LengthSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LengthSource::Table => "TABLE",
            LengthSource::Constructive => "CONSTRUCTIVE",
        })
    }
}

/// Smallest `r` with `2^r ≥ k + r + 1`.
fn hamming_redundancy(k: usize) -> usize {
    (1..)
        .find(|&r| (1usize << r) > k + r)
        .expect("some r works")
}

/// `N_2[k, d]` for the supported parameter families.
pub fn lookup_optimal_length(k: usize, d: usize) -> Result<(usize, LengthSource), EccError> {
    if k == 0 || d == 0 {
        return Err(EccError::UnknownCodeParameters { k, d });
    }
    Ok(match (k, d) {
        (7, 3) => (11, LengthSource::Table),
        (_, 1) => (k, LengthSource::Constructive),
        (1, _) => (d, LengthSource::Constructive),
        (_, 2) => (k + 1, LengthSource::Constructive),
        (_, 3) => (k + hamming_redundancy(k), LengthSource::Constructive),
        (_, 4) => (k + hamming_redundancy(k) + 1, LengthSource::Constructive),
        _ => return Err(EccError::UnknownCodeParameters { k, d }),
    })
}

/// How the minimum distance was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceCheck {
    /// Minimum weight over all nonzero codewords.
    Exhaustive,
    /// From the columns of the parity-check matrix: nonzero (d ≥ 2),
    /// pairwise distinct (d ≥ 3), no three summing to zero (d ≥ 4).
    ColumnBound,
}

#[derive(Debug, Clone)]
pub struct LinearBlockCode {
    name: String,
    n: usize,
    k: usize,
    d: usize,
    distance_check: DistanceCheck,
    g: Gf2Matrix,
    h: Gf2Matrix,
    /// Columns of `h` packed as syndromes.
    h_columns: Vec<u32>,
    leaders: HashMap<u32, Bits>,
    info_set: Vec<usize>,
    info_inverse: Gf2Matrix,
}

fn weight(b: &Bits) -> usize {
    b.count_ones()
}

impl LinearBlockCode {
    pub fn from_generator(name: &str, g: Gf2Matrix) -> Result<Self, EccError> {
        let (k, n) = (g.num_rows(), g.num_cols());
        let (_, pivots) = g.rref();
        if pivots.len() != k {
            return Err(EccError::NotFullRank {
                rank: pivots.len(),
                k,
            });
        }
        if n - k > MAX_REDUNDANCY {
            return Err(EccError::TooLarge(format!(
                "n − k = {} > {MAX_REDUNDANCY}",
                n - k
            )));
        }
        let h = g.null_space();
        let h_columns: Vec<u32> = (0..n)
            .map(|c| (0..h.num_rows()).fold(0u32, |s, r| s | (h.get(r, c) as u32) << r))
            .collect();
        let (d, distance_check) = if k <= MAX_EXHAUSTIVE_DIMENSION {
            (exhaustive_distance(&g), DistanceCheck::Exhaustive)
        } else {
            (column_bound(&h_columns), DistanceCheck::ColumnBound)
        };
        let mut gj = Gf2Matrix::zeros(k, k);
        for r in 0..k {
            for (j, &c) in pivots.iter().enumerate() {
                gj.set(r, j, g.get(r, c));
            }
        }
        let info_inverse = gj.inverse().expect("pivot columns are independent");
        let leaders = coset_leaders(n, h.num_rows(), &h_columns);
        Ok(Self {
            name: name.to_string(),
            n,
            k,
            d,
            distance_check,
            g,
            h,
            h_columns,
            leaders,
            info_set: pivots,
            info_inverse,
        })
    }

    /// Generator rows as text, one row of `0`/`1` per line.
    pub fn from_text(name: &str, text: &str) -> Result<Self, EccError> {
        Self::from_generator(name, text.parse()?)
    }

    /// `[k, k, 1]`: no protection.
    pub fn identity(k: usize) -> Self {
        Self::from_generator(&format!("identity[{k},{k},1]"), Gf2Matrix::identity(k))
            .expect("identity is valid")
    }

    /// `[m, 1, m]`.
    pub fn repetition(m: usize) -> Self {
        let mut g = Gf2Matrix::zeros(1, m);
        for c in 0..m {
            g.set(0, c, true);
        }
        Self::from_generator(&format!("repetition[{m},1,{m}]"), g).expect("repetition is valid")
    }

    /// Each of `k` bits repeated `m` times: `[mk, k, m]`.
    pub fn repetition_per_bit(k: usize, m: usize) -> Result<Self, EccError> {
        let mut g = Gf2Matrix::zeros(k, m * k);
        for r in 0..k {
            for c in 0..m {
                g.set(r, r * m + c, true);
            }
        }
        Self::from_generator(&format!("repetition-per-bit[{},{k},{m}]", m * k), g)
    }

    /// `[k+1, k, 2]`.
    pub fn parity(k: usize) -> Result<Self, EccError> {
        let mut g = Gf2Matrix::zeros(k, k + 1);
        for r in 0..k {
            g.set(r, r, true);
            g.set(r, k, true);
        }
        Self::from_generator(&format!("parity[{},{k},2]", k + 1), g)
    }

    /// `[k+r, k, 3]` with `r` minimal: `[I_k | P]`, where row `i` of `P` is
    /// the `i`-th smallest `r`-bit value of weight at least two, written
    /// most significant bit first.
    pub fn shortened_hamming(k: usize) -> Result<Self, EccError> {
        let r = hamming_redundancy(k);
        let values = (3u32..).filter(|v| v.count_ones() >= 2).take(k);
        let mut g = Gf2Matrix::zeros(k, k + r);
        for (row, v) in values.enumerate() {
            g.set(row, row, true);
            for b in 0..r {
                if v >> (r - 1 - b) & 1 == 1 {
                    g.set(row, k + b, true);
                }
            }
        }
        Self::from_generator(&format!("shortened-hamming[{},{k},3]", k + r), g)
    }

    /// The fixed `[11, 7, 3]` code.
    pub fn hamming_11_7() -> Self {
        Self::from_text("hamming[11,7,3]", HAMMING_11_7).expect("built-in matrix is valid")
    }

    /// Appends an overall parity bit.
    pub fn extended(&self) -> Result<Self, EccError> {
        let mut g = Gf2Matrix::zeros(self.k, self.n + 1);
        for r in 0..self.k {
            for c in 0..self.n {
                g.set(r, c, self.g.get(r, c));
            }
            g.set(r, self.n, self.g.row(r).count_ones() % 2 == 1);
        }
        Self::from_generator(&format!("extended-{}", self.name), g)
    }

    /// A code of length `N_2[k, d]` from the supported families.
    pub fn optimal(k: usize, d: usize) -> Result<Self, EccError> {
        let (n, _) = lookup_optimal_length(k, d)?;
        let code = match d {
            1 => Self::identity(k),
            _ if k == 1 => Self::repetition(d),
            2 => Self::parity(k)?,
            3 if k == 7 => Self::hamming_11_7(),
            3 => Self::shortened_hamming(k)?,
            4 => Self::shortened_hamming(k)?.extended()?,
            _ => return Err(EccError::UnknownCodeParameters { k, d }),
        };
        debug_assert_eq!(code.n, n);
        Ok(code)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn distance_check(&self) -> DistanceCheck {
        self.distance_check
    }

    pub fn generator(&self) -> &Gf2Matrix {
        &self.g
    }

    pub fn parity_check(&self) -> &Gf2Matrix {
        &self.h
    }

    /// `⌊(d − 1)/2⌋`.
    pub fn correction_radius(&self) -> usize {
        (self.d.max(1) - 1) / 2
    }

    /// Number of syndromes with a coset leader.
    pub fn table_size(&self) -> usize {
        self.leaders.len()
    }

    pub fn coset_leader(&self, syndrome: u32) -> Option<&Bits> {
        self.leaders.get(&syndrome)
    }

    pub fn encode(&self, message: &Bits) -> Bits {
        self.g.left_mul(message)
    }

    pub fn syndrome(&self, word: &Bits) -> u32 {
        word.iter_ones().fold(0, |s, i| s ^ self.h_columns[i])
    }

    /// Removes the coset leader and inverts `G` on an information set.
    pub fn decode(&self, received: &Bits) -> Result<Bits, EccError> {
        let s = self.syndrome(received);
        let leader = &self.leaders[&s];
        if weight(leader) > self.correction_radius() {
            return Err(EccError::UncorrectableSyndrome {
                syndrome: s,
                weight: weight(leader),
                radius: self.correction_radius(),
            });
        }
        let mut corrected = received.clone();
        crate::gf2::xor_assign(&mut corrected, leader);
        let info: Bits = self.info_set.iter().map(|&c| corrected[c]).collect();
        Ok(self.info_inverse.left_mul(&info))
    }
}

fn exhaustive_distance(g: &Gf2Matrix) -> usize {
    let k = g.num_rows();
    let mut best = g.num_cols();
    // Gray-code walk over all nonzero messages.
    let mut word = Bits::repeat(false, g.num_cols());
    for i in 1u64..(1 << k) {
        let flip = i.trailing_zeros() as usize;
        crate::gf2::xor_assign(&mut word, g.row(flip));
        best = best.min(weight(&word));
    }
    best
}

fn column_bound(cols: &[u32]) -> usize {
    if cols.contains(&0) {
        return 1;
    }
    let mut seen = std::collections::HashSet::new();
    if !cols.iter().all(|c| seen.insert(*c)) {
        return 2;
    }
    for (i, a) in cols.iter().enumerate() {
        for b in &cols[i + 1..] {
            if seen.contains(&(a ^ b)) {
                return 3;
            }
        }
    }
    4
}

/// Minimum-weight coset leaders; among equal weights, the pattern whose
/// `0`/`1` string (position 0 first) is lexicographically smallest.
fn coset_leaders(n: usize, redundancy: usize, h_columns: &[u32]) -> HashMap<u32, Bits> {
    let total = 1usize << redundancy;
    let mut table = HashMap::with_capacity(total);
    table.insert(0, Bits::repeat(false, n));
    let mut w = 1;
    while table.len() < total && w <= n {
        // Reverse lexicographic order of position tuples is ascending
        // string order.
        let mut combos = combinations(n, w);
        combos.reverse();
        for c in combos {
            let s = c.iter().fold(0u32, |s, &i| s ^ h_columns[i]);
            table.entry(s).or_insert_with(|| {
                let mut b = Bits::repeat(false, n);
                for &i in &c {
                    b.set(i, true);
                }
                b
            });
        }
        w += 1;
    }
    table
}

fn combinations(n: usize, w: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..w).collect();
    if w > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..w).rev().find(|&i| cur[i] < n - w + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..w {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// A delivery encoded for a channel with at most `δ` bit errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedDeliveryRun {
    /// Concatenated payload bits, zero padded to `k`.
    pub plaintext: Bits,
    pub padding: usize,
    pub codeword: Bits,
    pub errors: Vec<usize>,
    pub received: Bits,
    pub file_size: usize,
}

impl CodedDeliveryRun {
    /// Coded length over `F`, padding included.
    pub fn coded_time(&self) -> Rational {
        Rational::new(self.codeword.len() as i128, self.file_size as i128)
    }
}

/// All payload bits of a log in transmission order.
pub fn plaintext_of(log: &TransmissionLog) -> Bits {
    let mut out = Bits::with_capacity(log.total_bits());
    for t in log.transmissions() {
        out.extend_from_bitslice(&t.payload);
    }
    out
}

pub fn encode_concatenated(
    log: &TransmissionLog,
    code: &LinearBlockCode,
) -> Result<CodedDeliveryRun, EccError> {
    let mut plaintext = plaintext_of(log);
    if plaintext.len() > code.k() {
        return Err(EccError::DimensionMismatch {
            plaintext: plaintext.len(),
            k: code.k(),
        });
    }
    let padding = code.k() - plaintext.len();
    plaintext.resize(code.k(), false);
    let codeword = code.encode(&plaintext);
    Ok(CodedDeliveryRun {
        received: codeword.clone(),
        plaintext,
        padding,
        codeword,
        errors: Vec::new(),
        file_size: log.file_size(),
    })
}

/// Flips `positions` in the received word.
pub fn inject_errors(
    run: &CodedDeliveryRun,
    positions: &[usize],
    delta: usize,
) -> Result<CodedDeliveryRun, EccError> {
    if positions.len() > delta {
        return Err(EccError::TooManyErrors {
            count: positions.len(),
            delta,
        });
    }
    let mut out = run.clone();
    for &p in positions {
        if p >= out.received.len() {
            return Err(EccError::PositionOutOfRange {
                position: p,
                n: out.received.len(),
            });
        }
        let b = out.received[p];
        out.received.set(p, !b);
        out.errors.push(p);
    }
    Ok(out)
}

/// Recovers the plaintext (padding included) from the received word.
pub fn syndrome_decode(run: &CodedDeliveryRun, code: &LinearBlockCode) -> Result<Bits, EccError> {
    code.decode(&run.received)
}

/// Rebuilds a log with the same headers as `template` and payloads cut
/// from `plaintext`.
pub fn restore_log(template: &TransmissionLog, plaintext: &Bits) -> TransmissionLog {
    let mut out = TransmissionLog::new(template.file_size());
    let mut at = 0;
    for t in template.transmissions() {
        let mut t = t.clone();
        let len = t.payload.len();
        t.payload = Bits::with_capacity(len);
        t.payload.extend_from_bitslice(&plaintext[at..at + len]);
        at += len;
        out.push(t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> Bits {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn fixed_code_parameters() {
        let c = LinearBlockCode::hamming_11_7();
        assert_eq!((c.n(), c.k(), c.d()), (11, 7, 3));
        assert_eq!(c.distance_check(), DistanceCheck::Exhaustive);
        assert_eq!(c.table_size(), 16);
        let gh = c.generator().mul(&c.parity_check().transpose()).unwrap();
        assert!(gh.rows().iter().all(|r| r.not_any()));
        let built = LinearBlockCode::shortened_hamming(7).unwrap();
        assert_eq!(built.generator(), c.generator());
    }

    #[test]
    fn optimal_lengths() {
        assert_eq!(
            lookup_optimal_length(7, 3).unwrap(),
            (11, LengthSource::Table)
        );
        assert_eq!(lookup_optimal_length(9, 1).unwrap().0, 9);
        assert_eq!(lookup_optimal_length(1, 3).unwrap().0, 3);
        assert_eq!(lookup_optimal_length(4, 3).unwrap().0, 7);
        assert_eq!(lookup_optimal_length(11, 3).unwrap().0, 15);
        assert_eq!(lookup_optimal_length(12, 3).unwrap().0, 17);
        assert_eq!(lookup_optimal_length(4, 4).unwrap().0, 8);
        assert!(matches!(
            lookup_optimal_length(7, 5),
            Err(EccError::UnknownCodeParameters { .. })
        ));
        for (k, d) in [(1, 5), (5, 1), (6, 2), (4, 3), (13, 3), (5, 4), (1, 3)] {
            let c = LinearBlockCode::optimal(k, d).unwrap();
            assert_eq!(
                (c.n(), c.k(), c.d()),
                (lookup_optimal_length(k, d).unwrap().0, k, d),
                "{}",
                c.name()
            );
        }
    }

    #[test]
    fn leaders_are_minimal_and_lexicographic() {
        let c = LinearBlockCode::repetition(3);
        // Weight-1 leaders: every single flip is its own coset.
        for i in 0..3 {
            let mut e = Bits::repeat(false, 3);
            e.set(i, true);
            assert_eq!(c.coset_leader(c.syndrome(&e)).unwrap(), &e);
        }
        let p = LinearBlockCode::parity(2).unwrap();
        // Cosets of the [3,2,2] code: {000,...} and weight-1 patterns; the
        // leader is 001, the smallest string.
        assert_eq!(
            p.coset_leader(p.syndrome(&bits("100"))).unwrap(),
            &bits("001")
        );
    }

    #[test]
    fn single_errors_corrected() {
        let c = LinearBlockCode::hamming_11_7();
        for m in 0u32..128 {
            let msg: Bits = (0..7).map(|i| m >> i & 1 == 1).collect();
            let cw = c.encode(&msg);
            for e in 0..11 {
                let mut r = cw.clone();
                let b = r[e];
                r.set(e, !b);
                assert_eq!(c.decode(&r).unwrap(), msg);
            }
            assert_eq!(c.decode(&cw).unwrap(), msg);
        }
    }

    #[test]
    fn parity_code_detects_single_error() {
        let c = LinearBlockCode::parity(3).unwrap();
        let r = bits("1000");
        assert!(matches!(
            c.decode(&r),
            Err(EccError::UncorrectableSyndrome { .. })
        ));
    }

    #[test]
    fn large_dimension_uses_column_bound() {
        let c = LinearBlockCode::shortened_hamming(64).unwrap();
        assert_eq!((c.n(), c.d()), (71, 3));
        assert_eq!(c.distance_check(), DistanceCheck::ColumnBound);
        let msg: Bits = (0..64).map(|i| i % 3 == 0).collect();
        let mut r = c.encode(&msg);
        let b = r[40];
        r.set(40, !b);
        assert_eq!(c.decode(&r).unwrap(), msg);
    }

    #[test]
    fn matrix_text_errors() {
        assert!(matches!(
            LinearBlockCode::from_text("bad", "110\n110"),
            Err(EccError::NotFullRank { rank: 1, k: 2 })
        ));
        assert!(LinearBlockCode::from_text("bad", "1x0").is_err());
    }

    #[test]
    fn inject_limits() {
        let c = LinearBlockCode::hamming_11_7();
        let mut log = TransmissionLog::new(4);
        log.push(crate::delivery::Transmission {
            kind: crate::delivery::TransmissionKind::UncodedSubfile,
            round: 1,
            subset: None,
            components: vec![],
            payload: bits("1011"),
        });
        let run = encode_concatenated(&log, &c).unwrap();
        assert_eq!(run.padding, 3);
        assert_eq!(run.coded_time(), Rational::new(11, 4));
        assert_eq!(inject_errors(&run, &[], 1).unwrap().received, run.codeword);
        let one = inject_errors(&run, &[5], 1).unwrap();
        assert_eq!(
            (one.received.clone() ^ run.codeword.clone()).count_ones(),
            1
        );
        assert!(matches!(
            inject_errors(&run, &[1, 2], 1),
            Err(EccError::TooManyErrors { .. })
        ));
        assert!(matches!(
            inject_errors(&run, &[11], 1),
            Err(EccError::PositionOutOfRange { .. })
        ));
        let restored = restore_log(&log, &syndrome_decode(&one, &c).unwrap());
        assert_eq!(restored, log);
    }
}
