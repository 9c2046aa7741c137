//! Closed-form delivery times over exact rationals.
//!
//! All formulas use `q = M / catalog_size`, so the online expressions are
//! the offline ones evaluated with `N'` in place of `N`.

use std::fmt;

use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::association::{Association, Profile};
use crate::delivery::DemandVector;
use crate::params::SystemParams;
use crate::placement::pow;
use crate::{FileId, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    /// The `(N−M)/M` prefactor is undefined; delivery is plain unicast.
    #[error("M = 0: formula undefined, unicast time is {unicast_time}")]
    ZeroMemory { unicast_time: Rational },
    #[error("profile {profile} has {got} caches, expected {expected}")]
    ProfileMismatch {
        profile: String,
        got: usize,
        expected: usize,
    },
    #[error("{users} users cannot be split uniformly over {caches} caches")]
    NotDivisible { users: usize, caches: usize },
    #[error("identity ({identity}) fails at s={s} for profile {profile}: {lhs} != {rhs}")]
    IdentityViolated {
        identity: char,
        s: u32,
        profile: String,
        lhs: Rational,
        rhs: Rational,
    },
}

/// `C(n, k)`, zero whenever `n < k` or `k < 0`.
pub fn binom(n: i64, k: i64) -> i128 {
    if k < 0 || n < k || n < 0 {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    acc
}

fn ri(x: i128) -> Rational {
    Rational::from_integer(x)
}

fn prefactor(params: &SystemParams, users: usize) -> Result<Rational, AnalyticsError> {
    if params.cache_size.is_zero() {
        return Err(AnalyticsError::ZeroMemory {
            unicast_time: ri(users as i128),
        });
    }
    Ok((ri(params.catalog_size as i128) - params.cache_size) / params.cache_size)
}

fn check_profile(profile: &Profile, params: &SystemParams) -> Result<(), AnalyticsError> {
    if profile.num_caches() != params.num_caches as usize {
        return Err(AnalyticsError::ProfileMismatch {
            profile: profile.to_string(),
            got: profile.num_caches(),
            expected: params.num_caches as usize,
        });
    }
    Ok(())
}

/// `Σ_{n=1}^{Λ−s+1} L_n C(Λ−n, s−1)`.
pub fn profile_sum(profile: &Profile, s: u32) -> i128 {
    let lambda = profile.num_caches() as i64;
    profile
        .counts()
        .iter()
        .enumerate()
        .map(|(i, &l)| l as i128 * binom(lambda - (i as i64 + 1), s as i64 - 1))
        .sum()
}

/// `|R_j| = #{n : L_n ≥ j}` for `j = 1..=L_1`.
pub fn round_sizes(profile: &Profile) -> Vec<usize> {
    (1..=profile.rounds())
        .map(|j| profile.counts().iter().filter(|&&l| l >= j).count())
        .collect()
}

/// `Σ_j [C(Λ,s) − C(Λ−|R_j|, s)]`.
pub fn round_sum(profile: &Profile, s: u32) -> i128 {
    let lambda = profile.num_caches() as i64;
    round_sizes(profile)
        .into_iter()
        .map(|r| binom(lambda, s as i64) - binom(lambda - r as i64, s as i64))
        .sum()
}

fn weight(q: Rational, lambda: u32, s: u32) -> Rational {
    pow(q, s) * pow(Rational::one() - q, lambda - s)
}

/// Worst-case delivery time for profile `L`, evaluated term by term with
/// the profile-sum coefficient.
pub fn t_offline(profile: &Profile, params: &SystemParams) -> Result<Rational, AnalyticsError> {
    check_profile(profile, params)?;
    let pre = prefactor(params, profile.num_users())?;
    let q = params.q();
    let lambda = params.num_caches;
    let sum: Rational = (1..=lambda)
        .map(|s| ri(profile_sum(profile, s)) * weight(q, lambda, s))
        .sum();
    Ok(pre * sum)
}

/// [`t_offline`], or the unicast time `K` when `M = 0`.
pub fn t_offline_limit(
    profile: &Profile,
    params: &SystemParams,
) -> Result<Rational, AnalyticsError> {
    match t_offline(profile, params) {
        Err(AnalyticsError::ZeroMemory { unicast_time }) => Ok(unicast_time),
        other => other,
    }
}

/// Same quantity as [`t_offline`], summed over rounds instead of caches.
pub fn t_offline_rounds(
    profile: &Profile,
    params: &SystemParams,
) -> Result<Rational, AnalyticsError> {
    check_profile(profile, params)?;
    let pre = prefactor(params, profile.num_users())?;
    let q = params.q();
    let lambda = params.num_caches;
    let sum: Rational = (1..=lambda)
        .map(|s| ri(round_sum(profile, s)) * weight(q, lambda, s))
        .sum();
    Ok(pre * sum)
}

/// Uniform association of `K` users over `Λ` caches.
pub fn t_uniform(num_users: usize, params: &SystemParams) -> Result<Rational, AnalyticsError> {
    let lambda = params.num_caches as usize;
    if lambda == 0 || !num_users.is_multiple_of(lambda) {
        return Err(AnalyticsError::NotDivisible {
            users: num_users,
            caches: lambda,
        });
    }
    let pre = prefactor(params, num_users)?;
    let q = params.q();
    Ok(pre
        * ri((num_users / lambda) as i128)
        * (Rational::one() - pow(Rational::one() - q, params.num_caches)))
}

/// All `K` users on one cache: `K(1 − M/N)`.
pub fn t_single_cache(num_users: usize, params: &SystemParams) -> Rational {
    ri(num_users as i128) * (Rational::one() - params.q())
}

/// Decentralized scheme with one private cache per user.
pub fn t_dedicated(num_users: usize, params: &SystemParams) -> Result<Rational, AnalyticsError> {
    let pre = prefactor(params, num_users)?;
    Ok(pre * (Rational::one() - pow(Rational::one() - params.q(), num_users as u32)))
}

/// Leader-scheme time for arbitrary demands, over the users present in
/// `assoc`: `N_e(d)(1−q)^Λ + Σ_{s≥2} Σ_j [C(Λ,s) − C(Λ−N_e(j),s)] q^{s−1}(1−q)^{Λ−s+1}`.
pub fn t_nondistinct(
    demand: &DemandVector,
    assoc: &Association,
    params: &SystemParams,
) -> Rational {
    let q = params.q();
    let lambda = params.num_caches;
    let distinct = demand.distinct_among(assoc.users());
    let dedup = assoc.dedup_within_caches(demand);
    let per_round: Vec<usize> = (1..=dedup.association.num_rounds())
        .map(|j| demand.distinct_among(dedup.association.round_members(j).map(|(_, u)| u)))
        .collect();
    let one = Rational::one();
    let mut t = ri(distinct as i128) * pow(one - q, lambda);
    for s in 2..=lambda {
        let count: i128 = per_round
            .iter()
            .map(|&e| binom(lambda as i64, s as i64) - binom(lambda as i64 - e as i64, s as i64))
            .sum();
        t += ri(count) * pow(q, s - 1) * pow(one - q, lambda - s + 1);
    }
    t
}

/// Online time: `u` whole files plus the offline time of the reduced
/// profile `L'` with `q = M/N'`.
pub fn t_online(
    reduced: &Profile,
    u_count: usize,
    params: &SystemParams,
) -> Result<Rational, AnalyticsError> {
    match t_offline(reduced, params) {
        Ok(t) => Ok(ri(u_count as i128) + t),
        Err(AnalyticsError::ZeroMemory { unicast_time }) => Err(AnalyticsError::ZeroMemory {
            unicast_time: unicast_time + ri(u_count as i128),
        }),
        Err(e) => Err(e),
    }
}

/// Online time when cached demands repeat: `u` whole files plus the leader
/// scheme over the remaining users.
pub fn t_online_nondistinct(
    demand: &DemandVector,
    reduced: &Association,
    u_count: usize,
    params: &SystemParams,
) -> Rational {
    ri(u_count as i128) + t_nondistinct(demand, reduced, params)
}

/// What [`check_identities`] verified.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdentityReport {
    pub hockey_stick: usize,
    pub round_sum: usize,
    pub uniform: bool,
    pub single_cache: bool,
}

/// Checks, for `L` and the system's `Λ`:
/// (a) `Σ_n C(Λ−n, s−1) = C(Λ, s)`;
/// (b) round-sum equals profile-sum for `L`;
/// (c) the uniform closed form equals the general one, when `Λ | K`;
/// (d) `K(1 − M/N)` equals the general formula on `(K, 0, …, 0)`.
/// (c) and (d) need `M > 0`.
pub fn check_identities(
    params: &SystemParams,
    profile: &Profile,
) -> Result<IdentityReport, AnalyticsError> {
    check_profile(profile, params)?;
    let lambda = params.num_caches;
    let k = profile.num_users();
    let mut report = IdentityReport::default();
    let fail = |identity, s, p: &Profile, lhs: i128, rhs: i128| AnalyticsError::IdentityViolated {
        identity,
        s,
        profile: p.to_string(),
        lhs: ri(lhs),
        rhs: ri(rhs),
    };
    for s in 1..=lambda {
        let lhs: i128 = (1..=(lambda - s + 1) as i64)
            .map(|n| binom(lambda as i64 - n, s as i64 - 1))
            .sum();
        let rhs = binom(lambda as i64, s as i64);
        if lhs != rhs {
            return Err(fail('a', s, profile, lhs, rhs));
        }
        report.hockey_stick += 1;
        let (lhs, rhs) = (round_sum(profile, s), profile_sum(profile, s));
        if lhs != rhs {
            return Err(fail('b', s, profile, lhs, rhs));
        }
        report.round_sum += 1;
    }
    if params.cache_size.is_zero() {
        return Ok(report);
    }
    if k.is_multiple_of(lambda as usize) {
        let uniform = Profile::uniform(k, lambda as usize);
        let lhs = t_uniform(k, params)?;
        let rhs = t_offline(&uniform, params)?;
        if lhs != rhs {
            return Err(AnalyticsError::IdentityViolated {
                identity: 'c',
                s: 0,
                profile: uniform.to_string(),
                lhs,
                rhs,
            });
        }
        report.uniform = true;
    }
    let mut single = vec![0; lambda as usize];
    single[0] = k;
    let single = Profile::from_counts(single);
    let lhs = t_single_cache(k, params);
    let rhs = t_offline(&single, params)?;
    if lhs != rhs {
        return Err(AnalyticsError::IdentityViolated {
            identity: 'd',
            s: 0,
            profile: single.to_string(),
            lhs,
            rhs,
        });
    }
    report.single_cache = true;
    Ok(report)
}

/// One row of a formula table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormulaRow {
    pub profile: Profile,
    pub cache_size: Rational,
    pub scheme: String,
    pub time: Rational,
}

pub fn to_decimal(x: Rational) -> f64 {
    x.numer().to_f64().unwrap_or(f64::NAN) / x.denom().to_f64().unwrap_or(f64::NAN)
}

impl fmt::Display for FormulaRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let counts: Vec<String> = self
            .profile
            .counts()
            .iter()
            .map(|c| c.to_string())
            .collect();
        write!(
            f,
            "({}),{},{},{},{:.6}",
            counts.join(";"),
            self.cache_size,
            self.scheme,
            self.time,
            to_decimal(self.time)
        )
    }
}

/// Comma-separated table with a header row. Profiles are written
/// `(3;1)` so the column needs no quoting.
pub fn formula_table(rows: &[FormulaRow]) -> String {
    let mut out = String::from("profile,M,scheme,time,time_decimal\n");
    for r in rows {
        out.push_str(&format!("{r}\n"));
    }
    out
}

/// `t_offline` over every profile of `K` users on `Λ` caches.
pub fn profile_table(params: &SystemParams) -> Result<Vec<FormulaRow>, AnalyticsError> {
    Profile::enumerate(params.num_users as usize, params.num_caches as usize)
        .into_iter()
        .map(|p| {
            Ok(FormulaRow {
                time: t_offline(&p, params)?,
                profile: p,
                cache_size: params.cache_size,
                scheme: "shared".into(),
            })
        })
        .collect()
}

/// Distinct files requested by `users`, ascending.
pub fn requested_files(demand: &DemandVector, assoc: &Association) -> Vec<FileId> {
    let mut v: Vec<FileId> = assoc.users().map(|u| demand.of(u)).collect();
    v.sort_unstable();
    v.dedup();
    v
}
