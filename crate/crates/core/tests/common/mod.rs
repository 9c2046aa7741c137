#![allow(dead_code)]

use codedcache::rng::{derive_key, KeyedStream};
use codedcache::{Association, DemandVector, Rational, SystemParams, UserId};

pub struct Gen(KeyedStream);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen(KeyedStream::new(derive_key(&[0x7465_7374, seed])))
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.0.below(n as u64) as usize
    }

    /// Uniform in `lo..=hi`.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + self.below(hi - lo + 1)
    }

    pub fn shuffle<T>(&mut self, v: &mut [T]) {
        for i in (1..v.len()).rev() {
            let j = self.below(i + 1);
            v.swap(i, j);
        }
    }
}

/// Users `1..=k` shuffled and dropped into random caches.
pub fn random_assoc(g: &mut Gen, k: usize, lambda: usize) -> Association {
    let mut ids: Vec<UserId> = (1..=k as UserId).collect();
    g.shuffle(&mut ids);
    let mut groups = vec![Vec::new(); lambda];
    for u in ids {
        groups[g.below(lambda)].push(u);
    }
    Association::new(groups).unwrap()
}

pub fn random_demand(g: &mut Gen, k: usize, n: usize, distinct: bool) -> DemandVector {
    if distinct {
        let mut files: Vec<u32> = (1..=n as u32).collect();
        g.shuffle(&mut files);
        files.truncate(k);
        DemandVector::new(files)
    } else {
        DemandVector::new((0..k).map(|_| g.range(1, n) as u32).collect())
    }
}

pub struct Scenario {
    pub params: SystemParams,
    pub assoc: Association,
    pub demand: DemandVector,
}

/// `K ≤ 8`, `Λ ≤ 4`, `N ≤ 8`, integer `M ∈ 0..=N`, `F = N^Λ·c`.
pub fn random_exact(g: &mut Gen, distinct: bool) -> Scenario {
    let lambda = g.range(1, 4);
    let k = g.range(lambda, 8);
    let n = if distinct {
        g.range(k, 8)
    } else {
        g.range(1, 8)
    };
    let m = g.range(0, n);
    let f = n.pow(lambda as u32) * g.range(1, 2);
    let params = SystemParams::offline(
        n as u32,
        k as u32,
        lambda as u32,
        Rational::from_integer(m as i128),
        f,
    )
    .unwrap();
    Scenario {
        assoc: random_assoc(g, k, lambda),
        demand: random_demand(g, k, n, distinct),
        params,
    }
}

/// Random-placement instance with `F` a multiple of `N` up to a few hundred.
pub fn random_sampled(g: &mut Gen, distinct: bool) -> Scenario {
    let lambda = g.range(1, 4);
    let k = g.range(lambda, 7);
    let n = if distinct {
        g.range(k, 8)
    } else {
        g.range(1, 8)
    };
    let m = g.range(0, n);
    let f = n * g.range(1, 40);
    let params = SystemParams::offline(
        n as u32,
        k as u32,
        lambda as u32,
        Rational::from_integer(m as i128),
        f,
    )
    .unwrap();
    Scenario {
        assoc: random_assoc(g, k, lambda),
        demand: random_demand(g, k, n, distinct),
        params,
    }
}
