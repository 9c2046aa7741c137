use num_traits::{One, Zero};
use thiserror::Error;

use crate::Rational;

/// Caches are indexed by bits of a `u32` mask.
pub const MAX_CACHES: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamsError {
    #[error("need at least one cache and one user (got Λ={caches}, K={users})")]
    Empty { caches: u32, users: u32 },
    #[error("number of caches Λ={caches} exceeds number of users K={users}")]
    TooManyCaches { caches: u32, users: u32 },
    #[error("at most {MAX_CACHES} caches are supported (got {0})")]
    CacheLimit(u32),
    #[error("cache size M={cache_size} outside [0, {catalog}]")]
    CacheSize { cache_size: Rational, catalog: u32 },
    #[error("file size must be at least one bit")]
    ZeroFileSize,
    #[error("catalog size {catalog} is smaller than the number of files {files}")]
    Catalog { catalog: u32, files: u32 },
}

/// System dimensions shared by every phase of a run.
///
/// `catalog_size` is the number of files the caches prefetch from: `N`
/// offline, `N' = βN` online. The per-bit caching probability is
/// `q = M / catalog_size`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemParams {
    pub num_files: u32,
    pub num_users: u32,
    pub num_caches: u32,
    pub cache_size: Rational,
    pub file_size: usize,
    pub catalog_size: u32,
}

impl SystemParams {
    pub fn offline(
        num_files: u32,
        num_users: u32,
        num_caches: u32,
        cache_size: Rational,
        file_size: usize,
    ) -> Result<Self, ParamsError> {
        Self::online(
            num_files, num_files, num_users, num_caches, cache_size, file_size,
        )
    }

    pub fn online(
        num_files: u32,
        catalog_size: u32,
        num_users: u32,
        num_caches: u32,
        cache_size: Rational,
        file_size: usize,
    ) -> Result<Self, ParamsError> {
        let params = Self {
            num_files,
            num_users,
            num_caches,
            cache_size,
            file_size,
            catalog_size,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        if self.num_caches == 0 || self.num_users == 0 {
            return Err(ParamsError::Empty {
                caches: self.num_caches,
                users: self.num_users,
            });
        }
        if self.num_caches > MAX_CACHES {
            return Err(ParamsError::CacheLimit(self.num_caches));
        }
        if self.num_caches > self.num_users {
            return Err(ParamsError::TooManyCaches {
                caches: self.num_caches,
                users: self.num_users,
            });
        }
        if self.cache_size < Rational::zero()
            || self.cache_size > Rational::from_integer(self.catalog_size as i128)
        {
            return Err(ParamsError::CacheSize {
                cache_size: self.cache_size,
                catalog: self.catalog_size,
            });
        }
        if self.file_size == 0 {
            return Err(ParamsError::ZeroFileSize);
        }
        if self.catalog_size < self.num_files {
            return Err(ParamsError::Catalog {
                catalog: self.catalog_size,
                files: self.num_files,
            });
        }
        Ok(())
    }

    /// Probability that a given bit of a file sits in a given cache.
    pub fn q(&self) -> Rational {
        self.cache_size / Rational::from_integer(self.catalog_size as i128)
    }

    /// `β = N' / N`.
    pub fn beta(&self) -> Rational {
        Rational::new(self.catalog_size as i128, self.num_files.max(1) as i128)
    }

    pub fn is_full_memory(&self) -> bool {
        self.q() == Rational::one()
    }

    pub fn with_file_size(&self, file_size: usize) -> Self {
        Self {
            file_size,
            ..self.clone()
        }
    }

    pub fn with_cache_size(&self, cache_size: Rational) -> Self {
        Self {
            cache_size,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn q_is_memory_over_catalog() {
        let p = SystemParams::online(4, 5, 4, 2, r(2), 25).unwrap();
        assert_eq!(p.q(), Rational::new(2, 5));
        assert_eq!(p.beta(), Rational::new(5, 4));
    }

    #[test]
    fn rejects_invalid_dimensions() {
        assert!(matches!(
            SystemParams::offline(4, 2, 3, r(1), 4),
            Err(ParamsError::TooManyCaches { .. })
        ));
        assert!(matches!(
            SystemParams::offline(4, 4, 2, r(5), 4),
            Err(ParamsError::CacheSize { .. })
        ));
        assert!(matches!(
            SystemParams::offline(4, 4, 2, r(1), 0),
            Err(ParamsError::ZeroFileSize)
        ));
        assert!(matches!(
            SystemParams::online(4, 3, 4, 2, r(1), 4),
            Err(ParamsError::Catalog { .. })
        ));
    }

    #[test]
    fn degenerate_memory_is_legal() {
        assert!(SystemParams::offline(4, 4, 2, r(0), 8).is_ok());
        assert!(SystemParams::offline(4, 4, 2, r(4), 8)
            .unwrap()
            .is_full_memory());
    }
}
