use crate::rng::{derive_key, KeyedStream, DOMAIN_LIBRARY};
use crate::{Bits, FileId};

/// The server's file library. File contents are generated on demand from
/// `(seed, file id)`, so the catalog can grow without storing anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Library {
    seed: u64,
    file_size: usize,
}

impl Library {
    pub fn new(seed: u64, file_size: usize) -> Self {
        Self { seed, file_size }
    }

    pub fn file_size(&self) -> usize {
        self.file_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn file(&self, file: FileId) -> Bits {
        let mut stream = KeyedStream::new(derive_key(&[DOMAIN_LIBRARY, self.seed, file as u64]));
        let words = self.file_size.div_ceil(64);
        let mut raw = vec![0u64; words];
        for w in raw.iter_mut() {
            *w = stream.next_u64();
        }
        let mut bits = Bits::from_vec(raw);
        bits.truncate(self.file_size);
        bits
    }
}
