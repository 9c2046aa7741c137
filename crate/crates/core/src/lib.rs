//! Bit-exact simulation of decentralized and online coded caching with
//! shared caches.
//!
//! A server holds a library of equally sized files. `Λ` helper caches each
//! store a pseudorandom fraction of every file, and each of `K` users reads
//! from exactly one cache. The crate performs placement, delivery and
//! decoding on actual bits, checks every user recovers its demand, and
//! compares the measured delivery times against exact closed forms
//! ([`analytics`]) and index-coding bounds ([`converse`]). Online operation
//! with least-recently-sent replacement lives in [`online`], and
//! error-correcting delivery in [`ecc`].

pub mod analytics;
pub mod association;
pub mod converse;
pub mod decode;
pub mod delivery;
pub mod ecc;
pub mod gf2;
pub mod library;
pub mod online;
pub mod params;
pub mod placement;
pub mod rng;

use bitvec::prelude::{BitVec, Lsb0};

/// Exact rational used for every delivery-time quantity.
pub type Rational = num_rational::Ratio<i128>;

/// File identifier. Files are numbered from 1.
pub type FileId = u32;

/// User identifier. Users are numbered from 1.
pub type UserId = u32;

/// Bit string used for file contents, subfiles and payloads.
pub type Bits = BitVec<u64, Lsb0>;

pub use association::{Association, Profile};
pub use delivery::{DemandVector, Transmission, TransmissionLog};
pub use library::Library;
pub use params::SystemParams;
pub use placement::{PlacementMode, PlacementState, SubfileLabel};
