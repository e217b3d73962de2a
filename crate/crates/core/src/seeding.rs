//! Three-stream seeding protocol.
//!
//! Every repetition owns three independent random streams:
//!
//! * the **strategy** stream: acquisition decisions and unlabeled-pool
//!   subsampling,
//! * the **data** stream: validation split, seed-set choice, mini-batch
//!   order,
//! * the **theta** stream: parameter initialization and dropout masks.
//!
//! A stream is a ChaCha12 generator keyed by SHA-256 over a fixed scheme
//! label, the domain tag, and the 64-bit seed. That makes every stream a
//! pure function of `(seed, domain)`: byte-identical across platforms and
//! runs, and drawing from one stream never advances another. Across
//! repetitions the strategy seed stays fixed while the data and theta seeds
//! are offset by the repetition index, so repetitions differ in splits and
//! initialization but share the strategy's decision stream.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// The stream generator used everywhere in the crate.
pub type Stream = ChaCha12Rng;

/// Version label mixed into every stream key. Bump only on a deliberate
/// break of reproducibility.
const SCHEME: &[u8] = b"albench.stream.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamDomain {
    /// Acquisition decisions and pool subsampling.
    Strategy,
    /// Splits, seed sets, mini-batch order.
    Data,
    /// Parameter initialization and dropout masks.
    Theta,
}

impl StreamDomain {
    pub fn tag(self) -> &'static str {
        match self {
            StreamDomain::Strategy => "strategy",
            StreamDomain::Data => "data",
            StreamDomain::Theta => "theta",
        }
    }
}

impl FromStr for StreamDomain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strategy" => Ok(StreamDomain::Strategy),
            "data" => Ok(StreamDomain::Data),
            "theta" => Ok(StreamDomain::Theta),
            other => Err(Error::config(format!(
                "unknown stream domain tag {other:?}; expected one of strategy, data, theta"
            ))),
        }
    }
}

/// Base seeds of an experiment: one per stream domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedTriple {
    pub s_omega: u64,
    pub s_data: u64,
    pub s_theta: u64,
}

impl SeedTriple {
    pub fn new(s_omega: u64, s_data: u64, s_theta: u64) -> Self {
        SeedTriple {
            s_omega,
            s_data,
            s_theta,
        }
    }

    /// Instantiate the three streams for this triple.
    pub fn streams(self) -> (Stream, Stream, Stream) {
        (
            derive_stream(self.s_omega, StreamDomain::Strategy),
            derive_stream(self.s_data, StreamDomain::Data),
            derive_stream(self.s_theta, StreamDomain::Theta),
        )
    }
}

/// Derive the stream for `(seed, domain)`.
///
/// Key = SHA-256(scheme label || 0x00 || domain tag || 0x00 || seed as
/// little-endian u64), fed to ChaCha12. The zero separators keep the
/// preimage unambiguous.
pub fn derive_stream(seed: u64, domain: StreamDomain) -> Stream {
    let mut hasher = Sha256::new();
    hasher.update(SCHEME);
    hasher.update([0u8]);
    hasher.update(domain.tag().as_bytes());
    hasher.update([0u8]);
    hasher.update(seed.to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(key)
}

/// Seeds for repetition `rep` of an experiment with base seeds `base`.
///
/// The strategy seed is shared across repetitions; data and theta seeds are
/// offset by the repetition index (wrapping, so any u64 base is legal).
pub fn repetition_seeds(base: SeedTriple, rep: u64) -> SeedTriple {
    SeedTriple {
        s_omega: base.s_omega,
        s_data: base.s_data.wrapping_add(rep),
        s_theta: base.s_theta.wrapping_add(rep),
    }
}

/// Draw `k` distinct elements of `items` uniformly, in draw order.
///
/// Partial Fisher-Yates over a copy: for i in 0..k swap position i with a
/// uniform position in i..n. This is the one sampling-without-replacement
/// primitive used by the whole crate (splits, seed sets, subsampling), so
/// the draw pattern is identical everywhere.
///
/// Panics if `k > items.len()`; callers clamp first.
pub fn sample_without_replacement(items: &[usize], k: usize, rng: &mut Stream) -> Vec<usize> {
    assert!(
        k <= items.len(),
        "sample_without_replacement: k={} > n={}",
        k,
        items.len()
    );
    let mut v = items.to_vec();
    let n = v.len();
    for i in 0..k {
        let j = rng.random_range(i..n);
        v.swap(i, j);
    }
    v.truncate(k);
    v
}
