//! Side-information records and their hashed bag-of-tokens form.

use serde::{Deserialize, Serialize};

/// A location id plus its side-information token multiset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationRecord {
    pub id: String,
    pub tokens: Vec<String>,
}

impl LocationRecord {
    pub fn new(id: impl Into<String>, tokens: Vec<String>) -> Self {
        Self {
            id: id.into(),
            tokens,
        }
    }

    /// A record with no side information.
    pub fn cold(id: impl Into<String>) -> Self {
        Self::new(id, Vec::new())
    }
}

/// 64-bit FNV-1a. Stable across platforms and toolchains, unlike `DefaultHasher`.
fn fnv1a(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

pub fn token_bucket(token: &str, buckets: usize) -> u32 {
    (fnv1a(token.as_bytes()) % buckets as u64) as u32
}

/// Hashed token buckets of one location, with multiplicity, in ascending order.
///
/// The canonical order makes the embedding sum independent of token order
/// down to the last bit.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenBag {
    buckets: Vec<u32>,
}

impl TokenBag {
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S], buckets: usize) -> Self {
        let mut ids: Vec<u32> = tokens
            .iter()
            .map(|t| token_bucket(t.as_ref(), buckets))
            .collect();
        ids.sort_unstable();
        Self { buckets: ids }
    }

    pub fn buckets(&self) -> &[u32] {
        &self.buckets
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }
}
