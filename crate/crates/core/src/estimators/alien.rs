//! Dense encodings of a location's votes on attributes other than the target.
//!
//! Slots follow canonical attribute order; the target attribute's slots are
//! always zero so a pair never sees its own votes.

use serde::{Deserialize, Serialize};

use crate::consensus::VoteCount;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlienEncoding {
    /// No alien input (ML architecture).
    None,
    /// `(Y, N)` per attribute.
    Raw,
    /// `+1` yes majority, `−1` no majority, `0` tie or unvoted.
    Maj,
    /// `(m, 1 − m)` per attribute with `m = (Y + 1) / (Y + N + 2)`.
    Prob,
}

impl AlienEncoding {
    /// Vector length for `attributes` attributes.
    pub fn width(self, attributes: usize) -> usize {
        match self {
            AlienEncoding::None => 0,
            AlienEncoding::Maj => attributes,
            AlienEncoding::Raw | AlienEncoding::Prob => 2 * attributes,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AlienEncoding::None => "none",
            AlienEncoding::Raw => "raw",
            AlienEncoding::Maj => "maj",
            AlienEncoding::Prob => "prob",
        }
    }
}

impl std::str::FromStr for AlienEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AlienEncoding::None),
            "raw" => Ok(AlienEncoding::Raw),
            "maj" => Ok(AlienEncoding::Maj),
            "prob" => Ok(AlienEncoding::Prob),
            other => Err(Error::config(
                "alien",
                format!("unknown encoding `{other}`"),
            )),
        }
    }
}

/// Encoded alien votes for one location-attribute pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AlienVoteVector(Vec<f64>);

impl AlienVoteVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Encodes `location_votes` (one entry per attribute, canonical order) for
/// the pair whose attribute is `target`.
pub fn encode_alien(
    location_votes: &[VoteCount],
    target: usize,
    encoding: AlienEncoding,
) -> Result<AlienVoteVector> {
    if target >= location_votes.len() {
        return Err(Error::Contract(format!(
            "target attribute {target} out of range for {} attributes",
            location_votes.len()
        )));
    }
    let mut out = vec![0.0; encoding.width(location_votes.len())];
    for (a, votes) in location_votes.iter().enumerate() {
        if a == target {
            continue;
        }
        let (y, n) = (votes.yes as f64, votes.no as f64);
        match encoding {
            AlienEncoding::None => {}
            AlienEncoding::Raw => {
                out[2 * a] = y;
                out[2 * a + 1] = n;
            }
            AlienEncoding::Maj => {
                out[a] = match votes.yes.cmp(&votes.no) {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Less => -1.0,
                    std::cmp::Ordering::Equal => 0.0,
                };
            }
            AlienEncoding::Prob => {
                let m = (y + 1.0) / (y + n + 2.0);
                out[2 * a] = m;
                out[2 * a + 1] = 1.0 - m;
            }
        }
    }
    Ok(AlienVoteVector(out))
}
