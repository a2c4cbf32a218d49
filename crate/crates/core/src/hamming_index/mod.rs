//! Packed bit strings, Hamming distance and exact BK-tree search.

mod bk;
mod partition;

pub use bk::{BkIndex, BkStats, Match, MatchResult, MatchStatus};
pub use partition::TurnPartitionedIndex;

use std::fmt;
use std::str::FromStr;

use crate::error::IndexError;

/// Number of 64-bit words needed for `bits` bits.
pub const fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

/// Popcount of the XOR of two equally long word slices.
#[inline]
pub fn hamming_words(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// A fixed-length bit string packed LSB-first into 64-bit words. Bits past
/// `len` are always zero.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; words_for(len)],
            len,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    /// Rejects words that set bits beyond `len`.
    pub fn from_words(words: Vec<u64>, len: usize) -> Result<Self, IndexError> {
        if words.len() != words_for(len) {
            return Err(IndexError::InvalidBits(format!(
                "{} words cannot hold exactly {len} bits",
                words.len()
            )));
        }
        if !len.is_multiple_of(64) {
            if let Some(last) = words.last() {
                if last >> (len % 64) != 0 {
                    return Err(IndexError::InvalidBits(format!(
                        "bits set beyond length {len}"
                    )));
                }
            }
        }
        Ok(Self { words, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    /// Appends `count` bits taken from the low end of `value`.
    pub fn push_bits(&mut self, value: u64, count: usize) {
        for k in 0..count {
            if self.len.is_multiple_of(64) {
                self.words.push(0);
            }
            self.len += 1;
            self.set(self.len - 1, value >> k & 1 == 1);
        }
    }

    /// Copy of bits `start..start + len`.
    pub fn slice(&self, start: usize, len: usize) -> BitString {
        assert!(start + len <= self.len);
        let mut out = BitString::zeros(len);
        for i in 0..len {
            out.set(i, self.get(start + i));
        }
        out
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }
}

/// Number of differing bits. Both strings must have the same length.
pub fn hamming(a: &BitString, b: &BitString) -> Result<u32, IndexError> {
    if a.len != b.len {
        return Err(IndexError::LengthMismatch {
            expected: a.len,
            actual: b.len,
        });
    }
    Ok(hamming_words(&a.words, &b.words))
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = IndexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(IndexError::InvalidBits(format!(
                    "unexpected character {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BitString::from_bools(&bits))
    }
}
