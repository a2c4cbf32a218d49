use std::collections::HashMap;

use super::{BitString, BkIndex, MatchResult};
use crate::error::IndexError;

/// One BK tree per distinct turn pattern, so an exact turn match is a lookup
/// and only the matching partition is searched.
#[derive(Clone, Debug)]
pub struct TurnPartitionedIndex {
    descriptor_bits: usize,
    turn_bits: usize,
    parts: HashMap<u64, BkIndex>,
}

impl TurnPartitionedIndex {
    /// Turn patterns are keyed by their single packed word, so at most 64 turn bits.
    pub fn new(descriptor_bits: usize, turn_bits: usize) -> Result<Self, IndexError> {
        if turn_bits > 64 {
            return Err(IndexError::InvalidBits(format!(
                "{turn_bits} turn bits exceed 64"
            )));
        }
        Ok(Self {
            descriptor_bits,
            turn_bits,
            parts: HashMap::new(),
        })
    }

    fn key(&self, turns: &BitString) -> Result<u64, IndexError> {
        if turns.len() != self.turn_bits {
            return Err(IndexError::LengthMismatch {
                expected: self.turn_bits,
                actual: turns.len(),
            });
        }
        Ok(turns.words().first().copied().unwrap_or(0))
    }

    pub fn insert(
        &mut self,
        descriptor: &BitString,
        turns: &BitString,
        route: u32,
    ) -> Result<(), IndexError> {
        let key = self.key(turns)?;
        if descriptor.len() != self.descriptor_bits {
            return Err(IndexError::LengthMismatch {
                expected: self.descriptor_bits,
                actual: descriptor.len(),
            });
        }
        self.insert_words(descriptor.words(), key, route);
        Ok(())
    }

    /// Inserts pre-packed words; the caller guarantees both lengths.
    pub fn insert_words(&mut self, descriptor: &[u64], turn_key: u64, route: u32) {
        let bits = self.descriptor_bits;
        self.parts
            .entry(turn_key)
            .or_insert_with(|| BkIndex::new(bits))
            .insert_words(descriptor, route);
    }

    pub fn partition(&self, turns: &BitString) -> Result<Option<&BkIndex>, IndexError> {
        Ok(self.parts.get(&self.key(turns)?))
    }

    pub fn partition_count(&self) -> usize {
        self.parts.len()
    }

    pub fn len(&self) -> usize {
        self.parts.values().map(BkIndex::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Closest descriptors among routes whose turn pattern equals `turns`.
    /// An unseen turn pattern yields an empty result with
    /// [`MatchStatus::TurnFilterEmpty`](super::MatchStatus::TurnFilterEmpty).
    pub fn match_route(
        &self,
        descriptor: &BitString,
        turns: &BitString,
        tiers: usize,
    ) -> Result<MatchResult, IndexError> {
        if descriptor.len() != self.descriptor_bits {
            return Err(IndexError::LengthMismatch {
                expected: self.descriptor_bits,
                actual: descriptor.len(),
            });
        }
        match self.partition(turns)? {
            Some(part) => part.nearest(descriptor, tiers),
            None => Ok(MatchResult::empty_turns()),
        }
    }
}
