use std::fmt;
use std::str::FromStr;

use crate::error::MapError;

/// A 4-bit binary semantic descriptor.
///
/// Bit order (also the character order of the string form and the order in
/// which descriptors are concatenated along routes):
///
/// | position | packed bit | feature            |
/// |----------|------------|--------------------|
/// | 0        | `0b0001`   | junction in front  |
/// | 1        | `0b0010`   | junction behind    |
/// | 2        | `0b0100`   | gap on the left    |
/// | 3        | `0b1000`   | gap on the right   |
///
/// So `"1010"` means a junction ahead and a gap to the left.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Bsd(u8);

impl Bsd {
    pub const JUNCTION_FRONT: usize = 0;
    pub const JUNCTION_BACK: usize = 1;
    pub const GAP_LEFT: usize = 2;
    pub const GAP_RIGHT: usize = 3;

    pub fn from_bits(bits: [bool; 4]) -> Self {
        let mut v = 0u8;
        for (i, b) in bits.iter().enumerate() {
            if *b {
                v |= 1 << i;
            }
        }
        Bsd(v)
    }

    pub fn bits(self) -> [bool; 4] {
        [self.bit(0), self.bit(1), self.bit(2), self.bit(3)]
    }

    pub fn bit(self, position: usize) -> bool {
        debug_assert!(position < 4);
        self.0 >> position & 1 == 1
    }

    pub fn with_bit(self, position: usize, value: bool) -> Self {
        let mask = 1u8 << position;
        Bsd(if value { self.0 | mask } else { self.0 & !mask })
    }

    /// Packed value in `0..16`.
    pub fn pack(self) -> u8 {
        self.0
    }

    pub fn unpack(value: u8) -> Result<Self, MapError> {
        if value < 16 {
            Ok(Bsd(value))
        } else {
            Err(MapError::InvalidDescriptor(format!(
                "packed value {value} exceeds 4 bits"
            )))
        }
    }

    /// Descriptor seen when travelling the opposite way: front/back and
    /// left/right swap.
    pub fn reversed(self) -> Self {
        let b = self.bits();
        Bsd::from_bits([b[1], b[0], b[3], b[2]])
    }

    pub fn hamming(self, other: Bsd) -> u32 {
        (self.0 ^ other.0).count_ones()
    }

    /// All sixteen patterns in packed order.
    pub fn all() -> impl Iterator<Item = Bsd> {
        (0u8..16).map(Bsd)
    }
}

/// Swaps front↔back and left↔right.
pub fn reverse_bsd(d: Bsd) -> Bsd {
    d.reversed()
}

impl fmt::Display for Bsd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bsd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bsd({self})")
    }
}

impl FromStr for Bsd {
    type Err = MapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let chars: Vec<char> = s.trim().chars().collect();
        if chars.len() != 4 {
            return Err(MapError::InvalidDescriptor(format!(
                "expected 4 bits, got {s:?}"
            )));
        }
        let mut bits = [false; 4];
        for (i, c) in chars.iter().enumerate() {
            bits[i] = match c {
                '0' => false,
                '1' => true,
                _ => {
                    return Err(MapError::InvalidDescriptor(format!(
                        "bad bit {c:?} in {s:?}"
                    )))
                }
            };
        }
        Ok(Bsd::from_bits(bits))
    }
}

/// Descriptor per directed location, indexed by [`LocationId`](super::LocationId).
pub type BsdTable = Vec<Bsd>;
