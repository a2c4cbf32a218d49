//! Routes over adjacent locations, their descriptors and turn patterns, and
//! the per-length route database.

mod adjacency;
mod database;
mod format;

pub use adjacency::{
    build_adjacency, enumerate_routes, AdjacencyMatrix, RouteEnumeration, SimplePaths,
};
pub use database::{DatabaseConfig, LengthSize, RouteDatabase, RouteRef, SizeReport};
pub use format::{DB_MAGIC, DB_VERSION};

use crate::error::RouteError;
use crate::hamming_index::BitString;
use crate::map_model::{angular_difference, Bsd, LocationId};

/// Heading change at or above which consecutive locations count as a turn, degrees.
pub const DEFAULT_TURN_THRESHOLD: f64 = 60.0;

/// A simple directed path of locations.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Route(pub Vec<LocationId>);

impl Route {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn locations(&self) -> &[LocationId] {
        &self.0
    }

    pub fn last(&self) -> Option<LocationId> {
        self.0.last().copied()
    }
}

/// Concatenated per-location descriptors, 4 bits per location in route order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct RouteDescriptor(pub BitString);

impl RouteDescriptor {
    pub fn from_bsds(bsds: &[Bsd]) -> Self {
        let mut bits = BitString::default();
        for d in bsds {
            bits.push_bits(d.pack() as u64, 4);
        }
        Self(bits)
    }

    pub fn bits(&self) -> &BitString {
        &self.0
    }

    pub fn location_count(&self) -> usize {
        self.0.len() / 4
    }

    pub fn bsd(&self, i: usize) -> Bsd {
        let v = (0..4).fold(0u8, |acc, k| acc | (self.0.get(4 * i + k) as u8) << k);
        Bsd::unpack(v).expect("four bits")
    }

    pub fn bsds(&self) -> Vec<Bsd> {
        (0..self.location_count()).map(|i| self.bsd(i)).collect()
    }
}

/// One bit per consecutive location pair, set where the heading changes by at
/// least the turn threshold.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct TurnPattern(pub BitString);

impl TurnPattern {
    pub fn from_bools(bits: &[bool]) -> Self {
        Self(BitString::from_bools(bits))
    }

    pub fn bits(&self) -> &BitString {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The pattern packed into one word; patterns are at most 63 bits long.
    pub fn key(&self) -> u64 {
        self.0.words().first().copied().unwrap_or(0)
    }
}

/// Whether the smallest angle between two headings reaches `tau` (inclusive).
pub fn turn_bit(theta_i: f64, theta_j: f64, tau: f64) -> bool {
    angular_difference(theta_i, theta_j) >= tau
}

pub fn route_descriptor(route: &Route, bsds: &[Bsd]) -> Result<RouteDescriptor, RouteError> {
    let picked = route
        .locations()
        .iter()
        .map(|l| {
            bsds.get(l.index())
                .copied()
                .ok_or(RouteError::MissingBsd(l.0))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RouteDescriptor::from_bsds(&picked))
}

pub fn turn_pattern(route: &Route, headings: &[f64], tau: f64) -> Result<TurnPattern, RouteError> {
    let h = route
        .locations()
        .iter()
        .map(|l| {
            headings
                .get(l.index())
                .copied()
                .ok_or(RouteError::MissingHeading(l.0))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TurnPattern::from_bools(
        &h.windows(2)
            .map(|w| turn_bit(w[0], w[1], tau))
            .collect::<Vec<_>>(),
    ))
}
